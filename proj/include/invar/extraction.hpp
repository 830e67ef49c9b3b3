#pragma once

#include "invar/dsl.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace invar {

struct PromptParams {
  std::string role = "CPS Documentation Analyst";
  /// Basis library shown in the invariant generation step.
  std::string basis_library =
      "s_i, s_i^k (k = 2..4), s_i*s_j, s_i/s_j, d/dt(s_i), d2/dt2(s_i)";
  int max_explanation_words = 40;
};

struct PromptStep {
  std::string title;
  std::string body;
};

struct PromptBundle {
  std::string system_role;
  std::vector<PromptStep> steps;
  std::vector<std::string> placeholders;
  std::vector<std::string> key_rules;
  std::string output_format;
  std::string doc_markdown;

  /// Deterministic plain-text rendering with the document appended.
  std::string text() const;
};

/// Throws Error(empty_document) when the document is blank.
PromptBundle render_prompt(std::string_view doc_markdown, const PromptParams& params = {});

struct Reject {
  std::size_t line_no = 0;  // 1-based
  std::string text;
  std::string reason;
};

struct ExtractionResult {
  std::vector<dsl::Invariant> invariants;
  std::vector<Reject> rejects;
  std::string raw_reply;
};

/// Lines that look like equations are parsed as DSL; the rest is ignored.
/// Never throws.
ExtractionResult parse_llm_output(std::string_view reply);

/// True when the line (after markdown decoration is stripped) has the
/// shape `[id:] lhs = rhs`.
bool looks_like_equation(std::string_view line);

struct LlmClientConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string token_env = "INVAR_LLM_TOKEN";
  double temperature = 0.0;
  double timeout_s = 120.0;
  int max_retries = 3;
  double backoff_initial_s = 1.0;

  /// Throws Error(bad_config).
  void validate() const;
};

/// One chat-completion exchange; 429 and 5xx are retried with doubling
/// backoff. The token is read from the environment before any I/O.
std::string fetch_completion(const std::string& prompt, const LlmClientConfig& cfg);

}  // namespace invar
