#include "invar/extraction.hpp"

#include "invar/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace invar {

PromptBundle render_prompt(std::string_view doc, const PromptParams& params) {
  if (doc.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw Error(Errc::empty_document, "documentation markdown is empty");
  }
  PromptBundle b;
  b.system_role = "You are a " + params.role +
                  ". Your task is to read the provided CPS documentation and generate functional-form "
                  "physical invariants that can be used for anomaly detection.";
  b.steps = {
      {"Glossary Construction",
       "Extract a glossary of procedure, device and operation names from headings, tables, figures and "
       "captions as (Canonical_ID, Aliases, Description), where Aliases are the labels as printed in the "
       "document. Use only Canonical_IDs in later steps; mark unknown aliases and locations as UNKNOWN."},
      {"Process Summaries", "For each process, write a summary and cite the devices involved."},
      {"Candidate Data Point Groups",
       "Within each process, list groups of data points plausibly linked by a fundamental physical "
       "relationship (conservation laws, flow dynamics, thermodynamic or kinematic coupling). Cite the "
       "source page/figure/table IDs for every group."},
      {"Invariant Generation",
       "For every group {s_1, ..., s_p}, compose invariants of the form sum_k C_k * g_k(s_1, ..., s_p) = 0 "
       "with g_k drawn from {" + params.basis_library + "}.\n"
       "- Leave the coefficients C_k symbolic; do not assign numbers.\n"
       "- Perform a dimensional-homogeneity check and drop invalid equations.\n"
       "- Output the equation, a deduction explanation and the Refs of source for each invariant."},
  };
  b.placeholders = {"[Glossary]", "[Process Summaries]", "[Candidate Groups]", "[List of Invariants]"};
  b.key_rules = {
      "No numeric coefficients; keep C_k symbolic.",
      "Use only IDs from the glossary.",
      "Explain each equation in <= " + std::to_string(params.max_explanation_words) + " words.",
      "Reject invariants that fail dimensional checks.",
  };
  b.output_format =
      "Write each invariant on its own line, solved for one term:\n"
      "  INV<n>: <lhs> = C1*<term> + C2*<term> ... // Refs: <source>\n"
      "Terms: X, X^k, X*Y, X/Y, d/dt(X), d2/dt2(X). A bare coefficient (e.g. + C0) is an intercept. "
      "Put the explanation on the following line, not on the equation line.";
  b.doc_markdown = std::string(doc);
  return b;
}

std::string PromptBundle::text() const {
  std::ostringstream o;
  o << "## Role Assignment\n" << system_role << "\n\n## Steps of operation\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    o << "\n### Step " << i + 1 << ": " << steps[i].title << "\n" << steps[i].body << "\n";
  }
  o << "\n## Placeholders (fill or replace as appropriate)\n";
  for (const auto& p : placeholders) o << "- " << p << "\n";
  o << "\n## Key Rules\n";
  for (std::size_t i = 0; i < key_rules.size(); ++i) o << i + 1 << ". " << key_rules[i] << "\n";
  o << "\n## Output Format\n" << output_format << "\n\n## Documentation\n\n" << doc_markdown;
  if (doc_markdown.empty() || doc_markdown.back() != '\n') o << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------

namespace {

std::string strip_decoration(std::string_view line) {
  std::string s(line);
  for (const char* tok : {"**", "`", "$"}) {
    for (auto p = s.find(tok); p != std::string::npos; p = s.find(tok)) s.erase(p, std::strlen(tok));
  }
  static const std::regex bullet(R"(^\s*(?:[-*+>]\s+|\d+[.)]\s+)+)");
  s = std::regex_replace(s, bullet, "", std::regex_constants::format_first_only);
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

bool looks_like_equation(std::string_view raw) {
  std::string s = strip_decoration(raw);
  if (const auto c = s.find("//"); c != std::string::npos) s.erase(c);
  const auto eq = s.find('=');
  if (eq == std::string::npos || s.find('=', eq + 1) != std::string::npos) return false;
  if (eq > 0 && (s[eq - 1] == '<' || s[eq - 1] == '>' || s[eq - 1] == '!')) return false;
  std::string lhs = s.substr(0, eq);
  const std::string rhs = s.substr(eq + 1);
  if (rhs.find_first_not_of(" \t") == std::string::npos) return false;

  static const std::regex id_prefix(R"(^\s*[A-Za-z0-9_]+\s*:)");
  lhs = std::regex_replace(lhs, id_prefix, "", std::regex_constants::format_first_only);
  static const std::regex deriv(R"(d2\s*/\s*dt2|d\s*/\s*dt)");
  lhs = std::regex_replace(lhs, deriv, "D");
  static const std::regex allowed(R"(^[A-Za-z0-9_()/^*+\- \t\xC2\xB7\xE2\x88\x92.]+$)");
  if (!std::regex_match(lhs, allowed)) return false;
  // Two bare words in a row is prose, not an expression.
  static const std::regex prose(R"([A-Za-z][A-Za-z0-9_]*\s+[A-Za-z])");
  return !std::regex_search(lhs, prose) && std::regex_search(lhs, std::regex("[A-Za-z]"));
}

ExtractionResult parse_llm_output(std::string_view reply) {
  ExtractionResult out;
  out.raw_reply = std::string(reply);
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= reply.size()) {
    auto nl = reply.find('\n', pos);
    if (nl == std::string_view::npos) nl = reply.size();
    const std::string_view line = reply.substr(pos, nl - pos);
    ++line_no;
    pos = nl + 1;
    if (!looks_like_equation(line)) continue;
    const std::string text = strip_decoration(line);
    try {
      dsl::Invariant inv = dsl::parse_invariant(text);
      if (inv.id.empty()) inv.id = "L" + std::to_string(line_no);
      if (!ids.insert(inv.id).second) {
        out.rejects.push_back({line_no, text, "duplicate id '" + inv.id + "'"});
        continue;
      }
      out.invariants.push_back(std::move(inv));
    } catch (const std::exception& e) {
      out.rejects.push_back({line_no, text, e.what()});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void LlmClientConfig::validate() const {
  static const std::regex url(R"(^https?://[^/\s:]+(:\d+)?(/\S*)?$)");
  if (!std::regex_match(endpoint, url)) throw Error(Errc::bad_config, "malformed endpoint URL '" + endpoint + "'");
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw Error(Errc::bad_config, "temperature must lie in [0, 2]");
  if (!(timeout_s > 0.0)) throw Error(Errc::bad_config, "timeout must be positive");
  if (max_retries < 0) throw Error(Errc::bad_config, "max_retries must be >= 0");
  if (!(backoff_initial_s >= 0.0)) throw Error(Errc::bad_config, "backoff must be non-negative");
  if (model.empty()) throw Error(Errc::bad_config, "model is empty");
}

std::string fetch_completion(const std::string& prompt, const LlmClientConfig& cfg) {
  const char* token = cfg.token_env.empty() ? nullptr : std::getenv(cfg.token_env.c_str());
  if (!token || !*token) throw Error(Errc::auth_missing, "environment variable " + cfg.token_env + " is not set");
  cfg.validate();

  static const std::regex url(R"(^(https?://[^/]+)(/\S*)?$)");
  std::smatch m;
  std::regex_match(cfg.endpoint, m, url);
  const std::string base = m[1];
  const std::string path = m[2].matched ? m[2].str() : "/";

  const nlohmann::json body = {
      {"model", cfg.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", cfg.temperature},
  };
  const std::string payload = body.dump();

  httplib::Client cli(base);
  const auto secs = static_cast<time_t>(cfg.timeout_s);
  const auto usecs = static_cast<time_t>((cfg.timeout_s - std::floor(cfg.timeout_s)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  cli.set_bearer_token_auth(token);

  double backoff = cfg.backoff_initial_s;
  for (int attempt = 0;; ++attempt) {
    auto res = cli.Post(path, payload, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
        throw Error(Errc::timeout, "request to " + base + " timed out (" + httplib::to_string(err) + ")");
      }
      throw Error(Errc::io, "request to " + base + " failed: " + httplib::to_string(err));
    }
    const int status = res->status;
    const bool retryable = status == 429 || (status >= 500 && status < 600);
    if (retryable && attempt < cfg.max_retries) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
      continue;
    }
    if (status < 200 || status >= 300) {
      throw Error(Errc::http_status, "HTTP " + std::to_string(status) + " from " + base);
    }
    try {
      const auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::malformed_response, std::string("unexpected completion payload: ") + e.what());
    }
  }
}

}  // namespace invar
