#pragma once

// Functional-form invariant language.
//
//   [ID:] LHS = [+|-] TERM ([+|-] TERM)* [| no_intercept] [// Refs: text] [# comment]
//
// LHS is a single basis term with unit coefficient. Each TERM is either
// `Ck*BASIS` or a bare `Ck`, the latter naming the intercept explicitly.
// Basis spellings: X, X^k (k in 2..4), X*Y[*Z...], X/Y, d/dt(X), d2/dt2(X),
// exp(X).

#include "invar/error.hpp"

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace invar::dsl {

struct ChannelRef {
  std::string name;

  auto operator<=>(const ChannelRef&) const = default;
};

/// True for names made of [A-Za-z0-9_] that contain at least one letter.
bool is_channel_name(std::string_view name) noexcept;

/// True for `C<n>` / `c<n>`.
bool is_coefficient_label(std::string_view label) noexcept;

enum class BasisKind { identity, power, product, ratio, d1, d2, exp };

std::string_view to_string(BasisKind kind) noexcept;

inline constexpr int kMinExponent = 2;
inline constexpr int kMaxExponent = 4;
inline constexpr std::size_t kMaxProductFactors = 4;

/// One g_k of the basis library. `operands` holds one channel for the unary
/// kinds, the numerator/denominator for ratio, and 2..4 factors for product.
struct BasisTerm {
  BasisKind kind = BasisKind::identity;
  std::vector<ChannelRef> operands;
  int exponent = 1;

  bool operator==(const BasisTerm&) const = default;

  static BasisTerm identity(ChannelRef c);
  static BasisTerm power(ChannelRef c, int exponent);
  static BasisTerm product(std::vector<ChannelRef> factors);
  static BasisTerm ratio(ChannelRef num, ChannelRef den);
  static BasisTerm d1(ChannelRef c);
  static BasisTerm d2(ChannelRef c);
  static BasisTerm exp(ChannelRef c);

  /// Number of leading samples a derivative term invalidates.
  int derivative_order() const noexcept;
};

struct Regressor {
  int sign = +1;
  std::string coeff;
  BasisTerm term;

  bool operator==(const Regressor&) const = default;
};

struct ExplicitIntercept {
  int sign = +1;
  std::string label;

  bool operator==(const ExplicitIntercept&) const = default;
};

struct Invariant {
  std::string id;
  BasisTerm regressand;
  std::vector<Regressor> regressors;
  bool has_intercept = true;
  std::optional<ExplicitIntercept> intercept;
  std::string provenance;
  std::string source_text;

  /// Structural equality; source_text is deliberately not compared.
  bool operator==(const Invariant& other) const;
};

/// Parse failure with a 0-based column into the input and the set of
/// tokens the parser would have accepted there.
class DslError : public Error {
 public:
  enum class Kind { syntax, duplicate_coefficient, empty_rhs, exponent_out_of_range };

  DslError(Kind kind, std::size_t position, std::vector<std::string> expected,
           const std::string& message);

  Kind kind() const noexcept { return kind_; }
  std::size_t position() const noexcept { return position_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  Kind kind_;
  std::size_t position_;
  std::vector<std::string> expected_;
};

std::string_view to_string(DslError::Kind kind) noexcept;

Invariant parse_invariant(std::string_view text);

struct LineError {
  std::size_t line_no = 0;  // 1-based
  DslError error;
};

struct ParsedFile {
  std::vector<Invariant> invariants;
  std::vector<LineError> errors;
};

/// Parses one equation per line. Blank lines and `#` lines are skipped; a
/// bad line is reported and the batch continues. Lines without an id get
/// `L<line_no>`.
ParsedFile parse_invariant_file(std::string_view text);

std::string format_basis(const BasisTerm& term);
std::string format_invariant(const Invariant& inv);

/// Every channel referenced by the regressand and regressors.
std::set<ChannelRef> channels_of(const Invariant& inv);

}  // namespace invar::dsl
