#include "invar/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace invar::dsl {

namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool has_letter(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; });
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

enum class Tok { ident, number, deriv1, deriv2, eq, plus, minus, star, slash, caret, lparen, rparen, colon, pipe, refs, end };

struct Token {
  Tok kind;
  std::string text;
  std::size_t pos;
};

std::string describe(Tok t) {
  switch (t) {
    case Tok::ident: return "identifier";
    case Tok::number: return "number";
    case Tok::deriv1: return "'d/dt'";
    case Tok::deriv2: return "'d2/dt2'";
    case Tok::eq: return "'='";
    case Tok::plus: return "'+'";
    case Tok::minus: return "'-'";
    case Tok::star: return "'*'";
    case Tok::slash: return "'/'";
    case Tok::caret: return "'^'";
    case Tok::lparen: return "'('";
    case Tok::rparen: return "')'";
    case Tok::colon: return "':'";
    case Tok::pipe: return "'|'";
    case Tok::refs: return "'//'";
    case Tok::end: return "end of input";
  }
  return "?";
}

[[noreturn]] void syntax_error(std::size_t pos, std::vector<std::string> expected,
                               const std::string& found) {
  std::ostringstream msg;
  msg << "syntax error at column " << pos + 1 << ": expected ";
  for (std::size_t i = 0; i < expected.size(); ++i) msg << (i ? " or " : "") << expected[i];
  msg << ", found " << found;
  throw DslError(DslError::Kind::syntax, pos, std::move(expected), msg.str());
}

bool starts_with_at(std::string_view text, std::size_t pos, std::string_view prefix) {
  return text.substr(pos, prefix.size()) == prefix;
}

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++i;
      continue;
    }
    if (c == '#') break;
    if (starts_with_at(text, i, "//")) {
      out.push_back({Tok::refs, std::string(text.substr(i + 2)), i});
      i = n;
      break;
    }
    // U+00B7 middle dot and U+2212 minus, as written in documents.
    if (starts_with_at(text, i, "\xC2\xB7")) {
      out.push_back({Tok::star, "*", i});
      i += 2;
      continue;
    }
    if (starts_with_at(text, i, "\xE2\x88\x92")) {
      out.push_back({Tok::minus, "-", i});
      i += 3;
      continue;
    }
    auto deriv_at = [&](std::string_view spelling) {
      return starts_with_at(text, i, spelling) &&
             (i + spelling.size() >= n || !is_ident_char(text[i + spelling.size()]));
    };
    if (deriv_at("d2/dt2")) {
      out.push_back({Tok::deriv2, "d2/dt2", i});
      i += 6;
      continue;
    }
    if (deriv_at("d/dt")) {
      out.push_back({Tok::deriv1, "d/dt", i});
      i += 4;
      continue;
    }
    if (is_ident_char(c)) {
      std::size_t j = i;
      while (j < n && is_ident_char(text[j])) ++j;
      std::string_view run = text.substr(i, j - i);
      const bool digits_only =
          std::all_of(run.begin(), run.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)) != 0; });
      if (digits_only) {
        if (j < n && text[j] == '.') {
          ++j;
          while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        }
        out.push_back({Tok::number, std::string(text.substr(i, j - i)), i});
      } else {
        out.push_back({Tok::ident, std::string(run), i});
      }
      i = j;
      continue;
    }
    if (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
      std::size_t j = i + 1;
      while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      out.push_back({Tok::number, std::string(text.substr(i, j - i)), i});
      i = j;
      continue;
    }
    Tok kind;
    switch (c) {
      case '=': kind = Tok::eq; break;
      case '+': kind = Tok::plus; break;
      case '-': kind = Tok::minus; break;
      case '*': kind = Tok::star; break;
      case '/': kind = Tok::slash; break;
      case '^': kind = Tok::caret; break;
      case '(': kind = Tok::lparen; break;
      case ')': kind = Tok::rparen; break;
      case ':': kind = Tok::colon; break;
      case '|': kind = Tok::pipe; break;
      default:
        syntax_error(i, {"term"}, "'" + std::string(1, c) + "'");
    }
    out.push_back({kind, std::string(1, c), i});
    ++i;
  }
  out.push_back({Tok::end, "", i});
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text), toks_(lex(text)) {}

  Invariant parse() {
    Invariant inv;
    inv.source_text = std::string(text_);

    if (peek().kind == Tok::ident && peek(1).kind == Tok::colon) {
      inv.id = next().text;
      next();
    }

    inv.regressand = basis();
    expect(Tok::eq);

    if (at_rhs_end()) {
      throw DslError(DslError::Kind::empty_rhs, peek().pos, {"term"},
                     "empty right-hand side at column " + std::to_string(peek().pos + 1));
    }

    bool first = true;
    for (;;) {
      int sign = +1;
      if (peek().kind == Tok::plus || peek().kind == Tok::minus) {
        sign = next().kind == Tok::minus ? -1 : +1;
      } else if (!first) {
        break;
      }
      first = false;
      term(inv, sign);
    }

    if (peek().kind == Tok::pipe) {
      next();
      const Token& d = peek();
      if (d.kind != Tok::ident || d.text != "no_intercept") {
        syntax_error(d.pos, {"'no_intercept'"}, found(d));
      }
      next();
      if (inv.intercept) {
        throw DslError(DslError::Kind::syntax, d.pos, {},
                       "explicit intercept " + inv.intercept->label + " conflicts with no_intercept");
      }
      inv.has_intercept = false;
    }
    if (peek().kind == Tok::refs) {
      std::string refs = trim(next().text);
      if (lower(refs.substr(0, 5)) == "refs:") refs = trim(refs.substr(5));
      inv.provenance = std::move(refs);
    }
    if (peek().kind != Tok::end) {
      syntax_error(peek().pos, {"'+'", "'-'", "'|'", "'//'", describe(Tok::end)}, found(peek()));
    }
    if (inv.regressors.empty()) {
      throw DslError(DslError::Kind::empty_rhs, peek().pos, {"term"},
                     "right-hand side has no regressor terms");
    }
    return inv;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(cur_ + ahead, toks_.size() - 1)];
  }
  const Token& next() { return toks_[std::min(cur_++, toks_.size() - 1)]; }

  static std::string found(const Token& t) {
    if (t.kind == Tok::end) return "end of input";
    return "'" + t.text + "'";
  }

  const Token& expect(Tok kind) {
    if (peek().kind != kind) syntax_error(peek().pos, {describe(kind)}, found(peek()));
    return next();
  }

  bool at_rhs_end() const {
    const Tok k = peek().kind;
    return k == Tok::end || k == Tok::pipe || k == Tok::refs;
  }

  ChannelRef channel() {
    const Token& t = peek();
    if (t.kind != Tok::ident) syntax_error(t.pos, {"channel"}, found(t));
    if (!is_channel_name(t.text)) {
      syntax_error(t.pos, {"channel"}, "invalid channel name '" + t.text + "'");
    }
    next();
    return ChannelRef{t.text};
  }

  BasisTerm basis() {
    const Token& t = peek();
    if (t.kind == Tok::deriv1 || t.kind == Tok::deriv2) {
      next();
      expect(Tok::lparen);
      ChannelRef c = channel();
      expect(Tok::rparen);
      return t.kind == Tok::deriv1 ? BasisTerm::d1(std::move(c)) : BasisTerm::d2(std::move(c));
    }
    if (t.kind == Tok::ident && t.text == "exp" && peek(1).kind == Tok::lparen) {
      next();
      next();
      ChannelRef c = channel();
      expect(Tok::rparen);
      return BasisTerm::exp(std::move(c));
    }
    if (t.kind != Tok::ident) {
      syntax_error(t.pos, {"channel", "'d/dt'", "'d2/dt2'", "'exp'"}, found(t));
    }
    ChannelRef first = channel();
    switch (peek().kind) {
      case Tok::caret: {
        next();
        const Token& k = peek();
        if (k.kind != Tok::number || k.text.find('.') != std::string::npos) {
          syntax_error(k.pos, {"integer exponent"}, found(k));
        }
        next();
        int exponent = 0;
        auto [ptr, ec] = std::from_chars(k.text.data(), k.text.data() + k.text.size(), exponent);
        if (ec != std::errc{} || exponent < kMinExponent || exponent > kMaxExponent) {
          throw DslError(DslError::Kind::exponent_out_of_range, k.pos, {"2", "3", "4"},
                         "exponent " + k.text + " at column " + std::to_string(k.pos + 1) +
                             " outside [2, 4]");
        }
        return BasisTerm::power(std::move(first), exponent);
      }
      case Tok::slash: {
        next();
        return BasisTerm::ratio(std::move(first), channel());
      }
      case Tok::star: {
        std::vector<ChannelRef> factors{std::move(first)};
        while (peek().kind == Tok::star) {
          const Token& star = next();
          if (factors.size() == kMaxProductFactors) {
            syntax_error(star.pos, {"at most 4 product factors"}, "'*'");
          }
          factors.push_back(channel());
        }
        return BasisTerm::product(std::move(factors));
      }
      default:
        return BasisTerm::identity(std::move(first));
    }
  }

  void term(Invariant& inv, int sign) {
    const Token& t = peek();
    if (t.kind == Tok::number) {
      syntax_error(t.pos, {"coefficient"},
                   "numeric coefficient '" + t.text + "' (coefficients must stay symbolic)");
    }
    if (t.kind != Tok::ident || !is_coefficient_label(t.text)) {
      syntax_error(t.pos, {"coefficient"}, found(t));
    }
    next();
    check_unique(inv, t);
    if (peek().kind == Tok::star) {
      next();
      inv.regressors.push_back(Regressor{sign, t.text, basis()});
      return;
    }
    if (inv.intercept) {
      throw DslError(DslError::Kind::syntax, t.pos, {"'*'"},
                     "second intercept term " + t.text + " at column " + std::to_string(t.pos + 1));
    }
    inv.intercept = ExplicitIntercept{sign, t.text};
  }

  void check_unique(const Invariant& inv, const Token& t) {
    const std::string key = lower(t.text);
    bool dup = inv.intercept && lower(inv.intercept->label) == key;
    for (const auto& r : inv.regressors) dup = dup || lower(r.coeff) == key;
    if (dup) {
      throw DslError(DslError::Kind::duplicate_coefficient, t.pos, {},
                     "duplicate coefficient " + t.text + " at column " + std::to_string(t.pos + 1));
    }
  }

  std::string_view text_;
  std::vector<Token> toks_;
  std::size_t cur_ = 0;
};

}  // namespace

bool is_channel_name(std::string_view name) noexcept {
  return !name.empty() && std::all_of(name.begin(), name.end(), is_ident_char) && has_letter(name);
}

bool is_coefficient_label(std::string_view label) noexcept {
  return label.size() >= 2 && (label[0] == 'C' || label[0] == 'c') &&
         std::all_of(label.begin() + 1, label.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; });
}

std::string_view to_string(BasisKind kind) noexcept {
  switch (kind) {
    case BasisKind::identity: return "identity";
    case BasisKind::power: return "power";
    case BasisKind::product: return "product";
    case BasisKind::ratio: return "ratio";
    case BasisKind::d1: return "d1";
    case BasisKind::d2: return "d2";
    case BasisKind::exp: return "exp";
  }
  return "?";
}

BasisTerm BasisTerm::identity(ChannelRef c) { return {BasisKind::identity, {std::move(c)}, 1}; }
BasisTerm BasisTerm::power(ChannelRef c, int exponent) {
  return {BasisKind::power, {std::move(c)}, exponent};
}
BasisTerm BasisTerm::product(std::vector<ChannelRef> factors) {
  return {BasisKind::product, std::move(factors), 1};
}
BasisTerm BasisTerm::ratio(ChannelRef num, ChannelRef den) {
  return {BasisKind::ratio, {std::move(num), std::move(den)}, 1};
}
BasisTerm BasisTerm::d1(ChannelRef c) { return {BasisKind::d1, {std::move(c)}, 1}; }
BasisTerm BasisTerm::d2(ChannelRef c) { return {BasisKind::d2, {std::move(c)}, 1}; }
BasisTerm BasisTerm::exp(ChannelRef c) { return {BasisKind::exp, {std::move(c)}, 1}; }

int BasisTerm::derivative_order() const noexcept {
  switch (kind) {
    case BasisKind::d1: return 1;
    case BasisKind::d2: return 2;
    default: return 0;
  }
}

bool Invariant::operator==(const Invariant& o) const {
  return id == o.id && regressand == o.regressand && regressors == o.regressors &&
         has_intercept == o.has_intercept && intercept == o.intercept &&
         provenance == o.provenance;
}

DslError::DslError(Kind kind, std::size_t position, std::vector<std::string> expected,
                   const std::string& message)
    : Error(Errc::invalid_argument, message),
      kind_(kind),
      position_(position),
      expected_(std::move(expected)) {}

std::string_view to_string(DslError::Kind kind) noexcept {
  switch (kind) {
    case DslError::Kind::syntax: return "SyntaxError";
    case DslError::Kind::duplicate_coefficient: return "DuplicateCoefficient";
    case DslError::Kind::empty_rhs: return "EmptyRhs";
    case DslError::Kind::exponent_out_of_range: return "ExponentOutOfRange";
  }
  return "?";
}

Invariant parse_invariant(std::string_view text) { return Parser(text).parse(); }

ParsedFile parse_invariant_file(std::string_view text) {
  ParsedFile out;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::set<std::string> seen_ids;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view line =
        text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const std::string body = trim(line);
    if (!body.empty() && body.front() != '#') {
      try {
        Invariant inv = parse_invariant(body);
        if (inv.id.empty()) inv.id = "L" + std::to_string(line_no);
        if (!seen_ids.insert(inv.id).second) {
          throw DslError(DslError::Kind::syntax, 0, {"unique id"}, "duplicate invariant id " + inv.id);
        }
        out.invariants.push_back(std::move(inv));
      } catch (const DslError& e) {
        out.errors.push_back({line_no, e});
      }
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

std::string format_basis(const BasisTerm& term) {
  const auto& ops = term.operands;
  switch (term.kind) {
    case BasisKind::identity: return ops.at(0).name;
    case BasisKind::power: return ops.at(0).name + "^" + std::to_string(term.exponent);
    case BasisKind::product: {
      std::string out = ops.at(0).name;
      for (std::size_t i = 1; i < ops.size(); ++i) out += "*" + ops[i].name;
      return out;
    }
    case BasisKind::ratio: return ops.at(0).name + "/" + ops.at(1).name;
    case BasisKind::d1: return "d/dt(" + ops.at(0).name + ")";
    case BasisKind::d2: return "d2/dt2(" + ops.at(0).name + ")";
    case BasisKind::exp: return "exp(" + ops.at(0).name + ")";
  }
  return {};
}

std::string format_invariant(const Invariant& inv) {
  std::string out;
  if (!inv.id.empty()) out += inv.id + ": ";
  out += format_basis(inv.regressand) + " =";

  bool first = true;
  auto emit = [&](int sign, const std::string& body) {
    if (first) {
      out += sign < 0 ? " -" : " ";
    } else {
      out += sign < 0 ? " - " : " + ";
    }
    out += body;
    first = false;
  };
  if (inv.intercept) emit(inv.intercept->sign, inv.intercept->label);
  for (const auto& r : inv.regressors) emit(r.sign, r.coeff + "*" + format_basis(r.term));

  if (!inv.has_intercept) out += " | no_intercept";
  if (!inv.provenance.empty()) out += " // Refs: " + inv.provenance;
  return out;
}

std::set<ChannelRef> channels_of(const Invariant& inv) {
  std::set<ChannelRef> out(inv.regressand.operands.begin(), inv.regressand.operands.end());
  for (const auto& r : inv.regressors) out.insert(r.term.operands.begin(), r.term.operands.end());
  return out;
}

}  // namespace invar::dsl
