#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "polydt/util.hpp"

namespace polydt {

// Small arithmetic AST for derived split expressions. Addition and
// multiplication are n-ary, negation and squares are rewritten away at
// construction, so every expression has one canonical shape after
// normalize(). That canonical shape is the structural identity used to
// deduplicate generated expressions.
enum class ExprKind { num, sym, add, mul, div, sqrt_fn };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind;
  double value = 0.0;        // num
  std::string name;          // sym
  std::vector<ExprPtr> args; // add/mul n-ary, div binary, sqrt unary
};

inline ExprPtr make_num(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::num;
  e->value = v;
  return e;
}

inline ExprPtr make_sym(std::string name) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::sym;
  e->name = std::move(name);
  return e;
}

inline ExprPtr make_node(ExprKind kind, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->kind = kind;
  e->args = std::move(args);
  return e;
}

inline ExprPtr make_add(std::vector<ExprPtr> args) { return make_node(ExprKind::add, std::move(args)); }
inline ExprPtr make_mul(std::vector<ExprPtr> args) { return make_node(ExprKind::mul, std::move(args)); }
inline ExprPtr make_div(ExprPtr a, ExprPtr b) { return make_node(ExprKind::div, {std::move(a), std::move(b)}); }
inline ExprPtr make_sqrt(ExprPtr a) { return make_node(ExprKind::sqrt_fn, {std::move(a)}); }
inline ExprPtr make_neg(ExprPtr a) { return make_mul({make_num(-1.0), std::move(a)}); }
inline ExprPtr make_sub(ExprPtr a, ExprPtr b) { return make_add({std::move(a), make_neg(std::move(b))}); }
inline ExprPtr make_square(ExprPtr a) { return make_mul({a, a}); }

// Stable serialization; doubles printed shortest-round-trip, so equal
// canonical trees produce equal keys and vice versa.
inline std::string expr_key(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::num:
      return "n:" + format_double(e->value);
    case ExprKind::sym:
      return "s:" + e->name;
    case ExprKind::add:
    case ExprKind::mul:
    case ExprKind::div:
    case ExprKind::sqrt_fn: {
      std::string out = e->kind == ExprKind::add   ? "(+"
                        : e->kind == ExprKind::mul ? "(*"
                        : e->kind == ExprKind::div ? "(/"
                                                   : "(sqrt";
      for (const auto& a : e->args) {
        out += ' ';
        out += expr_key(a);
      }
      out += ')';
      return out;
    }
  }
  return {};
}

inline double eval(const ExprPtr& e, const std::unordered_map<std::string, double>& env) {
  switch (e->kind) {
    case ExprKind::num:
      return e->value;
    case ExprKind::sym: {
      auto it = env.find(e->name);
      if (it == env.end()) throw std::out_of_range("eval: unbound symbol '" + e->name + "'");
      return it->second;
    }
    case ExprKind::add: {
      double s = 0.0;
      for (const auto& a : e->args) s += eval(a, env);
      return s;
    }
    case ExprKind::mul: {
      double p = 1.0;
      for (const auto& a : e->args) p *= eval(a, env);
      return p;
    }
    case ExprKind::div:
      return eval(e->args[0], env) / eval(e->args[1], env);
    case ExprKind::sqrt_fn:
      return std::sqrt(eval(e->args[0], env));
  }
  return 0.0;
}

inline void collect_symbols(const ExprPtr& e, std::set<std::string>& out) {
  if (e->kind == ExprKind::sym) {
    out.insert(e->name);
    return;
  }
  for (const auto& a : e->args) collect_symbols(a, out);
}

inline std::set<std::string> expr_symbols(const ExprPtr& e) {
  std::set<std::string> out;
  collect_symbols(e, out);
  return out;
}

inline bool is_constant_expr(const ExprPtr& e) {
  if (e->kind == ExprKind::sym) return false;
  for (const auto& a : e->args)
    if (!is_constant_expr(a)) return false;
  return true;
}

namespace detail {

struct MulParts {
  double coeff = 1.0;
  std::vector<ExprPtr> factors;  // canonical, sorted
};

inline MulParts mul_parts(const ExprPtr& e) {
  MulParts p;
  if (e->kind == ExprKind::num) {
    p.coeff = e->value;
    return p;
  }
  if (e->kind == ExprKind::mul) {
    for (const auto& a : e->args) {
      if (a->kind == ExprKind::num)
        p.coeff *= a->value;
      else
        p.factors.push_back(a);
    }
    return p;
  }
  p.factors.push_back(e);
  return p;
}

inline ExprPtr rebuild_mul(double coeff, std::vector<ExprPtr> factors) {
  if (coeff == 0.0) return make_num(0.0);
  if (factors.empty()) return make_num(coeff);
  if (coeff == 1.0 && factors.size() == 1) return factors[0];
  std::vector<ExprPtr> args;
  if (coeff != 1.0) args.push_back(make_num(coeff));
  for (auto& f : factors) args.push_back(std::move(f));
  if (args.size() == 1) return args[0];
  return make_mul(std::move(args));
}

}  // namespace detail

// Canonical form: sums are flattened with like terms merged on their
// numeric coefficient, products are flattened with numeric factors folded
// into one leading constant, commutative operand lists are sorted, and a
// sum that cancels to nothing becomes the literal 0. Division stays
// binary and unrewritten apart from numeric denominators, which fold into
// a coefficient.
inline ExprPtr normalize(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::num:
    case ExprKind::sym:
      return e;
    case ExprKind::sqrt_fn: {
      ExprPtr a = normalize(e->args[0]);
      if (a->kind == ExprKind::num && a->value >= 0.0) return make_num(std::sqrt(a->value));
      return make_sqrt(std::move(a));
    }
    case ExprKind::div: {
      ExprPtr a = normalize(e->args[0]);
      ExprPtr b = normalize(e->args[1]);
      if (b->kind == ExprKind::num && b->value != 0.0)
        return normalize(make_mul({make_num(1.0 / b->value), std::move(a)}));
      if (a->kind == ExprKind::num && a->value == 0.0) return make_num(0.0);
      return make_div(std::move(a), std::move(b));
    }
    case ExprKind::mul: {
      double coeff = 1.0;
      std::vector<ExprPtr> factors;
      for (const auto& raw : e->args) {
        ExprPtr a = normalize(raw);
        auto parts = detail::mul_parts(a);
        coeff *= parts.coeff;
        for (auto& f : parts.factors) factors.push_back(std::move(f));
      }
      std::sort(factors.begin(), factors.end(),
                [](const ExprPtr& x, const ExprPtr& y) { return expr_key(x) < expr_key(y); });
      return detail::rebuild_mul(coeff, std::move(factors));
    }
    case ExprKind::add: {
      double constant = 0.0;
      // core key -> (coeff, core)
      std::vector<std::pair<std::string, std::pair<double, ExprPtr>>> terms;
      auto add_term = [&](double coeff, ExprPtr core) {
        std::string key = expr_key(core);
        for (auto& t : terms) {
          if (t.first == key) {
            t.second.first += coeff;
            return;
          }
        }
        terms.emplace_back(std::move(key), std::make_pair(coeff, std::move(core)));
      };
      std::vector<ExprPtr> pending(e->args.begin(), e->args.end());
      for (size_t i = 0; i < pending.size(); ++i) {
        ExprPtr a = normalize(pending[i]);
        if (a->kind == ExprKind::add) {
          for (const auto& sub : a->args) pending.push_back(sub);
          continue;
        }
        if (a->kind == ExprKind::num) {
          constant += a->value;
          continue;
        }
        auto parts = detail::mul_parts(a);
        add_term(parts.coeff, detail::rebuild_mul(1.0, std::move(parts.factors)));
      }
      std::vector<std::pair<std::string, std::pair<double, ExprPtr>>> kept;
      for (auto& t : terms)
        if (t.second.first != 0.0) kept.push_back(std::move(t));
      std::sort(kept.begin(), kept.end(),
                [](const auto& x, const auto& y) { return x.first < y.first; });
      std::vector<ExprPtr> out;
      for (auto& t : kept) out.push_back(detail::rebuild_mul(t.second.first, {t.second.second}));
      if (constant != 0.0) out.push_back(make_num(constant));
      if (out.empty()) return make_num(0.0);
      if (out.size() == 1) return out[0];
      return make_add(std::move(out));
    }
  }
  return e;
}

// Replaces symbols by expressions; used both for identity instantiation
// (quantity placeholders) and for binding named constants to numbers.
inline ExprPtr substitute(const ExprPtr& e,
                          const std::unordered_map<std::string, ExprPtr>& map) {
  switch (e->kind) {
    case ExprKind::num:
      return e;
    case ExprKind::sym: {
      auto it = map.find(e->name);
      return it == map.end() ? e : it->second;
    }
    default: {
      std::vector<ExprPtr> args;
      args.reserve(e->args.size());
      for (const auto& a : e->args) args.push_back(substitute(a, map));
      return make_node(e->kind, std::move(args));
    }
  }
}

inline ExprPtr bind_constants(const ExprPtr& e,
                              const std::unordered_map<std::string, double>& values) {
  std::unordered_map<std::string, ExprPtr> map;
  map.reserve(values.size());
  for (const auto& [name, v] : values) map.emplace(name, make_num(v));
  return normalize(substitute(e, map));
}

// ---- rendering -----------------------------------------------------------

namespace detail {

inline bool atom_like(const ExprPtr& e) {
  return e->kind == ExprKind::num || e->kind == ExprKind::sym || e->kind == ExprKind::sqrt_fn;
}

inline std::string render_expr_impl(const ExprPtr& e, bool c_syntax);

inline std::string render_factor(const ExprPtr& e, bool c_syntax) {
  if (atom_like(e)) {
    if (e->kind == ExprKind::num && e->value < 0.0)
      return "(" + render_expr_impl(e, c_syntax) + ")";
    return render_expr_impl(e, c_syntax);
  }
  return "(" + render_expr_impl(e, c_syntax) + ")";
}

inline std::string render_product(double coeff, const std::vector<ExprPtr>& factors,
                                  bool c_syntax) {
  std::string out;
  bool lead = true;
  if (coeff != 1.0 || factors.empty()) {
    out += format_double(coeff);
    lead = false;
  }
  for (size_t i = 0; i < factors.size();) {
    size_t run = 1;
    while (i + run < factors.size() && expr_key(factors[i + run]) == expr_key(factors[i])) ++run;
    std::string f = render_factor(factors[i], c_syntax);
    for (size_t k = 0; k < run;) {
      if (!lead) out += '*';
      lead = false;
      if (!c_syntax && run - k >= 2) {
        out += f + "^2";
        k += 2;
      } else {
        out += f;
        k += 1;
      }
    }
    i += run;
  }
  return out;
}

inline std::string render_expr_impl(const ExprPtr& e, bool c_syntax) {
  switch (e->kind) {
    case ExprKind::num:
      return format_double(e->value);
    case ExprKind::sym:
      return e->name;
    case ExprKind::sqrt_fn:
      return "sqrt(" + render_expr_impl(e->args[0], c_syntax) + ")";
    case ExprKind::div: {
      const ExprPtr& a = e->args[0];
      const ExprPtr& b = e->args[1];
      return render_factor(a, c_syntax) + "/" + render_factor(b, c_syntax);
    }
    case ExprKind::mul: {
      auto parts = mul_parts(e);
      return render_product(parts.coeff, parts.factors, c_syntax);
    }
    case ExprKind::add: {
      std::string out;
      for (size_t i = 0; i < e->args.size(); ++i) {
        auto parts = mul_parts(e->args[i]);
        bool negative = parts.coeff < 0.0 && e->args[i]->kind != ExprKind::div;
        if (i == 0) {
          out += negative ? "-" : "";
        } else {
          out += negative ? " - " : " + ";
        }
        if (negative)
          out += render_product(-parts.coeff, parts.factors, c_syntax);
        else if (e->args[i]->kind == ExprKind::div)
          out += render_expr_impl(e->args[i], c_syntax);
        else
          out += render_product(parts.coeff, parts.factors, c_syntax);
      }
      return out;
    }
  }
  return {};
}

}  // namespace detail

// Infix rendering; `c_syntax` expands x^2 into x*x so the output compiles
// as a C expression.
inline std::string render_expr(const ExprPtr& e, bool c_syntax = false) {
  return detail::render_expr_impl(e, c_syntax);
}

// ---- parsing -------------------------------------------------------------

namespace detail {

struct ExprParser {
  std::string_view text;
  size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }

  [[noreturn]] void fail(const std::string& what) {
    throw parse_error("expression parse error at offset " + std::to_string(pos) + ": " + what +
                      " in '" + std::string(text) + "'");
  }

  ExprPtr parse_expression() {
    ExprPtr lhs = parse_term();
    std::vector<ExprPtr> terms{lhs};
    while (true) {
      if (eat('+')) {
        terms.push_back(parse_term());
      } else if (eat('-')) {
        terms.push_back(make_neg(parse_term()));
      } else {
        break;
      }
    }
    return terms.size() == 1 ? terms[0] : make_add(std::move(terms));
  }

  ExprPtr parse_term() {
    ExprPtr acc = parse_factor();
    while (true) {
      if (eat('*')) {
        acc = make_mul({acc, parse_factor()});
      } else if (eat('/')) {
        acc = make_div(acc, parse_factor());
      } else {
        break;
      }
    }
    return acc;
  }

  ExprPtr parse_factor() {
    if (eat('-')) return make_neg(parse_factor());
    if (eat('+')) return parse_factor();
    ExprPtr base = parse_primary();
    if (eat('^')) {
      skip_ws();
      size_t start = pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
      if (start == pos) fail("expected integer exponent");
      int exp = std::stoi(std::string(text.substr(start, pos - start)));
      if (exp < 1 || exp > 8) fail("unsupported exponent");
      std::vector<ExprPtr> reps(static_cast<size_t>(exp), base);
      return exp == 1 ? base : make_mul(std::move(reps));
    }
    return base;
  }

  ExprPtr parse_primary() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of expression");
    char c = text[pos];
    if (c == '(') {
      ++pos;
      ExprPtr inner = parse_expression();
      if (!eat(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* first = text.data() + pos;
      const char* last = text.data() + text.size();
      double v = 0.0;
      auto res = std::from_chars(first, last, v);
      if (res.ec != std::errc()) fail("malformed number");
      pos = static_cast<size_t>(res.ptr - text.data());
      return make_num(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos;
      while (pos < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
        ++pos;
      std::string name(text.substr(start, pos - start));
      if (name == "sqrt") {
        if (!eat('(')) fail("expected '(' after sqrt");
        ExprPtr inner = parse_expression();
        if (!eat(')')) fail("expected ')'");
        return make_sqrt(std::move(inner));
      }
      return make_sym(std::move(name));
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

}  // namespace detail

// Parses an infix expression ('+', '-', '*', '/', '^2', 'sqrt(...)',
// parentheses, numbers, identifiers). The result is not normalized.
inline ExprPtr parse_expr(std::string_view text) {
  detail::ExprParser p{text};
  ExprPtr e = p.parse_expression();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing input");
  return e;
}

}  // namespace polydt
