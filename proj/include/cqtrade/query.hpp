#pragma once

// Adorned conjunctive queries (with optional negation): AST, text parser,
// canonical rendering, and hypergraph extraction.
//
// Grammar:
//   query   := NAME '(' [head (',' head)*] ')' '=' atom (',' atom)*
//   head    := ('b' | 'f') VAR
//   atom    := ['!'] NAME '(' VAR (',' VAR)* ')'
// Identifiers are ASCII [A-Za-z0-9_], case-sensitive.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cqtrade/error.hpp"

namespace cqtrade {

using VarId = std::uint32_t;
using VarSet = std::uint64_t;  // bitmask over VarId
inline constexpr std::size_t kMaxVars = 64;

inline VarSet bit(VarId v) { return VarSet{1} << v; }
inline bool contains(VarSet s, VarId v) { return (s >> v) & 1U; }
inline bool subset_of(VarSet a, VarSet b) { return (a & ~b) == 0; }
inline int popcount(VarSet s) { return std::popcount(s); }

inline std::vector<VarId> members(VarSet s) {
  std::vector<VarId> out;
  while (s) {
    out.push_back(static_cast<VarId>(std::countr_zero(s)));
    s &= s - 1;
  }
  return out;
}

enum class Adornment { Bound, Free };

struct HeadVar {
  std::string name;
  Adornment adornment = Adornment::Bound;
  bool operator==(const HeadVar&) const = default;
};

struct Atom {
  std::string relation;
  std::vector<std::string> vars;
  bool negated = false;
  bool operator==(const Atom&) const = default;
};

struct AdornedQuery {
  std::string name;
  std::vector<HeadVar> head;
  std::vector<Atom> body;

  bool operator==(const AdornedQuery&) const = default;

  bool is_boolean_adorned() const {
    return std::all_of(head.begin(), head.end(), [](const HeadVar& h) { return h.adornment == Adornment::Bound; });
  }
  bool has_negation() const {
    return std::any_of(body.begin(), body.end(), [](const Atom& a) { return a.negated; });
  }
  std::vector<std::string> bound_vars() const {
    std::vector<std::string> out;
    for (const auto& h : head) {
      if (h.adornment == Adornment::Bound) out.push_back(h.name);
    }
    return out;
  }
};

namespace detail {

inline bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class QueryLexer {
 public:
  explicit QueryLexer(std::string_view text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }
  bool accept(char c) {
    if (!peek(c)) return false;
    ++pos_;
    return true;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  std::string ident() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    if (start == pos_) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("syntax error at offset " + std::to_string(pos_) + ": " + what);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Checks the AST invariants (safety, no repeated variables within an atom,
/// head variables covered by positive atoms). Throws ValidationError.
inline void validate(const AdornedQuery& q) {
  if (q.body.empty()) throw ValidationError("query body is empty");
  std::vector<std::string> positive_vars;
  for (const auto& a : q.body) {
    if (a.vars.empty()) throw ValidationError("atom " + a.relation + " has no variables");
    std::vector<std::string> sorted = a.vars;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ValidationError("repeated variable in atom " + a.relation);
    }
    if (!a.negated) positive_vars.insert(positive_vars.end(), a.vars.begin(), a.vars.end());
  }
  auto is_positive = [&](const std::string& v) {
    return std::find(positive_vars.begin(), positive_vars.end(), v) != positive_vars.end();
  };
  for (const auto& a : q.body) {
    if (!a.negated) continue;
    for (const auto& v : a.vars) {
      if (!is_positive(v)) throw ValidationError("unsafe negation: variable " + v + " of !" + a.relation + " occurs in no positive atom");
    }
  }
  std::vector<std::string> head_names;
  for (const auto& h : q.head) {
    if (!is_positive(h.name)) throw ValidationError("head variable " + h.name + " occurs in no positive body atom");
    head_names.push_back(h.name);
  }
  std::sort(head_names.begin(), head_names.end());
  if (std::adjacent_find(head_names.begin(), head_names.end()) != head_names.end()) {
    throw ValidationError("repeated head variable");
  }
}

inline AdornedQuery parse_query(std::string_view text) {
  detail::QueryLexer lex(text);
  AdornedQuery q;
  q.name = lex.ident();
  lex.expect('(');
  if (!lex.accept(')')) {
    do {
      std::string adorn = lex.ident();
      if (adorn != "b" && adorn != "f") lex.fail("adornment must be 'b' or 'f'");
      HeadVar h;
      h.adornment = adorn == "b" ? Adornment::Bound : Adornment::Free;
      h.name = lex.ident();
      q.head.push_back(std::move(h));
    } while (lex.accept(','));
    lex.expect(')');
  }
  lex.expect('=');
  do {
    Atom a;
    a.negated = lex.accept('!');
    a.relation = lex.ident();
    lex.expect('(');
    do {
      a.vars.push_back(lex.ident());
    } while (lex.accept(','));
    lex.expect(')');
    q.body.push_back(std::move(a));
  } while (lex.accept(','));
  if (!lex.at_end()) lex.fail("trailing input");
  validate(q);
  return q;
}

/// Canonical text: single spaces, atoms in input order.
inline std::string render(const AdornedQuery& q) {
  std::ostringstream out;
  out << q.name << '(';
  for (std::size_t i = 0; i < q.head.size(); ++i) {
    if (i) out << ", ";
    out << (q.head[i].adornment == Adornment::Bound ? "b " : "f ") << q.head[i].name;
  }
  out << ") = ";
  for (std::size_t i = 0; i < q.body.size(); ++i) {
    if (i) out << ", ";
    const auto& a = q.body[i];
    if (a.negated) out << '!';
    out << a.relation << '(';
    for (std::size_t j = 0; j < a.vars.size(); ++j) {
      if (j) out << ',';
      out << a.vars[j];
    }
    out << ')';
  }
  return out.str();
}

inline AdornedQuery positive_part(const AdornedQuery& q) {
  AdornedQuery p = q;
  p.body.erase(std::remove_if(p.body.begin(), p.body.end(), [](const Atom& a) { return a.negated; }), p.body.end());
  return p;
}

inline void require_boolean(const AdornedQuery& q) {
  if (!q.is_boolean_adorned()) throw UnsupportedQueryError("non-Boolean adorned query unsupported");
}

struct HyperEdge {
  std::size_t atom_id = 0;  // index into AdornedQuery::body
  VarSet vars = 0;
};

/// Query hypergraph: one edge per positive atom. Variable ids follow first
/// appearance in the body (negated atoms included, so ids are stable between
/// a CQ with negation and its positive part).
struct Hypergraph {
  std::vector<std::string> var_names;
  std::vector<HyperEdge> edges;
  VarSet nodes = 0;
  VarSet bound = 0;
  std::vector<VarId> bound_order;  // head order of the bound variables

  VarSet free() const { return nodes & ~bound; }

  std::optional<VarId> find(std::string_view name) const {
    for (VarId i = 0; i < var_names.size(); ++i) {
      if (var_names[i] == name) return i;
    }
    return std::nullopt;
  }
  VarId id(std::string_view name) const {
    auto v = find(name);
    if (!v) throw ValidationError("unknown variable " + std::string(name));
    return *v;
  }
  VarSet set_of(const std::vector<std::string>& names) const {
    VarSet s = 0;
    for (const auto& n : names) s |= bit(id(n));
    return s;
  }
  std::string format(VarSet s) const {
    std::string out = "{";
    bool first = true;
    for (VarId v : members(s)) {
      if (!first) out += ",";
      out += var_names[v];
      first = false;
    }
    return out + "}";
  }
  /// Edges fully contained in `s`.
  std::vector<VarSet> edges_within(VarSet s) const {
    std::vector<VarSet> out;
    for (const auto& e : edges) {
      if (subset_of(e.vars, s)) out.push_back(e.vars);
    }
    return out;
  }
};

inline Hypergraph hypergraph_of(const AdornedQuery& q) {
  Hypergraph h;
  auto intern = [&](const std::string& name) -> VarId {
    if (auto v = h.find(name)) return *v;
    if (h.var_names.size() >= kMaxVars) throw ValidationError("too many variables (max 64)");
    h.var_names.push_back(name);
    return static_cast<VarId>(h.var_names.size() - 1);
  };
  for (std::size_t i = 0; i < q.body.size(); ++i) {
    VarSet vs = 0;
    for (const auto& v : q.body[i].vars) vs |= bit(intern(v));
    if (!q.body[i].negated) {
      h.edges.push_back({i, vs});
      h.nodes |= vs;
    }
  }
  for (const auto& hv : q.head) {
    VarId v = intern(hv.name);
    if (hv.adornment == Adornment::Bound) {
      h.bound |= bit(v);
      h.bound_order.push_back(v);
    }
  }
  return h;
}

}  // namespace cqtrade
