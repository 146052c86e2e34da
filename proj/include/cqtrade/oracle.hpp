#pragma once

// Exhaustive reference evaluator. Uses none of the index or join machinery:
// tuples are copied into ordered sets and every assignment over the active
// domain is tried by nested loops.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cqtrade/query.hpp"
#include "cqtrade/relcore.hpp"

namespace cqtrade {

/// Truth of q under the bound constants `request` (head order of the bound
/// variables, given as constant names).
inline bool brute_force_eval(const AdornedQuery& q, const Database& db, const std::vector<std::string>& request) {
  std::vector<std::string> names;
  auto slot = [&](const std::string& v) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == v) return i;
    }
    names.push_back(v);
    return names.size() - 1;
  };
  struct Lit {
    std::set<std::vector<std::string>> tuples;
    std::vector<std::size_t> slots;
    bool negated;
  };
  std::vector<Lit> lits;
  std::set<std::string> domain;
  for (const auto& a : q.body) {
    Lit l;
    l.negated = a.negated;
    for (const auto& v : a.vars) l.slots.push_back(slot(v));
    const Relation& rel = db.relation(a.relation);
    for (std::size_t i = 0; i < rel.size(); ++i) {
      std::vector<std::string> t;
      for (Value x : rel.row(i)) t.push_back(db.interner().name(x));
      if (!a.negated) domain.insert(t.begin(), t.end());
      l.tuples.insert(std::move(t));
    }
    lits.push_back(std::move(l));
  }
  std::vector<std::string> value(names.size());
  std::vector<bool> fixed(names.size(), false);
  std::size_t bi = 0;
  for (const auto& h : q.head) {
    if (h.adornment != Adornment::Bound) continue;
    if (bi >= request.size()) return false;
    std::size_t s = slot(h.name);
    value.resize(names.size());
    fixed.resize(names.size(), false);
    value[s] = request[bi++];
    fixed[s] = true;
  }
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!fixed[i]) open.push_back(i);
  }
  std::vector<std::string> dom(domain.begin(), domain.end());

  // A literal is checked once all of its slots are assigned.
  std::vector<std::size_t> ready_at(lits.size(), 0);
  for (std::size_t l = 0; l < lits.size(); ++l) {
    for (auto s : lits[l].slots) {
      for (std::size_t d = 0; d < open.size(); ++d) {
        if (open[d] == s) ready_at[l] = std::max(ready_at[l], d + 1);
      }
    }
  }
  auto holds = [&](std::size_t depth) {
    for (std::size_t l = 0; l < lits.size(); ++l) {
      if (ready_at[l] != depth) continue;
      std::vector<std::string> t;
      for (auto s : lits[l].slots) t.push_back(value[s]);
      if (lits[l].tuples.contains(t) == lits[l].negated) return false;
    }
    return true;
  };
  if (!holds(0)) return false;
  std::function<bool(std::size_t)> rec = [&](std::size_t d) -> bool {
    if (d == open.size()) return true;
    for (const auto& c : dom) {
      value[open[d]] = c;
      if (holds(d + 1) && rec(d + 1)) return true;
    }
    return false;
  };
  return rec(0);
}

}  // namespace cqtrade
