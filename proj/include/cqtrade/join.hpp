#pragma once

// Generic join over partially bound queries, access requests, the residual
// cost estimate T(a) and the step meter.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cqtrade/covers.hpp"
#include "cqtrade/query.hpp"
#include "cqtrade/rational.hpp"
#include "cqtrade/relcore.hpp"

namespace cqtrade {

struct CostMeter {
  std::uint64_t probes = 0;
  std::uint64_t tuples_touched = 0;

  std::uint64_t steps() const { return probes + tuples_touched; }
  CostMeter& operator+=(const CostMeter& o) {
    probes += o.probes;
    tuples_touched += o.tuples_touched;
    return *this;
  }
};

using Assignment = std::array<Value, kMaxVars>;

/// One body atom resolved against a database.
struct JoinAtom {
  const Relation* rel = nullptr;
  std::vector<VarId> vars;  // per column
  bool negated = false;
  std::size_t atom_id = 0;

  VarSet var_set() const {
    VarSet s = 0;
    for (auto v : vars) s |= bit(v);
    return s;
  }
};

/// Bound values in head order of the bound variables.
struct AccessRequest {
  std::vector<Value> values;
};

/// A query resolved against a database: hypergraph plus relation pointers.
struct BoundQuery {
  AdornedQuery query;
  Hypergraph h;
  std::vector<JoinAtom> atoms;  // body order, negated atoms included
  const Database* db = nullptr;

  static BoundQuery make(const AdornedQuery& q, const Database& db) {
    BoundQuery b;
    b.query = q;
    b.h = hypergraph_of(q);
    b.db = &db;
    for (std::size_t i = 0; i < q.body.size(); ++i) {
      const auto& a = q.body[i];
      const Relation& rel = db.relation(a.relation);
      if (rel.arity() != a.vars.size()) {
        throw ValidationError("atom " + a.relation + " has " + std::to_string(a.vars.size()) +
                              " variables but the relation has arity " + std::to_string(rel.arity()));
      }
      JoinAtom ja;
      ja.rel = &rel;
      ja.negated = a.negated;
      ja.atom_id = i;
      for (const auto& v : a.vars) ja.vars.push_back(b.h.id(v));
      b.atoms.push_back(std::move(ja));
    }
    return b;
  }

  std::size_t num_bound() const { return h.bound_order.size(); }

  /// Request from constant names; unknown constants map to kNoValue.
  AccessRequest request(const std::vector<std::string>& constants) const {
    if (constants.size() != num_bound()) {
      throw ValidationError("request has " + std::to_string(constants.size()) + " values but the query binds " +
                            std::to_string(num_bound()) + " variables");
    }
    AccessRequest r;
    for (const auto& c : constants) r.values.push_back(db->interner().lookup(c));
    return r;
  }

  void bind(const AccessRequest& a, Assignment& asg) const {
    if (a.values.size() != num_bound()) throw ValidationError("request arity does not match the bound variables");
    for (std::size_t i = 0; i < a.values.size(); ++i) asg[h.bound_order[i]] = a.values[i];
  }

  /// Edge index in h.edges for a positive atom.
  std::size_t edge_of(std::size_t atom_id) const {
    for (std::size_t i = 0; i < h.edges.size(); ++i) {
      if (h.edges[i].atom_id == atom_id) return i;
    }
    throw ValidationError("atom is not a hyperedge");
  }
};

class JoinPlan;

/// Sums entries over distinct indexes across several plans.
struct IndexTally {
  std::vector<const void*> seen;
  std::size_t total = 0;

  void add(const void* p, std::size_t n) {
    if (!p || std::find(seen.begin(), seen.end(), p) != seen.end()) return;
    seen.push_back(p);
    total += n;
  }
  inline void add(const JoinPlan& plan);
};

/// Generic join plan over `atoms` with variables `prebound` fixed by the
/// caller and variables `target` enumerated in greedy order. Atoms take part
/// through their columns in prebound | target (projection semantics).
class JoinPlan {
 public:
  struct Participant {
    std::size_t atom = 0;  // index into atoms_
    Columns key_cols;      // columns bound before this level
    std::vector<VarId> key_vars;
    std::uint32_t ext_col = 0;
    const ExtensionIndex* ext = nullptr;
    const SubschemaIndex* check = nullptr;  // on key_cols + ext_col (column order)
    Columns check_cols;
    std::vector<VarId> check_vars;
    bool uses_entry_cache = false;  // key == the atom's prebound key
  };
  struct NegCheck {
    std::size_t atom = 0;
    const SubschemaIndex* full = nullptr;
    Columns cols;
    std::vector<VarId> vars;
  };
  struct Level {
    VarId var = 0;
    std::vector<Participant> parts;
    std::vector<NegCheck> negs;
  };
  struct AtomEntry {
    Columns pre_cols;  // columns whose vars are prebound
    std::vector<VarId> pre_vars;
    bool in_target = false;  // has a target column
    const ExtensionIndex* ext = nullptr;  // pre key -> first-level var
    const SubschemaIndex* member = nullptr;  // pre key membership when no target column
    std::uint32_t first_col = 0;
  };

  /// Per-request cached lookups from the validity pass.
  struct State {
    bool valid = true;
    std::vector<const ExtensionIndex::Entry*> entries;  // per atom (nullptr if none)
    std::vector<std::uint64_t> counts;                  // |R_F(a)| per atom
  };

  JoinPlan() = default;

  JoinPlan(std::vector<JoinAtom> atoms, const Hypergraph& h, VarSet prebound, VarSet target)
      : atoms_(std::move(atoms)), prebound_(prebound), target_(target) {
    VarSet scope = prebound | target;
    // Greedy order: most participating positive atoms, ties by name.
    VarSet remaining = target;
    while (remaining) {
      VarId best = 0;
      int best_n = -1;
      for (VarId v : members(remaining)) {
        int n = 0;
        for (const auto& a : atoms_) {
          if (!a.negated && contains(a.var_set(), v)) ++n;
        }
        if (n > best_n || (n == best_n && h.var_names[v] < h.var_names[best])) {
          best = v;
          best_n = n;
        }
      }
      order_.push_back(best);
      remaining &= ~bit(best);
    }
    for (VarId v : members(target)) {
      bool covered = false;
      for (const auto& a : atoms_) covered = covered || (!a.negated && contains(a.var_set(), v));
      if (!covered) throw ValidationError("variable " + h.var_names[v] + " occurs in no positive atom of the join");
    }

    entries_.resize(atoms_.size());
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const auto& a = atoms_[i];
      auto& e = entries_[i];
      for (std::uint32_t c = 0; c < a.vars.size(); ++c) {
        if (contains(prebound, a.vars[c])) {
          e.pre_cols.push_back(c);
          e.pre_vars.push_back(a.vars[c]);
        }
      }
      if (a.negated) continue;
      e.in_target = (a.var_set() & target) != 0;
      if (e.in_target) {
        for (VarId v : order_) {
          if (contains(a.var_set(), v)) {
            e.first_col = col_of(a, v);
            break;
          }
        }
        e.ext = &a.rel->extension(e.pre_cols, e.first_col);
      } else if (!e.pre_cols.empty()) {
        e.member = &a.rel->index(e.pre_cols);
      }
    }

    VarSet bound = prebound;
    for (VarId v : order_) {
      Level lv;
      lv.var = v;
      for (std::size_t i = 0; i < atoms_.size(); ++i) {
        const auto& a = atoms_[i];
        if (a.negated || !contains(a.var_set(), v)) continue;
        Participant p;
        p.atom = i;
        for (std::uint32_t c = 0; c < a.vars.size(); ++c) {
          if (contains(bound, a.vars[c])) {
            p.key_cols.push_back(c);
            p.key_vars.push_back(a.vars[c]);
          }
        }
        p.ext_col = col_of(a, v);
        p.ext = &a.rel->extension(p.key_cols, p.ext_col);
        p.check_cols = p.key_cols;
        p.check_cols.push_back(p.ext_col);
        p.check_vars = p.key_vars;
        p.check_vars.push_back(v);
        p.check = &a.rel->index(p.check_cols);
        p.uses_entry_cache = p.key_cols == entries_[i].pre_cols && p.ext_col == entries_[i].first_col;
        lv.parts.push_back(std::move(p));
      }
      VarSet after = bound | bit(v);
      for (std::size_t i = 0; i < atoms_.size(); ++i) {
        const auto& a = atoms_[i];
        if (!a.negated) continue;
        VarSet vs = a.var_set() & scope;
        if (vs != a.var_set()) continue;
        if (contains(vs, v) && subset_of(vs, after)) {
          NegCheck n;
          n.atom = i;
          for (std::uint32_t c = 0; c < a.vars.size(); ++c) n.cols.push_back(c);
          n.vars = a.vars;
          n.full = &a.rel->index(n.cols);
          lv.negs.push_back(std::move(n));
        }
      }
      levels_.push_back(std::move(lv));
      bound = after;
    }
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const auto& a = atoms_[i];
      if (a.negated && subset_of(a.var_set(), prebound)) {
        NegCheck n;
        n.atom = i;
        for (std::uint32_t c = 0; c < a.vars.size(); ++c) n.cols.push_back(c);
        n.vars = a.vars;
        n.full = &a.rel->index(n.cols);
        pre_negs_.push_back(std::move(n));
      }
    }
  }

  const std::vector<VarId>& order() const { return order_; }

  /// Calls f(index address, entries) for every index this plan reads
  /// (repeats possible).
  template <class F>
  void visit_indexes(F&& f) const {
    for (const auto& e : entries_) {
      if (e.ext) f(static_cast<const void*>(e.ext), e.ext->entries());
      if (e.member) f(static_cast<const void*>(e.member), e.member->entries());
    }
    for (const auto& lv : levels_) {
      for (const auto& p : lv.parts) {
        f(static_cast<const void*>(p.ext), p.ext->entries());
        f(static_cast<const void*>(p.check), p.check->entries());
      }
      for (const auto& n : lv.negs) f(static_cast<const void*>(n.full), n.full->entries());
    }
    for (const auto& n : pre_negs_) f(static_cast<const void*>(n.full), n.full->entries());
  }

  /// Entries of every distinct index this plan reads.
  std::size_t index_entries() const {
    IndexTally tally;
    tally.add(*this);
    return tally.total;
  }
  const std::vector<JoinAtom>& atoms() const { return atoms_; }
  VarSet prebound() const { return prebound_; }
  VarSet target() const { return target_; }

  /// Per-atom validity under the prebound values (one probe per atom with a
  /// non-empty prebound key) plus negated atoms fully inside the prebound set.
  State prepare(const Assignment& asg, CostMeter& meter) const {
    State st;
    st.entries.assign(atoms_.size(), nullptr);
    st.counts.assign(atoms_.size(), 0);
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      const auto& a = atoms_[i];
      const auto& e = entries_[i];
      if (a.negated) continue;
      TupleKey key = key_of(e.pre_vars, asg);
      if (e.in_target) {
        if (!e.pre_cols.empty()) ++meter.probes;
        st.entries[i] = e.ext->find(key);
        if (!st.entries[i]) {
          st.valid = false;
          return st;
        }
        st.counts[i] = st.entries[i]->count;
      } else if (e.member) {
        ++meter.probes;
        auto p = e.member->find(key);
        if (!p) {
          st.valid = false;
          return st;
        }
        st.counts[i] = p->count;
      } else {
        st.counts[i] = a.rel->size();
        if (a.rel->empty()) {
          st.valid = false;
          return st;
        }
      }
    }
    for (const auto& n : pre_negs_) {
      ++meter.probes;
      if (n.full->contains(key_of(n.vars, asg))) {
        st.valid = false;
        return st;
      }
    }
    return st;
  }

  /// Enumerates extensions of `asg` over the target variables; `emit`
  /// returns true to stop. Returns true iff stopped by `emit`.
  bool search(const State& st, Assignment& asg, CostMeter& meter,
              const std::function<bool(const Assignment&)>& emit) const {
    if (!st.valid) return false;
    return descend(0, st, asg, meter, emit);
  }

  /// True iff some extension exists.
  bool exists(const State& st, Assignment& asg, CostMeter& meter) const {
    return search(st, asg, meter, [](const Assignment&) { return true; });
  }

 private:
  static std::uint32_t col_of(const JoinAtom& a, VarId v) {
    for (std::uint32_t c = 0; c < a.vars.size(); ++c) {
      if (a.vars[c] == v) return c;
    }
    return 0;
  }
  static TupleKey key_of(const std::vector<VarId>& vars, const Assignment& asg) {
    TupleKey k;
    for (auto v : vars) k.push(asg[v]);
    return k;
  }

  bool descend(std::size_t depth, const State& st, Assignment& asg, CostMeter& meter,
               const std::function<bool(const Assignment&)>& emit) const {
    if (depth == levels_.size()) return emit(asg);
    const Level& lv = levels_[depth];
    std::array<const ExtensionIndex::Entry*, 64> found{};
    std::size_t best = 0;
    for (std::size_t i = 0; i < lv.parts.size(); ++i) {
      const auto& p = lv.parts[i];
      if (p.uses_entry_cache) {
        found[i] = st.entries[p.atom];
      } else if (p.key_cols.empty()) {
        found[i] = p.ext->find(TupleKey{});
      } else {
        ++meter.probes;
        found[i] = p.ext->find(key_of(p.key_vars, asg));
      }
      if (!found[i]) return false;
      if (found[i]->values.size() < found[best]->values.size()) best = i;
    }
    for (Value c : found[best]->values) {
      ++meter.tuples_touched;
      asg[lv.var] = c;
      bool ok = true;
      for (std::size_t i = 0; i < lv.parts.size() && ok; ++i) {
        if (i == best) continue;
        ++meter.probes;
        ok = lv.parts[i].check->contains(key_of(lv.parts[i].check_vars, asg));
      }
      for (std::size_t i = 0; i < lv.negs.size() && ok; ++i) {
        ++meter.probes;
        ok = !lv.negs[i].full->contains(key_of(lv.negs[i].vars, asg));
      }
      if (ok && descend(depth + 1, st, asg, meter, emit)) return true;
    }
    return false;
  }

  std::vector<JoinAtom> atoms_;
  VarSet prebound_ = 0, target_ = 0;
  std::vector<VarId> order_;
  std::vector<AtomEntry> entries_;
  std::vector<Level> levels_;
  std::vector<NegCheck> pre_negs_;
};

inline void IndexTally::add(const JoinPlan& plan) {
  plan.visit_indexes([&](const void* p, std::size_t n) { add(p, n); });
}

/// Plan for answering requests of `bq` live: prebound = bound variables,
/// target = everything else. Negated atoms are included.
inline JoinPlan eval_plan(const BoundQuery& bq) {
  return JoinPlan(bq.atoms, bq.h, bq.h.bound, bq.h.nodes & ~bq.h.bound);
}

/// T(a) = prod_F |R_F(a)|^{u_F / alpha}, from per-atom counts in `st`.
/// Identically 1 when every variable is bound; 0 if some count is 0.
inline PowerProduct residual_cost(const BoundQuery& bq, const CoverAnalysis& cover, const JoinPlan::State& st) {
  if (!cover.slack) return PowerProduct();
  PowerProduct p;
  for (std::size_t i = 0; i < bq.atoms.size(); ++i) {
    const auto& a = bq.atoms[i];
    if (a.negated) continue;
    std::uint64_t n = st.counts.empty() ? 0 : st.counts[i];
    const Rational& u = cover.cover.weights[bq.edge_of(a.atom_id)];
    if (n == 0) return PowerProduct::of(0, 1);
    p.mul(Rational(n), u / *cover.slack);
  }
  return p;
}

/// Per-atom exponents of T(a) (zero for negated atoms) with long-double
/// copies, so threshold tests avoid rational arithmetic on clear cases.
class ResidualWeights {
 public:
  ResidualWeights() = default;
  explicit ResidualWeights(std::vector<Rational> exps) : exact_(std::move(exps)) {
    for (const auto& e : exact_) approx_.push_back(e.convert_to<long double>());
  }
  static ResidualWeights of(const BoundQuery& bq, const CoverAnalysis& cover) {
    std::vector<Rational> exps;
    for (const auto& a : bq.atoms) {
      exps.push_back(a.negated || !cover.slack ? Rational(0) : cover.cover.weights[bq.edge_of(a.atom_id)] / *cover.slack);
    }
    return ResidualWeights(std::move(exps));
  }

  PowerProduct cost(const JoinPlan::State& st) const {
    PowerProduct p;
    for (std::size_t i = 0; i < exact_.size(); ++i) {
      if (exact_[i] == 0) continue;
      if (st.counts[i] == 0) return PowerProduct::of(0, 1);
      p.mul(Rational(st.counts[i]), exact_[i]);
    }
    return p;
  }
  long double log_cost(const JoinPlan::State& st) const {
    long double s = 0;
    for (std::size_t i = 0; i < approx_.size(); ++i) {
      if (approx_[i] == 0) continue;
      if (st.counts[i] == 0) return -INFINITY;
      s += std::log(static_cast<long double>(st.counts[i])) * approx_[i];
    }
    return s;
  }
  /// Exact test T(a) > t, where log_t = t.log_value().
  bool exceeds(const JoinPlan::State& st, const PowerProduct& t, long double log_t) const {
    long double diff = log_cost(st) - log_t;
    if (diff > 1e-9L) return true;
    if (diff < -1e-9L) return false;
    return cost(st) > t;
  }

 private:
  std::vector<Rational> exact_;
  std::vector<long double> approx_;
};

/// Computes T(a) from scratch (one count lookup per atom).
inline PowerProduct residual_cost(const BoundQuery& bq, const CoverAnalysis& cover, const AccessRequest& a) {
  if (!cover.slack) return PowerProduct();
  Assignment asg{};
  bq.bind(a, asg);
  PowerProduct p;
  for (const auto& at : bq.atoms) {
    if (at.negated) continue;
    Columns cols;
    TupleKey key;
    for (std::uint32_t c = 0; c < at.vars.size(); ++c) {
      if (contains(bq.h.bound, at.vars[c])) {
        cols.push_back(c);
        key.push(asg[at.vars[c]]);
      }
    }
    std::uint32_t n = select_count(*at.rel, cols, key);
    if (n == 0) return PowerProduct::of(0, 1);
    p.mul(Rational(n), cover.cover.weights[bq.edge_of(at.atom_id)] / *cover.slack);
  }
  return p;
}

/// Live answer of a Boolean adorned query (negated atoms honored).
inline bool eval_bound(const BoundQuery& bq, const JoinPlan& plan, const AccessRequest& a, CostMeter& meter) {
  Assignment asg{};
  bq.bind(a, asg);
  auto st = plan.prepare(asg, meter);
  return plan.exists(st, asg, meter);
}

inline bool eval_bound(const BoundQuery& bq, const AccessRequest& a, CostMeter& meter) {
  return eval_bound(bq, eval_plan(bq), a, meter);
}

/// All requests over the bound variables that pass per-atom validity:
/// the join of the bound projections (atoms with no bound variable are
/// only checked for non-emptiness).
inline std::vector<AccessRequest> valid_requests(const BoundQuery& bq) {
  std::vector<JoinAtom> pos;
  for (const auto& a : bq.atoms) {
    if (!a.negated) pos.push_back(a);
  }
  for (const auto& a : pos) {
    if (a.rel->empty()) return {};
  }
  std::vector<JoinAtom> proj;
  for (const auto& a : pos) {
    if (a.var_set() & bq.h.bound) proj.push_back(a);
  }
  std::vector<AccessRequest> out;
  if (bq.h.bound == 0) {
    out.push_back({});
    return out;
  }
  JoinPlan plan(proj, bq.h, 0, bq.h.bound);
  Assignment asg{};
  CostMeter m;
  auto st = plan.prepare(asg, m);
  plan.search(st, asg, m, [&](const Assignment& x) {
    AccessRequest r;
    for (VarId v : bq.h.bound_order) r.values.push_back(x[v]);
    out.push_back(std::move(r));
    return false;
  });
  return out;
}

}  // namespace cqtrade
