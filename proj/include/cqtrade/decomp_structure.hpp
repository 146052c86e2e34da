#pragma once

// Tradeoff structure over a C-connex decomposition: one heavy-answer index
// per non-anchor bag (threshold |D|^delta(t)), answered top-down from the
// anchor. Heavy entries record whether the whole subtree below the bag is
// satisfiable under the bag's bound values.

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "cqtrade/adstruct.hpp"
#include "cqtrade/decomp.hpp"
#include "cqtrade/join.hpp"

namespace cqtrade {

class DecompStructure {
 public:
  using Entries = absl::flat_hash_map<TupleKey, bool>;

  enum class Mode { Anchor, Check, Cover, Materialized };

  struct Node {
    std::size_t index = 0;  // node index in the decomposition
    Mode mode = Mode::Anchor;
    VarSet bound = 0, free = 0;
    std::vector<VarId> key_vars;  // bound variables, ascending id
    std::vector<VarId> free_vars;
    JoinPlan plan;   // bag atoms, prebound = bound, target = free
    JoinPlan check;  // Materialized: bag atoms touching bound vars, everything prebound
    ResidualWeights weights;  // per plan atom: u_F / alpha
    PowerProduct threshold;
    Entries heavy;
    std::vector<TupleKey> tuples;  // Materialized: join over the free variables
    std::vector<std::size_t> children;  // positions in nodes_
    std::uint64_t valid_requests = 0;
  };

  /// Heavy entries per decomposition node plus anchor answers; enough to
  /// restore a structure without recomputing answers.
  struct Snapshot {
    std::vector<Entries> node_entries;  // indexed like the decomposition's nodes
    Entries root_entries;
  };

  static DecompStructure build(const AdornedQuery& q, const Database& db, const ConnexDecomposition& d,
                               unsigned jobs = 1) {
    DecompStructure s = prepare(q, db, d);
    std::vector<std::size_t> order = s.postorder();
    for (std::size_t pos : order) s.fill_node(pos, jobs);
    if (d.materialize_root) {
      auto requests = valid_requests(s.bq_);
      for (const auto& r : requests) {
        s.root_entries_.emplace(TupleKey(r.values), s.answer_live(r, s.stats_.work));
      }
      s.stats_.valid_requests = requests.size();
    }
    s.finish_ledger();
    return s;
  }

  static DecompStructure restore(const AdornedQuery& q, const Database& db, const ConnexDecomposition& d,
                                 Snapshot snap) {
    DecompStructure s = prepare(q, db, d);
    if (snap.node_entries.size() != d.nodes.size()) throw ValidationError("snapshot does not match the decomposition");
    for (auto& n : s.nodes_) {
      n.heavy = std::move(snap.node_entries[n.index]);
      if (n.mode == Mode::Materialized) s.materialize_free(n);
    }
    s.root_entries_ = std::move(snap.root_entries);
    s.finish_ledger();
    return s;
  }

  bool answer(const AccessRequest& a, CostMeter& meter) const {
    Assignment asg{};
    bq_.bind(a, asg);
    auto st = root_plan_.prepare(asg, meter);
    if (!st.valid) return false;
    if (decomp_.materialize_root) {
      ++meter.probes;
      auto it = root_entries_.find(TupleKey(a.values));
      return it != root_entries_.end() && it->second;
    }
    for (auto c : top_) {
      if (!sat(c, asg, meter)) return false;
    }
    return true;
  }

  Snapshot snapshot() const {
    Snapshot snap;
    snap.node_entries.resize(decomp_.nodes.size());
    for (const auto& n : nodes_) snap.node_entries[n.index] = n.heavy;
    snap.root_entries = root_entries_;
    return snap;
  }

  const BoundQuery& query() const { return bq_; }
  const ConnexDecomposition& decomposition() const { return decomp_; }
  const DecompReport& report() const { return report_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Entries& root_entries() const { return root_entries_; }
  const SpaceLedger& ledger() const { return ledger_; }
  const BuildStats& stats() const { return stats_; }

 private:
  static DecompStructure prepare(const AdornedQuery& q, const Database& db, const ConnexDecomposition& d) {
    require_boolean(q);
    DecompStructure s;
    s.bq_ = BoundQuery::make(q, db);
    s.decomp_ = d;
    s.report_ = validate_decomposition(s.bq_.h, d, &q);
    const Hypergraph& h = s.bq_.h;
    if (popcount(h.bound) > static_cast<int>(kMaxArity)) throw ValidationError("too many bound variables for a request key");

    // Negated atoms: checked at the anchor when inside C, otherwise at the
    // last bag in preorder that contains all their variables.
    auto pre = d.preorder();
    std::vector<std::optional<std::size_t>> neg_home(s.bq_.atoms.size());
    std::vector<JoinAtom> root_atoms;
    for (const auto& a : s.bq_.atoms) {
      if (!a.negated) {
        root_atoms.push_back(a);
        continue;
      }
      if (subset_of(a.var_set(), h.bound)) {
        root_atoms.push_back(a);
        continue;
      }
      for (auto t : pre) {
        if (subset_of(a.var_set(), d.nodes[t].bag)) neg_home[a.atom_id] = t;
      }
      if (!neg_home[a.atom_id]) {
        throw ValidationError("negated atom " + q.body[a.atom_id].relation + " is contained in no bag");
      }
    }
    s.root_plan_ = JoinPlan(root_atoms, h, h.bound, 0);
    s.size_ = static_cast<std::uint64_t>(db.total_size());

    std::vector<std::optional<std::size_t>> pos_of(d.nodes.size());
    for (auto t : pre) {
      if (d.nodes[t].in_anchor) continue;
      pos_of[t] = s.nodes_.size();
      Node n;
      n.index = t;
      n.bound = d.bound_of(t);
      n.free = d.free_of(t);
      n.key_vars = members(n.bound);
      n.free_vars = members(n.free);
      if (n.key_vars.size() > kMaxArity) {
        throw ValidationError("bag " + d.nodes[t].id + " binds more variables than a request key holds");
      }
      const VarSet bag = d.nodes[t].bag;
      std::vector<JoinAtom> atoms;
      for (const auto& a : s.bq_.atoms) {
        if (a.negated ? neg_home[a.atom_id] == t : subset_of(a.var_set(), bag)) atoms.push_back(a);
      }
      const auto& rep = s.report_.nodes[t];
      if (!n.free) {
        n.mode = Mode::Check;
        n.plan = JoinPlan(atoms, h, n.bound, 0);
      } else if (d.nodes[t].materialize_free) {
        n.mode = Mode::Materialized;
        std::vector<JoinAtom> checks;
        for (const auto& a : atoms) {
          if (a.negated || (a.var_set() & n.bound)) checks.push_back(a);
        }
        n.check = JoinPlan(checks, h, bag, 0);
      } else {
        n.mode = Mode::Cover;
        n.plan = JoinPlan(atoms, h, n.bound, n.free);
        std::vector<std::size_t> edge_ids;
        for (std::size_t i = 0; i < h.edges.size(); ++i) {
          if (subset_of(h.edges[i].vars, bag)) edge_ids.push_back(i);
        }
        const auto& w = rep.cover.cover.weights;
        const Rational alpha = *rep.cover.slack;
        std::vector<Rational> exps;
        for (const auto& a : n.plan.atoms()) {
          Rational e = 0;
          if (!a.negated) {
            auto it = std::find(edge_ids.begin(), edge_ids.end(), s.bq_.edge_of(a.atom_id));
            e = w[static_cast<std::size_t>(it - edge_ids.begin())] / alpha;
          }
          exps.push_back(e);
        }
        n.weights = ResidualWeights(std::move(exps));
        n.threshold = PowerProduct::of(Rational(s.size_), d.nodes[t].delta);
      }
      s.nodes_.push_back(std::move(n));
    }
    for (auto& n : s.nodes_) {
      for (auto c : d.children(n.index)) n.children.push_back(*pos_of[c]);
    }
    for (auto t : d.top_nodes()) s.top_.push_back(*pos_of[t]);
    return s;
  }

  std::vector<std::size_t> postorder() const {
    std::vector<std::size_t> out;
    std::function<void(std::size_t)> walk = [&](std::size_t p) {
      for (auto c : nodes_[p].children) walk(c);
      out.push_back(p);
    };
    for (auto t : top_) walk(t);
    return out;
  }

  TupleKey key_of(const Node& n, const Assignment& asg) const {
    TupleKey k;
    for (auto v : n.key_vars) k.push(asg[v]);
    return k;
  }

  void materialize_free(Node& n) {
    const Hypergraph& h = bq_.h;
    std::vector<JoinAtom> proj;
    for (const auto& a : bq_.atoms) {
      if (!a.negated && subset_of(a.var_set(), decomp_.nodes[n.index].bag) && (a.var_set() & n.free)) proj.push_back(a);
    }
    JoinPlan plan(proj, h, 0, n.free);
    Assignment asg{};
    CostMeter m;
    auto st = plan.prepare(asg, m);
    n.tuples.clear();
    plan.search(st, asg, m, [&](const Assignment& x) {
      TupleKey k;
      for (auto v : n.free_vars) k.push(x[v]);
      n.tuples.push_back(k);
      return false;
    });
  }

  void fill_node(std::size_t pos, unsigned jobs) {
    Node& n = nodes_[pos];
    if (n.mode == Mode::Materialized) {
      materialize_free(n);
      return;
    }
    if (n.mode != Mode::Cover) return;
    std::vector<JoinAtom> proj;
    for (const auto& a : n.plan.atoms()) {
      if (!a.negated && (a.var_set() & n.bound)) proj.push_back(a);
    }
    std::vector<TupleKey> requests;
    if (!n.bound) {
      requests.emplace_back();
    } else {
      JoinPlan enumerate(proj, bq_.h, 0, n.bound);
      Assignment asg{};
      CostMeter m;
      auto st = enumerate.prepare(asg, m);
      enumerate.search(st, asg, m, [&](const Assignment& x) {
        requests.push_back(key_of(n, x));
        return false;
      });
    }
    n.valid_requests = requests.size();
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(requests.size() / 64 + 1)));
    std::vector<std::vector<std::pair<TupleKey, bool>>> parts(jobs);
    std::vector<CostMeter> meters(jobs);
    std::vector<long double> sums(jobs, 0);
    const long double log_threshold = n.threshold.log_value();
    auto work = [&](unsigned j) {
      for (std::size_t i = j; i < requests.size(); i += jobs) {
        Assignment asg{};
        for (std::size_t k = 0; k < n.key_vars.size(); ++k) asg[n.key_vars[k]] = requests[i].values()[k];
        auto st = n.plan.prepare(asg, meters[j]);
        if (!st.valid) continue;
        if (!n.weights.exceeds(st, n.threshold, log_threshold)) continue;
        parts[j].emplace_back(requests[i], live(n, st, asg, meters[j]));
        sums[j] += std::exp(n.weights.log_cost(st));
      }
    };
    if (jobs == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j);
      for (auto& th : pool) th.join();
    }
    for (unsigned j = 0; j < jobs; ++j) {
      for (auto& [k, v] : parts[j]) n.heavy.emplace(k, v);
      stats_.work += meters[j];
      stats_.heavy_residual_sum += sums[j];
    }
  }

  void finish_ledger() {
    IndexTally tally;
    tally.add(root_plan_);
    ledger_ = {};
    stats_.heavy_requests = 0;
    for (const auto& n : nodes_) {
      tally.add(n.plan);
      tally.add(n.check);
      ledger_.stored_entries += n.heavy.size() + n.tuples.size();
      stats_.heavy_requests += n.heavy.size();
    }
    ledger_.stored_entries += root_entries_.size();
    ledger_.index_entries = tally.total;
  }

  bool answer_live(const AccessRequest& a, CostMeter& meter) const {
    Assignment asg{};
    bq_.bind(a, asg);
    if (!root_plan_.prepare(asg, meter).valid) return false;
    for (auto c : top_) {
      if (!sat(c, asg, meter)) return false;
    }
    return true;
  }

  bool children_sat(const Node& n, Assignment& asg, CostMeter& meter) const {
    for (auto c : n.children) {
      if (!sat(c, asg, meter)) return false;
    }
    return true;
  }

  bool live(const Node& n, const JoinPlan::State& st, Assignment& asg, CostMeter& meter) const {
    return n.plan.search(st, asg, meter, [&](const Assignment& x) {
      Assignment y = x;
      return children_sat(n, y, meter);
    });
  }

  bool sat(std::size_t pos, Assignment& asg, CostMeter& meter) const {
    const Node& n = nodes_[pos];
    switch (n.mode) {
      case Mode::Check: {
        if (!n.plan.prepare(asg, meter).valid) return false;
        return children_sat(n, asg, meter);
      }
      case Mode::Materialized: {
        for (const auto& t : n.tuples) {
          ++meter.tuples_touched;
          for (std::size_t k = 0; k < n.free_vars.size(); ++k) asg[n.free_vars[k]] = t.values()[k];
          if (n.check.prepare(asg, meter).valid && children_sat(n, asg, meter)) return true;
        }
        return false;
      }
      case Mode::Cover: {
        auto st = n.plan.prepare(asg, meter);
        if (!st.valid) return false;
        if (!n.heavy.empty()) {
          ++meter.probes;
          auto it = n.heavy.find(key_of(n, asg));
          if (it != n.heavy.end()) return it->second;
        }
        return live(n, st, asg, meter);
      }
      case Mode::Anchor:
        break;
    }
    return true;
  }

  BoundQuery bq_;
  ConnexDecomposition decomp_;
  DecompReport report_;
  JoinPlan root_plan_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> top_;
  Entries root_entries_;
  std::uint64_t size_ = 0;
  SpaceLedger ledger_;
  BuildStats stats_;
};

/// Structure over the constrained decomposition (anchor C, one middle bag,
/// negation leaves) with delta = tau on the middle bag.
inline DecompStructure build_negation_structure(const AdornedQuery& q, const Database& db, const Rational& tau,
                                                unsigned jobs = 1) {
  validate(q);
  auto h = hypergraph_of(q);
  return DecompStructure::build(q, db, constrained_negation_decomposition(q, h, tau), jobs);
}

}  // namespace cqtrade
