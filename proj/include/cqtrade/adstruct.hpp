#pragma once

// Cover-based tradeoff structure: per-atom validity indexes, materialized
// answers for heavy requests (T(a) > T) and live generic join for the rest.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "cqtrade/covers.hpp"
#include "cqtrade/join.hpp"

namespace cqtrade {

struct SpaceLedger {
  std::uint64_t stored_entries = 0;  // materialized answers / view tuples
  std::uint64_t index_entries = 0;   // validity and lookup indexes

  std::uint64_t total_space_units() const { return stored_entries + index_entries; }
  SpaceLedger& operator+=(const SpaceLedger& o) {
    stored_entries += o.stored_entries;
    index_entries += o.index_entries;
    return *this;
  }
};

struct BuildStats {
  std::uint64_t valid_requests = 0;
  std::uint64_t heavy_requests = 0;
  /// Sum of T(a) over heavy requests (floating point, informational).
  long double heavy_residual_sum = 0;
  CostMeter work;
};

class CoverStructure {
 public:
  using Entries = absl::flat_hash_map<TupleKey, bool>;

  /// Builds the structure for threshold T. `jobs` > 1 splits the valid
  /// request stream across threads.
  static CoverStructure build(const AdornedQuery& q, const Database& db, const CoverAnalysis& cover,
                              const Rational& threshold, unsigned jobs = 1) {
    CoverStructure s = prepare(q, db, cover, threshold);
    auto requests = valid_requests(s.bq_);
    s.stats_.valid_requests = requests.size();
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(requests.size() / 64 + 1)));
    std::vector<Entries> parts(jobs);
    std::vector<BuildStats> part_stats(jobs);
    auto work = [&](unsigned j) {
      PowerProduct t = PowerProduct::of(s.threshold_);
      const long double log_t = t.log_value();
      for (std::size_t i = j; i < requests.size(); i += jobs) {
        Assignment asg{};
        s.bq_.bind(requests[i], asg);
        auto st = s.plan_.prepare(asg, part_stats[j].work);
        if (!st.valid) continue;
        if (!s.weights_.exceeds(st, t, log_t)) continue;
        bool ans = s.plan_.exists(st, asg, part_stats[j].work);
        parts[j].emplace(TupleKey(requests[i].values), ans);
        part_stats[j].heavy_residual_sum += std::exp(s.weights_.log_cost(st));
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
      for (auto& [k, v] : parts[j]) s.heavy_.emplace(k, v);
      s.stats_.heavy_residual_sum += part_stats[j].heavy_residual_sum;
      s.stats_.work += part_stats[j].work;
    }
    s.stats_.heavy_requests = s.heavy_.size();
    s.ledger_.stored_entries = s.heavy_.size();
    return s;
  }

  /// Rebuilds the indexes and installs previously computed heavy entries.
  static CoverStructure restore(const AdornedQuery& q, const Database& db, const CoverAnalysis& cover,
                                const Rational& threshold, Entries entries) {
    CoverStructure s = prepare(q, db, cover, threshold);
    s.heavy_ = std::move(entries);
    s.ledger_.stored_entries = s.heavy_.size();
    s.stats_.heavy_requests = s.heavy_.size();
    return s;
  }

  bool answer(const AccessRequest& a, CostMeter& meter) const {
    Assignment asg{};
    bq_.bind(a, asg);
    auto st = plan_.prepare(asg, meter);
    if (!st.valid) return false;
    if (!heavy_.empty()) {
      ++meter.probes;
      auto it = heavy_.find(TupleKey(a.values));
      if (it != heavy_.end()) return it->second;
    }
    return plan_.exists(st, asg, meter);
  }

  /// True iff `a` passes validity and T(a) > T.
  bool is_heavy(const AccessRequest& a) const {
    Assignment asg{};
    bq_.bind(a, asg);
    CostMeter m;
    auto st = plan_.prepare(asg, m);
    if (!st.valid) return false;
    auto t = PowerProduct::of(threshold_);
    return weights_.exceeds(st, t, t.log_value());
  }

  PowerProduct residual(const AccessRequest& a) const {
    Assignment asg{};
    bq_.bind(a, asg);
    CostMeter m;
    auto st = plan_.prepare(asg, m);
    if (!st.valid) return PowerProduct::of(0, 1);
    return weights_.cost(st);
  }

  /// ln T(a); -inf for invalid requests.
  long double log_residual(const AccessRequest& a) const {
    Assignment asg{};
    bq_.bind(a, asg);
    CostMeter m;
    auto st = plan_.prepare(asg, m);
    return st.valid ? weights_.log_cost(st) : -INFINITY;
  }

  const BoundQuery& query() const { return bq_; }
  const CoverAnalysis& cover() const { return cover_; }
  const Rational& threshold() const { return threshold_; }
  const Entries& entries() const { return heavy_; }
  const SpaceLedger& ledger() const { return ledger_; }
  const BuildStats& stats() const { return stats_; }

 private:
  static CoverStructure prepare(const AdornedQuery& q, const Database& db, const CoverAnalysis& cover,
                                const Rational& threshold) {
    require_boolean(q);
    if (q.has_negation()) throw UnsupportedQueryError("negated atoms require the negation strategy");
    if (threshold < 0) throw ValidationError("time threshold must be non-negative");
    CoverStructure s;
    s.bq_ = BoundQuery::make(q, db);
    if (cover.cover.weights.size() != s.bq_.h.edges.size()) {
      throw ValidationError("cover has " + std::to_string(cover.cover.weights.size()) + " weights but the query has " +
                            std::to_string(s.bq_.h.edges.size()) + " atoms");
    }
    std::vector<VarSet> edges;
    for (const auto& e : s.bq_.h.edges) edges.push_back(e.vars);
    if (!covers_exactly(edges, cover.cover.weights, s.bq_.h.nodes)) {
      throw ValidationError("weights do not form a fractional edge cover of the query variables");
    }
    s.cover_ = cover;
    s.cover_.slack = slack_of(s.bq_.h, cover.cover);
    s.threshold_ = threshold;
    s.plan_ = eval_plan(s.bq_);
    s.weights_ = ResidualWeights::of(s.bq_, s.cover_);
    s.ledger_.index_entries = s.plan_.index_entries();
    return s;
  }

  BoundQuery bq_;
  JoinPlan plan_;
  ResidualWeights weights_;
  CoverAnalysis cover_;
  Rational threshold_;
  Entries heavy_;
  SpaceLedger ledger_;
  BuildStats stats_;
};

/// Renders |X|^e: exponent 1 omitted, fractional exponents braced.
inline std::string format_power(const std::string& base, const Rational& e) {
  if (e == 0) return "1";
  if (e == 1) return base;
  auto s = to_string(e);
  if (s.find('/') != std::string::npos || e < 0) return base + "^{" + s + "}";
  return base + "^" + s;
}

/// Symbolic bound prod |R_F|^{u_F} / T^alpha with every relation bounded by
/// the same size symbol.
struct SpacePrediction {
  Rational size_exponent;             // sum u_F
  std::optional<Rational> time_exponent;  // alpha; nullopt when all variables are bound
  std::string size_symbol = "|D|";
  std::string time_symbol = "T";

  /// "S·T^a=|D|^r"
  std::string product_form() const {
    if (!time_exponent) return "S=" + format_power(size_symbol, 1) + ", " + time_symbol + "=1";
    return "S·" + format_power(time_symbol, *time_exponent) + "=" + format_power(size_symbol, size_exponent);
  }
  /// "S=|D|^r/T^a"
  std::string quotient_form() const {
    if (!time_exponent) return "S=" + format_power(size_symbol, 1) + ", " + time_symbol + "=1";
    return "S=" + format_power(size_symbol, size_exponent) + "/" + format_power(time_symbol, *time_exponent);
  }
  /// Space exponent when T = N^tau.
  Rational space_exponent(const Rational& tau) const {
    return time_exponent ? size_exponent - *time_exponent * tau : size_exponent;
  }
  /// Numeric bound prod |R_F|^{u_F} / T^alpha for concrete sizes.
  double evaluate(const std::vector<std::size_t>& sizes, const std::vector<Rational>& weights, double t) const {
    long double log_s = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (sizes[i] == 0) return 0;
      log_s += std::log(static_cast<long double>(sizes[i])) * weights[i].convert_to<long double>();
    }
    if (time_exponent) log_s -= std::log(static_cast<long double>(t)) * time_exponent->convert_to<long double>();
    return static_cast<double>(std::exp(log_s));
  }
};

inline SpacePrediction predicted_space(const CoverAnalysis& cover, const std::string& size_symbol = "|D|",
                                       const std::string& time_symbol = "T") {
  SpacePrediction p;
  p.size_exponent = cover.cover.value();
  p.time_exponent = cover.slack;
  p.size_symbol = size_symbol;
  p.time_symbol = time_symbol;
  return p;
}

}  // namespace cqtrade
