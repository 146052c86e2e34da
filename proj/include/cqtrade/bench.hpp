#pragma once

// Build/query sweeps over synthetic instances: one BenchRow per grid point,
// CSV and plot-data output, and log-log slope fitting.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cqtrade/adstruct.hpp"
#include "cqtrade/generate.hpp"
#include "cqtrade/pathengine.hpp"

namespace cqtrade {

struct BenchConfig {
  std::string family = "star";  // star | path | triangle | square | custom
  std::size_t k = 2;
  std::vector<std::uint64_t> sizes{2000};
  std::vector<Rational> thresholds;   // T for cover families; empty picks a grid
  std::vector<std::uint64_t> deltas;  // path; empty means ceil(sqrt|D|) doubling up to |D|
  Rational time_exponent = make_rational(1, 2);  // selects the cover for cover families
  bool adversarial = false;  // path: add a high-degree middle vertex
  bool compare_bfs = false;  // path: add BFS rows
  std::vector<std::uint64_t> seeds{1};
  unsigned jobs = 1;
  double bound_constant = 8;
  std::size_t sample_requests = 20000;
  bool timing = false;
  std::optional<AdornedQuery> custom_query;
  const Database* custom_db = nullptr;
};

struct BenchRow {
  std::string family, strategy, params;
  std::uint64_t seed = 0, db_size = 0;
  std::string threshold;         // T or delta as configured
  double time_scale = 0;         // T (cover families) or (|D|/delta)^{(k-2)/2} (paths)
  std::uint64_t valid_requests = 0;
  std::uint64_t stored_entries = 0, index_entries = 0;
  std::uint64_t max_answer_steps = 0;
  double mean_answer_steps = 0;
  std::uint64_t requests_measured = 0;
  double build_millis = 0;
  std::string predicted_space, predicted_time;
  double space_constant = 0;  // measured space / asserted space bound
  double time_constant = 0;   // measured steps / asserted time bound
  bool fit_eligible = false;
  bool bound_ok = true;
  std::string note;
};

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline Rational rational_of(double x) { return make_rational(static_cast<std::int64_t>(std::llround(x * 100)), 100); }

inline std::vector<Rational> log_grid(double lo, double hi, int points) {
  std::vector<Rational> out;
  for (int i = 0; i < points; ++i) {
    double t = lo * std::pow(hi / lo, points == 1 ? 0.0 : static_cast<double>(i) / (points - 1));
    Rational r = rational_of(t);
    if (out.empty() || out.back() != r) out.push_back(r);
  }
  return out;
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// Runs `tasks` on up to `jobs` threads; results keep task order.
inline void run_parallel(std::vector<std::function<void()>>& tasks, unsigned jobs) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size())));
  if (jobs == 1) {
    for (auto& t : tasks) t();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < tasks.size(); i = next++) tasks[i]();
    });
  }
  for (auto& th : pool) th.join();
}

struct Instance {
  AdornedQuery query;
  Database owned;
  const Database* db = &owned;
  std::uint64_t seed = 0;
  std::string params;
  std::vector<Rational> thresholds;
};

}  // namespace detail

/// Builds a CoverStructure per threshold and meters light requests: every
/// light request whose residual exceeds T/2 plus an evenly strided sample.
inline BenchRow bench_cover_point(const std::string& family, const AdornedQuery& q, const Database& db,
                                  const CoverAnalysis& cover, const Rational& t, std::size_t sample,
                                  double bound_constant, bool timing) {
  BenchRow row;
  row.family = family;
  row.strategy = "adstruct";
  row.db_size = db.total_size();
  row.threshold = to_string(t);
  row.time_scale = detail::to_double(t);
  auto start = std::chrono::steady_clock::now();
  auto s = CoverStructure::build(q, db, cover, t);
  if (timing) {
    row.build_millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  row.valid_requests = s.stats().valid_requests;
  row.stored_entries = s.ledger().stored_entries;
  row.index_entries = s.ledger().index_entries;

  auto requests = valid_requests(s.query());
  std::size_t stride = std::max<std::size_t>(1, requests.size() / std::max<std::size_t>(1, sample));
  const long double log_t = PowerProduct::of(t).log_value();
  const long double log_half = log_t - std::log(2.0L);
  long double total = 0;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    long double r = s.log_residual(requests[i]);
    if (r > log_t + 1e-9L || (r > log_t - 1e-9L && s.is_heavy(requests[i]))) continue;
    if (!(r > log_half) && i % stride != 0) continue;
    CostMeter m;
    s.answer(requests[i], m);
    row.max_answer_steps = std::max(row.max_answer_steps, m.steps());
    total += m.steps();
    ++row.requests_measured;
  }
  row.mean_answer_steps = row.requests_measured ? static_cast<double>(total / row.requests_measured) : 0;

  auto pred = predicted_space(cover);
  row.predicted_space = pred.quotient_form();
  row.predicted_time = "T=" + to_string(t);
  double tv = std::max(1.0, row.time_scale);
  // stored * T <= sum of heavy residuals: every heavy request has T(a) > T.
  long double chain = static_cast<long double>(row.stored_entries) * row.time_scale;
  bool chain_ok = chain <= s.stats().heavy_residual_sum * (1 + 1e-9L) + 1e-9L;
  long double bound = 1;
  for (std::size_t i = 0; i < cover.cover.weights.size(); ++i) {
    bound *= std::pow(static_cast<long double>(row.db_size), cover.cover.weights[i].convert_to<long double>());
  }
  if (cover.slack) bound /= std::pow(static_cast<long double>(tv), cover.slack->convert_to<long double>());
  row.space_constant = bound > 0 ? static_cast<double>(row.stored_entries / bound) : 0;
  row.time_constant = static_cast<double>(row.max_answer_steps) / tv;
  row.fit_eligible = row.stored_entries >= 16 && row.stored_entries < row.valid_requests;
  row.bound_ok = chain_ok && row.time_constant <= bound_constant;
  if (!chain_ok) row.note = "space chain violated";
  return row;
}

namespace detail {

/// Request pairs for path measurements: a seeded sample plus the
/// highest-degree endpoints.
inline std::vector<std::pair<Value, Value>> path_requests(const PathInstance& p, std::size_t sample, std::uint64_t seed) {
  std::set<Value> starts_set, ends_set;
  const auto& first = p.steps.front();
  const auto& last = p.steps.back();
  for (std::size_t i = 0; i < first.rel->size(); ++i) starts_set.insert(first.rel->row(i)[first.src]);
  for (std::size_t i = 0; i < last.rel->size(); ++i) ends_set.insert(last.rel->row(i)[last.dst]);
  std::vector<Value> starts(starts_set.begin(), starts_set.end()), ends(ends_set.begin(), ends_set.end());
  std::vector<std::pair<Value, Value>> out;
  if (starts.empty() || ends.empty()) return out;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> ps(0, starts.size() - 1), pe(0, ends.size() - 1);
  for (std::size_t i = 0; i < sample; ++i) out.emplace_back(starts[ps(rng)], ends[pe(rng)]);
  auto top = [](std::vector<Value> vals, const ExtensionIndex& ix) {
    std::stable_sort(vals.begin(), vals.end(), [&](Value a, Value b) { return degree(ix, a) > degree(ix, b); });
    vals.resize(std::min<std::size_t>(vals.size(), 24));
    return vals;
  };
  for (Value a : top(starts, first.out())) {
    for (Value b : top(ends, last.in())) out.emplace_back(a, b);
  }
  return out;
}

template <class Answer>
void meter_requests(BenchRow& row, const std::vector<std::pair<Value, Value>>& reqs, Answer&& answer) {
  long double total = 0;
  for (auto [a, b] : reqs) {
    CostMeter m;
    answer(a, b, m);
    row.max_answer_steps = std::max(row.max_answer_steps, m.steps());
    total += m.steps();
  }
  row.requests_measured = reqs.size();
  row.mean_answer_steps = reqs.empty() ? 0 : static_cast<double>(total / reqs.size());
}

}  // namespace detail

/// Path structure at one delta; for k >= 5 the (k-1)-path structure on the
/// same data supplies the step ratio T_k / T_{k-1}.
inline std::vector<BenchRow> bench_path_point(const std::string& family, const PathInstance& p, std::uint64_t delta,
                                              const std::vector<std::pair<Value, Value>>& reqs, double bound_constant,
                                              bool timing, bool compare_bfs) {
  const std::size_t k = p.k();
  const double n = static_cast<double>(p.size);
  BenchRow row;
  row.family = family;
  row.strategy = "path";
  row.db_size = p.size;
  row.threshold = "delta=" + std::to_string(delta);
  row.time_scale = std::pow(n / delta, (static_cast<double>(k) - 2) / 2);
  auto start = std::chrono::steady_clock::now();
  auto s = PathStructure::build(p, delta);
  if (timing) {
    row.build_millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  if (s.stats().warning) row.note = *s.stats().warning;
  row.stored_entries = s.ledger().stored_entries;
  row.index_entries = s.ledger().index_entries;
  detail::meter_requests(row, reqs, [&](Value a, Value b, CostMeter& m) { return s.answer(a, b, m); });
  double space = static_cast<double>(s.ledger().total_space_units());
  row.space_constant = space / ((static_cast<double>(k) - 3) * n * delta);
  if (k == 4) {
    row.predicted_space = "S=|D|·Δ";
    row.predicted_time = "T=|D|/Δ";
    row.time_constant = static_cast<double>(row.max_answer_steps) / (n / delta);
  } else {
    row.predicted_space = "S=" + std::to_string(k - 3) + "·|D|·Δ";
    row.predicted_time = "T_k/T_{k-1}=(|D|/Δ)^{1/2}";
    auto shorter = PathStructure::build(p.slice(0, k - 1), delta);
    BenchRow sub;
    detail::meter_requests(sub, reqs, [&](Value a, Value b, CostMeter& m) { return shorter.answer(a, b, m); });
    double ratio = static_cast<double>(row.max_answer_steps) / std::max<std::uint64_t>(1, sub.max_answer_steps);
    row.time_constant = ratio / std::sqrt(n / delta);
  }
  row.fit_eligible = row.stored_entries > 0;
  // The space assertion only applies in the delta >= sqrt|D| regime.
  bool space_ok = s.stats().warning.has_value() || row.space_constant <= bound_constant;
  row.bound_ok = space_ok && row.time_constant <= bound_constant;
  std::vector<BenchRow> out{row};
  if (compare_bfs) {
    BenchRow b = row;
    b.strategy = "bfs";
    b.threshold = "-";
    b.note.clear();
    b.max_answer_steps = 0;
    b.stored_entries = 0;
    IndexTally tally;
    for (const auto& st : p.steps) tally.add(&st.out(), st.out().entries());
    b.index_entries = tally.total;
    detail::meter_requests(b, reqs, [&](Value x, Value y, CostMeter& m) { return bfs_fallback(p, x, y, m); });
    b.time_scale = static_cast<double>(b.max_answer_steps);
    b.predicted_space = "S=|D|";
    b.predicted_time = "T=|D|";
    b.space_constant = static_cast<double>(b.index_entries) / n;
    b.time_constant = static_cast<double>(b.max_answer_steps) / (static_cast<double>(k) * n);
    b.fit_eligible = false;
    b.bound_ok = b.time_constant <= bound_constant;
    out.push_back(b);
  }
  return out;
}

inline std::vector<std::uint64_t> default_deltas(std::uint64_t size) {
  std::uint64_t d = 1;
  while (d * d < size) ++d;
  std::vector<std::uint64_t> out;
  for (; d < size; d *= 2) out.push_back(d);
  out.push_back(size);
  return out;
}

inline std::string cover_family_query(const std::string& family, std::size_t k) {
  if (family == "star") return star_query_text(k);
  if (family == "triangle") return "Q(b x, b z) = E(x,y), E(y,z), E(x,z)";
  if (family == "square") return "Q(b x1, b x2) = E(x1,x2), E(x2,x3), E(x3,x4), E(x4,x1)";
  throw ValidationError("unknown bench family " + family);
}

/// Runs the whole sweep; rows come out in (size, seed, threshold) order.
inline std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
  if (cfg.seeds.empty()) throw ValidationError("bench needs at least one seed");
  if (cfg.family != "custom" && cfg.sizes.empty()) throw ValidationError("bench needs at least one size");
  std::vector<std::vector<BenchRow>> slots;
  std::vector<std::function<void()>> tasks;
  std::vector<std::unique_ptr<detail::Instance>> instances;
  std::vector<std::unique_ptr<PathInstance>> paths;
  std::vector<std::unique_ptr<std::vector<std::pair<Value, Value>>>> path_reqs;
  std::vector<std::unique_ptr<CoverAnalysis>> covers;

  auto add_task = [&](std::function<std::vector<BenchRow>()> f) {
    slots.emplace_back();
    std::size_t slot = slots.size() - 1;
    tasks.push_back([&slots, slot, f = std::move(f)] { slots[slot] = f(); });
  };

  if (cfg.family == "path") {
    if (cfg.k < 4) throw ValidationError("path bench needs k >= 4");
    for (auto size : cfg.sizes) {
      for (auto seed : cfg.seeds) {
        auto inst = std::make_unique<detail::Instance>();
        std::uint64_t n = std::max<std::uint64_t>(8, size / 10);
        inst->query = parse_query(path_query_text(cfg.k));
        if (cfg.adversarial) {
          // Heavy in both directions for delta up to about 2 sqrt|D|.
          std::uint64_t spike = 1;
          while (spike * spike < size) ++spike;
          spike = 2 * spike + 1;
          if (2 * spike >= size) throw ValidationError("size too small for an adversarial instance");
          n = std::max(n, spike + 1);
          inst->owned = adversarial_heavy(n, size - 2 * spike, spike, seed);
        } else {
          inst->owned = random_digraph(n, size, seed);
        }
        inst->seed = seed;
        inst->params = "k=" + std::to_string(cfg.k) + ";n=" + std::to_string(n) + (cfg.adversarial ? ";spike" : "");
        auto p = std::make_unique<PathInstance>(PathInstance::from_query(inst->query, *inst->db));
        auto reqs = std::make_unique<std::vector<std::pair<Value, Value>>>(
            detail::path_requests(*p, cfg.sample_requests, seed));
        auto deltas = cfg.deltas.empty() ? default_deltas(p->size) : cfg.deltas;
        for (auto delta : deltas) {
          const PathInstance* pp = p.get();
          const auto* rq = reqs.get();
          const detail::Instance* ip = inst.get();
          add_task([=, &cfg] {
            auto rows = bench_path_point("path", *pp, delta, *rq, cfg.bound_constant, cfg.timing, cfg.compare_bfs);
            for (auto& r : rows) {
              r.seed = ip->seed;
              r.params = ip->params;
            }
            return rows;
          });
        }
        instances.push_back(std::move(inst));
        paths.push_back(std::move(p));
        path_reqs.push_back(std::move(reqs));
      }
    }
  } else {
    std::vector<std::uint64_t> sizes = cfg.family == "custom" ? std::vector<std::uint64_t>{0} : cfg.sizes;
    for (auto size : sizes) {
      for (auto seed : cfg.seeds) {
        auto inst = std::make_unique<detail::Instance>();
        inst->seed = seed;
        double t_lo = 2, t_hi = 0;
        if (cfg.family == "custom") {
          if (!cfg.custom_query || !cfg.custom_db) throw ValidationError("custom bench needs --query and --db");
          inst->query = *cfg.custom_query;
          inst->db = cfg.custom_db;
          inst->params = "custom";
          t_hi = std::sqrt(static_cast<double>(std::max<std::size_t>(4, inst->db->total_size())));
        } else if (cfg.family == "star") {
          inst->query = parse_query(cover_family_query("star", cfg.k));
          auto scale = zipf_scale(size);
          inst->owned = set_family({0, size, size, true}, seed);
          inst->params = "k=" + std::to_string(cfg.k) + ";sets=" + std::to_string(scale);
          // Center the sweep on sqrt of the largest set, where the Zipf tail is symmetric.
          double mid = std::sqrt(static_cast<double>(scale));
          t_lo = mid / 4;
          t_hi = mid * 4;
        } else {
          inst->query = parse_query(cover_family_query(cfg.family, cfg.k));
          std::uint64_t n = std::max<std::uint64_t>(8, size / 10);
          inst->owned = random_digraph(n, size, seed);
          inst->params = "n=" + std::to_string(n);
          t_hi = std::sqrt(static_cast<double>(size));
        }
        inst->thresholds = cfg.thresholds.empty() ? detail::log_grid(t_lo, t_hi, 8) : cfg.thresholds;
        auto h = hypergraph_of(inst->query);
        auto cover = std::make_unique<CoverAnalysis>(best_cover_for_time(h, cfg.time_exponent));
        for (const auto& t : inst->thresholds) {
          const detail::Instance* ip = inst.get();
          const CoverAnalysis* cp = cover.get();
          add_task([=, &cfg] {
            auto row = bench_cover_point(cfg.family, ip->query, *ip->db, *cp, t, cfg.sample_requests,
                                         cfg.bound_constant, cfg.timing);
            row.seed = ip->seed;
            row.params = ip->params;
            return std::vector<BenchRow>{row};
          });
        }
        instances.push_back(std::move(inst));
        covers.push_back(std::move(cover));
      }
    }
  }
  detail::run_parallel(tasks, cfg.jobs);
  std::vector<BenchRow> out;
  for (auto& s : slots) out.insert(out.end(), s.begin(), s.end());
  return out;
}

/// Deterministic CSV; build time only with `timing`.
inline std::string bench_csv(const std::vector<BenchRow>& rows, bool timing = false) {
  std::ostringstream out;
  out << "family,strategy,params,seed,db_size,threshold,valid_requests,stored_entries,index_entries,"
         "max_answer_steps,mean_answer_steps,requests_measured,predicted_space,predicted_time,space_constant,"
         "time_constant,bound_ok";
  if (timing) out << ",build_millis";
  out << ",note\n";
  for (const auto& r : rows) {
    out << r.family << ',' << r.strategy << ',' << r.params << ',' << r.seed << ',' << r.db_size << ','
        << r.threshold << ',' << r.valid_requests << ',' << r.stored_entries << ',' << r.index_entries << ','
        << r.max_answer_steps << ',' << detail::fixed(r.mean_answer_steps) << ',' << r.requests_measured << ','
        << r.predicted_space << ',' << r.predicted_time << ',' << detail::fixed(r.space_constant) << ','
        << detail::fixed(r.time_constant) << ',' << (r.bound_ok ? "true" : "false");
    if (timing) out << ',' << detail::fixed(r.build_millis, 1);
    std::string note = r.note;
    std::replace(note.begin(), note.end(), ',', ';');
    out << ',' << note << '\n';
  }
  return out.str();
}

/// Least-squares slope of y on x; nullopt with fewer than two distinct x.
inline std::optional<double> ls_slope(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 2) return std::nullopt;
  double mx = 0, my = 0;
  for (auto [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= pts.size();
  my /= pts.size();
  double sxx = 0, sxy = 0;
  for (auto [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0) return std::nullopt;
  return sxy / sxx;
}

struct SlopeFit {
  std::string series;
  std::vector<std::pair<double, double>> points;  // (ln T, ln S) of eligible rows
  std::optional<double> slope;
};

/// One series per (family, strategy, params, size, seed): stored entries
/// against the time scale, excluding rows outside the unsaturated region.
inline std::vector<SlopeFit> fit_slopes(const std::vector<BenchRow>& rows) {
  std::map<std::string, SlopeFit> by;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    std::string key = r.family + "/" + r.strategy + "/" + r.params + "/D=" + std::to_string(r.db_size) +
                      "/seed=" + std::to_string(r.seed);
    if (!by.contains(key)) {
      order.push_back(key);
      by[key].series = key;
    }
    if (r.fit_eligible && r.time_scale > 0 && r.stored_entries > 0) {
      by[key].points.emplace_back(std::log(r.time_scale), std::log(static_cast<double>(r.stored_entries)));
    }
  }
  std::vector<SlopeFit> out;
  for (const auto& k : order) {
    auto f = by[k];
    f.slope = ls_slope(f.points);
    out.push_back(std::move(f));
  }
  return out;
}

/// Plot data: measured series with fitted slopes, plus the predicted
/// frontier pieces for path benches.
inline nlohmann::json plot_json(const std::vector<BenchRow>& rows, const BenchConfig& cfg) {
  nlohmann::json j;
  j["family"] = cfg.family;
  j["series"] = nlohmann::json::array();
  for (const auto& f : fit_slopes(rows)) {
    nlohmann::json s;
    s["name"] = f.series;
    s["points"] = nlohmann::json::array();
    for (auto [x, y] : f.points) s["points"].push_back({std::stod(detail::fixed(x, 6)), std::stod(detail::fixed(y, 6))});
    s["slope"] = f.slope ? nlohmann::json(std::stod(detail::fixed(*f.slope, 6))) : nlohmann::json(nullptr);
    j["series"].push_back(s);
  }
  if (cfg.family == "path") {
    j["predicted_frontier"] = nlohmann::json::array();
    for (const auto& piece : path_frontier(static_cast<int>(cfg.k))) {
      j["predicted_frontier"].push_back({{"strategy", piece.strategy},
                                         {"from", to_string(piece.from)},
                                         {"to", to_string(piece.to)},
                                         {"space_exponent", piece.expression()}});
    }
  }
  return j;
}

}  // namespace cqtrade
