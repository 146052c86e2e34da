#pragma once

// Symbolic analysis of an adorned query: cover numbers, candidate covers
// with their tradeoffs, decompositions over a delta grid, the negation
// tradeoff and the path-strategy frontier, rendered as JSON.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cqtrade/adstruct.hpp"
#include "cqtrade/covers.hpp"
#include "cqtrade/decomp.hpp"
#include "cqtrade/pathengine.hpp"

namespace cqtrade {

struct AnalyzeOptions {
  std::string size_symbol = "|D|";
  int grid_q = 8;
  std::size_t max_decompositions = 16;
};

struct CoverCandidate {
  CoverAnalysis analysis;
  bool dominated = false;
};

namespace detail {

/// max(1, v - alpha*tau): space exponent with the linear floor.
inline Rational floored_exponent(const CoverAnalysis& c, const Rational& tau) {
  Rational e = c.slack ? c.cover_value - *c.slack * tau : c.cover_value;
  return e < 1 ? Rational(1) : e;
}

/// True iff `a` is never worse than `b` for tau >= 0 and strictly better
/// somewhere. Both sides are piecewise linear, so breakpoints suffice.
inline bool dominates(const CoverAnalysis& a, const CoverAnalysis& b) {
  std::set<Rational> pts{Rational(0)};
  for (const auto* c : {&a, &b}) {
    if (c->slack && *c->slack > 0) pts.insert((c->cover_value - 1) / *c->slack);
  }
  if (a.slack && b.slack && *a.slack != *b.slack) {
    pts.insert((a.cover_value - b.cover_value) / (*a.slack - *b.slack));
  }
  Rational top = 0;
  for (const auto& p : pts) top = p > top ? p : top;
  pts.insert(top + 1);
  bool strict = false;
  for (const auto& p : pts) {
    if (p < 0) continue;
    auto ea = floored_exponent(a, p), eb = floored_exponent(b, p);
    if (ea > eb) return false;
    if (ea < eb) strict = true;
  }
  // Between consecutive breakpoints both sides are linear; midpoints catch
  // strict gaps that vanish at the breakpoints.
  std::vector<Rational> v(pts.begin(), pts.end());
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (v[i] < 0) continue;
    Rational m = (v[i] + v[i + 1]) / 2;
    if (floored_exponent(a, m) < floored_exponent(b, m)) strict = true;
  }
  return strict;
}

inline nlohmann::json weights_json(const std::vector<Rational>& w) {
  auto j = nlohmann::json::array();
  for (const auto& x : w) j.push_back(to_string(x));
  return j;
}

inline nlohmann::json names_json(const Hypergraph& h, VarSet s) {
  auto j = nlohmann::json::array();
  for (VarId v : members(s)) j.push_back(h.var_names[v]);
  return j;
}

inline std::vector<Rational> tau_grid(int q, int top) {
  if (q <= 0) throw ValidationError("grid denominator must be positive");
  std::vector<Rational> out;
  for (int i = 0; i <= top; ++i) out.push_back(make_rational(i, q));
  return out;
}

/// "S·T^a=|D|^r" from an exponent line a + b*t.
inline std::string product_form(const Rational& a, const Rational& b, const std::string& size_symbol) {
  if (b == 0) return "S=" + format_power(size_symbol, a);
  return "S·" + format_power("T", -b) + "=" + format_power(size_symbol, a);
}

}  // namespace detail

/// Distinct LP-optimal covers over tau in [0, 2], flagged when another
/// candidate dominates them.
inline std::vector<CoverCandidate> candidate_covers(const Hypergraph& h, int grid_q = 8) {
  std::vector<CoverCandidate> out;
  for (const auto& tau : detail::tau_grid(grid_q, 2 * grid_q)) {
    auto c = best_cover_for_time(h, tau);
    c.cover_value = c.cover.value();
    bool seen = false;
    for (const auto& o : out) seen = seen || o.analysis.cover.weights == c.cover.weights;
    if (!seen) out.push_back({c, false});
  }
  for (auto& a : out) {
    for (const auto& b : out) {
      if (&a != &b && detail::dominates(b.analysis, a.analysis)) a.dominated = true;
    }
  }
  return out;
}

/// (f, h) of `d` with every non-anchor delta set to tau, on the grid.
inline nlohmann::json decomposition_profile(const Hypergraph& h, const ConnexDecomposition& d, int grid_q,
                                            const AdornedQuery* q = nullptr) {
  nlohmann::json j;
  j["decomposition"] = decomposition_to_json(d, h);
  std::vector<std::pair<Rational, Rational>> fs, hs;
  j["points"] = nlohmann::json::array();
  for (const auto& tau : detail::tau_grid(grid_q, grid_q)) {
    auto dt = with_uniform_delta(d, tau);
    auto rep = validate_decomposition(h, dt, q);
    fs.emplace_back(tau, rep.f);
    hs.emplace_back(tau, rep.h);
    auto opt = apply_materialization_optimizations(h, dt);
    nlohmann::json mat = nlohmann::json::array();
    for (const auto& n : opt.nodes) {
      if (n.materialize_free) mat.push_back(n.id);
    }
    auto opt_rep = validate_decomposition(h, opt, q);
    j["points"].push_back({{"tau", to_string(tau)},
                           {"f", to_string(rep.f)},
                           {"h", to_string(rep.h)},
                           {"materialize_root", opt.materialize_root},
                           {"materialize_free", mat},
                           {"optimized_f", to_string(opt_rep.f)},
                           {"optimized_h", to_string(opt_rep.h)}});
  }
  auto ff = fit_affine(fs);
  auto hf = fit_affine(hs);
  j["f"] = ff ? nlohmann::json(format_affine(ff->first, ff->second)) : nlohmann::json(nullptr);
  j["h"] = hf ? nlohmann::json(format_affine(hf->first, hf->second)) : nlohmann::json(nullptr);
  return j;
}

/// Negation tradeoff "S=|D|^r/τ^a, T=τ" from the positive part's cover.
inline std::string negation_tradeoff(const AdornedQuery& q, const std::string& size_symbol = "|D|") {
  auto h = hypergraph_of(positive_part(q));
  auto c = best_cover_for_time(h, 1);
  c.cover_value = c.cover.value();
  auto p = predicted_space(c, size_symbol, "τ");
  if (!p.time_exponent) return p.quotient_form();
  return p.quotient_form() + ", T=τ";
}

inline nlohmann::json analyze_query(const AdornedQuery& q, const AnalyzeOptions& o = {}) {
  validate(q);
  auto pos = positive_part(q);
  auto h = hypergraph_of(q);
  nlohmann::json j;
  j["query"] = render(q);
  j["bound"] = detail::names_json(h, h.bound);
  j["free"] = detail::names_json(h, h.free());
  j["rho_star"] = to_string(rho_star(h, h.nodes));
  j["rho_star_free"] = to_string(rho_star(h, h.free()));

  auto candidates = candidate_covers(h, o.grid_q);
  j["covers"] = nlohmann::json::array();
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i].analysis;
    auto p = predicted_space(c, o.size_symbol);
    nlohmann::json cj;
    cj["weights"] = detail::weights_json(c.cover.weights);
    cj["value"] = to_string(c.cover_value);
    cj["slack"] = c.slack ? nlohmann::json(to_string(*c.slack)) : nlohmann::json("inf");
    cj["product_form"] = p.product_form();
    cj["quotient_form"] = p.quotient_form();
    cj["space_exponent"] = c.slack ? format_affine(c.cover_value, -*c.slack) : to_string(c.cover_value);
    cj["dominated"] = candidates[i].dominated;
    if (!best && !candidates[i].dominated) best = i;
    j["covers"].push_back(cj);
  }
  if (best) {
    auto p = predicted_space(candidates[*best].analysis, o.size_symbol);
    j["tradeoff"] = p.product_form();
    j["tradeoff_quotient"] = p.quotient_form();
    j["best_cover"] = *best;
  }

  if (q.has_negation()) {
    j["negation"] = decomposition_profile(h, constrained_negation_decomposition(q, h, 0), o.grid_q, &q);
    j["negation"]["tradeoff"] = negation_tradeoff(q, o.size_symbol);
  } else if (h.free() != 0) {
    nlohmann::json ds = nlohmann::json::array();
    try {
      auto all = enumerate_decompositions(h);
      for (std::size_t i = 0; i < all.size() && i < o.max_decompositions; ++i) {
        ds.push_back(decomposition_profile(h, all[i], o.grid_q, &q));
      }
      j["decompositions_total"] = all.size();
    } catch (const ValidationError& e) {
      j["decompositions_skipped"] = e.what();
    }
    j["decompositions"] = ds;
  }

  try {
    auto chain = PathInstance::chain_of(q);
    int k = static_cast<int>(chain.size());
    if (k < 2) return j;
    nlohmann::json pj;
    pj["k"] = k;
    pj["frontier"] = nlohmann::json::array();
    auto frontier = path_frontier(k);
    for (const auto& piece : frontier) {
      pj["frontier"].push_back({{"strategy", piece.strategy},
                                {"from", to_string(piece.from)},
                                {"to", to_string(piece.to)},
                                {"space_exponent", piece.expression()},
                                {"product_form", detail::product_form(piece.a, piece.b, o.size_symbol)}});
    }
    pj["switch_points"] = nlohmann::json::array();
    for (const auto& t : switch_points(frontier)) pj["switch_points"].push_back(to_string(t));
    j["path"] = pj;
  } catch (const UnsupportedQueryError&) {
  }
  return j;
}

}  // namespace cqtrade
