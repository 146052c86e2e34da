#pragma once

// One interface over every answering strategy, plus JSON structure files.
// Stored entries are written with constant names, so a file can be loaded
// against any database that interns the same constants.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cqtrade/adstruct.hpp"
#include "cqtrade/decomp.hpp"
#include "cqtrade/decomp_structure.hpp"
#include "cqtrade/pathengine.hpp"

namespace cqtrade {

inline constexpr int kStructureFormatVersion = 1;

struct BuildOptions {
  std::string strategy = "adstruct";  // adstruct | decomp | negation | path | bfs
  Rational time_exponent = make_rational(1, 2);
  std::optional<Rational> threshold;  // adstruct: explicit T overrides |D|^tau
  std::optional<ConnexDecomposition> decomposition;
  std::optional<std::uint64_t> delta;
  int grid_q = 8;
  unsigned jobs = 1;
};

/// |D|^tau rounded to 1/1000 (thresholds are exact rationals).
inline Rational threshold_for(std::size_t size, const Rational& tau) {
  double t = std::pow(static_cast<double>(std::max<std::size_t>(1, size)), tau.convert_to<double>());
  return make_rational(static_cast<std::int64_t>(std::llround(t * 1000)), 1000);
}

/// Decomposition minimizing the delta-width with delta-height at most tau,
/// over the enumerated candidates; earlier candidates win ties.
inline ConnexDecomposition choose_decomposition(const Hypergraph& h, const Rational& tau, int grid_q) {
  auto all = enumerate_decompositions(h);
  if (all.empty()) throw ValidationError("no decomposition found for the query");
  std::optional<ConnexDecomposition> best;
  Rational best_f = 0;
  for (auto& d : all) {
    auto tuned = optimize_delta(h, d, tau, grid_q);
    auto rep = validate_decomposition(h, tuned);
    if (!best || rep.f < best_f) {
      best = tuned;
      best_f = rep.f;
    }
  }
  return *best;
}

class BuiltStructure {
 public:
  static BuiltStructure build(const AdornedQuery& q, const Database& db, const BuildOptions& o) {
    BuiltStructure b;
    b.strategy_ = o.strategy;
    b.query_ = q;
    b.db_ = &db;
    auto h = hypergraph_of(q);
    if (o.strategy == "adstruct") {
      auto cover = best_cover_for_time(h, o.time_exponent);
      Rational t = o.threshold ? *o.threshold : threshold_for(db.total_size(), o.time_exponent);
      b.impl_ = CoverStructure::build(q, db, cover, t, o.jobs);
    } else if (o.strategy == "decomp") {
      if (q.has_negation()) throw UnsupportedQueryError("queries with negation need the negation strategy");
      auto d = o.decomposition ? *o.decomposition : choose_decomposition(h, o.time_exponent, o.grid_q);
      b.impl_ = DecompStructure::build(q, db, d, o.jobs);
    } else if (o.strategy == "negation") {
      b.impl_ = build_negation_structure(q, db, o.time_exponent, o.jobs);
    } else if (o.strategy == "path" || o.strategy == "bfs") {
      auto p = PathInstance::from_query(q, db);
      b.path_ = p;
      if (o.strategy == "path") {
        if (p.k() < 4) throw UnsupportedQueryError("the path strategy needs k >= 4; use bfs for shorter paths");
        std::uint64_t delta = o.delta ? *o.delta : 0;
        if (delta == 0) {
          delta = 1;
          while (delta * delta < p.size) ++delta;
        }
        b.delta_ = delta;
        b.impl_ = std::make_shared<PathStructure>(PathStructure::build(p, delta, o.jobs));
      }
    } else {
      throw ValidationError("unknown strategy " + o.strategy);
    }
    return b;
  }

  const std::string& strategy() const { return strategy_; }
  const AdornedQuery& query() const { return query_; }

  bool answer(const std::vector<std::string>& request, CostMeter& meter) const {
    if (const auto* c = std::get_if<CoverStructure>(&impl_)) return c->answer(c->query().request(request), meter);
    if (const auto* d = std::get_if<DecompStructure>(&impl_)) return d->answer(d->query().request(request), meter);
    if (request.size() != 2) {
      throw ValidationError("request has " + std::to_string(request.size()) + " values but the query binds 2 variables");
    }
    Value a = db_->interner().lookup(request[0]), b = db_->interner().lookup(request[1]);
    if (a == kNoValue || b == kNoValue) return false;
    if (const auto* p = std::get_if<std::shared_ptr<PathStructure>>(&impl_)) return (*p)->answer(a, b, meter);
    return bfs_fallback(*path_, a, b, meter);
  }

  SpaceLedger ledger() const {
    if (const auto* c = std::get_if<CoverStructure>(&impl_)) return c->ledger();
    if (const auto* d = std::get_if<DecompStructure>(&impl_)) return d->ledger();
    if (const auto* p = std::get_if<std::shared_ptr<PathStructure>>(&impl_)) return (*p)->ledger();
    SpaceLedger l;
    IndexTally tally;
    for (const auto& st : path_->steps) tally.add(&st.out(), st.out().entries());
    l.index_entries = tally.total;
    return l;
  }

  /// Human-readable build summary.
  nlohmann::json summary() const {
    nlohmann::json j;
    j["strategy"] = strategy_;
    j["query"] = render(query_);
    j["db_size"] = db_->total_size();
    auto l = ledger();
    j["stored_entries"] = l.stored_entries;
    j["index_entries"] = l.index_entries;
    j["total_space_units"] = l.total_space_units();
    if (const auto* c = std::get_if<CoverStructure>(&impl_)) {
      j["threshold"] = to_string(c->threshold());
      j["cover"] = nlohmann::json::array();
      for (const auto& w : c->cover().cover.weights) j["cover"].push_back(to_string(w));
      j["valid_requests"] = c->stats().valid_requests;
      j["heavy_requests"] = c->stats().heavy_requests;
      j["predicted"] = predicted_space(c->cover()).quotient_form();
    }
    if (const auto* d = std::get_if<DecompStructure>(&impl_)) {
      j["f"] = to_string(d->report().f);
      j["h"] = to_string(d->report().h);
    }
    if (const auto* p = std::get_if<std::shared_ptr<PathStructure>>(&impl_)) {
      j["delta"] = delta_;
      j["k"] = path_->k();
      if ((*p)->stats().warning) j["warning"] = *(*p)->stats().warning;
    }
    return j;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "cqtrade-structure";
    j["version"] = kStructureFormatVersion;
    j["strategy"] = strategy_;
    j["query"] = render(query_);
    auto h = hypergraph_of(query_);
    if (const auto* c = std::get_if<CoverStructure>(&impl_)) {
      j["threshold"] = to_string(c->threshold());
      j["cover"] = nlohmann::json::array();
      for (const auto& w : c->cover().cover.weights) j["cover"].push_back(to_string(w));
      j["entries"] = entries_json(c->entries());
    } else if (const auto* d = std::get_if<DecompStructure>(&impl_)) {
      j["decomposition"] = decomposition_to_json(d->decomposition(), h);
      auto snap = d->snapshot();
      j["node_entries"] = nlohmann::json::object();
      for (std::size_t i = 0; i < snap.node_entries.size(); ++i) {
        j["node_entries"][d->decomposition().nodes[i].id] = entries_json(snap.node_entries[i]);
      }
      j["root_entries"] = entries_json(snap.root_entries);
    } else if (std::holds_alternative<std::shared_ptr<PathStructure>>(impl_)) {
      j["delta"] = delta_;
    }
    j["ledger"] = {{"stored_entries", ledger().stored_entries}, {"index_entries", ledger().index_entries}};
    return j;
  }

  /// Path and BFS structures are rebuilt from the stored delta.
  static BuiltStructure from_json(const nlohmann::json& j, const Database& db, unsigned jobs = 1) {
    if (j.value("format", "") != "cqtrade-structure") throw ValidationError("not a structure file");
    if (j.value("version", 0) != kStructureFormatVersion) {
      throw ValidationError("unsupported structure file version " + std::to_string(j.value("version", 0)));
    }
    auto q = parse_query(j.at("query").get<std::string>());
    auto h = hypergraph_of(q);
    const std::string strategy = j.at("strategy").get<std::string>();
    BuiltStructure b;
    b.strategy_ = strategy;
    b.query_ = q;
    b.db_ = &db;
    if (strategy == "adstruct") {
      FractionalCover fc;
      for (const auto& w : j.at("cover")) fc.weights.push_back(parse_rational(w.get<std::string>()));
      auto cover = analyze_cover(h, fc);
      b.impl_ = CoverStructure::restore(q, db, cover, parse_rational(j.at("threshold").get<std::string>()),
                                        entries_from_json(j.at("entries"), db));
    } else if (strategy == "decomp" || strategy == "negation") {
      auto d = decomposition_from_json(j.at("decomposition"), h);
      DecompStructure::Snapshot snap;
      for (const auto& n : d.nodes) {
        snap.node_entries.push_back(j.at("node_entries").contains(n.id)
                                        ? entries_from_json(j.at("node_entries").at(n.id), db)
                                        : DecompStructure::Entries{});
      }
      snap.root_entries = entries_from_json(j.at("root_entries"), db);
      b.impl_ = DecompStructure::restore(q, db, d, std::move(snap));
    } else if (strategy == "path" || strategy == "bfs") {
      BuildOptions o;
      o.strategy = strategy;
      o.jobs = jobs;
      if (j.contains("delta")) o.delta = j.at("delta").get<std::uint64_t>();
      return build(q, db, o);
    } else {
      throw ValidationError("unknown strategy " + strategy + " in structure file");
    }
    return b;
  }

 private:
  nlohmann::json entries_json(const absl::flat_hash_map<TupleKey, bool>& entries) const {
    std::vector<std::pair<std::vector<std::string>, bool>> rows;
    for (const auto& [k, v] : entries) {
      std::vector<std::string> names;
      for (Value x : k.values()) names.push_back(db_->interner().name(x));
      rows.emplace_back(std::move(names), v);
    }
    std::sort(rows.begin(), rows.end());
    auto out = nlohmann::json::array();
    for (const auto& [k, v] : rows) out.push_back({k, v});
    return out;
  }

  static absl::flat_hash_map<TupleKey, bool> entries_from_json(const nlohmann::json& j, const Database& db) {
    absl::flat_hash_map<TupleKey, bool> out;
    for (const auto& row : j) {
      TupleKey k;
      for (const auto& name : row.at(0)) {
        Value v = db.interner().lookup(name.get<std::string>());
        if (v == kNoValue) {
          throw ValidationError("structure file mentions constant '" + name.get<std::string>() +
                                "' that is not in the database");
        }
        k.push(v);
      }
      out.emplace(k, row.at(1).get<bool>());
    }
    return out;
  }

  std::string strategy_;
  AdornedQuery query_;
  const Database* db_ = nullptr;
  std::variant<std::monostate, CoverStructure, DecompStructure, std::shared_ptr<PathStructure>> impl_;
  std::optional<PathInstance> path_;
  std::uint64_t delta_ = 0;
};

}  // namespace cqtrade
