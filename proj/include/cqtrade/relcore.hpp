#pragma once

// Relational storage: interned constants, set-semantics relations and the
// lazily built lookup/count indexes of the RAM cost model.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/hash/hash.h>
#include <nlohmann/json.hpp>

#include "cqtrade/error.hpp"

namespace cqtrade {

using Value = std::uint32_t;
/// Never produced by interning; used for request constants absent from the database.
inline constexpr Value kNoValue = 0xFFFFFFFFu;
inline constexpr std::size_t kMaxArity = 8;

class Interner {
 public:
  Value intern(std::string_view s) {
    auto it = ids_.find(std::string(s));
    if (it != ids_.end()) return it->second;
    Value id = static_cast<Value>(names_.size());
    names_.emplace_back(s);
    ids_.emplace(names_.back(), id);
    return id;
  }
  /// kNoValue when unknown.
  Value lookup(std::string_view s) const {
    auto it = ids_.find(std::string(s));
    return it == ids_.end() ? kNoValue : it->second;
  }
  const std::string& name(Value v) const { return names_.at(v); }
  std::string display(Value v) const { return v == kNoValue ? std::string("?") : names_.at(v); }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  absl::flat_hash_map<std::string, Value> ids_;
};

/// Small fixed-capacity tuple used as a hash key.
struct TupleKey {
  std::array<Value, kMaxArity> v{};
  std::uint8_t n = 0;

  TupleKey() = default;
  explicit TupleKey(std::span<const Value> vals) : n(static_cast<std::uint8_t>(vals.size())) {
    std::copy(vals.begin(), vals.end(), v.begin());
  }
  void push(Value x) { v[n++] = x; }
  std::span<const Value> values() const { return {v.data(), n}; }

  friend bool operator==(const TupleKey& a, const TupleKey& b) {
    return a.n == b.n && std::equal(a.v.begin(), a.v.begin() + a.n, b.v.begin());
  }
  friend bool operator<(const TupleKey& a, const TupleKey& b) {
    return std::lexicographical_compare(a.v.begin(), a.v.begin() + a.n, b.v.begin(), b.v.begin() + b.n);
  }
  template <typename H>
  friend H AbslHashValue(H h, const TupleKey& k) {
    return H::combine(H::combine_contiguous(std::move(h), k.v.data(), k.n), k.n);
  }
};

using Columns = std::vector<std::uint32_t>;

/// key -> (count, matching row ids)
class SubschemaIndex {
 public:
  struct Posting {
    std::uint32_t count = 0;
    std::vector<std::uint32_t> rows;
  };

  const Columns& key_columns() const { return cols_; }
  const Posting* find(const TupleKey& key) const {
    auto it = map_.find(key);
    return it == map_.end() ? nullptr : &it->second;
  }
  bool contains(const TupleKey& key) const { return map_.contains(key); }
  std::uint32_t count(const TupleKey& key) const {
    auto p = find(key);
    return p ? p->count : 0;
  }
  std::size_t num_keys() const { return map_.size(); }
  /// Stored entries: one per key plus one per row reference.
  std::size_t entries() const { return map_.size() + rows_total_; }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& [k, p] : map_) f(k, p);
  }

 private:
  friend class Relation;
  Columns cols_;
  absl::flat_hash_map<TupleKey, Posting> map_;
  std::size_t rows_total_ = 0;
};

/// key -> (row count, sorted distinct values of one extension column)
class ExtensionIndex {
 public:
  struct Entry {
    std::uint32_t count = 0;
    std::vector<Value> values;
  };

  const Entry* find(const TupleKey& key) const {
    auto it = map_.find(key);
    return it == map_.end() ? nullptr : &it->second;
  }
  std::size_t entries() const { return map_.size() + values_total_; }

 private:
  friend class Relation;
  Columns key_cols_;
  std::uint32_t ext_col_ = 0;
  absl::flat_hash_map<TupleKey, Entry> map_;
  std::size_t values_total_ = 0;
};

class Relation {
 public:
  Relation(std::string name, std::vector<std::string> vars) : name_(std::move(name)), vars_(std::move(vars)) {
    if (vars_.empty()) throw ValidationError("relation " + name_ + ": schema must be non-empty");
    if (vars_.size() > kMaxArity) throw ValidationError("relation " + name_ + ": arity above 8 unsupported");
    auto sorted = vars_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ValidationError("relation " + name_ + ": duplicate schema variable");
    }
  }

  Relation(Relation&& o) noexcept
      : name_(std::move(o.name_)), vars_(std::move(o.vars_)), data_(std::move(o.data_)), cache_(std::move(o.cache_)) {}
  Relation& operator=(Relation&& o) noexcept {
    name_ = std::move(o.name_);
    vars_ = std::move(o.vars_);
    data_ = std::move(o.data_);
    cache_ = std::move(o.cache_);
    return *this;
  }

  const std::string& name() const { return name_; }
  const std::vector<std::string>& schema() const { return vars_; }
  std::size_t arity() const { return vars_.size(); }
  std::size_t size() const { return data_.size() / vars_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const Value> row(std::size_t i) const { return {data_.data() + i * arity(), arity()}; }

  /// Replaces the contents; rows are flattened, sorted and deduplicated.
  void assign(std::vector<Value> flat) {
    if (flat.size() % arity() != 0) throw ValidationError("relation " + name_ + ": ragged row data");
    const std::size_t a = arity();
    std::size_t n = flat.size() / a;
    std::vector<std::uint32_t> order(n);
    for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
    auto cmp = [&](std::uint32_t x, std::uint32_t y) {
      return std::lexicographical_compare(flat.begin() + x * a, flat.begin() + x * a + a, flat.begin() + y * a,
                                          flat.begin() + y * a + a);
    };
    std::sort(order.begin(), order.end(), cmp);
    data_.clear();
    data_.reserve(flat.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && !cmp(order[i - 1], order[i])) continue;
      data_.insert(data_.end(), flat.begin() + order[i] * a, flat.begin() + order[i] * a + a);
    }
    cache_ = std::make_unique<Cache>();
  }

  Columns columns_of(std::span<const std::string> key_vars) const {
    Columns cols;
    for (const auto& v : key_vars) {
      auto it = std::find(vars_.begin(), vars_.end(), v);
      if (it == vars_.end()) throw ValidationError("variable " + v + " is not in the schema of " + name_);
      cols.push_back(static_cast<std::uint32_t>(it - vars_.begin()));
    }
    return cols;
  }

  /// Built on first request, cached afterwards. Thread-safe.
  const SubschemaIndex& index(const Columns& cols) const {
    check_columns(cols);
    std::lock_guard lock(cache_->mu);
    auto& slot = cache_->subschema[cols];
    if (!slot) {
      slot = std::make_unique<SubschemaIndex>();
      slot->cols_ = cols;
      for (std::uint32_t i = 0; i < size(); ++i) {
        auto& p = slot->map_[project(i, cols)];
        ++p.count;
        p.rows.push_back(i);
      }
      slot->rows_total_ = size();
    }
    return *slot;
  }

  const ExtensionIndex& extension(const Columns& key_cols, std::uint32_t ext_col) const {
    check_columns(key_cols);
    if (ext_col >= arity()) throw ValidationError("extension column out of range for " + name_);
    std::lock_guard lock(cache_->mu);
    auto& slot = cache_->extension[{key_cols, ext_col}];
    if (!slot) {
      slot = std::make_unique<ExtensionIndex>();
      slot->key_cols_ = key_cols;
      slot->ext_col_ = ext_col;
      for (std::uint32_t i = 0; i < size(); ++i) {
        auto& e = slot->map_[project(i, key_cols)];
        ++e.count;
        e.values.push_back(row(i)[ext_col]);
      }
      for (auto& [k, e] : slot->map_) {
        std::sort(e.values.begin(), e.values.end());
        e.values.erase(std::unique(e.values.begin(), e.values.end()), e.values.end());
        slot->values_total_ += e.values.size();
      }
    }
    return *slot;
  }

  /// Sum of entries over every index built so far.
  std::size_t index_entries() const {
    std::lock_guard lock(cache_->mu);
    std::size_t s = 0;
    for (const auto& [k, ix] : cache_->subschema) s += ix->entries();
    for (const auto& [k, ix] : cache_->extension) s += ix->entries();
    return s;
  }

  TupleKey project(std::size_t row_id, const Columns& cols) const {
    TupleKey k;
    auto r = row(row_id);
    for (auto c : cols) k.push(r[c]);
    return k;
  }

  bool contains(std::span<const Value> tuple) const {
    if (tuple.size() != arity()) return false;
    std::size_t lo = 0, hi = size();
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      auto r = row(mid);
      if (std::lexicographical_compare(r.begin(), r.end(), tuple.begin(), tuple.end())) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return lo < size() && std::equal(tuple.begin(), tuple.end(), row(lo).begin());
  }

 private:
  struct Cache {
    std::mutex mu;
    std::map<Columns, std::unique_ptr<SubschemaIndex>> subschema;
    std::map<std::pair<Columns, std::uint32_t>, std::unique_ptr<ExtensionIndex>> extension;
  };

  void check_columns(const Columns& cols) const {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] >= arity()) throw ValidationError("key column out of range for " + name_);
      for (std::size_t j = 0; j < i; ++j) {
        if (cols[i] == cols[j]) throw ValidationError("repeated key column for " + name_);
      }
    }
  }

  std::string name_;
  std::vector<std::string> vars_;
  std::vector<Value> data_;
  std::unique_ptr<Cache> cache_ = std::make_unique<Cache>();
};

inline std::uint32_t select_count(const Relation& rel, const Columns& cols, const TupleKey& key) {
  if (cols.empty()) return static_cast<std::uint32_t>(rel.size());
  return rel.index(cols).count(key);
}

class Database {
 public:
  Database() = default;
  Database(Database&&) = default;
  Database& operator=(Database&&) = default;

  Interner& interner() { return interner_; }
  const Interner& interner() const { return interner_; }

  Relation& add_relation(std::string name, std::vector<std::string> vars) {
    if (relations_.contains(name)) throw ValidationError("duplicate relation name " + name);
    auto [it, ok] = relations_.emplace(name, Relation(name, std::move(vars)));
    return it->second;
  }

  /// Adds a relation from string rows, interning constants.
  Relation& add_relation(std::string name, std::vector<std::string> vars,
                         const std::vector<std::vector<std::string>>& rows) {
    std::vector<Value> flat;
    const std::size_t a = vars.size();
    for (const auto& r : rows) {
      if (r.size() != a) throw ValidationError("arity mismatch in relation " + name);
      for (const auto& s : r) flat.push_back(interner_.intern(s));
    }
    auto& rel = add_relation(std::move(name), std::move(vars));
    rel.assign(std::move(flat));
    return rel;
  }

  /// Adds a binary relation over integer-named constants.
  Relation& add_edges(std::string name, std::vector<std::string> vars,
                      const std::vector<std::pair<std::uint64_t, std::uint64_t>>& edges) {
    std::vector<Value> flat;
    flat.reserve(edges.size() * 2);
    for (auto [a, b] : edges) {
      flat.push_back(interner_.intern(std::to_string(a)));
      flat.push_back(interner_.intern(std::to_string(b)));
    }
    auto& rel = add_relation(std::move(name), std::move(vars));
    rel.assign(std::move(flat));
    return rel;
  }

  const Relation& relation(const std::string& name) const {
    auto it = relations_.find(name);
    if (it == relations_.end()) throw ValidationError("unknown relation " + name);
    return it->second;
  }
  Relation& relation(const std::string& name) {
    auto it = relations_.find(name);
    if (it == relations_.end()) throw ValidationError("unknown relation " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return relations_.contains(name); }
  const std::map<std::string, Relation>& relations() const { return relations_; }

  std::size_t total_size() const {
    std::size_t s = 0;
    for (const auto& [n, r] : relations_) s += r.size();
    return s;
  }

 private:
  Interner interner_;
  std::map<std::string, Relation> relations_;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Reads one TSV file into `rel`, interning through `interner`.
inline void load_tsv(const std::filesystem::path& file, Relation& rel, Interner& interner) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open data file " + file.string());
  std::vector<Value> flat;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_tabs(line);
    if (fields.size() != rel.arity()) {
      throw ValidationError("arity mismatch in " + file.string() + " line " + std::to_string(lineno) + ": expected " +
                            std::to_string(rel.arity()) + " columns, got " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) flat.push_back(interner.intern(f));
  }
  rel.assign(std::move(flat));
}

/// Manifest: {"relations": [{"name": str, "vars": [str], "file": path}]};
/// data paths resolve relative to the manifest's directory.
inline Database load_database(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest " + manifest.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed manifest " + manifest.string() + ": " + e.what());
  }
  if (!j.contains("relations") || !j["relations"].is_array()) {
    throw ValidationError("manifest needs a \"relations\" array");
  }
  Database db;
  auto base = manifest.parent_path();
  for (const auto& r : j["relations"]) {
    if (!r.contains("name") || !r.contains("vars") || !r.contains("file")) {
      throw ValidationError("manifest relation entries need name, vars and file");
    }
    auto& rel = db.add_relation(r["name"].get<std::string>(), r["vars"].get<std::vector<std::string>>());
    std::filesystem::path file = r["file"].get<std::string>();
    if (file.is_relative()) file = base / file;
    load_tsv(file, rel, db.interner());
  }
  return db;
}

/// Writes a relation as TSV.
inline void write_tsv(const std::filesystem::path& file, const Relation& rel, const Interner& interner) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  for (std::size_t i = 0; i < rel.size(); ++i) {
    auto r = rel.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) out << '\t';
      out << interner.name(r[c]);
    }
    out << '\n';
  }
}

/// Writes every relation to `<dir>/<name>.tsv` plus `<dir>/manifest.json`.
inline std::filesystem::path write_database(const std::filesystem::path& dir, const Database& db) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["relations"] = nlohmann::json::array();
  for (const auto& [name, rel] : db.relations()) {
    write_tsv(dir / (name + ".tsv"), rel, db.interner());
    j["relations"].push_back({{"name", name}, {"vars", rel.schema()}, {"file", name + ".tsv"}});
  }
  auto manifest = dir / "manifest.json";
  std::ofstream out(manifest);
  out << j.dump(2) << '\n';
  return manifest;
}

}  // namespace cqtrade
