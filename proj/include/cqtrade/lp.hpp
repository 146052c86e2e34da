#pragma once

// Exact two-phase simplex over rationals for the small covering programs that
// arise from constant-size queries. Dense tableau, Bland's rule throughout.

#include <cstddef>
#include <optional>
#include <vector>

#include "cqtrade/rational.hpp"

namespace cqtrade::lp {

enum class Sense { GreaterEq, LessEq, Equal };

struct Constraint {
  std::vector<Rational> coeffs;  // one per variable
  Sense sense = Sense::GreaterEq;
  Rational rhs;
};

/// minimize objective . x  subject to constraints, x >= 0.
struct Program {
  std::size_t num_vars = 0;
  std::vector<Rational> objective;
  std::vector<Constraint> constraints;

  explicit Program(std::size_t n = 0) : num_vars(n), objective(n) {}

  Constraint& add(Sense sense, Rational rhs) {
    constraints.push_back({std::vector<Rational>(num_vars), sense, std::move(rhs)});
    return constraints.back();
  }
};

enum class Status { Optimal, Infeasible, Unbounded };

struct Solution {
  Status status = Status::Infeasible;
  Rational value;
  std::vector<Rational> x;
};

namespace detail {

class Tableau {
 public:
  // rows_: m constraint rows + objective row at index m. Column n_ is the rhs.
  Tableau(std::size_t m, std::size_t n) : m_(m), n_(n), rows_(m + 1, std::vector<Rational>(n + 1)), basis_(m) {}

  Rational& at(std::size_t r, std::size_t c) { return rows_[r][c]; }
  std::vector<std::size_t>& basis() { return basis_; }

  void pivot(std::size_t r, std::size_t c) {
    Rational p = rows_[r][c];
    for (auto& v : rows_[r]) v /= p;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      Rational f = rows_[i][c];
      if (f == 0) continue;
      for (std::size_t j = 0; j <= n_; ++j) {
        if (rows_[r][j] != 0) rows_[i][j] -= f * rows_[r][j];
      }
    }
    basis_[r] = c;
  }

  /// Runs simplex on the objective row restricted to allowed columns.
  /// Returns false when unbounded.
  bool optimize(const std::vector<bool>& allowed) {
    for (;;) {
      std::optional<std::size_t> enter;
      for (std::size_t j = 0; j < n_; ++j) {
        if (allowed[j] && rows_[m_][j] < 0) {
          enter = j;
          break;
        }
      }
      if (!enter) return true;
      std::optional<std::size_t> leave;
      Rational best;
      for (std::size_t i = 0; i < m_; ++i) {
        if (rows_[i][*enter] <= 0) continue;
        Rational ratio = rows_[i][n_] / rows_[i][*enter];
        if (!leave || ratio < best || (ratio == best && basis_[i] < basis_[*leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (!leave) return false;
      pivot(*leave, *enter);
    }
  }

  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }

 private:
  std::size_t m_, n_;
  std::vector<std::vector<Rational>> rows_;
  std::vector<std::size_t> basis_;
};

}  // namespace detail

inline Solution minimize(const Program& prog) {
  const std::size_t n = prog.num_vars;
  const std::size_t m = prog.constraints.size();

  // Normalize rows to rhs >= 0.
  std::vector<Constraint> rows = prog.constraints;
  for (auto& c : rows) {
    if (c.rhs < 0) {
      for (auto& a : c.coeffs) a = -a;
      c.rhs = -c.rhs;
      if (c.sense == Sense::GreaterEq) {
        c.sense = Sense::LessEq;
      } else if (c.sense == Sense::LessEq) {
        c.sense = Sense::GreaterEq;
      }
    }
  }

  std::size_t num_slack = 0, num_art = 0;
  for (const auto& c : rows) {
    if (c.sense != Sense::Equal) ++num_slack;
    if (c.sense != Sense::LessEq) ++num_art;
  }
  const std::size_t total = n + num_slack + num_art;
  detail::Tableau t(m, total);

  std::size_t slack_col = n, art_col = n + num_slack;
  std::vector<bool> is_art(total, false);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& c = rows[i];
    for (std::size_t j = 0; j < n; ++j) t.at(i, j) = c.coeffs[j];
    t.at(i, total) = c.rhs;
    if (c.sense == Sense::LessEq) {
      t.at(i, slack_col) = 1;
      t.basis()[i] = slack_col++;
    } else {
      if (c.sense == Sense::GreaterEq) t.at(i, slack_col++) = -1;
      t.at(i, art_col) = 1;
      is_art[art_col] = true;
      t.basis()[i] = art_col++;
    }
  }

  std::vector<bool> allowed(total, true);

  // Phase 1: minimize the sum of artificials.
  if (num_art > 0) {
    for (std::size_t j = 0; j <= total; ++j) t.at(m, j) = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!is_art[t.basis()[i]]) continue;
      for (std::size_t j = 0; j <= total; ++j) {
        if (!is_art[j]) t.at(m, j) -= t.at(i, j);
      }
    }
    t.optimize(allowed);
    if (t.at(m, total) != 0) return {Status::Infeasible, {}, {}};
    // Drive remaining artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
      if (!is_art[t.basis()[i]]) continue;
      for (std::size_t j = 0; j < total; ++j) {
        if (!is_art[j] && t.at(i, j) != 0) {
          t.pivot(i, j);
          break;
        }
      }
    }
    for (std::size_t j = 0; j < total; ++j) allowed[j] = !is_art[j];
  }

  // Phase 2: objective row = c - c_B B^-1 A.
  for (std::size_t j = 0; j <= total; ++j) t.at(m, j) = j < n ? prog.objective[j] : Rational(0);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t b = t.basis()[i];
    if (b >= n) continue;
    Rational cb = prog.objective[b];
    if (cb == 0) continue;
    for (std::size_t j = 0; j <= total; ++j) t.at(m, j) -= cb * t.at(i, j);
  }
  if (!t.optimize(allowed)) return {Status::Unbounded, {}, {}};

  Solution sol;
  sol.status = Status::Optimal;
  sol.x.assign(n, Rational(0));
  for (std::size_t i = 0; i < m; ++i) {
    if (t.basis()[i] < n) sol.x[t.basis()[i]] = t.at(i, total);
  }
  sol.value = 0;
  for (std::size_t j = 0; j < n; ++j) sol.value += prog.objective[j] * sol.x[j];
  return sol;
}

/// Optimal solution of `prog` that is lexicographically smallest in the
/// listed variables (in order). Each step pins the previous optimum.
inline Solution minimize_lexicographic(const Program& prog, const std::vector<std::size_t>& order) {
  Solution best = minimize(prog);
  if (best.status != Status::Optimal) return best;
  Program p = prog;
  auto& pin = p.add(Sense::Equal, best.value);
  pin.coeffs = prog.objective;
  for (std::size_t var : order) {
    Program step = p;
    std::fill(step.objective.begin(), step.objective.end(), Rational(0));
    step.objective[var] = 1;
    Solution s = minimize(step);
    if (s.status != Status::Optimal) break;
    auto& fix = p.add(Sense::Equal, s.value);
    fix.coeffs[var] = 1;
    best.x = s.x;
  }
  best.value = 0;
  for (std::size_t j = 0; j < prog.num_vars; ++j) best.value += prog.objective[j] * best.x[j];
  return best;
}

}  // namespace cqtrade::lp
