#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "taxisim/errors.hpp"

namespace taxisim {

// Rows are requests (FCFS order), columns are taxis. nullopt marks an
// infeasible pair.
template <typename Cost>
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), cells_(rows * cols) {}

  CostMatrix(std::initializer_list<std::initializer_list<std::optional<Cost>>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    for (const auto& row : init) {
      if (row.size() != cols_) throw InvalidConfig("ragged cost matrix");
      cells_.insert(cells_.end(), row.begin(), row.end());
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  const std::optional<Cost>& operator()(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }
  std::optional<Cost>& operator()(std::size_t r, std::size_t c) { return cells_[r * cols_ + c]; }

  bool feasible(std::size_t r, std::size_t c) const { return (*this)(r, c).has_value(); }

  bool any_feasible() const {
    return std::any_of(cells_.begin(), cells_.end(), [](const auto& c) { return c.has_value(); });
  }

  friend bool operator==(const CostMatrix&, const CostMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::optional<Cost>> cells_;
};

template <typename Cost>
struct MatchedPair {
  std::size_t request = 0;
  std::size_t taxi = 0;
  Cost cost{};

  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

// A matching between requests and taxis; pairs are kept sorted by
// (request, taxi).
template <typename Cost>
struct Assignment {
  std::vector<MatchedPair<Cost>> pairs;
  Cost total_cost{};

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }

  std::optional<std::size_t> taxi_for(std::size_t request) const {
    for (const auto& p : pairs)
      if (p.request == request) return p.taxi;
    return std::nullopt;
  }

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

namespace detail {

template <typename Cost>
Assignment<Cost> make_assignment(std::vector<MatchedPair<Cost>> pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    return a.request != b.request ? a.request < b.request : a.taxi < b.taxi;
  });
  Assignment<Cost> out;
  for (const auto& p : pairs) out.total_cost += p.cost;
  out.pairs = std::move(pairs);
  return out;
}

template <typename Cost>
bool lex_less(const std::vector<MatchedPair<Cost>>& a, const std::vector<MatchedPair<Cost>>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [](const auto& x, const auto& y) {
    return x.request != y.request ? x.request < y.request : x.taxi < y.taxi;
  });
}

// Min-cost assignment of every row to a distinct column for an n x m matrix
// with n <= m (shortest augmenting paths with potentials, O(n^2 m)).
// Returns the column matched to each row.
template <typename Cost>
std::vector<std::size_t> hungarian(const std::vector<Cost>& cost, std::size_t n, std::size_t m) {
  const Cost inf = std::numeric_limits<Cost>::max() / 4;
  // 1-based; column 0 is the virtual source.
  std::vector<Cost> u(n + 1, Cost{}), v(m + 1, Cost{});
  std::vector<std::size_t> row_of_col(m + 1, 0), way(m + 1, 0);
  std::vector<Cost> minv(m + 1);
  std::vector<bool> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = row_of_col[j0];
      Cost delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const Cost cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of_row(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (row_of_col[j] != 0) col_of_row[row_of_col[j] - 1] = j - 1;
  return col_of_row;
}

// Maximum-cardinality, then minimum-cost matching over the allowed rows and
// columns. Infeasible pairs cost `big`, which exceeds any sum of feasible
// costs, so cardinality dominates. The shorter side is matched completely.
template <typename Cost>
std::pair<std::size_t, Cost> solve_restricted(const CostMatrix<Cost>& m, const std::vector<std::size_t>& rows,
                                              const std::vector<std::size_t>& cols, Cost big) {
  if (rows.empty() || cols.empty()) return {0, Cost{}};
  const bool transpose = rows.size() > cols.size();
  const auto& short_side = transpose ? cols : rows;
  const auto& long_side = transpose ? rows : cols;
  const std::size_t n = short_side.size(), k = long_side.size();
  auto at = [&](std::size_t i, std::size_t j) -> const std::optional<Cost>& {
    return transpose ? m(long_side[j], short_side[i]) : m(short_side[i], long_side[j]);
  };
  std::vector<Cost> dense(n * k, big);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (const auto& c = at(i, j)) dense[i * k + j] = *c;
  const auto match = hungarian(dense, n, k);
  std::size_t count = 0;
  Cost total{};
  for (std::size_t i = 0; i < n; ++i) {
    if (const auto& c = at(i, match[i])) {
      ++count;
      total += *c;
    }
  }
  return {count, total};
}

}  // namespace detail

// FCFS-nearest: requests in row order each take the cheapest feasible taxi
// still free (ties to the lower column). Requests with no feasible free taxi
// stay unassigned.
template <typename Cost>
Assignment<Cost> fcfs_nearest(const CostMatrix<Cost>& cost) {
  std::vector<bool> taken(cost.cols(), false);
  std::vector<MatchedPair<Cost>> pairs;
  for (std::size_t r = 0; r < cost.rows(); ++r) {
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < cost.cols(); ++c) {
      if (taken[c] || !cost.feasible(r, c)) continue;
      if (!best || *cost(r, c) < *cost(r, *best)) best = c;
    }
    if (best) {
      taken[*best] = true;
      pairs.push_back({r, *best, *cost(r, *best)});
    }
  }
  return detail::make_assignment(std::move(pairs));
}

// Exact batched assignment: a maximum-size matching of minimum total cost.
// Among equal optima the sorted (request, taxi) pair list that is
// lexicographically smallest is returned. Costs are integral so optimum
// values compare exactly.
template <std::integral Cost>
Assignment<Cost> concurrent_optimal_assignment(const CostMatrix<Cost>& cost) {
  if (!cost.any_feasible()) throw Infeasible("no feasible request/taxi pair");
  Cost big{1};
  for (std::size_t r = 0; r < cost.rows(); ++r)
    for (std::size_t c = 0; c < cost.cols(); ++c)
      if (const auto& v = cost(r, c)) {
        if (*v < Cost{}) throw InvalidConfig("negative cost");
        big += *v;
      }

  std::vector<std::size_t> rows(cost.rows()), cols(cost.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = j;
  const auto [best_size, best_total] = detail::solve_restricted(cost, rows, cols, big);

  // Fix pairs greedily in lexicographic order, re-solving the remainder to
  // confirm that the optimum value is still attainable.
  std::vector<MatchedPair<Cost>> fixed;
  std::size_t fixed_size = 0;
  Cost fixed_total{};
  std::vector<bool> col_used(cost.cols(), false);
  for (std::size_t r = 0; r < cost.rows() && fixed_size < best_size; ++r) {
    std::vector<std::size_t> later_rows;
    for (std::size_t rr = r + 1; rr < cost.rows(); ++rr) later_rows.push_back(rr);
    bool placed = false;
    for (std::size_t c = 0; c < cost.cols() && !placed; ++c) {
      if (col_used[c] || !cost.feasible(r, c)) continue;
      std::vector<std::size_t> free_cols;
      for (std::size_t cc = 0; cc < cost.cols(); ++cc)
        if (!col_used[cc] && cc != c) free_cols.push_back(cc);
      const auto [sub_size, sub_total] = detail::solve_restricted(cost, later_rows, free_cols, big);
      if (fixed_size + 1 + sub_size == best_size && fixed_total + *cost(r, c) + sub_total == best_total) {
        fixed.push_back({r, c, *cost(r, c)});
        col_used[c] = true;
        ++fixed_size;
        fixed_total += *cost(r, c);
        placed = true;
      }
    }
  }
  return detail::make_assignment(std::move(fixed));
}

inline constexpr std::size_t kBruteForceLimit = 8;

// Exhaustive oracle with the same contract as concurrent_optimal_assignment.
template <std::integral Cost>
Assignment<Cost> brute_force_assignment(const CostMatrix<Cost>& cost) {
  if (std::min(cost.rows(), cost.cols()) > kBruteForceLimit)
    throw TooLarge("brute force limited to " + std::to_string(kBruteForceLimit) + " on the short side");
  if (!cost.any_feasible()) throw Infeasible("no feasible request/taxi pair");

  const bool by_rows = cost.rows() <= cost.cols();
  const std::size_t outer = by_rows ? cost.rows() : cost.cols();
  const std::size_t inner = by_rows ? cost.cols() : cost.rows();

  std::vector<MatchedPair<Cost>> current, best;
  std::size_t best_size = 0;
  Cost best_total{};
  bool have_best = false;
  std::vector<bool> used(inner, false);

  auto consider = [&] {
    auto candidate = current;
    std::sort(candidate.begin(), candidate.end(), [](const auto& a, const auto& b) {
      return a.request != b.request ? a.request < b.request : a.taxi < b.taxi;
    });
    Cost total{};
    for (const auto& p : candidate) total += p.cost;
    const bool better = !have_best || candidate.size() > best_size ||
                        (candidate.size() == best_size &&
                         (total < best_total || (total == best_total && detail::lex_less(candidate, best))));
    if (better) {
      best = std::move(candidate);
      best_size = best.size();
      best_total = total;
      have_best = true;
    }
  };

  auto recurse = [&](auto&& self, std::size_t k) -> void {
    if (k == outer) {
      consider();
      return;
    }
    self(self, k + 1);  // leave k unmatched
    for (std::size_t j = 0; j < inner; ++j) {
      if (used[j]) continue;
      const std::size_t r = by_rows ? k : j;
      const std::size_t c = by_rows ? j : k;
      if (!cost.feasible(r, c)) continue;
      used[j] = true;
      current.push_back({r, c, *cost(r, c)});
      self(self, k + 1);
      current.pop_back();
      used[j] = false;
    }
  };
  recurse(recurse, 0);
  return detail::make_assignment(std::move(best));
}

// True when every request and taxi appears at most once and every pair is
// feasible with its matrix cost.
template <typename Cost>
bool is_valid_matching(const CostMatrix<Cost>& cost, const Assignment<Cost>& a) {
  std::vector<bool> rows(cost.rows(), false), cols(cost.cols(), false);
  for (const auto& p : a.pairs) {
    if (p.request >= cost.rows() || p.taxi >= cost.cols()) return false;
    if (rows[p.request] || cols[p.taxi]) return false;
    if (!cost.feasible(p.request, p.taxi) || *cost(p.request, p.taxi) != p.cost) return false;
    rows[p.request] = cols[p.taxi] = true;
  }
  return true;
}

}  // namespace taxisim
