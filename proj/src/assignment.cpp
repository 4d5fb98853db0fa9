#include "aevb/assignment.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "aevb/errors.hpp"

namespace aevb {

// Potentials-based shortest augmenting path formulation; 1-indexed
// internally with a virtual column 0.
std::vector<std::size_t> min_cost_assignment(const CostMatrix& m) {
  const std::size_t n = m.n;
  if (m.cost.size() != n * n) throw ShapeError("min_cost_assignment: cost is not n x n");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1), v(n + 1);
  std::vector<std::size_t> p(n + 1), way(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = m.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

ContingencyTable contingency_table(const std::vector<std::size_t>& clusters, const std::vector<int>& labels,
                                   std::size_t num_clusters, std::size_t num_labels) {
  if (clusters.size() != labels.size())
    throw ShapeError("contingency_table: " + std::to_string(clusters.size()) + " clusters vs " +
                     std::to_string(labels.size()) + " labels");
  ContingencyTable t(num_clusters, std::vector<double>(num_labels, 0.0));
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (clusters[i] >= num_clusters || labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_labels)
      throw DomainError("contingency_table: entry " + std::to_string(i) + " out of range");
    t[clusters[i]][static_cast<std::size_t>(labels[i])] += 1.0;
  }
  return t;
}

double clustering_accuracy(const ContingencyTable& table) {
  std::size_t n = table.size();
  for (const auto& row : table) n = std::max(n, row.size());
  double total = 0.0, largest = 0.0;
  for (const auto& row : table)
    for (double v : row) {
      if (v < 0.0) throw DomainError("clustering_accuracy: negative count");
      total += v;
      largest = std::max(largest, v);
    }
  if (n == 0 || total == 0.0) throw DomainError("clustering_accuracy: empty table");
  CostMatrix m{n, std::vector<double>(n * n, 0.0)};
  for (std::size_t r = 0; r < table.size(); ++r)
    for (std::size_t c = 0; c < table[r].size(); ++c) m.cost[r * n + c] = largest - table[r][c];
  const auto match = min_cost_assignment(m);
  double matched = 0.0;
  for (std::size_t r = 0; r < table.size(); ++r)
    if (match[r] < table[r].size()) matched += table[r][match[r]];
  return matched / total;
}

}  // namespace aevb
