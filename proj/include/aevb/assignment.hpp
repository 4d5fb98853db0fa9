#pragma once

#include <cstddef>
#include <vector>

namespace aevb {

/// Square cost matrix, row-major.
struct CostMatrix {
  std::size_t n = 0;
  std::vector<double> cost;

  double at(std::size_t r, std::size_t c) const { return cost[r * n + c]; }
};

/// Minimum-cost perfect matching (Hungarian method, O(n^3)). Returns the
/// column assigned to each row.
std::vector<std::size_t> min_cost_assignment(const CostMatrix& m);

/// counts[cluster][label]. Rectangular tables are padded with zeros.
using ContingencyTable = std::vector<std::vector<double>>;

ContingencyTable contingency_table(const std::vector<std::size_t>& clusters, const std::vector<int>& labels,
                                   std::size_t num_clusters, std::size_t num_labels);

/// Best one-to-one cluster/label matching, as a fraction of all examples.
double clustering_accuracy(const ContingencyTable& table);

}  // namespace aevb
