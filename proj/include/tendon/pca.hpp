#pragma once

#include <vector>

namespace tendon {

struct PcaModel {
  std::vector<double> mean;                  // D
  std::vector<std::vector<double>> components;  // k rows, orthonormal
  std::vector<double> explained_variance;    // k, non-increasing

  int dim() const { return static_cast<int>(mean.size()); }
  int k() const { return static_cast<int>(components.size()); }
};

// Eigendecomposition of the sample covariance (1/(N-1) normalization) by
// cyclic Jacobi rotations. Components are ordered by explained variance
// descending; each row is oriented so its largest-magnitude element is
// positive (first such index wins ties). Zero-variance data yields zero
// explained variance with an arbitrary orthonormal basis.
PcaModel pca_fit(const std::vector<std::vector<double>>& rows, int k);

// dot(feature - mean, components[i])
double pca_project(const PcaModel& pca, const std::vector<double>& feature,
                   int i);

}  // namespace tendon
