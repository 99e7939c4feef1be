#pragma once

#include <span>
#include <vector>

#include "plight/analytics/analytics.hpp"
#include "plight/nn/matrix.hpp"

namespace plight::analytics {

struct PcaOptions {
  std::size_t components = 3;
  double tolerance = 1e-10;
  int max_iterations = 10000;
  // Columns divided by their standard deviation after centering.
  std::vector<std::size_t> standardize;
  // Eigenvalues below this fraction of the total variance count as zero.
  double rank_tolerance = 1e-12;
};

struct PcaResult {
  std::vector<double> mean;
  std::vector<double> scale;     // 1 for columns that were not standardized
  nn::Matrix components;         // k x d, orthonormal rows
  std::vector<double> eigenvalues;  // non-increasing
  std::vector<double> explained;    // eigenvalue / total variance
  nn::Matrix projected;          // n x k coordinates
  bool rank_deficient = false;   // fewer than the requested components returned
  std::vector<int> iterations;   // power iterations used per component
};

// Covariance eigenvectors by power iteration with deflation and
// Gram-Schmidt re-orthogonalization. `data` is n x d with n > k.
PcaResult pca(const nn::Matrix& data, const PcaOptions& options = {});

// V_travel features with t_start standardized.
nn::Matrix travel_matrix(std::span<const TravelFeature> features);
PcaResult pca_project(std::span<const TravelFeature> features, std::size_t k = 3);

// Maps coordinates back into the centered (and scaled) feature space.
nn::Matrix reconstruct_centered(const PcaResult& result, const nn::Matrix& coords);
// The centered and scaled data matrix the components were fitted to.
nn::Matrix centered_data(const PcaResult& result, const nn::Matrix& data);

}  // namespace plight::analytics
