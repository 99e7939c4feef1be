#include "plight/analytics/pca.hpp"

#include <cmath>

#include "plight/errors.hpp"
#include "plight/rng.hpp"

namespace plight::analytics {

namespace {

void normalize(std::vector<double>& v) {
  const double n = nn::l2_norm(v);
  for (double& x : v) x /= n;
}

// Removes the projections onto the already accepted components.
void orthogonalize(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& b : basis) nn::axpy(-nn::dot(v, b), b, v);
  }
}

}  // namespace

nn::Matrix centered_data(const PcaResult& r, const nn::Matrix& data) {
  if (data.cols() != r.mean.size()) throw ShapeError("data width does not match the fitted PCA");
  nn::Matrix out(data.rows(), data.cols());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) out(i, j) = (data(i, j) - r.mean[j]) / r.scale[j];
  }
  return out;
}

PcaResult pca(const nn::Matrix& data, const PcaOptions& options) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  const std::size_t k = options.components;
  if (k == 0 || k > d) throw ContractError("component count must lie in [1, feature width]");
  if (n < k + 1) throw ContractError("PCA needs at least k + 1 feature vectors");
  if (!data.all_finite()) throw ContractError("PCA input contains non-finite values");

  PcaResult r;
  r.mean.assign(d, 0.0);
  r.scale.assign(d, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) r.mean[j] += data(i, j);
  }
  for (double& m : r.mean) m /= static_cast<double>(n);
  for (std::size_t j : options.standardize) {
    if (j >= d) throw ContractError("standardized column out of range");
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (data(i, j) - r.mean[j]) * (data(i, j) - r.mean[j]);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    r.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  const nn::Matrix x = centered_data(r, data);

  nn::Matrix cov(d, d);
  for (std::size_t i = 0; i < n; ++i) outer_add(cov, x.row(i), x.row(i));
  for (double& c : cov.data()) c /= static_cast<double>(n - 1);
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) total += cov(j, j);

  std::vector<std::vector<double>> basis;
  Rng rng(0x50434121ULL);
  std::vector<double> next(d);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> v(d);
    for (double& e : v) e = rng.uniform(-1.0, 1.0);
    orthogonalize(v, basis);
    normalize(v);
    int it = 0;
    for (; it < options.max_iterations; ++it) {
      matvec(cov, v, next);
      orthogonalize(next, basis);
      const double norm = nn::l2_norm(next);
      if (norm == 0.0) break;
      for (double& e : next) e /= norm;
      double diff = 0.0;
      for (std::size_t j = 0; j < d; ++j) diff = std::max(diff, std::abs(next[j] - v[j]));
      v.swap(next);
      if (diff < options.tolerance) {
        ++it;
        break;
      }
    }
    matvec(cov, v, next);
    const double lambda = nn::dot(v, next);
    if (!(lambda > options.rank_tolerance * total)) {
      r.rank_deficient = true;
      break;
    }
    r.iterations.push_back(it);
    r.eigenvalues.push_back(lambda);
    r.explained.push_back(total > 0.0 ? lambda / total : 0.0);
    // Deflate so the next iteration finds the following eigenvector.
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) cov(a, b) -= lambda * v[a] * v[b];
    }
    basis.push_back(std::move(v));
  }

  const std::size_t got = basis.size();
  r.components = nn::Matrix(got, d);
  for (std::size_t c = 0; c < got; ++c) {
    for (std::size_t j = 0; j < d; ++j) r.components(c, j) = basis[c][j];
  }
  r.projected = nn::Matrix(n, got);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < got; ++c) r.projected(i, c) = nn::dot(x.row(i), basis[c]);
  }
  return r;
}

nn::Matrix travel_matrix(std::span<const TravelFeature> features) {
  nn::Matrix m(features.size(), 4);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto v = features[i].v_travel();
    for (std::size_t j = 0; j < 4; ++j) m(i, j) = v[j];
  }
  return m;
}

PcaResult pca_project(std::span<const TravelFeature> features, std::size_t k) {
  PcaOptions opts;
  opts.components = k;
  opts.standardize = {3};
  return pca(travel_matrix(features), opts);
}

nn::Matrix reconstruct_centered(const PcaResult& r, const nn::Matrix& coords) {
  if (coords.cols() != r.components.rows()) throw ShapeError("coordinate width does not match the components");
  const std::size_t d = r.components.cols();
  nn::Matrix out(coords.rows(), d);
  for (std::size_t i = 0; i < coords.rows(); ++i) {
    for (std::size_t c = 0; c < coords.cols(); ++c) {
      for (std::size_t j = 0; j < d; ++j) out(i, j) += coords(i, c) * r.components(c, j);
    }
  }
  return out;
}

}  // namespace plight::analytics
