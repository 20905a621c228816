#include "tendon/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tendon {

namespace {

// Cyclic Jacobi on a symmetric matrix stored dense row-major. Returns
// eigenvalues on the diagonal of a; v accumulates the rotations columnwise
// (column j of v is the eigenvector for a[j][j]).
void jacobi_eigen(std::vector<double>& a, std::vector<double>& v, int d) {
  v.assign(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i) * d + i] = 1.0;
  auto A = [&](int r, int c) -> double& {
    return a[static_cast<std::size_t>(r) * d + c];
  };
  auto V = [&](int r, int c) -> double& {
    return v[static_cast<std::size_t>(r) * d + c];
  };
  double norm = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) norm += A(i, j) * A(i, j);
  norm = std::sqrt(norm);
  const double tol = norm * 1e-14 + 1e-300;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) off += A(i, j) * A(i, j);
    if (std::sqrt(off) <= tol) break;
    for (int p = 0; p < d - 1; ++p)
      for (int q = p + 1; q < d; ++q) {
        const double apq = A(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < d; ++i) {
          const double aip = A(i, p), aiq = A(i, q);
          A(i, p) = c * aip - s * aiq;
          A(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < d; ++i) {
          const double api = A(p, i), aqi = A(q, i);
          A(p, i) = c * api - s * aqi;
          A(q, i) = s * api + c * aqi;
        }
        for (int i = 0; i < d; ++i) {
          const double vip = V(i, p), viq = V(i, q);
          V(i, p) = c * vip - s * viq;
          V(i, q) = s * vip + c * viq;
        }
      }
  }
}

}  // namespace

PcaModel pca_fit(const std::vector<std::vector<double>>& rows, int k) {
  const int n = static_cast<int>(rows.size());
  if (n < 2) throw std::invalid_argument("pca_fit: need at least 2 rows");
  const int d = static_cast<int>(rows[0].size());
  if (d < 1) throw std::invalid_argument("pca_fit: empty feature rows");
  for (const auto& r : rows)
    if (static_cast<int>(r.size()) != d)
      throw std::invalid_argument("pca_fit: rows have mixed dimensions");
  const int kmax = std::min(n - 1, d);
  if (k < 1 || k > kmax)
    throw std::invalid_argument("pca_fit: k=" + std::to_string(k) +
                                " outside [1," + std::to_string(kmax) +
                                "] for " + std::to_string(n) + "x" +
                                std::to_string(d) + " data");

  PcaModel m;
  m.mean.assign(d, 0.0);
  for (const auto& r : rows)
    for (int j = 0; j < d; ++j) m.mean[j] += r[j];
  for (double& v : m.mean) v /= n;

  std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
  for (const auto& r : rows)
    for (int i = 0; i < d; ++i) {
      const double ci = r[i] - m.mean[i];
      for (int j = i; j < d; ++j)
        cov[static_cast<std::size_t>(i) * d + j] += ci * (r[j] - m.mean[j]);
    }
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      const double v = cov[static_cast<std::size_t>(i) * d + j] / (n - 1);
      cov[static_cast<std::size_t>(i) * d + j] = v;
      cov[static_cast<std::size_t>(j) * d + i] = v;
    }

  std::vector<double> vecs;
  jacobi_eigen(cov, vecs, d);

  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return cov[static_cast<std::size_t>(a) * d + a] >
           cov[static_cast<std::size_t>(b) * d + b];
  });

  for (int c = 0; c < k; ++c) {
    const int j = order[c];
    std::vector<double> comp(d);
    for (int i = 0; i < d; ++i)
      comp[i] = vecs[static_cast<std::size_t>(i) * d + j];
    int big = 0;
    for (int i = 1; i < d; ++i)
      if (std::abs(comp[i]) > std::abs(comp[big])) big = i;
    if (comp[big] < 0.0)
      for (double& v : comp) v = -v;
    m.components.push_back(std::move(comp));
    const double ev = cov[static_cast<std::size_t>(j) * d + j];
    m.explained_variance.push_back(ev > 0.0 ? ev : 0.0);
  }
  return m;
}

double pca_project(const PcaModel& pca, const std::vector<double>& feature,
                   int i) {
  if (i < 0 || i >= pca.k())
    throw std::invalid_argument("pca_project: component index out of range");
  if (static_cast<int>(feature.size()) != pca.dim())
    throw std::invalid_argument(
        "pca_project: feature dimension " + std::to_string(feature.size()) +
        ", model dimension " + std::to_string(pca.dim()));
  double s = 0.0;
  for (int j = 0; j < pca.dim(); ++j)
    s += (feature[j] - pca.mean[j]) * pca.components[i][j];
  return s;
}

}  // namespace tendon
