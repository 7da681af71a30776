#ifndef ADOM_LINALG_HPP
#define ADOM_LINALG_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace adom {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double max_abs(const MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double asymmetry(const MatrixXd& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  return max_abs(m - m.transpose());
}

struct EigenDecomposition {
  VectorXd values;   // ascending
  MatrixXd vectors;  // columns match values
};

// Cyclic Jacobi rotations on a dense symmetric matrix. Desk scale only
// (order up to a few hundred); quadratic storage, cubic sweeps.
inline EigenDecomposition jacobi_eigh(const MatrixXd& input, int max_sweeps = 64) {
  const auto n = input.rows();
  if (n != input.cols()) throw std::invalid_argument("jacobi_eigh: matrix not square");
  MatrixXd a = 0.5 * (input + input.transpose());
  MatrixXd v = MatrixXd::Identity(n, n);
  const double scale = std::max(1.0, max_abs(a));

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-15 * scale * static_cast<double>(n)) break;

    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double zeta = (aqq - app) / (2.0 * apq);
        // tangent of the rotation angle, smaller root for stability
        double t;
        if (std::abs(zeta) > 1e150) {
          t = 1.0 / (2.0 * zeta);
        } else {
          t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (Eigen::Index i = 0; i < n; ++i) {
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double api = a(p, i);
          const double aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

struct SpectrumResult {
  VectorXd eigenvalues;  // ascending
  double lam_max = 0.0;
  std::optional<double> lam_min_plus;  // empty when rank is numerically zero
  int kernel_dim = 0;

  double lam_min_plus_or_throw() const {
    if (!lam_min_plus) throw std::domain_error("spectrum: rank zero, lam_min_plus undefined");
    return *lam_min_plus;
  }
};

// Full symmetric spectrum with the positive part separated from the kernel by
// a relative rank tolerance of 1e-9 * lam_max.
inline SpectrumResult spectrum(const MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectrum: matrix not square");
  if (asymmetry(m) > 1e-10 * std::max(1.0, max_abs(m)))
    throw std::invalid_argument("spectrum: matrix not symmetric");
  auto eig = jacobi_eigh(m);
  SpectrumResult r;
  r.eigenvalues = eig.values;
  r.lam_max = eig.values.size() ? eig.values(eig.values.size() - 1) : 0.0;
  const double tol = 1e-9 * std::max(0.0, r.lam_max);
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) > tol) {
      r.lam_min_plus = eig.values(i);
      r.kernel_dim = static_cast<int>(i);
      break;
    }
  }
  if (!r.lam_min_plus) r.kernel_dim = static_cast<int>(eig.values.size());
  return r;
}

// Orthonormal basis of the range of a symmetric PSD matrix (columns).
inline MatrixXd range_basis(const MatrixXd& psd, double rel_tol = 1e-10) {
  auto eig = jacobi_eigh(psd);
  const double lmax = eig.values.size() ? std::abs(eig.values(eig.values.size() - 1)) : 0.0;
  const double tol = rel_tol * std::max(1.0, lmax);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i)
    if (std::abs(eig.values(i)) > tol) keep.push_back(i);
  MatrixXd q(psd.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) q.col(static_cast<Eigen::Index>(j)) = eig.vectors.col(keep[j]);
  return q;
}

// Least-squares relative residual of b against the columns of A.
inline double image_residual(const MatrixXd& a, const VectorXd& b) {
  if (b.size() == 0) return 0.0;
  const double nb = b.norm();
  if (nb == 0.0) return 0.0;
  VectorXd x = a.completeOrthogonalDecomposition().solve(b);
  return (a * x - b).norm() / nb;
}

}  // namespace adom

#endif  // ADOM_LINALG_HPP
