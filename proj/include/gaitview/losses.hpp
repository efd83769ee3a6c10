#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <vector>

#include "gaitview/nn.hpp"

namespace gaitview {

// Supervised contrastive loss, implemented exactly as written: positives
// are same-label pairs j != i, the denominator sums ONLY over different-
// label negatives (which differs from the standard formulation, where the
// denominator also covers positives), averaged with the 1/n factor.
//
//   L = -(1/n) sum_i sum_{j!=i, y_j=y_i}
//         [ S_ij - log sum_{y_k != y_i} exp(S_ik) ],   S = F F^T / tau.
template <typename S>
double supcon_loss(const Mat<S>& features, const std::vector<int>& labels,
                   double tau, Mat<S>* grad_out = nullptr) {
  const int n = static_cast<int>(features.rows());
  if (n != static_cast<int>(labels.size()))
    throw ContractError("supcon: labels size mismatch");
  std::vector<int> label_count;
  {
    std::vector<int> uniq;
    for (int l : labels) {
      bool found = false;
      for (std::size_t u = 0; u < uniq.size(); ++u)
        if (uniq[u] == l) {
          ++label_count[u];
          found = true;
        }
      if (!found) {
        uniq.push_back(l);
        label_count.push_back(1);
      }
    }
    if (uniq.size() < 2)
      throw BatchCompositionError("supcon: batch needs >= 2 distinct labels");
    for (int c : label_count)
      if (c < 2)
        throw BatchCompositionError("supcon: every label needs >= 2 samples");
  }

  const Mat<S> sim =
      (features * features.transpose()) / static_cast<S>(tau);
  Mat<S> gsim = Mat<S>::Zero(n, n);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    // stable log-sum-exp over negatives
    S mx = std::numeric_limits<S>::lowest();
    for (int k = 0; k < n; ++k)
      if (labels[static_cast<std::size_t>(k)] != labels[static_cast<std::size_t>(i)])
        mx = std::max(mx, sim(i, k));
    double z = 0.0;
    for (int k = 0; k < n; ++k)
      if (labels[static_cast<std::size_t>(k)] != labels[static_cast<std::size_t>(i)])
        z += std::exp(static_cast<double>(sim(i, k) - mx));
    const double logz = static_cast<double>(mx) + std::log(z);

    int positives = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (labels[static_cast<std::size_t>(j)] != labels[static_cast<std::size_t>(i)])
        continue;
      ++positives;
      loss -= (static_cast<double>(sim(i, j)) - logz) / n;
      gsim(i, j) -= S(1.0 / n);
    }
    for (int k = 0; k < n; ++k) {
      if (labels[static_cast<std::size_t>(k)] == labels[static_cast<std::size_t>(i)])
        continue;
      const double soft =
          std::exp(static_cast<double>(sim(i, k) - mx)) / z;
      gsim(i, k) += static_cast<S>(positives * soft / n);
    }
  }
  if (grad_out)
    *grad_out = ((gsim + gsim.transpose()) * features) / static_cast<S>(tau);
  return loss;
}

// Eq. 13: sum of the two per-branch losses over aligned batches.
template <typename S>
double total_loss(const Mat<S>& f_alpha, const Mat<S>& f_beta,
                  const std::vector<int>& labels, double tau,
                  Mat<S>* grad_alpha = nullptr, Mat<S>* grad_beta = nullptr) {
  return supcon_loss(f_alpha, labels, tau, grad_alpha) +
         supcon_loss(f_beta, labels, tau, grad_beta);
}

// ----------------------------------------------------------- L2 normalize

// Row-wise f / ||f||; the loss consumes unit-norm features.
template <typename S>
Mat<S> l2_normalize_rows(const Mat<S>& x, Mat<S>* norms_out = nullptr) {
  Mat<S> y = x;
  Mat<S> norms(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const S n = x.row(i).norm();
    if (n <= S(0)) throw NumericError("cannot normalize a zero feature");
    norms(i, 0) = n;
    y.row(i) /= n;
  }
  if (norms_out) *norms_out = norms;
  return y;
}

// Backward of row normalization given the ORIGINAL input x.
template <typename S>
Mat<S> l2_normalize_rows_backward(const Mat<S>& x, const Mat<S>& gy) {
  Mat<S> gx = gy;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const S n = x.row(i).norm();
    const S dot = x.row(i).dot(gy.row(i));
    gx.row(i) = gy.row(i) / n - x.row(i) * (dot / (n * n * n));
  }
  return gx;
}

// -------------------------------------------------------------- GAN losses

enum class MatrixNorm { frobenius, spectral };

// Eq. 6: cycle-identity term plus least-squares adversarial term,
//   L_G = ||I - Q_ab Q_ba|| + (1 - D(fake))^2.
template <typename S>
double generator_loss(const Mat<S>& q_ab, const Mat<S>& q_ba, double d_fake,
                      MatrixNorm norm = MatrixNorm::frobenius,
                      Mat<S>* grad_qab = nullptr, Mat<S>* grad_qba = nullptr,
                      double* grad_dfake = nullptr) {
  const Mat<S> a =
      Mat<S>::Identity(q_ab.rows(), q_ab.cols()) - q_ab * q_ba;
  double cycle = 0.0;
  Mat<S> da;  // d cycle / d a
  if (norm == MatrixNorm::frobenius) {
    cycle = a.norm();
    da = cycle > 1e-12 ? Mat<S>(a / static_cast<S>(cycle))
                       : Mat<S>(Mat<S>::Zero(a.rows(), a.cols()));
  } else {
    Eigen::JacobiSVD<Mat<S>> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    cycle = static_cast<double>(svd.singularValues()(0));
    da = svd.matrixU().col(0) * svd.matrixV().col(0).transpose();
  }
  const double adv = (1.0 - d_fake) * (1.0 - d_fake);
  if (grad_qab) *grad_qab = -da * q_ba.transpose();
  if (grad_qba) *grad_qba = -q_ab.transpose() * da;
  if (grad_dfake) *grad_dfake = -2.0 * (1.0 - d_fake);
  return cycle + adv;
}

// Eq. 7: L_D = (1 - D(real))^2 + D(fake)^2.
inline double discriminator_loss(double d_real, double d_fake,
                                 double* grad_real = nullptr,
                                 double* grad_fake = nullptr) {
  if (grad_real) *grad_real = -2.0 * (1.0 - d_real);
  if (grad_fake) *grad_fake = 2.0 * d_fake;
  return (1.0 - d_real) * (1.0 - d_real) + d_fake * d_fake;
}

}  // namespace gaitview
