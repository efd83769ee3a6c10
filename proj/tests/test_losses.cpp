#include "doctest.h"

#include "gaitview/losses.hpp"
#include "grad_check.hpp"

using namespace gaitview;

namespace {

// Independent oracle: Eq. 11 spelled out as explicit loops over (i, j, k)
// with per-element dot products, no shared code with the implementation.
double supcon_bruteforce(const Mat<double>& f, const std::vector<int>& y,
                         double tau) {
  const int n = static_cast<int>(f.rows());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i || y[static_cast<std::size_t>(j)] != y[static_cast<std::size_t>(i)])
        continue;
      double dot_ij = 0.0;
      for (int c = 0; c < f.cols(); ++c) dot_ij += f(i, c) * f(j, c);
      double denom = 0.0;
      for (int k = 0; k < n; ++k) {
        if (y[static_cast<std::size_t>(k)] == y[static_cast<std::size_t>(i)])
          continue;
        double dot_ik = 0.0;
        for (int c = 0; c < f.cols(); ++c) dot_ik += f(i, c) * f(k, c);
        denom += std::exp(dot_ik / tau);
      }
      total += std::log(std::exp(dot_ij / tau) / denom);
    }
  }
  return -total / n;
}

Mat<double> random_unit_features(int n, int d, Rng& rng) {
  Mat<double> f(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) f(i, j) = rng.normal();
  return l2_normalize_rows(f);
}

std::vector<int> random_labels(int n, int classes, Rng& rng) {
  // at least two of each class, rest random
  std::vector<int> y;
  for (int c = 0; c < classes; ++c) {
    y.push_back(c);
    y.push_back(c);
  }
  while (static_cast<int>(y.size()) < n)
    y.push_back(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(classes))));
  rng.shuffle(y);
  y.resize(static_cast<std::size_t>(n));
  return y;
}

Mat<double> random_orthogonal(int d, Rng& rng) {
  Mat<double> m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat<double>> qr(m);
  return qr.householderQ();
}

}  // namespace

TEST_CASE("supcon on the two-class axis batch equals log 2 - 1") {
  Mat<double> f(4, 2);
  f << 1, 0, 1, 0, 0, 1, 0, 1;
  const std::vector<int> y = {0, 0, 1, 1};
  const double loss = supcon_loss(f, y, 1.0);
  CHECK(loss == doctest::Approx(std::log(2.0) - 1.0).epsilon(1e-12));
  CHECK(loss == doctest::Approx(supcon_bruteforce(f, y, 1.0)).epsilon(1e-12));
}

TEST_CASE("supcon matches the brute-force oracle on 50 random batches") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int classes = 2 + static_cast<int>(rng.uniform_int(3));
    const int n =
        2 * classes + static_cast<int>(rng.uniform_int(
                          static_cast<std::uint64_t>(16 - 2 * classes + 1)));
    const int d = 2 + static_cast<int>(rng.uniform_int(6));
    const double tau = 0.05 + rng.uniform() * 0.95;
    const auto f = random_unit_features(n, d, rng);
    const auto y = random_labels(n, classes, rng);
    const double got = supcon_loss(f, y, tau);
    const double expect = supcon_bruteforce(f, y, tau);
    CHECK(std::abs(got - expect) < 1e-6);
  }
}

TEST_CASE("supcon is invariant under a global orthogonal rotation") {
  Rng rng(7);
  const auto f = random_unit_features(8, 5, rng);
  const auto y = random_labels(8, 3, rng);
  const auto q = random_orthogonal(5, rng);
  const Mat<double> fr = f * q;
  CHECK(supcon_loss(f, y, 0.07) ==
        doctest::Approx(supcon_loss(fr, y, 0.07)).epsilon(1e-9));
}

TEST_CASE("supcon rejects degenerate batch compositions") {
  Rng rng(3);
  const auto f = random_unit_features(4, 3, rng);
  CHECK_THROWS_AS(supcon_loss(f, std::vector<int>{1, 1, 1, 1}, 0.1),
                  BatchCompositionError);
  CHECK_THROWS_AS(supcon_loss(f, std::vector<int>{0, 0, 0, 1}, 0.1),
                  BatchCompositionError);
}

TEST_CASE("supcon gradient matches finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 6;
    Mat<double> f = random_unit_features(n, 4, rng);
    const auto y = random_labels(n, 2, rng);
    const double tau = 0.2 + rng.uniform() * 0.8;
    Mat<double> grad;
    supcon_loss(f, y, tau, &grad);
    auto loss = [&]() { return supcon_loss(f, y, tau); };
    CHECK(fd_max_rel_err({{&f, &grad}}, loss) < 1e-4);
  }
}

TEST_CASE("total loss sums the two branches and is symmetric") {
  Rng rng(13);
  const auto fa = random_unit_features(6, 4, rng);
  const auto fb = random_unit_features(6, 4, rng);
  const auto y = random_labels(6, 2, rng);
  const double t = total_loss(fa, fb, y, 0.1);
  CHECK(t == doctest::Approx(supcon_loss(fa, y, 0.1) + supcon_loss(fb, y, 0.1)));
  CHECK(t == doctest::Approx(total_loss(fb, fa, y, 0.1)));
  CHECK(t == doctest::Approx(supcon_bruteforce(fa, y, 0.1) +
                             supcon_bruteforce(fb, y, 0.1))
                 .epsilon(1e-9));
}

TEST_CASE("if both branch losses are x the total is 2x") {
  Mat<double> f(4, 2);
  f << 1, 0, 1, 0, 0, 1, 0, 1;
  const std::vector<int> y = {0, 0, 1, 1};
  const double one = supcon_loss(f, y, 1.0);
  CHECK(total_loss(f, f, y, 1.0) == doctest::Approx(2.0 * one));
}

TEST_CASE("l2 normalization backward matches finite differences") {
  Rng rng(17);
  Mat<double> x(5, 4);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = rng.normal() + 0.1;
  Mat<double> r(5, 4);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) r(i, j) = rng.normal();
  const Mat<double> gx = l2_normalize_rows_backward(x, r);
  auto loss = [&]() {
    return (l2_normalize_rows(x).array() * r.array()).sum();
  };
  CHECK(fd_max_rel_err({{&x, &gx}}, loss) < 1e-4);
}

TEST_CASE("generator loss tabulated cases") {
  const Mat<double> i3 = Mat<double>::Identity(3, 3);
  CHECK(generator_loss<double>(i3, i3, 1.0) == 0.0);
  CHECK(generator_loss<double>(i3, i3, 0.0) == 1.0);
  Mat<double> d211 = i3;
  d211(0, 0) = 2.0;
  CHECK(generator_loss<double>(d211, i3, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("generator loss gradients match finite differences") {
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    Mat<double> qab(3, 3), qba(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        qab(i, j) = rng.normal();
        qba(i, j) = rng.normal();
      }
    double dfake = rng.uniform();
    Mat<double> gab, gba;
    double gd = 0.0;
    const MatrixNorm norm =
        trial % 2 ? MatrixNorm::frobenius : MatrixNorm::spectral;
    generator_loss(qab, qba, dfake, norm, &gab, &gba, &gd);
    auto loss = [&]() { return generator_loss(qab, qba, dfake, norm); };
    CHECK(fd_max_rel_err({{&qab, &gab}, {&qba, &gba}}, loss) < 1e-4);
    const double eps = 1e-6;
    dfake += eps;
    const double lp = loss();
    dfake -= 2 * eps;
    const double lm = loss();
    dfake += eps;
    CHECK(std::abs((lp - lm) / (2 * eps) - gd) < 1e-5);
  }
}

TEST_CASE("discriminator loss tabulated cases and gradients") {
  CHECK(discriminator_loss(1.0, 0.0) == 0.0);
  CHECK(discriminator_loss(0.0, 1.0) == 2.0);
  CHECK(discriminator_loss(0.5, 0.5) == 0.5);

  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    double dr = rng.uniform(), df = rng.uniform();
    double gr = 0.0, gf = 0.0;
    discriminator_loss(dr, df, &gr, &gf);
    const double eps = 1e-6;
    CHECK(std::abs((discriminator_loss(dr + eps, df) -
                    discriminator_loss(dr - eps, df)) /
                       (2 * eps) -
                   gr) < 1e-6);
    CHECK(std::abs((discriminator_loss(dr, df + eps) -
                    discriminator_loss(dr, df - eps)) /
                       (2 * eps) -
                   gf) < 1e-6);
  }
}
