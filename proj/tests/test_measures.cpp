#include <random>

#include "doctest.h"
#include "scalenet/errors.hpp"
#include "scalenet/measures.hpp"

using namespace scalenet;
using namespace scalenet::measures;

namespace {

Mat m2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

// (||I + hA||_2 - 1) / h through the SVD route.
double limit_mu2(const Mat& a, double h) {
  Mat ih = Mat::Identity(a.rows(), a.cols()) + h * a;
  Eigen::JacobiSVD<Mat> svd(ih);
  return (svd.singularValues()(0) - 1.0) / h;
}

Mat random_matrix(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = nd(rng);
  return m;
}

}  // namespace

TEST_CASE("mu2 examples") {
  CHECK(mu2(m2(-1, 0, 0, -2)) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(std::abs(mu2(m2(0, 1, -1, 0))) < 1e-14);
  const Mat a = m2(-3, 1, 0.5, -4);
  CHECK(std::abs(mu2(a) - limit_mu2(a, 1e-7)) < 1e-5);
}

TEST_CASE("mu_inf examples") {
  for (int n = 1; n <= 5; ++n) CHECK(mu_inf(-Mat::Identity(n, n)) == -1.0);
  CHECK(mu_inf(m2(-3, 1, 2, -5)) == -2.0);
  CHECK(mu_inf(Mat::Zero(2, 2)) == 0.0);

  // limit definition with the row-sum norm
  const Mat a = m2(-3, 1, 2, -5);
  const double h = 1e-6;
  const Mat ih = Mat::Identity(2, 2) + h * a;
  CHECK(std::abs((norm_inf(ih) - 1.0) / h - (-2.0)) < 1e-6);
}

TEST_CASE("invalid input") {
  CHECK_THROWS_AS(mu2(Mat::Zero(2, 3)), InvalidInput);
  Mat bad = Mat::Zero(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(mu2(bad), InvalidInput);
  CHECK_THROWS_AS(mu_inf(bad), InvalidInput);
  CHECK_THROWS_AS(sigma_max(bad), InvalidInput);
}

TEST_CASE("singular values") {
  CHECK(sigma_min(Mat::Identity(2, 2)) == doctest::Approx(1.0));
  CHECK(sigma_max(Mat::Identity(2, 2)) == doctest::Approx(1.0));
  CHECK(sigma_max(m2(3, 0, 0, 0.5)) == doctest::Approx(3.0));
  CHECK(sigma_min(m2(3, 0, 0, 0.5)) == doctest::Approx(0.5));

  // T = [[I, I], [0, I]]: singular values of [[1,1],[0,1]] are (sqrt5 +- 1)/2
  Mat t = Mat::Identity(4, 4);
  t.block(0, 2, 2, 2) = Mat::Identity(2, 2);
  const double golden = (std::sqrt(5.0) + 1.0) / 2.0;
  Eigen::BDCSVD<Mat> svd(t);
  const double ratio_svd = svd.singularValues()(0) / svd.singularValues()(3);
  CHECK(std::abs(sigma_max(t) / sigma_min(t) - ratio_svd) < 1e-10);
  CHECK(std::abs(ratio_svd - golden * golden) < 1e-10);
}

TEST_CASE("lemma1 examples") {
  CHECK(lemma1_measure_bound(BlockMatrix::uniform(m2(-1, 0, 0, -2), 1)) == -1.0);
  CHECK(lemma1_measure_bound(BlockMatrix::uniform(m2(-3, 1, 0.5, -4), 1)) == -2.0);
  CHECK(lemma1_norm_bound(BlockMatrix::uniform(Mat::Zero(4, 4), 2)) == 0.0);
  CHECK(lemma1_norm_bound(BlockMatrix::uniform(m2(0, 1, 2, 0), 1)) == doctest::Approx(2.0));

  const Mat a = m2(-3, 1, 0.5, -4);
  CHECK(lemma1_measure_bound(BlockMatrix(a, {2})) == doctest::Approx(mu2(a)).epsilon(1e-14));
  CHECK_THROWS_AS(BlockMatrix(a, {1, 2}), InvalidInput);
  CHECK_THROWS_AS(BlockMatrix::uniform(Mat::Zero(3, 3), 2), InvalidInput);
}

TEST_CASE("block max norm") {
  Vec z(4);
  z << 3, 4, 1, 0;
  CHECK(block_max_norm(z, {2, 2}) == doctest::Approx(5.0));
  CHECK(block_max_norm(z, {1, 3}) == doctest::Approx(std::sqrt(17.0)));
}

TEST_CASE("properties on random matrices") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 6;
    const Mat a = random_matrix(rng, n);
    const Mat b = random_matrix(rng, n);
    const double c = 0.37 * (trial - 25);
    const Mat id = Mat::Identity(n, n);
    CHECK(mu2(a) <= norm2(a) + 1e-12);
    CHECK(mu_inf(a) <= norm_inf(a) + 1e-12);
    CHECK(std::abs(mu2(a + c * id) - mu2(a) - c) < 1e-10);
    CHECK(std::abs(mu_inf(a + c * id) - mu_inf(a) - c) < 1e-10);
    CHECK(mu2(a + b) <= mu2(a) + mu2(b) + 1e-10);
    CHECK(mu_inf(a + b) <= mu_inf(a) + mu_inf(b) + 1e-10);
    CHECK(mu2(a) >= -norm2(a) - 1e-12);
  }
}

TEST_CASE("lemma1 bounds dominate sampled ratios") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    const int blocks = 1 + trial % 4, dim = 1 + trial % 3;
    const int n = blocks * dim;
    const Mat a = random_matrix(rng, n);
    const BlockMatrix ba = BlockMatrix::uniform(a, dim);
    const double mb = lemma1_measure_bound(ba), nb = lemma1_norm_bound(ba);
    const std::vector<int> dims(blocks, dim);
    const double h = 1e-6;
    for (int k = 0; k < 200; ++k) {
      Vec z(n);
      for (int i = 0; i < n; ++i) z(i) = nd(rng);
      const double nz = block_max_norm(z, dims);
      CHECK(block_max_norm(a * z, dims) / nz <= nb + 1e-10);
      const Vec step = z + h * (a * z);
      CHECK((block_max_norm(step, dims) - nz) / (h * nz) <= mb + 1e-5);
    }
  }
}
