#include "scalenet/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "scalenet/errors.hpp"

namespace scalenet::measures {
namespace {

void require_finite(const Mat& a, const char* what) {
  if (a.size() == 0) throw InvalidInput(std::string(what) + ": empty matrix");
  if (!a.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entries");
}

void require_square(const Mat& a, const char* what) {
  require_finite(a, what);
  if (a.rows() != a.cols()) throw InvalidInput(std::string(what) + ": matrix is not square");
}

Eigen::VectorXd singular_values(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues();
}

}  // namespace

double mu2(const Mat& a) {
  require_square(a, "mu2");
  const Mat sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

double mu_inf(const Mat& a) {
  require_square(a, "mu_inf");
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = a(i, i);
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (j != i) row += std::abs(a(i, j));
    best = std::max(best, row);
  }
  return best;
}

double sigma_max(const Mat& a) {
  require_finite(a, "sigma_max");
  return singular_values(a).maxCoeff();
}

double sigma_min(const Mat& a) {
  require_finite(a, "sigma_min");
  // Thin SVD returns min(rows, cols) values; for a wide or tall matrix this is
  // the smallest nontrivial singular value.
  return singular_values(a).minCoeff();
}

double norm_inf(const Mat& a) {
  require_finite(a, "norm_inf");
  return a.cwiseAbs().rowwise().sum().maxCoeff();
}

BlockMatrix::BlockMatrix(Mat matrix, std::vector<int> block_dims)
    : matrix_(std::move(matrix)), dims_(std::move(block_dims)) {
  if (dims_.empty()) throw InvalidInput("BlockMatrix: no blocks");
  offsets_.reserve(dims_.size());
  int total = 0;
  for (int d : dims_) {
    if (d < 1) throw InvalidInput("BlockMatrix: block dimension must be >= 1");
    offsets_.push_back(total);
    total += d;
  }
  if (matrix_.rows() != total || matrix_.cols() != total)
    throw InvalidInput("BlockMatrix: block dimensions sum to " + std::to_string(total) +
                       " but matrix is " + std::to_string(matrix_.rows()) + "x" +
                       std::to_string(matrix_.cols()));
  if (!matrix_.allFinite()) throw InvalidInput("BlockMatrix: non-finite entries");
}

BlockMatrix BlockMatrix::uniform(Mat matrix, int block_dim) {
  if (block_dim < 1 || matrix.rows() % block_dim != 0)
    throw InvalidInput("BlockMatrix::uniform: dimension not divisible by block size");
  std::vector<int> dims(static_cast<size_t>(matrix.rows() / block_dim), block_dim);
  return BlockMatrix(std::move(matrix), std::move(dims));
}

Mat BlockMatrix::block(int i, int j) const {
  return matrix_.block(offsets_[i], offsets_[j], dims_[i], dims_[j]);
}

double lemma1_measure_bound(const BlockMatrix& a) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < a.num_blocks(); ++i) {
    double row = mu2(a.block(i, i));
    for (int j = 0; j < a.num_blocks(); ++j)
      if (j != i) row += norm2(a.block(i, j));
    best = std::max(best, row);
  }
  return best;
}

double lemma1_norm_bound(const BlockMatrix& h) {
  double best = 0.0;
  for (int i = 0; i < h.num_blocks(); ++i) {
    double row = 0.0;
    for (int j = 0; j < h.num_blocks(); ++j) row += norm2(h.block(i, j));
    best = std::max(best, row);
  }
  return best;
}

double block_max_norm(const Vec& z, const std::vector<int>& block_dims) {
  double best = 0.0;
  Eigen::Index offset = 0;
  for (int d : block_dims) {
    best = std::max(best, z.segment(offset, d).norm());
    offset += d;
  }
  if (offset != z.size()) throw InvalidInput("block_max_norm: dimension mismatch");
  return best;
}

}  // namespace scalenet::measures
