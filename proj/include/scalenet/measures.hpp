#pragma once

// Matrix measures (logarithmic norms), induced norms and the block bounds
// used to reason about max-separable metrics.
//
// The block metric is fixed: Euclidean inside each block, max over blocks.
// For a stacked vector z = [z_1; ...; z_N] this is |z|_G = max_i |z_i|_2.

#include <vector>

#include "scalenet/linalg.hpp"

namespace scalenet::measures {

/// lambda_max((A + A^T) / 2). Throws InvalidInput on non-square or non-finite A.
double mu2(const Mat& a);

/// max_i (a_ii + sum_{j != i} |a_ij|).
double mu_inf(const Mat& a);

double sigma_max(const Mat& a);
double sigma_min(const Mat& a);
inline double norm2(const Mat& a) { return sigma_max(a); }

/// Max absolute row sum.
double norm_inf(const Mat& a);

// Square block partition of a square matrix. Block i spans rows/cols
// [offset(i), offset(i) + dims[i]).
class BlockMatrix {
 public:
  BlockMatrix(Mat matrix, std::vector<int> block_dims);

  /// N x N grid of n x n blocks.
  static BlockMatrix uniform(Mat matrix, int block_dim);

  int num_blocks() const { return static_cast<int>(dims_.size()); }
  int block_dim(int i) const { return dims_[i]; }
  int offset(int i) const { return offsets_[i]; }
  const Mat& matrix() const { return matrix_; }
  const std::vector<int>& dims() const { return dims_; }

  Mat block(int i, int j) const;

 private:
  Mat matrix_;
  std::vector<int> dims_;
  std::vector<int> offsets_;
};

/// max_i { mu2(A_ii) + sum_{j != i} ||A_ij||_2 }, an upper bound on the
/// measure of A induced by |.|_G.
double lemma1_measure_bound(const BlockMatrix& a);

/// max_i sum_j ||H_ij||_2, an upper bound on the norm of H induced by |.|_G.
double lemma1_norm_bound(const BlockMatrix& h);

/// |z|_G for the given block partition.
double block_max_norm(const Vec& z, const std::vector<int>& block_dims);

}  // namespace scalenet::measures
