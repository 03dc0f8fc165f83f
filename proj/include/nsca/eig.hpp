#pragma once

// Exact generalized eigendecomposition of a symmetric pair and approximate
// joint diagonalization of a matrix set, plus the separation helpers built
// on them.

#include "nsca/signal.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace nsca {

struct GevdOptions {
  /// B is regularized when its condition number exceeds this.
  double condition_limit = 1e12;
  /// Diagonal loading as a fraction of trace(B)/n.
  double regularization = 1e-10;
};

struct GevdResult {
  /// Ascending generalized eigenvalues.
  Eigen::VectorXd eigenvalues;
  /// Columns w_i with W^T A W = diag(eigenvalues), W^T B W = I.
  Eigen::MatrixXd eigenvectors;
  bool regularized = false;
};

/// Solves A w = lambda B w for symmetric A and positive definite B through a
/// Cholesky reduction. The last column maximizes w^T A w / w^T B w. Each
/// eigenvector is signed so that its largest-magnitude entry is positive.
GevdResult gevd(const SymmetricMatrix& a, const SymmetricMatrix& b,
                const GevdOptions& opts = {});

struct AjdOptions {
  int max_sweeps = 200;
  /// Converged once every rotation in a sweep is smaller than this (rad).
  double angle_tolerance = 1e-9;
  GevdOptions whitening{};
};

struct AjdResult {
  /// W with W^T B W = I that approximately diagonalizes every W^T C_i W.
  Eigen::MatrixXd demixing;
  /// Summed squared off-diagonal energy: initial value, then one per sweep.
  std::vector<double> offdiag_score;
  int iterations = 0;
  bool converged = false;
  double condition_number = 0.0;
  bool regularized = false;
};

/// Whitens by B, then applies Jacobi (Givens) rotations that jointly
/// minimize the off-diagonal energy of the whitened set. Deterministic.
AjdResult ajd(std::span<const SymmetricMatrix> cs, const SymmetricMatrix& b,
              const AjdOptions& opts = {});

/// y(t) = W^T x(t).
MultichannelSignal apply_transform(const Eigen::MatrixXd& w,
                                   const MultichannelSignal& x);

/// Amari performance index of G = estimated^T * true_mixing, in [0, 1];
/// zero exactly when G is a scaled permutation.
double amari_index(const Eigen::MatrixXd& estimated,
                   const Eigen::MatrixXd& true_mixing);

/// Flips each column so its largest-magnitude entry is positive.
void normalize_column_signs(Eigen::MatrixXd& w);

}  // namespace nsca
