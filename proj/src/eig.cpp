#include "nsca/eig.hpp"

#include "nsca/error.hpp"

#include <cmath>
#include <limits>

namespace nsca {

namespace {

struct Whitening {
  // Lower Cholesky factor of the (possibly regularized) B.
  Eigen::MatrixXd chol_lower;
  bool regularized = false;
};

Whitening factor_b(const SymmetricMatrix& b, const GevdOptions& opts) {
  const Eigen::Index n = b.dim();
  const double trace = b.matrix().trace();
  if (!(trace > 0.0)) {
    throw Error(ErrorKind::SingularB, "B has nonpositive trace");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum(
      b.matrix(), Eigen::EigenvaluesOnly);
  const double lo = spectrum.eigenvalues()(0);
  const double hi = spectrum.eigenvalues()(n - 1);

  Whitening out;
  Eigen::MatrixXd loaded = b.matrix();
  if (!(lo > 0.0) || hi / lo > opts.condition_limit) {
    const double eps = opts.regularization * trace / static_cast<double>(n);
    loaded.diagonal().array() += eps;
    out.regularized = true;
    if (!(lo + eps > 0.0)) {
      throw Error(ErrorKind::SingularB,
                  "B is indefinite beyond the regularization level");
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(loaded);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularB, "Cholesky factorization of B failed");
  }
  out.chol_lower = llt.matrixL();
  return out;
}

// L^{-1} M L^{-T}
Eigen::MatrixXd reduce(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& m) {
  const auto tri = lower.triangularView<Eigen::Lower>();
  Eigen::MatrixXd left = tri.solve(m);
  Eigen::MatrixXd both = tri.solve(left.transpose());
  return 0.5 * (both + both.transpose());
}

// L^{-T} V
Eigen::MatrixXd back_substitute(const Eigen::MatrixXd& lower,
                                const Eigen::MatrixXd& v) {
  return lower.transpose().triangularView<Eigen::Upper>().solve(v);
}

double offdiag_energy(const std::vector<Eigen::MatrixXd>& set) {
  double acc = 0.0;
  for (const auto& m : set) {
    acc += m.squaredNorm() - m.diagonal().squaredNorm();
  }
  return acc;
}

}  // namespace

void normalize_column_signs(Eigen::MatrixXd& w) {
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    Eigen::Index arg = 0;
    w.col(j).cwiseAbs().maxCoeff(&arg);
    if (w(arg, j) < 0.0) w.col(j) *= -1.0;
  }
}

GevdResult gevd(const SymmetricMatrix& a, const SymmetricMatrix& b,
                const GevdOptions& opts) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "A and B differ in dimension");
  }
  const Whitening white = factor_b(b, opts);
  const Eigen::MatrixXd reduced = reduce(white.chol_lower, a.matrix());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::InvalidArgument, "symmetric eigensolver failed");
  }
  GevdResult out;
  out.eigenvalues = eig.eigenvalues();
  out.eigenvectors = back_substitute(white.chol_lower, eig.eigenvectors());
  out.regularized = white.regularized;
  normalize_column_signs(out.eigenvectors);
  return out;
}

AjdResult ajd(std::span<const SymmetricMatrix> cs, const SymmetricMatrix& b,
              const AjdOptions& opts) {
  if (cs.size() < 2) {
    throw Error(ErrorKind::InvalidArgument,
                "joint diagonalization needs at least two matrices");
  }
  const Eigen::Index n = b.dim();
  for (const auto& c : cs) {
    if (c.dim() != n) {
      throw Error(ErrorKind::DimensionMismatch,
                  "matrix set and B differ in dimension");
    }
  }
  const Whitening white = factor_b(b, opts.whitening);

  std::vector<Eigen::MatrixXd> set;
  set.reserve(cs.size());
  for (const auto& c : cs) set.push_back(reduce(white.chol_lower, c.matrix()));

  Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(n, n);
  AjdResult out;
  out.offdiag_score.push_back(offdiag_energy(set));

  const std::size_t m = set.size();
  Eigen::Matrix2Xd g(2, static_cast<Eigen::Index>(m));
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        for (std::size_t i = 0; i < m; ++i) {
          const auto& c = set[i];
          g(0, static_cast<Eigen::Index>(i)) = c(p, p) - c(q, q);
          g(1, static_cast<Eigen::Index>(i)) = c(p, q) + c(q, p);
        }
        const Eigen::Matrix2d gg = g * g.transpose();
        const double ton = gg(0, 0) - gg(1, 1);
        const double toff = gg(0, 1) + gg(1, 0);
        const double theta =
            0.5 * std::atan2(toff, ton + std::sqrt(ton * ton + toff * toff));
        if (!(std::abs(theta) > opts.angle_tolerance)) continue;
        rotated = true;
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        for (auto& mat : set) {
          // mat <- G^T mat G with G = [c -s; s c] acting on (p, q).
          const Eigen::VectorXd rp = mat.row(p);
          const Eigen::VectorXd rq = mat.row(q);
          mat.row(p) = c * rp + s * rq;
          mat.row(q) = -s * rp + c * rq;
          const Eigen::VectorXd cp = mat.col(p);
          const Eigen::VectorXd cq = mat.col(q);
          mat.col(p) = c * cp + s * cq;
          mat.col(q) = -s * cp + c * cq;
        }
        const Eigen::VectorXd vp = rot.col(p);
        const Eigen::VectorXd vq = rot.col(q);
        rot.col(p) = c * vp + s * vq;
        rot.col(q) = -s * vp + c * vq;
      }
    }
    out.iterations = sweep + 1;
    out.offdiag_score.push_back(offdiag_energy(set));
    if (!rotated) {
      out.converged = true;
      break;
    }
  }

  out.demixing = back_substitute(white.chol_lower, rot);
  normalize_column_signs(out.demixing);
  out.regularized = white.regularized;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.demixing);
  const auto& sv = svd.singularValues();
  out.condition_number = sv(sv.size() - 1) > 0.0
                             ? sv(0) / sv(sv.size() - 1)
                             : std::numeric_limits<double>::infinity();
  return out;
}

MultichannelSignal apply_transform(const Eigen::MatrixXd& w,
                                   const MultichannelSignal& x) {
  if (w.rows() != static_cast<Eigen::Index>(x.channels()) ||
      w.cols() != w.rows()) {
    throw Error(ErrorKind::DimensionMismatch,
                "transform does not match channel count");
  }
  SampleMatrix y = w.transpose() * x.data();
  return MultichannelSignal(std::move(y), x.fs());
}

double amari_index(const Eigen::MatrixXd& estimated,
                   const Eigen::MatrixXd& true_mixing) {
  if (estimated.rows() != estimated.cols() ||
      true_mixing.rows() != true_mixing.cols() ||
      estimated.rows() != true_mixing.rows()) {
    throw Error(ErrorKind::DimensionMismatch,
                "Amari index needs square matrices of equal size");
  }
  const Eigen::Index n = estimated.rows();
  if (n < 2) return 0.0;
  const Eigen::MatrixXd g = (estimated.transpose() * true_mixing).cwiseAbs();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += g.row(i).sum() / g.row(i).maxCoeff() - 1.0;
    acc += g.col(i).sum() / g.col(i).maxCoeff() - 1.0;
  }
  return acc / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace nsca
