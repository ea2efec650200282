#include "cfse/operator_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cfse/errors.hpp"
#include "cfse/group_sampler.hpp"

namespace cfse {
namespace {

double max_abs(const CMat& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// Phase mapped into (-pi, pi] so that the ordering is total.
double canonical_phase(cplx z) {
  double p = std::arg(z);
  if (p <= -std::numbers::pi) p += 2 * std::numbers::pi;
  return p;
}

}  // namespace

OperatorPoint make_point(const CMat& mat, int n, std::optional<double> rank_tol) {
  if (mat.rows() != mat.cols() || mat.rows() == 0)
    throw Error(ErrorKind::InvalidArgument, "operator must be a nonempty square matrix");
  if (n < 1 || 2 * n > kMaxChain)
    throw Error(ErrorKind::InvalidArgument, "spin dimension n must be in [1, 8]");
  if (rank_tol && *rank_tol < 0) throw Error(ErrorKind::InvalidArgument, "rank_tol must be nonnegative");
  if (!mat.allFinite()) throw Error(ErrorKind::NotHermitian, "non-finite entries");

  double scale = max_abs(mat);
  double asym = max_abs(mat - mat.adjoint());
  if (asym > 1e-12 * scale) throw Error(ErrorKind::NotHermitian, "deviation " + std::to_string(asym));

  cplx tr = mat.trace();
  if (std::abs(tr - cplx(1.0, 0.0)) > 1e-10)
    throw Error(ErrorKind::TraceNotOne, "trace " + std::to_string(tr.real()));

  OperatorPoint p;
  p.mat_ = (mat + mat.adjoint()) / 2.0;
  p.n_ = n;
  Eigen::SelfAdjointEigenSolver<CMat> es(p.mat_);
  p.eigenvalues_ = es.eigenvalues();
  double lam_max = p.eigenvalues_.cwiseAbs().maxCoeff();
  p.rank_tol_ = rank_tol ? *rank_tol : 1e-9 * lam_max;

  int pos = 0, neg = 0;
  std::vector<int> keep;
  for (int i = 0; i < p.eigenvalues_.size(); ++i) {
    double l = p.eigenvalues_(i);
    if (l > p.rank_tol_) ++pos;
    else if (l < -p.rank_tol_) ++neg;
    else continue;
    keep.push_back(i);
  }
  if (pos > n || neg > n)
    throw Error(ErrorKind::SignatureViolation,
                std::to_string(pos) + " positive, " + std::to_string(neg) + " negative eigenvalues");

  p.factor_.resize(p.mat_.rows(), static_cast<Eigen::Index>(keep.size()));
  p.nonzero_.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    p.factor_.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]);
    p.nonzero_(static_cast<Eigen::Index>(k)) = p.eigenvalues_(keep[k]);
  }
  return p;
}

ChainVec small_eigenvalues(const ChainMat& a) {
  const Eigen::Index m = a.rows();
  ChainVec out(m);
  if (m == 0) return out;
  if (m == 1) {
    out(0) = a(0, 0);
    return out;
  }
  if (m == 2) {
    cplx mean = (a(0, 0) + a(1, 1)) / 2.0;
    cplx half = (a(0, 0) - a(1, 1)) / 2.0;
    cplx disc = std::sqrt(half * half + a(0, 1) * a(1, 0));
    out(0) = mean + disc;
    out(1) = mean - disc;
    return out;
  }
  Eigen::ComplexEigenSolver<ChainMat> es(a, false);
  return es.eigenvalues();
}

ChainVec chain_eigenvalues(const CMat& Px, const RVec& Dx, const CMat& Qy, const RVec& Dy) {
  ChainMat m;
  m.noalias() = Px.adjoint() * Qy;
  ChainMat left = Dx.asDiagonal() * m;
  ChainMat right = Dy.asDiagonal() * m.adjoint();
  ChainMat a;
  a.noalias() = left * right;
  return small_eigenvalues(a);
}

ClosedChainSpectrum closed_chain_spectrum(const OperatorPoint& x, const OperatorPoint& y) {
  if (x.f() != y.f() || x.n() != y.n())
    throw Error(ErrorKind::DimensionMismatch, "points live in different spaces");
  ChainVec ev = chain_eigenvalues(x.factor(), x.nonzero_eigenvalues(), y.factor(), y.nonzero_eigenvalues());
  ClosedChainSpectrum s;
  s.values.assign(static_cast<std::size_t>(2 * x.n()), cplx(0.0, 0.0));
  for (Eigen::Index i = 0; i < ev.size(); ++i) s.values[static_cast<std::size_t>(i)] = ev(i);
  std::sort(s.values.begin(), s.values.end(), [](cplx a, cplx b) {
    double ma = std::abs(a), mb = std::abs(b);
    if (ma != mb) return ma > mb;
    return canonical_phase(a) < canonical_phase(b);
  });
  return s;
}

bool is_unitary(const CMat& U, double tol) {
  if (U.rows() != U.cols()) return false;
  CMat d = U.adjoint() * U - CMat::Identity(U.rows(), U.cols());
  return max_abs(d) <= tol;
}

OperatorPoint conjugate_unchecked(const CMat& U, const OperatorPoint& x) {
  OperatorPoint p;
  CMat m = U * x.mat_ * U.adjoint();
  p.mat_ = (m + m.adjoint()) / 2.0;
  p.n_ = x.n_;
  p.eigenvalues_ = x.eigenvalues_;
  p.factor_ = U * x.factor_;
  p.nonzero_ = x.nonzero_;
  p.rank_tol_ = x.rank_tol_;
  return p;
}

OperatorPoint conjugate(const CMat& U, const OperatorPoint& x) {
  if (U.rows() != x.f() || U.cols() != x.f())
    throw Error(ErrorKind::DimensionMismatch, "unitary and operator sizes differ");
  if (!is_unitary(U)) throw Error(ErrorKind::NotUnitary, "U^H U deviates from identity");
  return conjugate_unchecked(U, x);
}

int spin_space_dim(const OperatorPoint& x) { return x.rank(); }

int spin_intersection_dim(const OperatorPoint& x, const OperatorPoint& y, std::optional<double> rank_tol) {
  if (x.f() != y.f()) throw Error(ErrorKind::DimensionMismatch, "points live in different spaces");
  if (x.rank() == 0 || y.rank() == 0) return 0;
  CMat joined(x.f(), x.rank() + y.rank());
  joined << x.factor(), y.factor();
  Eigen::JacobiSVD<CMat> svd(joined);
  const RVec& sv = svd.singularValues();
  double tol = rank_tol ? *rank_tol : 1e-9 * sv(0);
  int joint = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++joint;
  return x.rank() + y.rank() - joint;
}

OperatorPoint random_point(int f, int n, Rng& rng) {
  if (f < 2 * n) throw Error(ErrorKind::InvalidArgument, "regular point needs f >= 2n");
  std::uniform_real_distribution<double> u(0.1, 1.0);
  RVec lam = RVec::Zero(f);
  double pos = 0, neg = 0;
  for (int i = 0; i < n; ++i) {
    lam(i) = u(rng);
    lam(n + i) = -u(rng);
    pos += lam(i);
    neg -= lam(n + i);
  }
  for (int i = 0; i < n; ++i) lam(i) *= (1.0 + neg) / pos;
  CMat V = haar_sample(f, rng);
  CMat m = V * lam.cast<cplx>().asDiagonal() * V.adjoint();
  return make_point((m + m.adjoint()) / 2.0, n);
}

CMat projector(const Eigen::VectorXcd& v) {
  Eigen::VectorXcd u = v / v.norm();
  return u * u.adjoint();
}

}  // namespace cfse
