#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <vector>

#include "cfse/rng.hpp"

namespace cfse {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

// Reduced closed-chain matrices never exceed 2n x 2n; n is capped at 8.
constexpr int kMaxChain = 16;
using ChainMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxChain, kMaxChain>;
using ChainVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxChain, 1>;

// A validated point of the operator space: Hermitian, trace one, at most n
// positive and n negative eigenvalues. The nonzero part of the spectral
// decomposition is cached as factor() * diag(nonzero_eigenvalues()) * factor()^H.
class OperatorPoint {
 public:
  OperatorPoint() = default;

  const CMat& matrix() const { return mat_; }
  int f() const { return static_cast<int>(mat_.rows()); }
  int n() const { return n_; }
  const RVec& eigenvalues() const { return eigenvalues_; }  // ascending, length f
  const CMat& factor() const { return factor_; }            // f x rank
  const RVec& nonzero_eigenvalues() const { return nonzero_; }
  int rank() const { return static_cast<int>(nonzero_.size()); }
  double rank_tol() const { return rank_tol_; }

 private:
  friend OperatorPoint make_point(const CMat&, int, std::optional<double>);
  friend OperatorPoint conjugate_unchecked(const CMat&, const OperatorPoint&);

  CMat mat_;
  int n_ = 0;
  RVec eigenvalues_;
  CMat factor_;
  RVec nonzero_;
  double rank_tol_ = 0.0;
};

// Errors: NotHermitian, TraceNotOne, SignatureViolation, InvalidArgument.
OperatorPoint make_point(const CMat& mat, int n, std::optional<double> rank_tol = std::nullopt);

// The 2n eigenvalues of xy, zero padded, sorted by descending modulus and then
// by phase in (-pi, pi].
struct ClosedChainSpectrum {
  std::vector<cplx> values;
};

ClosedChainSpectrum closed_chain_spectrum(const OperatorPoint& x, const OperatorPoint& y);

// Nonzero chain eigenvalues from the cached factors. Qy = U * Py when y is
// conjugated by U; passing Py itself gives the plain chain.
ChainVec chain_eigenvalues(const CMat& Px, const RVec& Dx, const CMat& Qy, const RVec& Dy);

// Eigenvalues of a small general complex matrix (closed form up to 2x2).
ChainVec small_eigenvalues(const ChainMat& a);

bool is_unitary(const CMat& U, double tol = 1e-10);

// U x U^{-1}. Errors: NotUnitary, DimensionMismatch.
OperatorPoint conjugate(const CMat& U, const OperatorPoint& x);
// Same without the unitarity check, for inner loops.
OperatorPoint conjugate_unchecked(const CMat& U, const OperatorPoint& x);

int spin_space_dim(const OperatorPoint& x);
int spin_intersection_dim(const OperatorPoint& x, const OperatorPoint& y,
                          std::optional<double> rank_tol = std::nullopt);

// Random point with n positive and n negative eigenvalues (regular, rank 2n).
OperatorPoint random_point(int f, int n, Rng& rng);

// Rank-one projector onto v (normalized internally).
CMat projector(const Eigen::VectorXcd& v);

}  // namespace cfse
