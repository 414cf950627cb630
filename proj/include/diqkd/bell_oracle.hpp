#pragma once

// Bell-diagonal state machinery: the closed-form conditional collision
// entropy under a Z-basis measurement, the maximal CHSH violation of a
// Bell-diagonal state, the rank-two family saturating the collision-entropy
// bound, and an independent numeric H2 evaluator built from the purification.
//
// The numeric route deliberately shares no algebra with the closed forms:
// it builds the 16-dimensional pure state |Psi>_ABE, dephases Alice's qubit,
// traces out Bob and evaluates -log2 Tr(rhoE^{-1/2} rhoAE rhoE^{-1/2} rhoAE)
// with an eigendecomposition, so it can serve as an oracle for them.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

#include "diqkd/chsh_math.hpp"

namespace diqkd {

// eigenvalues in the Bell basis {Phi00, Phi01, Phi10, Phi11},
// |Phi_ij> = (I x X^i Z^j)(|00>+|11>)/sqrt(2)
struct BellDiagonalState {
  double lambda_00;
  double lambda_01;
  double lambda_10;
  double lambda_11;

  void validate() const {
    const double lams[4] = {lambda_00, lambda_01, lambda_10, lambda_11};
    double sum = 0.0;
    for (double l : lams) {
      if (!(l >= -1e-12))
        detail::domain_fail("BellDiagonalState: eigenvalues must be nonnegative", l);
      sum += l;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      detail::domain_fail("BellDiagonalState: eigenvalues must sum to 1", sum);
  }
};

// H2(A|E) = -log2(1/2 + sqrt(l00 l01) + sqrt(l10 l11)) for a Z measurement
inline double bell_diagonal_h2_closed_form(const BellDiagonalState& s) {
  s.validate();
  double v = 0.5 + std::sqrt(std::max(0.0, s.lambda_00 * s.lambda_01)) +
             std::sqrt(std::max(0.0, s.lambda_10 * s.lambda_11));
  return -std::log2(v);
}

// largest CHSH value reachable with optimal measurements on the state
inline ChshViolation bell_diagonal_beta_max(const BellDiagonalState& s) {
  s.validate();
  auto sq = [](double x) { return x * x; };
  double a = sq(s.lambda_00 - s.lambda_11) + sq(s.lambda_01 - s.lambda_10);
  double b = sq(s.lambda_00 - s.lambda_10) + sq(s.lambda_01 - s.lambda_11);
  return ChshViolation(2.0 * kSqrt2 * std::sqrt(std::max(a, b)));
}

// Rank-two state lambda00 = R cos(theta), lambda01 = R sin(theta) with
// cos(theta) + sin(theta) = 1/R, solved on theta in [0, pi/4] so that
// lambda00 >= lambda01 (the swapped solution is observationally identical).
// Its maximal violation is 2*sqrt(2)*R and its collision entropy saturates
// the min-entropy bound at that violation.
inline BellDiagonalState construct_rho_star(double r) {
  if (!(r > 1.0 / kSqrt2 && r <= 1.0))
    detail::domain_fail("construct_rho_star: R must lie in (1/sqrt(2), 1]", r);
  double theta = std::asin(1.0 / (kSqrt2 * r)) - std::acos(-1.0) / 4.0;
  // rounding can put theta a hair below 0 at R = 1
  double l00 = r * std::cos(theta);
  double l01 = std::max(0.0, r * std::sin(theta));
  double sum = l00 + l01;  // analytically 1
  return BellDiagonalState{l00 / sum, l01 / sum, 0.0, 0.0};
}

namespace detail {

using Cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;

// |Phi_ij> as a 4-vector over the product basis |ab>
inline Eigen::Vector4cd bell_vector(int i, int j) {
  Eigen::Vector4cd v = Eigen::Vector4cd::Zero();
  const double inv = 1.0 / kSqrt2;
  if (i == 0) {
    v(0) = inv;                      // |00>
    v(3) = (j == 0) ? inv : -inv;    // +-|11>
  } else {
    v(1) = inv;                      // |01>
    v(2) = (j == 0) ? inv : -inv;    // +-|10>
  }
  return v;
}

inline void require_hermitian(const CMat& m, const char* what) {
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::runtime_error(std::string("bell_oracle internal inconsistency: ") + what +
                             " not Hermitian within 1e-12");
}

}  // namespace detail

struct NumericH2Details {
  double h2;
  double trace_rho_ae;             // should be 1
  double min_conditional_eigenvalue;  // smallest eigenvalue over both blocks
};

// Purification route for H2(A|E) of a Bell-diagonal state measured in Z.
// Environment dimension 4; eigenvalues of rho_E below 1e-12 are treated as
// zero (inverse square root restricted to the support).
inline NumericH2Details numeric_h2_details(const BellDiagonalState& s) {
  using detail::CMat;
  s.validate();

  const double lams[4] = {s.lambda_00, s.lambda_01, s.lambda_10, s.lambda_11};
  const int idx[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};

  // |Psi>_ABE = sum_k sqrt(lam_k) |Phi_k>_AB |e_k>_E, index a*8 + b*4 + e
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(16);
  for (int k = 0; k < 4; ++k) {
    Eigen::Vector4cd phi = detail::bell_vector(idx[k][0], idx[k][1]);
    double amp = std::sqrt(std::max(0.0, lams[k]));
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) psi(a * 8 + b * 4 + k) += amp * phi(a * 2 + b);
  }

  CMat rho = psi * psi.adjoint();

  // Alice's Z measurement dephases her qubit: zero the a != a' blocks
  rho.block(0, 8, 8, 8).setZero();
  rho.block(8, 0, 8, 8).setZero();

  // partial trace over B -> rho_AE on the a*4 + e basis
  CMat rho_ae = CMat::Zero(8, 8);
  for (int a = 0; a < 2; ++a)
    for (int ap = 0; ap < 2; ++ap)
      for (int e = 0; e < 4; ++e)
        for (int ep = 0; ep < 4; ++ep) {
          detail::Cplx acc = 0.0;
          for (int b = 0; b < 2; ++b) acc += rho(a * 8 + b * 4 + e, ap * 8 + b * 4 + ep);
          rho_ae(a * 4 + e, ap * 4 + ep) = acc;
        }
  detail::require_hermitian(rho_ae, "rho_AE");

  CMat block0 = rho_ae.block(0, 0, 4, 4);
  CMat block1 = rho_ae.block(4, 4, 4, 4);
  CMat rho_e = block0 + block1;
  detail::require_hermitian(rho_e, "rho_E");

  Eigen::SelfAdjointEigenSolver<CMat> es(rho_e);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("bell_oracle internal inconsistency: eigensolver failed");

  CMat inv_sqrt = CMat::Zero(4, 4);
  for (int i = 0; i < 4; ++i) {
    double w = es.eigenvalues()(i);
    if (w > 1e-12)
      inv_sqrt += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint() / std::sqrt(w);
  }

  CMat lift = CMat::Zero(8, 8);
  lift.block(0, 0, 4, 4) = inv_sqrt;
  lift.block(4, 4, 4, 4) = inv_sqrt;

  double tr = (lift * rho_ae * lift * rho_ae).trace().real();

  double min_eig = 0.0;
  for (const CMat& blk : {block0, block1}) {
    Eigen::SelfAdjointEigenSolver<CMat> bs(blk);
    min_eig = std::min(min_eig, bs.eigenvalues().minCoeff());
  }

  return NumericH2Details{-std::log2(tr), rho_ae.trace().real(), min_eig};
}

inline double numeric_h2_oracle(const BellDiagonalState& s) { return numeric_h2_details(s).h2; }

}  // namespace diqkd
