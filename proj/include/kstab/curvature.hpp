#pragma once

#include <vector>

#include "kstab/potentials.hpp"
#include "kstab/quadrature.hpp"

namespace kstab {

/// Pointwise curvature data at a probe point.
struct CurvatureSample {
  Eigen::VectorXd x;
  double weighted = 0.0;       // conformally weighted scalar curvature
  double unweighted = 0.0;     // -sum_ij H_{ij,ij}
  double jet_condition = 0.0;  // spectral condition number of Hess u at x
};

/// Weighted scalar curvature
///   s_{u,f}(x) = -f^{2m+1} sum_ij (H_ij / f^{2m-1})_{,ij}
/// with the divergence expanded analytically through the jet of u and the
/// exact derivatives of the affine weight.
double weighted_scalar_curvature(const SymplecticPotential& u,
                                 const AffineFunction& f,
                                 const Eigen::VectorXd& x);
/// Same from a precomputed jet at x (hot paths).
double weighted_scalar_curvature(const PotentialJet& jet,
                                 const AffineFunction& f,
                                 const Eigen::VectorXd& x);

/// Unweighted operator -sum_ij H_{ij,ij}.
double unweighted_scalar_curvature(const SymplecticPotential& u,
                                   const Eigen::VectorXd& x);
double unweighted_scalar_curvature(const PotentialJet& jet);

/// Curvature over the standard interior probe grid.
std::vector<CurvatureSample> sample_curvature(const SymplecticPotential& u,
                                              const AffineFunction& f,
                                              int per_axis = 16);

/// Residuals of the facet compatibility conditions H(xi) u_j = 0 and
/// grad(u_j^T H u_j)(xi) = 2 u_j for xi on facet F_j, obtained by evaluating
/// at inward offsets t in {1e-3, 1e-4, 1e-5} and extrapolating to t = 0.
struct BoundaryConditionResidual {
  int facet = 0;
  double h_residual = 0.0;   // max over facet samples of |H u_j| at t -> 0
  double dh_residual = 0.0;  // max over facet samples of |grad(u_j^T H u_j) - 2 u_j|
};

std::vector<BoundaryConditionResidual> boundary_condition_residuals(
    const SymplecticPotential& u, int samples_per_facet = 4);

/// Smooth scalar multiplier with closed-form derivatives, for the
/// divergence-identity checks.
struct ScalarField {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;

  static ScalarField constant(int dim, double c);
  /// 1 / f^k for an affine f positive on the domain of use.
  static ScalarField inverse_affine_power(const AffineFunction& f, int k);
};

/// | integral of sum_ij (psi H_ij)_{,ij} phi dmu
///   - integral of sum_ij psi H_ij phi_{,ij} dmu
///   + 2 * boundary integral of phi psi dsigma |
/// — the double integration-by-parts identity; small values certify that the
/// potential's inverse Hessian carries the boundary behavior the identity
/// needs.
double integration_by_parts_residual(const SymplecticPotential& u,
                                     const Polynomial& phi,
                                     const ScalarField& psi,
                                     const QuadratureScheme& s,
                                     Exec exec = Exec::parallel);

/// Weighted L2 distance of s_{u,f} from a target affine function:
/// sqrt(integral of (s_{u,f} - target)^2 dmu / f^{2m+1}).
double abreu_residual_norm(const SymplecticPotential& u,
                           const AffineFunction& f,
                           const AffineFunction& target,
                           const QuadratureScheme& s,
                           Exec exec = Exec::parallel);

}  // namespace kstab
