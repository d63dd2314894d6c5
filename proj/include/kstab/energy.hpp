#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "kstab/stability.hpp"

namespace kstab {

/// Relative energy split into its defining parts; total is always the
/// literal difference of the two stored parts.
struct EnergyValue {
  double total = 0.0;
  double futaki_part = 0.0;   // invariant evaluated on the potential
  double entropy_part = 0.0;  // weighted log-det integral relative to the
                              // canonical potential
};

/// Relative energy of a canonical-flagged potential. The reference affine
/// function is solved internally from the weighted moment system.
/// Throws NotConvex when the potential has no valid convexity certificate.
EnergyValue k_energy(const SymplecticPotential& u, const AffineFunction& f,
                     const QuadratureScheme& scheme, Exec exec = Exec::parallel);

/// Deterministic coefficient ordering for polynomial perturbations: all
/// monomial exponent tuples with 2 <= total degree <= max_degree, graded by
/// degree then lexicographic. Affine directions are excluded (the energy is
/// invariant along them).
std::vector<std::vector<int>> perturbation_basis(int dim, int max_degree);

/// Partial derivatives of the energy with respect to the coefficients of
/// the given monomial basis directions, evaluated with the same
/// discretization as k_energy (finite differences of k_energy reproduce
/// this vector). Descent moves along the negative of it.
Eigen::VectorXd k_energy_gradient(const SymplecticPotential& u,
                                  const AffineFunction& f,
                                  const std::vector<std::vector<int>>& basis,
                                  const QuadratureScheme& scheme,
                                  Exec exec = Exec::parallel);

/// Minimum discrete second difference of the energy along the straight
/// segment between two potentials (steps + 1 evaluation points); convexity
/// of the energy makes it nonnegative up to quadrature noise.
/// Throws NotConvex when an intermediate potential loses its certificate.
double k_energy_convexity_check(const SymplecticPotential& u1,
                                const SymplecticPotential& u2,
                                const AffineFunction& f, int steps,
                                const QuadratureScheme& scheme,
                                Exec exec = Exec::parallel);

struct MinimizeOptions {
  int max_iters = 500;
  double residual_tol = 1e-5;   // on the weighted L2 curvature residual
  double gradient_tol = 1e-7;   // on the coefficient gradient norm
  double initial_step = 1.0;
  double backtrack = 0.5;       // step shrink factor in the line search
  double min_step = 1e-12;      // below this the search gives up
  int degree = 4;               // perturbation degree cap (coefficient space)
  int probe_per_axis = 32;      // convexity certificate resolution
  std::uint64_t seed = 1;       // recorded for reproducibility
};

struct IterateRecord {
  int iter = 0;
  double energy = 0.0;
  double residual = 0.0;
  double step = 0.0;
};

struct MinimizeResult {
  SymplecticPotential final_potential;
  std::vector<IterateRecord> history;  // energies strictly nonincreasing
  std::string termination;  // "ResidualTol" | "GradientTol" | "MaxItersExceeded"
  double final_futaki = 0.0;            // invariant at the final iterate
  double solution_identity_target = 0.0;  // dim * weighted volume integral;
                                          // matches final_futaki at a solution
};

/// Descent on the perturbation coefficients (canonical part frozen) with a
/// fixed-metric preconditioner and a backtracking line search that rejects
/// energy increases and convexity-certificate failures.
/// Throws LostConvexity when no acceptable step at or above min_step exists.
MinimizeResult minimize_k_energy(std::shared_ptr<const LabelledPolytope> p,
                                 const AffineFunction& f,
                                 const Polynomial& initial_perturbation,
                                 const MinimizeOptions& opt,
                                 const QuadratureScheme& scheme);

/// CSV serialization of the iterate history (fixed header:
/// iter,energy,residual,step).
std::string history_csv(const MinimizeResult& result);

}  // namespace kstab
