#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kstab/potentials.hpp"
#include "kstab/quadrature.hpp"

namespace kstab {

/// The affine function solving the weighted projection system, with the
/// linear-system diagnostics.
struct ExtremalAffineSolution {
  AffineFunction s;       // extremal affine function a_0 + sum a_j x_j
  Eigen::MatrixXd gram;   // (m+1)x(m+1) weighted moment matrix, SPD
  Eigen::VectorXd rhs;    // doubled weighted boundary moments
  double residual = 0.0;  // |gram a - rhs|_2
  double condition = 0.0; // spectral condition number of the Gram matrix
};

/// Solve for the affine function against which the invariant below vanishes
/// on all affine test functions. Throws IllConditionedGram when the moment
/// matrix has condition number above 1e12.
ExtremalAffineSolution extremal_affine(const LabelledPolytope& p,
                                       const AffineFunction& f,
                                       const QuadratureScheme& scheme,
                                       Exec exec = Exec::parallel);

/// Invariant 2*int_boundary v dsigma/f^(2m-1) - int s v dmu/f^(2m+1).
/// Piecewise linear test functions are integrated exactly piece by piece on
/// the subregions where each piece attains the max; potentials use their
/// continuous boundary extension.
double futaki(const LabelledPolytope& p, const AffineFunction& f,
              const AffineFunction& s, const PLConvexFunction& v,
              const QuadratureScheme& scheme, Exec exec = Exec::parallel);
double futaki(const LabelledPolytope& p, const AffineFunction& f,
              const AffineFunction& s, const AffineFunction& v,
              const QuadratureScheme& scheme, Exec exec = Exec::parallel);
double futaki(const AffineFunction& f, const AffineFunction& s,
              const SymplecticPotential& v, const QuadratureScheme& scheme,
              Exec exec = Exec::parallel);

/// Boundary seminorm int_boundary v dsigma/f^(2m-1) of a normalized convex
/// function. Throws NotNormalized when v(x0) is away from 0 beyond 1e-12 or
/// v dips below -1e-10 on the interior probe grid.
double boundary_norm(const LabelledPolytope& p, const AffineFunction& f,
                     const PLConvexFunction& v, const QuadratureScheme& scheme,
                     Exec exec = Exec::parallel);
double boundary_norm(const LabelledPolytope& p, const AffineFunction& f,
                     const SymplecticPotential& v,
                     const QuadratureScheme& scheme,
                     Exec exec = Exec::parallel);

/// Weighted pairing of two affine functions after centering each to zero
/// weighted mean; symmetric and positive definite on centered affines.
double futaki_mabuchi_form(const LabelledPolytope& p, const AffineFunction& f,
                           const AffineFunction& phi1,
                           const AffineFunction& phi2,
                           const QuadratureScheme& scheme,
                           Exec exec = Exec::parallel);

/// Families scanned for the worst invariant/norm ratio.
struct ScanConfig {
  int crease_directions = 56;  // sphere-grid directions for simple creases
  int crease_offsets = 5;      // offsets per direction (first passes x0)
  int random_count = 220;      // random max-of-affine samples
  int pieces_per_sample = 3;   // affine pieces per random sample
  std::uint64_t seed = 1;
};

struct ScanSample {
  std::string family;  // "crease" or "randmax"
  std::string params;  // family parameters, ';'-separated
  double futaki = 0.0;
  double bnorm = 0.0;
  double ratio = 0.0;
};

struct StabilityReport {
  int attempted = 0;  // samples generated (kept + degenerate-norm skips)
  std::vector<ScanSample> samples;
  double lambda_hat = 0.0;  // min ratio over samples; an upper estimate of
                            // the true stability constant
  int argmin = -1;          // index of the minimizing sample
  std::uint64_t seed = 0;
  QuadratureScheme scheme;
};

/// Seeded deterministic scan of crease and random piecewise linear test
/// functions; samples with boundary norm below 1e-10 are skipped.
StabilityReport stability_scan(const LabelledPolytope& p,
                               const AffineFunction& f, const AffineFunction& s,
                               const ScanConfig& cfg,
                               const QuadratureScheme& scheme);

/// CSV serialization of a report (fixed header:
/// sample_id,family,params,futaki,bnorm,ratio).
std::string report_csv(const StabilityReport& report);

}  // namespace kstab
