#include "kstab/curvature.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>

#include "kstab/errors.hpp"

namespace kstab {

namespace {

double pow_int(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

/// sum_ij d_i d_j H_ij from a jet.
double divergence2(const PotentialJet& jet) {
  const int m = static_cast<int>(jet.G.rows());
  double a = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a += jet.H2[i][j](i, j);
  return a;
}

/// (div H)_i = sum_j d_j H_ij.
Eigen::VectorXd divergence1(const PotentialJet& jet) {
  const int m = static_cast<int>(jet.G.rows());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) b[i] += jet.H1[j](i, j);
  return b;
}

/// Three-point Lagrange extrapolation of y(t) to t = 0.
double extrapolate_to_zero(const std::array<double, 3>& t,
                           const std::array<double, 3>& y) {
  double v = 0.0;
  for (int i = 0; i < 3; ++i) {
    double w = 1.0;
    for (int j = 0; j < 3; ++j)
      if (j != i) w *= (0.0 - t[j]) / (t[i] - t[j]);
    v += w * y[i];
  }
  return v;
}

}  // namespace

double weighted_scalar_curvature(const PotentialJet& jet,
                                 const AffineFunction& f,
                                 const Eigen::VectorXd& x) {
  const int m = static_cast<int>(jet.G.rows());
  const int q = 2 * m - 1;
  const double fx = f(x);
  if (!(fx > 0.0)) throw NonPositiveWeight("weight not positive at sample point");
  const Eigen::VectorXd& a = f.gradient;

  // W = f^-q and its first and second derivatives.
  const double finv = 1.0 / fx;
  const double W = pow_int(finv, q);
  const double W1c = -q * W * finv;            // coefficient of a_k in W_k
  const double W2c = q * (q + 1.0) * W * finv * finv;  // of a_k a_l in W_kl

  const double A = divergence2(jet);
  const Eigen::VectorXd B = divergence1(jet);

  double total = W * A;
  total += 2.0 * W1c * B.dot(a);
  total += W2c * a.dot(jet.H * a);
  return -pow_int(fx, q + 2) * total;
}

double weighted_scalar_curvature(const SymplecticPotential& u,
                                 const AffineFunction& f,
                                 const Eigen::VectorXd& x) {
  return weighted_scalar_curvature(potential_jet(u, x), f, x);
}

double unweighted_scalar_curvature(const PotentialJet& jet) {
  return -divergence2(jet);
}

double unweighted_scalar_curvature(const SymplecticPotential& u,
                                   const Eigen::VectorXd& x) {
  return unweighted_scalar_curvature(potential_jet(u, x));
}

std::vector<CurvatureSample> sample_curvature(const SymplecticPotential& u,
                                              const AffineFunction& f,
                                              int per_axis) {
  const LabelledPolytope& p = u.polytope();
  std::vector<CurvatureSample> out;
  for (const auto& x : interior_probe_grid(p, per_axis)) {
    PotentialJet jet = potential_jet(u, x);
    CurvatureSample s;
    s.x = x;
    s.weighted = weighted_scalar_curvature(jet, f, x);
    s.unweighted = unweighted_scalar_curvature(jet);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jet.G);
    s.jet_condition = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<BoundaryConditionResidual> boundary_condition_residuals(
    const SymplecticPotential& u, int samples_per_facet) {
  const LabelledPolytope& p = u.polytope();
  const int m = p.dim();
  const std::array<double, 3> offsets = {1e-3, 1e-4, 1e-5};
  std::vector<BoundaryConditionResidual> out;

  for (const auto& facet : p.facets()) {
    const AffineFunction& lab = p.labels()[static_cast<std::size_t>(facet.label)];
    const Eigen::VectorXd& n = lab.gradient;
    // Facet sample points: centroid plus points pulled toward each vertex,
    // staying in the facet's relative interior.
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(m);
    for (int vi : facet.vertices)
      centroid += p.vertices()[static_cast<std::size_t>(vi)];
    centroid /= static_cast<double>(facet.vertices.size());
    std::vector<Eigen::VectorXd> samples{centroid};
    for (int vi : facet.vertices) {
      if (static_cast<int>(samples.size()) >= samples_per_facet) break;
      samples.push_back(0.5 * centroid +
                        0.5 * p.vertices()[static_cast<std::size_t>(vi)]);
    }

    BoundaryConditionResidual res;
    res.facet = facet.label;
    for (const auto& xi : samples) {
      // componentwise values along the inward offsets, extrapolated to 0
      Eigen::MatrixXd hvals(m, 3), dvals(m, 3);
      for (int ti = 0; ti < 3; ++ti) {
        const Eigen::VectorXd x = xi + (offsets[static_cast<std::size_t>(ti)] /
                                        n.squaredNorm()) * n;
        PotentialJet jet = potential_jet(u, x);
        hvals.col(ti) = jet.H * n;
        for (int k = 0; k < m; ++k)
          dvals(k, ti) = n.dot(jet.H1[k] * n) - 2.0 * n[k];
      }
      Eigen::VectorXd h0(m), d0(m);
      for (int k = 0; k < m; ++k) {
        h0[k] = extrapolate_to_zero(offsets, {hvals(k, 0), hvals(k, 1), hvals(k, 2)});
        d0[k] = extrapolate_to_zero(offsets, {dvals(k, 0), dvals(k, 1), dvals(k, 2)});
      }
      res.h_residual = std::max(res.h_residual, h0.norm());
      res.dh_residual = std::max(res.dh_residual, d0.norm());
    }
    out.push_back(res);
  }
  return out;
}

// ---- ScalarField -----------------------------------------------------------

ScalarField ScalarField::constant(int dim, double c) {
  ScalarField s;
  s.value = [c](const Eigen::VectorXd&) { return c; };
  s.gradient = [dim](const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(dim).eval();
  };
  s.hessian = [dim](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Zero(dim, dim).eval();
  };
  return s;
}

ScalarField ScalarField::inverse_affine_power(const AffineFunction& f, int k) {
  const int dim = f.dim();
  ScalarField s;
  s.value = [f, k](const Eigen::VectorXd& x) {
    return pow_int(1.0 / f(x), k);
  };
  s.gradient = [f, k](const Eigen::VectorXd& x) {
    const double finv = 1.0 / f(x);
    return (-k * pow_int(finv, k + 1) * f.gradient).eval();
  };
  s.hessian = [f, k, dim](const Eigen::VectorXd& x) {
    (void)dim;
    const double finv = 1.0 / f(x);
    return (k * (k + 1.0) * pow_int(finv, k + 2) *
            (f.gradient * f.gradient.transpose()))
        .eval();
  };
  return s;
}

double integration_by_parts_residual(const SymplecticPotential& u,
                                     const Polynomial& phi,
                                     const ScalarField& psi,
                                     const QuadratureScheme& s, Exec exec) {
  const LabelledPolytope& p = u.polytope();
  auto grid = QuadratureGrid::build(p, s);

  // one interior pass: [ sum (psi H)_{,ij} phi , sum psi H_ij phi_{,ij} ]
  Eigen::VectorXd interior = grid.integrate_interior_multi(
      2,
      [&](const Eigen::VectorXd& x, double* out) {
        PotentialJet jet = potential_jet(u, x);
        const double pv = psi.value(x);
        const Eigen::VectorXd pg = psi.gradient(x);
        const Eigen::MatrixXd ph = psi.hessian(x);
        const double div_all = pv * divergence2(jet) +
                               2.0 * divergence1(jet).dot(pg) +
                               (jet.H.array() * ph.array()).sum();
        out[0] = div_all * phi.value(x);
        out[1] = pv * (jet.H.array() * phi.hessian(x).array()).sum();
      },
      exec);

  const double boundary = grid.integrate_boundary(
      [&](const Eigen::VectorXd& x) { return phi.value(x) * psi.value(x); },
      exec);

  return std::abs(interior[0] - interior[1] + 2.0 * boundary);
}

double abreu_residual_norm(const SymplecticPotential& u, const AffineFunction& f,
                           const AffineFunction& target,
                           const QuadratureScheme& s, Exec exec) {
  const LabelledPolytope& p = u.polytope();
  validate_weight(p, f);
  const int q = 2 * p.dim() - 1;
  auto grid = QuadratureGrid::build(p, s);
  const double sq = grid.integrate_interior(
      [&](const Eigen::VectorXd& x) {
        const double d = weighted_scalar_curvature(u, f, x) - target(x);
        return d * d / pow_int(f(x), q + 2);
      },
      exec);
  return std::sqrt(std::max(0.0, sq));
}

}  // namespace kstab
