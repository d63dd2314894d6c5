#include "kstab/energy.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <utility>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "kstab/curvature.hpp"
#include "kstab/errors.hpp"
#include "kstab/format.hpp"

namespace kstab {

namespace {

double pow_int(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

/// Canonical-flag and convexity gate shared by the energy entry points.
void require_admissible(const SymplecticPotential& u, int per_axis) {
  if (!u.canonical())
    throw ValidationError(
        "energy is defined for potentials with the canonical boundary "
        "behaviour (canonical flag on)");
  if (!u.certificate() && !u.try_certify_convexity(per_axis))
    throw NotConvex("potential failed its convexity certificate");
}

void check_basis(int dim, const std::vector<std::vector<int>>& basis) {
  for (const auto& e : basis) {
    if (static_cast<int>(e.size()) != dim)
      throw ValidationError("basis exponent tuple has wrong dimension");
    int total = 0;
    for (int k : e) {
      if (k < 0) throw ValidationError("basis exponent must be >= 0");
      total += k;
    }
    if (total < 2)
      throw ValidationError(
          "basis monomials must have degree >= 2 (the energy is invariant "
          "along affine directions)");
  }
}

Polynomial monomial(int dim, const std::vector<int>& e) {
  return Polynomial(dim, {MonomialTerm{e, 1.0}});
}

/// Third and fourth partials of a polynomial at x, packed as the derivative
/// tensors of its Hessian: d3[k](i,j) and d4[k][l](i,j).
void hessian_derivatives(const Polynomial& b, const Eigen::VectorXd& x, int m,
                         std::vector<Eigen::MatrixXd>& d3,
                         std::vector<std::vector<Eigen::MatrixXd>>& d4) {
  d3.assign(static_cast<std::size_t>(m), Eigen::MatrixXd::Zero(m, m));
  d4.assign(static_cast<std::size_t>(m),
            std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(m),
                                         Eigen::MatrixXd::Zero(m, m)));
  std::vector<int> order(static_cast<std::size_t>(m), 0);
  for (int k = 0; k < m; ++k) {
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        order.assign(static_cast<std::size_t>(m), 0);
        order[static_cast<std::size_t>(i)] += 1;
        order[static_cast<std::size_t>(j)] += 1;
        order[static_cast<std::size_t>(k)] += 1;
        const double v = b.partial(x, order);
        d3[static_cast<std::size_t>(k)](i, j) = v;
        d3[static_cast<std::size_t>(k)](j, i) = v;
      }
    for (int l = k; l < m; ++l)
      for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
          order.assign(static_cast<std::size_t>(m), 0);
          order[static_cast<std::size_t>(i)] += 1;
          order[static_cast<std::size_t>(j)] += 1;
          order[static_cast<std::size_t>(k)] += 1;
          order[static_cast<std::size_t>(l)] += 1;
          const double v = b.partial(x, order);
          auto& Mkl = d4[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
          Mkl(i, j) = v;
          Mkl(j, i) = v;
          if (l != k) {
            auto& Mlk =
                d4[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)];
            Mlk(i, j) = v;
            Mlk(j, i) = v;
          }
        }
  }
}

}  // namespace

std::vector<std::vector<int>> perturbation_basis(int dim, int max_degree) {
  if (dim < 1) throw ValidationError("basis dimension must be >= 1");
  if (max_degree < 2)
    throw ValidationError("perturbation degree cap must be >= 2");
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(dim), 0);
  const std::function<void(int, int)> gen = [&](int pos, int rem) {
    if (pos == dim - 1) {
      cur[static_cast<std::size_t>(pos)] = rem;
      out.push_back(cur);
      return;
    }
    for (int e = 0; e <= rem; ++e) {
      cur[static_cast<std::size_t>(pos)] = e;
      gen(pos + 1, rem - e);
    }
  };
  for (int d = 2; d <= max_degree; ++d) gen(0, d);
  return out;
}

EnergyValue k_energy(const SymplecticPotential& u, const AffineFunction& f,
                     const QuadratureScheme& scheme, Exec exec) {
  const LabelledPolytope& p = u.polytope();
  validate_weight(p, f);
  require_admissible(u, 32);
  const int q = 2 * p.dim() - 1;

  const ExtremalAffineSolution ext = extremal_affine(p, f, scheme, exec);

  EnergyValue ev;
  ev.futaki_part = futaki(f, ext.s, u, scheme, exec);
  if (!u.perturbation().zero()) {
    // One log of the Hessian determinant ratio per node; forming the ratio
    // as det(G0^{-1} G) cancels the boundary blowup of both determinants
    // before the log is taken.
    const SymplecticPotential u0 = guillemin_potential(u.polytope_ptr());
    const QuadratureGrid grid = QuadratureGrid::build(p, scheme);
    ev.entropy_part = grid.integrate_interior(
        [&](const Eigen::VectorXd& x) {
          Eigen::LLT<Eigen::MatrixXd> llt(u0.hessian_at(x));
          if (llt.info() != Eigen::Success)
            throw NotConvexAt("canonical Hessian not positive definite");
          const double ratio = llt.solve(u.hessian_at(x)).determinant();
          if (!(ratio > 0.0))
            throw NotConvexAt("Hessian determinant ratio not positive");
          return std::log(ratio) / pow_int(f(x), q);
        },
        exec);
  }
  ev.total = ev.futaki_part - ev.entropy_part;
  return ev;
}

Eigen::VectorXd k_energy_gradient(const SymplecticPotential& u,
                                  const AffineFunction& f,
                                  const std::vector<std::vector<int>>& basis,
                                  const QuadratureScheme& scheme, Exec exec) {
  const LabelledPolytope& p = u.polytope();
  validate_weight(p, f);
  require_admissible(u, 32);
  const int m = p.dim();
  const int q = 2 * m - 1;
  check_basis(m, basis);
  const int nb = static_cast<int>(basis.size());
  if (nb == 0) return Eigen::VectorXd();

  std::vector<Polynomial> bpoly;
  bpoly.reserve(basis.size());
  for (const auto& e : basis) bpoly.push_back(monomial(m, e));

  const ExtremalAffineSolution ext = extremal_affine(p, f, scheme, exec);
  const QuadratureGrid grid = QuadratureGrid::build(p, scheme);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(m, m);

  // Interior components per basis element b: the invariant part -s b/f^{q+2}
  // and the entropy derivative tr(G^{-1} Hess b)/f^q.
  const Eigen::VectorXd inter = grid.integrate_interior_multi(
      2 * nb,
      [&](const Eigen::VectorXd& x, double* out) {
        const double fx = f(x);
        const double fq = pow_int(fx, q);
        const double fq2 = fq * fx * fx;
        const double sv = ext.s(x);
        Eigen::LLT<Eigen::MatrixXd> llt(u.hessian_at(x));
        if (llt.info() != Eigen::Success)
          throw NotConvexAt("Hessian not positive definite at a node");
        const Eigen::MatrixXd Hinv = llt.solve(id);
        for (int b = 0; b < nb; ++b) {
          const auto& bp = bpoly[static_cast<std::size_t>(b)];
          out[b] = -sv * bp.value(x) / fq2;
          out[nb + b] = Hinv.cwiseProduct(bp.hessian(x)).sum() / fq;
        }
      },
      exec);
  const Eigen::VectorXd bdry = grid.integrate_boundary_multi(
      nb,
      [&](const Eigen::VectorXd& x, int, double* out) {
        const double fq = pow_int(f(x), q);
        for (int b = 0; b < nb; ++b)
          out[b] = 2.0 * bpoly[static_cast<std::size_t>(b)].value(x) / fq;
      },
      exec);

  Eigen::VectorXd g(nb);
  for (int b = 0; b < nb; ++b) g[b] = bdry[b] + inter[b] - inter[nb + b];
  return g;
}

double k_energy_convexity_check(const SymplecticPotential& u1,
                                const SymplecticPotential& u2,
                                const AffineFunction& f, int steps,
                                const QuadratureScheme& scheme, Exec exec) {
  if (steps < 2) throw ValidationError("convexity check needs steps >= 2");
  if (u1.polytope_ptr() != u2.polytope_ptr())
    throw ValidationError("segment endpoints must share one polytope object");
  if (u1.canonical() != u2.canonical())
    throw ValidationError("segment endpoints must share the canonical flag");
  const int m = u1.polytope().dim();

  std::vector<double> E;
  E.reserve(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    Polynomial mix(m, {});
    for (const auto& term : u1.perturbation().terms())
      mix.add_term(term.exponents, (1.0 - t) * term.coeff);
    for (const auto& term : u2.perturbation().terms())
      mix.add_term(term.exponents, t * term.coeff);
    const SymplecticPotential ut = u1.with_perturbation(std::move(mix));
    if (!ut.try_certify_convexity(16))
      throw NotConvex("segment potential lost convexity at t = " +
                      shortest_double(t));
    E.push_back(k_energy(ut, f, scheme, exec).total);
  }
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < E.size(); ++i)
    worst = std::min(worst, E[i + 1] - 2.0 * E[i] + E[i - 1]);
  return worst;
}

// ---- minimization ----------------------------------------------------------

namespace {

/// Per-node data frozen at minimizer start: canonical jet tensors, basis
/// derivative tensors, and the weighted node factors.
struct NodeCache {
  Eigen::VectorXd x;
  double wq = 0.0;       // node weight / f^q
  double wq2 = 0.0;      // node weight / f^{q+2}
  double sval = 0.0;     // target affine function at the node
  double logdet0 = 0.0;  // log det of the canonical Hessian
  Eigen::MatrixXd G0, H0;
  std::vector<Eigen::MatrixXd> G01;
  std::vector<std::vector<Eigen::MatrixXd>> G02;
  std::vector<Eigen::MatrixXd> HB;                        // per basis element
  std::vector<std::vector<Eigen::MatrixXd>> B3;           // basis -> k
  std::vector<std::vector<std::vector<Eigen::MatrixXd>>> B4;  // basis -> k,l
};

/// Discretized energy restricted to the perturbation coefficient space,
/// with everything coefficient-independent precomputed on the grid. The
/// reductions run in fixed node order, so evaluations are deterministic and
/// independent of the worker count.
class EnergyModel {
 public:
  EnergyModel(std::shared_ptr<const LabelledPolytope> p, const AffineFunction& f,
              std::vector<std::vector<int>> basis,
              const QuadratureScheme& scheme);

  double futaki_of(const Eigen::VectorXd& c) const {
    return fut0_ + futb_.dot(c);
  }
  double identity_target() const { return identity_target_; }

  /// Energy at coefficients c; false when some node Hessian loses positive
  /// definiteness (the energy is +infinity there).
  bool energy(const Eigen::VectorXd& c, double* out) const;
  /// Exact derivative of the discrete energy with respect to c.
  Eigen::VectorXd gradient(const Eigen::VectorXd& c) const;
  /// Weighted L2 distance of the curvature from the target affine function.
  double residual(const Eigen::VectorXd& c) const;
  /// Second variation of the energy at the canonical potential (the fixed
  /// preconditioning metric).
  Eigen::MatrixXd metric() const;

 private:
  AffineFunction f_;
  int m_ = 0, q_ = 0, nb_ = 0;
  Eigen::MatrixXd id_;
  double fut0_ = 0.0;
  Eigen::VectorXd futb_;
  double identity_target_ = 0.0;
  std::vector<NodeCache> nodes_;
};

EnergyModel::EnergyModel(std::shared_ptr<const LabelledPolytope> p,
                         const AffineFunction& f,
                         std::vector<std::vector<int>> basis,
                         const QuadratureScheme& scheme)
    : f_(f), m_(p->dim()), q_(2 * p->dim() - 1),
      nb_(static_cast<int>(basis.size())),
      id_(Eigen::MatrixXd::Identity(m_, m_)) {
  std::vector<Polynomial> bpoly;
  bpoly.reserve(basis.size());
  for (const auto& e : basis) bpoly.push_back(monomial(m_, e));

  const ExtremalAffineSolution ext = extremal_affine(*p, f_, scheme,
                                                     Exec::parallel);
  const SymplecticPotential u0 = guillemin_potential(p);
  const QuadratureGrid grid = QuadratureGrid::build(*p, scheme);

  // Linear part of the energy: invariant of the canonical potential, the
  // per-basis invariant coefficients, and the weighted volume entering the
  // solution identity.
  const Eigen::VectorXd inter = grid.integrate_interior_multi(
      nb_ + 2,
      [&](const Eigen::VectorXd& x, double* out) {
        const double fx = f_(x);
        const double fq = pow_int(fx, q_);
        const double fq2 = fq * fx * fx;
        const double sv = ext.s(x);
        for (int b = 0; b < nb_; ++b)
          out[b] = -sv * bpoly[static_cast<std::size_t>(b)].value(x) / fq2;
        out[nb_] = -sv * u0.value(x) / fq2;
        out[nb_ + 1] = 1.0 / fq;
      },
      Exec::parallel);
  const Eigen::VectorXd bdry = grid.integrate_boundary_multi(
      nb_ + 1,
      [&](const Eigen::VectorXd& x, int, double* out) {
        const double fq = pow_int(f_(x), q_);
        for (int b = 0; b < nb_; ++b)
          out[b] = 2.0 * bpoly[static_cast<std::size_t>(b)].value(x) / fq;
        out[nb_] = 2.0 * u0.boundary_value(x) / fq;
      },
      Exec::parallel);
  futb_.resize(nb_);
  for (int b = 0; b < nb_; ++b) futb_[b] = bdry[b] + inter[b];
  fut0_ = bdry[nb_] + inter[nb_];
  identity_target_ = m_ * inter[nb_ + 1];

  const InteriorNodes& in = grid.interior();
  const std::size_t n = in.x.size();
  nodes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    NodeCache& nc = nodes_[i];
    nc.x = in.x[i];
    const double fx = f_(nc.x);
    const double fq = pow_int(fx, q_);
    nc.wq = in.w[i] / fq;
    nc.wq2 = in.w[i] / (fq * fx * fx);
    nc.sval = ext.s(nc.x);
    PotentialJet j0 = potential_jet(u0, nc.x);
    nc.G0 = std::move(j0.G);
    nc.H0 = std::move(j0.H);
    nc.G01 = std::move(j0.G1);
    nc.G02 = std::move(j0.G2);
    Eigen::LLT<Eigen::MatrixXd> llt(nc.G0);
    double logdet = 0.0;
    for (int k = 0; k < m_; ++k) logdet += std::log(llt.matrixLLT()(k, k));
    nc.logdet0 = 2.0 * logdet;
    nc.HB.resize(basis.size());
    nc.B3.resize(basis.size());
    nc.B4.resize(basis.size());
    for (std::size_t b = 0; b < basis.size(); ++b) {
      nc.HB[b] = bpoly[b].hessian(nc.x);
      hessian_derivatives(bpoly[b], nc.x, m_, nc.B3[b], nc.B4[b]);
    }
  }
}

bool EnergyModel::energy(const Eigen::VectorXd& c, double* out) const {
  const int n = static_cast<int>(nodes_.size());
  std::vector<double> buf(static_cast<std::size_t>(n), 0.0);
  int ok = 1;
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) reduction(&& : ok) \
    if (!omp_in_parallel())
#endif
  for (int i = 0; i < n; ++i) {
    const NodeCache& nc = nodes_[static_cast<std::size_t>(i)];
    Eigen::MatrixXd G = nc.G0;
    for (int b = 0; b < nb_; ++b)
      if (c[b] != 0.0) G.noalias() += c[b] * nc.HB[static_cast<std::size_t>(b)];
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) {
      ok = 0;
      continue;
    }
    double logdet = 0.0;
    for (int k = 0; k < m_; ++k) logdet += std::log(llt.matrixLLT()(k, k));
    buf[static_cast<std::size_t>(i)] = nc.wq * (2.0 * logdet - nc.logdet0);
  }
  if (!ok) return false;
  *out = fut0_ + futb_.dot(c) - compensated_sum(buf);
  return true;
}

Eigen::VectorXd EnergyModel::gradient(const Eigen::VectorXd& c) const {
  const int n = static_cast<int>(nodes_.size());
  std::vector<double> buf(static_cast<std::size_t>(n) *
                              static_cast<std::size_t>(nb_),
                          0.0);
  int ok = 1;
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) reduction(&& : ok) \
    if (!omp_in_parallel())
#endif
  for (int i = 0; i < n; ++i) {
    const NodeCache& nc = nodes_[static_cast<std::size_t>(i)];
    Eigen::MatrixXd G = nc.G0;
    for (int b = 0; b < nb_; ++b)
      if (c[b] != 0.0) G.noalias() += c[b] * nc.HB[static_cast<std::size_t>(b)];
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) {
      ok = 0;
      continue;
    }
    const Eigen::MatrixXd Hinv = llt.solve(id_);
    for (int b = 0; b < nb_; ++b)
      buf[static_cast<std::size_t>(i) * static_cast<std::size_t>(nb_) +
          static_cast<std::size_t>(b)] =
          nc.wq * Hinv.cwiseProduct(nc.HB[static_cast<std::size_t>(b)]).sum();
  }
  if (!ok)
    throw NotConvex("Hessian lost positive definiteness at a quadrature node");
  Eigen::VectorXd g(nb_);
  std::vector<double> col(static_cast<std::size_t>(n));
  for (int b = 0; b < nb_; ++b) {
    for (int i = 0; i < n; ++i)
      col[static_cast<std::size_t>(i)] =
          buf[static_cast<std::size_t>(i) * static_cast<std::size_t>(nb_) +
              static_cast<std::size_t>(b)];
    g[b] = futb_[b] - compensated_sum(col);
  }
  return g;
}

double EnergyModel::residual(const Eigen::VectorXd& c) const {
  const int n = static_cast<int>(nodes_.size());
  std::vector<double> buf(static_cast<std::size_t>(n), 0.0);
  std::vector<std::string> errors(static_cast<std::size_t>(n));
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) if (!omp_in_parallel())
#endif
  for (int i = 0; i < n; ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    try {
      const NodeCache& nc = nodes_[si];
      PotentialJet jet;
      jet.G = nc.G0;
      jet.G1 = nc.G01;
      jet.G2 = nc.G02;
      for (int b = 0; b < nb_; ++b) {
        if (c[b] == 0.0) continue;
        const std::size_t sb = static_cast<std::size_t>(b);
        jet.G.noalias() += c[b] * nc.HB[sb];
        for (int k = 0; k < m_; ++k) {
          jet.G1[static_cast<std::size_t>(k)].noalias() +=
              c[b] * nc.B3[sb][static_cast<std::size_t>(k)];
          for (int l = 0; l < m_; ++l)
            jet.G2[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)]
                .noalias() +=
                c[b] * nc.B4[sb][static_cast<std::size_t>(k)]
                             [static_cast<std::size_t>(l)];
        }
      }
      complete_jet_inverses(jet, nc.x);
      const double d = weighted_scalar_curvature(jet, f_, nc.x) - nc.sval;
      buf[si] = nc.wq2 * d * d;
    } catch (const std::exception& e) {
      errors[si] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty())
      throw NumericalError("curvature residual evaluation failed: " + e);
  return std::sqrt(std::max(0.0, compensated_sum(buf)));
}

Eigen::MatrixXd EnergyModel::metric() const {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nb_, nb_);
  Eigen::MatrixXd K(m_, m_);
  for (const NodeCache& nc : nodes_) {
    for (int a = 0; a < nb_; ++a) {
      K.noalias() = nc.H0 * nc.HB[static_cast<std::size_t>(a)] * nc.H0;
      for (int b = a; b < nb_; ++b)
        M(a, b) +=
            nc.wq * K.cwiseProduct(nc.HB[static_cast<std::size_t>(b)]).sum();
    }
  }
  for (int a = 0; a < nb_; ++a)
    for (int b = a + 1; b < nb_; ++b) M(b, a) = M(a, b);
  return M;
}

}  // namespace

MinimizeResult minimize_k_energy(std::shared_ptr<const LabelledPolytope> p,
                                 const AffineFunction& f,
                                 const Polynomial& initial_perturbation,
                                 const MinimizeOptions& opt,
                                 const QuadratureScheme& scheme) {
  if (!p) throw ValidationError("minimization requires a polytope");
  validate_weight(*p, f);
  if (opt.max_iters < 0) throw ValidationError("max_iters must be >= 0");
  if (!(opt.residual_tol > 0.0) || !(opt.gradient_tol > 0.0))
    throw ValidationError("tolerances must be positive");
  if (!(opt.initial_step > 0.0))
    throw ValidationError("initial step must be positive");
  if (!(opt.backtrack > 0.0) || !(opt.backtrack < 1.0))
    throw ValidationError("backtracking factor must lie in (0, 1)");
  if (!(opt.min_step > 0.0) || opt.min_step > opt.initial_step)
    throw ValidationError("minimum step must lie in (0, initial step]");
  if (opt.degree < 2)
    throw ValidationError("perturbation degree cap must be >= 2");
  if (opt.probe_per_axis < 2)
    throw ValidationError("probe resolution must be >= 2");

  const int m = p->dim();
  const std::vector<std::vector<int>> basis = perturbation_basis(m, opt.degree);
  const int nb = static_cast<int>(basis.size());

  std::map<std::vector<int>, int> index;
  for (int b = 0; b < nb; ++b) index.emplace(basis[static_cast<std::size_t>(b)], b);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(nb);
  if (!initial_perturbation.zero()) {
    if (initial_perturbation.dim() != m)
      throw ValidationError("initial perturbation has wrong dimension");
    for (const auto& term : initial_perturbation.terms()) {
      const auto it = index.find(term.exponents);
      if (it == index.end())
        throw ValidationError(
            "initial perturbation has a monomial outside the coefficient "
            "space (total degrees 2.." + std::to_string(opt.degree) + ")");
      c[it->second] += term.coeff;
    }
  }

  const auto poly_of = [&](const Eigen::VectorXd& cc) {
    Polynomial q(m, {});
    for (int b = 0; b < nb; ++b)
      q.add_term(basis[static_cast<std::size_t>(b)], cc[b]);
    return q;
  };

  SymplecticPotential current(p, true, poly_of(c));
  if (!current.try_certify_convexity(opt.probe_per_axis))
    throw NotConvex("initial potential failed its convexity certificate");

  const EnergyModel model(p, f, basis, scheme);

  // Fixed preconditioner: the energy's second variation at the canonical
  // potential (positive definite since distinct monomial Hessians stay
  // independent as functions on the node set).
  Eigen::LLT<Eigen::MatrixXd> metric_llt(model.metric());
  const bool have_metric = metric_llt.info() == Eigen::Success;

  double E = 0.0;
  if (!model.energy(c, &E))
    throw NotConvex(
        "initial potential is not positive definite on the quadrature nodes");

  MinimizeResult res{current, {}, "", 0.0, 0.0};
  double last_step = 0.0;
  for (int iter = 0;; ++iter) {
    const double r = model.residual(c);
    res.history.push_back({iter, E, r, last_step});
    if (r < opt.residual_tol) {
      res.termination = "ResidualTol";
      break;
    }
    const Eigen::VectorXd g = model.gradient(c);
    if (g.norm() < opt.gradient_tol) {
      res.termination = "GradientTol";
      break;
    }
    if (iter >= opt.max_iters) {
      res.termination = "MaxItersExceeded";
      break;
    }

    Eigen::VectorXd d = have_metric ? Eigen::VectorXd(-metric_llt.solve(g))
                                    : Eigen::VectorXd(-g);
    double slope = g.dot(d);
    if (!(slope < 0.0)) {  // fall back to steepest descent
      d = -g;
      slope = -g.squaredNorm();
    }

    bool accepted = false;
    for (double t = opt.initial_step; t >= opt.min_step; t *= opt.backtrack) {
      const Eigen::VectorXd c_try = c + t * d;
      double E_try = 0.0;
      if (!model.energy(c_try, &E_try)) continue;
      if (E_try > E + 1e-4 * t * slope) continue;
      SymplecticPotential cand(p, true, poly_of(c_try));
      if (!cand.try_certify_convexity(opt.probe_per_axis)) continue;
      c = c_try;
      E = E_try;
      current = std::move(cand);
      last_step = t;
      accepted = true;
      break;
    }
    if (!accepted)
      throw LostConvexity(
          "line search found no acceptable step above the minimum step size");
  }

  res.final_potential = current;
  res.final_futaki = model.futaki_of(c);
  res.solution_identity_target = model.identity_target();
  return res;
}

std::string history_csv(const MinimizeResult& result) {
  std::string out = "iter,energy,residual,step\n";
  for (const auto& row : result.history) {
    out += std::to_string(row.iter);
    out += ',';
    out += shortest_double(row.energy);
    out += ',';
    out += shortest_double(row.residual);
    out += ',';
    out += shortest_double(row.step);
    out += '\n';
  }
  return out;
}

}  // namespace kstab
