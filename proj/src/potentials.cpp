#include "kstab/potentials.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <sstream>

#include "kstab/errors.hpp"

namespace kstab {

namespace {

double pow_int(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

/// Falling factorial e (e-1) ... (e-o+1); the coefficient picked up by
/// differentiating x^e o times.
double falling(int e, int o) {
  double r = 1.0;
  for (int i = 0; i < o; ++i) r *= (e - i);
  return r;
}

std::string point_string(const Eigen::VectorXd& x) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

/// Label values at x; throws when `strict` and some label is at or below
/// the polytope's geometric tolerance (the canonical log terms need
/// strictly interior points).
Eigen::VectorXd label_values(const LabelledPolytope& p, const Eigen::VectorXd& x,
                             bool strict) {
  const auto& labels = p.labels();
  Eigen::VectorXd L(static_cast<int>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    L[static_cast<int>(j)] = labels[j](x);
    if (strict && L[static_cast<int>(j)] <= p.geom_tol())
      throw BoundaryEvaluation("potential evaluation at non-interior point " +
                               point_string(x));
  }
  return L;
}

}  // namespace

// ---- Polynomial ------------------------------------------------------------

Polynomial::Polynomial(int dim, std::vector<MonomialTerm> terms) : dim_(dim) {
  if (dim < 0) throw ValidationError("polynomial dimension must be >= 0");
  for (auto& t : terms) add_term(std::move(t.exponents), t.coeff);
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& t : terms_) {
    int s = 0;
    for (int e : t.exponents) s += e;
    d = std::max(d, s);
  }
  return d;
}

Polynomial& Polynomial::add_term(std::vector<int> exponents, double coeff) {
  if (static_cast<int>(exponents.size()) != dim_)
    throw ValidationError("polynomial term has wrong dimension");
  for (int e : exponents)
    if (e < 0) throw ValidationError("polynomial exponent must be >= 0");
  if (!std::isfinite(coeff))
    throw ValidationError("polynomial coefficient must be finite");
  if (coeff == 0.0) return *this;
  for (auto& t : terms_) {
    if (t.exponents == exponents) {
      t.coeff += coeff;
      if (t.coeff == 0.0) {
        t.exponents = std::move(terms_.back().exponents);
        t.coeff = terms_.back().coeff;
        terms_.pop_back();
      }
      return *this;
    }
  }
  terms_.push_back({std::move(exponents), coeff});
  return *this;
}

double Polynomial::value(const Eigen::VectorXd& x) const {
  double v = 0.0;
  for (const auto& t : terms_) {
    double term = t.coeff;
    for (int i = 0; i < dim_; ++i) term *= pow_int(x[i], t.exponents[i]);
    v += term;
  }
  return v;
}

double Polynomial::partial(const Eigen::VectorXd& x,
                           const std::vector<int>& order) const {
  double v = 0.0;
  for (const auto& t : terms_) {
    double term = t.coeff;
    for (int i = 0; i < dim_ && term != 0.0; ++i) {
      const int e = t.exponents[i], o = order[i];
      if (o > e) {
        term = 0.0;
        break;
      }
      term *= falling(e, o) * pow_int(x[i], e - o);
    }
    v += term;
  }
  return v;
}

Eigen::VectorXd Polynomial::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  std::vector<int> order(dim_, 0);
  for (int i = 0; i < dim_; ++i) {
    order[i] = 1;
    g[i] = partial(x, order);
    order[i] = 0;
  }
  return g;
}

Eigen::MatrixXd Polynomial::hessian(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
  std::vector<int> order(dim_, 0);
  for (int i = 0; i < dim_; ++i) {
    for (int j = i; j < dim_; ++j) {
      order[i] += 1;
      order[j] += 1;
      h(i, j) = h(j, i) = partial(x, order);
      order[i] = order[j] = 0;
    }
  }
  return h;
}

Polynomial Polynomial::plus_affine(const AffineFunction& phi) const {
  if (phi.dim() != dim_)
    throw ValidationError("affine summand has wrong dimension");
  Polynomial r = *this;
  r.add_term(std::vector<int>(dim_, 0), phi.constant);
  for (int i = 0; i < dim_; ++i) {
    std::vector<int> e(dim_, 0);
    e[i] = 1;
    r.add_term(std::move(e), phi.gradient[i]);
  }
  return r;
}

// ---- SymplecticPotential ---------------------------------------------------

SymplecticPotential::SymplecticPotential(
    std::shared_ptr<const LabelledPolytope> p, bool canonical,
    Polynomial perturbation)
    : polytope_(std::move(p)), canonical_(canonical) {
  if (!polytope_) throw ValidationError("potential requires a polytope");
  if (perturbation.zero())
    perturbation_ = Polynomial(polytope_->dim(), {});
  else if (perturbation.dim() != polytope_->dim())
    throw ValidationError("perturbation dimension does not match polytope");
  else
    perturbation_ = std::move(perturbation);
}

double SymplecticPotential::value(const Eigen::VectorXd& x) const {
  double v = 0.0;
  if (canonical_) {
    const Eigen::VectorXd L = label_values(*polytope_, x, true);
    for (int j = 0; j < L.size(); ++j) v += 0.5 * L[j] * std::log(L[j]);
  }
  if (!perturbation_.zero()) v += perturbation_.value(x);
  return v;
}

Eigen::VectorXd SymplecticPotential::gradient_at(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(polytope_->dim());
  if (canonical_) {
    const Eigen::VectorXd L = label_values(*polytope_, x, true);
    const auto& labels = polytope_->labels();
    for (int j = 0; j < L.size(); ++j)
      g += 0.5 * (std::log(L[j]) + 1.0) * labels[static_cast<std::size_t>(j)].gradient;
  }
  if (!perturbation_.zero()) g += perturbation_.gradient(x);
  return g;
}

double SymplecticPotential::boundary_value(const Eigen::VectorXd& x) const {
  double v = 0.0;
  if (canonical_) {
    // Continuous extension: t log t -> 0 as t -> 0.
    for (const auto& lab : polytope_->labels()) {
      const double L = lab(x);
      if (L > polytope_->geom_tol()) v += 0.5 * L * std::log(L);
    }
  }
  if (!perturbation_.zero()) v += perturbation_.value(x);
  return v;
}

SymplecticPotential SymplecticPotential::with_perturbation(Polynomial q) const {
  return SymplecticPotential(polytope_, canonical_, std::move(q));
}

Eigen::MatrixXd SymplecticPotential::hessian_at(const Eigen::VectorXd& x) const {
  const int m = polytope_->dim();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
  if (canonical_) {
    const Eigen::VectorXd L = label_values(*polytope_, x, true);
    const auto& labels = polytope_->labels();
    for (int j = 0; j < L.size(); ++j) {
      const Eigen::VectorXd& n = labels[static_cast<std::size_t>(j)].gradient;
      G.noalias() += (0.5 / L[j]) * (n * n.transpose());
    }
  }
  if (!perturbation_.zero()) G += perturbation_.hessian(x);
  return G;
}

const ConvexityCertificate& SymplecticPotential::certify_convexity(
    int per_axis) const {
  auto cert = try_certify_convexity(per_axis);
  if (!cert) {
    // rerun to name the failing point
    for (const auto& x : interior_probe_grid(*polytope_, per_axis)) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian_at(x));
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw NotConvexAt("Hessian not positive definite at " +
                          point_string(x));
    }
    throw NotConvexAt("Hessian not positive definite on probe grid");
  }
  certificate_ = *cert;
  return *certificate_;
}

std::optional<ConvexityCertificate> SymplecticPotential::try_certify_convexity(
    int per_axis) const {
  const auto probes = interior_probe_grid(*polytope_, per_axis);
  ConvexityCertificate cert;
  cert.per_axis = per_axis;
  cert.probe_count = static_cast<int>(probes.size());
  cert.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& x : probes) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian_at(x));
    const double lam = es.eigenvalues().minCoeff();
    cert.min_eigenvalue = std::min(cert.min_eigenvalue, lam);
    if (!(lam > 0.0)) return std::nullopt;
  }
  certificate_ = cert;
  return cert;
}

SymplecticPotential guillemin_potential(
    std::shared_ptr<const LabelledPolytope> p) {
  if (!p) throw ValidationError("potential requires a polytope");
  const int m = p->dim();
  return SymplecticPotential(std::move(p), true, Polynomial(m, {}));
}

PotentialJet potential_jet(const SymplecticPotential& u,
                           const Eigen::VectorXd& x) {
  const LabelledPolytope& p = u.polytope();
  const int m = p.dim();
  PotentialJet jet;
  jet.gradient = Eigen::VectorXd::Zero(m);
  jet.G = Eigen::MatrixXd::Zero(m, m);
  jet.G1.assign(m, Eigen::MatrixXd::Zero(m, m));
  jet.G2.assign(m, std::vector<Eigen::MatrixXd>(m, Eigen::MatrixXd::Zero(m, m)));

  if (u.canonical()) {
    const Eigen::VectorXd L = label_values(p, x, true);
    const auto& labels = p.labels();
    for (int j = 0; j < L.size(); ++j) {
      const Eigen::VectorXd& n = labels[static_cast<std::size_t>(j)].gradient;
      const double Lj = L[j];
      jet.value += 0.5 * Lj * std::log(Lj);
      jet.gradient += 0.5 * (std::log(Lj) + 1.0) * n;
      const Eigen::MatrixXd outer = n * n.transpose();
      jet.G.noalias() += (0.5 / Lj) * outer;
      for (int k = 0; k < m; ++k)
        jet.G1[k].noalias() += (-0.5 * n[k] / (Lj * Lj)) * outer;
      for (int k = 0; k < m; ++k)
        for (int l = k; l < m; ++l) {
          const Eigen::MatrixXd add = (n[k] * n[l] / (Lj * Lj * Lj)) * outer;
          jet.G2[k][l] += add;
          if (l != k) jet.G2[l][k] += add;
        }
    }
  }
  const Polynomial& q = u.perturbation();
  if (!q.zero()) {
    jet.value += q.value(x);
    jet.gradient += q.gradient(x);
    jet.G += q.hessian(x);
    std::vector<int> order(m, 0);
    for (int k = 0; k < m; ++k) {
      for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
          order.assign(m, 0);
          order[i] += 1;
          order[j] += 1;
          order[k] += 1;
          const double d3 = q.partial(x, order);
          jet.G1[k](i, j) += d3;
          if (j != i) jet.G1[k](j, i) += d3;
        }
      for (int l = k; l < m; ++l)
        for (int i = 0; i < m; ++i)
          for (int j = i; j < m; ++j) {
            order.assign(m, 0);
            order[i] += 1;
            order[j] += 1;
            order[k] += 1;
            order[l] += 1;
            const double d4 = q.partial(x, order);
            jet.G2[k][l](i, j) += d4;
            if (j != i) jet.G2[k][l](j, i) += d4;
            if (l != k) {
              jet.G2[l][k](i, j) += d4;
              if (j != i) jet.G2[l][k](j, i) += d4;
            }
          }
    }
  }

  complete_jet_inverses(jet, x);
  return jet;
}

void complete_jet_inverses(PotentialJet& jet, const Eigen::VectorXd& x) {
  const int m = static_cast<int>(jet.G.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(jet.G);
  if (llt.info() != Eigen::Success)
    throw NotConvexAt("Hessian not positive definite at " + point_string(x));
  jet.H = llt.solve(Eigen::MatrixXd::Identity(m, m));

  jet.H1.assign(m, Eigen::MatrixXd());
  for (int k = 0; k < m; ++k) jet.H1[k] = -jet.H * jet.G1[k] * jet.H;
  jet.H2.assign(m, std::vector<Eigen::MatrixXd>(m));
  for (int k = 0; k < m; ++k)
    for (int l = k; l < m; ++l) {
      Eigen::MatrixXd d2 = -jet.H1[l] * jet.G1[k] * jet.H -
                           jet.H * jet.G2[k][l] * jet.H -
                           jet.H * jet.G1[k] * jet.H1[l];
      jet.H2[k][l] = d2;
      if (l != k) jet.H2[l][k] = std::move(d2);
    }
}

// ---- PLConvexFunction ------------------------------------------------------

PLConvexFunction::PLConvexFunction(std::vector<AffineFunction> pieces)
    : pieces_(std::move(pieces)) {
  if (pieces_.empty())
    throw ValidationError("piecewise linear function needs at least one piece");
  const int m = pieces_.front().dim();
  for (const auto& p : pieces_)
    if (p.dim() != m)
      throw ValidationError("piecewise linear pieces have mixed dimensions");
}

double PLConvexFunction::value(const Eigen::VectorXd& x) const {
  double v = pieces_.front()(x);
  for (std::size_t i = 1; i < pieces_.size(); ++i)
    v = std::max(v, pieces_[i](x));
  return v;
}

Eigen::VectorXd PLConvexFunction::subgradient(const Eigen::VectorXd& x) const {
  const double vmax = value(x);
  const double tol = 1e-12 * (1.0 + std::abs(vmax));
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  int active = 0;
  for (const auto& p : pieces_) {
    if (p(x) >= vmax - tol) {
      g += p.gradient;
      ++active;
    }
  }
  return g / active;
}

PLConvexFunction make_pl(std::vector<AffineFunction> pieces) {
  return PLConvexFunction(std::move(pieces));
}

// ---- normalization ---------------------------------------------------------

PLConvexFunction normalize(const PLConvexFunction& v, const Eigen::VectorXd& x0) {
  const double v0 = v.value(x0);
  const Eigen::VectorXd g = v.subgradient(x0);
  if (v0 == 0.0 && g.isZero(0.0)) return v;  // already normalized: idempotence
  std::vector<AffineFunction> shifted;
  shifted.reserve(v.pieces().size());
  for (const auto& p : v.pieces()) {
    Eigen::VectorXd grad = p.gradient - g;
    // Constant chosen so each shifted piece evaluates at x0 to exactly
    // p(x0) - v0; the max of those is exactly 0 for an attaining piece.
    const double c = (p(x0) - v0) - grad.dot(x0);
    shifted.emplace_back(std::move(grad), c);
  }
  return PLConvexFunction(std::move(shifted));
}

SymplecticPotential normalize(const SymplecticPotential& u,
                              const Eigen::VectorXd& x0) {
  const double v0 = u.value(x0);
  const Eigen::VectorXd g = u.gradient_at(x0);
  AffineFunction correction(-g, -v0 + g.dot(x0));
  return u.with_perturbation(u.perturbation().plus_affine(correction));
}

AffineFunction normalize(const AffineFunction& phi, const Eigen::VectorXd& x0) {
  if (phi.dim() != x0.size())
    throw ValidationError("basepoint dimension does not match function");
  return AffineFunction(Eigen::VectorXd::Zero(phi.dim()), 0.0);
}

}  // namespace kstab
