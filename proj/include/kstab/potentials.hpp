#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "kstab/polytope.hpp"

namespace kstab {

/// One monomial term c * prod_i x_i^{e_i} of a multivariate polynomial.
struct MonomialTerm {
  std::vector<int> exponents;
  double coeff = 0.0;
};

/// Sparse multivariate polynomial with closed-form partial derivatives of
/// any order.
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(int dim, std::vector<MonomialTerm> terms);

  int dim() const { return dim_; }
  const std::vector<MonomialTerm>& terms() const { return terms_; }
  bool zero() const { return terms_.empty(); }
  int degree() const;

  Polynomial& add_term(std::vector<int> exponents, double coeff);

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;
  /// Mixed partial of multi-index `order` (order[i] = derivatives in x_i).
  double partial(const Eigen::VectorXd& x, const std::vector<int>& order) const;

  /// The polynomial plus an affine function, as a polynomial.
  Polynomial plus_affine(const AffineFunction& phi) const;

 private:
  int dim_ = 0;
  std::vector<MonomialTerm> terms_;
};

/// Full derivative data of a potential at one interior point.
/// G1[k](i,j) and G2[k][l](i,j) hold the third and fourth partials of u;
/// H1 and H2 are the matching derivatives of H = G^{-1}.
struct PotentialJet {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd G;
  std::vector<Eigen::MatrixXd> G1;
  std::vector<std::vector<Eigen::MatrixXd>> G2;
  Eigen::MatrixXd H;
  std::vector<Eigen::MatrixXd> H1;
  std::vector<std::vector<Eigen::MatrixXd>> H2;
};

/// Result of checking Hess(u) > 0 over an interior probe grid.
struct ConvexityCertificate {
  int per_axis = 0;           // probe resolution the check ran at
  int probe_count = 0;        // interior points actually tested
  double min_eigenvalue = 0;  // smallest Hessian eigenvalue seen
};

/// A strictly convex potential on the polytope interior: the canonical term
/// (1/2) sum_j L_j log L_j (optional) plus a polynomial perturbation.
class SymplecticPotential {
 public:
  SymplecticPotential(std::shared_ptr<const LabelledPolytope> p, bool canonical,
                      Polynomial perturbation);

  const LabelledPolytope& polytope() const { return *polytope_; }
  const std::shared_ptr<const LabelledPolytope>& polytope_ptr() const {
    return polytope_;
  }
  bool canonical() const { return canonical_; }
  const Polynomial& perturbation() const { return perturbation_; }

  /// Value at an interior point (throws BoundaryEvaluation if some label is
  /// below the geometric tolerance and the canonical term is present).
  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient_at(const Eigen::VectorXd& x) const;
  /// Hessian at an interior point (no positivity check).
  Eigen::MatrixXd hessian_at(const Eigen::VectorXd& x) const;

  /// Continuous extension to the closed polytope: canonical terms
  /// L log L evaluate to 0 where L vanishes.
  double boundary_value(const Eigen::VectorXd& x) const;

  /// Same potential with a different perturbation.
  SymplecticPotential with_perturbation(Polynomial q) const;

  /// Checks Hess > 0 on the interior probe grid; stores and returns the
  /// certificate. Throws NotConvexAt naming the first failing point.
  /// Certification mutates the stored certificate and is not thread-safe;
  /// plain evaluations are pure.
  const ConvexityCertificate& certify_convexity(int per_axis = 32) const;
  /// Non-throwing variant for line-search candidates.
  std::optional<ConvexityCertificate> try_certify_convexity(
      int per_axis = 32) const;
  const std::optional<ConvexityCertificate>& certificate() const {
    return certificate_;
  }

 private:
  std::shared_ptr<const LabelledPolytope> polytope_;
  bool canonical_ = true;
  Polynomial perturbation_;
  mutable std::optional<ConvexityCertificate> certificate_;
};

/// Canonical potential of the labelled polytope (zero perturbation).
SymplecticPotential guillemin_potential(
    std::shared_ptr<const LabelledPolytope> p);

/// Derivative jet at an interior point. Throws BoundaryEvaluation if some
/// label value is at or below the geometric tolerance, NotConvexAt if the
/// Hessian is not positive definite there.
PotentialJet potential_jet(const SymplecticPotential& u,
                           const Eigen::VectorXd& x);

/// Fill H, H1, H2 of a jet whose G, G1, G2 are already populated (shared by
/// potential_jet and evaluators that assemble G-data from caches). Throws
/// NotConvexAt (naming x) when G is not positive definite.
void complete_jet_inverses(PotentialJet& jet, const Eigen::VectorXd& x);

/// Piecewise linear convex function: pointwise max of affine pieces.
class PLConvexFunction {
 public:
  explicit PLConvexFunction(std::vector<AffineFunction> pieces);

  int dim() const { return pieces_.front().dim(); }
  const std::vector<AffineFunction>& pieces() const { return pieces_; }

  double value(const Eigen::VectorXd& x) const;
  /// Deterministic subgradient: average of the gradients of all pieces
  /// attaining the max at x (within a relative tolerance).
  Eigen::VectorXd subgradient(const Eigen::VectorXd& x) const;

 private:
  std::vector<AffineFunction> pieces_;
};

PLConvexFunction make_pl(std::vector<AffineFunction> pieces);

/// Normalization v -> v - v(x0) - <grad, x - x0>: kills the affine part,
/// leaving a convex function vanishing (with subgradient zero) at x0.
PLConvexFunction normalize(const PLConvexFunction& v, const Eigen::VectorXd& x0);
SymplecticPotential normalize(const SymplecticPotential& u,
                              const Eigen::VectorXd& x0);
/// Affine functions project to the zero function.
AffineFunction normalize(const AffineFunction& phi, const Eigen::VectorXd& x0);

}  // namespace kstab
