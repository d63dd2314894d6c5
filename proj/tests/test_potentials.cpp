#include <doctest.h>

#include <cmath>
#include <memory>

#include "kstab/potentials.hpp"

using kstab::AffineFunction;
using kstab::LabelledPolytope;
using kstab::MonomialTerm;
using kstab::PLConvexFunction;
using kstab::Polynomial;
using kstab::SymplecticPotential;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

AffineFunction aff(std::initializer_list<double> grad, double c) {
  VectorXd g(static_cast<int>(grad.size()));
  int i = 0;
  for (double v : grad) g[i++] = v;
  return AffineFunction(std::move(g), c);
}

std::shared_ptr<const LabelledPolytope> interval() {
  return std::make_shared<const LabelledPolytope>(
      LabelledPolytope::build({aff({1.0}, 0.0), aff({-1.0}, 1.0)}));
}
std::shared_ptr<const LabelledPolytope> square() {
  return std::make_shared<const LabelledPolytope>(LabelledPolytope::build(
      {aff({1.0, 0.0}, 1.0), aff({-1.0, 0.0}, 1.0), aff({0.0, 1.0}, 1.0),
       aff({0.0, -1.0}, 1.0)}));
}
std::shared_ptr<const LabelledPolytope> simplex() {
  return std::make_shared<const LabelledPolytope>(LabelledPolytope::build(
      {aff({1.0, 0.0}, 0.0), aff({0.0, 1.0}, 0.0), aff({-1.0, -1.0}, 1.0)}));
}

VectorXd vec(std::initializer_list<double> vals) {
  VectorXd x(static_cast<int>(vals.size()));
  int i = 0;
  for (double v : vals) x[i++] = v;
  return x;
}

}  // namespace

TEST_SUITE("potentials") {

TEST_CASE("polynomial evaluation and derivatives") {
  // q = 3 x^2 y + 2 y^3
  Polynomial q(2, {{{2, 1}, 3.0}, {{0, 3}, 2.0}});
  CHECK(q.degree() == 3);
  const VectorXd x = vec({1.0, 2.0});
  CHECK(q.value(x) == doctest::Approx(3.0 * 2.0 + 2.0 * 8.0));
  const VectorXd g = q.gradient(x);
  CHECK(g[0] == doctest::Approx(12.0));  // 6xy
  CHECK(g[1] == doctest::Approx(27.0));  // 3x^2 + 6y^2
  const MatrixXd h = q.hessian(x);
  CHECK(h(0, 0) == doctest::Approx(12.0));  // 6y
  CHECK(h(0, 1) == doctest::Approx(6.0));   // 6x
  CHECK(h(1, 0) == doctest::Approx(6.0));
  CHECK(h(1, 1) == doctest::Approx(24.0));  // 12y
  CHECK(q.partial(x, {2, 1}) == doctest::Approx(6.0));
  CHECK(q.partial(x, {0, 3}) == doctest::Approx(12.0));
  CHECK(q.partial(x, {4, 0}) == 0.0);

  Polynomial r(2, {});
  CHECK(r.zero());
  r.add_term({2, 0}, 1.5);
  r.add_term({2, 0}, 0.5);
  CHECK(r.terms().size() == 1);
  CHECK(r.terms()[0].coeff == doctest::Approx(2.0));
  r.add_term({2, 0}, -2.0);
  CHECK(r.zero());  // exact cancellation removes the term

  auto withaff = q.plus_affine(aff({1.0, -1.0}, 5.0));
  CHECK(withaff.value(x) == doctest::Approx(q.value(x) + 1.0 - 2.0 + 5.0));
}

TEST_CASE("canonical potential closed forms") {
  auto u1 = kstab::guillemin_potential(interval());
  for (double x : {0.12, 0.5, 0.83}) {
    auto jet = kstab::potential_jet(u1, vec({x}));
    CHECK(jet.G(0, 0) == doctest::Approx(1.0 / (2.0 * x * (1.0 - x))).epsilon(1e-13));
    CHECK(jet.H(0, 0) == doctest::Approx(2.0 * x * (1.0 - x)).epsilon(1e-13));
    CHECK(jet.H1[0](0, 0) == doctest::Approx(2.0 - 4.0 * x).epsilon(1e-12));
    CHECK(jet.H2[0][0](0, 0) == doctest::Approx(-4.0).epsilon(1e-12));
    CHECK(jet.value == doctest::Approx(0.5 * (x * std::log(x) +
                                              (1.0 - x) * std::log(1.0 - x))));
  }
  auto jmid = kstab::potential_jet(u1, vec({0.5}));
  CHECK(jmid.G(0, 0) == doctest::Approx(2.0));
  CHECK(jmid.H(0, 0) == doctest::Approx(0.5));
  CHECK(std::abs(jmid.H1[0](0, 0)) < 1e-14);

  auto u2 = kstab::guillemin_potential(square());
  for (auto& x : {vec({0.3, -0.4}), vec({0.0, 0.0}), vec({-0.7, 0.2})}) {
    auto jet = kstab::potential_jet(u2, x);
    CHECK(jet.H(0, 0) == doctest::Approx(1.0 - x[0] * x[0]).epsilon(1e-13));
    CHECK(jet.H(1, 1) == doctest::Approx(1.0 - x[1] * x[1]).epsilon(1e-13));
    CHECK(std::abs(jet.H(0, 1)) < 1e-13);
  }

  auto u3 = kstab::guillemin_potential(simplex());
  auto jet3 = kstab::potential_jet(u3, vec({1.0 / 3.0, 1.0 / 3.0}));
  CHECK(jet3.H(0, 0) == doctest::Approx(4.0 / 9.0).epsilon(1e-13));
  CHECK(jet3.H(1, 1) == doctest::Approx(4.0 / 9.0).epsilon(1e-13));
  CHECK(jet3.H(0, 1) == doctest::Approx(-2.0 / 9.0).epsilon(1e-13));
  for (auto& x : {vec({0.2, 0.3}), vec({0.5, 0.1})}) {
    auto jet = kstab::potential_jet(u3, x);
    CHECK(jet.H(0, 0) == doctest::Approx(2.0 * x[0] * (1.0 - x[0])).epsilon(1e-12));
    CHECK(jet.H(1, 1) == doctest::Approx(2.0 * x[1] * (1.0 - x[1])).epsilon(1e-12));
    CHECK(jet.H(0, 1) == doctest::Approx(-2.0 * x[0] * x[1]).epsilon(1e-12));
  }
}

TEST_CASE("jet identities at random interior points") {
  Polynomial pert(2, {{{4, 0}, 0.04}, {{2, 2}, 0.03}, {{1, 3}, 0.01}});
  for (auto& p : {square(), simplex()}) {
    for (bool perturbed : {false, true}) {
      SymplecticPotential u(p, true, perturbed ? pert : Polynomial(2, {}));
      auto pts = kstab::random_interior_points(*p, 100, 20260822u);
      for (const auto& x : pts) {
        auto jet = kstab::potential_jet(u, x);
        const int m = p->dim();
        CHECK((jet.H * jet.G - MatrixXd::Identity(m, m)).norm() <= 1e-10);
        for (int k = 0; k < m; ++k) {
          CHECK((jet.H1[k] + jet.H * jet.G1[k] * jet.H).norm() <= 1e-10 *
                (1.0 + jet.H1[k].norm()));
          for (int l = 0; l < m; ++l) {
            MatrixXd rhs = -jet.H1[l] * jet.G1[k] * jet.H -
                           jet.H * jet.G2[k][l] * jet.H -
                           jet.H * jet.G1[k] * jet.H1[l];
            CHECK((jet.H2[k][l] - rhs).norm() <= 1e-8 * (1.0 + rhs.norm()));
            CHECK((jet.G2[k][l] - jet.G2[l][k]).norm() == 0.0);
          }
        }
      }
    }
  }
}

TEST_CASE("finite differences confirm the analytic jet") {
  auto p = simplex();
  Polynomial pert(2, {{{3, 1}, 0.05}, {{0, 4}, 0.02}});
  SymplecticPotential u(p, true, pert);
  const double h = 1e-5;
  for (const auto& x : kstab::random_interior_points(*p, 10, 7u, 0.05)) {
    auto jet = kstab::potential_jet(u, x);
    for (int k = 0; k < 2; ++k) {
      VectorXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      // value -> gradient
      const double dfd = (u.value(xp) - u.value(xm)) / (2.0 * h);
      CHECK(dfd == doctest::Approx(jet.gradient[k]).epsilon(1e-6));
      auto jp = kstab::potential_jet(u, xp);
      auto jm = kstab::potential_jet(u, xm);
      // G -> G1, H -> H1 entrywise
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          const double gfd = (jp.G(i, j) - jm.G(i, j)) / (2.0 * h);
          CHECK(std::abs(gfd - jet.G1[k](i, j)) <=
                1e-6 * (1.0 + std::abs(jet.G1[k](i, j))));
          const double hfd = (jp.H(i, j) - jm.H(i, j)) / (2.0 * h);
          CHECK(std::abs(hfd - jet.H1[k](i, j)) <=
                1e-6 * (1.0 + std::abs(jet.H1[k](i, j))));
        }
      // H1 -> H2 entrywise
      for (int l = 0; l < 2; ++l)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            const double h2fd = (jp.H1[l](i, j) - jm.H1[l](i, j)) / (2.0 * h);
            CHECK(std::abs(h2fd - jet.H2[k][l](i, j)) <=
                  2e-5 * (1.0 + std::abs(jet.H2[k][l](i, j))));
          }
    }
  }
}

TEST_CASE("boundary values use the continuous extension") {
  auto u1 = kstab::guillemin_potential(interval());
  CHECK(u1.boundary_value(vec({0.0})) == 0.0);
  CHECK(u1.boundary_value(vec({1.0})) == 0.0);
  CHECK(u1.boundary_value(vec({0.5})) ==
        doctest::Approx(u1.value(vec({0.5}))).epsilon(1e-15));

  auto p2 = square();
  auto u2 = kstab::guillemin_potential(p2);
  CHECK(u2.boundary_value(vec({1.0, 0.0})) == doctest::Approx(std::log(2.0)));
  Polynomial sq(2, {{{2, 0}, 1.0}});
  SymplecticPotential u2p(p2, true, sq);
  CHECK(u2p.boundary_value(vec({1.0, 0.0})) ==
        doctest::Approx(std::log(2.0) + 1.0));
  // corner: every term is 0 or 2 log 2
  CHECK(u2.boundary_value(vec({1.0, 1.0})) == doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("interior-only evaluations reject boundary points") {
  auto u = kstab::guillemin_potential(interval());
  CHECK_THROWS_AS(u.value(vec({0.0})), kstab::BoundaryEvaluation);
  CHECK_THROWS_AS(u.value(vec({1.0})), kstab::BoundaryEvaluation);
  CHECK_THROWS_AS(kstab::potential_jet(u, vec({0.0})), kstab::BoundaryEvaluation);
  CHECK_THROWS_AS(kstab::potential_jet(u, vec({1.2})), kstab::BoundaryEvaluation);
  // purely polynomial potentials have no boundary restriction
  SymplecticPotential poly_only(square(), false,
                                Polynomial(2, {{{2, 0}, 1.0}, {{0, 2}, 1.0}}));
  CHECK(poly_only.value(vec({1.0, 1.0})) == doctest::Approx(2.0));
}

TEST_CASE("inverse Hessian degenerates linearly along each facet") {
  auto p = simplex();
  Polynomial pert(2, {{{2, 0}, 0.05}});
  for (bool perturbed : {false, true}) {
    SymplecticPotential u(p, true, perturbed ? pert : Polynomial(2, {}));
    for (std::size_t fi = 0; fi < p->facets().size(); ++fi) {
      const auto& facet = p->facets()[fi];
      const auto& lab = p->labels()[static_cast<std::size_t>(facet.label)];
      VectorXd centroid = VectorXd::Zero(2);
      for (int vi : facet.vertices) centroid += p->vertices()[static_cast<std::size_t>(vi)];
      centroid /= static_cast<double>(facet.vertices.size());
      std::vector<double> r;
      for (double t : {1e-2, 1e-3, 1e-4}) {
        VectorXd x = centroid + (t / lab.gradient.squaredNorm()) * lab.gradient;
        auto jet = kstab::potential_jet(u, x);
        r.push_back((jet.H * lab.gradient).norm());
      }
      CHECK(r[1] / r[0] == doctest::Approx(0.1).epsilon(0.5));
      CHECK(r[2] / r[1] == doctest::Approx(0.1).epsilon(0.5));
    }
  }
}

TEST_CASE("piecewise linear max functions") {
  auto crease = kstab::make_pl({aff({0.0, 0.0}, 0.0), aff({1.0, 0.0}, 0.0)});
  CHECK(crease.value(vec({0.5, 0.2})) == doctest::Approx(0.5));
  CHECK(crease.value(vec({-0.5, 0.2})) == 0.0);
  CHECK(crease.subgradient(vec({0.5, 0.0}))[0] == doctest::Approx(1.0));
  CHECK(crease.subgradient(vec({-0.5, 0.0}))[0] == 0.0);
  // at the kink: average of the two active gradients
  CHECK(crease.subgradient(vec({0.0, 0.3}))[0] == doctest::Approx(0.5));

  auto single = kstab::make_pl({aff({2.0}, -1.0)});
  CHECK(single.value(vec({3.0})) == doctest::Approx(5.0));
  CHECK_THROWS_AS(kstab::make_pl({}), kstab::ValidationError);
}

TEST_CASE("normalization kills affine parts and is idempotent") {
  const VectorXd x0 = vec({0.5});
  // tent complement: max(x, 1-x) at basepoint 1/2
  auto tent = kstab::make_pl({aff({1.0}, 0.0), aff({-1.0}, 1.0)});
  auto ntent = kstab::normalize(tent, x0);
  CHECK(ntent.value(x0) == 0.0);
  CHECK(ntent.value(vec({0.0})) == doctest::Approx(0.5));
  CHECK(ntent.value(vec({1.0})) == doctest::Approx(0.5));
  // fully idempotent: a second application returns the identical object
  auto ntent2 = kstab::normalize(ntent, x0);
  for (double x : {0.0, 0.25, 0.5, 0.75, 1.0})
    CHECK(ntent2.value(vec({x})) == ntent.value(vec({x})));

  // adding an affine function does not change the projection
  auto shifted = kstab::make_pl({aff({1.0 + 3.0, 0.0 - 2.0}, 7.0),
                                 aff({3.0, -2.0}, 7.0)});
  auto plain = kstab::make_pl({aff({1.0, 0.0}, 0.0), aff({0.0, 0.0}, 0.0)});
  const VectorXd y0 = vec({-0.25, 0.125});
  auto n1 = kstab::normalize(shifted, y0);
  auto n2 = kstab::normalize(plain, y0);
  for (auto& x : {vec({0.3, 0.9}), vec({-0.8, -0.1}), vec({0.0, 0.0})})
    CHECK(n1.value(x) == doctest::Approx(n2.value(x)).epsilon(1e-12));

  // affine functions project to zero
  auto zero = kstab::normalize(aff({2.0, -1.0}, 3.0), vec({0.1, 0.2}));
  CHECK(zero.gradient.norm() == 0.0);
  CHECK(zero.constant == 0.0);

  // smooth potential: value and gradient vanish at x0 afterwards
  auto u = kstab::guillemin_potential(interval());
  auto nu = kstab::normalize(u, x0);
  CHECK(std::abs(nu.value(x0)) < 1e-14);
  CHECK(nu.gradient_at(x0).norm() < 1e-13);
  CHECK(nu.value(vec({0.25})) >= -1e-14);  // normalized potentials are >= 0
}

TEST_CASE("convexity certification over the probe grid") {
  auto p = square();
  auto u0 = kstab::guillemin_potential(p);
  const auto& cert = u0.certify_convexity(16);
  CHECK(cert.per_axis == 16);
  CHECK(cert.probe_count > 50);
  CHECK(cert.min_eigenvalue > 0.9);  // canonical Hessian >= diag(1/2, 1/2) scale
  CHECK(u0.certificate().has_value());

  // strongly concave perturbation destroys convexity
  SymplecticPotential bad(p, true, Polynomial(2, {{{2, 0}, -5.0}}));
  CHECK(!bad.try_certify_convexity(16).has_value());
  CHECK_THROWS_AS(bad.certify_convexity(16), kstab::NotConvexAt);

  SymplecticPotential mild(p, true, Polynomial(2, {{{4, 0}, 0.1}, {{0, 4}, 0.1}}));
  CHECK(mild.try_certify_convexity(32).has_value());

  // a non-convex pure polynomial is rejected pointwise by the jet as well
  SymplecticPotential saddle(p, false,
                             Polynomial(2, {{{2, 0}, 1.0}, {{0, 2}, -1.0}}));
  CHECK_THROWS_AS(kstab::potential_jet(saddle, vec({0.0, 0.0})),
                  kstab::NotConvexAt);
}

}  // TEST_SUITE
