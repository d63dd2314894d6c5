#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "kstab/stability.hpp"

using kstab::AffineFunction;
using kstab::LabelledPolytope;
using kstab::PLConvexFunction;
using kstab::QuadratureScheme;
using kstab::ScanConfig;
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

QuadratureScheme light_scheme() {
  QuadratureScheme s;
  s.refine = 1;
  s.grade = 1;
  return s;
}

}  // namespace

TEST_SUITE("stability") {

TEST_CASE("extremal affine functions of the model cases") {
  QuadratureScheme s;
  {
    auto sol = kstab::extremal_affine(*interval(), AffineFunction::constant_one(1), s);
    CHECK(sol.s.constant == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(std::abs(sol.s.gradient[0]) < 1e-8);
    CHECK(sol.residual <= 1e-10 * sol.rhs.norm());
    CHECK(sol.condition > 1.0);
    CHECK(sol.condition < 1e3);
  }
  {
    auto sol = kstab::extremal_affine(*interval(), aff({1.0}, 1.0), s);
    CHECK(sol.s.constant == doctest::Approx(8.0).epsilon(1e-9));
    CHECK(std::abs(sol.s.gradient[0]) < 1e-7);
  }
  {
    auto sol = kstab::extremal_affine(*square(), AffineFunction::constant_one(2), s);
    CHECK(sol.s.constant == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(sol.s.gradient.norm() < 1e-8);
  }
  {
    auto sol = kstab::extremal_affine(*simplex(), AffineFunction::constant_one(2), s);
    CHECK(sol.s.constant == doctest::Approx(12.0).epsilon(1e-9));
    CHECK(sol.s.gradient.norm() < 1e-7);
  }
}

TEST_CASE("degenerate scaling is reported through the Gram condition") {
  QuadratureScheme s;
  auto tiny = LabelledPolytope::build({aff({1.0}, 0.0), aff({-1.0}, 1e-6)});
  CHECK_THROWS_AS(
      kstab::extremal_affine(tiny, AffineFunction::constant_one(1), s),
      kstab::IllConditionedGram);
  // an order of magnitude larger still passes the gate
  auto small = LabelledPolytope::build({aff({1.0}, 0.0), aff({-1.0}, 1e-5)});
  auto sol = kstab::extremal_affine(small, AffineFunction::constant_one(1), s);
  CHECK(sol.condition < 1e12);
  CHECK(sol.s.constant > 0.0);
}

TEST_CASE("the invariant vanishes on affine functions") {
  QuadratureScheme s;
  struct Case {
    std::shared_ptr<const LabelledPolytope> p;
    AffineFunction f;
  };
  std::vector<Case> cases{{interval(), AffineFunction::constant_one(1)},
                          {interval(), aff({1.0}, 1.0)},
                          {square(), AffineFunction::constant_one(2)},
                          {simplex(), AffineFunction::constant_one(2)}};
  std::mt19937_64 rng(99u);
  auto unit = [&rng] {
    return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
  };
  for (const auto& c : cases) {
    const auto sol = kstab::extremal_affine(*c.p, c.f, s);
    const int m = c.p->dim();
    for (int trial = 0; trial < 100; ++trial) {
      VectorXd g(m);
      for (int i = 0; i < m; ++i) g[i] = 3.0 * unit();
      AffineFunction phi(g, 3.0 * unit());
      double sup = 0.0;
      for (const auto& v : c.p->vertices()) sup = std::max(sup, std::abs(phi(v)));
      CHECK(std::abs(kstab::futaki(*c.p, c.f, sol.s, phi, s)) <=
            1e-9 * (1.0 + sup));
    }
  }
}

TEST_CASE("piecewise linear invariant and norm oracles") {
  QuadratureScheme s;
  {
    auto p = square();
    const auto f = AffineFunction::constant_one(2);
    const auto crease =
        kstab::make_pl({aff({0.0, 0.0}, 0.0), aff({1.0, 0.0}, 0.0)});
    const AffineFunction s4(VectorXd::Zero(2), 4.0);
    const double fut = kstab::futaki(*p, f, s4, crease, s);
    const double nrm = kstab::boundary_norm(*p, f, crease, s);
    CHECK(fut == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(nrm == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(fut / nrm == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  }
  {
    auto p = interval();
    const auto f = aff({1.0}, 1.0);
    const auto crease =
        kstab::make_pl({aff({0.0}, 0.0), aff({1.0}, -0.5)});
    const AffineFunction s8(VectorXd::Zero(1), 8.0);
    const double fut = kstab::futaki(*p, f, s8, crease, s);
    const double nrm = kstab::boundary_norm(*p, f, crease, s);
    CHECK(fut == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(nrm == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(fut / nrm == doctest::Approx(4.0 / 3.0).epsilon(1e-9));
  }
}

TEST_CASE("solution identity for canonical potentials") {
  QuadratureScheme s;
  {
    auto p = interval();
    auto u0 = kstab::guillemin_potential(p);
    const auto sol1 =
        kstab::extremal_affine(*p, AffineFunction::constant_one(1), s);
    CHECK(kstab::futaki(AffineFunction::constant_one(1), sol1.s, u0, s) ==
          doctest::Approx(1.0).epsilon(1e-6));
    const auto fx = aff({1.0}, 1.0);
    const auto sol2 = kstab::extremal_affine(*p, fx, s);
    CHECK(kstab::futaki(fx, sol2.s, u0, s) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-6));
  }
  {
    auto p = square();
    auto u0 = kstab::guillemin_potential(p);
    const auto f = AffineFunction::constant_one(2);
    const auto sol = kstab::extremal_affine(*p, f, s);
    CHECK(kstab::futaki(f, sol.s, u0, s) == doctest::Approx(8.0).epsilon(1e-6));
  }
}

TEST_CASE("norm and invariant behave under scaling and normalization") {
  QuadratureScheme s = light_scheme();
  auto p = square();
  const auto f = AffineFunction::constant_one(2);
  const AffineFunction s4(VectorXd::Zero(2), 4.0);

  auto v = kstab::make_pl({aff({0.4, -0.3}, 0.1), aff({-0.2, 0.5}, 0.0),
                           aff({0.1, 0.1}, -0.2)});
  auto nv = kstab::normalize(v, p->basepoint());
  // the projection shifts by an affine function, which the invariant kills
  CHECK(kstab::futaki(*p, f, s4, v, s) ==
        doctest::Approx(kstab::futaki(*p, f, s4, nv, s)).epsilon(1e-9));

  const double base = kstab::boundary_norm(*p, f, nv, s);
  CHECK(base > 0.0);
  for (double c : {0.5, 2.0}) {
    std::vector<AffineFunction> scaled;
    for (const auto& piece : nv.pieces())
      scaled.emplace_back(Eigen::VectorXd(c * piece.gradient), c * piece.constant);
    CHECK(kstab::boundary_norm(*p, f, kstab::make_pl(scaled), s) ==
          doctest::Approx(c * base).epsilon(1e-10));
  }

  CHECK_THROWS_AS(
      kstab::boundary_norm(*p, f, kstab::make_pl({aff({1.0, 0.0}, 1.0)}), s),
      kstab::NotNormalized);
  CHECK_THROWS_AS(
      kstab::boundary_norm(*p, f, kstab::make_pl({aff({0.0, 0.0}, -1.0)}), s),
      kstab::NotNormalized);
}

TEST_CASE("boundary norm tames the interior integral") {
  QuadratureScheme s = light_scheme();
  auto p = square();
  const auto f = AffineFunction::constant_one(2);
  std::mt19937_64 rng(7u);
  auto unit = [&rng] {
    return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
  };
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<AffineFunction> pieces;
    for (int k = 0; k < 3; ++k) {
      VectorXd g(2);
      g << unit(), unit();
      pieces.emplace_back(g, 0.5 * unit());
    }
    auto v = kstab::normalize(kstab::make_pl(pieces), p->basepoint());
    const double nrm = kstab::boundary_norm(*p, f, v, s);
    const double l1 = kstab::integrate_interior(
        *p, f, 0, [&](const VectorXd& x) { return v.value(x); }, s);
    if (nrm < 1e-10) continue;
    CHECK(nrm >= 0.2 * l1);
  }
}

TEST_CASE("weighted pairing of centered affine functions") {
  QuadratureScheme s;
  auto p1 = interval();
  const auto f1 = AffineFunction::constant_one(1);
  CHECK(kstab::futaki_mabuchi_form(*p1, f1, aff({1.0}, -0.5), aff({1.0}, -0.5),
                                   s) == doctest::Approx(1.0 / 12.0).epsilon(1e-10));
  // centering removes constants entirely
  CHECK(std::abs(kstab::futaki_mabuchi_form(*p1, f1, aff({0.0}, 3.0),
                                            aff({1.0}, 0.0), s)) < 1e-14);
  // the pairing does not see the constant part at all
  CHECK(kstab::futaki_mabuchi_form(*p1, f1, aff({1.0}, 7.0), aff({1.0}, -2.0),
                                   s) == doctest::Approx(1.0 / 12.0).epsilon(1e-10));

  auto p2 = square();
  const auto f2 = AffineFunction::constant_one(2);
  CHECK(std::abs(kstab::futaki_mabuchi_form(*p2, f2, aff({1.0, 0.0}, 0.0),
                                            aff({0.0, 1.0}, 0.0), s)) < 1e-13);
  // symmetry and positivity on a non-constant function
  const auto a = aff({0.3, -0.2}, 0.1);
  const auto b = aff({-0.1, 0.4}, 0.0);
  CHECK(kstab::futaki_mabuchi_form(*p2, f2, a, b, s) ==
        doctest::Approx(kstab::futaki_mabuchi_form(*p2, f2, b, a, s)).epsilon(1e-13));
  CHECK(kstab::futaki_mabuchi_form(*p2, f2, a, a, s) > 0.0);
}

TEST_CASE("stability scans are seeded and deterministic") {
  QuadratureScheme s = light_scheme();
  auto p = square();
  const auto f = AffineFunction::constant_one(2);
  const AffineFunction s4(VectorXd::Zero(2), 4.0);
  ScanConfig cfg;
  cfg.crease_directions = 8;
  cfg.crease_offsets = 3;
  cfg.random_count = 20;
  cfg.seed = 42;

  auto r1 = kstab::stability_scan(*p, f, s4, cfg, s);
  auto r2 = kstab::stability_scan(*p, f, s4, cfg, s);
  CHECK(kstab::report_csv(r1) == kstab::report_csv(r2));
  CHECK(r1.attempted == 8 * 3 + 20);
  CHECK(!r1.samples.empty());
  CHECK(r1.lambda_hat > 0.0);
  CHECK(r1.lambda_hat <= 2.0 / 3.0 + 1e-9);
  CHECK(r1.argmin >= 0);
  CHECK(r1.samples[static_cast<std::size_t>(r1.argmin)].ratio ==
        doctest::Approx(r1.lambda_hat));
  for (const auto& sample : r1.samples) {
    CHECK(sample.bnorm >= 1e-10);
    CHECK(sample.ratio == doctest::Approx(sample.futaki / sample.bnorm));
  }
  // the axis crease through the basepoint is one of the samples, ratio 2/3
  bool found = false;
  for (const auto& sample : r1.samples) {
    if (sample.family == "crease" && sample.params.rfind("dir=(1 0);c=0", 0) == 0 &&
        std::abs(sample.ratio - 2.0 / 3.0) < 1e-8)
      found = true;
  }
  CHECK(found);

  ScanConfig other = cfg;
  other.seed = 43;
  auto r3 = kstab::stability_scan(*p, f, s4, other, s);
  CHECK(kstab::report_csv(r1) != kstab::report_csv(r3));

  ScanConfig empty;
  empty.crease_directions = 0;
  empty.crease_offsets = 0;
  empty.random_count = 0;
  auto r0 = kstab::stability_scan(*p, f, s4, empty, s);
  CHECK(r0.samples.empty());
  CHECK(r0.lambda_hat == 0.0);

  // csv shape: fixed header + one row per kept sample
  const std::string csv = kstab::report_csv(r1);
  CHECK(csv.rfind("sample_id,family,params,futaki,bnorm,ratio\n", 0) == 0);
}

TEST_CASE("interval scan includes the half-crease ratio") {
  QuadratureScheme s = light_scheme();
  auto p = interval();
  const auto f = aff({1.0}, 1.0);
  const AffineFunction s8(VectorXd::Zero(1), 8.0);
  ScanConfig cfg;
  cfg.crease_directions = 2;
  cfg.crease_offsets = 4;
  cfg.random_count = 30;
  cfg.seed = 11;
  auto r = kstab::stability_scan(*p, f, s8, cfg, s);
  CHECK(r.lambda_hat > 0.0);
  bool found = false;
  for (const auto& sample : r.samples)
    if (sample.family == "crease" &&
        std::abs(sample.ratio - 4.0 / 3.0) < 1e-8)
      found = true;
  CHECK(found);
}

}  // TEST_SUITE
