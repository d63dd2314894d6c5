// Compares the serial reference reduction against the parallel kernels on
// representative workloads and reports wall time plus the worst numerical
// deviation between the two execution modes. The parallel mode is
// byte-deterministic across thread counts; against the independently coded
// serial reference it agrees to accumulation-order rounding.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "kstab/curvature.hpp"
#include "kstab/energy.hpp"
#include "kstab/stability.hpp"

using namespace kstab;

namespace {

AffineFunction aff(std::initializer_list<double> grad, double c) {
  Eigen::VectorXd g(static_cast<int>(grad.size()));
  int i = 0;
  for (double v : grad) g[i++] = v;
  return AffineFunction(std::move(g), c);
}

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

struct Timed {
  double value = 0.0;
  double ms = 0.0;
};

template <typename F>
Timed timed(F&& f) {
  const double t0 = now_ms();
  const double v = f();
  return {v, now_ms() - t0};
}

void report(const char* name, const Timed& serial, const Timed& parallel,
            double* worst) {
  const double dev = std::abs(serial.value - parallel.value);
  *worst = std::max(*worst, dev);
  std::printf("%-34s serial %8.2f ms   parallel %8.2f ms   |dev| %.3g\n",
              name, serial.ms, parallel.ms, dev);
}

}  // namespace

int main() {
  auto square = std::make_shared<const LabelledPolytope>(LabelledPolytope::build(
      {aff({1.0, 0.0}, 1.0), aff({-1.0, 0.0}, 1.0), aff({0.0, 1.0}, 1.0),
       aff({0.0, -1.0}, 1.0)}));
  auto simplex = std::make_shared<const LabelledPolytope>(LabelledPolytope::build(
      {aff({1.0, 0.0}, 0.0), aff({0.0, 1.0}, 0.0), aff({-1.0, -1.0}, 1.0)}));
  const auto f_unit = AffineFunction::constant_one(2);
  const auto f_tilt = aff({0.25, 0.125}, 1.0);

  QuadratureScheme heavy;
  heavy.refine = 5;
  heavy.grade = 4;

  double worst = 0.0;

  {
    const auto h = [&](const Eigen::VectorXd& x) {
      return std::exp(-x.squaredNorm()) * (1.0 + x[0] * x[0] * x[1]);
    };
    const auto s = timed([&] {
      return integrate_interior(*square, f_tilt, 5, h, heavy, Exec::serial);
    });
    const auto p = timed([&] {
      return integrate_interior(*square, f_tilt, 5, h, heavy, Exec::parallel);
    });
    report("interior integral (square)", s, p, &worst);
  }

  {
    const auto h = [&](const Eigen::VectorXd& x) {
      return std::cos(3.0 * x[0]) + x[1] * x[1];
    };
    const auto s = timed([&] {
      return integrate_boundary(*simplex, f_tilt, 3, h, heavy, Exec::serial);
    });
    const auto p = timed([&] {
      return integrate_boundary(*simplex, f_tilt, 3, h, heavy, Exec::parallel);
    });
    report("boundary integral (simplex)", s, p, &worst);
  }

  {
    const auto u0 = guillemin_potential(square);
    QuadratureScheme mid;
    mid.refine = 4;
    mid.grade = 3;
    const auto sol = extremal_affine(*square, f_unit, mid, Exec::serial);
    const auto s = timed(
        [&] { return futaki(f_unit, sol.s, u0, mid, Exec::serial); });
    const auto p = timed(
        [&] { return futaki(f_unit, sol.s, u0, mid, Exec::parallel); });
    report("canonical invariant (square)", s, p, &worst);
  }

  {
    const auto u0 = guillemin_potential(square);
    QuadratureScheme mid;
    mid.refine = 3;
    mid.grade = 3;
    const auto s = timed([&] {
      return k_energy(u0, f_tilt, mid, Exec::serial).total;
    });
    const auto p = timed([&] {
      return k_energy(u0, f_tilt, mid, Exec::parallel).total;
    });
    report("relative energy (square)", s, p, &worst);
  }

  {
    QuadratureScheme mid;
    mid.refine = 2;
    mid.grade = 2;
    Polynomial q(2, {MonomialTerm{{4, 0}, 0.05}, MonomialTerm{{0, 4}, 0.05}});
    const SymplecticPotential u(square, true, std::move(q));
    u.certify_convexity(16);
    const auto target = aff({0.0, 0.0}, 4.0);
    const auto s = timed([&] {
      return abreu_residual_norm(u, f_unit, target, mid, Exec::serial);
    });
    const auto p = timed([&] {
      return abreu_residual_norm(u, f_unit, target, mid, Exec::parallel);
    });
    report("curvature residual (square)", s, p, &worst);
  }

  std::printf("worst serial/parallel deviation: %.3g\n", worst);
  return worst <= 1e-12 ? 0 : 1;
}
