#include "kstab/stability.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "kstab/errors.hpp"
#include "kstab/format.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace kstab {

namespace {

double pow_int(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

/// Exact decomposition of the polytope into the subregions where each piece
/// of a piecewise linear max attains the maximum; duplicated pieces are kept
/// once so regions do not double-count.
std::vector<QuadratureGrid> dominance_grids(const LabelledPolytope& p,
                                            const PLConvexFunction& v,
                                            const QuadratureScheme& scheme,
                                            std::vector<int>* piece_of_grid) {
  const auto& pieces = v.pieces();
  std::vector<int> unique_idx;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    bool dup = false;
    for (int j : unique_idx) {
      const auto& a = pieces[static_cast<std::size_t>(j)];
      if (a.constant == pieces[i].constant && a.gradient == pieces[i].gradient) {
        dup = true;
        break;
      }
    }
    if (!dup) unique_idx.push_back(static_cast<int>(i));
  }

  std::vector<QuadratureGrid> grids;
  piece_of_grid->clear();
  for (int i : unique_idx) {
    std::vector<AffineFunction> extras;
    for (int j : unique_idx) {
      if (j == i) continue;
      const auto& li = pieces[static_cast<std::size_t>(i)];
      const auto& lj = pieces[static_cast<std::size_t>(j)];
      extras.emplace_back(Eigen::VectorXd(li.gradient - lj.gradient),
                          li.constant - lj.constant);
    }
    auto cell = clip_polytope(p, extras);
    if (!cell) continue;
    grids.push_back(QuadratureGrid::build_cell(*cell, p, scheme));
    piece_of_grid->push_back(i);
  }
  return grids;
}

double futaki_pl_impl(const LabelledPolytope& p, const AffineFunction& f,
                      const AffineFunction& s, const PLConvexFunction& v,
                      const QuadratureScheme& scheme, Exec exec) {
  validate_weight(p, f);
  const int q = 2 * p.dim() - 1;
  std::vector<int> piece_of_grid;
  auto grids = dominance_grids(p, v, scheme, &piece_of_grid);
  double total = 0.0;
  for (std::size_t g = 0; g < grids.size(); ++g) {
    const AffineFunction& piece = v.pieces()[static_cast<std::size_t>(piece_of_grid[g])];
    const double b = grids[g].integrate_boundary(
        [&](const Eigen::VectorXd& x) { return piece(x) / pow_int(f(x), q); },
        exec);
    const double in = grids[g].integrate_interior(
        [&](const Eigen::VectorXd& x) {
          return s(x) * piece(x) / pow_int(f(x), q + 2);
        },
        exec);
    total += 2.0 * b - in;
  }
  return total;
}

double bnorm_pl_impl(const LabelledPolytope& p, const AffineFunction& f,
                     const PLConvexFunction& v, const QuadratureScheme& scheme,
                     Exec exec) {
  const int q = 2 * p.dim() - 1;
  std::vector<int> piece_of_grid;
  auto grids = dominance_grids(p, v, scheme, &piece_of_grid);
  double total = 0.0;
  for (std::size_t g = 0; g < grids.size(); ++g) {
    const AffineFunction& piece = v.pieces()[static_cast<std::size_t>(piece_of_grid[g])];
    total += grids[g].integrate_boundary(
        [&](const Eigen::VectorXd& x) { return piece(x) / pow_int(f(x), q); },
        exec);
  }
  return total;
}

void check_normalized(const LabelledPolytope& p,
                      const std::function<double(const Eigen::VectorXd&)>& value) {
  const double v0 = value(p.basepoint());
  if (std::abs(v0) > 1e-12)
    throw NotNormalized("test function does not vanish at the basepoint");
  for (const auto& x : interior_probe_grid(p, 16))
    if (value(x) < -1e-10)
      throw NotNormalized("test function dips below zero on the probe grid");
}

std::string join_components(const Eigen::VectorXd& x) {
  std::string out = "(";
  for (int i = 0; i < x.size(); ++i) {
    if (i) out += " ";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", x[i]);
    out += buf;
  }
  out += ")";
  return out;
}

/// Deterministic quasi-uniform unit directions.
std::vector<Eigen::VectorXd> direction_grid(int m, int count) {
  std::vector<Eigen::VectorXd> dirs;
  if (m == 1) {
    for (int i = 0; i < std::min(count, 2); ++i) {
      Eigen::VectorXd d(1);
      d[0] = (i == 0) ? 1.0 : -1.0;
      dirs.push_back(d);
    }
    return dirs;
  }
  if (m == 2) {
    for (int k = 0; k < count; ++k) {
      const double th = 2.0 * M_PI * k / count;
      Eigen::VectorXd d(2);
      d << std::cos(th), std::sin(th);
      dirs.push_back(d);
    }
    return dirs;
  }
  // Fibonacci spiral on the 2-sphere around the x-axis pole.
  const double ga = M_PI * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double th = ga * k;
    Eigen::VectorXd d(3);
    d << z, r * std::cos(th), r * std::sin(th);
    dirs.push_back(d);
  }
  return dirs;
}

double unit_from_bits(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

ExtremalAffineSolution extremal_affine(const LabelledPolytope& p,
                                       const AffineFunction& f,
                                       const QuadratureScheme& scheme,
                                       Exec exec) {
  const MomentData md = weighted_moments(p, f, scheme, exec);
  const int m = p.dim();
  ExtremalAffineSolution sol;
  sol.gram = md.gram;
  sol.rhs = Eigen::VectorXd(m + 1);
  sol.rhs[0] = 2.0 * md.boundary_volume;
  sol.rhs.tail(m) = 2.0 * md.boundary_first;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sol.gram);
  const double lam_min = es.eigenvalues().minCoeff();
  const double lam_max = es.eigenvalues().maxCoeff();
  sol.condition = (lam_min > 0.0) ? lam_max / lam_min
                                  : std::numeric_limits<double>::infinity();
  if (!(sol.condition <= 1e12))
    throw IllConditionedGram("weighted moment matrix condition number " +
                             shortest_double(sol.condition));

  const Eigen::VectorXd a = Eigen::LLT<Eigen::MatrixXd>(sol.gram).solve(sol.rhs);
  sol.residual = (sol.gram * a - sol.rhs).norm();
  sol.s = AffineFunction(a.tail(m), a[0]);
  return sol;
}

double futaki(const LabelledPolytope& p, const AffineFunction& f,
              const AffineFunction& s, const PLConvexFunction& v,
              const QuadratureScheme& scheme, Exec exec) {
  return futaki_pl_impl(p, f, s, v, scheme, exec);
}

double futaki(const LabelledPolytope& p, const AffineFunction& f,
              const AffineFunction& s, const AffineFunction& v,
              const QuadratureScheme& scheme, Exec exec) {
  validate_weight(p, f);
  const int q = 2 * p.dim() - 1;
  auto grid = QuadratureGrid::build(p, scheme);
  const double b = grid.integrate_boundary(
      [&](const Eigen::VectorXd& x) { return v(x) / pow_int(f(x), q); }, exec);
  const double in = grid.integrate_interior(
      [&](const Eigen::VectorXd& x) {
        return s(x) * v(x) / pow_int(f(x), q + 2);
      },
      exec);
  return 2.0 * b - in;
}

double futaki(const AffineFunction& f, const AffineFunction& s,
              const SymplecticPotential& v, const QuadratureScheme& scheme,
              Exec exec) {
  const LabelledPolytope& p = v.polytope();
  validate_weight(p, f);
  const int q = 2 * p.dim() - 1;
  auto grid = QuadratureGrid::build(p, scheme);
  const double b = grid.integrate_boundary(
      [&](const Eigen::VectorXd& x) {
        return v.boundary_value(x) / pow_int(f(x), q);
      },
      exec);
  const double in = grid.integrate_interior(
      [&](const Eigen::VectorXd& x) {
        return s(x) * v.value(x) / pow_int(f(x), q + 2);
      },
      exec);
  return 2.0 * b - in;
}

double boundary_norm(const LabelledPolytope& p, const AffineFunction& f,
                     const PLConvexFunction& v, const QuadratureScheme& scheme,
                     Exec exec) {
  validate_weight(p, f);
  check_normalized(p, [&](const Eigen::VectorXd& x) { return v.value(x); });
  return bnorm_pl_impl(p, f, v, scheme, exec);
}

double boundary_norm(const LabelledPolytope& p, const AffineFunction& f,
                     const SymplecticPotential& v,
                     const QuadratureScheme& scheme, Exec exec) {
  validate_weight(p, f);
  check_normalized(p,
                   [&](const Eigen::VectorXd& x) { return v.boundary_value(x); });
  const int q = 2 * p.dim() - 1;
  auto grid = QuadratureGrid::build(p, scheme);
  return grid.integrate_boundary(
      [&](const Eigen::VectorXd& x) {
        return v.boundary_value(x) / pow_int(f(x), q);
      },
      exec);
}

double futaki_mabuchi_form(const LabelledPolytope& p, const AffineFunction& f,
                           const AffineFunction& phi1,
                           const AffineFunction& phi2,
                           const QuadratureScheme& scheme, Exec exec) {
  const MomentData md = weighted_moments(p, f, scheme, exec);
  // center both functions to zero weighted mean, then contract the moments
  const double mean1 =
      (phi1.gradient.dot(md.first) + phi1.constant * md.volume) / md.volume;
  const double mean2 =
      (phi2.gradient.dot(md.first) + phi2.constant * md.volume) / md.volume;
  const double c1 = phi1.constant - mean1;
  const double c2 = phi2.constant - mean2;
  return phi1.gradient.dot(md.second * phi2.gradient) +
         c1 * phi2.gradient.dot(md.first) + c2 * phi1.gradient.dot(md.first) +
         c1 * c2 * md.volume;
}

StabilityReport stability_scan(const LabelledPolytope& p,
                               const AffineFunction& f, const AffineFunction& s,
                               const ScanConfig& cfg,
                               const QuadratureScheme& scheme) {
  validate_weight(p, f);
  const int m = p.dim();
  const Eigen::VectorXd& x0 = p.basepoint();
  const double diam = p.diameter();

  struct Descriptor {
    std::string family;
    std::string params;
    PLConvexFunction v;
  };
  std::vector<Descriptor> jobs;

  // family (a): simple creases max(0, <a, x - x0> - c)
  for (const auto& dir : direction_grid(m, cfg.crease_directions)) {
    double h_max = 0.0;
    for (const auto& vert : p.vertices())
      h_max = std::max(h_max, dir.dot(vert - x0));
    const double c_cap = h_max - 0.05 * diam;
    for (int j = 0; j < cfg.crease_offsets; ++j) {
      double c = 0.0;
      if (j > 0) {
        if (c_cap <= 0.0) break;
        c = c_cap * j / (cfg.crease_offsets - 1);
      }
      AffineFunction crease(dir, -dir.dot(x0) - c);
      AffineFunction zero(Eigen::VectorXd::Zero(m), 0.0);
      Descriptor d{"crease",
                   "dir=" + join_components(dir) + ";c=" + shortest_double(c),
                   make_pl({zero, crease})};
      jobs.push_back(std::move(d));
    }
  }

  // family (b): normalized random maxima of affine pieces
  std::mt19937_64 rng(cfg.seed);
  for (int n = 0; n < cfg.random_count; ++n) {
    std::vector<AffineFunction> pieces;
    for (int k = 0; k < cfg.pieces_per_sample; ++k) {
      Eigen::VectorXd g(m);
      for (int i = 0; i < m; ++i) g[i] = 2.0 * unit_from_bits(rng) - 1.0;
      const double c = unit_from_bits(rng) - 0.5;
      pieces.emplace_back(std::move(g), c);
    }
    Descriptor d{"randmax",
                 "k=" + std::to_string(cfg.pieces_per_sample) +
                     ";draw=" + std::to_string(n),
                 normalize(make_pl(std::move(pieces)), x0)};
    jobs.push_back(std::move(d));
  }

  // evaluate samples independently, merge in generation order
  const int njobs = static_cast<int>(jobs.size());
  std::vector<double> fut(static_cast<std::size_t>(njobs)),
      bnr(static_cast<std::size_t>(njobs));
  std::vector<std::string> errors(static_cast<std::size_t>(njobs));
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < njobs; ++i) {
    try {
      fut[static_cast<std::size_t>(i)] =
          futaki_pl_impl(p, f, s, jobs[static_cast<std::size_t>(i)].v, scheme,
                         Exec::parallel);
      bnr[static_cast<std::size_t>(i)] =
          bnorm_pl_impl(p, f, jobs[static_cast<std::size_t>(i)].v, scheme,
                        Exec::parallel);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError("stability scan sample failed: " + e);

  StabilityReport report;
  report.attempted = njobs;
  report.seed = cfg.seed;
  report.scheme = scheme;
  report.lambda_hat = std::numeric_limits<double>::infinity();
  for (int i = 0; i < njobs; ++i) {
    const double b = bnr[static_cast<std::size_t>(i)];
    if (b < 1e-10) continue;  // degenerate test function, excluded
    ScanSample sample;
    sample.family = jobs[static_cast<std::size_t>(i)].family;
    sample.params = jobs[static_cast<std::size_t>(i)].params;
    sample.futaki = fut[static_cast<std::size_t>(i)];
    sample.bnorm = b;
    sample.ratio = sample.futaki / b;
    if (sample.ratio < report.lambda_hat) {
      report.lambda_hat = sample.ratio;
      report.argmin = static_cast<int>(report.samples.size());
    }
    report.samples.push_back(std::move(sample));
  }
  if (report.samples.empty()) report.lambda_hat = 0.0;
  return report;
}

std::string report_csv(const StabilityReport& report) {
  std::string out = "sample_id,family,params,futaki,bnorm,ratio\n";
  for (std::size_t i = 0; i < report.samples.size(); ++i) {
    const auto& s = report.samples[i];
    out += std::to_string(i) + "," + s.family + "," + s.params + "," +
           shortest_double(s.futaki) + "," + shortest_double(s.bnorm) + "," +
           shortest_double(s.ratio) + "\n";
  }
  return out;
}

}  // namespace kstab
