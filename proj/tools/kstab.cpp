// kstab: weighted K-stability toolbox for labelled polytopes.
//
// Subcommands operate on JSON spec files (see include/kstab/io.hpp for the
// exact formats) and write their artifacts plus a manifest echoing the fully
// resolved configuration into the output directory.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "kstab/acceptance.hpp"
#include "kstab/curvature.hpp"
#include "kstab/energy.hpp"
#include "kstab/format.hpp"
#include "kstab/io.hpp"

namespace {

using namespace kstab;

struct Common {
  int scheme_order = 6;
  int refine = 3;
  int grade = 3;
  std::uint64_t seed = 1;
  std::string out = "kstab-out";
  double tol = 1e-5;

  QuadratureScheme scheme() const {
    QuadratureScheme s;
    s.interior_order = scheme_order;
    s.boundary_order = scheme_order;
    s.refine = refine;
    s.grade = grade;
    return s;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--scheme-order", c.scheme_order,
                  "Quadrature order for interior and boundary rules")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--refine", c.refine, "Uniform refinement level")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--grade", c.grade, "Boundary grading level")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", c.seed, "Seed for randomized samplers");
  cmd->add_option("--out", c.out, "Output directory for artifacts");
  cmd->add_option("--tol", c.tol, "Convergence tolerance")
      ->check(CLI::PositiveNumber);
}

void write_manifest(const Common& c, const std::string& command,
                    std::vector<std::pair<std::string, std::string>> inputs) {
  std::filesystem::create_directories(c.out);
  RunManifest m;
  m.command = command;
  m.inputs = std::move(inputs);
  m.scheme = c.scheme();
  m.seed = c.seed;
  m.tol = c.tol;
  m.out_dir = c.out;
  write_text_file((std::filesystem::path(c.out) / "manifest.json").string(),
                  manifest_json(m));
}

std::string format_affine(const AffineFunction& a) {
  std::string out = shortest_double(a.constant);
  for (int i = 0; i < a.gradient.size(); ++i) {
    const double g = a.gradient[i];
    if (std::abs(g) <= 1e-9) continue;
    out += (g >= 0.0 ? " + " : " - ") + shortest_double(std::abs(g)) + "*x" +
           std::to_string(i + 1);
  }
  return out;
}

PolytopeSpec load_polytope(const std::string& path) {
  return parse_polytope_spec(read_text_file(path));
}

int cmd_validate(const Common& c, const std::string& path) {
  const auto spec = load_polytope(path);
  std::cout << "ok: dim = " << spec.polytope->dim()
            << ", labels = " << spec.polytope->labels().size()
            << ", vertices = " << spec.polytope->vertices().size()
            << ", weight positive on the closure\n";
  write_manifest(c, "validate", {{"polytope", path}});
  return 0;
}

int cmd_extremal(const Common& c, const std::string& path) {
  const auto spec = load_polytope(path);
  const auto sol = extremal_affine(*spec.polytope, spec.weight, c.scheme());
  std::cout << "s = " << format_affine(sol.s) << "\n";
  std::cout << "gram condition = " << shortest_double(sol.condition) << "\n";
  std::cout << "residual = " << shortest_double(sol.residual) << "\n";
  write_manifest(c, "extremal", {{"polytope", path}});
  return 0;
}

/// Subtract the affine tangent at the basepoint so the potential is a
/// normalized convex function (zero value and gradient at the basepoint).
SymplecticPotential normalize_at_basepoint(const SymplecticPotential& u) {
  const Eigen::VectorXd& x0 = u.polytope().basepoint();
  const double v0 = u.value(x0);
  const Eigen::VectorXd g0 = u.gradient_at(x0);
  const int m = u.polytope().dim();
  Polynomial q = u.perturbation();
  q.add_term(std::vector<int>(static_cast<std::size_t>(m), 0),
             -(v0 - g0.dot(x0)));
  for (int i = 0; i < m; ++i) {
    std::vector<int> e(static_cast<std::size_t>(m), 0);
    e[static_cast<std::size_t>(i)] = 1;
    q.add_term(std::move(e), -g0[i]);
  }
  return u.with_perturbation(std::move(q));
}

int cmd_futaki(const Common& c, const std::string& poly_path,
               const std::string& test_path) {
  const auto spec = load_polytope(poly_path);
  const auto scheme = c.scheme();
  const auto sol = extremal_affine(*spec.polytope, spec.weight, scheme);
  const std::string text = read_text_file(test_path);
  const auto probe = nlohmann::json::parse(text, nullptr, false);
  if (probe.is_discarded())
    throw SpecParseError("spec file is not valid JSON: " + test_path);

  double fut = 0.0, bnorm = 0.0;
  if (probe.is_object() && probe.contains("pieces")) {
    const auto v = parse_pl_spec(text, spec.polytope->dim());
    fut = futaki(*spec.polytope, spec.weight, sol.s, v, scheme);
    bnorm = boundary_norm(*spec.polytope, spec.weight, v, scheme);
  } else {
    const auto u = parse_potential_spec(text, spec.polytope);
    const auto v = normalize_at_basepoint(u);
    fut = futaki(spec.weight, sol.s, v, scheme);
    bnorm = boundary_norm(*spec.polytope, spec.weight, v, scheme);
  }
  std::cout << "futaki = " << shortest_double(fut) << "\n";
  std::cout << "boundary_norm = " << shortest_double(bnorm) << "\n";
  std::cout << "ratio = " << shortest_double(fut / bnorm) << "\n";
  write_manifest(c, "futaki", {{"polytope", poly_path}, {"test", test_path}});
  return 0;
}

int cmd_curvature(const Common& c, const std::string& poly_path,
                  const std::string& pot_path) {
  const auto spec = load_polytope(poly_path);
  const auto u = parse_potential_spec(read_text_file(pot_path), spec.polytope);
  u.certify_convexity(32);
  const auto samples = sample_curvature(u, spec.weight);
  double lo = samples.front().weighted, hi = lo;
  for (const auto& s : samples) {
    lo = std::min(lo, s.weighted);
    hi = std::max(hi, s.weighted);
  }
  std::filesystem::create_directories(c.out);
  const auto csv_path = (std::filesystem::path(c.out) / "curvature.csv").string();
  write_text_file(csv_path, curvature_csv(samples, spec.polytope->dim()));
  std::cout << "wrote " << csv_path << " (" << samples.size() << " samples)\n";
  std::cout << "weighted curvature range = [" << shortest_double(lo) << ", "
            << shortest_double(hi) << "]\n";
  write_manifest(c, "curvature",
                 {{"polytope", poly_path}, {"potential", pot_path}});
  return 0;
}

int cmd_scan(const Common& c, const std::string& poly_path) {
  const auto spec = load_polytope(poly_path);
  const auto scheme = c.scheme();
  const auto sol = extremal_affine(*spec.polytope, spec.weight, scheme);
  ScanConfig cfg;
  cfg.seed = c.seed;
  const auto report = stability_scan(*spec.polytope, spec.weight, sol.s, cfg,
                                     scheme);
  std::filesystem::create_directories(c.out);
  const auto csv_path = (std::filesystem::path(c.out) / "scan.csv").string();
  write_text_file(csv_path, report_csv(report));
  std::cout << "wrote " << csv_path << " (" << report.samples.size() << "/"
            << report.attempted << " degenerate-free samples)\n";
  std::cout << "lambda_hat = " << shortest_double(report.lambda_hat) << "\n";
  const auto& arg = report.samples[static_cast<std::size_t>(report.argmin)];
  std::cout << "argmin = sample " << report.argmin << " (" << arg.family
            << "; " << arg.params << ")\n";
  write_manifest(c, "scan", {{"polytope", poly_path}});
  return 0;
}

int cmd_kenergy(const Common& c, const std::string& poly_path,
                const std::string& pot_path) {
  const auto spec = load_polytope(poly_path);
  const auto u = parse_potential_spec(read_text_file(pot_path), spec.polytope);
  const auto e = k_energy(u, spec.weight, c.scheme());
  std::cout << "energy = " << shortest_double(e.total) << "\n";
  std::cout << "futaki_part = " << shortest_double(e.futaki_part) << "\n";
  std::cout << "entropy_part = " << shortest_double(e.entropy_part) << "\n";
  write_manifest(c, "kenergy",
                 {{"polytope", poly_path}, {"potential", pot_path}});
  return 0;
}

int cmd_minimize(const Common& c, const std::string& poly_path,
                 const std::string& pot_path) {
  const auto spec = load_polytope(poly_path);
  const auto u = parse_potential_spec(read_text_file(pot_path), spec.polytope);
  if (!u.canonical())
    throw ValidationError("minimize requires a canonical potential spec");
  MinimizeOptions opt;
  opt.residual_tol = c.tol;
  opt.seed = c.seed;
  const auto res = minimize_k_energy(spec.polytope, spec.weight,
                                     u.perturbation(), opt, c.scheme());
  std::filesystem::create_directories(c.out);
  const auto hist_path = (std::filesystem::path(c.out) / "history.csv").string();
  const auto final_path =
      (std::filesystem::path(c.out) / "final_potential.json").string();
  write_text_file(hist_path, history_csv(res));
  write_text_file(final_path, write_potential_spec(res.final_potential));
  std::cout << "termination = " << res.termination << " after "
            << res.history.size() - 1 << " steps\n";
  std::cout << "energy = " << shortest_double(res.history.back().energy)
            << "\n";
  std::cout << "residual = " << shortest_double(res.history.back().residual)
            << "\n";
  std::cout << "futaki = " << shortest_double(res.final_futaki)
            << " (solution identity target "
            << shortest_double(res.solution_identity_target) << ")\n";
  std::cout << "wrote " << hist_path << " and " << final_path << "\n";
  write_manifest(c, "minimize",
                 {{"polytope", poly_path}, {"potential", pot_path}});
  return 0;
}

int cmd_selftest(const Common& c) {
  const auto results = run_acceptance();
  const int failures = report_acceptance(results, std::cout);
  write_manifest(c, "selftest", {});
  return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weighted K-stability toolbox for labelled polytopes"};
  app.require_subcommand(1);

  Common common;
  std::string poly_path, aux_path;
  int rc = 0;

  auto* validate = app.add_subcommand("validate", "Check a polytope spec");
  validate->add_option("polytope", poly_path, "Polytope spec file")
      ->required();
  add_common(validate, common);
  validate->callback([&] { rc = cmd_validate(common, poly_path); });

  auto* extremal =
      app.add_subcommand("extremal", "Extremal affine function and diagnostics");
  extremal->add_option("polytope", poly_path, "Polytope spec file")
      ->required();
  add_common(extremal, common);
  extremal->callback([&] { rc = cmd_extremal(common, poly_path); });

  auto* fut = app.add_subcommand(
      "futaki", "Invariant and boundary norm of a test function");
  fut->add_option("polytope", poly_path, "Polytope spec file")->required();
  fut->add_option("test", aux_path,
                  "Piecewise linear or potential spec file")
      ->required();
  add_common(fut, common);
  fut->callback([&] { rc = cmd_futaki(common, poly_path, aux_path); });

  auto* curv = app.add_subcommand(
      "curvature", "Sample weighted scalar curvature on a grid (CSV)");
  curv->add_option("polytope", poly_path, "Polytope spec file")->required();
  curv->add_option("potential", aux_path, "Potential spec file")->required();
  add_common(curv, common);
  curv->callback([&] { rc = cmd_curvature(common, poly_path, aux_path); });

  auto* scan = app.add_subcommand(
      "scan", "Seeded destabilizer search with ratio report (CSV)");
  scan->add_option("polytope", poly_path, "Polytope spec file")->required();
  add_common(scan, common);
  scan->callback([&] { rc = cmd_scan(common, poly_path); });

  auto* ken = app.add_subcommand("kenergy", "Relative energy of a potential");
  ken->add_option("polytope", poly_path, "Polytope spec file")->required();
  ken->add_option("potential", aux_path, "Potential spec file")->required();
  add_common(ken, common);
  ken->callback([&] { rc = cmd_kenergy(common, poly_path, aux_path); });

  auto* mini = app.add_subcommand(
      "minimize", "Descend the energy toward a constant-curvature potential");
  mini->add_option("polytope", poly_path, "Polytope spec file")->required();
  mini->add_option("potential", aux_path, "Initial potential spec file")
      ->required();
  add_common(mini, common);
  mini->callback([&] { rc = cmd_minimize(common, poly_path, aux_path); });

  auto* self =
      app.add_subcommand("selftest", "Run the closed-form oracle suite");
  add_common(self, common);
  self->callback([&] { rc = cmd_selftest(common); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
