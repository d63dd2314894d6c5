#include "kstab/quadrature.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace kstab {

namespace {

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

/// Euclidean k-volume of a k-simplex embedded in R^m (k = v.size()-1).
double simplex_measure(int ambient, const std::vector<Eigen::VectorXd>& v) {
  const int k = static_cast<int>(v.size()) - 1;
  if (k == 0) return 1.0;
  Eigen::MatrixXd a(ambient, k);
  for (int i = 0; i < k; ++i) a.col(i) = v[i + 1] - v[0];
  if (k == ambient) return std::abs(a.determinant()) / factorial(k);
  Eigen::MatrixXd g = a.transpose() * a;
  const double det = g.determinant();
  return det > 0.0 ? std::sqrt(det) / factorial(k) : 0.0;
}

/// Shared fan construction over explicit hull data.  In strict mode a
/// degenerate fan cell is an error; cells from clipped regions instead drop
/// slivers below the tolerance.
Triangulation fan_triangulation(int m, const std::vector<Eigen::VectorXd>& verts,
                                const std::vector<Facet>& facets,
                                int boundary_label_limit, bool strict) {
  Triangulation t;
  t.dim = m;
  Eigen::VectorXd apex = Eigen::VectorXd::Zero(m);
  for (const auto& v : verts) apex += v;
  apex /= static_cast<double>(verts.size());

  double scale = 1.0;
  for (const auto& v : verts) scale = std::max(scale, v.lpNorm<Eigen::Infinity>());
  const double vol_floor = 1e-13 * std::pow(scale, m);

  for (const auto& f : facets) {
    std::vector<Simplex> pieces;
    if (m == 1) {
      Simplex s;
      s.v = {verts[f.vertices[0]]};
      s.measure = 1.0;
      pieces.push_back(std::move(s));
    } else if (m == 2) {
      for (std::size_t i = 0; i + 1 < f.vertices.size(); ++i) {
        Simplex s;
        s.v = {verts[f.vertices[i]], verts[f.vertices[i + 1]]};
        s.measure = simplex_measure(m, s.v);
        pieces.push_back(std::move(s));
      }
    } else {
      for (std::size_t i = 1; i + 1 < f.vertices.size(); ++i) {
        Simplex s;
        s.v = {verts[f.vertices[0]], verts[f.vertices[i]], verts[f.vertices[i + 1]]};
        s.measure = simplex_measure(m, s.v);
        if (s.measure > 1e-14 * scale * scale || strict) pieces.push_back(std::move(s));
      }
    }

    for (const auto& piece : pieces) {
      Simplex cell;
      cell.v.reserve(m + 1);
      cell.v.push_back(apex);
      for (const auto& pv : piece.v) cell.v.push_back(pv);
      cell.measure = simplex_measure(m, cell.v);
      if (cell.measure <= vol_floor) {
        if (strict) {
          std::ostringstream msg;
          msg << "degenerate fan simplex on facet " << f.label
              << " (volume " << cell.measure << ")";
          throw DegenerateSimplex(msg.str());
        }
        continue;
      }
      t.cells.push_back(std::move(cell));
    }

    if (f.label < boundary_label_limit) {
      FacetPatch patch;
      patch.facet = f.label;
      patch.pieces = std::move(pieces);
      t.boundary.push_back(std::move(patch));
    }
  }
  return t;
}

/// Midpoint ("red") subdivision of a k-simplex into 2^k children.
std::vector<Simplex> subdivide(const Simplex& s, int ambient) {
  const int k = static_cast<int>(s.v.size()) - 1;
  std::vector<Simplex> out;
  auto mid = [&](int a, int b) { return Eigen::VectorXd(0.5 * (s.v[a] + s.v[b])); };
  auto push = [&](std::initializer_list<Eigen::VectorXd> verts) {
    Simplex c;
    c.v = verts;
    c.measure = simplex_measure(ambient, c.v);
    out.push_back(std::move(c));
  };
  if (k == 0) {
    out.push_back(s);
  } else if (k == 1) {
    Eigen::VectorXd m01 = mid(0, 1);
    push({s.v[0], m01});
    push({m01, s.v[1]});
  } else if (k == 2) {
    Eigen::VectorXd m01 = mid(0, 1), m02 = mid(0, 2), m12 = mid(1, 2);
    push({s.v[0], m01, m02});
    push({m01, s.v[1], m12});
    push({m02, m12, s.v[2]});
    push({m01, m12, m02});
  } else if (k == 3) {
    Eigen::VectorXd m01 = mid(0, 1), m02 = mid(0, 2), m03 = mid(0, 3);
    Eigen::VectorXd m12 = mid(1, 2), m13 = mid(1, 3), m23 = mid(2, 3);
    push({s.v[0], m01, m02, m03});
    push({m01, s.v[1], m12, m13});
    push({m02, m12, s.v[2], m23});
    push({m03, m13, m23, s.v[3]});
    push({m01, m02, m03, m13});
    push({m01, m02, m12, m13});
    push({m02, m03, m13, m23});
    push({m02, m12, m13, m23});
  } else {
    throw NumericalError("subdivision not implemented beyond dimension 3");
  }
  return out;
}

bool touches_boundary(const Simplex& s, const LabelledPolytope& p, double tol) {
  for (const auto& v : s.v)
    if (p.min_label(v) <= tol) return true;
  return false;
}

bool touches_ridge(const Simplex& s, const LabelledPolytope& p, int own_label,
                   double tol) {
  for (const auto& v : s.v) {
    double other = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.labels().size(); ++i)
      if (static_cast<int>(i) != own_label)
        other = std::min(other, p.labels()[i](v));
    if (other <= tol) return true;
  }
  return false;
}

// ---- parallel node evaluation ---------------------------------------------

/// Evaluate fn(i) for i in [0, n), concurrently when OpenMP is available and
/// we are not already inside a parallel region.  Exceptions are captured and
/// rethrown as NodeEvaluationFailure.
template <class Fn>
void evaluate_nodes(std::size_t n, Fn&& fn) {
  std::atomic<bool> failed{false};
  std::string first_message;
  std::mutex message_mutex;
  auto guarded = [&](std::size_t i) {
    if (failed.load(std::memory_order_relaxed)) return;
    try {
      fn(i);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(message_mutex);
      if (!failed.exchange(true)) first_message = e.what();
    } catch (...) {
      std::lock_guard<std::mutex> lock(message_mutex);
      if (!failed.exchange(true)) first_message = "unknown node evaluation error";
    }
  };
#if defined(_OPENMP)
  if (!omp_in_parallel()) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(n); ++i)
      guarded(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  }
#else
  for (std::size_t i = 0; i < n; ++i) guarded(i);
#endif
  if (failed.load())
    throw NodeEvaluationFailure("node evaluation failed: " + first_message);
}

double compensated_sum_strided(const std::vector<double>& a, std::size_t n,
                               std::size_t stride, std::size_t offset) {
  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a[i * stride + offset];
    const double t = s + x;
    if (std::abs(s) >= std::abs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  return s + c;
}

void check_finite(double value, const Eigen::VectorXd& x) {
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "non-finite integrand value at node (" << x.transpose() << ")";
    throw NodeEvaluationFailure(msg.str());
  }
}

}  // namespace

double Triangulation::total_volume() const {
  std::vector<double> vols;
  vols.reserve(cells.size());
  for (const auto& c : cells) vols.push_back(c.measure);
  return compensated_sum(vols);
}

Triangulation triangulate(const LabelledPolytope& p) {
  return fan_triangulation(p.dim(), p.vertices(), p.facets(),
                           static_cast<int>(p.labels().size()), true);
}

Triangulation triangulate_cell(const ConvexCell& c) {
  return fan_triangulation(c.dim, c.vertices, c.facets, c.base_label_count, false);
}

Triangulation refine(const Triangulation& t, const LabelledPolytope& p,
                     int uniform, int graded) {
  if (uniform < 0 || graded < 0 || uniform + graded > 14)
    throw ValidationError("refinement levels out of range");
  Triangulation out = t;
  const double tol = 1e-9 * (1.0 + p.diameter());

  for (int round = 0; round < uniform + graded; ++round) {
    const bool grading = round >= uniform;
    std::vector<Simplex> cells;
    for (const auto& c : out.cells) {
      if (grading && !touches_boundary(c, p, tol)) {
        cells.push_back(c);
        continue;
      }
      for (auto& child : subdivide(c, out.dim)) cells.push_back(std::move(child));
    }
    out.cells = std::move(cells);

    if (out.dim > 1) {
      for (auto& patch : out.boundary) {
        std::vector<Simplex> pieces;
        for (const auto& s : patch.pieces) {
          if (grading && !touches_ridge(s, p, patch.facet, tol)) {
            pieces.push_back(s);
            continue;
          }
          for (auto& child : subdivide(s, out.dim)) pieces.push_back(std::move(child));
        }
        patch.pieces = std::move(pieces);
      }
    }
  }
  return out;
}

const SimplexRule& simplex_rule(int dim, int min_degree) {
  static std::map<std::pair<int, int>, SimplexRule> cache;
  static std::mutex cache_mutex;
  const int s = dim == 0 ? 0 : std::max(0, (min_degree - 1 + 1) / 2);
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto key = std::make_pair(dim, s);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  SimplexRule rule;
  rule.dim = dim;
  if (dim == 0) {
    rule.degree = std::max(1, min_degree);
    rule.points.push_back(Eigen::VectorXd(0));
    rule.weights.push_back(1.0);
    return cache.emplace(key, std::move(rule)).first->second;
  }

  // Cubature of odd degree d = 2s+1 on the unit simplex, built from the
  // classical alternating combination of equally weighted point sets
  //   sum_{i=0..s} (-1)^i 2^{-2s} (d+n-2i)^d / (i! (d+n-i)!) *
  //   sum_{|beta| = s-i} f((2 beta_1 + 1)/(d+n-2i), ...)
  // with beta ranging over nonnegative integer (n+1)-tuples.
  const int n = dim;
  const int d = 2 * s + 1;
  rule.degree = d;
  for (int i = 0; i <= s; ++i) {
    const double coeff = ((i % 2) ? -1.0 : 1.0) * std::exp2(-2.0 * s) *
                         std::pow(static_cast<double>(d + n - 2 * i), d) /
                         (factorial(i) * factorial(d + n - i));
    std::vector<int> beta(n + 1, 0);
    const int total = s - i;
    // enumerate all beta with |beta| = total
    std::function<void(int, int)> rec = [&](int pos, int left) {
      if (pos == n) {
        beta[n] = left;
        Eigen::VectorXd x(n);
        for (int j = 0; j < n; ++j)
          x[j] = (2.0 * beta[j + 1] + 1.0) / (d + n - 2 * i);
        rule.points.push_back(std::move(x));
        rule.weights.push_back(coeff);
        return;
      }
      for (int b = 0; b <= left; ++b) {
        beta[pos] = b;
        rec(pos + 1, left - b);
      }
    };
    rec(0, total);
  }
  return cache.emplace(key, std::move(rule)).first->second;
}

// ---- grids ----------------------------------------------------------------

namespace {

void append_cell_nodes(const Simplex& cell, const SimplexRule& rule,
                       double extra_factor, InteriorNodes* interior,
                       BoundaryNodes* boundary, int facet_id) {
  const int k = static_cast<int>(cell.v.size()) - 1;
  const double jac = factorial(k) * cell.measure * extra_factor;
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    Eigen::VectorXd x = cell.v[0];
    for (int j = 0; j < k; ++j)
      x += rule.points[q][j] * (cell.v[j + 1] - cell.v[0]);
    const double w = rule.weights[q] * jac;
    if (interior) {
      interior->x.push_back(std::move(x));
      interior->w.push_back(w);
    } else {
      boundary->x.push_back(std::move(x));
      boundary->w.push_back(w);
      boundary->facet.push_back(facet_id);
    }
  }
}

std::pair<InteriorNodes, BoundaryNodes> build_nodes(
    const Triangulation& tri, const std::vector<AffineFunction>& labels,
    const QuadratureScheme& s) {
  InteriorNodes interior;
  BoundaryNodes boundary;
  const SimplexRule& irule = simplex_rule(tri.dim, s.interior_order);
  const SimplexRule& brule = simplex_rule(tri.dim - 1, s.boundary_order);
  for (const auto& cell : tri.cells)
    append_cell_nodes(cell, irule, 1.0, &interior, nullptr, -1);
  for (const auto& patch : tri.boundary) {
    const double density = 1.0 / labels[patch.facet].gradient.norm();
    for (const auto& piece : patch.pieces)
      append_cell_nodes(piece, brule, density, nullptr, &boundary, patch.facet);
  }
  return {std::move(interior), std::move(boundary)};
}

}  // namespace

QuadratureGrid QuadratureGrid::build(const LabelledPolytope& p,
                                     const QuadratureScheme& s) {
  Triangulation tri = refine(triangulate(p), p, s.refine, s.grade);
  QuadratureGrid grid;
  std::tie(grid.interior_, grid.boundary_) = build_nodes(tri, p.labels(), s);
  return grid;
}

QuadratureGrid QuadratureGrid::build_cell(const ConvexCell& c,
                                          const LabelledPolytope& base,
                                          const QuadratureScheme& s) {
  Triangulation tri = refine(triangulate_cell(c), base, s.refine, s.grade);
  QuadratureGrid grid;
  std::tie(grid.interior_, grid.boundary_) = build_nodes(tri, c.labels, s);
  return grid;
}

double compensated_sum(const std::vector<double>& a) {
  return compensated_sum_strided(a, a.size(), 1, 0);
}

double QuadratureGrid::integrate_interior(
    const std::function<double(const Eigen::VectorXd&)>& h, Exec exec) const {
  const std::size_t n = interior_.x.size();
  if (exec == Exec::serial) {
    // Reference implementation: straightforward accumulation in node order.
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double term = interior_.w[i] * h(interior_.x[i]);
      check_finite(term, interior_.x[i]);
      acc += term;
    }
    return acc;
  }
  std::vector<double> buf(n);
  evaluate_nodes(n, [&](std::size_t i) { buf[i] = interior_.w[i] * h(interior_.x[i]); });
  for (std::size_t i = 0; i < n; ++i) check_finite(buf[i], interior_.x[i]);
  return compensated_sum(buf);
}

double QuadratureGrid::integrate_boundary(
    const std::function<double(const Eigen::VectorXd&)>& h, Exec exec) const {
  const std::size_t n = boundary_.x.size();
  if (exec == Exec::serial) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double term = boundary_.w[i] * h(boundary_.x[i]);
      check_finite(term, boundary_.x[i]);
      acc += term;
    }
    return acc;
  }
  std::vector<double> buf(n);
  evaluate_nodes(n, [&](std::size_t i) { buf[i] = boundary_.w[i] * h(boundary_.x[i]); });
  for (std::size_t i = 0; i < n; ++i) check_finite(buf[i], boundary_.x[i]);
  return compensated_sum(buf);
}

Eigen::VectorXd QuadratureGrid::integrate_interior_multi(
    int ncomp, const std::function<void(const Eigen::VectorXd&, double*)>& fill,
    Exec exec) const {
  const std::size_t n = interior_.x.size();
  std::vector<double> buf(n * ncomp);
  auto eval = [&](std::size_t i) {
    fill(interior_.x[i], &buf[i * ncomp]);
    for (int c = 0; c < ncomp; ++c) buf[i * ncomp + c] *= interior_.w[i];
  };
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) eval(i);
  } else {
    evaluate_nodes(n, eval);
  }
  Eigen::VectorXd out(ncomp);
  for (int c = 0; c < ncomp; ++c) {
    out[c] = compensated_sum_strided(buf, n, ncomp, c);
    if (!std::isfinite(out[c]))
      throw NodeEvaluationFailure("non-finite integrand in component pass");
  }
  return out;
}

Eigen::VectorXd QuadratureGrid::integrate_boundary_multi(
    int ncomp,
    const std::function<void(const Eigen::VectorXd&, int, double*)>& fill,
    Exec exec) const {
  const std::size_t n = boundary_.x.size();
  std::vector<double> buf(n * ncomp);
  auto eval = [&](std::size_t i) {
    fill(boundary_.x[i], boundary_.facet[i], &buf[i * ncomp]);
    for (int c = 0; c < ncomp; ++c) buf[i * ncomp + c] *= boundary_.w[i];
  };
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) eval(i);
  } else {
    evaluate_nodes(n, eval);
  }
  Eigen::VectorXd out(ncomp);
  for (int c = 0; c < ncomp; ++c) {
    out[c] = compensated_sum_strided(buf, n, ncomp, c);
    if (!std::isfinite(out[c]))
      throw NodeEvaluationFailure("non-finite integrand in component pass");
  }
  return out;
}

// ---- integral operations ----------------------------------------------------

namespace {

std::function<double(const Eigen::VectorXd&)> over_weight(
    const AffineFunction& f, int k,
    const std::function<double(const Eigen::VectorXd&)>& h) {
  return [&f, k, h](const Eigen::VectorXd& x) {
    const double fv = f(x);
    if (fv <= 0.0) throw NodeEvaluationFailure("weight is not positive at a node");
    return h(x) / std::pow(fv, k);
  };
}

}  // namespace

double integrate_interior(const LabelledPolytope& p, const AffineFunction& f,
                          int k,
                          const std::function<double(const Eigen::VectorXd&)>& h,
                          const QuadratureScheme& s, Exec exec) {
  QuadratureGrid grid = QuadratureGrid::build(p, s);
  return grid.integrate_interior(over_weight(f, k, h), exec);
}

double integrate_boundary(const LabelledPolytope& p, const AffineFunction& f,
                          int k,
                          const std::function<double(const Eigen::VectorXd&)>& h,
                          const QuadratureScheme& s, Exec exec) {
  QuadratureGrid grid = QuadratureGrid::build(p, s);
  return grid.integrate_boundary(over_weight(f, k, h), exec);
}

double facet_sigma_measure(const LabelledPolytope& p, int facet_index) {
  Triangulation tri = triangulate(p);
  for (const auto& patch : tri.boundary) {
    if (patch.facet != facet_index) continue;
    std::vector<double> parts;
    for (const auto& piece : patch.pieces) parts.push_back(piece.measure);
    return compensated_sum(parts) * facet_measure(p, facet_index).density;
  }
  throw ValidationError("facet index out of range");
}

MomentData weighted_moments(const LabelledPolytope& p, const AffineFunction& f,
                            const QuadratureScheme& s, Exec exec) {
  validate_weight(p, f);
  const int m = p.dim();
  const int ki = 2 * m + 1;
  const int kb = 2 * m - 1;
  QuadratureGrid grid = QuadratureGrid::build(p, s);

  const int ncomp_i = 1 + m + m * (m + 1) / 2;
  Eigen::VectorXd mi = grid.integrate_interior_multi(
      ncomp_i,
      [&](const Eigen::VectorXd& x, double* out) {
        const double wf = 1.0 / std::pow(f(x), ki);
        int c = 0;
        out[c++] = wf;
        for (int i = 0; i < m; ++i) out[c++] = wf * x[i];
        for (int i = 0; i < m; ++i)
          for (int j = i; j < m; ++j) out[c++] = wf * x[i] * x[j];
      },
      exec);

  Eigen::VectorXd mb = grid.integrate_boundary_multi(
      1 + m,
      [&](const Eigen::VectorXd& x, int, double* out) {
        const double wf = 1.0 / std::pow(f(x), kb);
        out[0] = wf;
        for (int i = 0; i < m; ++i) out[1 + i] = wf * x[i];
      },
      exec);

  MomentData md;
  md.scheme = s;
  md.volume = mi[0];
  md.first = mi.segment(1, m);
  md.second.resize(m, m);
  {
    int c = 1 + m;
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        md.second(i, j) = mi[c];
        md.second(j, i) = mi[c];
        ++c;
      }
  }
  md.boundary_volume = mb[0];
  md.boundary_first = mb.segment(1, m);

  md.gram.resize(m + 1, m + 1);
  md.gram(0, 0) = md.volume;
  md.gram.block(0, 1, 1, m) = md.first.transpose();
  md.gram.block(1, 0, m, 1) = md.first;
  md.gram.block(1, 1, m, m) = md.second;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(md.gram);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw NumericalError("moment Gram matrix is not positive definite");
  return md;
}

}  // namespace kstab
