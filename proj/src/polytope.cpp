#include "kstab/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace kstab {

namespace {

double label_scale(const std::vector<AffineFunction>& labels) {
  double cmax = 0.0, umax = 0.0;
  for (const auto& L : labels) {
    cmax = std::max(cmax, std::abs(L.constant));
    umax = std::max(umax, L.gradient.norm());
  }
  return 1.0 + cmax + umax;
}

/// Visit every size-k index subset of {0, ..., n-1} in lexicographic order.
template <class F>
void for_each_subset(int n, int k, F&& fn) {
  if (k < 0 || k > n) return;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

int affine_dim(const std::vector<Eigen::VectorXd>& pts,
               const std::vector<int>& subset) {
  if (subset.empty()) return -1;
  if (subset.size() == 1) return 0;
  const int m = static_cast<int>(pts[subset[0]].size());
  Eigen::MatrixXd diff(static_cast<int>(subset.size()) - 1, m);
  double scale = 1.0;
  for (std::size_t i = 1; i < subset.size(); ++i) {
    diff.row(static_cast<int>(i) - 1) = (pts[subset[i]] - pts[subset[0]]).transpose();
    scale = std::max(scale, pts[subset[i]].lpNorm<Eigen::Infinity>());
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(diff);
  const double thresh = 1e-9 * scale;
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > thresh) ++rank;
  return rank;
}

int matrix_rank(const Eigen::MatrixXd& a, double rel_thresh) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  if (svd.singularValues().size() == 0) return 0;
  const double thresh = rel_thresh * std::max(1.0, svd.singularValues()[0]);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > thresh) ++rank;
  return rank;
}

bool ray_feasible(const std::vector<AffineFunction>& labels,
                  const Eigen::VectorXd& y) {
  for (const auto& L : labels) {
    const double un = L.gradient.norm();
    if (L.gradient.dot(y) < -1e-10 * un * y.norm()) return false;
  }
  return true;
}

/// True when the recession cone {y : <u_i, y> >= 0 for all i} is nontrivial,
/// i.e. the intersection of the half-spaces is unbounded (when nonempty).
bool recession_direction_exists(const std::vector<AffineFunction>& labels, int m) {
  const int d = static_cast<int>(labels.size());
  Eigen::MatrixXd normals(d, m);
  for (int i = 0; i < d; ++i) normals.row(i) = labels[i].gradient.transpose();
  if (matrix_rank(normals, 1e-9) < m) return true;  // contains a line direction

  if (m == 1) {
    Eigen::VectorXd y(1);
    y[0] = 1.0;
    if (ray_feasible(labels, y)) return true;
    y[0] = -1.0;
    return ray_feasible(labels, y);
  }

  // An extreme ray of a pointed cone lies on m-1 independent constraints.
  bool found = false;
  for_each_subset(d, m - 1, [&](const std::vector<int>& idx) {
    if (found) return;
    Eigen::MatrixXd a(m - 1, m);
    for (int i = 0; i < m - 1; ++i) a.row(i) = labels[idx[i]].gradient.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-10);
    if (lu.rank() < m - 1) return;
    Eigen::MatrixXd kernel = lu.kernel();
    for (int c = 0; c < kernel.cols(); ++c) {
      Eigen::VectorXd y = kernel.col(c);
      if (y.norm() < 1e-14) continue;
      y.normalize();
      if (ray_feasible(labels, y) || ray_feasible(labels, Eigen::VectorXd(-y)))
        found = true;
    }
  });
  return found;
}

struct HullData {
  std::vector<Eigen::VectorXd> vertices;
  std::vector<std::vector<int>> active;  // label indices vanishing at vertex i
};

HullData enumerate_vertices(const std::vector<AffineFunction>& labels, int m,
                            double feas_tol, double merge_tol) {
  HullData hull;
  const int d = static_cast<int>(labels.size());
  const double scale = label_scale(labels);
  for_each_subset(d, m, [&](const std::vector<int>& idx) {
    Eigen::MatrixXd a(m, m);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
      a.row(i) = labels[idx[i]].gradient.transpose();
      b[i] = -labels[idx[i]].constant;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) return;
    Eigen::VectorXd x = lu.solve(b);
    if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > 1e12 * scale) return;
    for (const auto& L : labels)
      if (L(x) < -feas_tol) return;
    for (const auto& v : hull.vertices)
      if ((v - x).lpNorm<Eigen::Infinity>() <= merge_tol) return;
    hull.vertices.push_back(std::move(x));
  });
  hull.active.resize(hull.vertices.size());
  for (std::size_t v = 0; v < hull.vertices.size(); ++v)
    for (int i = 0; i < d; ++i)
      if (std::abs(labels[i](hull.vertices[v])) <= feas_tol)
        hull.active[v].push_back(i);
  return hull;
}

/// Order the vertex indices of one facet for traversal: by position along the
/// edge for m = 2, as a ring around the facet centroid for m = 3.
void order_facet_vertices(int m, const std::vector<Eigen::VectorXd>& verts,
                          const AffineFunction& label, std::vector<int>& idx) {
  if (m <= 1 || idx.size() <= 1) return;
  if (m == 2) {
    Eigen::VectorXd t(2);
    t[0] = -label.gradient[1];
    t[1] = label.gradient[0];
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return t.dot(verts[a]) < t.dot(verts[b]);
    });
    return;
  }
  // m == 3: angular sort in the facet plane.
  Eigen::Vector3d n = label.gradient.normalized();
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (int i : idx) c += verts[i];
  c /= static_cast<double>(idx.size());
  Eigen::Vector3d e1 = Eigen::Vector3d::Zero();
  for (int i : idx) {
    e1 = (Eigen::Vector3d(verts[i]) - c) - ((Eigen::Vector3d(verts[i]) - c).dot(n)) * n;
    if (e1.norm() > 1e-12) break;
  }
  e1.normalize();
  Eigen::Vector3d e2 = n.cross(e1);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    Eigen::Vector3d da = Eigen::Vector3d(verts[a]) - c;
    Eigen::Vector3d db = Eigen::Vector3d(verts[b]) - c;
    return std::atan2(da.dot(e2), da.dot(e1)) < std::atan2(db.dot(e2), db.dot(e1));
  });
}

}  // namespace

LabelledPolytope LabelledPolytope::build(std::vector<AffineFunction> labels,
                                         std::optional<Eigen::VectorXd> basepoint) {
  if (labels.empty()) throw ValidationError("polytope needs at least one label");
  const int m = labels[0].dim();
  if (m < 1) throw ValidationError("polytope dimension must be at least 1");
  for (const auto& L : labels) {
    if (L.dim() != m) throw ValidationError("labels have inconsistent dimensions");
    if (L.gradient.norm() == 0.0) throw ValidationError("label has zero normal");
  }
  const int d = static_cast<int>(labels.size());
  if (d < m + 1) {
    std::ostringstream msg;
    msg << "need at least " << m + 1 << " labels in dimension " << m
        << ", got " << d;
    throw ValidationError(msg.str());
  }

  LabelledPolytope p;
  p.dim_ = m;
  p.geom_tol_ = 1e-12 * label_scale(labels);

  if (recession_direction_exists(labels, m))
    throw UnboundedPolytope("label half-spaces do not bound a compact region");

  HullData hull = enumerate_vertices(labels, m, p.geom_tol_, 8.0 * p.geom_tol_);
  if (hull.vertices.empty())
    throw EmptyInterior("no point satisfies all labels");
  std::vector<int> all(hull.vertices.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  if (affine_dim(hull.vertices, all) < m)
    throw EmptyInterior("interior is empty: vertex set is lower-dimensional");

  for (std::size_t v = 0; v < hull.vertices.size(); ++v) {
    if (static_cast<int>(hull.active[v].size()) > m) {
      std::ostringstream msg;
      msg << "vertex " << v << " lies on " << hull.active[v].size()
          << " facets (expected " << m << ")";
      throw NotSimple(msg.str());
    }
  }

  p.labels_ = std::move(labels);
  p.vertices_ = std::move(hull.vertices);

  for (int i = 0; i < d; ++i) {
    Facet f;
    f.label = i;
    for (std::size_t v = 0; v < p.vertices_.size(); ++v)
      if (std::find(hull.active[v].begin(), hull.active[v].end(), i) !=
          hull.active[v].end())
        f.vertices.push_back(static_cast<int>(v));
    if (affine_dim(p.vertices_, f.vertices) < m - 1) {
      std::ostringstream msg;
      msg << "label " << i << " does not support a facet";
      throw RedundantLabel(msg.str());
    }
    order_facet_vertices(m, p.vertices_, p.labels_[i], f.vertices);
    p.facets_.push_back(std::move(f));
  }

  p.vertex_centroid_ = Eigen::VectorXd::Zero(m);
  for (const auto& v : p.vertices_) p.vertex_centroid_ += v;
  p.vertex_centroid_ /= static_cast<double>(p.vertices_.size());

  p.diameter_ = 0.0;
  for (std::size_t i = 0; i < p.vertices_.size(); ++i)
    for (std::size_t j = i + 1; j < p.vertices_.size(); ++j)
      p.diameter_ = std::max(p.diameter_, (p.vertices_[i] - p.vertices_[j]).norm());

  if (basepoint) {
    if (basepoint->size() != m)
      throw ValidationError("basepoint has wrong dimension");
    p.basepoint_ = *basepoint;
  } else {
    p.basepoint_ = p.vertex_centroid_;
  }
  if (p.min_label(p.basepoint_) <= p.geom_tol_)
    throw ValidationError("basepoint is not an interior point");

  return p;
}

double LabelledPolytope::min_label(const Eigen::VectorXd& x) const {
  double v = std::numeric_limits<double>::infinity();
  for (const auto& L : labels_) v = std::min(v, L(x));
  return v;
}

void LabelledPolytope::bounding_box(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const {
  lo = vertices_[0];
  hi = vertices_[0];
  for (const auto& v : vertices_) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
}

FacetMeasure facet_measure(const LabelledPolytope& p, int facet_index) {
  if (facet_index < 0 || facet_index >= static_cast<int>(p.facets().size()))
    throw ValidationError("facet index out of range");
  const auto& label = p.labels()[p.facets()[facet_index].label];
  FacetMeasure fm;
  fm.facet = facet_index;
  fm.density = 1.0 / label.gradient.norm();
  return fm;
}

WeightRange validate_weight(const LabelledPolytope& p, const AffineFunction& f) {
  if (f.dim() != p.dim())
    throw ValidationError("weight has wrong dimension");
  WeightRange r;
  r.min = std::numeric_limits<double>::infinity();
  r.max = -std::numeric_limits<double>::infinity();
  for (const auto& v : p.vertices()) {
    const double val = f(v);
    r.min = std::min(r.min, val);
    r.max = std::max(r.max, val);
  }
  if (!(r.min > 0.0)) {
    std::ostringstream msg;
    msg << "weight is not positive on the polytope (minimum vertex value "
        << r.min << ")";
    throw NonPositiveWeight(msg.str());
  }
  return r;
}

std::vector<Eigen::VectorXd> interior_probe_grid(const LabelledPolytope& p,
                                                 int per_axis) {
  const int m = p.dim();
  Eigen::VectorXd lo, hi;
  p.bounding_box(lo, hi);
  std::vector<double> t(per_axis);
  for (int k = 0; k < per_axis; ++k)
    t[k] = 0.5 * (1.0 - std::cos(M_PI * (2.0 * k + 1.0) / (2.0 * per_axis)));

  std::vector<Eigen::VectorXd> pts;
  std::vector<int> odo(m, 0);
  Eigen::VectorXd x(m);
  while (true) {
    for (int i = 0; i < m; ++i) x[i] = lo[i] + (hi[i] - lo[i]) * t[odo[i]];
    if (p.min_label(x) > 10.0 * p.geom_tol()) pts.push_back(x);
    int i = 0;
    while (i < m && ++odo[i] == per_axis) odo[i++] = 0;
    if (i == m) break;
  }
  return pts;
}

std::vector<Eigen::VectorXd> random_interior_points(const LabelledPolytope& p,
                                                    int count, std::uint64_t seed,
                                                    double margin) {
  const int m = p.dim();
  if (margin < 0.0) margin = 1e-3 * (1.0 + p.diameter());
  Eigen::VectorXd lo, hi;
  p.bounding_box(lo, hi);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> pts;
  Eigen::VectorXd x(m);
  long attempts = 0;
  const long max_attempts = 10000000L;
  while (static_cast<int>(pts.size()) < count && attempts < max_attempts) {
    ++attempts;
    for (int i = 0; i < m; ++i) x[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
    if (p.min_label(x) >= margin) pts.push_back(x);
  }
  if (static_cast<int>(pts.size()) < count)
    throw NumericalError("interior rejection sampling failed to find enough points");
  return pts;
}

std::optional<ConvexCell> clip_polytope(const LabelledPolytope& p,
                                        const std::vector<AffineFunction>& extra) {
  const int m = p.dim();
  std::vector<AffineFunction> labels = p.labels();
  const int base_count = static_cast<int>(labels.size());
  const double base_scale = label_scale(labels);
  for (const auto& L : extra) {
    if (L.dim() != m) throw ValidationError("clip label has wrong dimension");
    if (L.gradient.norm() <= 1e-14 * base_scale) {
      // A (numerically) constant label: either trivially true or cuts nothing.
      if (L.constant < -1e-14 * base_scale) return std::nullopt;
      continue;
    }
    labels.push_back(L);
  }

  ConvexCell cell;
  cell.dim = m;
  cell.base_label_count = base_count;
  cell.geom_tol = 1e-12 * label_scale(labels);
  const double merge_tol = 1e-9 * (1.0 + p.diameter());

  HullData hull = enumerate_vertices(labels, m, std::max(cell.geom_tol, merge_tol / 8.0),
                                     merge_tol);
  if (static_cast<int>(hull.vertices.size()) < m + 1) return std::nullopt;
  std::vector<int> all(hull.vertices.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  if (affine_dim(hull.vertices, all) < m) return std::nullopt;

  cell.labels = labels;
  cell.vertices = std::move(hull.vertices);

  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    Facet f;
    f.label = i;
    for (std::size_t v = 0; v < cell.vertices.size(); ++v)
      if (std::find(hull.active[v].begin(), hull.active[v].end(), i) !=
          hull.active[v].end())
        f.vertices.push_back(static_cast<int>(v));
    if (affine_dim(cell.vertices, f.vertices) != m - 1) continue;
    // Coincident labels would list the same geometric facet twice; keep the
    // first copy (base labels come first, preserving the boundary measure).
    std::vector<int> key = f.vertices;
    std::sort(key.begin(), key.end());
    bool duplicate = false;
    for (const auto& g : cell.facets) {
      std::vector<int> gkey = g.vertices;
      std::sort(gkey.begin(), gkey.end());
      if (gkey == key) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    order_facet_vertices(m, cell.vertices, labels[i], f.vertices);
    cell.facets.push_back(std::move(f));
  }
  return cell;
}

}  // namespace kstab
