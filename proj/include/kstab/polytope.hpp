#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kstab/affine.hpp"
#include "kstab/errors.hpp"

namespace kstab {

/// One facet: the label whose zero set supports it plus the indices of the
/// vertices lying on it.  Vertices are stored in traversal order: a single
/// vertex for m = 1, the two endpoints for m = 2, a ring around the facet
/// centroid for m = 3.
struct Facet {
  int label = -1;
  std::vector<int> vertices;
};

/// Density of the boundary measure on one facet with respect to the
/// Euclidean surface measure.  The boundary measure is pinned to the labels
/// by  d(label) ^ d(sigma) = -d(volume),  which gives density 1/|u_i| on the
/// facet of the label with normal u_i.  For m = 1 a facet is a point and the
/// measure is a point mass of that size.
struct FacetMeasure {
  int facet = -1;
  double density = 0.0;
};

/// Range of a weight function over the vertex set (hence over the polytope,
/// by affinity).
struct WeightRange {
  double min = 0.0;
  double max = 0.0;
};

/**
 * Compact simple convex polytope in R^m described by affine labels
 * L_i(x) = <u_i, x> + c_i, the polytope being the locus of all L_i >= 0.
 *
 * The label data is primary: normals are kept exactly as given (they carry
 * the boundary measure), vertices and facets are derived.  Invariants
 * established by build():
 *   - bounded with nonempty interior,
 *   - every vertex lies on exactly m facets (simple),
 *   - every label supports a facet of dimension m-1 (no redundancy).
 */
class LabelledPolytope {
 public:
  static LabelledPolytope build(std::vector<AffineFunction> labels,
                                std::optional<Eigen::VectorXd> basepoint = {});

  int dim() const { return dim_; }
  const std::vector<AffineFunction>& labels() const { return labels_; }
  const std::vector<Eigen::VectorXd>& vertices() const { return vertices_; }
  const std::vector<Facet>& facets() const { return facets_; }

  /// Distinguished interior point used for normalization; defaults to the
  /// vertex centroid.
  const Eigen::VectorXd& basepoint() const { return basepoint_; }
  const Eigen::VectorXd& vertex_centroid() const { return vertex_centroid_; }

  /// Geometric tolerance 1e-12 * (1 + max |c_i| + max |u_i|).
  double geom_tol() const { return geom_tol_; }
  double diameter() const { return diameter_; }

  double min_label(const Eigen::VectorXd& x) const;
  bool contains(const Eigen::VectorXd& x, double margin = 0.0) const {
    return min_label(x) >= margin;
  }

  /// Axis-aligned bounding box of the vertex set.
  void bounding_box(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const;

 private:
  LabelledPolytope() = default;

  int dim_ = 0;
  std::vector<AffineFunction> labels_;
  std::vector<Eigen::VectorXd> vertices_;
  std::vector<Facet> facets_;
  Eigen::VectorXd basepoint_;
  Eigen::VectorXd vertex_centroid_;
  double geom_tol_ = 0.0;
  double diameter_ = 0.0;
};

FacetMeasure facet_measure(const LabelledPolytope& p, int facet_index);

/// Checks f > 0 on the polytope (equivalently at every vertex) and returns
/// its range over the vertex set.  Throws NonPositiveWeight otherwise.
WeightRange validate_weight(const LabelledPolytope& p, const AffineFunction& f);

// ---- interior sample points ----------------------------------------------

/// Tensor grid of per_axis^m Chebyshev-root points in the bounding box
/// (clustered toward the boundary), restricted to the interior.
std::vector<Eigen::VectorXd> interior_probe_grid(const LabelledPolytope& p,
                                                 int per_axis = 32);

/// Seeded uniform rejection sample of interior points with label values at
/// least `margin` (defaults to 1e-3 * (1 + diameter)).
std::vector<Eigen::VectorXd> random_interior_points(const LabelledPolytope& p,
                                                    int count, std::uint64_t seed,
                                                    double margin = -1.0);

// ---- clipped cells ---------------------------------------------------------

/**
 * Intersection of a polytope with extra half-spaces, used to decompose the
 * domain along the creases of piecewise linear functions.  Cells need not be
 * simple and may be empty (nullopt).  Facets supported by one of the original
 * labels keep that label's index in [0, base_label_count); facets cut by the
 * extra half-spaces come after and carry no boundary measure.
 */
struct ConvexCell {
  int dim = 0;
  std::vector<AffineFunction> labels;  // base labels followed by extras
  int base_label_count = 0;
  std::vector<Eigen::VectorXd> vertices;
  std::vector<Facet> facets;
  double geom_tol = 0.0;
};

std::optional<ConvexCell> clip_polytope(const LabelledPolytope& p,
                                        const std::vector<AffineFunction>& extra);

}  // namespace kstab
