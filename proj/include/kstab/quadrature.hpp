#pragma once

#include <functional>
#include <vector>

#include "kstab/polytope.hpp"

namespace kstab {

/// Affinely independent vertex tuple with its Euclidean measure (length /
/// area / volume in its own dimension; a point has measure 1).
struct Simplex {
  std::vector<Eigen::VectorXd> v;
  double measure = 0.0;
};

/// Partition of one facet into (m-1)-simplices.  `facet` indexes the facet
/// (equivalently the label) of the polytope the triangulation came from.
struct FacetPatch {
  int facet = -1;
  std::vector<Simplex> pieces;
};

struct Triangulation {
  int dim = 0;
  std::vector<Simplex> cells;
  std::vector<FacetPatch> boundary;

  double total_volume() const;
};

/// Fan triangulation from the vertex centroid over the facet partitions.
Triangulation triangulate(const LabelledPolytope& p);
Triangulation triangulate_cell(const ConvexCell& c);

/**
 * Refinement: `uniform` rounds of midpoint subdivision of every cell,
 * followed by `graded` rounds subdividing only the cells touching the
 * boundary of `p` (where the canonical potential has its log terms).
 * Facet pieces are graded toward the lower-dimensional faces, i.e. where a
 * second label vanishes.
 */
Triangulation refine(const Triangulation& t, const LabelledPolytope& p,
                     int uniform, int graded);

// ---- quadrature rules -----------------------------------------------------

struct SimplexRule {
  int dim = 0;
  int degree = 1;  // exactness degree actually achieved (>= requested)
  std::vector<Eigen::VectorXd> points;  // reference simplex coordinates
  std::vector<double> weights;          // sum to 1/dim! (reference volume)
};

/// Simplex cubature of odd exactness degree >= min_degree on the unit
/// simplex {x >= 0, sum x <= 1}, any dimension (dimension 0: a point mass).
const SimplexRule& simplex_rule(int dim, int min_degree);

// ---- node sets and deterministic reduction --------------------------------

struct QuadratureScheme {
  int interior_order = 6;
  int boundary_order = 6;
  int refine = 3;
  int grade = 3;
};

/// How to run the node loop.  Results are deterministic either way; the
/// parallel path evaluates nodes concurrently and reduces serially in fixed
/// node order with compensated summation, so they are independent of the
/// worker count.  The serial path is the plain reference loop kept for
/// testing and benchmarking.
enum class Exec { parallel, serial };

struct InteriorNodes {
  std::vector<Eigen::VectorXd> x;
  std::vector<double> w;  // already scaled by cell volumes
};

struct BoundaryNodes {
  std::vector<Eigen::VectorXd> x;
  std::vector<double> w;  // includes the boundary-measure density 1/|u_i|
  std::vector<int> facet;
};

/// Nodes of a scheme over a polytope (or clipped cell), cached for reuse.
class QuadratureGrid {
 public:
  static QuadratureGrid build(const LabelledPolytope& p,
                              const QuadratureScheme& s);
  /// Nodes over a clipped cell; grading follows the base polytope boundary
  /// and boundary nodes cover only the part of the cell boundary lying on
  /// base facets.
  static QuadratureGrid build_cell(const ConvexCell& c,
                                   const LabelledPolytope& base,
                                   const QuadratureScheme& s);

  const InteriorNodes& interior() const { return interior_; }
  const BoundaryNodes& boundary() const { return boundary_; }

  double integrate_interior(const std::function<double(const Eigen::VectorXd&)>& h,
                            Exec exec = Exec::parallel) const;
  double integrate_boundary(const std::function<double(const Eigen::VectorXd&)>& h,
                            Exec exec = Exec::parallel) const;

  /// One pass filling `ncomp` values per node; each component reduced in
  /// fixed node order.
  Eigen::VectorXd integrate_interior_multi(
      int ncomp,
      const std::function<void(const Eigen::VectorXd&, double*)>& fill,
      Exec exec = Exec::parallel) const;
  Eigen::VectorXd integrate_boundary_multi(
      int ncomp,
      const std::function<void(const Eigen::VectorXd&, int, double*)>& fill,
      Exec exec = Exec::parallel) const;

 private:
  InteriorNodes interior_;
  BoundaryNodes boundary_;
};

/// Compensated (Neumaier) summation in index order.
double compensated_sum(const std::vector<double>& a);

// ---- integral operations ---------------------------------------------------

/// integral over the polytope of h / f^k against the Lebesgue measure.
double integrate_interior(const LabelledPolytope& p, const AffineFunction& f,
                          int k, const std::function<double(const Eigen::VectorXd&)>& h,
                          const QuadratureScheme& s, Exec exec = Exec::parallel);

/// integral over the boundary of h / f^k against the label-pinned boundary
/// measure.
double integrate_boundary(const LabelledPolytope& p, const AffineFunction& f,
                          int k, const std::function<double(const Eigen::VectorXd&)>& h,
                          const QuadratureScheme& s, Exec exec = Exec::parallel);

/// Total boundary measure of one facet (exact piecewise computation).
double facet_sigma_measure(const LabelledPolytope& p, int facet_index);

/// Moments entering the extremal-affine linear system: interior moments of
/// 1, x_i, x_i x_j against dmu / f^(2m+1) and boundary moments of 1, x_i
/// against dsigma / f^(2m-1).
struct MomentData {
  double volume = 0.0;
  Eigen::VectorXd first;
  Eigen::MatrixXd second;
  double boundary_volume = 0.0;
  Eigen::VectorXd boundary_first;
  Eigen::MatrixXd gram;  // [[volume, first^T], [first, second]], positive definite
  QuadratureScheme scheme;
};

MomentData weighted_moments(const LabelledPolytope& p, const AffineFunction& f,
                            const QuadratureScheme& s, Exec exec = Exec::parallel);

}  // namespace kstab
