#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "kstab/curvature.hpp"
#include "kstab/energy.hpp"

namespace kstab {

/// Parsed polytope spec file: the labelled polytope together with its
/// positive affine weight.
struct PolytopeSpec {
  std::shared_ptr<const LabelledPolytope> polytope;
  AffineFunction weight;
};

/// Polytope spec format (JSON syntax, exact field names, unknown fields
/// rejected):
///   {"dim": m,
///    "labels": [{"normal": [..], "offset": c}, ...],
///    "weight": {"normal": [..], "offset": c},
///    "basepoint": [..]}          // optional
/// Throws SpecParseError on malformed input; geometry and weight problems
/// surface as the usual validation errors.
PolytopeSpec parse_polytope_spec(const std::string& json_text);
std::string write_polytope_spec(const LabelledPolytope& p,
                                const AffineFunction& weight);

/// Potential spec: {"canonical": true|false,
///                  "perturbation": [{"exponents": [..], "coeff": c}, ...]}
/// ("perturbation" may be omitted for a pure canonical potential).
SymplecticPotential parse_potential_spec(
    const std::string& json_text, std::shared_ptr<const LabelledPolytope> p);
std::string write_potential_spec(const SymplecticPotential& u);

/// Piecewise linear spec: {"pieces": [{"normal": [..], "offset": c}, ...]}.
PLConvexFunction parse_pl_spec(const std::string& json_text, int dim);
std::string write_pl_spec(const PLConvexFunction& v);

/// Plot-ready curvature samples: header x1,..,xm,value; one row per sample
/// with the weighted scalar curvature in the value column.
std::string curvature_csv(const std::vector<CurvatureSample>& samples, int dim);

/// Fully resolved configuration of one command-line run, echoed to a
/// manifest for reproducibility.
struct RunManifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> inputs;  // role -> path
  QuadratureScheme scheme;
  std::uint64_t seed = 0;
  double tol = 0.0;
  std::string out_dir;
};

std::string manifest_json(const RunManifest& m);

/// Whole-file helpers; failures throw ValidationError naming the path.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace kstab
