#include "kstab/io.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "kstab/errors.hpp"
#include "kstab/format.hpp"

namespace kstab {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

json parse_text(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw SpecParseError("spec file is not valid JSON");
  return j;
}

/// Strict object shape: every required key present, no key outside the
/// required + optional sets.
void require_keys(const json& obj, const std::string& what,
                  std::initializer_list<const char*> required,
                  std::initializer_list<const char*> optional = {}) {
  if (!obj.is_object()) throw SpecParseError(what + " must be a JSON object");
  for (const char* k : required)
    if (!obj.contains(k))
      throw SpecParseError(what + " is missing field \"" + k + "\"");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : required)
      if (it.key() == k) known = true;
    for (const char* k : optional)
      if (it.key() == k) known = true;
    if (!known)
      throw SpecParseError(what + " has unknown field \"" + it.key() + "\"");
  }
}

double number_field(const json& v, const std::string& what) {
  if (!v.is_number()) throw SpecParseError(what + " must be a number");
  return v.get<double>();
}

int integer_field(const json& v, const std::string& what) {
  if (!v.is_number_integer()) throw SpecParseError(what + " must be an integer");
  return v.get<int>();
}

Eigen::VectorXd vector_field(const json& v, int dim, const std::string& what) {
  if (!v.is_array() || static_cast<int>(v.size()) != dim)
    throw SpecParseError(what + " must be an array of " + std::to_string(dim) +
                         " numbers");
  Eigen::VectorXd out(dim);
  for (int i = 0; i < dim; ++i)
    out[i] = number_field(v[static_cast<std::size_t>(i)],
                          what + "[" + std::to_string(i) + "]");
  return out;
}

AffineFunction affine_field(const json& v, int dim, const std::string& what) {
  require_keys(v, what, {"normal", "offset"});
  return AffineFunction(vector_field(v.at("normal"), dim, what + ".normal"),
                        number_field(v.at("offset"), what + ".offset"));
}

ordered affine_json(const AffineFunction& a) {
  ordered o;
  o["normal"] = std::vector<double>(a.gradient.data(),
                                    a.gradient.data() + a.gradient.size());
  o["offset"] = a.constant;
  return o;
}

}  // namespace

PolytopeSpec parse_polytope_spec(const std::string& json_text) {
  const json j = parse_text(json_text);
  require_keys(j, "polytope spec", {"dim", "labels", "weight"}, {"basepoint"});

  const int dim = integer_field(j.at("dim"), "\"dim\"");
  if (dim < 1) throw SpecParseError("\"dim\" must be >= 1");

  const json& labels = j.at("labels");
  if (!labels.is_array() || labels.empty())
    throw SpecParseError("\"labels\" must be a non-empty array");
  std::vector<AffineFunction> L;
  L.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    L.push_back(affine_field(labels[i], dim,
                             "labels[" + std::to_string(i) + "]"));

  std::optional<Eigen::VectorXd> basepoint;
  if (j.contains("basepoint"))
    basepoint = vector_field(j.at("basepoint"), dim, "\"basepoint\"");

  PolytopeSpec spec;
  spec.polytope = std::make_shared<const LabelledPolytope>(
      LabelledPolytope::build(std::move(L), std::move(basepoint)));
  spec.weight = affine_field(j.at("weight"), dim, "\"weight\"");
  validate_weight(*spec.polytope, spec.weight);
  return spec;
}

std::string write_polytope_spec(const LabelledPolytope& p,
                                const AffineFunction& weight) {
  ordered o;
  o["dim"] = p.dim();
  o["labels"] = ordered::array();
  for (const auto& lab : p.labels()) o["labels"].push_back(affine_json(lab));
  o["weight"] = affine_json(weight);
  o["basepoint"] = std::vector<double>(
      p.basepoint().data(), p.basepoint().data() + p.basepoint().size());
  return o.dump(2) + "\n";
}

SymplecticPotential parse_potential_spec(
    const std::string& json_text, std::shared_ptr<const LabelledPolytope> p) {
  if (!p) throw ValidationError("potential spec requires a polytope");
  const json j = parse_text(json_text);
  require_keys(j, "potential spec", {"canonical"}, {"perturbation"});
  if (!j.at("canonical").is_boolean())
    throw SpecParseError("\"canonical\" must be a boolean");
  const bool canonical = j.at("canonical").get<bool>();

  const int dim = p->dim();
  Polynomial pert(dim, {});
  if (j.contains("perturbation")) {
    const json& terms = j.at("perturbation");
    if (!terms.is_array())
      throw SpecParseError("\"perturbation\" must be an array");
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const std::string what = "perturbation[" + std::to_string(i) + "]";
      require_keys(terms[i], what, {"exponents", "coeff"});
      const json& ex = terms[i].at("exponents");
      if (!ex.is_array() || static_cast<int>(ex.size()) != dim)
        throw SpecParseError(what + ".exponents must be an array of " +
                             std::to_string(dim) + " integers");
      std::vector<int> exponents(static_cast<std::size_t>(dim));
      for (int k = 0; k < dim; ++k) {
        exponents[static_cast<std::size_t>(k)] = integer_field(
            ex[static_cast<std::size_t>(k)],
            what + ".exponents[" + std::to_string(k) + "]");
        if (exponents[static_cast<std::size_t>(k)] < 0)
          throw SpecParseError(what + ".exponents must be non-negative");
      }
      pert.add_term(std::move(exponents),
                    number_field(terms[i].at("coeff"), what + ".coeff"));
    }
  }
  return SymplecticPotential(std::move(p), canonical, std::move(pert));
}

std::string write_potential_spec(const SymplecticPotential& u) {
  ordered o;
  o["canonical"] = u.canonical();
  o["perturbation"] = ordered::array();
  for (const auto& term : u.perturbation().terms()) {
    ordered t;
    t["exponents"] = term.exponents;
    t["coeff"] = term.coeff;
    o["perturbation"].push_back(std::move(t));
  }
  return o.dump(2) + "\n";
}

PLConvexFunction parse_pl_spec(const std::string& json_text, int dim) {
  const json j = parse_text(json_text);
  require_keys(j, "piecewise linear spec", {"pieces"});
  const json& pieces = j.at("pieces");
  if (!pieces.is_array() || pieces.empty())
    throw SpecParseError("\"pieces\" must be a non-empty array");
  std::vector<AffineFunction> v;
  v.reserve(pieces.size());
  for (std::size_t i = 0; i < pieces.size(); ++i)
    v.push_back(
        affine_field(pieces[i], dim, "pieces[" + std::to_string(i) + "]"));
  return make_pl(std::move(v));
}

std::string write_pl_spec(const PLConvexFunction& v) {
  ordered o;
  o["pieces"] = ordered::array();
  for (const auto& piece : v.pieces()) o["pieces"].push_back(affine_json(piece));
  return o.dump(2) + "\n";
}

std::string curvature_csv(const std::vector<CurvatureSample>& samples, int dim) {
  std::string out;
  for (int i = 0; i < dim; ++i) {
    out += "x" + std::to_string(i + 1);
    out += ',';
  }
  out += "value\n";
  for (const auto& s : samples) {
    for (int i = 0; i < dim; ++i) {
      out += shortest_double(s.x[i]);
      out += ',';
    }
    out += shortest_double(s.weighted);
    out += '\n';
  }
  return out;
}

std::string manifest_json(const RunManifest& m) {
  ordered o;
  o["command"] = m.command;
  o["inputs"] = ordered::object();
  for (const auto& [role, path] : m.inputs) o["inputs"][role] = path;
  o["scheme"] = {{"interior_order", m.scheme.interior_order},
                 {"boundary_order", m.scheme.boundary_order},
                 {"refine", m.scheme.refine},
                 {"grade", m.scheme.grade}};
  o["seed"] = m.seed;
  o["tol"] = m.tol;
  o["out"] = m.out_dir;
  return o.dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw ValidationError("cannot read file: " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << content;
  out.flush();
  if (!out) throw ValidationError("cannot write file: " + path);
}

}  // namespace kstab
