#include "cellomaps/nuclei.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cellomaps/error.hpp"

namespace cellomaps {

using nlohmann::json;

std::string_view to_string(CellClass c) noexcept {
  switch (c) {
    case CellClass::NeoplasticEpithelial: return "NeoplasticEpithelial";
    case CellClass::NonNeoplasticEpithelial: return "NonNeoplasticEpithelial";
    case CellClass::Connective: return "Connective";
    case CellClass::Inflammatory: return "Inflammatory";
    case CellClass::Necrotic: return "Necrotic";
  }
  return "?";
}

CellClass cell_class_from_string(std::string_view name) {
  for (CellClass c : kAllCellClasses) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorCode::UnknownClass, "unknown cell class '" + std::string(name) + "'");
}

std::optional<CellClass> cell_class_from_code(std::uint8_t code) noexcept {
  if (code >= kCellClassCount) return std::nullopt;
  return static_cast<CellClass>(code);
}

void validate(const SlideNucleiSet& set) {
  if (set.slide_id.empty()) throw Error(ErrorCode::MalformedInput, "slide_id is empty");
  if (set.patient_id.empty()) throw Error(ErrorCode::MalformedInput, "patient_id is empty");
  if (!(set.source_mpp > 0.0) || !std::isfinite(set.source_mpp)) {
    throw Error(ErrorCode::MalformedInput, "mpp must be positive");
  }
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    const auto& r = set.records[i];
    if (!std::isfinite(r.x) || !std::isfinite(r.y) || r.x < 0.0 || r.y < 0.0 ||
        r.x >= set.width || r.y >= set.height) {
      std::ostringstream msg;
      msg << "nucleus " << i << " at (" << r.x << ", " << r.y << ") outside " << set.width << "x"
          << set.height;
      throw Error(ErrorCode::OutOfBounds, msg.str());
    }
    if (r.confidence && (*r.confidence < 0.0 || *r.confidence > 1.0)) {
      throw Error(ErrorCode::MalformedInput,
                  "nucleus " + std::to_string(i) + " confidence outside [0,1]");
    }
  }
}

namespace {

template <typename T>
T required(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::MalformedInput, std::string("missing key '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("bad value for '") + key + "': " + e.what());
  }
}

std::uint32_t required_dim(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer() || it->get<std::int64_t>() < 0 ||
      it->get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::MalformedInput, std::string("'") + key + "' must be a non-negative integer");
  }
  return static_cast<std::uint32_t>(it->get<std::int64_t>());
}

}  // namespace

SlideNucleiSet parse_nuclei_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedInput, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::MalformedInput, "top level must be an object");

  SlideNucleiSet set;
  set.slide_id = required<std::string>(doc, "slide_id");
  set.patient_id = required<std::string>(doc, "patient_id");
  set.source_mpp = required<double>(doc, "mpp");
  set.width = required_dim(doc, "width");
  set.height = required_dim(doc, "height");

  std::map<std::string, CellClass> codes;
  if (auto it = doc.find("class_codes"); it != doc.end()) {
    if (!it->is_object()) throw Error(ErrorCode::MalformedInput, "class_codes must be an object");
    for (const auto& [key, value] : it->items()) {
      if (!value.is_string()) throw Error(ErrorCode::MalformedInput, "class_codes values must be strings");
      codes.emplace(key, cell_class_from_string(value.get<std::string>()));
    }
  }

  const auto nuclei = doc.find("nuclei");
  if (nuclei == doc.end() || !nuclei->is_array()) {
    throw Error(ErrorCode::MalformedInput, "'nuclei' must be an array");
  }
  set.records.reserve(nuclei->size());
  for (const auto& n : *nuclei) {
    if (!n.is_object()) throw Error(ErrorCode::MalformedInput, "nucleus entry must be an object");
    NucleusRecord r;
    r.x = required<double>(n, "x");
    r.y = required<double>(n, "y");
    const auto type = n.find("type");
    if (type == n.end()) throw Error(ErrorCode::MalformedInput, "nucleus missing 'type'");
    if (type->is_string()) {
      r.cell_class = cell_class_from_string(type->get<std::string>());
    } else if (type->is_number_integer()) {
      const auto key = std::to_string(type->get<std::int64_t>());
      auto code = codes.find(key);
      if (code == codes.end()) {
        throw Error(ErrorCode::UnknownClass, "integer type " + key + " has no class_codes entry");
      }
      r.cell_class = code->second;
    } else {
      throw Error(ErrorCode::MalformedInput, "'type' must be a string or integer");
    }
    if (auto c = n.find("confidence"); c != n.end() && !c->is_null()) {
      if (!c->is_number()) throw Error(ErrorCode::MalformedInput, "'confidence' must be a number");
      r.confidence = c->get<double>();
    }
    set.records.push_back(r);
  }
  validate(set);
  return set;
}

SlideNucleiSet parse_nuclei_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_nuclei_json(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string serialize_nuclei_json(const SlideNucleiSet& set) {
  json doc;
  doc["slide_id"] = set.slide_id;
  doc["patient_id"] = set.patient_id;
  doc["mpp"] = set.source_mpp;
  doc["width"] = set.width;
  doc["height"] = set.height;
  json nuclei = json::array();
  for (const auto& r : set.records) {
    json n;
    n["x"] = r.x;
    n["y"] = r.y;
    n["type"] = std::string(to_string(r.cell_class));
    if (r.confidence) n["confidence"] = *r.confidence;
    nuclei.push_back(std::move(n));
  }
  doc["nuclei"] = std::move(nuclei);
  return doc.dump();
}

void write_nuclei_file(const SlideNucleiSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << serialize_nuclei_json(set) << '\n';
}

SlideNucleiSet apply_remap(const SlideNucleiSet& set, std::span<const RemapRule> rules) {
  std::array<CellClass, kCellClassCount> table = kAllCellClasses;
  std::array<bool, kCellClassCount> seen{};
  for (const auto& rule : rules) {
    const auto from = static_cast<std::size_t>(rule.from_class);
    if (rule.from_class == rule.to_class) {
      throw Error(ErrorCode::ConflictingRules, "rule maps " + std::string(to_string(rule.from_class)) + " to itself");
    }
    if (seen[from]) {
      throw Error(ErrorCode::ConflictingRules,
                  "duplicate rule for " + std::string(to_string(rule.from_class)));
    }
    seen[from] = true;
    table[from] = rule.to_class;
  }
  SlideNucleiSet out = set;
  for (auto& r : out.records) r.cell_class = table[static_cast<std::size_t>(r.cell_class)];
  return out;
}

namespace {

// floor/ceil that treat values within rounding noise of an integer as that integer.
double snapped_floor(double v) {
  const double r = std::round(v);
  return std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v)) ? r : std::floor(v);
}

double snapped_ceil(double v) {
  const double r = std::round(v);
  return std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v)) ? r : std::ceil(v);
}

}  // namespace

SlideNucleiSet scale_coordinates(const SlideNucleiSet& set, double target_mpp) {
  if (!(target_mpp >= set.source_mpp) || !std::isfinite(target_mpp)) {
    std::ostringstream msg;
    msg << "target mpp " << target_mpp << " is finer than source mpp " << set.source_mpp;
    throw Error(ErrorCode::InvalidScale, msg.str());
  }
  SlideNucleiSet out = set;
  out.source_mpp = target_mpp;
  if (target_mpp == set.source_mpp) return out;

  const double ratio = set.source_mpp / target_mpp;
  out.width = static_cast<std::uint32_t>(snapped_ceil(set.width * ratio));
  out.height = static_cast<std::uint32_t>(snapped_ceil(set.height * ratio));
  for (auto& r : out.records) {
    r.x = std::min(snapped_floor(r.x * ratio), static_cast<double>(out.width) - 1.0);
    r.y = std::min(snapped_floor(r.y * ratio), static_cast<double>(out.height) - 1.0);
  }
  return out;
}

}  // namespace cellomaps
