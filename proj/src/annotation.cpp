#include "omrkit/annotation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "omrkit/error.hpp"
#include "omrkit/io_util.hpp"

namespace omrkit {

using nlohmann::json;

namespace {

std::optional<std::int64_t> parse_integer(std::string_view token, bool allow_sign) {
  if (token.empty()) return std::nullopt;
  std::string_view digits = token;
  if (allow_sign && digits.front() == '-') digits.remove_prefix(1);
  if (digits.empty() ||
      !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  std::int64_t value = 0;
  const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || end != token.data() + token.size()) return std::nullopt;
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

[[noreturn]] void malformed(std::string_view text, const std::string& why) {
  throw Error(Errc::malformed_label, "'" + std::string(text) + "': " + why);
}

[[noreturn]] void invalid(const std::string& why) { throw Error(Errc::validation_error, why); }

[[noreturn]] void schema(const std::string& why) { throw Error(Errc::schema_error, why); }

const json& require(const json& object, const char* key, const std::string& where) {
  const auto it = object.find(key);
  if (it == object.end()) schema(where + ": missing field '" + key + "'");
  return *it;
}

}  // namespace

BBox BBox::clipped(double width_limit, double height_limit) const noexcept {
  return {std::clamp(x_min, 0.0, width_limit), std::clamp(y_min, 0.0, height_limit),
          std::clamp(x_max, 0.0, width_limit), std::clamp(y_max, 0.0, height_limit)};
}

Rational::Rational(std::int64_t numerator, std::int64_t denominator) {
  if (denominator == 0) throw Error(Errc::malformed_label, "zero denominator");
  if (denominator < 0) {
    numerator = -numerator;
    denominator = -denominator;
  }
  const std::int64_t g = std::gcd(numerator, denominator);
  num_ = numerator / g;
  den_ = denominator / g;
}

Rational Rational::parse(std::string_view token) {
  const auto slash = token.find('/');
  if (slash == std::string_view::npos) {
    const auto n = parse_integer(token, true);
    if (!n) malformed(token, "bad integer");
    return Rational(*n);
  }
  const auto n = parse_integer(token.substr(0, slash), true);
  const auto d = parse_integer(token.substr(slash + 1), false);
  if (!n || !d) malformed(token, "bad rational");
  if (*d == 0) malformed(token, "zero denominator");
  return Rational(*n, *d);
}

std::string Rational::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Annotation Annotation::from_label(Label label, const BBox& bbox) {
  return {std::move(label.class_name), bbox, label.onset, label.rel_position, label.duration};
}

std::optional<std::size_t> Dataset::class_index(std::string_view class_name) const {
  const auto it = std::find(class_registry.begin(), class_registry.end(), class_name);
  if (it == class_registry.end()) return std::nullopt;
  return static_cast<std::size_t>(it - class_registry.begin());
}

void Dataset::register_class(const std::string& class_name) {
  if (!class_index(class_name)) class_registry.push_back(class_name);
}

bool is_valid_class_name(std::string_view name) noexcept {
  const auto alpha = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); };
  const auto digit = [](char c) { return c >= '0' && c <= '9'; };
  if (name.empty() || !alpha(name.front())) return false;
  return std::all_of(name.begin() + 1, name.end(),
                     [&](char c) { return alpha(c) || digit(c) || c == '_'; });
}

Label parse_label(std::string_view text) {
  const auto fields = split(text, '.');
  if (fields.size() != 1 && fields.size() != 2 && fields.size() != 4) {
    malformed(text, "expected 1, 2 or 4 fields, got " + std::to_string(fields.size()));
  }
  Label label;
  if (!is_valid_class_name(fields[0])) malformed(text, "bad class name");
  label.class_name = std::string(fields[0]);
  if (fields.size() >= 2) label.onset = Rational::parse(fields[1]);
  if (fields.size() == 4) {
    const auto pos = parse_integer(fields[2], true);
    if (!pos) malformed(text, "bad relative position");
    label.rel_position = *pos;
    label.duration = Rational::parse(fields[3]);
  }
  return label;
}

std::string serialize_label(const Label& label) {
  std::string out = label.class_name;
  if (label.onset) out += "." + label.onset->to_string();
  if (label.rel_position && label.duration) {
    out += "." + std::to_string(*label.rel_position) + "." + label.duration->to_string();
  }
  return out;
}

void validate(const Annotation& a) {
  if (!is_valid_class_name(a.class_name)) invalid("bad class name '" + a.class_name + "'");
  if (a.rel_position.has_value() != a.duration.has_value()) {
    invalid("'" + a.class_name + "': relative position and duration must come together");
  }
  if (!a.onset && a.rel_position) {
    invalid("'" + a.class_name + "': relative position requires an onset");
  }
  if (!a.bbox.valid()) invalid("'" + a.class_name + "': bbox corners out of order");
}

void validate(const Page& page) {
  if (page.width <= 0 || page.height <= 0) invalid("page '" + page.id + "': non-positive size");
  for (const auto& a : page.annotations) {
    validate(a);
    const auto& b = a.bbox;
    if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > page.width || b.y_max > page.height) {
      invalid("page '" + page.id + "': bbox of '" + serialize_label(a) + "' outside the page");
    }
  }
}

void validate(const Dataset& dataset) {
  std::set<std::string_view> registry;
  for (const auto& name : dataset.class_registry) {
    if (!is_valid_class_name(name)) invalid("bad registry class name '" + name + "'");
    if (!registry.insert(name).second) invalid("duplicate registry class '" + name + "'");
  }
  std::set<std::string_view> ids;
  for (const auto& page : dataset.pages) {
    if (!ids.insert(page.id).second) invalid("duplicate page id '" + page.id + "'");
    validate(page);
    for (const auto& a : page.annotations) {
      if (!registry.contains(a.class_name)) {
        invalid("page '" + page.id + "': class '" + a.class_name + "' missing from registry");
      }
    }
  }
}

double quantize_coord(double v) noexcept {
  const double q = std::round(v * 1000.0) / 1000.0;
  return q == 0.0 ? 0.0 : q;
}

std::string dataset_to_json(const Dataset& dataset) {
  json pages = json::array();
  for (const auto& page : dataset.pages) {
    json annotations = json::array();
    for (const auto& a : page.annotations) {
      annotations.push_back(
          {{"label", serialize_label(a)},
           {"bbox", {quantize_coord(a.bbox.x_min), quantize_coord(a.bbox.y_min),
                     quantize_coord(a.bbox.x_max), quantize_coord(a.bbox.y_max)}}});
    }
    json p = {{"id", page.id},
              {"width", page.width},
              {"height", page.height},
              {"annotations", std::move(annotations)}};
    if (page.image_path) p["image"] = *page.image_path;
    pages.push_back(std::move(p));
  }
  const json doc = {{"class_registry", dataset.class_registry}, {"pages", std::move(pages)}};
  return doc.dump(2) + "\n";
}

Dataset dataset_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    schema(std::string("not a JSON document: ") + e.what());
  }
  if (!doc.is_object()) schema("top level must be an object");

  Dataset dataset;
  const auto& registry = require(doc, "class_registry", "document");
  if (!registry.is_array()) schema("'class_registry' must be an array");
  for (const auto& name : registry) {
    if (!name.is_string()) schema("'class_registry' entries must be strings");
    dataset.class_registry.push_back(name.get<std::string>());
  }

  const auto& pages = require(doc, "pages", "document");
  if (!pages.is_array()) schema("'pages' must be an array");
  for (std::size_t i = 0; i < pages.size(); ++i) {
    const auto& p = pages[i];
    const std::string where = "pages[" + std::to_string(i) + "]";
    if (!p.is_object()) schema(where + " must be an object");
    Page page;
    const auto& id = require(p, "id", where);
    const auto& width = require(p, "width", where);
    const auto& height = require(p, "height", where);
    if (!id.is_string()) schema(where + ".id must be a string");
    if (!width.is_number_integer() || !height.is_number_integer()) {
      schema(where + ": width/height must be integers");
    }
    page.id = id.get<std::string>();
    const auto w = width.get<std::int64_t>();
    const auto h = height.get<std::int64_t>();
    if (w > std::numeric_limits<int>::max() || h > std::numeric_limits<int>::max()) {
      schema(where + ": page size out of range");
    }
    page.width = static_cast<int>(w);
    page.height = static_cast<int>(h);
    if (const auto it = p.find("image"); it != p.end()) {
      if (!it->is_string()) schema(where + ".image must be a string");
      page.image_path = it->get<std::string>();
    }
    const auto& annotations = require(p, "annotations", where);
    if (!annotations.is_array()) schema(where + ".annotations must be an array");
    for (std::size_t j = 0; j < annotations.size(); ++j) {
      const auto& a = annotations[j];
      const std::string at = where + ".annotations[" + std::to_string(j) + "]";
      if (!a.is_object()) schema(at + " must be an object");
      const auto& label = require(a, "label", at);
      const auto& bbox = require(a, "bbox", at);
      if (!label.is_string()) schema(at + ".label must be a string");
      if (!bbox.is_array() || bbox.size() != 4 ||
          !std::all_of(bbox.begin(), bbox.end(), [](const json& v) { return v.is_number(); })) {
        schema(at + ".bbox must be 4 numbers");
      }
      Label parsed;
      try {
        parsed = parse_label(label.get<std::string>());
      } catch (const Error& e) {
        invalid(at + ": " + e.what());
      }
      const BBox box{quantize_coord(bbox[0].get<double>()), quantize_coord(bbox[1].get<double>()),
                     quantize_coord(bbox[2].get<double>()), quantize_coord(bbox[3].get<double>())};
      page.annotations.push_back(Annotation::from_label(std::move(parsed), box));
    }
    dataset.pages.push_back(std::move(page));
  }
  validate(dataset);
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path) {
  return dataset_from_json(read_file(path));
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  validate(dataset);
  write_file_atomic(path, dataset_to_json(dataset));
}

}  // namespace omrkit
