#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace omrkit {

/// Axis-aligned box in continuous pixel coordinates (origin top-left, y down).
/// Pixel (row, col) covers [col, col+1) x [row, row+1).
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }
  double center_x() const noexcept { return 0.5 * (x_min + x_max); }
  double center_y() const noexcept { return 0.5 * (y_min + y_max); }
  bool valid() const noexcept { return x_min <= x_max && y_min <= y_max; }

  BBox translated(double dx, double dy) const noexcept {
    return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
  }
  BBox clipped(double width_limit, double height_limit) const noexcept;

  static BBox from_center(double cx, double cy, double w, double h) noexcept {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Exact rational number kept in lowest terms with a positive denominator.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t integer) : num_(integer) {}  // NOLINT
  Rational(std::int64_t numerator, std::int64_t denominator);

  std::int64_t numerator() const noexcept { return num_; }
  std::int64_t denominator() const noexcept { return den_; }

  /// `n` or `n/d`; throws Error(malformed_label) on bad tokens or d == 0.
  static Rational parse(std::string_view token);
  /// Canonical text: `n` when the denominator is 1, else `n/d`.
  std::string to_string() const;

  friend bool operator==(const Rational&, const Rational&) = default;

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// Fields carried by a label string of the form
/// `class`, `class.onset` or `class.onset.relative_position.duration`.
struct Label {
  std::string class_name;
  std::optional<Rational> onset;
  std::optional<std::int64_t> rel_position;
  std::optional<Rational> duration;

  friend bool operator==(const Label&, const Label&) = default;
};

struct Annotation {
  std::string class_name;
  BBox bbox;
  std::optional<Rational> onset;
  std::optional<std::int64_t> rel_position;
  std::optional<Rational> duration;

  Label label() const { return {class_name, onset, rel_position, duration}; }
  static Annotation from_label(Label label, const BBox& bbox);

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Page {
  std::string id;
  int width = 0;
  int height = 0;
  std::optional<std::string> image_path;
  std::vector<Annotation> annotations;

  friend bool operator==(const Page&, const Page&) = default;
};

struct Dataset {
  std::vector<Page> pages;
  std::vector<std::string> class_registry;

  /// Index of `class_name` in the registry, if present.
  std::optional<std::size_t> class_index(std::string_view class_name) const;
  /// Adds the class to the end of the registry unless already present.
  void register_class(const std::string& class_name);

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

bool is_valid_class_name(std::string_view name) noexcept;

Label parse_label(std::string_view text);
std::string serialize_label(const Label& label);
inline std::string serialize_label(const Annotation& a) { return serialize_label(a.label()); }

/// Throws Error(validation_error) naming the first broken invariant.
void validate(const Annotation& a);
void validate(const Page& page);
void validate(const Dataset& dataset);

/// Canonical document text (sorted keys, boxes rounded to 3 decimals).
std::string dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(std::string_view text);

Dataset load_dataset(const std::filesystem::path& path);
/// Validates first, then writes atomically.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Rounds to the 1e-3 grid used by the document format.
double quantize_coord(double v) noexcept;

}  // namespace omrkit
