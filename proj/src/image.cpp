#include "omrkit/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "omrkit/error.hpp"
#include "omrkit/io_util.hpp"

namespace omrkit {

GrayImage::GrayImage(int height, int width, std::uint8_t fill)
    : height_(height),
      width_(width),
      pixels_(static_cast<std::size_t>(std::max(height, 0)) *
                  static_cast<std::size_t>(std::max(width, 0)),
              fill) {}

GrayImage::GrayImage(int height, int width, std::vector<std::uint8_t> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height < 0 || width < 0 ||
      pixels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw Error(Errc::validation_error, "pixel buffer does not match image dimensions");
  }
}

std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels().data()), img.pixels().size());
  return out;
}

namespace {

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(std::string_view bytes) : bytes_(bytes) {}

  int next_int() {
    skip_space_and_comments();
    std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_ || pos_ - start > 9) throw Error(Errc::schema_error, "bad PGM header");
    return std::stoi(std::string(bytes_.substr(start, pos_ - start)));
  }

  void skip_single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw Error(Errc::schema_error, "bad PGM header");
    }
    ++pos_;
  }

  std::size_t pos() const noexcept { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage decode_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
    throw Error(Errc::schema_error, "not a PGM image");
  }
  const bool binary = bytes[1] == '5';
  PgmHeaderReader reader(bytes);
  reader.advance(2);
  const int width = reader.next_int();
  const int height = reader.next_int();
  const int maxval = reader.next_int();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
    throw Error(Errc::schema_error, "unsupported PGM dimensions or maxval");
  }
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<std::uint8_t> pixels(count);
  const auto rescale = [maxval](int v) {
    return static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
  };
  if (binary) {
    reader.skip_single_whitespace();
    if (bytes.size() - reader.pos() < count) throw Error(Errc::schema_error, "truncated PGM");
    for (std::size_t i = 0; i < count; ++i) {
      const int v = static_cast<unsigned char>(bytes[reader.pos() + i]);
      if (v > maxval) throw Error(Errc::schema_error, "PGM sample exceeds maxval");
      pixels[i] = rescale(v);
    }
  } else {
    for (auto& p : pixels) {
      const int v = reader.next_int();
      if (v > maxval) throw Error(Errc::schema_error, "PGM sample exceeds maxval");
      p = rescale(v);
    }
  }
  return GrayImage(height, width, std::move(pixels));
}

GrayImage read_pgm(const std::filesystem::path& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::io_error) throw;
    throw Error(e.code(), "'" + path.string() + "': " + e.what());
  }
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pgm(img));
}

GrayImage downsample(const GrayImage& img, int factor) {
  if (factor <= 1) return img;
  const int h = (img.height() + factor - 1) / factor;
  const int w = (img.width() + factor - 1) / factor;
  GrayImage out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      int sum = 0;
      int n = 0;
      for (int dr = 0; dr < factor; ++dr) {
        const int sr = r * factor + dr;
        if (sr >= img.height()) break;
        for (int dc = 0; dc < factor; ++dc) {
          const int sc = c * factor + dc;
          if (sc >= img.width()) break;
          sum += img.at(sr, sc);
          ++n;
        }
      }
      out.at(r, c) = static_cast<std::uint8_t>((sum + n / 2) / n);
    }
  }
  return out;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (sigma <= 0.0 || img.empty()) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (auto& k : kernel) k /= total;

  const int h = img.height();
  const int w = img.width();
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * img.at(r, std::clamp(c + i, 0, w - 1));
      }
      tmp[static_cast<std::size_t>(r) * w + c] = acc;
    }
  }
  GrayImage out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += kernel[i + radius] * tmp[static_cast<std::size_t>(std::clamp(r + i, 0, h - 1)) * w + c];
      }
      out.at(r, c) = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
    }
  }
  return out;
}

}  // namespace omrkit
