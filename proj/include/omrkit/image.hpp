#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace omrkit {

/// 8-bit grayscale image, row-major, 0 = ink, 255 = blank background.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int height, int width, std::uint8_t fill = 255);
  GrayImage(int height, int width, std::vector<std::uint8_t> pixels);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t at(int row, int col) const { return pixels_[index(row, col)]; }
  std::uint8_t& at(int row, int col) { return pixels_[index(row, col)]; }
  bool contains(int row, int col) const noexcept {
    return row >= 0 && col >= 0 && row < height_ && col < width_;
  }

  const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }
  std::vector<std::uint8_t>& pixels() noexcept { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Binary (P5) PGM, maxval 255.
std::string encode_pgm(const GrayImage& img);
/// Accepts P5 and P2 with maxval <= 255.
GrayImage decode_pgm(std::string_view bytes);

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

/// Box-average downsampling by an integer factor (partial edge blocks averaged
/// over their in-bounds pixels).
GrayImage downsample(const GrayImage& img, int factor);

/// Separable Gaussian blur with clamped edges; sigma <= 0 returns a copy.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

}  // namespace omrkit
