#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfada {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major, channel-fastest pixel buffer.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 1) {
      throw Error("raster: invalid shape " + std::to_string(width) + "x" +
                  std::to_string(height) + "x" + std::to_string(channels));
    }
    values_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return values_.empty(); }

  std::size_t offset(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  T& at(int x, int y, int c = 0) { return values_[offset(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return values_[offset(x, y, c)]; }

  std::span<T> pixel(int x, int y) {
    return std::span<T>(values_).subspan(offset(x, y), channels_);
  }
  std::span<const T> pixel(int x, int y) const {
    return std::span<const T>(values_).subspan(offset(x, y), channels_);
  }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  template <typename U>
  bool same_dims(const Raster<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Raster& a, const Raster& b) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> values_;
};

struct LogitMap : Raster<float> {
  using Raster::Raster;
  explicit LogitMap(Raster<float> r) : Raster(std::move(r)) {}
};

struct ProbabilityMap : Raster<float> {
  using Raster::Raster;
  explicit ProbabilityMap(Raster<float> r) : Raster(std::move(r)) {}
};

/// Per-pixel entropy in nats. Single channel, kept in double precision.
struct UncertaintyMap : Raster<double> {
  UncertaintyMap() = default;
  UncertaintyMap(int width, int height, double fill = 0.0) : Raster(width, height, 1, fill) {}
};

/// 0 = background, 1 = vessel.
struct BinaryMask : Raster<std::uint8_t> {
  BinaryMask() = default;
  BinaryMask(int width, int height, std::uint8_t fill = 0) : Raster(width, height, 1, fill) {}
  explicit BinaryMask(Raster<std::uint8_t> r) : Raster(std::move(r)) {}
};

/// 8-bit grayscale image.
struct GrayImage : Raster<std::uint8_t> {
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0) : Raster(width, height, 1, fill) {}
  explicit GrayImage(Raster<std::uint8_t> r) : Raster(std::move(r)) {}
};

inline std::string dims_string(int width, int height) {
  return std::to_string(width) + "x" + std::to_string(height);
}

}  // namespace sfada
