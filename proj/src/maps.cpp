#include "sfada/maps.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sfada {

std::string to_string(MapKind kind) {
  switch (kind) {
    case MapKind::prob:
      return "prob";
    case MapKind::logit:
      return "logit";
    case MapKind::uncertainty:
      return "uncertainty";
  }
  return "?";
}

MapKind parse_map_kind(const std::string& text) {
  if (text == "prob") return MapKind::prob;
  if (text == "logit") return MapKind::logit;
  if (text == "uncertainty") return MapKind::uncertainty;
  throw Error("unknown map kind '" + text + "' (expected prob, logit or uncertainty)");
}

void validate(const ProbabilityMap& prob) {
  if (prob.channels() < 2) throw Error("probability map needs at least 2 channels");
  for (int y = 0; y < prob.height(); ++y) {
    for (int x = 0; x < prob.width(); ++x) {
      double sum = 0.0;
      for (float v : prob.pixel(x, y)) {
        if (!(v >= 0.0f && v <= 1.0f)) {
          throw Error("probability map: value " + std::to_string(v) + " outside [0,1] at pixel (" +
                      std::to_string(x) + "," + std::to_string(y) + ")");
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > kSimplexTolerance) {
        throw Error("probability map: channels sum to " + std::to_string(sum) + " at pixel (" +
                    std::to_string(x) + "," + std::to_string(y) + ")");
      }
    }
  }
}

void validate(const LogitMap& logits) {
  const auto values = logits.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      const auto pixel = i / logits.channels();
      throw Error("logit map: non-finite value at pixel (" +
                  std::to_string(pixel % logits.width()) + "," +
                  std::to_string(pixel / logits.width()) + "), channel " +
                  std::to_string(i % logits.channels()));
    }
  }
}

ProbabilityMap softmax(const LogitMap& logits) {
  validate(logits);
  ProbabilityMap out(logits.width(), logits.height(), logits.channels());
  std::vector<double> e(logits.channels());
  for (int y = 0; y < logits.height(); ++y) {
    for (int x = 0; x < logits.width(); ++x) {
      const auto in = logits.pixel(x, y);
      const double peak = *std::max_element(in.begin(), in.end());
      double sum = 0.0;
      for (std::size_t c = 0; c < in.size(); ++c) {
        e[c] = std::exp(static_cast<double>(in[c]) - peak);
        sum += e[c];
      }
      auto dst = out.pixel(x, y);
      for (std::size_t c = 0; c < in.size(); ++c) dst[c] = static_cast<float>(e[c] / sum);
    }
  }
  return out;
}

BinaryMask argmax_mask(const ProbabilityMap& prob) {
  if (prob.channels() != 2) {
    throw Error("argmax_mask: expected a 2-channel (background, vessel) map, got " +
                std::to_string(prob.channels()) + " channels");
  }
  BinaryMask mask(prob.width(), prob.height());
  for (int y = 0; y < prob.height(); ++y) {
    for (int x = 0; x < prob.width(); ++x) {
      mask.at(x, y) = prob.at(x, y, 1) > prob.at(x, y, 0) ? 1 : 0;
    }
  }
  return mask;
}

UncertaintyMap entropy_map(const ProbabilityMap& prob) {
  const double ceiling = std::log(static_cast<double>(prob.channels()));
  UncertaintyMap out(prob.width(), prob.height());
  for (int y = 0; y < prob.height(); ++y) {
    for (int x = 0; x < prob.width(); ++x) {
      double h = 0.0;
      for (float v : prob.pixel(x, y)) {
        const double p = v;
        if (p > 0.0) h -= p * std::log(p);
      }
      out.at(x, y) = std::clamp(h, 0.0, ceiling);
    }
  }
  return out;
}

namespace {

// Source coordinate of an output pixel center, clamped to the source extent.
struct Tap {
  int lo;
  int hi;
  double frac;
};

Tap bilinear_tap(int dst, int dst_size, int src_size) {
  double s = (dst + 0.5) * static_cast<double>(src_size) / dst_size - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(src_size - 1));
  const int lo = static_cast<int>(std::floor(s));
  const int hi = std::min(lo + 1, src_size - 1);
  return {lo, hi, s - lo};
}

}  // namespace

ProbabilityMap resample(const ProbabilityMap& prob, int width, int height, ResampleMethod method) {
  if (width < 1 || height < 1) {
    throw Error("resample: target size " + dims_string(width, height) + " must be at least 1x1");
  }
  if (prob.empty()) throw Error("resample: empty source map");
  if (width == prob.width() && height == prob.height()) return prob;

  const int channels = prob.channels();
  ProbabilityMap out(width, height, channels);
  if (method == ResampleMethod::nearest) {
    for (int y = 0; y < height; ++y) {
      const int sy = std::min(static_cast<int>((y + 0.5) * prob.height() / height), prob.height() - 1);
      for (int x = 0; x < width; ++x) {
        const int sx = std::min(static_cast<int>((x + 0.5) * prob.width() / width), prob.width() - 1);
        std::copy_n(prob.pixel(sx, sy).begin(), channels, out.pixel(x, y).begin());
      }
    }
    return out;
  }

  std::vector<double> acc(channels);
  for (int y = 0; y < height; ++y) {
    const Tap ty = bilinear_tap(y, height, prob.height());
    for (int x = 0; x < width; ++x) {
      const Tap tx = bilinear_tap(x, width, prob.width());
      const double w00 = (1 - tx.frac) * (1 - ty.frac);
      const double w10 = tx.frac * (1 - ty.frac);
      const double w01 = (1 - tx.frac) * ty.frac;
      const double w11 = tx.frac * ty.frac;
      double sum = 0.0;
      for (int c = 0; c < channels; ++c) {
        acc[c] = w00 * prob.at(tx.lo, ty.lo, c) + w10 * prob.at(tx.hi, ty.lo, c) +
                 w01 * prob.at(tx.lo, ty.hi, c) + w11 * prob.at(tx.hi, ty.hi, c);
        sum += acc[c];
      }
      auto dst = out.pixel(x, y);
      for (int c = 0; c < channels; ++c) {
        dst[c] = static_cast<float>(sum > 0.0 ? acc[c] / sum : 1.0 / channels);
      }
    }
  }
  return out;
}

}  // namespace sfada
