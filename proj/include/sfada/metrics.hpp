#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfada/raster.hpp"

namespace sfada {

/// Pixel confusion counts with vessel as the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt);

// Degenerate cases: Dice and IoU are 1 when pred and gt are both empty
// (tp = fp = fn = 0) and 0 when only one of them is. MCC is 0 when any
// marginal is 0. In BM, a rate whose denominator is 0 contributes 0.
double dice(const ConfusionCounts& c);
double iou(const ConfusionCounts& c);
double mcc(const ConfusionCounts& c);
double bm(const ConfusionCounts& c);

struct ImageMetrics {
  std::string image_id;
  double dice = 0.0;
  double iou = 0.0;
  double mcc = 0.0;
  double bm = 0.0;
};

ImageMetrics image_metrics(const std::string& image_id, const ConfusionCounts& c);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for one value
};

MeanStd mean_std(const std::vector<double>& values);

struct MetricReport {
  std::vector<ImageMetrics> per_image;
  MeanStd dice;
  MeanStd iou;
  MeanStd mcc;
  MeanStd bm;
};

MetricReport aggregate(std::vector<ImageMetrics> per_image);

std::string report_to_json(const MetricReport& report);
/// Aligned text table in percent with two decimals, followed by a mean±std row.
std::string report_to_table(const MetricReport& report);

}  // namespace sfada
