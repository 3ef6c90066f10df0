#include "sfada/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace sfada {

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
  if (!pred.same_dims(gt)) {
    throw Error("confusion: prediction " + dims_string(pred.width(), pred.height()) +
                " and ground truth " + dims_string(gt.width(), gt.height()) + " differ in size");
  }
  ConfusionCounts c;
  const auto p = pred.values();
  const auto g = gt.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pv = p[i] != 0;
    const bool gv = g[i] != 0;
    if (pv && gv) {
      ++c.tp;
    } else if (pv) {
      ++c.fp;
    } else if (gv) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

double dice(const ConfusionCounts& c) {
  const double denom = 2.0 * c.tp + c.fp + c.fn;
  return denom == 0.0 ? 1.0 : 2.0 * c.tp / denom;
}

double iou(const ConfusionCounts& c) {
  const double denom = static_cast<double>(c.tp) + c.fp + c.fn;
  return denom == 0.0 ? 1.0 : c.tp / denom;
}

double mcc(const ConfusionCounts& c) {
  const double tp = c.tp, fp = c.fp, fn = c.fn, tn = c.tn;
  const double a = tp + fp, b = tp + fn, d = tn + fp, e = tn + fn;
  if (a == 0.0 || b == 0.0 || d == 0.0 || e == 0.0) return 0.0;
  const double value = (tp * tn - fp * fn) / (std::sqrt(a) * std::sqrt(b) * std::sqrt(d) * std::sqrt(e));
  return std::clamp(value, -1.0, 1.0);
}

double bm(const ConfusionCounts& c) {
  const double pos = static_cast<double>(c.tp) + c.fn;
  const double neg = static_cast<double>(c.tn) + c.fp;
  const double sensitivity = pos == 0.0 ? 0.0 : c.tp / pos;
  const double specificity = neg == 0.0 ? 0.0 : c.tn / neg;
  return sensitivity + specificity - 1.0;
}

ImageMetrics image_metrics(const std::string& image_id, const ConfusionCounts& c) {
  return {image_id, dice(c), iou(c), mcc(c), bm(c)};
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw Error("aggregate: no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / values.size();
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (values.size() - 1))};
}

MetricReport aggregate(std::vector<ImageMetrics> per_image) {
  if (per_image.empty()) throw Error("aggregate: empty image list");
  auto column = [&](double ImageMetrics::*field) {
    std::vector<double> v;
    v.reserve(per_image.size());
    for (const auto& m : per_image) v.push_back(m.*field);
    return mean_std(v);
  };
  MetricReport r;
  r.dice = column(&ImageMetrics::dice);
  r.iou = column(&ImageMetrics::iou);
  r.mcc = column(&ImageMetrics::mcc);
  r.bm = column(&ImageMetrics::bm);
  r.per_image = std::move(per_image);
  return r;
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& m : report.per_image) {
    rows.push_back(
        {{"image_id", m.image_id}, {"dice", m.dice}, {"iou", m.iou}, {"mcc", m.mcc}, {"bm", m.bm}});
  }
  j["per_image"] = std::move(rows);
  auto ms = [](const MeanStd& v) { return nlohmann::ordered_json{{"mean", v.mean}, {"std", v.std}}; };
  j["aggregate"] = {{"dice", ms(report.dice)},
                    {"iou", ms(report.iou)},
                    {"mcc", ms(report.mcc)},
                    {"bm", ms(report.bm)}};
  return j.dump(2) + "\n";
}

std::string report_to_table(const MetricReport& report) {
  std::size_t id_width = 5;
  for (const auto& m : report.per_image) id_width = std::max(id_width, m.image_id.size());
  const int w = static_cast<int>(id_width);
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %15s %15s %15s %15s\n", w, "image", "Dice(%)", "IoU(%)",
                "MCC(%)", "BM(%)");
  out += buf;
  for (const auto& m : report.per_image) {
    std::snprintf(buf, sizeof buf, "%-*s %15.2f %15.2f %15.2f %15.2f\n", w, m.image_id.c_str(),
                  100 * m.dice, 100 * m.iou, 100 * m.mcc, 100 * m.bm);
    out += buf;
  }
  auto cell = [](const MeanStd& v) {
    char c[64];
    std::snprintf(c, sizeof c, "%.2f±%.2f", 100 * v.mean, 100 * v.std);
    return std::string(c);
  };
  // "±" is two bytes in UTF-8, so pad by one extra column.
  std::snprintf(buf, sizeof buf, "%-*s %16s %16s %16s %16s\n", w, "mean", cell(report.dice).c_str(),
                cell(report.iou).c_str(), cell(report.mcc).c_str(), cell(report.bm).c_str());
  out += buf;
  return out;
}

}  // namespace sfada
