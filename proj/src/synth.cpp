#include "sfada/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <json.hpp>

#include "sfada/io.hpp"

namespace sfada {

namespace {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }
Vec2 rotate(Vec2 a, double t) {
  return {a.x * std::cos(t) - a.y * std::sin(t), a.x * std::sin(t) + a.y * std::cos(t)};
}

// Uniform doubles from the top 53 bits; identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }
  // Box-Muller.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

struct Segment {
  Vec2 p0, control, p2;
  double width;
};

Vec2 bezier(const Segment& s, double t) {
  const double u = 1.0 - t;
  return u * u * s.p0 + 2.0 * u * t * s.control + t * t * s.p2;
}

// Appends a chain of C1-joined quadratic segments. Returns the joints.
std::vector<std::pair<Vec2, Vec2>> grow_chain(Rng& rng, std::vector<Segment>& out, Vec2 start,
                                              Vec2 dir, double width, int segments, double length,
                                              double min_width) {
  std::vector<std::pair<Vec2, Vec2>> joints;
  Vec2 p = start;
  for (int i = 0; i < segments; ++i) {
    const double len = length * rng.uniform(0.7, 1.3);
    const Vec2 control = p + (len / 2) * dir;
    const Vec2 heading = rotate(dir, rng.uniform(-0.6, 0.6));
    const Vec2 end = control + (len / 2) * heading;
    out.push_back({p, control, end, width});
    dir = heading;
    p = end;
    width = std::max(min_width, width * 0.88);
    joints.emplace_back(p, dir);
  }
  return joints;
}

std::vector<Segment> grow_tree(const DomainParams& params, std::uint64_t tree_seed) {
  Rng rng(tree_seed);
  const double extent = std::min(params.width, params.height);
  const Vec2 start{rng.uniform(0, params.width), rng.uniform(0, params.height)};
  const Vec2 dir = rotate({1.0, 0.0}, rng.uniform(0, 2 * std::numbers::pi));
  const double trunk_width =
      rng.uniform(0.5 * (params.width_min + params.width_max), params.width_max);
  std::vector<Segment> segments;
  const auto joints = grow_chain(rng, segments, start, dir, trunk_width, rng.integer(4, 7),
                                 0.2 * extent, params.width_min);
  double width = trunk_width;
  for (const auto& [at, heading] : joints) {
    width = std::max(params.width_min, width * 0.88);
    if (rng.uniform() < 0.5) continue;
    const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const Vec2 branch_dir = rotate(heading, side * rng.uniform(0.5, 1.2));
    grow_chain(rng, segments, at, branch_dir, std::max(params.width_min, 0.6 * width),
               rng.integer(2, 3), 0.12 * extent, params.width_min);
  }
  return segments;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  double t = len2 > 0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

void rasterize(const Segment& s, BinaryMask& mask) {
  const double approx_len = norm(s.control - s.p0) + norm(s.p2 - s.control);
  const int steps = std::max(1, static_cast<int>(std::ceil(approx_len / 0.25)));
  const double r = s.width / 2;
  Vec2 prev = s.p0;
  for (int i = 1; i <= steps; ++i) {
    const Vec2 cur = bezier(s, static_cast<double>(i) / steps);
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(prev.x, cur.x) - r - 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(prev.y, cur.y) - r - 1)));
    const int x1 = std::min(mask.width() - 1, static_cast<int>(std::ceil(std::max(prev.x, cur.x) + r)));
    const int y1 = std::min(mask.height() - 1, static_cast<int>(std::ceil(std::max(prev.y, cur.y) + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (mask.at(x, y)) continue;
        if (point_segment_distance({x + 0.5, y + 0.5}, prev, cur) <= r) mask.at(x, y) = 1;
      }
    }
    prev = cur;
  }
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

void blur(std::vector<double>& img, int width, int height, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(img.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * img[y * width + std::clamp(x + i, 0, width - 1)];
      }
      tmp[y * width + x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * tmp[std::clamp(y + i, 0, height - 1) * width + x];
      }
      img[y * width + x] = acc;
    }
  }
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

}  // namespace

DomainParams default_source_params() { return {}; }

DomainParams default_target_params() {
  DomainParams p;
  p.seed = 2;
  p.contrast_gamma = 1.6;
  p.noise_sigma = 0.08;
  p.blur_sigma = 1.5;
  p.background_level = 0.35;
  p.vessel_level = 0.7;
  return p;
}

void validate(const DomainParams& p) {
  if (p.width < 1 || p.height < 1) throw Error("synth: image size must be positive");
  if (p.vessel_count < 0) throw Error("synth: vessel_count must be >= 0");
  if (!(p.width_min > 0 && p.width_min <= p.width_max)) {
    throw Error("synth: need 0 < width_min <= width_max");
  }
  if (p.width < p.width_max || p.height < p.width_max) {
    throw Error("synth: image " + dims_string(p.width, p.height) +
                " is smaller than the maximum vessel width " + std::to_string(p.width_max));
  }
  if (!(p.contrast_gamma > 0)) throw Error("synth: contrast_gamma must be > 0");
  if (!(p.noise_sigma >= 0) || !(p.blur_sigma >= 0)) throw Error("synth: sigmas must be >= 0");
  if (!(p.background_level >= 0 && p.background_level <= 1 && p.vessel_level >= 0 &&
        p.vessel_level <= 1)) {
    throw Error("synth: intensity levels must lie in [0,1]");
  }
  if (quantize(std::pow(p.background_level, p.contrast_gamma)) ==
      quantize(std::pow(p.vessel_level, p.contrast_gamma))) {
    throw Error("synth: background and vessel levels are indistinguishable at 8 bits");
  }
}

SyntheticSample gen_vessel_image(const DomainParams& params) {
  validate(params);
  const int w = params.width;
  const int h = params.height;
  SyntheticSample out{GrayImage(w, h), BinaryMask(w, h)};
  for (int i = 0; i < params.vessel_count; ++i) {
    for (const Segment& s : grow_tree(params, mix_seed(params.seed, i))) rasterize(s, out.mask);
  }

  const double bg = std::pow(params.background_level, params.contrast_gamma);
  const double fg = std::pow(params.vessel_level, params.contrast_gamma);
  std::vector<double> img(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = out.mask.values()[i] ? fg : bg;
  if (params.blur_sigma > 0) blur(img, w, h, params.blur_sigma);
  if (params.noise_sigma > 0) {
    Rng noise(mix_seed(params.seed, std::uint64_t{1} << 32));
    for (double& v : img) v += params.noise_sigma * noise.normal();
  }
  std::transform(img.begin(), img.end(), out.image.values().begin(), quantize);
  return out;
}

SplitCounts split_counts(int n) {
  if (n < 5) throw Error("synth: need at least 5 images per domain, got " + std::to_string(n));
  SplitCounts s;
  s.train = static_cast<int>(std::floor(0.6 * n + 0.5));
  s.val = static_cast<int>(std::floor(0.2 * n + 0.5));
  s.test = n - s.train - s.val;
  return s;
}

IntensityModel fit_intensity_model(const std::vector<SyntheticSample>& samples, int stride) {
  if (samples.empty()) throw Error("intensity model: no samples");
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& s : samples) {
    const auto img = s.image.values();
    const auto mask = s.mask.values();
    for (std::size_t i = 0; i < img.size(); i += std::max(1, stride)) {
      xs.push_back(img[i] / 255.0);
      ys.push_back(mask[i]);
    }
  }
  constexpr double kRidge = 1.0;
  double w = 0.0;
  double b = 0.0;
  for (int iter = 0; iter < 50; ++iter) {
    double gw = kRidge * w, gb = kRidge * b;
    double hww = kRidge, hwb = 0, hbb = kRidge;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-(w * xs[i] + b)));
      const double r = p - ys[i];
      const double s = p * (1 - p);
      gw += r * xs[i];
      gb += r;
      hww += s * xs[i] * xs[i];
      hwb += s * xs[i];
      hbb += s;
    }
    const double det = hww * hbb - hwb * hwb;
    const double dw = (hbb * gw - hwb * gb) / det;
    const double db = (hww * gb - hwb * gw) / det;
    w -= dw;
    b -= db;
    if (std::abs(dw) + std::abs(db) < 1e-10) break;
  }
  return {w, b};
}

LogitMap predict_logits(const IntensityModel& model, const GrayImage& image) {
  LogitMap out(image.width(), image.height(), 2);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      out.at(x, y, 0) = 0.0f;
      out.at(x, y, 1) = static_cast<float>(model.weight * image.at(x, y) / 255.0 + model.bias);
    }
  }
  return out;
}

namespace {

nlohmann::ordered_json params_json(const DomainParams& p) {
  return {{"seed", p.seed},
          {"width", p.width},
          {"height", p.height},
          {"vessel_count", p.vessel_count},
          {"width_min", p.width_min},
          {"width_max", p.width_max},
          {"contrast_gamma", p.contrast_gamma},
          {"noise_sigma", p.noise_sigma},
          {"blur_sigma", p.blur_sigma},
          {"background_level", p.background_level},
          {"vessel_level", p.vessel_level}};
}

DomainParams params_from(const nlohmann::json& j, DomainParams p) {
  p.seed = j.value("seed", p.seed);
  p.width = j.value("width", p.width);
  p.height = j.value("height", p.height);
  p.vessel_count = j.value("vessel_count", p.vessel_count);
  p.width_min = j.value("width_min", p.width_min);
  p.width_max = j.value("width_max", p.width_max);
  p.contrast_gamma = j.value("contrast_gamma", p.contrast_gamma);
  p.noise_sigma = j.value("noise_sigma", p.noise_sigma);
  p.blur_sigma = j.value("blur_sigma", p.blur_sigma);
  p.background_level = j.value("background_level", p.background_level);
  p.vessel_level = j.value("vessel_level", p.vessel_level);
  return p;
}

struct DomainOutput {
  std::string name;
  const DomainParams* params;
  int count;
  std::vector<SyntheticSample> samples;
};

const char* split_name(int i, const SplitCounts& s) {
  if (i < s.train) return "train";
  if (i < s.train + s.val) return "val";
  return "test";
}

std::string image_id(const std::string& domain, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03d", i);
  return domain + buf;
}

}  // namespace

std::string dataset_spec_to_json(const DatasetSpec& spec) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["source"] = params_json(spec.source);
  j["target"] = params_json(spec.target);
  j["source_count"] = spec.source_count;
  j["target_count"] = spec.target_count;
  j["emit_target_logits"] = spec.emit_target_logits;
  return j.dump(2) + "\n";
}

DatasetSpec dataset_spec_from_json(const std::string& text, const std::string& source) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("schema_version", 1) != 1) throw Error(source + ": unsupported schema_version");
    DatasetSpec spec;
    if (j.contains("source")) spec.source = params_from(j.at("source"), spec.source);
    if (j.contains("target")) spec.target = params_from(j.at("target"), spec.target);
    spec.source_count = j.value("source_count", spec.source_count);
    spec.target_count = j.value("target_count", spec.target_count);
    spec.emit_target_logits = j.value("emit_target_logits", spec.emit_target_logits);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(source + ": invalid dataset spec: " + e.what());
  }
}

void gen_dataset(const DatasetSpec& spec, const fs::path& out_dir) {
  validate(spec.source);
  validate(spec.target);
  const SplitCounts source_split = split_counts(spec.source_count);
  const SplitCounts target_split = split_counts(spec.target_count);

  std::vector<DomainOutput> domains{{"source", &spec.source, spec.source_count, {}},
                                    {"target", &spec.target, spec.target_count, {}}};
  for (auto& d : domains) {
    d.samples.resize(d.count);
    parallel_for(d.count, spec.workers, [&](std::size_t i) {
      DomainParams p = *d.params;
      p.seed = mix_seed(d.params->seed, i);
      d.samples[i] = gen_vessel_image(p);
    });
  }

  std::vector<SyntheticSample> source_train(domains[0].samples.begin(),
                                            domains[0].samples.begin() + source_split.train);
  const IntensityModel model = fit_intensity_model(source_train);

  StagedDirectory staged(out_dir);
  nlohmann::ordered_json manifest = nlohmann::ordered_json::parse(dataset_spec_to_json(spec));
  manifest["intensity_model"] = {{"weight", model.weight}, {"bias", model.bias}};
  nlohmann::ordered_json splits;
  for (auto& d : domains) {
    const SplitCounts& s = d.name == "source" ? source_split : target_split;
    nlohmann::ordered_json lists = {{"train", nlohmann::ordered_json::array()},
                                    {"val", nlohmann::ordered_json::array()},
                                    {"test", nlohmann::ordered_json::array()}};
    for (int i = 0; i < d.count; ++i) lists[split_name(i, s)].push_back(image_id(d.name, i));
    splits[d.name] = std::move(lists);
    parallel_for(d.count, spec.workers, [&](std::size_t i) {
      const std::string id = image_id(d.name, static_cast<int>(i));
      const fs::path dir = staged.path() / d.name / split_name(static_cast<int>(i), s);
      write_image(dir / "images" / (id + ".pgm"), d.samples[i].image);
      write_mask(dir / "masks" / (id + ".pgm"), d.samples[i].mask);
      if (d.name == "target" && spec.emit_target_logits) {
        write_map(dir / "logits" / (id + ".fmap"), predict_logits(model, d.samples[i].image));
      }
    });
  }
  manifest["splits"] = std::move(splits);
  write_file_atomic(staged.path() / "dataset.json", manifest.dump(2) + "\n");
  staged.commit();
}

}  // namespace sfada
