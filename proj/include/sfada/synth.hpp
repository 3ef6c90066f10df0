#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "sfada/maps.hpp"
#include "sfada/raster.hpp"
#include "sfada/util.hpp"

namespace sfada {

/// Appearance and geometry of one synthetic imaging domain. Intensities are
/// in [0,1] before 8-bit quantization.
struct DomainParams {
  std::uint64_t seed = 1;
  int width = 512;
  int height = 512;
  int vessel_count = 6;
  double width_min = 2.0;  // stroke widths, pixels
  double width_max = 7.0;
  double contrast_gamma = 1.0;
  double noise_sigma = 0.03;
  double blur_sigma = 1.0;
  double background_level = 0.25;
  double vessel_level = 0.75;

  friend bool operator==(const DomainParams&, const DomainParams&) = default;
};

// Default appearance pairs used by the desk-scale experiments.
DomainParams default_source_params();
DomainParams default_target_params();

void validate(const DomainParams& params);

struct SyntheticSample {
  GrayImage image;
  BinaryMask mask;
};

/// Draws vessel_count random trees. Tree i is seeded by
/// mix_seed(seed, i), so raising vessel_count only adds trees. Each tree is
/// a chain of quadratic Bezier segments with C1 joins plus thinner side
/// branches; a pixel is vessel iff its center lies within width/2 of the
/// curve (sampled at <= 0.25 px chords). The image is
/// (background + (vessel - background) * mask) ^ gamma, Gaussian-blurred,
/// plus Gaussian noise from stream mix_seed(seed, 2^32), then clamped and
/// rounded to 8 bits.
SyntheticSample gen_vessel_image(const DomainParams& params);

/// Train/val/test sizes for n images: train = round(0.6 n),
/// val = round(0.2 n), test = the rest.
struct SplitCounts {
  int train = 0;
  int val = 0;
  int test = 0;
};
SplitCounts split_counts(int n);

/// One-feature logistic model on pixel intensity; a lightweight stand-in
/// for a trained source network that yields 2-channel logits.
struct IntensityModel {
  double weight = 0.0;
  double bias = 0.0;
};

/// Ridge-regularized Newton fit on every `stride`-th pixel.
IntensityModel fit_intensity_model(const std::vector<SyntheticSample>& samples, int stride = 4);
/// Channel 0 = background logit (0), channel 1 = weight * intensity + bias.
LogitMap predict_logits(const IntensityModel& model, const GrayImage& image);

struct DatasetSpec {
  DomainParams source = default_source_params();
  DomainParams target = default_target_params();
  int source_count = 10;
  int target_count = 16;
  bool emit_target_logits = true;
  int workers = 1;
};

/// Writes
///   <out>/{source,target}/{train,val,test}/images/<id>.pgm
///   <out>/{source,target}/{train,val,test}/masks/<id>.pgm
///   <out>/target/{train,val,test}/logits/<id>.fmap   (emit_target_logits)
///   <out>/dataset.json
/// Image i of a domain uses seed mix_seed(domain seed, i) and id
/// "<domain>_<iii>". The intensity model is fitted on source/train.
/// The tree is staged and swapped into place on success.
void gen_dataset(const DatasetSpec& spec, const fs::path& out_dir);

std::string dataset_spec_to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const std::string& text, const std::string& source);

}  // namespace sfada
