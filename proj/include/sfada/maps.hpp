#pragma once

#include <string>

#include "sfada/raster.hpp"

namespace sfada {

enum class MapKind { prob, logit, uncertainty };

std::string to_string(MapKind kind);
MapKind parse_map_kind(const std::string& text);

enum class ResampleMethod { nearest, bilinear };

// Tolerance on per-pixel channel sums of a probability map.
inline constexpr double kSimplexTolerance = 1e-5;

// Throws if any value is outside [0,1] or a pixel does not sum to 1.
void validate(const ProbabilityMap& prob);
// Throws on non-finite values.
void validate(const LogitMap& logits);

/// Per-pixel softmax over channels, evaluated in double with the max logit
/// subtracted first.
ProbabilityMap softmax(const LogitMap& logits);

/// Binary prediction mask. A pixel is vessel only when its vessel probability
/// strictly exceeds the background probability, so exact ties go to
/// background. Requires exactly two channels.
BinaryMask argmax_mask(const ProbabilityMap& prob);

/// Entropy -sum p ln p per pixel, in nats, with 0 ln 0 = 0.
UncertaintyMap entropy_map(const ProbabilityMap& prob);

/// Resizes a probability map. Bilinear sampling uses pixel-center alignment
/// with edge clamping and renormalizes each output pixel onto the simplex;
/// nearest copies source pixels. Same-size requests return an exact copy.
ProbabilityMap resample(const ProbabilityMap& prob, int width, int height, ResampleMethod method);

}  // namespace sfada
