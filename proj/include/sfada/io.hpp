#pragma once

// On-disk formats.
//
// Float maps ("FMAP1"):
//   "FMAP1\n" "<width> <height> <channels>\n" then width*height*channels
//   little-endian IEEE-754 float32 values, row-major, channel-fastest.
//   A sidecar "<stem>.meta.json" records width, height, channels and kind.
//
// Masks and images: binary PGM (P5), maxval 255. Masks store 0 and 255.

#include <optional>
#include <string_view>

#include "sfada/maps.hpp"
#include "sfada/raster.hpp"
#include "sfada/util.hpp"

namespace sfada {

struct StoredMap {
  Raster<float> data;
  std::optional<MapKind> kind;  // from the sidecar, when present
};

std::string encode_fmap(const Raster<float>& map);
// `source` names the buffer in diagnostics.
Raster<float> decode_fmap(std::string_view bytes, const std::string& source);

fs::path sidecar_path(const fs::path& map_path);

StoredMap read_fmap(const fs::path& path);
void write_fmap(const fs::path& path, const Raster<float>& map, MapKind kind);

ProbabilityMap read_probability_map(const fs::path& path);
LogitMap read_logit_map(const fs::path& path);
UncertaintyMap read_uncertainty_map(const fs::path& path);

void write_map(const fs::path& path, const ProbabilityMap& map);
void write_map(const fs::path& path, const LogitMap& map);
// Stored as float32.
void write_map(const fs::path& path, const UncertaintyMap& map);

std::string encode_pgm(const Raster<std::uint8_t>& image);
Raster<std::uint8_t> decode_pgm(std::string_view bytes, const std::string& source);

GrayImage read_image(const fs::path& path);
void write_image(const fs::path& path, const Raster<std::uint8_t>& image);

// Any nonzero byte reads as 1; bytes other than 0 and 255 trigger a warning.
BinaryMask read_mask(const fs::path& path);
BinaryMask mask_from_bytes(const Raster<std::uint8_t>& bytes, const std::string& source);
void write_mask(const fs::path& path, const BinaryMask& mask);
Raster<std::uint8_t> mask_to_bytes(const BinaryMask& mask);

}  // namespace sfada
