#include "sfada/io.hpp"

#include <bit>
#include <cctype>
#include <cstring>

#include <json.hpp>

namespace sfada {

namespace {

constexpr std::string_view kFmapMagic = "FMAP1\n";

[[noreturn]] void fail_at(const std::string& source, std::size_t pos, const std::string& what) {
  throw Error(source + ": " + what + " at byte " + std::to_string(pos));
}

// Parses a non-negative decimal integer of at most 9 digits.
int parse_uint(std::string_view bytes, std::size_t& pos, const std::string& source,
               const char* field) {
  const std::size_t start = pos;
  long long value = 0;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    value = value * 10 + (bytes[pos] - '0');
    if (pos - start >= 9) fail_at(source, start, std::string(field) + " too large");
    ++pos;
  }
  if (pos == start) fail_at(source, start, std::string("expected decimal ") + field);
  return static_cast<int>(value);
}

void expect_char(std::string_view bytes, std::size_t& pos, char c, const std::string& source) {
  if (pos >= bytes.size()) fail_at(source, pos, "truncated header");
  if (bytes[pos] != c) {
    fail_at(source, pos,
            std::string("expected ") + (c == '\n' ? "newline" : c == ' ' ? "space" : std::string(1, c)));
  }
  ++pos;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
  }
  return v;
}

void skip_pgm_space(std::string_view bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
}

nlohmann::ordered_json sidecar_json(const Raster<float>& map, MapKind kind) {
  nlohmann::ordered_json j;
  j["width"] = map.width();
  j["height"] = map.height();
  j["channels"] = map.channels();
  j["kind"] = to_string(kind);
  return j;
}

}  // namespace

std::string encode_fmap(const Raster<float>& map) {
  std::string out(kFmapMagic);
  out += std::to_string(map.width()) + " " + std::to_string(map.height()) + " " +
         std::to_string(map.channels()) + "\n";
  const std::size_t header = out.size();
  out.resize(header + map.values().size() * 4);
  char* dst = out.data() + header;
  for (float v : map.values()) {
    const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(v));
    std::memcpy(dst, &bits, 4);
    dst += 4;
  }
  return out;
}

Raster<float> decode_fmap(std::string_view bytes, const std::string& source) {
  if (bytes.substr(0, kFmapMagic.size()) != kFmapMagic) {
    std::size_t pos = 0;
    while (pos < bytes.size() && pos < kFmapMagic.size() && bytes[pos] == kFmapMagic[pos]) ++pos;
    fail_at(source, pos, "bad magic (expected \"FMAP1\\n\")");
  }
  std::size_t pos = kFmapMagic.size();
  const int width = parse_uint(bytes, pos, source, "width");
  expect_char(bytes, pos, ' ', source);
  const int height = parse_uint(bytes, pos, source, "height");
  expect_char(bytes, pos, ' ', source);
  const int channels = parse_uint(bytes, pos, source, "channels");
  expect_char(bytes, pos, '\n', source);
  if (width < 1 || height < 1 || channels < 1) {
    fail_at(source, kFmapMagic.size(), "dimensions must be positive");
  }
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  const std::size_t available = bytes.size() - pos;
  if (available < count * 4) {
    fail_at(source, bytes.size(),
            "truncated payload (expected " + std::to_string(count * 4) + " data bytes, found " +
                std::to_string(available) + ")");
  }
  if (available > count * 4) {
    fail_at(source, pos + count * 4, "trailing data after payload");
  }
  Raster<float> map(width, height, channels);
  const char* src = bytes.data() + pos;
  for (float& v : map.values()) {
    std::uint32_t bits;
    std::memcpy(&bits, src, 4);
    v = std::bit_cast<float>(to_little_endian(bits));
    src += 4;
  }
  return map;
}

fs::path sidecar_path(const fs::path& map_path) {
  fs::path p = map_path;
  p.replace_extension(".meta.json");
  return p;
}

StoredMap read_fmap(const fs::path& path) {
  StoredMap stored{decode_fmap(read_file(path), path.string()), std::nullopt};
  const fs::path meta = sidecar_path(path);
  if (fs::exists(meta)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(meta));
      if (j.at("width").get<int>() != stored.data.width() ||
          j.at("height").get<int>() != stored.data.height() ||
          j.at("channels").get<int>() != stored.data.channels()) {
        throw Error(meta.string() + ": dimensions disagree with " + path.string());
      }
      stored.kind = parse_map_kind(j.at("kind").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(meta.string() + ": invalid descriptor: " + e.what());
    }
  }
  return stored;
}

void write_fmap(const fs::path& path, const Raster<float>& map, MapKind kind) {
  write_file_atomic(path, encode_fmap(map));
  write_file_atomic(sidecar_path(path), sidecar_json(map, kind).dump(2) + "\n");
}

namespace {

Raster<float> read_kind(const fs::path& path, MapKind expected) {
  StoredMap stored = read_fmap(path);
  if (stored.kind && *stored.kind != expected) {
    throw Error(path.string() + ": descriptor says kind '" + to_string(*stored.kind) +
                "', expected '" + to_string(expected) + "'");
  }
  return std::move(stored.data);
}

}  // namespace

ProbabilityMap read_probability_map(const fs::path& path) {
  ProbabilityMap map(read_kind(path, MapKind::prob));
  try {
    validate(map);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return map;
}

LogitMap read_logit_map(const fs::path& path) {
  LogitMap map(read_kind(path, MapKind::logit));
  try {
    validate(map);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return map;
}

UncertaintyMap read_uncertainty_map(const fs::path& path) {
  const Raster<float> raw = read_kind(path, MapKind::uncertainty);
  if (raw.channels() != 1) throw Error(path.string() + ": uncertainty map must have 1 channel");
  UncertaintyMap map(raw.width(), raw.height());
  std::copy(raw.values().begin(), raw.values().end(), map.values().begin());
  return map;
}

void write_map(const fs::path& path, const ProbabilityMap& map) {
  write_fmap(path, map, MapKind::prob);
}

void write_map(const fs::path& path, const LogitMap& map) { write_fmap(path, map, MapKind::logit); }

void write_map(const fs::path& path, const UncertaintyMap& map) {
  Raster<float> raw(map.width(), map.height());
  std::transform(map.values().begin(), map.values().end(), raw.values().begin(),
                 [](double v) { return static_cast<float>(v); });
  write_fmap(path, raw, MapKind::uncertainty);
}

std::string encode_pgm(const Raster<std::uint8_t>& image) {
  if (image.channels() != 1) throw Error("PGM output requires a single-channel raster");
  std::string out = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(image.values().data()), image.values().size());
  return out;
}

Raster<std::uint8_t> decode_pgm(std::string_view bytes, const std::string& source) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    fail_at(source, 0, "bad magic (expected binary PGM \"P5\")");
  }
  std::size_t pos = 2;
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    fail_at(source, pos, "expected whitespace after magic");
  }
  skip_pgm_space(bytes, pos);
  const int width = parse_uint(bytes, pos, source, "width");
  skip_pgm_space(bytes, pos);
  const int height = parse_uint(bytes, pos, source, "height");
  skip_pgm_space(bytes, pos);
  const std::size_t maxval_pos = pos;
  const int maxval = parse_uint(bytes, pos, source, "maxval");
  if (maxval < 1 || maxval > 255) fail_at(source, maxval_pos, "unsupported maxval (need 1..255)");
  if (width < 1 || height < 1) fail_at(source, 2, "dimensions must be positive");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    fail_at(source, pos, "expected single whitespace before pixel data");
  }
  ++pos;
  const std::size_t count = static_cast<std::size_t>(width) * height;
  const std::size_t available = bytes.size() - pos;
  if (available < count) {
    fail_at(source, bytes.size(),
            "truncated pixel data (expected " + std::to_string(count) + " bytes, found " +
                std::to_string(available) + ")");
  }
  Raster<std::uint8_t> image(width, height);
  std::memcpy(image.values().data(), bytes.data() + pos, count);
  return image;
}

GrayImage read_image(const fs::path& path) {
  Raster<std::uint8_t> raw = decode_pgm(read_file(path), path.string());
  GrayImage image(raw.width(), raw.height());
  std::copy(raw.values().begin(), raw.values().end(), image.values().begin());
  return image;
}

void write_image(const fs::path& path, const Raster<std::uint8_t>& image) {
  write_file_atomic(path, encode_pgm(image));
}

BinaryMask mask_from_bytes(const Raster<std::uint8_t>& bytes, const std::string& source) {
  BinaryMask mask(bytes.width(), bytes.height());
  std::size_t odd = 0;
  auto dst = mask.values().begin();
  for (std::uint8_t v : bytes.values()) {
    if (v != 0 && v != 255) ++odd;
    *dst++ = v != 0 ? 1 : 0;
  }
  if (odd > 0) {
    warn(source + ": " + std::to_string(odd) +
         " mask bytes are neither 0 nor 255; nonzero values read as vessel");
  }
  return mask;
}

BinaryMask read_mask(const fs::path& path) {
  return mask_from_bytes(decode_pgm(read_file(path), path.string()), path.string());
}

Raster<std::uint8_t> mask_to_bytes(const BinaryMask& mask) {
  Raster<std::uint8_t> bytes(mask.width(), mask.height());
  std::transform(mask.values().begin(), mask.values().end(), bytes.values().begin(),
                 [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
  return bytes;
}

void write_mask(const fs::path& path, const BinaryMask& mask) {
  write_file_atomic(path, encode_pgm(mask_to_bytes(mask)));
}

}  // namespace sfada
