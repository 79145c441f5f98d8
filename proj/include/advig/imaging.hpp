#pragma once

// Frame representation, lossless PNM (PGM/PPM) codec, perturbation fusion,
// and the multi-scale transform family used for robustness-aware fitness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "advig/error.hpp"
#include "advig/geometry.hpp"

namespace advig {

/// 8-bit raster, row-major, interleaved channels (1 = grayscale, 3 = RGB).
struct Frame {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  bool valid() const {
    return width > 0 && height > 0 && (channels == 1 || channels == 3) &&
           data.size() == static_cast<std::size_t>(width) * height * channels;
  }
  FrameDims dims() const { return FrameDims{width, height}; }

  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  /// Mean intensity of a pixel across channels.
  double mean_at(int x, int y) const {
    int sum = 0;
    for (int c = 0; c < channels; ++c) sum += at(x, y, c);
    return static_cast<double>(sum) / channels;
  }

  static Frame constant(int w, int h, int ch, std::uint8_t value) {
    if (w < 1 || h < 1 || (ch != 1 && ch != 3))
      throw InvalidParameter("invalid frame shape");
    Frame f;
    f.width = w;
    f.height = h;
    f.channels = ch;
    f.data.assign(static_cast<std::size_t>(w) * h * ch, value);
    return f;
  }
  friend bool operator==(const Frame&, const Frame&) = default;
};

// ---------------------------------------------------------------------------
// PNM codec (PGM P5 for grayscale, PPM P6 for RGB, 8-bit maxval)
// ---------------------------------------------------------------------------

namespace detail {

// Reads one PNM header token, skipping whitespace and '#' comments.
inline std::string pnm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw InvalidParameter("truncated PNM header");
  return tok;
}

inline int pnm_int(std::istream& in) {
  const std::string tok = pnm_token(in);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw InvalidParameter("bad PNM header field: " + tok);
  }
}

}  // namespace detail

/// Serialize a frame as binary PGM (1 channel) or PPM (3 channels).
inline std::string encode_pnm(const Frame& frame) {
  if (!frame.valid()) throw InvalidParameter("cannot encode invalid frame");
  std::string out;
  out += frame.channels == 1 ? "P5" : "P6";
  out += '\n';
  out += std::to_string(frame.width) + ' ' + std::to_string(frame.height);
  out += "\n255\n";
  out.append(reinterpret_cast<const char*>(frame.data.data()),
             frame.data.size());
  return out;
}

/// Parse binary PGM/PPM bytes. Maxval must fit 8 bits.
inline Frame decode_pnm(const std::string& bytes) {
  std::istringstream in(bytes);
  const std::string magic = detail::pnm_token(in);
  int channels = 0;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw InvalidParameter("unsupported raster magic: " + magic);

  const int w = detail::pnm_int(in);
  const int h = detail::pnm_int(in);
  // Reading the maxval token also consumes the single whitespace byte that
  // separates the header from the raster.
  const int maxval = detail::pnm_int(in);
  if (w < 1 || h < 1) throw InvalidParameter("non-positive PNM dimensions");
  if (maxval < 1 || maxval > 255)
    throw InvalidParameter("PNM maxval out of 8-bit range");

  Frame f;
  f.width = w;
  f.height = h;
  f.channels = channels;
  const std::size_t need = static_cast<std::size_t>(w) * h * channels;
  f.data.resize(need);
  in.read(reinterpret_cast<char*>(f.data.data()),
          static_cast<std::streamsize>(need));
  if (static_cast<std::size_t>(in.gcount()) != need)
    throw InvalidParameter("truncated PNM raster data");
  return f;
}

inline Frame read_frame(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open image file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return decode_pnm(buf.str());
  } catch (const InvalidParameter& e) {
    throw InvalidParameter(path + ": " + e.what());
  }
}

inline void write_frame(const std::string& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write image file: " + path);
  const std::string bytes = encode_pnm(frame);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write on image file: " + path);
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint8_t blend_channel(std::uint8_t base, std::uint8_t over,
                                  double alpha) {
  const double v = alpha * over + (1.0 - alpha) * base;
  return static_cast<std::uint8_t>(
      std::clamp<long long>(std::llround(v), 0, 255));
}

inline std::uint8_t gray_of(Color c) {
  return static_cast<std::uint8_t>(
      std::llround((static_cast<int>(c.r) + c.g + c.b) / 3.0));
}

}  // namespace detail

/// Paint the pixel set onto a copy of the clean frame. alpha = 1 replaces
/// the covered pixels outright; alpha in (0,1) blends linearly toward the
/// color. Pixels outside the set are untouched.
inline Frame fuse(const Frame& clean, const PixelSet& perturb_pixels,
                  Color color, double alpha = 1.0) {
  if (!clean.valid()) throw InvalidParameter("invalid clean frame");
  if (perturb_pixels.width != clean.width ||
      perturb_pixels.height != clean.height)
    throw InvalidParameter("pixel set bounds do not match frame");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw InvalidParameter("fusion alpha must be in (0,1]");

  Frame out = clean;
  const std::uint8_t rgb[3] = {color.r, color.g, color.b};
  const std::uint8_t gray = detail::gray_of(color);
  for (const Point& p : perturb_pixels.pixels) {
    if (p.x < 0 || p.x >= clean.width || p.y < 0 || p.y >= clean.height)
      throw InvalidParameter("perturbation pixel out of frame bounds");
    if (clean.channels == 1) {
      out.at(p.x, p.y, 0) = detail::blend_channel(clean.at(p.x, p.y, 0), gray, alpha);
    } else {
      for (int c = 0; c < 3; ++c)
        out.at(p.x, p.y, c) =
            detail::blend_channel(clean.at(p.x, p.y, c), rgb[c], alpha);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scale transforms
// ---------------------------------------------------------------------------

/// One member of the transform family: uniform spatial rescale.
struct TransformSpec {
  double scale = 1.0;
  friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

/// Ordered, non-empty transform family. Must include the identity so the
/// untransformed sample is always part of the expectation.
struct TransformSet {
  std::vector<TransformSpec> transforms{TransformSpec{1.0}};

  std::size_t size() const { return transforms.size(); }
  void validate() const {
    if (transforms.empty()) throw InvalidParameter("transform set is empty");
    bool has_identity = false;
    for (const TransformSpec& t : transforms) {
      if (!(t.scale > 0.0))
        throw InvalidParameter("transform scale must be positive");
      if (t.scale == 1.0) has_identity = true;
    }
    if (!has_identity)
      throw InvalidParameter("transform set must contain scale 1.0");
  }
  static TransformSet identity_only() { return TransformSet{}; }
  friend bool operator==(const TransformSet&, const TransformSet&) = default;
};

inline TransformSet default_transform_set() {
  return TransformSet{{TransformSpec{0.7}, TransformSpec{0.85},
                       TransformSpec{1.0}, TransformSpec{1.15},
                       TransformSpec{1.3}}};
}

inline int scaled_extent(int extent, double scale) {
  return static_cast<int>(std::llround(extent * scale));
}

/// Bilinear rescale with half-pixel-center sampling and round-half-away
/// integer quantization, so results are bit-stable across runs. Identity
/// scale short-circuits to an exact copy.
inline Frame apply_transform(const Frame& frame, const TransformSpec& t) {
  if (!frame.valid()) throw InvalidParameter("invalid frame");
  if (!(t.scale > 0.0)) throw InvalidParameter("scale must be positive");
  if (t.scale == 1.0) return frame;

  const int ow = scaled_extent(frame.width, t.scale);
  const int oh = scaled_extent(frame.height, t.scale);
  if (ow < 1 || oh < 1)
    throw InvalidParameter("scale produces an empty frame");

  Frame out;
  out.width = ow;
  out.height = oh;
  out.channels = frame.channels;
  out.data.resize(static_cast<std::size_t>(ow) * oh * frame.channels);

  const double fx = static_cast<double>(frame.width) / ow;
  const double fy = static_cast<double>(frame.height) / oh;
  for (int y = 0; y < oh; ++y) {
    double sy = (y + 0.5) * fy - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(frame.height - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, frame.height - 1);
    const double wy = sy - y0;
    for (int x = 0; x < ow; ++x) {
      double sx = (x + 0.5) * fx - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(frame.width - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, frame.width - 1);
      const double wx = sx - x0;
      for (int c = 0; c < frame.channels; ++c) {
        const double v00 = frame.at(x0, y0, c);
        const double v10 = frame.at(x1, y0, c);
        const double v01 = frame.at(x0, y1, c);
        const double v11 = frame.at(x1, y1, c);
        const double v = (1 - wy) * ((1 - wx) * v00 + wx * v10) +
                         wy * ((1 - wx) * v01 + wx * v11);
        out.at(x, y, c) = static_cast<std::uint8_t>(
            std::clamp<long long>(std::llround(v), 0, 255));
      }
    }
  }
  return out;
}

/// Expand one adversarial frame into its transformed variants, list order
/// preserved.
inline std::vector<Frame> eot_expand(const Frame& adv,
                                     const TransformSet& transforms) {
  transforms.validate();
  std::vector<Frame> out;
  out.reserve(transforms.size());
  for (const TransformSpec& t : transforms.transforms)
    out.push_back(apply_transform(adv, t));
  return out;
}

}  // namespace advig
