#include "mop/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <stdexcept>

namespace mop {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::uint8_t round_u8(double v) {
  double r = std::floor(v + 0.5);
  if (r < 0.0) r = 0.0;
  if (r > 255.0) r = 255.0;
  return static_cast<std::uint8_t>(r);
}

int clamp_int(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

void check_nonempty(const ImageTensor& img, const char* op) {
  if (img.width < 1 || img.height < 1 ||
      (img.channels != 1 && img.channels != 3) ||
      img.data.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
    throw std::invalid_argument(std::string(op) + ": malformed image");
}

// Copies a window whose coordinates may extend past the frame; out-of-frame
// samples replicate the nearest edge pixel.
ImageTensor window_clamped(const ImageTensor& img, int x0, int y0, int side) {
  ImageTensor out(side, side, img.channels);
  for (int y = 0; y < side; ++y) {
    int sy = clamp_int(y0 + y, 0, img.height - 1);
    for (int x = 0; x < side; ++x) {
      int sx = clamp_int(x0 + x, 0, img.width - 1);
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

int centered_origin(int frame, int side) { return (frame - side) / 2; }

}  // namespace

ImageTensor::ImageTensor(int w, int h, int c)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, 0) {
  if (w < 1 || h < 1 || (c != 1 && c != 3))
    throw std::invalid_argument("ImageTensor: width/height must be >= 1, channels 1 or 3");
}

ImageTensor resize_bilinear(const ImageTensor& img, int out_w, int out_h) {
  check_nonempty(img, "resize_bilinear");
  if (out_w < 1 || out_h < 1)
    throw std::invalid_argument("resize_bilinear: zero-sized target");

  ImageTensor out(out_w, out_h, img.channels);
  const double sx_scale = static_cast<double>(img.width) / out_w;
  const double sy_scale = static_cast<double>(img.height) / out_h;

#pragma omp parallel for schedule(static)
  for (int y = 0; y < out_h; ++y) {
    double sy = (y + 0.5) * sy_scale - 0.5;
    sy = std::min(std::max(sy, 0.0), static_cast<double>(img.height - 1));
    int y0 = static_cast<int>(sy);
    int y1 = std::min(y0 + 1, img.height - 1);
    double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      double sx = (x + 0.5) * sx_scale - 0.5;
      sx = std::min(std::max(sx, 0.0), static_cast<double>(img.width - 1));
      int x0 = static_cast<int>(sx);
      int x1 = std::min(x0 + 1, img.width - 1);
      double fx = sx - x0;
      for (int c = 0; c < img.channels; ++c) {
        double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
        double bot = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
        out.at(x, y, c) = round_u8((1.0 - fy) * top + fy * bot);
      }
    }
  }
  return out;
}

ImageTensor crop(const ImageTensor& img, int x, int y, int w, int h) {
  check_nonempty(img, "crop");
  if (w < 1 || h < 1 || x < 0 || y < 0 || x + w > img.width || y + h > img.height)
    throw std::invalid_argument("crop: rectangle out of bounds");
  ImageTensor out(w, h, img.channels);
  for (int yy = 0; yy < h; ++yy)
    for (int xx = 0; xx < w; ++xx)
      for (int c = 0; c < img.channels; ++c)
        out.at(xx, yy, c) = img.at(x + xx, y + yy, c);
  return out;
}

ImageTensor flip_horizontal(const ImageTensor& img) {
  check_nonempty(img, "flip_horizontal");
  ImageTensor out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
  return out;
}

ImageTensor rotate_bilinear(const ImageTensor& img, double degrees) {
  check_nonempty(img, "rotate_bilinear");
  const double theta = degrees * kPi / 180.0;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const double cx = (img.width - 1) * 0.5;
  const double cy = (img.height - 1) * 0.5;

  ImageTensor out(img.width, img.height, img.channels);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < img.height; ++y) {
    double dy = y - cy;
    for (int x = 0; x < img.width; ++x) {
      double dx = x - cx;
      double sx = cx + dx * ct + dy * st;
      double sy = cy - dx * st + dy * ct;
      sx = std::min(std::max(sx, 0.0), static_cast<double>(img.width - 1));
      sy = std::min(std::max(sy, 0.0), static_cast<double>(img.height - 1));
      int x0 = static_cast<int>(sx);
      int y0 = static_cast<int>(sy);
      int x1 = std::min(x0 + 1, img.width - 1);
      int y1 = std::min(y0 + 1, img.height - 1);
      double fx = sx - x0;
      double fy = sy - y0;
      for (int c = 0; c < img.channels; ++c) {
        double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
        double bot = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
        out.at(x, y, c) = round_u8((1.0 - fy) * top + fy * bot);
      }
    }
  }
  return out;
}

const char* transform_kind_name(TransformKind k) {
  switch (k) {
    case TransformKind::Scale: return "scale";
    case TransformKind::TranslateH: return "translate_h";
    case TransformKind::TranslateV: return "translate_v";
    case TransformKind::Flip: return "flip";
    case TransformKind::Rotate: return "rotate";
  }
  throw std::invalid_argument("transform_kind_name: bad enum value");
}

TransformKind transform_kind_from_name(const std::string& name) {
  if (name == "scale") return TransformKind::Scale;
  if (name == "translate_h") return TransformKind::TranslateH;
  if (name == "translate_v") return TransformKind::TranslateV;
  if (name == "flip") return TransformKind::Flip;
  if (name == "rotate") return TransformKind::Rotate;
  throw std::invalid_argument("unknown transform kind: " + name);
}

ImageTensor apply_transform(const ImageTensor& img, const TransformSpec& t) {
  check_nonempty(img, "apply_transform");
  if (img.width != img.height)
    throw std::invalid_argument("apply_transform: expects a square normalized frame");
  const int frame = img.width;

  switch (t.kind) {
    case TransformKind::Scale: {
      const double rho = t.parameter;
      if (!(rho >= 1.0))
        throw std::invalid_argument("apply_transform: scale requires rho >= 1");
      int side = static_cast<int>(std::floor(frame / rho + 0.5));
      side = clamp_int(side, 1, frame);
      if (side == frame) return img;
      ImageTensor c = crop(img, centered_origin(frame, side), centered_origin(frame, side), side, side);
      return resize_bilinear(c, frame, frame);
    }
    case TransformKind::TranslateH:
    case TransformKind::TranslateV: {
      const double limit = 40.0;
      if (std::abs(t.parameter) > limit)
        throw std::invalid_argument("apply_transform: translation pushes the crop outside the frame");
      int shift = static_cast<int>(std::lround(t.parameter));
      if (shift == 0) return img;  // identity by contract
      int side = static_cast<int>(std::floor(0.7 * frame + 0.5));
      int ox = centered_origin(frame, side);
      int oy = ox;
      if (t.kind == TransformKind::TranslateH) ox += shift; else oy += shift;
      // A +/-40 shift of the 0.7 crop can overhang the frame by a couple of
      // pixels; those samples replicate the edge.
      ImageTensor c = window_clamped(img, ox, oy, side);
      return resize_bilinear(c, frame, frame);
    }
    case TransformKind::Flip:
      return flip_horizontal(img);
    case TransformKind::Rotate: {
      const double deg = t.parameter;
      if (std::abs(deg) > 20.0)
        throw std::invalid_argument("apply_transform: rotation limited to +/-20 degrees");
      if (deg == 0.0) return img;
      ImageTensor r = rotate_bilinear(img, deg);
      double theta = deg * kPi / 180.0;
      // Largest inscribed axis-aligned square of the rotated frame.
      int side = static_cast<int>(std::floor(frame / (std::abs(std::sin(theta)) + std::abs(std::cos(theta)))));
      side = clamp_int(side, 1, frame);
      ImageTensor c = crop(r, centered_origin(frame, side), centered_origin(frame, side), side, side);
      return resize_bilinear(c, frame, frame);
    }
  }
  throw std::invalid_argument("apply_transform: unknown transform kind");
}

std::vector<ImageTensor> ten_crop(const ImageTensor& img, int crop_side) {
  check_nonempty(img, "ten_crop");
  if (crop_side < 1 || crop_side > img.width || crop_side > img.height)
    throw std::invalid_argument("ten_crop: crop_side exceeds the image");
  const int rx = img.width - crop_side;
  const int by = img.height - crop_side;
  const int cx = rx / 2;
  const int cy = by / 2;

  std::vector<ImageTensor> out;
  out.reserve(10);
  out.push_back(crop(img, 0, 0, crop_side, crop_side));
  out.push_back(crop(img, rx, 0, crop_side, crop_side));
  out.push_back(crop(img, 0, by, crop_side, crop_side));
  out.push_back(crop(img, rx, by, crop_side, crop_side));
  out.push_back(crop(img, cx, cy, crop_side, crop_side));
  for (int i = 0; i < 5; ++i) out.push_back(flip_horizontal(out[i]));
  return out;
}

ImageTensor to_grayscale(const ImageTensor& img) {
  check_nonempty(img, "to_grayscale");
  if (img.channels == 1) return img;
  ImageTensor out(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(x, y, 0) = round_u8(0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) +
                                 0.114 * img.at(x, y, 2));
  return out;
}

namespace {

// Skips whitespace and '#' comment lines in a PNM header.
int next_header_int(std::istream& in, const std::string& path) {
  while (true) {
    int ch = in.peek();
    if (ch == std::istream::traits_type::eof()) break;
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  if (!in || v < 0) throw std::invalid_argument("read_pnm: bad header in " + path);
  return v;
}

}  // namespace

ImageTensor read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("read_pnm: cannot open " + path);
  char p = 0, n = 0;
  in.get(p);
  in.get(n);
  int channels;
  if (p == 'P' && n == '5') channels = 1;
  else if (p == 'P' && n == '6') channels = 3;
  else throw std::invalid_argument("read_pnm: unsupported magic in " + path);

  int w = next_header_int(in, path);
  int h = next_header_int(in, path);
  int maxval = next_header_int(in, path);
  if (maxval != 255) throw std::invalid_argument("read_pnm: only maxval 255 supported: " + path);
  in.get();  // single whitespace byte after maxval

  ImageTensor img(w, h, channels);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw std::invalid_argument("read_pnm: truncated pixel data in " + path);
  return img;
}

void write_pnm(const ImageTensor& img, const std::string& path) {
  check_nonempty(img, "write_pnm");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("write_pnm: cannot open " + path);
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw std::invalid_argument("write_pnm: write failed for " + path);
}

}  // namespace mop
