#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mop {

// 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
struct ImageTensor {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  ImageTensor() = default;
  ImageTensor(int w, int h, int c);

  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const ImageTensor& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

enum class TransformKind { Scale, TranslateH, TranslateV, Flip, Rotate };

// One cell of the invariance study. parameter is rho for Scale, pixels in the
// normalized frame for translations, degrees for Rotate, ignored for Flip.
struct TransformSpec {
  TransformKind kind = TransformKind::Flip;
  double parameter = 0.0;
};

// Stable names used in CSV output and config files: "scale", "translate_h",
// "translate_v", "flip", "rotate".
const char* transform_kind_name(TransformKind k);
TransformKind transform_kind_from_name(const std::string& name);

// Bilinear resampling with pixel-center alignment:
//   src = (dst + 0.5) * (in_size / out_size) - 0.5, clamped to the frame.
// Interpolated values are rounded half-up to 8 bits.
ImageTensor resize_bilinear(const ImageTensor& img, int out_w, int out_h);

// Exact sub-rectangle copy; the rectangle must lie fully inside the image.
ImageTensor crop(const ImageTensor& img, int x, int y, int w, int h);

// Horizontal mirror.
ImageTensor flip_horizontal(const ImageTensor& img);

// Rotation about the image center by `degrees`, bilinear sampling with
// clamp-to-edge for coordinates outside the frame.
ImageTensor rotate_bilinear(const ImageTensor& img, double degrees);

// Applies one invariance-study transform to a square normalized frame and
// returns an image of the same size. Identity parameters (Scale rho=1,
// Translate 0, Rotate 0) return the input byte-exactly.
ImageTensor apply_transform(const ImageTensor& img, const TransformSpec& t);

// Four corner crops plus the center crop, each followed by its horizontal
// flip: exactly 10 images of size crop_side x crop_side. Order: TL, TR, BL,
// BR, C, then the flips of those five in the same order.
std::vector<ImageTensor> ten_crop(const ImageTensor& img, int crop_side);

// Luma grayscale (0.299 / 0.587 / 0.114), round-half-up. 1-channel input is
// returned unchanged.
ImageTensor to_grayscale(const ImageTensor& img);

// Binary PPM (P6) / PGM (P5), maxval 255.
ImageTensor read_pnm(const std::string& path);
void write_pnm(const ImageTensor& img, const std::string& path);

}  // namespace mop
