#pragma once

#include <cstddef>
#include <vector>

namespace omnisal {

/// Dense row-major float raster with interleaved channels.
///
/// Used for equirectangular images (1 or 3 channels), patch images and
/// single-channel saliency maps. Pixel values of colour images live in the
/// 8-bit range [0, 255]; saliency maps are non-negative and usually in [0, 1].
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  Raster() = default;
  Raster(int w, int h, int c, float fill = 0.0f);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  bool same_dims(const Raster& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }
};

using EquirectImage = Raster;
using SaliencyMap = Raster;

/// Throws BadImage unless the raster has positive dimensions, 1 or 3
/// channels and only finite samples. Emits a warning on stderr when the
/// aspect ratio is not 2:1.
void validate_equirect(const Raster& image);

/// Pixel-centre aligned bilinear resize (edge samples clamped).
Raster resize_bilinear(const Raster& src, int width, int height);

/// Mean over channels; a 1-channel raster is returned unchanged.
Raster to_gray(const Raster& src);

/// Scales a single-channel map so its maximum is 1; all-zero maps are
/// returned unchanged. Negative values are clamped to 0 first.
Raster normalize_max(const Raster& map);

}  // namespace omnisal
