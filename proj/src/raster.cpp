#include "omnisal/raster.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "omnisal/error.hpp"

namespace omnisal {

Raster::Raster(int w, int h, int c, float fill)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, fill) {
  if (w < 0 || h < 0 || c < 1) throw Error(Errc::InvalidArgument, "bad raster dimensions");
}

void validate_equirect(const Raster& image) {
  if (image.width <= 0 || image.height <= 0)
    throw Error(Errc::BadImage, "empty equirectangular image");
  if (image.channels != 1 && image.channels != 3)
    throw Error(Errc::BadImage, "equirectangular image must have 1 or 3 channels");
  if (image.data.size() != image.pixel_count() * image.channels)
    throw Error(Errc::BadImage, "sample count does not match dimensions");
  for (float v : image.data)
    if (!std::isfinite(v)) throw Error(Errc::BadImage, "non-finite sample");
  if (image.width != 2 * image.height)
    std::cerr << "warning: equirectangular image is " << image.width << "x" << image.height
              << ", expected a 2:1 aspect ratio\n";
}

Raster resize_bilinear(const Raster& src, int width, int height) {
  if (width <= 0 || height <= 0) throw Error(Errc::InvalidArgument, "resize to empty raster");
  if (src.width == width && src.height == height) return src;
  Raster out(width, height, src.channels);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, src.height - 1);
    double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, src.width - 1);
      double wx = fx - x0;
      for (int c = 0; c < src.channels; ++c) {
        double top = (1 - wx) * src.at(x0, y0, c) + wx * src.at(x1, y0, c);
        double bot = (1 - wx) * src.at(x0, y1, c) + wx * src.at(x1, y1, c);
        out.at(x, y, c) = static_cast<float>((1 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

Raster to_gray(const Raster& src) {
  if (src.channels == 1) return src;
  Raster out(src.width, src.height, 1);
  for (std::size_t i = 0; i < src.pixel_count(); ++i) {
    double s = 0;
    for (int c = 0; c < src.channels; ++c) s += src.data[i * src.channels + c];
    out.data[i] = static_cast<float>(s / src.channels);
  }
  return out;
}

Raster normalize_max(const Raster& map) {
  Raster out = map;
  float peak = 0.0f;
  for (float& v : out.data) {
    v = std::max(v, 0.0f);
    peak = std::max(peak, v);
  }
  if (peak > 0.0f)
    for (float& v : out.data) v /= peak;
  return out;
}

}  // namespace omnisal
