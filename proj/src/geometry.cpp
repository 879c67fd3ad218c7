#include "omnisal/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "omnisal/error.hpp"

namespace omnisal::geometry {

namespace {

constexpr double kTwoPi = 2.0 * kPi;
constexpr double kHalfPi = 0.5 * kPi;

int wrap_index(long i, int n) {
  long r = i % n;
  return static_cast<int>(r < 0 ? r + n : r);
}

// Half-sample symmetric reflection, valid for any offset.
int reflect_index(long i, int n) {
  long r = i % (2L * n);
  if (r < 0) r += 2L * n;
  return static_cast<int>(r < n ? r : 2L * n - 1 - r);
}

}  // namespace

double wrap_theta(double theta) {
  double t = std::fmod(theta + kHalfPi, kTwoPi);
  if (t < 0) t += kTwoPi;
  if (t >= kTwoPi) t = 0.0;
  return t - kHalfPi;
}

PixelCoord sphere_to_equirect(SphericalCoord c, int width, int height) {
  return {width * ((c.theta + kHalfPi) / kTwoPi), height * (1.0 - (c.phi + kHalfPi) / kPi)};
}

SphericalCoord equirect_to_sphere(double x, double y, int width, int height) {
  if (!(x >= 0.0 && x < width) || !(y >= 0.0 && y <= height))
    throw Error(Errc::OutOfRange, "pixel coordinate outside the equirectangular image");
  return {kTwoPi * x / width - kHalfPi, kPi * (1.0 - y / height) - kHalfPi};
}

SphericalCoord pixel_center_direction(int px, int py, int width, int height) {
  return equirect_to_sphere(px + 0.5, py + 0.5, width, height);
}

Vec3 to_unit_vector(SphericalCoord c) {
  const double a = c.theta - kHalfPi;
  const double cp = std::cos(c.phi);
  return {cp * std::sin(a), std::sin(c.phi), cp * std::cos(a)};
}

SphericalCoord from_unit_vector(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  const double phi = std::asin(std::clamp(v[1] / n, -1.0, 1.0));
  return {wrap_theta(std::atan2(v[0], v[2]) + kHalfPi), phi};
}

double angular_distance(SphericalCoord a, SphericalCoord b) {
  const Vec3 u = to_unit_vector(a);
  const Vec3 v = to_unit_vector(b);
  // atan2 form stays accurate for tiny and near-antipodal angles.
  const Vec3 cross{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
  const double s = std::sqrt(cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]);
  const double c = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  return std::atan2(s, c);
}

void ViewFrustum::validate() const {
  if (!(fov > 0.0 && fov < kPi)) throw Error(Errc::InvalidArgument, "fov must lie in (0, pi)");
  if (out_w < 2 || out_h < 2) throw Error(Errc::InvalidArgument, "patch must be at least 2x2");
}

double ViewFrustum::focal() const { return 0.5 * out_w / std::tan(0.5 * fov); }

SphericalCoord direction_at(const ViewFrustum& f, double u, double v) {
  const double F = f.focal();
  const double cx = (u - 0.5 * f.out_w) / F;
  const double cy = -(v - 0.5 * f.out_h) / F;
  const double cz = 1.0;

  const double sp = std::sin(f.pitch), cp = std::cos(f.pitch);
  const double y1 = cy * cp + cz * sp;
  const double z1 = -cy * sp + cz * cp;

  const double sy = std::sin(f.yaw), cy_ = std::cos(f.yaw);
  const double x2 = cx * cy_ + z1 * sy;
  const double z2 = -cx * sy + z1 * cy_;
  return from_unit_vector({x2, y1, z2});
}

std::optional<PixelCoord> project_to_patch(const ViewFrustum& f, SphericalCoord c) {
  const Vec3 d = to_unit_vector(c);
  const double sy = std::sin(f.yaw), cy_ = std::cos(f.yaw);
  const double x1 = d[0] * cy_ - d[2] * sy;
  const double z1 = d[0] * sy + d[2] * cy_;

  const double sp = std::sin(f.pitch), cp = std::cos(f.pitch);
  const double cy = d[1] * cp - z1 * sp;
  const double cz = d[1] * sp + z1 * cp;
  if (cz <= 0.0) return std::nullopt;

  const double F = f.focal();
  return PixelCoord{F * x1 / cz + 0.5 * f.out_w, -F * cy / cz + 0.5 * f.out_h};
}

bool contains(const ViewFrustum& f, SphericalCoord c, double tolerance) {
  const auto p = project_to_patch(f, c);
  if (!p) return false;
  const double tu = tolerance * f.out_w;
  const double tv = tolerance * f.out_h;
  return p->x >= -tu && p->x <= f.out_w + tu && p->y >= -tv && p->y <= f.out_h + tv;
}

std::vector<SphericalCoord> patch_pixel_directions(const ViewFrustum& f) {
  f.validate();
  std::vector<SphericalCoord> dirs;
  dirs.reserve(static_cast<std::size_t>(f.out_w) * f.out_h);
  for (int v = 0; v < f.out_h; ++v)
    for (int u = 0; u < f.out_w; ++u) dirs.push_back(direction_at(f, u + 0.5, v + 0.5));
  return dirs;
}

float sample(const Raster& image, PixelCoord p, int channel, Interpolation interp) {
  const int w = image.width;
  const int h = image.height;
  if (interp == Interpolation::nearest) {
    const int ix = wrap_index(static_cast<long>(std::floor(p.x)), w);
    const int iy = std::clamp(static_cast<int>(std::floor(p.y)), 0, h - 1);
    return image.at(ix, iy, channel);
  }
  const double sx = p.x - 0.5;
  const double sy = std::clamp(p.y - 0.5, 0.0, h - 1.0);
  const double fx0 = std::floor(sx);
  const double fy0 = std::floor(sy);
  const double ax = sx - fx0;
  const double ay = sy - fy0;
  const int x0 = wrap_index(static_cast<long>(fx0), w);
  const int x1 = wrap_index(static_cast<long>(fx0) + 1, w);
  const int y0 = static_cast<int>(fy0);
  const int y1 = std::min(y0 + 1, h - 1);
  const double top = (1 - ax) * image.at(x0, y0, channel) + ax * image.at(x1, y0, channel);
  const double bot = (1 - ax) * image.at(x0, y1, channel) + ax * image.at(x1, y1, channel);
  return static_cast<float>((1 - ay) * top + ay * bot);
}

Patch extract_patch(const Raster& odi, const ViewFrustum& f, Interpolation interp) {
  Patch patch{Raster(f.out_w, f.out_h, odi.channels), patch_pixel_directions(f), f};
  for (int v = 0; v < f.out_h; ++v) {
    for (int u = 0; u < f.out_w; ++u) {
      const PixelCoord p = sphere_to_equirect(patch.coords[static_cast<std::size_t>(v) * f.out_w + u],
                                              odi.width, odi.height);
      for (int c = 0; c < odi.channels; ++c) patch.image.at(u, v, c) = sample(odi, p, c, interp);
    }
  }
  return patch;
}

std::vector<ViewFrustum> six_fixed_frustums(double fov, int out_w, int out_h) {
  if (fov < kHalfPi) throw Error(Errc::FovTooSmall, "six views need fov >= 90 degrees");
  const std::array<std::array<double, 2>, 6> orientations{{
      {0.0, 0.0}, {kHalfPi, 0.0}, {kPi, 0.0}, {1.5 * kPi, 0.0}, {0.0, kHalfPi}, {0.0, -kHalfPi}}};
  std::vector<ViewFrustum> views;
  for (const auto& [yaw, pitch] : orientations) {
    ViewFrustum f{yaw, pitch, fov, out_w, out_h};
    f.validate();
    views.push_back(f);
  }
  return views;
}

std::vector<ViewFrustum> random_frustums(std::size_t n, double fov, int out_w, int out_h,
                                         std::uint64_t seed, PitchSampling pitch) {
  if (n < 1) throw Error(Errc::InvalidArgument, "need at least one frustum");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ViewFrustum> views;
  views.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double yaw = kTwoPi * unit(rng);
    const double r = unit(rng);
    const double p = pitch == PitchSampling::sphere_uniform ? std::asin(2.0 * r - 1.0)
                                                            : kPi * r - kHalfPi;
    ViewFrustum f{yaw, p, fov, out_w, out_h};
    f.validate();
    views.push_back(f);
  }
  return views;
}

std::size_t HoleyMap::hole_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{0}));
}

SplatCanvas::SplatCanvas(int width, int height)
    : width_(width), height_(height),
      sums_(static_cast<std::size_t>(width) * height, 0.0),
      counts_(static_cast<std::size_t>(width) * height, 0u) {
  if (width <= 0 || height <= 0) throw Error(Errc::InvalidArgument, "empty splat canvas");
}

void SplatCanvas::splat(const Raster& values, std::span<const SphericalCoord> coords) {
  if (values.channels != 1 || values.pixel_count() != coords.size())
    throw Error(Errc::ShapeMismatch, "patch values and coordinates differ in size");
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const PixelCoord p = sphere_to_equirect(coords[i], width_, height_);
    const int ix = wrap_index(static_cast<long>(std::floor(p.x)), width_);
    const int iy = std::clamp(static_cast<int>(std::floor(p.y)), 0, height_ - 1);
    const std::size_t k = static_cast<std::size_t>(iy) * width_ + ix;
    sums_[k] += values.data[i];
    counts_[k] += 1;
  }
}

HoleyMap SplatCanvas::resolve() const {
  HoleyMap out{Raster(width_, height_, 1), std::vector<std::uint8_t>(sums_.size(), 0)};
  for (std::size_t k = 0; k < sums_.size(); ++k) {
    if (counts_[k] > 0) {
      out.values.data[k] = static_cast<float>(sums_[k] / counts_[k]);
      out.valid[k] = 1;
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(int kernel_px) {
  if (kernel_px < 1) throw Error(Errc::InvalidArgument, "kernel size must be positive");
  const int radius = kernel_px / 2;
  const double sigma = kernel_px / 6.0;
  std::vector<double> taps(2 * static_cast<std::size_t>(radius) + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double t = std::exp(-0.5 * (i / sigma) * (i / sigma));
    taps[static_cast<std::size_t>(i + radius)] = t;
    sum += t;
  }
  for (double& t : taps) t /= sum;
  return taps;
}

namespace {

// Separable blur with wrap-around columns and reflected rows.
std::vector<double> blur(const std::vector<double>& src, int w, int h, const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size() / 2);
  std::vector<double> tmp(src.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * w;
    double* out = tmp.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += taps[static_cast<std::size_t>(k + r)] * row[wrap_index(x + k, w)];
      out[x] = acc;
    }
  }
  std::vector<double> dst(src.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    double* out = dst.data() + static_cast<std::size_t>(y) * w;
    for (int k = -r; k <= r; ++k) {
      const double t = taps[static_cast<std::size_t>(k + r)];
      const double* row = tmp.data() + static_cast<std::size_t>(reflect_index(y + k, h)) * w;
      for (int x = 0; x < w; ++x) out[x] += t * row[x];
    }
  }
  return dst;
}

}  // namespace

Raster gaussian_fill_and_smooth(const HoleyMap& map, int kernel_px) {
  const int w = map.values.width;
  const int h = map.values.height;
  const std::size_t n = map.values.pixel_count();
  if (map.values.channels != 1 || map.valid.size() != n)
    throw Error(Errc::ShapeMismatch, "hole mask does not match the map");
  if (std::none_of(map.valid.begin(), map.valid.end(), [](std::uint8_t v) { return v != 0; }))
    throw Error(Errc::AllHoles, "nothing to smooth");

  std::vector<double> taps = gaussian_kernel(kernel_px);
  std::vector<double> values(n), mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = map.valid[i] ? 1.0 : 0.0;
    values[i] = map.valid[i] ? static_cast<double>(map.values.data[i]) : 0.0;
  }

  std::vector<double> result(n, 0.0);
  std::vector<std::uint8_t> done(n, 0);
  std::size_t remaining = n;
  while (remaining > 0) {
    std::vector<double> weighted(n);
    for (std::size_t i = 0; i < n; ++i) weighted[i] = values[i] * mask[i];
    const std::vector<double> num = blur(weighted, w, h, taps);
    const std::vector<double> den = blur(mask, w, h, taps);
    std::vector<std::size_t> filled;
    for (std::size_t i = 0; i < n; ++i) {
      if (!done[i] && den[i] > 0.0) {
        result[i] = num[i] / den[i];
        filled.push_back(i);
      }
    }
    for (std::size_t i : filled) {
      done[i] = 1;
      values[i] = result[i];
      mask[i] = 1.0;
    }
    remaining -= filled.size();
    // A one-tap kernel cannot grow into holes; widen it for later passes.
    if (taps.size() < 3) taps = gaussian_kernel(2);
  }

  Raster out(w, h, 1);
  for (std::size_t i = 0; i < n; ++i) out.data[i] = static_cast<float>(result[i]);
  return out;
}

}  // namespace omnisal::geometry
