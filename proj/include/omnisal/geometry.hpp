#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "omnisal/raster.hpp"

namespace omnisal::geometry {

inline constexpr double kPi = 3.14159265358979323846;

/// Longitude theta in [-pi/2, 3pi/2), latitude phi in [-pi/2, pi/2]
/// (phi = pi/2 is the zenith).
struct SphericalCoord {
  double theta = 0.0;
  double phi = 0.0;
};

/// Continuous equirectangular position. (x, y) lies inside pixel
/// (floor(x), floor(y)); pixel centres sit at half-integer positions.
struct PixelCoord {
  double x = 0.0;
  double y = 0.0;
};

using Vec3 = std::array<double, 3>;

/// Maps theta into [-pi/2, 3pi/2).
double wrap_theta(double theta);

PixelCoord sphere_to_equirect(SphericalCoord c, int width, int height);

/// Exact inverse of sphere_to_equirect. Throws OutOfRange unless
/// 0 <= x < width and 0 <= y <= height.
SphericalCoord equirect_to_sphere(double x, double y, int width, int height);

/// Spherical coordinate of the centre of pixel (px, py).
SphericalCoord pixel_center_direction(int px, int py, int width, int height);

// World frame: y up, theta = pi/2 looks down +z, theta grows towards +x.
Vec3 to_unit_vector(SphericalCoord c);
SphericalCoord from_unit_vector(const Vec3& v);
double angular_distance(SphericalCoord a, SphericalCoord b);

/// Pinhole view into the sphere. yaw = 0, pitch = 0 looks at theta = pi/2,
/// the centre column of the equirectangular image. fov applies to the
/// horizontal side; the vertical side uses the same focal length.
struct ViewFrustum {
  double yaw = 0.0;
  double pitch = 0.0;
  double fov = kPi / 2;
  int out_w = 256;
  int out_h = 256;

  /// Throws InvalidArgument unless 0 < fov < pi and out_w, out_h >= 2.
  void validate() const;
  double focal() const;
};

/// Direction through continuous patch position (u, v); pixel (i, j) has its
/// centre at (i + 0.5, j + 0.5).
SphericalCoord direction_at(const ViewFrustum& f, double u, double v);

/// Inverse of direction_at. Empty when the direction is behind the camera.
std::optional<PixelCoord> project_to_patch(const ViewFrustum& f, SphericalCoord c);

/// True when the direction projects inside the patch rectangle, boundary
/// included (up to a relative tolerance).
bool contains(const ViewFrustum& f, SphericalCoord c, double tolerance = 1e-9);

/// Row-major out_h x out_w directions of the pixel centres.
std::vector<SphericalCoord> patch_pixel_directions(const ViewFrustum& f);

enum class Interpolation { nearest, bilinear };

struct Patch {
  Raster image;
  std::vector<SphericalCoord> coords;
  ViewFrustum frustum;
};

/// Samples an equirectangular raster at a continuous position. x wraps
/// around, y is clamped at the poles.
float sample(const Raster& image, PixelCoord p, int channel, Interpolation interp);

Patch extract_patch(const Raster& odi, const ViewFrustum& f,
                    Interpolation interp = Interpolation::bilinear);

/// Four horizon views every 90 degrees of yaw plus zenith and nadir.
/// Throws FovTooSmall when fov < pi/2.
std::vector<ViewFrustum> six_fixed_frustums(double fov, int out_w, int out_h);

enum class PitchSampling {
  sphere_uniform,  // pitch = asin(U[-1, 1]): view centres uniform on the sphere
  angle_uniform,   // pitch = U[-pi/2, pi/2]
};

std::vector<ViewFrustum> random_frustums(std::size_t n, double fov, int out_w, int out_h,
                                         std::uint64_t seed,
                                         PitchSampling pitch = PitchSampling::sphere_uniform);

/// Equirectangular map where some pixels carry no value.
struct HoleyMap {
  Raster values;               // single channel
  std::vector<std::uint8_t> valid;

  std::size_t hole_count() const;
};

/// Forward-projection accumulator. Each splatted patch pixel lands on the
/// equirectangular pixel containing its direction; resolve() averages.
class SplatCanvas {
 public:
  SplatCanvas(int width, int height);

  void splat(const Raster& values, std::span<const SphericalCoord> coords);
  void splat(const Patch& patch) { splat(patch.image, patch.coords); }

  HoleyMap resolve() const;

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<double>& sums() const { return sums_; }
  const std::vector<std::uint32_t>& counts() const { return counts_; }

 private:
  int width_;
  int height_;
  std::vector<double> sums_;
  std::vector<std::uint32_t> counts_;
};

/// Taps of the truncated Gaussian used for smoothing: sigma = kernel_px / 6,
/// 2 * (kernel_px / 2) + 1 taps, normalized to sum 1.
std::vector<double> gaussian_kernel(int kernel_px);

/// Normalized convolution: blur(value * mask) / blur(mask), wrapping
/// horizontally and reflecting at the poles. Pixels whose window holds no
/// sample are filled by repeating the pass until none remain.
/// Throws AllHoles when nothing is valid.
Raster gaussian_fill_and_smooth(const HoleyMap& map, int kernel_px);

}  // namespace omnisal::geometry
