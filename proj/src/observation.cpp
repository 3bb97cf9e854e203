#include "uvrec/observation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace uvrec {

std::size_t UVMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

double UVMask::coverage() const {
  return size() == 0 ? 0.0 : static_cast<double>(count()) / static_cast<double>(size());
}

bool UVMask::is_symmetric() const {
  for (std::size_t r = 1; r < height; ++r) {
    for (std::size_t c = 1; c < width; ++c) {
      if (at(r, c) != at(height - r, width - c)) return false;
    }
  }
  return true;
}

namespace {

void stamp_blob(RealGrid& sky, const GaussianBlob& b) {
  const double ca = std::cos(b.angle), sa = std::sin(b.angle);
  for (std::size_t r = 0; r < sky.height; ++r) {
    for (std::size_t c = 0; c < sky.width; ++c) {
      const double dy = static_cast<double>(r) - b.row;
      const double dx = static_cast<double>(c) - b.col;
      const double a = (dx * ca + dy * sa) / b.sigma_major;
      const double m = (-dx * sa + dy * ca) / b.sigma_minor;
      sky(r, c) += b.amplitude * std::exp(-0.5 * (a * a + m * m));
    }
  }
}

// Logarithmic two-arm modulation around a center.
void spiral_modulate(RealGrid& sky, double row, double col, double strength, double phase,
                     double pitch) {
  for (std::size_t r = 0; r < sky.height; ++r) {
    for (std::size_t c = 0; c < sky.width; ++c) {
      const double dy = static_cast<double>(r) - row;
      const double dx = static_cast<double>(c) - col;
      const double rad = std::hypot(dx, dy);
      const double theta = std::atan2(dy, dx);
      const double arm = std::cos(2.0 * (theta - phase) - pitch * std::log1p(rad));
      sky(r, c) *= std::max(0.0, 1.0 + strength * arm);
    }
  }
}

}  // namespace

RealGrid synth_sky(const SkyRecipe& recipe, RngStream& rng) {
  if (recipe.fixed_blobs.empty() && recipe.blobs_max <= 0 && recipe.points_max <= 0) {
    throw std::invalid_argument("synth_sky: recipe has no components");
  }
  if (recipe.height == 0 || recipe.width == 0) {
    throw std::invalid_argument("synth_sky: empty grid");
  }
  if (recipe.blobs_min > recipe.blobs_max || recipe.points_min > recipe.points_max) {
    throw std::invalid_argument("synth_sky: component range min exceeds max");
  }
  RealGrid sky(recipe.height, recipe.width);
  for (const auto& b : recipe.fixed_blobs) stamp_blob(sky, b);

  const double h = static_cast<double>(recipe.height);
  const double w = static_cast<double>(recipe.width);
  const auto draw_count = [&](int lo, int hi) {
    return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  };
  const int blobs = recipe.blobs_max > 0 ? draw_count(recipe.blobs_min, recipe.blobs_max) : 0;
  double main_row = h / 2.0, main_col = w / 2.0;
  for (int k = 0; k < blobs; ++k) {
    GaussianBlob b;
    b.row = h / 2.0 + rng.uniform(-recipe.offset_max, recipe.offset_max) * h;
    b.col = w / 2.0 + rng.uniform(-recipe.offset_max, recipe.offset_max) * w;
    b.sigma_major = rng.uniform(recipe.sigma_min, recipe.sigma_max);
    b.sigma_minor = b.sigma_major * rng.uniform(recipe.axis_ratio_min, 1.0);
    b.angle = rng.uniform(0.0, std::numbers::pi);
    b.amplitude = k == 0 ? 1.0 : rng.uniform(0.3, 1.0);
    if (k == 0) {
      main_row = b.row;
      main_col = b.col;
    }
    stamp_blob(sky, b);
  }
  if (blobs > 0 && recipe.spiral_probability > 0.0 &&
      rng.uniform() < recipe.spiral_probability) {
    spiral_modulate(sky, main_row, main_col, recipe.spiral_strength,
                    rng.uniform(0.0, std::numbers::pi), rng.uniform(2.0, 4.0));
  }
  const int points = recipe.points_max > 0 ? draw_count(recipe.points_min, recipe.points_max) : 0;
  for (int k = 0; k < points; ++k) {
    const auto r = static_cast<std::size_t>(rng.below(recipe.height));
    const auto c = static_cast<std::size_t>(rng.below(recipe.width));
    sky(r, c) += rng.uniform(recipe.point_amp_min, recipe.point_amp_max);
  }

  const double peak = *std::max_element(sky.values.begin(), sky.values.end());
  if (!(peak > 0.0)) throw std::runtime_error("synth_sky: recipe produced an empty sky");
  for (double& v : sky.values) v = std::max(0.0, v / peak);
  return sky;
}

std::vector<Antenna> eight_station_layout() {
  return {
      {2225061.2, -5440057.4, -2481681.2},  // Atacama, large array
      {2225039.5, -5441197.6, -2479303.4},  // Atacama, single dish
      {-5464584.7, -2493001.2, 2150654.0},  // Mauna Kea, dish
      {-5464555.5, -2492928.0, 2150797.2},  // Mauna Kea, array
      {-768715.6, -5988507.1, 2063354.9},   // Sierra Negra
      {5088967.8, -301681.2, 3825012.2},    // Pico Veleta
      {-1828796.2, -5054406.8, 3427865.2},  // Mount Graham
      {809.8, -816.9, -6359568.7},          // South Pole
  };
}

std::vector<Antenna> random_layout(std::size_t count, RngStream& rng) {
  std::vector<Antenna> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double s = std::sqrt(1.0 - z * z);
    out.push_back({s * std::cos(phi), s * std::sin(phi), z});
  }
  return out;
}

std::vector<std::pair<double, double>> baseline_track(const Antenna& a, const Antenna& b,
                                                      const UVTrackSpec& spec) {
  if (spec.time_steps < 2) throw std::invalid_argument("uv track: need at least 2 time steps");
  const double lx = b.x - a.x, ly = b.y - a.y, lz = b.z - a.z;
  const double dec = spec.declination_deg * std::numbers::pi / 180.0;
  const double min_el = spec.elevation_min_deg * std::numbers::pi / 180.0;
  const auto above = [&](const Antenna& s, double ha) {
    if (spec.elevation_min_deg <= -90.0) return true;
    const double lat = std::atan2(s.z, std::hypot(s.x, s.y));
    const double lon = std::atan2(s.y, s.x);
    const double sin_el = std::sin(lat) * std::sin(dec) + std::cos(lat) * std::cos(dec) * std::cos(ha + lon);
    return sin_el > std::sin(min_el);
  };
  std::vector<std::pair<double, double>> track;
  track.reserve(spec.time_steps);
  for (std::size_t t = 0; t < spec.time_steps; ++t) {
    const double hours = spec.hour_angle_start + (spec.hour_angle_end - spec.hour_angle_start) *
                                                     static_cast<double>(t) /
                                                     static_cast<double>(spec.time_steps - 1);
    const double ha = hours * std::numbers::pi / 12.0;
    if (!above(a, ha) || !above(b, ha)) continue;
    const double u = std::sin(ha) * lx + std::cos(ha) * ly;
    const double v = -std::sin(dec) * std::cos(ha) * lx + std::sin(dec) * std::sin(ha) * ly +
                     std::cos(dec) * lz;
    track.emplace_back(u, v);
  }
  return track;
}

UVMask synth_uv_mask(const std::vector<Antenna>& antennas, const UVTrackSpec& spec,
                     std::size_t height, std::size_t width) {
  if (antennas.size() < 2) throw std::invalid_argument("uv mask: need at least 2 antennas");
  if (height < 4 || width < 4) throw std::invalid_argument("uv mask: grid too small");
  if (!(spec.uv_fill > 0.0 && spec.uv_fill <= 1.0)) {
    throw std::invalid_argument("uv mask: uv_fill must be in (0, 1]");
  }
  std::vector<std::pair<double, double>> points;
  for (std::size_t i = 0; i < antennas.size(); ++i) {
    for (std::size_t j = i + 1; j < antennas.size(); ++j) {
      auto track = baseline_track(antennas[i], antennas[j], spec);
      points.insert(points.end(), track.begin(), track.end());
    }
  }
  if (points.empty()) throw std::invalid_argument("uv mask: no baseline is ever above the horizon limit");
  double longest = 0.0;
  for (const auto& [u, v] : points) longest = std::max(longest, std::hypot(u, v));
  if (!(longest > 0.0)) throw std::invalid_argument("uv mask: all baselines have zero length");

  const auto hc = static_cast<long>(height / 2);
  const auto wc = static_cast<long>(width / 2);
  const double reach = static_cast<double>(std::min(hc, wc) - 1);
  const double scale = spec.uv_fill * reach / longest;
  UVMask mask(height, width);
  for (const auto& [u, v] : points) {
    const long du = std::lround(u * scale);
    const long dv = std::lround(v * scale);
    mask.bits[static_cast<std::size_t>((hc + dv) * static_cast<long>(width) + (wc + du))] = 1;
    mask.bits[static_cast<std::size_t>((hc - dv) * static_cast<long>(width) + (wc - du))] = 1;
  }
  return mask;
}

ComplexGrid apply_mask(const ComplexGrid& grid, const UVMask& mask) {
  if (grid.height != mask.height || grid.width != mask.width) {
    throw std::invalid_argument("apply_mask: grid and mask shapes differ");
  }
  ComplexGrid out = grid;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!mask.bits[i]) {
      out.re[i] = 0.0;
      out.im[i] = 0.0;
    }
  }
  return out;
}

ObservedPair sample_visibility(const RealGrid& sky, const UVMask& mask, double noise_sigma,
                               RngStream& rng) {
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("sample_visibility: negative sigma");
  if (sky.height != mask.height || sky.width != mask.width) {
    throw std::invalid_argument("sample_visibility: sky and mask shapes differ");
  }
  if (mask.count() == 0) throw std::invalid_argument("sample_visibility: mask samples no cells");
  ObservedPair out;
  out.dense = fft2(sky);
  out.sparse.grid = apply_mask(out.dense, mask);
  out.sparse.mask = mask;
  out.sparse.noise_sigma = noise_sigma;
  if (noise_sigma > 0.0) {
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask.bits[i]) continue;
      out.sparse.grid.re[i] += noise_sigma * rng.normal();
      out.sparse.grid.im[i] += noise_sigma * rng.normal();
    }
  }
  return out;
}

RealGrid min_max_normalize(const RealGrid& grid) {
  RealGrid out = grid;
  if (grid.values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(grid.values.begin(), grid.values.end());
  const double span = *hi - *lo;
  if (!(span > 0.0)) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  for (double& v : out.values) v = (v - *lo) / span;
  return out;
}

RealGrid dirty_image(const SparseVisibility& sparse) {
  if (sparse.grid.height != sparse.mask.height || sparse.grid.width != sparse.mask.width) {
    throw std::invalid_argument("dirty_image: grid and mask shapes differ");
  }
  return min_max_normalize(real_part(ifft2(sparse.grid)));
}

void validate_sky(const RealGrid& sky) {
  for (double v : sky.values) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw std::invalid_argument("sky image values must lie in [0, 1]");
    }
  }
}

}  // namespace uvrec
