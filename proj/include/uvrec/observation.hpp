#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "uvrec/fourier.hpp"
#include "uvrec/rng.hpp"

namespace uvrec {

// Sampling pattern on the centered uv grid; bits are 0 or 1.
struct UVMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  UVMask() = default;
  UVMask(std::size_t h, std::size_t w) : height(h), width(w), bits(h * w, 0) {}

  std::size_t size() const { return height * width; }
  bool at(std::size_t row, std::size_t col) const { return bits[row * width + col] != 0; }
  std::size_t count() const;
  double coverage() const;
  // Conjugate-point check in centered coordinates; the Nyquist row and
  // column have no mirror and are ignored.
  bool is_symmetric() const;
};

struct SparseVisibility {
  ComplexGrid grid;
  UVMask mask;
  double noise_sigma = 0.0;
};

struct GaussianBlob {
  double row = 0.0;
  double col = 0.0;
  double sigma_major = 2.0;
  double sigma_minor = 2.0;
  double angle = 0.0;  // radians, major axis from the column axis
  double amplitude = 1.0;
};

// Components for a synthetic galaxy-like sky. Fixed blobs are drawn as
// given; random blobs and point sources are drawn from the rng.
struct SkyRecipe {
  std::size_t height = 32;
  std::size_t width = 32;
  std::vector<GaussianBlob> fixed_blobs;
  int blobs_min = 0;
  int blobs_max = 0;
  double sigma_min = 1.5;
  double sigma_max = 4.0;
  double axis_ratio_min = 0.4;
  double offset_max = 0.2;  // blob center spread, fraction of grid size
  int points_min = 0;
  int points_max = 0;
  double point_amp_min = 0.2;
  double point_amp_max = 0.6;
  double spiral_probability = 0.0;
  double spiral_strength = 0.6;
};

RealGrid synth_sky(const SkyRecipe& recipe, RngStream& rng);

// Station position in an Earth-centered frame, arbitrary length unit.
struct Antenna {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct UVTrackSpec {
  double hour_angle_start = -6.0;  // hours
  double hour_angle_end = 6.0;     // hours
  double declination_deg = 30.0;
  std::size_t time_steps = 64;
  // Longest projected baseline lands at this fraction of the largest radius
  // that still has a mirrored cell on the grid.
  double uv_fill = 0.9;
  // A baseline samples only while the source is above this elevation at
  // both stations; -90 disables the horizon check.
  double elevation_min_deg = -90.0;
};

// Approximate positions of an eight-station millimetre VLBI array (meters).
std::vector<Antenna> eight_station_layout();
std::vector<Antenna> random_layout(std::size_t count, RngStream& rng);

// Continuous (u, v) track of one baseline, in the same units as the antennas,
// keeping only hour angles where both stations see the source.
std::vector<std::pair<double, double>> baseline_track(const Antenna& a, const Antenna& b,
                                                      const UVTrackSpec& spec);

UVMask synth_uv_mask(const std::vector<Antenna>& antennas, const UVTrackSpec& spec,
                     std::size_t height, std::size_t width);

struct ObservedPair {
  ComplexGrid dense;
  SparseVisibility sparse;
};

// dense = fft2(sky); sparse = dense on the mask plus complex Gaussian noise
// (std sigma per component) at sampled cells, exactly zero elsewhere.
ObservedPair sample_visibility(const RealGrid& sky, const UVMask& mask, double noise_sigma,
                               RngStream& rng);

ComplexGrid apply_mask(const ComplexGrid& grid, const UVMask& mask);

// Affine map onto [0, 1]; a constant grid maps to zeros.
RealGrid min_max_normalize(const RealGrid& grid);

// Real part of the zero-filled inverse transform, min-max normalized.
RealGrid dirty_image(const SparseVisibility& sparse);

void validate_sky(const RealGrid& sky);

}  // namespace uvrec
