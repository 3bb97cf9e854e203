#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "uvrec/dataset.hpp"
#include "uvrec/metrics.hpp"
#include "uvrec/observation.hpp"

using namespace uvrec;

namespace {

// Regression constants from the default dataset config.
constexpr std::size_t kCanonicalMaskCells = 117;
constexpr double kCanonicalDirtyPsnr = 9.1279742117126759;

UVMask full_mask(std::size_t n) {
  UVMask m(n, n);
  std::fill(m.bits.begin(), m.bits.end(), 1);
  return m;
}

}  // namespace

TEST_CASE("single centered blob") {
  SkyRecipe r;
  r.fixed_blobs.push_back({16.0, 16.0, 4.0, 4.0, 0.0, 1.0});
  RngStream rng(1, 0);
  const RealGrid sky = synth_sky(r, rng);
  CHECK(sky(16, 16) == 1.0);
  for (std::size_t c = 16; c + 1 < 32; ++c) CHECK(sky(16, c + 1) < sky(16, c));
  for (std::size_t c = 16; c > 0; --c) CHECK(sky(16, c - 1) < sky(16, c));
  CHECK_THROWS_AS(synth_sky(SkyRecipe{}, rng), std::invalid_argument);
}

TEST_CASE("random skies are reproducible and bounded") {
  const DatasetConfig cfg = default_dataset_config();
  RngStream a(5, 9), b(5, 9);
  const RealGrid x = synth_sky(cfg.sky, a), y = synth_sky(cfg.sky, b);
  CHECK(x.values == y.values);
  CHECK(*std::max_element(x.values.begin(), x.values.end()) == 1.0);
  CHECK(*std::min_element(x.values.begin(), x.values.end()) >= 0.0);
}

TEST_CASE("two antennas trace one conjugate track pair") {
  const std::vector<Antenna> ants{{0, 0, 0}, {3000, 1000, 2000}};
  UVTrackSpec spec;
  spec.hour_angle_start = -12;
  spec.hour_angle_end = 12;
  const auto track = baseline_track(ants[0], ants[1], spec);
  CHECK(track.size() == spec.time_steps);
  // Projected track lies on an ellipse centered at (0, v0).
  const double dec = spec.declination_deg * std::numbers::pi / 180.0;
  const double len2 = 3000.0 * 3000.0 + 1000.0 * 1000.0;
  const double v0 = std::cos(dec) * 2000.0;
  for (auto [u, v] : track) {
    const double e = u * u + std::pow((v - v0) / std::sin(dec), 2);
    CHECK(e == doctest::Approx(len2).epsilon(1e-9));
  }
  const UVMask m = synth_uv_mask(ants, spec, 32, 32);
  CHECK(m.is_symmetric());
  CHECK(m.count() > 0);
  CHECK(m.at(16, 16) == false);
  CHECK_THROWS_AS(synth_uv_mask({ants[0]}, spec, 32, 32), std::invalid_argument);
}

TEST_CASE("eight stations give 28 baselines") {
  const auto ants = eight_station_layout();
  REQUIRE(ants.size() == 8);
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < ants.size(); ++i)
    for (std::size_t j = i + 1; j < ants.size(); ++j) {
      ++pairs;
      CHECK(baseline_track(ants[i], ants[j], UVTrackSpec{}).size() == UVTrackSpec{}.time_steps);
    }
  CHECK(pairs == 28);
}

TEST_CASE("canonical mask coverage is frozen") {
  const UVMask m = build_mask(default_dataset_config());
  CHECK(m.is_symmetric());
  CHECK(m.count() == kCanonicalMaskCells);
  CHECK(m.coverage() == doctest::Approx(kCanonicalMaskCells / 1024.0));
  CHECK(m.coverage() >= 0.10);
  CHECK(m.coverage() <= 0.15);
}

TEST_CASE("sampling") {
  RngStream rng(2, 0);
  RealGrid sky(16, 16);
  for (double& v : sky.values) v = rng.uniform();
  SUBCASE("full mask without noise") {
    RngStream n(3, 0);
    const ObservedPair p = sample_visibility(sky, full_mask(16), 0.0, n);
    CHECK(p.sparse.grid.re == p.dense.re);
    CHECK(p.sparse.grid.im == p.dense.im);
    const RealGrid d = dirty_image(p.sparse);
    const RealGrid t = min_max_normalize(sky);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(d.values[i] - t.values[i]) < 1e-9);
  }
  SUBCASE("complement cells are exactly zero") {
    const UVMask m = build_mask(default_dataset_config());
    RealGrid big(32, 32);
    for (double& v : big.values) v = rng.uniform();
    RngStream n(3, 0);
    const ObservedPair p = sample_visibility(big, m, 0.0, n);
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m.bits[i]) {
        CHECK(p.sparse.grid.re[i] == 0.0);
        CHECK(p.sparse.grid.im[i] == 0.0);
      } else {
        ++nonzero;
      }
    }
    CHECK(nonzero == m.count());
  }
  SUBCASE("noise standard deviation") {
    RngStream n(4, 0);
    const ObservedPair p = sample_visibility(sky, full_mask(16), 0.5, n);
    double s = 0;
    for (std::size_t i = 0; i < 256; ++i) {
      s += std::pow(p.sparse.grid.re[i] - p.dense.re[i], 2) + std::pow(p.sparse.grid.im[i] - p.dense.im[i], 2);
    }
    CHECK(std::sqrt(s / 512) == doctest::Approx(0.5).epsilon(0.05));
  }
  SUBCASE("errors") {
    RngStream n(3, 0);
    CHECK_THROWS_AS(sample_visibility(sky, full_mask(16), -1.0, n), std::invalid_argument);
    CHECK_THROWS_AS(sample_visibility(sky, UVMask(16, 16), 0.0, n), std::invalid_argument);
    CHECK_THROWS_AS(sample_visibility(sky, full_mask(8), 0.0, n), std::invalid_argument);
  }
}

TEST_CASE("dirty image of a point source is the normalized PSF") {
  const UVMask m = build_mask(default_dataset_config());
  RealGrid sky(32, 32);
  sky(16, 16) = 1.0;
  RngStream n(3, 0);
  const ObservedPair p = sample_visibility(sky, m, 0.0, n);
  ComplexGrid mask_grid(32, 32);
  for (std::size_t i = 0; i < m.size(); ++i) mask_grid.re[i] = m.bits[i];
  const RealGrid psf = min_max_normalize(real_part(ifft2(mask_grid)));
  const RealGrid dirty = dirty_image(p.sparse);
  for (std::size_t i = 0; i < psf.size(); ++i) CHECK(std::abs(dirty.values[i] - psf.values[i]) < 1e-12);
}

TEST_CASE("dirty images of the canonical set sit near the regression value") {
  const Dataset ds = generate_dataset(default_dataset_config());
  double total = 0;
  for (const auto& s : ds.samples) total += psnr(min_max_normalize(s.sky), dirty_image(s.sparse));
  CHECK(total / ds.samples.size() == doctest::Approx(kCanonicalDirtyPsnr).epsilon(1e-9));
}

TEST_CASE("min-max normalization") {
  RealGrid g(2, 2);
  g.values = {2, 4, 6, 10};
  CHECK(min_max_normalize(g).values == std::vector<double>{0, 0.25, 0.5, 1});
  RealGrid c(2, 2, 3.0);
  CHECK(min_max_normalize(c).values == std::vector<double>(4, 0.0));
}
