#include "uvrec/dataset.hpp"

#include <cstdio>
#include <stdexcept>

#include "uvrec/formats.hpp"

namespace uvrec {

namespace {

constexpr const char* kManifestName = "manifest.txt";
constexpr const char* kMaskName = "mask.fmsk";

std::string sample_id(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu", k);
  return buf;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    const std::size_t j = s.find(' ', i);
    if (i < s.size()) out.push_back(s.substr(i, j == std::string::npos ? j : j - i));
    if (j == std::string::npos) break;
    i = j;
  }
  return out;
}

}  // namespace

DatasetConfig default_dataset_config() {
  DatasetConfig c;
  c.sky.blobs_min = 1;
  c.sky.blobs_max = 3;
  c.sky.points_min = 0;
  c.sky.points_max = 2;
  c.sky.spiral_probability = 0.3;
  c.mask.track.hour_angle_start = -12.0;
  c.mask.track.hour_angle_end = 12.0;
  c.mask.track.declination_deg = 12.0;
  c.mask.track.time_steps = 96;
  c.mask.track.elevation_min_deg = 10.0;
  return c;
}

DatasetConfig dataset_config_from(const KeyValues& kv) {
  DatasetConfig c = default_dataset_config();
  c.count = static_cast<std::size_t>(kv.get_int("count", static_cast<long long>(c.count)));
  c.size = static_cast<std::size_t>(kv.get_int("size", static_cast<long long>(c.size)));
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.noise_sigma = kv.get_double("noise_sigma", c.noise_sigma);
  if (c.count == 0) throw std::runtime_error("dataset: count must be positive");
  if (!is_power_of_two(c.size) || c.size < 8) {
    throw std::runtime_error("dataset: size must be a power of two >= 8");
  }
  if (!(c.noise_sigma >= 0.0)) throw std::runtime_error("dataset: noise_sigma must be >= 0");

  auto& s = c.sky;
  s.height = s.width = c.size;
  s.blobs_min = static_cast<int>(kv.get_int("sky_blobs_min", s.blobs_min));
  s.blobs_max = static_cast<int>(kv.get_int("sky_blobs_max", s.blobs_max));
  s.sigma_min = kv.get_double("sky_sigma_min", s.sigma_min);
  s.sigma_max = kv.get_double("sky_sigma_max", s.sigma_max);
  s.axis_ratio_min = kv.get_double("sky_axis_ratio_min", s.axis_ratio_min);
  s.offset_max = kv.get_double("sky_offset_max", s.offset_max);
  s.points_min = static_cast<int>(kv.get_int("sky_points_min", s.points_min));
  s.points_max = static_cast<int>(kv.get_int("sky_points_max", s.points_max));
  s.point_amp_min = kv.get_double("sky_point_amp_min", s.point_amp_min);
  s.point_amp_max = kv.get_double("sky_point_amp_max", s.point_amp_max);
  s.spiral_probability = kv.get_double("sky_spiral_probability", s.spiral_probability);
  s.spiral_strength = kv.get_double("sky_spiral_strength", s.spiral_strength);

  auto& m = c.mask;
  m.layout = kv.get_string("mask_layout", m.layout);
  if (m.layout != "eht8" && m.layout != "random") {
    throw std::runtime_error("dataset: mask_layout must be 'eht8' or 'random'");
  }
  m.antennas = static_cast<std::size_t>(kv.get_int("mask_antennas", static_cast<long long>(m.antennas)));
  m.track.hour_angle_start = kv.get_double("mask_hour_start", m.track.hour_angle_start);
  m.track.hour_angle_end = kv.get_double("mask_hour_end", m.track.hour_angle_end);
  m.track.declination_deg = kv.get_double("mask_declination", m.track.declination_deg);
  m.track.time_steps = static_cast<std::size_t>(
      kv.get_int("mask_time_steps", static_cast<long long>(m.track.time_steps)));
  m.track.uv_fill = kv.get_double("mask_uv_fill", m.track.uv_fill);
  m.track.elevation_min_deg = kv.get_double("mask_elevation_min", m.track.elevation_min_deg);
  return c;
}

void dataset_config_to(const DatasetConfig& c, KeyValues& kv) {
  kv.set("count", std::to_string(c.count));
  kv.set("size", std::to_string(c.size));
  kv.set("seed", std::to_string(c.seed));
  kv.set("noise_sigma", format_double(c.noise_sigma));
  const auto& s = c.sky;
  kv.set("sky_blobs_min", std::to_string(s.blobs_min));
  kv.set("sky_blobs_max", std::to_string(s.blobs_max));
  kv.set("sky_sigma_min", format_double(s.sigma_min));
  kv.set("sky_sigma_max", format_double(s.sigma_max));
  kv.set("sky_axis_ratio_min", format_double(s.axis_ratio_min));
  kv.set("sky_offset_max", format_double(s.offset_max));
  kv.set("sky_points_min", std::to_string(s.points_min));
  kv.set("sky_points_max", std::to_string(s.points_max));
  kv.set("sky_point_amp_min", format_double(s.point_amp_min));
  kv.set("sky_point_amp_max", format_double(s.point_amp_max));
  kv.set("sky_spiral_probability", format_double(s.spiral_probability));
  kv.set("sky_spiral_strength", format_double(s.spiral_strength));
  const auto& m = c.mask;
  kv.set("mask_layout", m.layout);
  kv.set("mask_antennas", std::to_string(m.antennas));
  kv.set("mask_hour_start", format_double(m.track.hour_angle_start));
  kv.set("mask_hour_end", format_double(m.track.hour_angle_end));
  kv.set("mask_declination", format_double(m.track.declination_deg));
  kv.set("mask_time_steps", std::to_string(m.track.time_steps));
  kv.set("mask_uv_fill", format_double(m.track.uv_fill));
  kv.set("mask_elevation_min", format_double(m.track.elevation_min_deg));
}

UVMask build_mask(const DatasetConfig& config) {
  std::vector<Antenna> antennas;
  if (config.mask.layout == "eht8") {
    antennas = eight_station_layout();
  } else {
    auto rng = RngStream::named(config.seed, "dataset.layout");
    antennas = random_layout(config.mask.antennas, rng);
  }
  return synth_uv_mask(antennas, config.mask.track, config.size, config.size);
}

Dataset generate_dataset(const DatasetConfig& config) {
  Dataset ds;
  ds.config = config;
  ds.config.sky.height = ds.config.sky.width = config.size;
  ds.mask = build_mask(config);
  ds.samples.reserve(config.count);
  for (std::size_t k = 0; k < config.count; ++k) {
    auto sky_rng = RngStream::named(config.seed, "dataset.sky", k);
    auto noise_rng = RngStream::named(config.seed, "dataset.noise", k);
    Sample s;
    s.id = sample_id(k);
    s.sky = synth_sky(ds.config.sky, sky_rng);
    auto observed = sample_visibility(s.sky, ds.mask, config.noise_sigma, noise_rng);
    s.sparse = std::move(observed.sparse);
    s.dense = std::move(observed.dense);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  KeyValues kv;
  dataset_config_to(dataset.config, kv);
  kv.set("count", std::to_string(dataset.samples.size()));
  kv.set("mask", kMaskName);
  write_fmsk(dir / kMaskName, dataset.mask);
  for (const auto& s : dataset.samples) {
    const std::string sky = "sky_" + s.id + ".fimg";
    const std::string vis = "vis_" + s.id + ".fvis";
    std::string files = sky + " " + vis;
    write_fimg(dir / sky, s.sky);
    write_fvis(dir / vis, s.sparse.grid, VisKind::Sparse);
    if (s.dense) {
      const std::string dense = "dense_" + s.id + ".fvis";
      write_fvis(dir / dense, *s.dense, VisKind::Dense);
      files += " " + dense;
    }
    kv.set("sample." + s.id, files);
  }
  const std::string text = "# uvrec dataset manifest\n" + kv.to_text();
  write_file_bytes(dir / kManifestName, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto kv = KeyValues::load(dir / kManifestName);
  Dataset ds;
  ds.config = dataset_config_from(kv);
  ds.mask = read_fmsk(dir / kv.require_string("mask"));
  if (ds.mask.height != ds.config.size || ds.mask.width != ds.config.size) {
    throw std::runtime_error("dataset: mask shape does not match manifest size");
  }
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& [key, value] : kv.entries()) {
    if (key.rfind("sample.", 0) == 0) rows.emplace_back(key.substr(7), value);
  }
  if (rows.size() != ds.config.count) {
    throw std::runtime_error("dataset: manifest count " + std::to_string(ds.config.count) +
                             " but " + std::to_string(rows.size()) + " sample entries");
  }
  for (const auto& [id, value] : rows) {
    kv.get_string("sample." + id, "");
    const auto files = split_ws(value);
    if (files.size() != 2 && files.size() != 3) {
      throw std::runtime_error("dataset: sample " + id + " must list 2 or 3 files");
    }
    Sample s;
    s.id = id;
    s.sky = read_fimg(dir / files[0]);
    const auto vis = read_fvis(dir / files[1]);
    if (vis.kind != VisKind::Sparse) throw std::runtime_error("dataset: " + files[1] + " is not sparse");
    s.sparse.grid = vis.grid;
    s.sparse.mask = ds.mask;
    s.sparse.noise_sigma = ds.config.noise_sigma;
    if (files.size() == 3) {
      const auto dense = read_fvis(dir / files[2]);
      if (dense.kind != VisKind::Dense) throw std::runtime_error("dataset: " + files[2] + " is not dense");
      s.dense = dense.grid;
    }
    const std::size_t n = ds.config.size;
    if (s.sky.height != n || s.sky.width != n || s.sparse.grid.height != n ||
        s.sparse.grid.width != n || (s.dense && (s.dense->height != n || s.dense->width != n))) {
      throw std::runtime_error("dataset: sample " + id + " has mismatched grid sizes");
    }
    for (std::size_t i = 0; i < s.sparse.grid.size(); ++i) {
      if (!ds.mask.bits[i] && (s.sparse.grid.re[i] != 0.0 || s.sparse.grid.im[i] != 0.0)) {
        throw std::runtime_error("dataset: sample " + id + " has data outside the mask");
      }
    }
    ds.samples.push_back(std::move(s));
  }
  kv.reject_unused();
  return ds;
}

}  // namespace uvrec
