#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uvrec/config.hpp"
#include "uvrec/observation.hpp"

namespace uvrec {

struct MaskParams {
  std::string layout = "eht8";  // "eht8" or "random"
  std::size_t antennas = 8;     // used by "random"
  UVTrackSpec track;
};

struct DatasetConfig {
  std::size_t count = 200;
  std::size_t size = 32;
  std::uint64_t seed = 42;
  double noise_sigma = 0.01;
  SkyRecipe sky;
  MaskParams mask;
};

// Reads the dataset keys (count, size, seed, noise_sigma, sky_*, mask_*).
DatasetConfig dataset_config_from(const KeyValues& kv);
void dataset_config_to(const DatasetConfig& config, KeyValues& kv);
DatasetConfig default_dataset_config();

struct Sample {
  std::string id;
  RealGrid sky;
  SparseVisibility sparse;
  std::optional<ComplexGrid> dense;
};

struct Dataset {
  DatasetConfig config;
  UVMask mask;
  std::vector<Sample> samples;
};

UVMask build_mask(const DatasetConfig& config);

// Per-sample streams keep generation independent of order.
Dataset generate_dataset(const DatasetConfig& config);

// Writes manifest.txt, mask.fmsk and per-sample sky/vis/dense files.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Parses the manifest and every file it lists, cross-checking shapes, the
// shared mask and zero-filling of sparse grids.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace uvrec
