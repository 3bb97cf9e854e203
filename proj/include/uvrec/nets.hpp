#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uvrec/observation.hpp"
#include "uvrec/params.hpp"
#include "uvrec/tape.hpp"
#include "uvrec/tokenizer.hpp"

namespace uvrec {

// Section names of the seven networks.
namespace section {
inline constexpr const char* kVisEncoder = "E_v";
inline constexpr const char* kImgEncoder = "E_i";
inline constexpr const char* kVisToImg = "F_vi";
inline constexpr const char* kImgToVis = "F_iv";
inline constexpr const char* kVisDecoder = "D_v";
inline constexpr const char* kImgDecoder = "D_i";
inline constexpr const char* kReconstructor = "G_v";
}  // namespace section

std::vector<std::string> scm_sections();
std::vector<std::string> idr_sections();

struct ArchConfig {
  std::size_t grid = 32;
  std::size_t patch = 8;
  std::size_t capacity = 8;  // band token capacity K
  std::size_t d_model = 64;
  std::size_t hidden = 64;         // predictor and decoder hidden width
  std::size_t recon_hidden = 128;  // reconstruction network hidden width
  std::vector<double> band_scales;  // visibility units -> token units, per band; empty means 1

  std::size_t tokens() const { return (grid / patch) * (grid / patch); }
  std::size_t vis_width() const { return 4 * capacity; }
  std::size_t img_width() const { return patch * patch; }
  BandSpec band_spec() const { return BandSpec::equal_area(grid, grid, tokens(), capacity, band_scales); }
  void validate() const;
};

// Per-cell inputs of the reconstruction network.
inline constexpr std::size_t kCellFeatures = 6;

struct Model {
  ArchConfig arch;
  ModelParams params;
};

// Glorot-uniform weights and zero biases, drawn from per-parameter streams
// of `seed`. Positional tables start at zero except the per-cell table of
// G_v, which is standard normal. G_v starts with a unit gate and a zero
// output layer, so its first prediction is the zero-filled grid.
Model init_model(const ArchConfig& arch, std::uint64_t seed, const std::vector<std::string>& sections);
void init_section(Model& model, const std::string& name, std::uint64_t seed);

// Tape builders. Token inputs are [N, d_in]; latents are [N, d_model].
Var encode(Tape& tape, const std::string& encoder, Var tokens);
// Mean over tokens, then unit-normalized: [1, d_model].
Var pooled_embedding(Tape& tape, Var latents);
// Predicts latents of the other modality at `targets` from the visible rows.
Var predict_cross(Tape& tape, const std::string& predictor, Var visible,
                  const std::vector<std::size_t>& targets);
Var decode(Tape& tape, const std::string& decoder, Var latents);
// Pre-consistency dense prediction as an [H*W, 2] (re, im) matrix from the
// token-mean latent [1, d_model]. Per cell: features, a learned cell table
// and the latent feed two GELU layers; the second is gated elementwise by an
// affine map of the latent. Works in band-scaled units, returns visibility units.
Var reconstruct_raw(Tape& tape, const ArchConfig& arch, Var latent, const Tensor& cell_features);

// (u, v, radius) scaled to [-1, 1], observed re/im times the band scale, mask bit.
Tensor cell_features(const SparseVisibility& sparse, const BandSpec& spec);
// [H*W, 2] (re, im) layout used by the losses.
Tensor grid_to_cells(const ComplexGrid& grid);
ComplexGrid cells_to_grid(const Tensor& cells, std::size_t height, std::size_t width);

// Overwrites every sampled cell with the observation.
ComplexGrid enforce_consistency(const ComplexGrid& predicted, const SparseVisibility& sparse);

// Inference: tokenize, encode with E_v, run G_v, enforce data consistency.
struct Reconstruction {
  ComplexGrid raw;
  ComplexGrid dense;
  RealGrid image;  // min-max normalized real part of the inverse transform
};
Reconstruction reconstruct_dense(const Model& model, const SparseVisibility& sparse, RngStream& rng);

// CKPT: "CKPT" u32 sections, then per section u16 name length, name,
// u64 value count, float64 values. An "arch" section precedes the networks.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> checkpoint_bytes(const Model& model);
Model checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes, const std::string& what);

}  // namespace uvrec
