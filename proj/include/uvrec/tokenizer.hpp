#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "uvrec/fourier.hpp"
#include "uvrec/observation.hpp"
#include "uvrec/rng.hpp"
#include "uvrec/tensor.hpp"

namespace uvrec {

// Equal-area annuli over the disk inscribed in the grid; cells beyond the
// outer radius belong to the last band.
struct BandSpec {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  std::size_t capacity = 0;  // samples kept per band token
  std::vector<double> radii;
  std::vector<double> scales;  // per-band factor on re/im entries; empty means 1

  // `scales` is empty or holds one positive value per band.
  static BandSpec equal_area(std::size_t height, std::size_t width, std::size_t bands,
                             std::size_t capacity, std::vector<double> scales = {});
  std::size_t band_of(std::size_t row, std::size_t col) const;
  double scale(std::size_t band) const { return scales.empty() ? 1.0 : scales.at(band); }
  std::size_t token_width() const { return 4 * capacity; }
};

// max(ceil(1.5 * sampled cells / bands), fullest band of the mask), at least 1.
std::size_t default_band_capacity(const UVMask& mask, std::size_t bands);

enum class Modality : std::uint8_t { Visibility, Image };

struct TokenSequence {
  Tensor tokens;  // N_tok x d_in
  Modality modality = Modality::Visibility;
  // Visibility only: grid cell behind each (token, slot), -1 for padding.
  std::vector<std::ptrdiff_t> slot_cells;

  std::size_t count() const { return tokens.rows(); }
  std::size_t width() const { return tokens.cols(); }
};

// Each band token holds up to K samples as (du, dv, re, im), coordinates
// scaled to [-1, 1), ordered by radius then angle. Bands with more than K
// samples keep a random K-subset; shorter bands are zero padded. The
// re/im entries are multiplied by the band's scale.
TokenSequence band_tokenize(const SparseVisibility& sparse, const BandSpec& spec, RngStream& rng);

// For a decoded [N_tok, 4K] token matrix, the flat source index of every
// entry of an [H*W, 2] (re, im) grid; -1 where no slot maps to the cell.
std::vector<std::ptrdiff_t> band_scatter_index(const TokenSequence& tokens, const BandSpec& spec);

// [H*W, 2] factors that take gathered token values back to visibility units.
Tensor band_unscale(const BandSpec& spec);

// 1 / RMS of the observed re/im components in each band. Empty bands take
// the nearest inner band's value; 1 when no band has data.
std::vector<double> band_rms_scales(const std::vector<const SparseVisibility*>& data, const BandSpec& spec);

// Inverse of the band layout, undoing the value scale.
ComplexGrid tokens_to_grid(const Tensor& decoded, const TokenSequence& layout, const BandSpec& spec);

// Row-major p x p patches, each flattened row-major.
TokenSequence patchify(const RealGrid& image, std::size_t patch);
RealGrid unpatchify(const Tensor& tokens, std::size_t height, std::size_t width, std::size_t patch);
// Flat token index feeding each pixel of the [H*W, 1] image.
std::vector<std::ptrdiff_t> unpatchify_index(std::size_t height, std::size_t width, std::size_t patch);

// Token-level mask: true marks indices where the visibility token is
// visible and the image token is hidden.
struct MaskVector {
  std::vector<std::uint8_t> bits;
  double ratio = 0.5;

  std::size_t size() const { return bits.size(); }
  std::vector<std::size_t> true_indices() const;
  std::vector<std::size_t> false_indices() const;
};

std::size_t masked_count(std::size_t tokens, double ratio);
MaskVector sample_mask(std::size_t tokens, double ratio, RngStream& rng);

struct VisibleSets {
  std::vector<std::size_t> vis_index;  // where mask is true
  Tensor vis_tokens;
  std::vector<std::size_t> img_index;  // where mask is false
  Tensor img_tokens;
};

VisibleSets apply_complementary(const Tensor& vis_tokens, const Tensor& img_tokens,
                                const MaskVector& mask);

// Reassembles a full sequence from two disjoint row sets that together
// cover 0..count-1.
Tensor merge_rows(const std::vector<std::size_t>& first_index, const Tensor& first,
                  const std::vector<std::size_t>& second_index, const Tensor& second,
                  std::size_t count);

// Source row in concat_rows(first, second) for every output position.
std::vector<std::size_t> merge_order(const std::vector<std::size_t>& first_index,
                                     const std::vector<std::size_t>& second_index,
                                     std::size_t count);

}  // namespace uvrec
