#include "uvrec/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace uvrec {

namespace {

double centered_u(std::size_t col, std::size_t width) {
  return static_cast<double>(col) - static_cast<double>(width / 2);
}

double centered_v(std::size_t row, std::size_t height) {
  return static_cast<double>(row) - static_cast<double>(height / 2);
}

}  // namespace

BandSpec BandSpec::equal_area(std::size_t height, std::size_t width, std::size_t bands,
                              std::size_t capacity, std::vector<double> scales) {
  if (!scales.empty() && scales.size() != bands) throw std::invalid_argument("band spec: one scale per band required");
  for (double s : scales) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("band spec: scales must be positive");
  }
  if (bands == 0) throw std::invalid_argument("band spec: need at least one band");
  if (capacity == 0) throw std::invalid_argument("band spec: capacity K must be positive");
  BandSpec spec;
  spec.height = height;
  spec.width = width;
  spec.bands = bands;
  spec.capacity = capacity;
  spec.scales = std::move(scales);
  const double r_max = static_cast<double>(std::min(height, width)) / 2.0;
  for (std::size_t k = 0; k <= bands; ++k) {
    spec.radii.push_back(r_max * std::sqrt(static_cast<double>(k) / static_cast<double>(bands)));
  }
  return spec;
}

std::size_t BandSpec::band_of(std::size_t row, std::size_t col) const {
  const double r = std::hypot(centered_u(col, width), centered_v(row, height));
  for (std::size_t k = 0; k < bands; ++k) {
    if (r < radii[k + 1]) return k;
  }
  return bands - 1;
}

std::size_t default_band_capacity(const UVMask& mask, std::size_t bands) {
  if (bands == 0) throw std::invalid_argument("band capacity: zero bands");
  const double expected = static_cast<double>(mask.count()) / static_cast<double>(bands);
  const auto spec = BandSpec::equal_area(mask.height, mask.width, bands, 1);
  std::vector<std::size_t> occupancy(bands, 0);
  for (std::size_t r = 0; r < mask.height; ++r) {
    for (std::size_t c = 0; c < mask.width; ++c) {
      if (mask.at(r, c)) ++occupancy[spec.band_of(r, c)];
    }
  }
  const auto fullest = *std::max_element(occupancy.begin(), occupancy.end());
  return std::max<std::size_t>({1, fullest, static_cast<std::size_t>(std::ceil(1.5 * expected))});
}

TokenSequence band_tokenize(const SparseVisibility& sparse, const BandSpec& spec, RngStream& rng) {
  if (spec.capacity == 0) throw std::invalid_argument("band_tokenize: capacity K must be positive");
  const auto& grid = sparse.grid;
  if (grid.height != spec.height || grid.width != spec.width || sparse.mask.height != spec.height ||
      sparse.mask.width != spec.width) {
    throw std::invalid_argument("band_tokenize: band spec does not match grid size");
  }
  struct Cell {
    std::size_t index;
    double radius;
    double angle;
  };
  std::vector<std::vector<Cell>> members(spec.bands);
  for (std::size_t r = 0; r < grid.height; ++r) {
    for (std::size_t c = 0; c < grid.width; ++c) {
      if (!sparse.mask.at(r, c)) continue;
      const double u = centered_u(c, grid.width), v = centered_v(r, grid.height);
      members[spec.band_of(r, c)].push_back({r * grid.width + c, std::hypot(u, v), std::atan2(v, u)});
    }
  }
  const std::size_t k_cap = spec.capacity;
  TokenSequence seq;
  seq.modality = Modality::Visibility;
  seq.tokens = Tensor::matrix(spec.bands, spec.token_width());
  seq.slot_cells.assign(spec.bands * k_cap, -1);
  const double half_u = static_cast<double>(grid.width / 2);
  const double half_v = static_cast<double>(grid.height / 2);
  for (std::size_t b = 0; b < spec.bands; ++b) {
    auto& cells = members[b];
    std::sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) {
      if (x.radius != y.radius) return x.radius < y.radius;
      if (x.angle != y.angle) return x.angle < y.angle;
      return x.index < y.index;
    });
    std::vector<std::size_t> keep(cells.size());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    if (cells.size() > k_cap) {
      // Partial Fisher-Yates picks the subset; sorting restores radial order.
      for (std::size_t i = 0; i < k_cap; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(keep.size() - i));
        std::swap(keep[i], keep[j]);
      }
      keep.resize(k_cap);
      std::sort(keep.begin(), keep.end());
    }
    for (std::size_t slot = 0; slot < keep.size(); ++slot) {
      const Cell& cell = cells[keep[slot]];
      const std::size_t row = cell.index / grid.width, col = cell.index % grid.width;
      seq.tokens(b, 4 * slot + 0) = centered_u(col, grid.width) / half_u;
      seq.tokens(b, 4 * slot + 1) = centered_v(row, grid.height) / half_v;
      seq.tokens(b, 4 * slot + 2) = grid.re[cell.index] * spec.scale(b);
      seq.tokens(b, 4 * slot + 3) = grid.im[cell.index] * spec.scale(b);
      seq.slot_cells[b * k_cap + slot] = static_cast<std::ptrdiff_t>(cell.index);
    }
  }
  return seq;
}

std::vector<std::ptrdiff_t> band_scatter_index(const TokenSequence& tokens, const BandSpec& spec) {
  const std::size_t cells = spec.height * spec.width;
  std::vector<std::ptrdiff_t> index(cells * 2, -1);
  const std::size_t width = spec.token_width();
  for (std::size_t b = 0; b < spec.bands; ++b) {
    for (std::size_t slot = 0; slot < spec.capacity; ++slot) {
      const std::ptrdiff_t cell = tokens.slot_cells.at(b * spec.capacity + slot);
      if (cell < 0) continue;
      const auto base = static_cast<std::ptrdiff_t>(b * width + 4 * slot);
      index[static_cast<std::size_t>(cell) * 2 + 0] = base + 2;
      index[static_cast<std::size_t>(cell) * 2 + 1] = base + 3;
    }
  }
  return index;
}

Tensor band_unscale(const BandSpec& spec) {
  Tensor out = Tensor::matrix(spec.height * spec.width, 2);
  for (std::size_t c = 0; c < spec.height * spec.width; ++c) {
    const double inv = 1.0 / spec.scale(spec.band_of(c / spec.width, c % spec.width));
    out(c, 0) = inv;
    out(c, 1) = inv;
  }
  return out;
}

std::vector<double> band_rms_scales(const std::vector<const SparseVisibility*>& data, const BandSpec& spec) {
  std::vector<double> sum(spec.bands, 0.0);
  std::vector<std::size_t> n(spec.bands, 0);
  for (const auto* sparse : data) {
    const auto& g = sparse->grid;
    if (g.height != spec.height || g.width != spec.width) throw std::invalid_argument("band_rms_scales: shape mismatch");
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (!sparse->mask.bits[c]) continue;
      const std::size_t b = spec.band_of(c / g.width, c % g.width);
      sum[b] += g.re[c] * g.re[c] + g.im[c] * g.im[c];
      n[b] += 2;
    }
  }
  std::vector<double> scales(spec.bands, 0.0);
  for (std::size_t b = 0; b < spec.bands; ++b) {
    if (n[b] > 0 && sum[b] > 0.0) scales[b] = 1.0 / std::sqrt(sum[b] / static_cast<double>(n[b]));
  }
  // Empty bands borrow from the nearest inner band, or the nearest outer one.
  for (std::size_t b = 1; b < spec.bands; ++b) {
    if (scales[b] == 0.0) scales[b] = scales[b - 1];
  }
  for (std::size_t b = spec.bands; b-- > 1;) {
    if (scales[b - 1] == 0.0) scales[b - 1] = scales[b];
  }
  for (double& s : scales) {
    if (s == 0.0) s = 1.0;
  }
  return scales;
}

ComplexGrid tokens_to_grid(const Tensor& decoded, const TokenSequence& layout, const BandSpec& spec) {
  if (decoded.rows() != spec.bands || decoded.cols() != spec.token_width()) {
    throw std::invalid_argument("tokens_to_grid: decoded tokens have shape " +
                                shape_string(decoded.shape()));
  }
  const auto index = band_scatter_index(layout, spec);
  ComplexGrid grid(spec.height, spec.width);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double s = spec.scale(spec.band_of(c / spec.width, c % spec.width));
    if (index[2 * c] >= 0) grid.re[c] = decoded[static_cast<std::size_t>(index[2 * c])] / s;
    if (index[2 * c + 1] >= 0) grid.im[c] = decoded[static_cast<std::size_t>(index[2 * c + 1])] / s;
  }
  return grid;
}

namespace {

void check_patch(std::size_t height, std::size_t width, std::size_t patch) {
  if (patch == 0 || height % patch != 0 || width % patch != 0) {
    throw std::invalid_argument("patchify: patch size " + std::to_string(patch) +
                                " does not divide " + std::to_string(height) + "x" +
                                std::to_string(width));
  }
}

}  // namespace

std::vector<std::ptrdiff_t> unpatchify_index(std::size_t height, std::size_t width, std::size_t patch) {
  check_patch(height, width, patch);
  const std::size_t per_row = width / patch;
  std::vector<std::ptrdiff_t> index(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t token = (r / patch) * per_row + c / patch;
      const std::size_t within = (r % patch) * patch + c % patch;
      index[r * width + c] = static_cast<std::ptrdiff_t>(token * patch * patch + within);
    }
  }
  return index;
}

TokenSequence patchify(const RealGrid& image, std::size_t patch) {
  const auto index = unpatchify_index(image.height, image.width, patch);
  TokenSequence seq;
  seq.modality = Modality::Image;
  seq.tokens = Tensor::matrix(image.size() / (patch * patch), patch * patch);
  for (std::size_t i = 0; i < index.size(); ++i) {
    seq.tokens[static_cast<std::size_t>(index[i])] = image.values[i];
  }
  return seq;
}

RealGrid unpatchify(const Tensor& tokens, std::size_t height, std::size_t width, std::size_t patch) {
  const auto index = unpatchify_index(height, width, patch);
  if (tokens.size() != height * width || tokens.cols() != patch * patch) {
    throw std::invalid_argument("unpatchify: token shape " + shape_string(tokens.shape()) +
                                " does not match the image");
  }
  RealGrid image(height, width);
  for (std::size_t i = 0; i < index.size(); ++i) {
    image.values[i] = tokens[static_cast<std::size_t>(index[i])];
  }
  return image;
}

std::vector<std::size_t> MaskVector::true_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> MaskVector::false_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) out.push_back(i);
  }
  return out;
}

std::size_t masked_count(std::size_t tokens, double ratio) {
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(tokens)));
}

MaskVector sample_mask(std::size_t tokens, double ratio, RngStream& rng) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("sample_mask: ratio must lie in (0, 1)");
  }
  const std::size_t chosen = masked_count(tokens, ratio);
  if (chosen == 0 || chosen == tokens) {
    throw std::invalid_argument("sample_mask: ratio " + std::to_string(ratio) + " leaves one side empty for " +
                                std::to_string(tokens) + " tokens");
  }
  std::vector<std::size_t> order(tokens);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < chosen; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(tokens - i));
    std::swap(order[i], order[j]);
  }
  MaskVector mask;
  mask.ratio = ratio;
  mask.bits.assign(tokens, 0);
  for (std::size_t i = 0; i < chosen; ++i) mask.bits[order[i]] = 1;
  return mask;
}

namespace {

Tensor take_rows(const Tensor& src, const std::vector<std::size_t>& rows) {
  Tensor out = Tensor::matrix(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < src.cols(); ++j) out(i, j) = src(rows[i], j);
  }
  return out;
}

}  // namespace

VisibleSets apply_complementary(const Tensor& vis_tokens, const Tensor& img_tokens,
                                const MaskVector& mask) {
  if (vis_tokens.rows() != img_tokens.rows() || vis_tokens.rows() != mask.size()) {
    throw std::invalid_argument("apply_complementary: token counts differ (" +
                                std::to_string(vis_tokens.rows()) + ", " +
                                std::to_string(img_tokens.rows()) + ", mask " +
                                std::to_string(mask.size()) + ")");
  }
  VisibleSets out;
  out.vis_index = mask.true_indices();
  out.img_index = mask.false_indices();
  out.vis_tokens = take_rows(vis_tokens, out.vis_index);
  out.img_tokens = take_rows(img_tokens, out.img_index);
  return out;
}

std::vector<std::size_t> merge_order(const std::vector<std::size_t>& first_index,
                                     const std::vector<std::size_t>& second_index,
                                     std::size_t count) {
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> order(count, kUnset);
  const auto place = [&](const std::vector<std::size_t>& idx, std::size_t offset) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= count) throw std::out_of_range("merge: index outside the sequence");
      if (order[idx[i]] != kUnset) {
        throw std::invalid_argument("merge: index " + std::to_string(idx[i]) + " appears twice");
      }
      order[idx[i]] = offset + i;
    }
  };
  place(first_index, 0);
  place(second_index, first_index.size());
  for (std::size_t i = 0; i < count; ++i) {
    if (order[i] == kUnset) throw std::invalid_argument("merge: index " + std::to_string(i) + " not covered");
  }
  return order;
}

Tensor merge_rows(const std::vector<std::size_t>& first_index, const Tensor& first,
                  const std::vector<std::size_t>& second_index, const Tensor& second,
                  std::size_t count) {
  if (first.rows() != first_index.size() || second.rows() != second_index.size() ||
      (first.rows() > 0 && second.rows() > 0 && first.cols() != second.cols())) {
    throw std::invalid_argument("merge: row sets and indices disagree");
  }
  const auto order = merge_order(first_index, second_index, count);
  const std::size_t cols = first.rows() > 0 ? first.cols() : second.cols();
  Tensor out = Tensor::matrix(count, cols);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = order[i];
    for (std::size_t j = 0; j < cols; ++j) {
      out(i, j) = src < first.rows() ? first(src, j) : second(src - first.rows(), j);
    }
  }
  return out;
}

}  // namespace uvrec
