#include "uvrec/nets.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "uvrec/formats.hpp"

namespace uvrec {

namespace {

constexpr const char* kArchSection = "arch";

std::string pname(const std::string& section, const char* name) { return section + "." + name; }

struct Layout {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  enum class Init { Glorot, Zero, One, Normal } init;
};

std::vector<Layout> section_layout(const ArchConfig& a, const std::string& s) {
  using I = Layout::Init;
  const std::size_t d = a.d_model, n = a.tokens();
  if (s == section::kVisEncoder || s == section::kImgEncoder) {
    const std::size_t in = s == section::kVisEncoder ? a.vis_width() : a.img_width();
    return {{"w1", in, d, I::Glorot}, {"b1", 1, d, I::Zero}, {"w2", d, d, I::Glorot},
            {"b2", 1, d, I::Zero},    {"pos", n, d, I::Zero}};
  }
  if (s == section::kVisToImg || s == section::kImgToVis) {
    return {{"pos", n, d, I::Zero},         {"w1", 2 * d, a.hidden, I::Glorot},
            {"b1", 1, a.hidden, I::Zero},   {"w2", a.hidden, d, I::Glorot},
            {"b2", 1, d, I::Zero}};
  }
  if (s == section::kVisDecoder || s == section::kImgDecoder) {
    const std::size_t out = s == section::kVisDecoder ? a.vis_width() : a.img_width();
    return {{"w1", d, a.hidden, I::Glorot}, {"b1", 1, a.hidden, I::Zero},
            {"w2", a.hidden, out, I::Glorot}, {"b2", 1, out, I::Zero}};
  }
  if (s == section::kReconstructor) {
    const std::size_t h = a.recon_hidden;
    return {{"w_cell", kCellFeatures, h, I::Glorot}, {"pos", a.grid * a.grid, h, I::Normal},
            {"w_latent", d, h, I::Glorot},
            {"b1", 1, h, I::Zero},                   {"w2", h, h, I::Glorot},
            {"b2", 1, h, I::Zero},                   {"w_gate", d, h, I::Glorot},
            {"b_gate", 1, h, I::One},                {"w3", h, 2, I::Zero},
            {"b3", 1, 2, I::Zero}};
  }
  throw std::invalid_argument("unknown network section '" + s + "'");
}

Var mlp2(Tape& tape, const std::string& s, Var x) {
  Var h = tape.gelu(tape.affine(x, tape.param(pname(s, "w1")), tape.param(pname(s, "b1"))));
  return tape.affine(h, tape.param(pname(s, "w2")), tape.param(pname(s, "b2")));
}

std::vector<double> arch_values(const ArchConfig& a) {
  std::vector<double> v{static_cast<double>(a.grid),    static_cast<double>(a.patch),
          static_cast<double>(a.capacity), static_cast<double>(a.d_model),
          static_cast<double>(a.hidden),  static_cast<double>(a.recon_hidden)};
  v.insert(v.end(), a.band_scales.begin(), a.band_scales.end());
  return v;
}

ArchConfig arch_from_values(const std::vector<double>& v, const std::string& what) {
  if (v.size() < 6) throw std::runtime_error(what + ": arch section has " + std::to_string(v.size()) + " values");
  for (std::size_t i = 0; i < 6; ++i) {
    if (!(v[i] >= 1.0) || v[i] != std::floor(v[i]) || v[i] > 1e6) throw std::runtime_error(what + ": invalid arch value");
  }
  ArchConfig a;
  a.grid = static_cast<std::size_t>(v[0]);
  a.patch = static_cast<std::size_t>(v[1]);
  a.capacity = static_cast<std::size_t>(v[2]);
  a.d_model = static_cast<std::size_t>(v[3]);
  a.hidden = static_cast<std::size_t>(v[4]);
  a.recon_hidden = static_cast<std::size_t>(v[5]);
  a.band_scales.assign(v.begin() + 6, v.end());
  try {
    a.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(what + ": " + e.what());
  }
  return a;
}

}  // namespace

std::vector<std::string> scm_sections() {
  return {section::kVisEncoder, section::kImgEncoder, section::kVisToImg,   section::kImgToVis,
          section::kVisDecoder, section::kImgDecoder, section::kReconstructor};
}

std::vector<std::string> idr_sections() { return {section::kVisEncoder, section::kReconstructor}; }

void ArchConfig::validate() const {
  if (!is_power_of_two(grid) || grid < 4) throw std::invalid_argument("arch: grid must be a power of two >= 4");
  if (patch == 0 || grid % patch != 0) throw std::invalid_argument("arch: patch must divide grid");
  if (tokens() < 2) throw std::invalid_argument("arch: need at least 2 tokens");
  if (capacity == 0 || d_model == 0 || hidden == 0 || recon_hidden == 0) {
    throw std::invalid_argument("arch: widths must be positive");
  }
  band_spec();
}

void init_section(Model& model, const std::string& name, std::uint64_t seed) {
  for (const auto& l : section_layout(model.arch, name)) {
    Tensor t = Tensor::matrix(l.rows, l.cols);
    if (l.init == Layout::Init::Glorot) {
      const double bound = std::sqrt(6.0 / static_cast<double>(l.rows + l.cols));
      auto rng = RngStream::named(seed, "init." + name + "." + l.name);
      for (double& v : t.raw()) v = rng.uniform(-bound, bound);
    } else if (l.init == Layout::Init::One) {
      t.fill(1.0);
    } else if (l.init == Layout::Init::Normal) {
      auto rng = RngStream::named(seed, "init." + name + "." + l.name);
      for (double& v : t.raw()) v = rng.normal();
    }
    const std::string full = name + "." + l.name;
    if (model.params.contains(full)) {
      model.params.at(model.params.index(full)).value = std::move(t);
    } else {
      model.params.add(name, l.name, std::move(t));
    }
  }
}

Model init_model(const ArchConfig& arch, std::uint64_t seed, const std::vector<std::string>& sections) {
  arch.validate();
  Model m;
  m.arch = arch;
  for (const auto& s : sections) init_section(m, s, seed);
  return m;
}

Var encode(Tape& tape, const std::string& encoder, Var tokens) {
  const std::size_t expected = tape.value(tape.param(pname(encoder, "w1"))).rows();
  if (tape.value(tokens).cols() != expected) {
    throw std::invalid_argument(encoder + ": token width " + std::to_string(tape.value(tokens).cols()) +
                                " but encoder expects " + std::to_string(expected));
  }
  return tape.add(mlp2(tape, encoder, tokens), tape.param(pname(encoder, "pos")));
}

Var pooled_embedding(Tape& tape, Var latents) { return tape.l2_normalize_rows(tape.mean_rows(latents)); }

Var predict_cross(Tape& tape, const std::string& predictor, Var visible,
                  const std::vector<std::size_t>& targets) {
  if (tape.value(visible).rows() == 0) throw std::invalid_argument(predictor + ": empty visible set");
  if (targets.empty()) throw std::invalid_argument(predictor + ": no target positions");
  Var pooled = tape.tile_rows(tape.mean_rows(visible), targets.size());
  Var position = tape.gather_rows(tape.param(pname(predictor, "pos")), targets);
  return mlp2(tape, predictor, tape.concat_cols(pooled, position));
}

Var decode(Tape& tape, const std::string& decoder, Var latents) { return mlp2(tape, decoder, latents); }

Var reconstruct_raw(Tape& tape, const ArchConfig& arch, Var latent, const Tensor& features) {
  const std::string s = section::kReconstructor;
  if (features.rows() != arch.grid * arch.grid || features.cols() != kCellFeatures) {
    throw std::invalid_argument("reconstruct: expected [" + std::to_string(arch.grid * arch.grid) + ", " +
                                std::to_string(kCellFeatures) + "] cell features");
  }
  const std::size_t cells = features.rows();
  Var per_cell = tape.add(tape.matmul(tape.constant(features), tape.param(pname(s, "w_cell"))),
                          tape.param(pname(s, "pos")));
  Var shared = tape.affine(latent, tape.param(pname(s, "w_latent")), tape.param(pname(s, "b1")));
  Var h1 = tape.gelu(tape.add(per_cell, tape.tile_rows(shared, cells)));
  Var h2 = tape.gelu(tape.affine(h1, tape.param(pname(s, "w2")), tape.param(pname(s, "b2"))));
  Var gate = tape.affine(latent, tape.param(pname(s, "w_gate")), tape.param(pname(s, "b_gate")));
  Var out = tape.affine(tape.mul(h2, tape.tile_rows(gate, cells)), tape.param(pname(s, "w3")),
                        tape.param(pname(s, "b3")));
  return tape.mul(out, tape.constant(band_unscale(arch.band_spec())));
}

Tensor cell_features(const SparseVisibility& sparse, const BandSpec& spec) {
  const auto& g = sparse.grid;
  if (g.height != sparse.mask.height || g.width != sparse.mask.width) {
    throw std::invalid_argument("cell_features: grid and mask shapes differ");
  }
  const double hu = static_cast<double>(g.width / 2), hv = static_cast<double>(g.height / 2);
  const double hr = std::min(hu, hv);
  Tensor f = Tensor::matrix(g.size(), kCellFeatures);
  for (std::size_t r = 0; r < g.height; ++r) {
    for (std::size_t c = 0; c < g.width; ++c) {
      const std::size_t i = r * g.width + c;
      const double u = static_cast<double>(c) - hu, v = static_cast<double>(r) - hv;
      f(i, 0) = u / hu;
      f(i, 1) = v / hv;
      f(i, 2) = std::hypot(u, v) / hr;
      f(i, 3) = g.re[i] * spec.scale(spec.band_of(r, c));
      f(i, 4) = g.im[i] * spec.scale(spec.band_of(r, c));
      f(i, 5) = sparse.mask.bits[i] ? 1.0 : 0.0;
    }
  }
  return f;
}

Tensor grid_to_cells(const ComplexGrid& grid) {
  Tensor t = Tensor::matrix(grid.size(), 2);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    t(i, 0) = grid.re[i];
    t(i, 1) = grid.im[i];
  }
  return t;
}

ComplexGrid cells_to_grid(const Tensor& cells, std::size_t height, std::size_t width) {
  if (cells.rows() != height * width || cells.cols() != 2) {
    throw std::invalid_argument("cells_to_grid: shape " + shape_string(cells.shape()) +
                                " does not match " + std::to_string(height) + "x" + std::to_string(width));
  }
  ComplexGrid g(height, width);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.re[i] = cells(i, 0);
    g.im[i] = cells(i, 1);
  }
  return g;
}

ComplexGrid enforce_consistency(const ComplexGrid& predicted, const SparseVisibility& sparse) {
  if (predicted.height != sparse.mask.height || predicted.width != sparse.mask.width) {
    throw std::invalid_argument("enforce_consistency: shape mismatch");
  }
  ComplexGrid out = predicted;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (sparse.mask.bits[i]) {
      out.re[i] = sparse.grid.re[i];
      out.im[i] = sparse.grid.im[i];
    }
  }
  return out;
}

Reconstruction reconstruct_dense(const Model& model, const SparseVisibility& sparse, RngStream& rng) {
  const auto& a = model.arch;
  if (sparse.grid.height != a.grid || sparse.grid.width != a.grid) {
    throw std::invalid_argument("reconstruct: visibility grid does not match the model grid");
  }
  if (!model.params.has_section(section::kVisEncoder) || !model.params.has_section(section::kReconstructor)) {
    throw std::runtime_error("reconstruct: model lacks E_v or G_v");
  }
  const auto spec = a.band_spec();
  const auto tokens = band_tokenize(sparse, spec, rng);
  ModelParams params = model.params;
  Tape tape(&params);
  Var xi = encode(tape, section::kVisEncoder, tape.constant(tokens.tokens));
  Var raw = reconstruct_raw(tape, a, tape.mean_rows(xi), cell_features(sparse, a.band_spec()));
  Reconstruction out;
  out.raw = cells_to_grid(tape.value(raw), a.grid, a.grid);
  out.dense = enforce_consistency(out.raw, sparse);
  out.image = min_max_normalize(real_part(ifft2(out.dense)));
  return out;
}

std::vector<std::uint8_t> checkpoint_bytes(const Model& model) {
  ByteWriter out;
  out.bytes("CKPT", 4);
  const auto sections = model.params.sections();
  out.u32(static_cast<std::uint32_t>(sections.size() + 1));
  const auto write_section = [&](const std::string& name, const std::vector<double>& values) {
    out.u16(static_cast<std::uint16_t>(name.size()));
    out.bytes(name.data(), name.size());
    out.u64(values.size());
    for (double v : values) out.f64(v);
  };
  write_section(kArchSection, arch_values(model.arch));
  for (const auto& s : sections) write_section(s, model.params.flatten(s));
  return out.data();
}

Model checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  ByteReader in(bytes, what);
  in.expect_magic("CKPT");
  const std::uint32_t count = in.u32();
  if (count < 2) throw std::runtime_error(what + ": needs an arch section and at least one network");
  std::vector<std::pair<std::string, std::vector<double>>> sections;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint16_t len = in.u16();
    std::string name = in.string(len);
    const std::uint64_t n = in.u64();
    if (n > in.remaining() / 8) throw std::runtime_error(what + ": truncated section '" + name + "'");
    std::vector<double> values(n);
    for (double& v : values) v = in.f64();
    sections.emplace_back(std::move(name), std::move(values));
  }
  if (in.remaining() != 0) {
    throw std::runtime_error(what + ": section count " + std::to_string(count) +
                             " does not account for the whole file");
  }
  if (sections.front().first != kArchSection) throw std::runtime_error(what + ": first section must be 'arch'");
  Model model;
  model.arch = arch_from_values(sections.front().second, what);
  for (std::size_t k = 1; k < sections.size(); ++k) {
    const auto& [name, values] = sections[k];
    const auto known = scm_sections();
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw std::runtime_error(what + ": unknown section '" + name + "'");
    }
    if (model.params.has_section(name)) throw std::runtime_error(what + ": duplicate section '" + name + "'");
    init_section(model, name, 0);
    if (model.params.section_size(name) != values.size()) {
      throw std::runtime_error(what + ": section '" + name + "' has " + std::to_string(values.size()) +
                               " values, architecture needs " +
                               std::to_string(model.params.section_size(name)));
    }
    model.params.assign(name, values);
    for (double v : values) {
      if (!std::isfinite(v)) throw std::runtime_error(what + ": non-finite value in '" + name + "'");
    }
  }
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  write_file_bytes(path, checkpoint_bytes(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_bytes(read_file_bytes(path), "CKPT '" + path.string() + "'");
}

}  // namespace uvrec
