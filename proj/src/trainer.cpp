#include "uvrec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace uvrec {

namespace {

std::vector<std::size_t> draw_batch(const std::vector<std::size_t>& pool, std::size_t n, RngStream rng) {
  if (pool.empty()) throw std::runtime_error("training split is empty");
  std::vector<std::size_t> order = pool;
  const std::size_t take = std::min(n, order.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  order.resize(take);
  return order;
}

Tensor image_column(const RealGrid& image) {
  Tensor t = Tensor::matrix(image.size(), 1);
  for (std::size_t i = 0; i < image.size(); ++i) t[i] = image.values[i];
  return t;
}

struct ScmTerms {
  Var contrastive;
  Var rec_vis;
  Var rec_img;
  ContrastiveResult stats;
};

// Builds every pretext term for one batch on the tape.
ScmTerms scm_forward(Tape& tape, const Model& model, const Dataset& dataset,
                     const std::vector<std::size_t>& batch, const TrainConfig& config,
                     const std::string& stream, std::uint64_t step,
                     std::vector<double>* per_sample_vis = nullptr,
                     std::vector<double>* per_sample_img = nullptr) {
  const auto& arch = model.arch;
  const auto spec = arch.band_spec();
  const auto pixel_index = unpatchify_index(arch.grid, arch.grid, arch.patch);
  const std::size_t n_tok = arch.tokens();
  const Var unscale = tape.constant(band_unscale(spec));
  std::vector<Var> xi_pooled, eta_pooled, rec_vis, rec_img;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Sample& s = dataset.samples.at(batch[j]);
    auto band_rng = RngStream::named(config.seed, stream + ".band", step, j);
    auto omega_rng = RngStream::named(config.seed, stream + ".omega", step, j);
    const auto vis_tokens = band_tokenize(s.sparse, spec, band_rng);
    const auto img_tokens = patchify(s.sky, arch.patch);
    Var xi = encode(tape, section::kVisEncoder, tape.constant(vis_tokens.tokens));
    Var eta = encode(tape, section::kImgEncoder, tape.constant(img_tokens.tokens));
    xi_pooled.push_back(pooled_embedding(tape, xi));
    eta_pooled.push_back(pooled_embedding(tape, eta));

    const auto omega = sample_mask(n_tok, config.mask_ratio, omega_rng);
    const auto vis_index = omega.true_indices();
    const auto img_index = omega.false_indices();
    Var xi_visible = tape.gather_rows(xi, vis_index);
    Var eta_visible = tape.gather_rows(eta, img_index);
    // Image tokens are hidden where the mask is true, visibility tokens where it is false.
    Var eta_pred = predict_cross(tape, section::kVisToImg, xi_visible, vis_index);
    Var xi_pred = predict_cross(tape, section::kImgToVis, eta_visible, img_index);
    const Var xi_parts[] = {xi_visible, xi_pred};
    const Var eta_parts[] = {eta_visible, eta_pred};
    Var xi_merged = tape.gather_rows(tape.concat_rows(xi_parts), merge_order(vis_index, img_index, n_tok));
    Var eta_merged = tape.gather_rows(tape.concat_rows(eta_parts), merge_order(img_index, vis_index, n_tok));

    Var vis_cells = tape.mul(tape.gather(decode(tape, section::kVisDecoder, xi_merged),
                                         band_scatter_index(vis_tokens, spec), arch.grid * arch.grid, 2),
                             unscale);
    Var img_cells = tape.gather(decode(tape, section::kImgDecoder, eta_merged), pixel_index,
                                arch.grid * arch.grid, 1);
    rec_vis.push_back(mse(tape, tape.constant(grid_to_cells(s.sparse.grid)), vis_cells));
    rec_img.push_back(mse(tape, tape.constant(image_column(s.sky)), img_cells));
    if (per_sample_vis) per_sample_vis->push_back(tape.scalar(rec_vis.back()));
    if (per_sample_img) per_sample_img->push_back(tape.scalar(rec_img.back()));
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  ScmTerms t;
  Var xi_batch = tape.concat_rows(xi_pooled);
  Var eta_batch = tape.concat_rows(eta_pooled);
  t.contrastive = contrastive_loss(tape, xi_batch, eta_batch, config.loss.temperature);
  t.stats = contrastive_loss(tape.value(xi_batch), tape.value(eta_batch), config.loss.temperature);
  t.rec_vis = tape.scale(tape.sum(tape.concat_rows(rec_vis)), inv);
  t.rec_img = tape.scale(tape.sum(tape.concat_rows(rec_img)), inv);
  return t;
}

Var idr_batch_loss(Tape& tape, const Model& model, const Dataset& dataset,
                   const std::vector<std::size_t>& batch, std::uint64_t seed, const std::string& stream,
                   std::uint64_t step) {
  const auto spec = model.arch.band_spec();
  std::vector<Var> losses;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Sample& s = dataset.samples.at(batch[j]);
    if (!s.dense) throw std::runtime_error("sample " + s.id + " has no dense ground truth");
    auto rng = RngStream::named(seed, stream, step, j);
    const auto tokens = band_tokenize(s.sparse, spec, rng);
    Var xi = encode(tape, section::kVisEncoder, tape.constant(tokens.tokens));
    Var raw = reconstruct_raw(tape, model.arch, tape.mean_rows(xi), cell_features(s.sparse, model.arch.band_spec()));
    losses.push_back(idr_loss(tape, raw, grid_to_cells(*s.dense)));
  }
  return tape.scale(tape.sum(tape.concat_rows(losses)), 1.0 / static_cast<double>(batch.size()));
}

}  // namespace

void TrainConfig::validate() const {
  if (!scm_stage && !idr_stage) throw std::invalid_argument("config: at least one stage must be enabled");
  if (batch == 0) throw std::invalid_argument("config: batch must be >= 1");
  if (!(lr_scm >= 0.0) || !(lr_idr >= 0.0)) throw std::invalid_argument("config: learning rates must be >= 0");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw std::invalid_argument("config: mask_ratio must lie in (0, 1)");
  if (!(loss.temperature > 0.0)) throw std::invalid_argument("config: tau must be > 0");
  if (!std::isfinite(loss.kappa) || loss.kappa < 0.0) throw std::invalid_argument("config: kappa must be finite and >= 0");
  if (window == 0) throw std::invalid_argument("config: window must be >= 1");
}

TrainConfig train_config_from(const KeyValues& kv) {
  TrainConfig c;
  c.scm_steps = static_cast<std::size_t>(kv.get_int("scm_steps", static_cast<long long>(c.scm_steps)));
  c.idr_steps = static_cast<std::size_t>(kv.get_int("idr_steps", static_cast<long long>(c.idr_steps)));
  c.batch = static_cast<std::size_t>(kv.get_int("batch", static_cast<long long>(c.batch)));
  c.lr_scm = kv.get_double("lr_scm", c.lr_scm);
  c.lr_idr = kv.get_double("lr_idr", c.lr_idr);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.mask_ratio = kv.get_double("mask_ratio", c.mask_ratio);
  c.loss.temperature = kv.get_double("tau", c.loss.temperature);
  c.loss.kappa = kv.get_double("kappa", c.loss.kappa);
  c.task1_contrastive = kv.get_bool("task1_contrastive", c.task1_contrastive);
  c.task2_masking = kv.get_bool("task2_masking", c.task2_masking);
  c.scm_stage = kv.get_bool("scm_stage", c.scm_stage);
  c.idr_stage = kv.get_bool("idr_stage", c.idr_stage);
  c.pretrain_data = kv.get_string("pretrain_data", c.pretrain_data);
  c.finetune_data = kv.get_string("finetune_data", c.finetune_data);
  c.arch.patch = static_cast<std::size_t>(kv.get_int("patch", static_cast<long long>(c.arch.patch)));
  c.arch.capacity = static_cast<std::size_t>(kv.get_int("band_capacity", static_cast<long long>(c.arch.capacity)));
  c.arch.d_model = static_cast<std::size_t>(kv.get_int("d_model", static_cast<long long>(c.arch.d_model)));
  c.arch.hidden = static_cast<std::size_t>(kv.get_int("hidden", static_cast<long long>(c.arch.hidden)));
  c.arch.recon_hidden =
      static_cast<std::size_t>(kv.get_int("recon_hidden", static_cast<long long>(c.arch.recon_hidden)));
  c.window = static_cast<std::size_t>(kv.get_int("window", static_cast<long long>(c.window)));
  c.bands = static_cast<std::size_t>(kv.get_int("bands", 0));
  c.validate();
  return c;
}

void train_config_to(const TrainConfig& c, KeyValues& kv) {
  kv.set("scm_steps", std::to_string(c.scm_steps));
  kv.set("idr_steps", std::to_string(c.idr_steps));
  kv.set("batch", std::to_string(c.batch));
  kv.set("lr_scm", format_double(c.lr_scm));
  kv.set("lr_idr", format_double(c.lr_idr));
  kv.set("seed", std::to_string(c.seed));
  kv.set("mask_ratio", format_double(c.mask_ratio));
  kv.set("tau", format_double(c.loss.temperature));
  kv.set("kappa", format_double(c.loss.kappa));
  kv.set("task1_contrastive", c.task1_contrastive ? "on" : "off");
  kv.set("task2_masking", c.task2_masking ? "on" : "off");
  kv.set("scm_stage", c.scm_stage ? "on" : "off");
  kv.set("idr_stage", c.idr_stage ? "on" : "off");
  if (!c.pretrain_data.empty()) kv.set("pretrain_data", c.pretrain_data);
  if (!c.finetune_data.empty()) kv.set("finetune_data", c.finetune_data);
  kv.set("patch", std::to_string(c.arch.patch));
  kv.set("bands", std::to_string(c.bands));
  kv.set("band_capacity", std::to_string(c.arch.capacity));
  kv.set("d_model", std::to_string(c.arch.d_model));
  kv.set("hidden", std::to_string(c.arch.hidden));
  kv.set("recon_hidden", std::to_string(c.arch.recon_hidden));
  kv.set("window", std::to_string(c.window));
}

ArchConfig resolve_arch(const TrainConfig& config, const Dataset& dataset) {
  ArchConfig a = config.arch;
  a.grid = dataset.config.size;
  if (a.patch == 0 || a.grid % a.patch != 0) {
    throw std::invalid_argument("config: patch " + std::to_string(a.patch) + " does not divide grid " +
                                std::to_string(a.grid));
  }
  if (config.bands != 0 && config.bands != a.tokens()) {
    throw std::invalid_argument("config: bands = " + std::to_string(config.bands) + " but the patch grid gives " +
                                std::to_string(a.tokens()) + " tokens");
  }
  if (a.capacity == 0) a.capacity = default_band_capacity(dataset.mask, a.tokens());
  a.band_scales.clear();
  std::vector<const SparseVisibility*> observed;
  for (const auto& s : dataset.samples) observed.push_back(&s.sparse);
  a.band_scales = band_rms_scales(observed, a.band_spec());
  a.validate();
  return a;
}

Split split_dataset(std::size_t count, std::uint64_t seed) {
  if (count < 3) throw std::runtime_error("dataset needs at least 3 samples to split");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = RngStream::named(seed, "split");
  for (std::size_t i = count; i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
  }
  const auto tenth = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(count))));
  Split s;
  const std::size_t n_train = count - 2 * tenth;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                      order.begin() + static_cast<std::ptrdiff_t>(n_train + tenth));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + tenth), order.end());
  return s;
}

ScmResult run_scm(const TrainConfig& config, const Dataset& dataset) {
  config.validate();
  if (!config.scm_stage) throw std::invalid_argument("run_scm: scm_stage is off");
  if (!config.task1_contrastive && !config.task2_masking) {
    throw std::invalid_argument("run_scm: both pretext tasks are off, the objective is empty");
  }
  ScmResult result;
  result.model = init_model(resolve_arch(config, dataset), config.seed, scm_sections());
  const auto split = split_dataset(dataset.samples.size(), config.seed);
  AdamState state;
  const AdamConfig adam{config.lr_scm};
  for (std::size_t step = 0; step < config.scm_steps; ++step) {
    const auto batch = draw_batch(split.train, config.batch, RngStream::named(config.seed, "scm.batch", step));
    Tape tape(&result.model.params);
    const ScmTerms t = scm_forward(tape, result.model, dataset, batch, config, "scm", step);
    std::vector<Var> terms;
    if (config.task2_masking) {
      terms.push_back(t.rec_vis);
      terms.push_back(t.rec_img);
    }
    if (config.task1_contrastive) terms.push_back(tape.scale(t.contrastive, config.loss.kappa));
    Var total = tape.sum(tape.concat_rows(terms));
    ScmLogRow row;
    row.step = step;
    row.contrastive = tape.scalar(t.contrastive);
    row.rec_vis = tape.scalar(t.rec_vis);
    row.rec_img = tape.scalar(t.rec_img);
    row.total = tape.scalar(total);
    row.accuracy = t.stats.accuracy;
    tape.backward(total);
    adam_step(result.model.params, state, adam);
    result.log.push_back(row);
  }
  return result;
}

IdrResult run_idr(const TrainConfig& config, const Dataset& dataset, const Model* init) {
  config.validate();
  for (const auto& s : dataset.samples) {
    if (!s.dense) throw std::runtime_error("run_idr: dataset lacks dense ground truth (sample " + s.id + ")");
  }
  IdrResult result;
  const ArchConfig arch = resolve_arch(config, dataset);
  if (init != nullptr) {
    if (!init->params.has_section(section::kVisEncoder)) {
      throw std::runtime_error("run_idr: initial checkpoint lacks E_v");
    }
    // The stored architecture wins so the encoder weights fit.
    ArchConfig a = init->arch;
    a.recon_hidden = arch.recon_hidden;
    if (a.grid != arch.grid) throw std::runtime_error("run_idr: checkpoint grid does not match dataset");
    result.model = init_model(a, config.seed, idr_sections());
    result.model.params.assign(section::kVisEncoder, init->params.flatten(section::kVisEncoder));
  } else {
    result.model = init_model(arch, config.seed, idr_sections());
  }
  const auto split = split_dataset(dataset.samples.size(), config.seed);
  AdamState state;
  const AdamConfig adam{config.lr_idr};
  for (std::size_t step = 0; step < config.idr_steps; ++step) {
    const auto batch = draw_batch(split.train, config.batch, RngStream::named(config.seed, "idr.batch", step));
    Tape tape(&result.model.params);
    Var loss = idr_batch_loss(tape, result.model, dataset, batch, config.seed, "idr.band", step);
    result.log.push_back({step, tape.scalar(loss)});
    tape.backward(loss);
    adam_step(result.model.params, state, adam);
  }
  return result;
}

std::string scm_log_csv(const std::vector<ScmLogRow>& log) {
  std::string out = "step,l_c,l_rec_v,l_rec_i,l_scm,acc\n";
  for (const auto& r : log) {
    out += std::to_string(r.step) + "," + format_double(r.contrastive) + "," + format_double(r.rec_vis) + "," +
           format_double(r.rec_img) + "," + format_double(r.total) + "," + format_double(r.accuracy) + "\n";
  }
  return out;
}

std::string idr_log_csv(const std::vector<IdrLogRow>& log) {
  std::string out = "step,l_idr\n";
  for (const auto& r : log) out += std::to_string(r.step) + "," + format_double(r.loss) + "\n";
  return out;
}

double mean_idr_loss(const Model& model, const Dataset& dataset, const std::vector<std::size_t>& indices,
                     std::uint64_t seed) {
  if (indices.empty()) throw std::invalid_argument("mean_idr_loss: no samples");
  ModelParams params = model.params;
  double total = 0.0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    Tape tape(&params);
    Var loss = idr_batch_loss(tape, model, dataset, {indices[i]}, seed, "eval.band", i);
    total += tape.scalar(loss);
  }
  return total / static_cast<double>(indices.size());
}

EvalReport evaluate(const Model& model, const Dataset& dataset, const std::vector<std::size_t>& indices,
                    const TrainConfig& config) {
  if (indices.empty()) throw std::invalid_argument("evaluate: no samples");
  if (model.arch.grid != dataset.config.size) throw std::runtime_error("evaluate: checkpoint grid does not match dataset");
  const bool pretraining = model.params.has_section(section::kImgEncoder);
  EvalReport report;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Sample& s = dataset.samples.at(indices[i]);
    EvalRow row;
    row.id = s.id;
    const RealGrid dirty = dirty_image(s.sparse);
    row.psnr_dirty = psnr(s.sky, dirty);
    row.ssim_dirty = ssim(s.sky, dirty);
    if (pretraining) {
      row.psnr_recon = row.psnr_dirty;
      row.ssim_recon = row.ssim_dirty;
    } else {
      auto rng = RngStream::named(config.seed, "eval.band", i);
      const auto rec = reconstruct_dense(model, s.sparse, rng);
      row.psnr_recon = psnr(s.sky, rec.image);
      row.ssim_recon = ssim(s.sky, rec.image);
    }
    report.rows.push_back(row);
  }
  if (pretraining) {
    for (const char* name : {section::kVisEncoder, section::kVisToImg, section::kImgToVis, section::kVisDecoder,
                             section::kImgDecoder}) {
      if (!model.params.has_section(name)) {
        throw std::runtime_error(std::string("evaluate: checkpoint lacks section ") + name);
      }
    }
    ModelParams params = model.params;
    Tape tape(&params);
    std::vector<double> rec_vis, rec_img;
    const ScmTerms t = scm_forward(tape, model, dataset, indices, config, "eval", 0, &rec_vis, &rec_img);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      auto& row = report.rows[i];
      row.accuracy = t.stats.row_accuracy[i];
      row.contrastive = t.stats.row_loss[i];
      row.rec_vis = rec_vis[i];
      row.rec_img = rec_img[i];
    }
  }
  report.finalize();
  return report;
}

std::vector<SweepRow> sweep_kappa(const TrainConfig& config, const Dataset& dataset,
                                  const std::vector<double>& kappas) {
  if (kappas.size() < 2) throw std::invalid_argument("sweep_kappa: need at least 2 kappa values");
  for (double k : kappas) {
    if (!std::isfinite(k) || k < 0.0) throw std::invalid_argument("sweep_kappa: kappa values must be >= 0");
  }
  std::vector<SweepRow> rows;
  for (double kappa : kappas) {
    TrainConfig c = config;
    c.loss.kappa = kappa;
    c.scm_stage = true;
    const auto result = run_scm(c, dataset);
    const std::size_t n = std::min(c.window, result.log.size());
    SweepRow row;
    row.kappa = kappa;
    for (std::size_t i = result.log.size() - n; i < result.log.size(); ++i) {
      const auto& r = result.log[i];
      row.accuracy += r.accuracy / static_cast<double>(n);
      row.contrastive += r.contrastive / static_cast<double>(n);
      row.rec_img += r.rec_img / static_cast<double>(n);
      row.rec_vis += r.rec_vis / static_cast<double>(n);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "kappa,acc,l_c,l_rec_i,l_rec_v\n";
  for (const auto& r : rows) {
    out += format_double(r.kappa) + "," + format_double(r.accuracy) + "," + format_double(r.contrastive) + "," +
           format_double(r.rec_img) + "," + format_double(r.rec_vis) + "\n";
  }
  return out;
}

}  // namespace uvrec
