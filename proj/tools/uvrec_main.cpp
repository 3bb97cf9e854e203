// Command-line entry point: dataset synthesis, two-stage training,
// reconstruction, evaluation, kappa sweeps and embedding export.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#include <fcntl.h>
#ifdef __GLIBC__
#include <malloc.h>
#endif
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "uvrec/config.hpp"
#include "uvrec/dataset.hpp"
#include "uvrec/formats.hpp"
#include "uvrec/metrics.hpp"
#include "uvrec/nets.hpp"
#include "uvrec/trainer.hpp"

namespace fs = std::filesystem;
using namespace uvrec;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exclusive lock file guarding an output location for one command.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& target) : path_(target.string() + ".lock") {
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) throw std::runtime_error("output '" + target.string() + "' is locked by " + path_.string());
  }
  ~OutputLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

KeyValues load_config(const std::string& path, bool required) {
  if (path.empty()) {
    if (required) throw UsageError("--config is required");
    return KeyValues::parse("", "<defaults>");
  }
  if (!fs::exists(path)) throw UsageError("config file '" + path + "' does not exist");
  return KeyValues::load(path);
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

TrainConfig train_config(const Common& common) {
  const auto kv = load_config(common.config, false);
  // Run configs may also carry dataset keys; only training keys are read here.
  TrainConfig c = train_config_from(kv);
  if (common.seed) c.seed = *common.seed;
  return c;
}

fs::path data_path(const std::string& flag, const std::string& fallback, const char* what) {
  const std::string p = flag.empty() ? fallback : flag;
  if (p.empty()) throw UsageError(std::string("--data is required (or set ") + what + " in the config)");
  return p;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Training allocates many short-lived megabyte tensors; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  CLI::App app{"uvrec: sparse interferometric visibility reconstruction with cross-domain pretraining"};
  app.require_subcommand(1);

  Common synth_common;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth-dataset", "Synthesize skies, a uv mask and sparse/dense visibilities");
  synth->add_option("--config", synth_common.config, "Dataset config (key = value)");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_common.seed, "Override the config seed");

  Common pre_common;
  std::string pre_data, pre_out;
  bool no_task1 = false, no_task2 = false;
  std::optional<double> pre_kappa;
  std::optional<std::size_t> pre_steps;
  auto* pretrain = app.add_subcommand("pretrain", "Self-supervised pretraining of both encoders");
  pretrain->add_option("--config", pre_common.config, "Run config (key = value)");
  pretrain->add_option("--data", pre_data, "Dataset directory (default: pretrain_data from config)");
  pretrain->add_option("--out", pre_out, "Output directory for scm.ckpt and scm_log.csv")->required();
  pretrain->add_option("--seed", pre_common.seed, "Override the config seed");
  pretrain->add_option("--kappa", pre_kappa, "Contrastive loss weight");
  pretrain->add_option("--steps", pre_steps, "Number of pretraining steps");
  pretrain->add_flag("--no-task1", no_task1, "Drop the contrastive term from the objective");
  pretrain->add_flag("--no-task2", no_task2, "Drop the masked reconstruction terms from the objective");

  Common fine_common;
  std::string fine_data, fine_out, fine_init;
  std::optional<std::size_t> fine_steps;
  auto* finetune = app.add_subcommand("finetune", "Train the visibility encoder and reconstruction network");
  finetune->add_option("--config", fine_common.config, "Run config (key = value)");
  finetune->add_option("--data", fine_data, "Dataset directory (default: finetune_data from config)");
  finetune->add_option("--init", fine_init, "Pretraining checkpoint, or 'none'")->required();
  finetune->add_option("--out", fine_out, "Output directory for idr.ckpt, idr_log.csv, idr_summary.txt")->required();
  finetune->add_option("--seed", fine_common.seed, "Override the config seed");
  finetune->add_option("--steps", fine_steps, "Number of fine-tuning steps");

  std::string rec_ckpt, rec_vis, rec_mask, rec_out;
  std::uint64_t rec_seed = 42;
  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct dense visibilities and an image");
  reconstruct->add_option("--ckpt", rec_ckpt, "Fine-tuned checkpoint")->required();
  reconstruct->add_option("--vis", rec_vis, "Sparse FVIS file")->required();
  reconstruct->add_option("--mask", rec_mask, "FMSK sampling mask")->required();
  reconstruct->add_option("--out", rec_out, "Output prefix; writes <prefix>.fvis and <prefix>.fimg")->required();
  reconstruct->add_option("--seed", rec_seed, "Seed for band subsampling");

  Common eval_common;
  std::string eval_ckpt, eval_data, eval_out, eval_split = "test";
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare dirty and reconstructed images with the truth");
  evaluate_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint to evaluate")->required();
  evaluate_cmd->add_option("--data", eval_data, "Dataset directory")->required();
  evaluate_cmd->add_option("--out", eval_out, "Report CSV")->required();
  evaluate_cmd->add_option("--config", eval_common.config, "Run config (seed, tau, mask ratio)");
  evaluate_cmd->add_option("--seed", eval_common.seed, "Override the config seed");
  evaluate_cmd->add_option("--split", eval_split, "Samples to score")->check(CLI::IsMember({"test", "validation", "train", "all"}));

  Common sweep_common;
  std::string sweep_data, sweep_out, sweep_values;
  auto* sweep = app.add_subcommand("sweep-kappa", "Pretrain once per contrastive weight");
  sweep->add_option("--config", sweep_common.config, "Run config");
  sweep->add_option("--data", sweep_data, "Dataset directory (default: pretrain_data from config)");
  sweep->add_option("--values", sweep_values, "Comma-separated kappa values")->required();
  sweep->add_option("--out", sweep_out, "Output CSV")->required();
  sweep->add_option("--seed", sweep_common.seed, "Override the config seed");

  std::string emb_ckpt, emb_data, emb_out;
  std::uint64_t emb_seed = 42;
  auto* exporter = app.add_subcommand("export-embeddings", "Write pooled embeddings of every sample");
  exporter->add_option("--ckpt", emb_ckpt, "Pretraining checkpoint")->required();
  exporter->add_option("--data", emb_data, "Dataset directory")->required();
  exporter->add_option("--out", emb_out, "Output CSV")->required();
  exporter->add_option("--seed", emb_seed, "Seed for band subsampling");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      const auto kv = load_config(synth_common.config, true);
      auto config = dataset_config_from(kv);
      if (synth_common.seed) config.seed = *synth_common.seed;
      kv.reject_unused();
      OutputLock lock(synth_out);
      const auto ds = generate_dataset(config);
      write_dataset(ds, synth_out);
      std::cout << "wrote " << ds.samples.size() << " samples to " << synth_out << " (mask coverage "
                << format_metric(ds.mask.coverage()) << ")\n";
    } else if (*pretrain) {
      auto config = train_config(pre_common);
      if (no_task1) config.task1_contrastive = false;
      if (no_task2) config.task2_masking = false;
      if (pre_kappa) config.loss.kappa = *pre_kappa;
      if (pre_steps) config.scm_steps = *pre_steps;
      config.scm_stage = true;
      config.validate();
      if (!config.task1_contrastive && !config.task2_masking) throw UsageError("both pretext tasks are disabled");
      const auto ds = load_dataset(data_path(pre_data, config.pretrain_data, "pretrain_data"));
      OutputLock lock(pre_out);
      const auto result = run_scm(config, ds);
      fs::create_directories(pre_out);
      save_checkpoint(fs::path(pre_out) / "scm.ckpt", result.model);
      write_text(fs::path(pre_out) / "scm_log.csv", scm_log_csv(result.log));
      const auto& last = result.log.back();
      std::cout << "pretrained " << result.log.size() << " steps; final acc " << format_metric(last.accuracy)
                << ", L_scm " << format_metric(last.total) << "\n";
    } else if (*finetune) {
      auto config = train_config(fine_common);
      if (fine_steps) config.idr_steps = *fine_steps;
      const auto ds = load_dataset(data_path(fine_data, config.finetune_data, "finetune_data"));
      std::optional<Model> init;
      if (fine_init != "none") init = load_checkpoint(fine_init);
      OutputLock lock(fine_out);
      const auto result = run_idr(config, ds, init ? &*init : nullptr);
      const auto split = split_dataset(ds.samples.size(), config.seed);
      const double test_loss = mean_idr_loss(result.model, ds, split.test, config.seed);
      fs::create_directories(fine_out);
      save_checkpoint(fs::path(fine_out) / "idr.ckpt", result.model);
      write_text(fs::path(fine_out) / "idr_log.csv", idr_log_csv(result.log));
      write_text(fs::path(fine_out) / "idr_summary.txt",
                 "init = " + fine_init + "\nsteps = " + std::to_string(result.log.size()) +
                     "\ntest_l_idr = " + format_double(test_loss) + "\n");
      std::cout << "fine-tuned " << result.log.size() << " steps; test L_idr " << format_metric(test_loss) << "\n";
    } else if (*reconstruct) {
      const auto model = load_checkpoint(rec_ckpt);
      const auto vis = read_fvis(rec_vis);
      if (vis.kind != VisKind::Sparse) throw std::runtime_error("--vis must be a sparse FVIS file");
      SparseVisibility sparse;
      sparse.grid = vis.grid;
      sparse.mask = read_fmsk(rec_mask);
      if (sparse.mask.height != sparse.grid.height || sparse.mask.width != sparse.grid.width) {
        throw std::runtime_error("mask and visibility shapes differ");
      }
      auto rng = RngStream::named(rec_seed, "reconstruct.band");
      const auto rec = reconstruct_dense(model, sparse, rng);
      OutputLock lock(rec_out);
      write_fvis(rec_out + ".fvis", rec.dense, VisKind::Dense);
      write_fimg(rec_out + ".fimg", rec.image);
      std::cout << "wrote " << rec_out << ".fvis and " << rec_out << ".fimg\n";
    } else if (*evaluate_cmd) {
      const auto config = train_config(eval_common);
      const auto model = load_checkpoint(eval_ckpt);
      const auto ds = load_dataset(eval_data);
      std::vector<std::size_t> indices;
      if (eval_split == "all") {
        for (std::size_t i = 0; i < ds.samples.size(); ++i) indices.push_back(i);
      } else {
        const auto split = split_dataset(ds.samples.size(), config.seed);
        indices = eval_split == "test" ? split.test : eval_split == "validation" ? split.validation : split.train;
      }
      const auto report = evaluate(model, ds, indices, config);
      OutputLock lock(eval_out);
      write_text(eval_out, report.to_csv());
      std::cout << "mean PSNR dirty " << format_metric(report.mean.psnr_dirty) << " dB, reconstructed "
                << format_metric(report.mean.psnr_recon) << " dB; SSIM dirty " << format_metric(report.mean.ssim_dirty)
                << ", reconstructed " << format_metric(report.mean.ssim_recon) << "\n";
    } else if (*sweep) {
      const auto config = train_config(sweep_common);
      const auto values = KeyValues::parse("values = " + sweep_values, "--values").get_doubles("values");
      if (values.size() < 2) throw UsageError("--values needs at least two kappa values");
      for (double k : values) {
        if (k < 0.0) throw UsageError("kappa values must be >= 0");
      }
      const auto ds = load_dataset(data_path(sweep_data, config.pretrain_data, "pretrain_data"));
      const auto rows = sweep_kappa(config, ds, values);
      OutputLock lock(sweep_out);
      write_text(sweep_out, sweep_csv(rows));
      std::cout << "swept " << rows.size() << " kappa values\n";
    } else if (*exporter) {
      const auto model = load_checkpoint(emb_ckpt);
      const auto ds = load_dataset(emb_data);
      const auto csv = export_embeddings(model, ds, emb_seed);
      OutputLock lock(emb_out);
      write_text(emb_out, csv);
      std::cout << "exported " << ds.samples.size() << " embeddings\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
