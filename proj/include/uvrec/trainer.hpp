#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "uvrec/adam.hpp"
#include "uvrec/config.hpp"
#include "uvrec/dataset.hpp"
#include "uvrec/losses.hpp"
#include "uvrec/metrics.hpp"
#include "uvrec/nets.hpp"

namespace uvrec {

struct TrainConfig {
  std::size_t scm_steps = 500;
  std::size_t idr_steps = 1000;
  std::size_t batch = 8;
  double lr_scm = 1e-3;
  double lr_idr = 5e-3;
  std::uint64_t seed = 42;
  double mask_ratio = 0.5;
  LossConfig loss;
  bool task1_contrastive = true;
  bool task2_masking = true;
  bool scm_stage = true;
  bool idr_stage = true;
  std::string pretrain_data;
  std::string finetune_data;
  // capacity 0 means derive K from the dataset mask.
  ArchConfig arch{32, 8, 0, 64, 64, 64, {}};
  std::size_t window = 50;  // trailing steps averaged by the kappa sweep
  std::size_t bands = 0;    // 0: one band per image patch; otherwise must match

  void validate() const;
};

TrainConfig train_config_from(const KeyValues& kv);
void train_config_to(const TrainConfig& config, KeyValues& kv);

// Fills grid size, band capacity and per-band visibility scales from the dataset.
ArchConfig resolve_arch(const TrainConfig& config, const Dataset& dataset);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// 80/10/10 by position after a seeded shuffle.
Split split_dataset(std::size_t count, std::uint64_t seed);

struct ScmLogRow {
  std::size_t step = 0;
  double contrastive = 0.0;
  double rec_vis = 0.0;
  double rec_img = 0.0;
  double total = 0.0;
  double accuracy = 0.0;
};

struct IdrLogRow {
  std::size_t step = 0;
  double loss = 0.0;
};

struct ScmResult {
  Model model;
  std::vector<ScmLogRow> log;
};

struct IdrResult {
  Model model;
  std::vector<IdrLogRow> log;
};

// Self-supervised stage: contrastive alignment of pooled embeddings plus
// complementary-masked cross prediction and reconstruction of both
// modalities. Disabled tasks are still logged but leave the objective.
ScmResult run_scm(const TrainConfig& config, const Dataset& dataset);

// Reconstruction stage on E_v and G_v. With `init` the encoder starts from
// its E_v section; otherwise it is freshly initialized.
IdrResult run_idr(const TrainConfig& config, const Dataset& dataset, const Model* init);

std::string scm_log_csv(const std::vector<ScmLogRow>& log);
std::string idr_log_csv(const std::vector<IdrLogRow>& log);

// Mean reconstruction loss (before consistency) over the given samples.
double mean_idr_loss(const Model& model, const Dataset& dataset, const std::vector<std::size_t>& indices,
                     std::uint64_t seed);

// Dirty vs reconstructed image quality on the given samples. Checkpoints
// that still carry E_i are pretraining outputs: their "reconstruction" is
// the dirty image, and the pretext metrics are filled in.
EvalReport evaluate(const Model& model, const Dataset& dataset, const std::vector<std::size_t>& indices,
                    const TrainConfig& config);

struct SweepRow {
  double kappa = 0.0;
  double accuracy = 0.0;
  double contrastive = 0.0;
  double rec_img = 0.0;
  double rec_vis = 0.0;
};

std::vector<SweepRow> sweep_kappa(const TrainConfig& config, const Dataset& dataset,
                                  const std::vector<double>& kappas);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace uvrec
