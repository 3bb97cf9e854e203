#include <cmath>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "uvrec/trainer.hpp"

using namespace uvrec;

namespace {

const Dataset& tiny_dataset() {
  static const Dataset ds = [] {
    DatasetConfig c = default_dataset_config();
    c.count = 12;
    c.size = 16;
    return generate_dataset(c);
  }();
  return ds;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.scm_steps = 3;
  c.idr_steps = 3;
  c.batch = 4;
  c.arch.patch = 4;
  c.arch.d_model = 8;
  c.arch.hidden = 8;
  c.arch.recon_hidden = 8;
  return c;
}

}  // namespace

TEST_CASE("split is a seeded partition") {
  const Split s = split_dataset(200, 42);
  CHECK(s.train.size() == 160);
  CHECK(s.validation.size() == 20);
  CHECK(s.test.size() == 20);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.validation.begin(), s.validation.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 200);
  CHECK(split_dataset(200, 42).test == s.test);
  CHECK(split_dataset(200, 43).test != s.test);
  CHECK_THROWS(split_dataset(2, 1));
}

TEST_CASE("resolved architecture") {
  const ArchConfig a = resolve_arch(tiny_config(), tiny_dataset());
  CHECK(a.grid == 16);
  CHECK(a.tokens() == 16);
  CHECK(a.capacity == default_band_capacity(tiny_dataset().mask, 16));
  CHECK(a.band_scales.size() == 16);
  TrainConfig bad = tiny_config();
  bad.arch.patch = 5;
  CHECK_THROWS_AS(resolve_arch(bad, tiny_dataset()), std::invalid_argument);
  bad = tiny_config();
  bad.bands = 9;
  CHECK_THROWS_AS(resolve_arch(bad, tiny_dataset()), std::invalid_argument);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  TrainConfig c = tiny_config();
  c.lr_scm = 0.0;
  c.lr_idr = 0.0;
  const ScmResult scm = run_scm(c, tiny_dataset());
  const Model fresh = init_model(scm.model.arch, c.seed, scm_sections());
  CHECK(checkpoint_bytes(scm.model) == checkpoint_bytes(fresh));
  REQUIRE(scm.log.size() == 3);
  for (const auto& row : scm.log) CHECK(std::isfinite(row.total));

  const IdrResult idr = run_idr(c, tiny_dataset(), nullptr);
  CHECK(checkpoint_bytes(idr.model) == checkpoint_bytes(init_model(idr.model.arch, c.seed, idr_sections())));
  // Fresh G_v predicts zeros, so every batch loss is the zero-filled loss of its samples.
  for (const auto& row : idr.log) CHECK(row.loss > 0.0);
}

TEST_CASE("runs are deterministic") {
  const TrainConfig c = tiny_config();
  const ScmResult a = run_scm(c, tiny_dataset()), b = run_scm(c, tiny_dataset());
  CHECK(scm_log_csv(a.log) == scm_log_csv(b.log));
  CHECK(checkpoint_bytes(a.model) == checkpoint_bytes(b.model));
  const IdrResult x = run_idr(c, tiny_dataset(), &a.model), y = run_idr(c, tiny_dataset(), &a.model);
  CHECK(idr_log_csv(x.log) == idr_log_csv(y.log));
  CHECK(checkpoint_bytes(x.model) == checkpoint_bytes(y.model));
}

TEST_CASE("disabled tasks stay logged but leave the objective") {
  TrainConfig c = tiny_config();
  c.task1_contrastive = false;
  for (const auto& row : run_scm(c, tiny_dataset()).log) {
    CHECK(row.contrastive > 0.0);
    CHECK(row.total == row.rec_vis + row.rec_img);
  }
  c = tiny_config();
  c.loss.kappa = 0.0;
  for (const auto& row : run_scm(c, tiny_dataset()).log) CHECK(row.total == doctest::Approx(row.rec_vis + row.rec_img));
  c = tiny_config();
  c.task2_masking = false;
  for (const auto& row : run_scm(c, tiny_dataset()).log) CHECK(row.total == doctest::Approx(c.loss.kappa * row.contrastive));
  c.task1_contrastive = false;
  CHECK_THROWS_AS(run_scm(c, tiny_dataset()), std::invalid_argument);
}

TEST_CASE("fine-tuning starts from the pretrained visibility encoder") {
  TrainConfig c = tiny_config();
  const ScmResult scm = run_scm(c, tiny_dataset());
  c.idr_steps = 0;
  const IdrResult idr = run_idr(c, tiny_dataset(), &scm.model);
  CHECK(idr.model.params.flatten(section::kVisEncoder) == scm.model.params.flatten(section::kVisEncoder));
  CHECK_FALSE(idr.model.params.has_section(section::kImgEncoder));
}

TEST_CASE("fine-tuning needs dense ground truth") {
  Dataset ds = tiny_dataset();
  ds.samples[3].dense.reset();
  CHECK_THROWS_AS(run_idr(tiny_config(), ds, nullptr), std::runtime_error);
}

TEST_CASE("config parsing and validation") {
  const auto kv = KeyValues::parse("scm_steps = 7\nkappa = 0.5\ntask1_contrastive = off\nd_model = 16\n");
  const TrainConfig c = train_config_from(kv);
  CHECK(c.scm_steps == 7);
  CHECK(c.loss.kappa == 0.5);
  CHECK_FALSE(c.task1_contrastive);
  CHECK(c.arch.d_model == 16);
  KeyValues back;
  train_config_to(c, back);
  const TrainConfig again = train_config_from(KeyValues::parse(back.to_text()));
  CHECK(again.scm_steps == 7);
  CHECK(again.arch.d_model == 16);
  CHECK_THROWS(train_config_from(KeyValues::parse("kappa = -1\n")));
  CHECK_THROWS(train_config_from(KeyValues::parse("mask_ratio = 1\n")));
}

TEST_CASE("kappa sweep") {
  TrainConfig c = tiny_config();
  c.window = 2;
  CHECK_THROWS_AS(sweep_kappa(c, tiny_dataset(), {0.1}), std::invalid_argument);
  CHECK_THROWS_AS(sweep_kappa(c, tiny_dataset(), {0.1, -1.0}), std::invalid_argument);
  const auto rows = sweep_kappa(c, tiny_dataset(), {0.0, 1.0});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].kappa == 0.0);
  CHECK(rows[1].kappa == 1.0);
  CHECK(sweep_csv(rows).rfind("kappa,", 0) == 0);
}

TEST_CASE("evaluation of a pretraining checkpoint reports pretext metrics") {
  const TrainConfig c = tiny_config();
  const ScmResult scm = run_scm(c, tiny_dataset());
  const auto split = split_dataset(12, c.seed);
  EvalReport rep = evaluate(scm.model, tiny_dataset(), split.test, c);
  REQUIRE(rep.rows.size() == split.test.size());
  CHECK(rep.rows[0].accuracy.has_value());
  CHECK(rep.rows[0].psnr_recon == rep.rows[0].psnr_dirty);

  const IdrResult idr = run_idr(c, tiny_dataset(), nullptr);
  rep = evaluate(idr.model, tiny_dataset(), split.test, c);
  CHECK_FALSE(rep.rows[0].accuracy.has_value());
  CHECK(std::isfinite(rep.mean.psnr_recon));
  CHECK(mean_idr_loss(idr.model, tiny_dataset(), split.test, c.seed) > 0.0);
}
