// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cli_util.hpp"
#include "grad_suite.hpp"
#include "oracles.hpp"
#include "scratch.hpp"
#include "uvrec/formats.hpp"
#include "uvrec/losses.hpp"
#include "uvrec/metrics.hpp"
#include "uvrec/nets.hpp"
#include "uvrec/tokenizer.hpp"

namespace fs = std::filesystem;
using namespace uvrec;
using Clock = std::chrono::steady_clock;

namespace {

// Regression constants from the first canonical run.
constexpr double kFrozenPsnrDirty = 9.230045785;
constexpr double kFrozenPsnrRecon = 14.92363101;
constexpr double kFrozenSsimDirty = 0.2048066869;
constexpr double kFrozenSsimRecon = 0.2755437519;
constexpr double kFrozenIdrFull = 0.002652592366569304;
constexpr double kFrozenIdrAblation = 0.0027951527443811621;

const std::string kCli = UVREC_CLI;
const fs::path kConfigs = UVREC_CONFIGS;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << name;
  if (!o.detail.empty()) std::cout << ": " << o.detail;
  std::cout << std::endl;
  if (!o.pass) ++failures;
}

template <class F>
void run(int id, const std::string& name, F&& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, name, o);
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

bool near(double a, double b, double rel) { return std::abs(a - b) <= rel * std::abs(b); }

// Separable direct DFT with precomputed twiddles: each axis is an explicit
// O(n^2) sum, with no fast factorization.
ComplexGrid twiddle_dft(const ComplexGrid& g, int sign) {
  const std::size_t h = g.height, w = g.width;
  const auto table = [sign](std::size_t n) {
    std::vector<std::complex<double>> t(n * n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t x = 0; x < n; ++x) {
        const double kk = static_cast<double>(k) - static_cast<double>(n / 2);
        const double xx = static_cast<double>(x) - static_cast<double>(n / 2);
        t[k * n + x] = std::polar(1.0 / std::sqrt(static_cast<double>(n)),
                                  sign * 2.0 * std::numbers::pi * std::fmod(kk * xx, static_cast<double>(n)) /
                                      static_cast<double>(n));
      }
    return t;
  };
  const auto th = table(h), tw = table(w);
  std::vector<std::complex<double>> rows(h * w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t v = 0; v < w; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t c = 0; c < w; ++c) acc += g.at(r, c) * tw[v * w + c];
      rows[r * w + v] = acc;
    }
  ComplexGrid out(h, w);
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t r = 0; r < h; ++r) acc += rows[r * w + v] * th[u * h + r];
      out.set(u, v, acc);
    }
  return out;
}

Outcome fourier_oracle() {
  RngStream rng(2024, 1);
  const std::size_t sizes[] = {8, 16, 32, 64};
  double worst_fwd = 0, worst_inv = 0, worst_trip = 0, worst_parseval = 0, fft_time = 0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t h = sizes[rng.below(4)], w = sizes[rng.below(4)];
    const ComplexGrid g = oracle::random_grid(h, w, rng);
    const auto t0 = Clock::now();
    const ComplexGrid f = fft2(g), i = ifft2(g), back = ifft2(f);
    fft_time += seconds_since(t0);
    worst_fwd = std::max(worst_fwd, oracle::relative_error(f, twiddle_dft(g, -1)));
    worst_inv = std::max(worst_inv, oracle::relative_error(i, twiddle_dft(g, +1)));
    worst_trip = std::max(worst_trip, oracle::relative_error(back, g));
    worst_parseval = std::max(worst_parseval, std::abs(oracle::energy(f) - oracle::energy(g)) / oracle::energy(g));
  }
  // Spot-check the separable oracle against the plain double sum.
  RngStream spot(2024, 2);
  const ComplexGrid s = oracle::random_grid(16, 8, spot);
  const double oracle_gap = oracle::relative_error(twiddle_dft(s, -1), oracle::direct_dft(s, -1));
  const bool pass = worst_fwd <= 1e-10 && worst_inv <= 1e-10 && worst_trip <= 1e-10 && worst_parseval <= 1e-10 &&
                    oracle_gap <= 1e-12 && fft_time < 5.0;
  return {pass, "fwd " + fmt(worst_fwd, 3) + ", inv " + fmt(worst_inv, 3) + ", round trip " + fmt(worst_trip, 3) +
                    ", Parseval " + fmt(worst_parseval, 3) + ", " + fmt(fft_time, 3) + " s"};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string where;
  std::size_t checked = 0, sections = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const auto& [name, rep] : oracle::gradient_suite(seed)) {
      checked += rep.checked;
      ++sections;
      if (rep.checked == 0) return {false, "section " + name + " has no parameters"};
      if (rep.worst > worst) {
        worst = rep.worst;
        where = rep.where + " (seed " + std::to_string(seed) + ")";
      }
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-4 && sections == 21 && t < 60.0,
          std::to_string(sections) + " sections, " + std::to_string(checked) + " entries, worst " + fmt(worst, 3) +
              " at " + where + ", " + fmt(t, 3) + " s"};
}

Outcome loss_closed_forms() {
  Tensor one = Tensor::matrix(1, 3);
  one(0, 0) = 1.0;
  const double c1 = contrastive_loss(one, one, 0.07).total;

  Tensor pair = Tensor::matrix(2, 2);
  pair(0, 0) = pair(1, 1) = 1.0;
  const double c2 = contrastive_loss(pair, pair, 1.0).total;
  const double c2_expect = std::log(1.0 + std::exp(-1.0));

  double idr_gap = 0;
  for (double d : {0.05, 0.3, 1.7}) {
    Tensor target = Tensor::matrix(25, 2), est = Tensor::matrix(25, 2);
    for (std::size_t i = 0; i < 25; ++i) {
      const double a = 0.4 * static_cast<double>(i), b = 1.3 * static_cast<double>(i);
      target(i, 0) = 0.8 * std::cos(a);
      target(i, 1) = 0.8 * std::sin(a);
      est(i, 0) = target(i, 0) + d * std::cos(b);
      est(i, 1) = target(i, 1) + d * std::sin(b);
    }
    idr_gap = std::max(idr_gap, std::abs(idr_loss(est, target) - 2.0 * d * d * d));
  }

  double mse_gap = 0;
  RngStream rng(31, 0);
  for (double c : {-0.25, 0.1, 3.0}) {
    Tensor x = Tensor::matrix(11, 4), y = Tensor::matrix(11, 4);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.normal();
      y[i] = x[i] + c;
    }
    mse_gap = std::max(mse_gap, std::abs(mse(x, y) - c * c));
  }
  const bool pass = c1 == 0.0 && std::abs(c2 - c2_expect) <= 1e-9 && idr_gap <= 1e-12 && mse_gap <= 1e-12;
  return {pass, "n=1 " + fmt(c1) + ", n=2 gap " + fmt(std::abs(c2 - c2_expect), 3) + ", IDR gap " + fmt(idr_gap, 3) +
                    ", MSE gap " + fmt(mse_gap, 3)};
}

Outcome masking_invariants() {
  RngStream pick(404, 0);
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + pick.below(255);
    double ratio = pick.uniform(0.02, 0.98);
    if (masked_count(n, ratio) == 0) ratio = 1.0 / static_cast<double>(n);
    if (masked_count(n, ratio) == n) ratio = 1.0 - 1.0 / static_cast<double>(n);
    auto rng = RngStream::named(404, "omega", static_cast<std::uint64_t>(trial));
    const MaskVector m = sample_mask(n, ratio, rng);
    const auto hidden_img = m.true_indices(), hidden_vis = m.false_indices();
    bool ok = hidden_img.size() == masked_count(n, ratio) && hidden_img.size() + hidden_vis.size() == n;
    std::vector<int> seen(n, 0);
    for (auto i : hidden_img) ++seen[i];
    for (auto i : hidden_vis) ++seen[i];
    for (int s : seen) ok = ok && s == 1;

    const std::size_t dv = 1 + pick.below(6), di = 1 + pick.below(6);
    Tensor vis = Tensor::matrix(n, dv), img = Tensor::matrix(n, di);
    for (double& v : vis.raw()) v = rng.normal();
    for (double& v : img.raw()) v = rng.normal();
    const VisibleSets sets = apply_complementary(vis, img, m);
    ok = ok && sets.vis_index == hidden_img && sets.img_index == hidden_vis;
    Tensor vis_hidden = Tensor::matrix(hidden_vis.size(), dv), img_hidden = Tensor::matrix(hidden_img.size(), di);
    for (std::size_t i = 0; i < hidden_vis.size(); ++i)
      for (std::size_t j = 0; j < dv; ++j) vis_hidden(i, j) = vis(hidden_vis[i], j);
    for (std::size_t i = 0; i < hidden_img.size(); ++i)
      for (std::size_t j = 0; j < di; ++j) img_hidden(i, j) = img(hidden_img[i], j);
    ok = ok && merge_rows(sets.vis_index, sets.vis_tokens, hidden_vis, vis_hidden, n).raw() == vis.raw();
    ok = ok && merge_rows(sets.img_index, sets.img_tokens, hidden_img, img_hidden, n).raw() == img.raw();

    Tape tape;
    const std::vector<Var> parts{tape.constant(sets.img_tokens), tape.constant(img_hidden)};
    const Var merged = tape.gather_rows(tape.concat_rows(parts), merge_order(sets.img_index, hidden_img, n));
    ok = ok && tape.value(merged).raw() == img.raw();
    if (!ok) ++bad;
  }
  return {bad == 0, "1000 masks, " + std::to_string(bad) + " violations"};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  for (std::string cell; std::getline(s, cell, ',');) out.push_back(cell);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) rows.push_back(split_csv(line));
  return rows;
}

double summary_value(const fs::path& path, const std::string& key) {
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(key + " = ", 0) == 0) return std::stod(line.substr(key.size() + 3));
  }
  throw std::runtime_error(key + " missing from " + path.string());
}

struct Canonical {
  fs::path data, run;
};

// synth -> pretrain -> finetune -> evaluate under the canonical configs.
void canonical_run(const Canonical& c, const fs::path& log_dir) {
  const std::string data_cfg = (kConfigs / "canonical_data.cfg").string();
  const std::string run_cfg = (kConfigs / "canonical_run.cfg").string();
  const auto step = [&](const std::string& tag, const std::vector<std::string>& args) {
    const fs::path log = log_dir / (tag + ".log");
    if (run_cli(kCli, args, log.string()) != 0) throw std::runtime_error(tag + " failed, see " + log.string());
  };
  step("synth", {"synth-dataset", "--config", data_cfg, "--out", c.data.string()});
  step("pretrain", {"pretrain", "--config", run_cfg, "--data", c.data.string(), "--out", c.run.string()});
  step("finetune", {"finetune", "--config", run_cfg, "--data", c.data.string(), "--init",
                    (c.run / "scm.ckpt").string(), "--out", c.run.string()});
  step("evaluate", {"evaluate", "--config", run_cfg, "--data", c.data.string(), "--ckpt",
                    (c.run / "idr.ckpt").string(), "--out", (c.run / "eval.csv").string()});
}

Outcome desk_run(const Scratch& dir, double& elapsed) {
  const Canonical c{dir / "data", dir / "full"};
  const fs::path ablation = dir / "ablation";
  const auto t0 = Clock::now();
  canonical_run(c, dir.path());
  const int rc = run_cli(kCli,
                         {"finetune", "--config", (kConfigs / "canonical_run.cfg").string(), "--data", c.data.string(),
                          "--init", "none", "--out", ablation.string()},
                         (dir / "ablation.log").string());
  elapsed = seconds_since(t0);
  if (rc != 0) return {false, "ablation finetune exited " + std::to_string(rc)};

  const auto log = read_csv(c.run / "scm_log.csv");
  if (log.size() < 51 || log[0].back() != "acc") return {false, "scm_log.csv too short or without acc column"};
  double acc = 0;
  for (std::size_t i = log.size() - 50; i < log.size(); ++i) acc += std::stod(log[i].back()) / 50.0;

  const auto eval = read_csv(c.run / "eval.csv");
  if (eval.back().size() != 5 || eval.back()[0] != "mean") return {false, "eval.csv has no mean row"};
  const double psnr_dirty = std::stod(eval.back()[1]), ssim_dirty = std::stod(eval.back()[2]);
  const double psnr_recon = std::stod(eval.back()[3]), ssim_recon = std::stod(eval.back()[4]);
  const double idr_full = summary_value(c.run / "idr_summary.txt", "test_l_idr");
  const double idr_ablation = summary_value(ablation / "idr_summary.txt", "test_l_idr");

  const bool a = acc >= 0.90;
  const bool b = psnr_recon >= psnr_dirty + 3.0 && ssim_recon >= ssim_dirty + 0.05;
  const bool c3 = idr_ablation >= idr_full;
  const bool frozen = near(psnr_dirty, kFrozenPsnrDirty, 1e-8) && near(psnr_recon, kFrozenPsnrRecon, 1e-8) &&
                      near(ssim_dirty, kFrozenSsimDirty, 1e-8) && near(ssim_recon, kFrozenSsimRecon, 1e-8) &&
                      near(idr_full, kFrozenIdrFull, 1e-12) && near(idr_ablation, kFrozenIdrAblation, 1e-12);
  const bool fast = elapsed <= 600.0;
  std::string detail = "acc " + fmt(acc, 4) + (a ? "" : " [<0.90]") + "; PSNR " + fmt(psnr_dirty, 5) + " -> " +
                       fmt(psnr_recon, 5) + " dB, SSIM " + fmt(ssim_dirty, 4) + " -> " + fmt(ssim_recon, 4) +
                       (b ? "" : " [gap too small]") + "; L_idr full " + fmt(idr_full, 5) + " vs ablation " +
                       fmt(idr_ablation, 5) + (c3 ? "" : " [ordering]") + "; frozen constants " +
                       (frozen ? "match" : "DIFFER") + "; " + fmt(elapsed, 4) + " s" + (fast ? "" : " [>600 s]");
  return {a && b && c3 && frozen && fast, detail};
}

Outcome determinism(const Scratch& first, const Scratch& second) {
  canonical_run({second / "data", second / "full"}, second.path());
  std::vector<std::string> differ;
  std::size_t compared = 0;
  const auto same = [&](const fs::path& rel) {
    ++compared;
    if (read_file_bytes(first / rel) != read_file_bytes(second / rel)) differ.push_back(rel.string());
  };
  for (const char* f : {"scm.ckpt", "scm_log.csv", "idr.ckpt", "idr_log.csv", "eval.csv"}) same(fs::path("full") / f);
  for (const auto& e : fs::directory_iterator(first / "data")) same(fs::path("data") / e.path().filename());
  if (summary_value(first / "full" / "idr_summary.txt", "test_l_idr") !=
      summary_value(second / "full" / "idr_summary.txt", "test_l_idr"))
    differ.push_back("idr_summary.txt test_l_idr");
  std::string detail = std::to_string(compared) + " files compared";
  for (const auto& d : differ) detail += ", differs: " + d;
  return {differ.empty() && compared > 5, detail};
}

Outcome format_round_trips(const Scratch& canon) {
  Scratch dir("accept_formats");
  RngStream rng(77, 0);
  std::vector<std::string> broken;

  RealGrid img(16, 32);
  for (double& v : img.values) v = static_cast<float>(rng.uniform());
  write_fimg(dir / "a.fimg", img);
  write_fimg(dir / "b.fimg", read_fimg(dir / "a.fimg"));
  if (read_fimg(dir / "a.fimg").values != img.values ||
      read_file_bytes(dir / "a.fimg") != read_file_bytes(dir / "b.fimg"))
    broken.push_back("FIMG");

  ComplexGrid g(32, 16);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.re[i] = static_cast<float>(rng.normal());
    g.im[i] = static_cast<float>(rng.normal());
  }
  for (VisKind kind : {VisKind::Sparse, VisKind::Dense}) {
    write_fvis(dir / "a.fvis", g, kind);
    const VisFile f = read_fvis(dir / "a.fvis");
    write_fvis(dir / "b.fvis", f.grid, f.kind);
    if (f.kind != kind || f.grid.re != g.re || f.grid.im != g.im ||
        read_file_bytes(dir / "a.fvis") != read_file_bytes(dir / "b.fvis"))
      broken.push_back("FVIS");
  }

  UVMask mask(16, 16);
  for (std::size_t i = 0; i < mask.size(); ++i) mask.bits[i] = rng.uniform() < 0.3 ? 1 : 0;
  write_fmsk(dir / "a.fmsk", mask);
  write_fmsk(dir / "b.fmsk", read_fmsk(dir / "a.fmsk"));
  if (read_fmsk(dir / "a.fmsk").bits != mask.bits || read_file_bytes(dir / "a.fmsk") != read_file_bytes(dir / "b.fmsk"))
    broken.push_back("FMSK");

  const fs::path ckpt = canon / "full" / "idr.ckpt";
  save_checkpoint(dir / "a.ckpt", load_checkpoint(ckpt));
  if (read_file_bytes(dir / "a.ckpt") != read_file_bytes(ckpt)) broken.push_back("CKPT");

  // Corrupted inputs through the command-line tool.
  const fs::path data = canon / "data";
  const auto corrupt = [&](const fs::path& src, const fs::path& dst, bool magic) {
    auto bytes = read_file_bytes(src);
    if (magic)
      bytes[0] ^= 0x20;
    else
      bytes.resize(bytes.size() - 3);
    write_file_bytes(dst, bytes);
  };
  int cli_cases = 0;
  const auto expect_one = [&](const std::string& tag, const std::vector<std::string>& args) {
    ++cli_cases;
    const int rc = run_cli(kCli, args);
    if (rc != 1) broken.push_back(tag + " exit " + std::to_string(rc));
  };
  for (bool magic : {true, false}) {
    const std::string kind = magic ? "magic" : "length";
    corrupt(ckpt, dir / "bad.ckpt", magic);
    expect_one("ckpt " + kind, {"reconstruct", "--ckpt", (dir / "bad.ckpt").string(), "--vis",
                                (data / "vis_0000.fvis").string(), "--mask", (data / "mask.fmsk").string(), "--out",
                                (dir / "r").string()});
    corrupt(data / "vis_0000.fvis", dir / "bad.fvis", magic);
    expect_one("fvis " + kind, {"reconstruct", "--ckpt", ckpt.string(), "--vis", (dir / "bad.fvis").string(),
                                "--mask", (data / "mask.fmsk").string(), "--out", (dir / "r").string()});
    corrupt(data / "mask.fmsk", dir / "bad.fmsk", magic);
    expect_one("fmsk " + kind, {"reconstruct", "--ckpt", ckpt.string(), "--vis", (data / "vis_0000.fvis").string(),
                                "--mask", (dir / "bad.fmsk").string(), "--out", (dir / "r").string()});
    const fs::path copy = dir / ("data_" + kind);
    fs::copy(data, copy);
    corrupt(data / "sky_0003.fimg", copy / "sky_0003.fimg", magic);
    expect_one("fimg " + kind, {"evaluate", "--ckpt", ckpt.string(), "--data", copy.string(), "--out",
                                (dir / "e.csv").string(), "--split", "all"});
  }
  std::string detail = "4 formats, " + std::to_string(cli_cases) + " corrupted inputs";
  for (const auto& b : broken) detail += ", broken: " + b;
  return {broken.empty(), detail};
}

Outcome ssim_oracle() {
  RngStream rng(88, 0);
  double worst = 0;
  for (int k = 0; k < 20; ++k) {
    RealGrid x(16, 16), y(16, 16);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x.values[i] = rng.uniform();
      y.values[i] = std::clamp(x.values[i] + 0.3 * rng.normal(), 0.0, 1.0);
    }
    worst = std::max(worst, std::abs(ssim(x, y) - oracle::direct_ssim(x, y)));
  }
  return {worst <= 1e-10, "20 pairs, worst gap " + fmt(worst, 3)};
}

}  // namespace

int main() {
  std::cout << std::unitbuf;
  run(1, "Fourier oracle", fourier_oracle);
  run(2, "gradient suite", gradient_suite);
  run(3, "loss closed forms", loss_closed_forms);
  run(4, "masking invariants", masking_invariants);

  Scratch canon("accept_canon");
  double elapsed = 0;
  bool canon_ok = false;
  run(5, "desk-scale canonical run", [&] {
    Outcome o = desk_run(canon, elapsed);
    canon_ok = fs::exists(canon / "full" / "eval.csv");
    return o;
  });
  run(6, "determinism", [&]() -> Outcome {
    if (!canon_ok) return {false, "first canonical run did not complete"};
    Scratch second("accept_canon2");
    return determinism(canon, second);
  });
  run(7, "file-format round trips", [&]() -> Outcome {
    if (!canon_ok) return {false, "canonical artifacts missing"};
    return format_round_trips(canon);
  });
  run(8, "SSIM oracle", ssim_oracle);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
