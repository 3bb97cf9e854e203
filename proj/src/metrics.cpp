#include "uvrec/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "uvrec/dataset.hpp"
#include "uvrec/nets.hpp"

namespace uvrec {

namespace {

void check_same(const RealGrid& a, const RealGrid& b, const char* what) {
  if (a.height != b.height || a.width != b.width) {
    throw std::invalid_argument(std::string(what) + ": image shapes differ");
  }
}

}  // namespace

double psnr(const RealGrid& reference, const RealGrid& test) {
  check_same(reference, test, "psnr");
  if (reference.size() == 0) throw std::invalid_argument("psnr: empty image");
  double acc = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference.values[i] - test.values[i];
    acc += d * d;
  }
  const double err = acc / static_cast<double>(reference.size());
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / err);
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> taps(size);
  const double center = static_cast<double>(size - 1) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - center;
    taps[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

double ssim(const RealGrid& reference, const RealGrid& test, const SsimOptions& opt) {
  check_same(reference, test, "ssim");
  const std::size_t win = opt.window;
  if (win == 0 || reference.height < win || reference.width < win) {
    throw std::invalid_argument("ssim: image smaller than the " + std::to_string(win) + "x" +
                                std::to_string(win) + " window");
  }
  const double c1 = std::pow(opt.k1 * opt.dynamic_range, 2);
  const double c2 = std::pow(opt.k2 * opt.dynamic_range, 2);
  const auto taps = gaussian_window(win, opt.sigma);
  const std::size_t h = reference.height, w = reference.width;
  const std::size_t oh = h - win + 1, ow = w - win + 1;

  // Separable filtering of x, y, x^2, y^2, xy over valid positions.
  std::vector<std::vector<double>> maps(5, std::vector<double>(oh * ow, 0.0));
  std::vector<std::vector<double>> rowpass(5, std::vector<double>(h * ow, 0.0));
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s[5] = {0, 0, 0, 0, 0};
      for (std::size_t k = 0; k < win; ++k) {
        const double x = reference(r, c + k), y = test(r, c + k), t = taps[k];
        s[0] += t * x;
        s[1] += t * y;
        s[2] += t * x * x;
        s[3] += t * y * y;
        s[4] += t * x * y;
      }
      for (int m = 0; m < 5; ++m) rowpass[m][r * ow + c] = s[m];
    }
  }
  for (int m = 0; m < 5; ++m) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < win; ++k) s += taps[k] * rowpass[m][(r + k) * ow + c];
        maps[m][r * ow + c] = s;
      }
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < oh * ow; ++i) {
    const double mx = maps[0][i], my = maps[1][i];
    const double vx = maps[2][i] - mx * mx;
    const double vy = maps[3][i] - my * my;
    const double cxy = maps[4][i] - mx * my;
    total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(oh * ow);
}

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void EvalReport::finalize() {
  mean = EvalRow{};
  mean.id = "mean";
  if (rows.empty()) return;
  const double n = static_cast<double>(rows.size());
  bool scm = rows.front().accuracy.has_value();
  double acc = 0, lc = 0, rv = 0, ri = 0;
  for (const auto& r : rows) {
    mean.psnr_dirty += r.psnr_dirty / n;
    mean.ssim_dirty += r.ssim_dirty / n;
    mean.psnr_recon += r.psnr_recon / n;
    mean.ssim_recon += r.ssim_recon / n;
    if (scm) {
      acc += *r.accuracy;
      lc += *r.contrastive;
      rv += *r.rec_vis;
      ri += *r.rec_img;
    }
  }
  if (scm) {
    mean.accuracy = acc / n;
    mean.contrastive = lc / n;
    mean.rec_vis = rv / n;
    mean.rec_img = ri / n;
  }
}

std::string EvalReport::to_csv() const {
  const bool scm = !rows.empty() && rows.front().accuracy.has_value();
  std::string out = "id,psnr_dirty,ssim_dirty,psnr_recon,ssim_recon";
  if (scm) out += ",acc,l_c,l_rec_v,l_rec_i";
  out += "\n";
  const auto line = [&](const EvalRow& r) {
    out += r.id + "," + format_metric(r.psnr_dirty) + "," + format_metric(r.ssim_dirty) + "," +
           format_metric(r.psnr_recon) + "," + format_metric(r.ssim_recon);
    if (scm) {
      out += "," + format_metric(r.accuracy.value_or(0.0)) + "," + format_metric(r.contrastive.value_or(0.0)) +
             "," + format_metric(r.rec_vis.value_or(0.0)) + "," + format_metric(r.rec_img.value_or(0.0));
    }
    out += "\n";
  };
  for (const auto& r : rows) line(r);
  line(mean);
  return out;
}

std::string export_embeddings(const Model& model, const Dataset& dataset, std::uint64_t seed) {
  for (const char* s : {section::kVisEncoder, section::kImgEncoder}) {
    if (!model.params.has_section(s)) {
      throw std::runtime_error(std::string("export_embeddings: checkpoint lacks section ") + s);
    }
  }
  const auto spec = model.arch.band_spec();
  ModelParams params = model.params;
  std::string out = "id";
  for (std::size_t k = 0; k < model.arch.d_model; ++k) out += ",xi" + std::to_string(k);
  for (std::size_t k = 0; k < model.arch.d_model; ++k) out += ",eta" + std::to_string(k);
  out += "\n";
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    auto rng = RngStream::named(seed, "export.band", i);
    Tape tape(&params);
    Var xi = pooled_embedding(tape, encode(tape, section::kVisEncoder,
                                           tape.constant(band_tokenize(s.sparse, spec, rng).tokens)));
    Var eta = pooled_embedding(tape, encode(tape, section::kImgEncoder,
                                            tape.constant(patchify(s.sky, model.arch.patch).tokens)));
    out += s.id;
    for (double v : tape.value(xi).raw()) out += "," + format_metric(v);
    for (double v : tape.value(eta).raw()) out += "," + format_metric(v);
    out += "\n";
  }
  return out;
}

}  // namespace uvrec
