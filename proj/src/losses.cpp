#include "uvrec/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "uvrec/nets.hpp"

namespace uvrec {

namespace {

void check_batch(const Tensor& xi, const Tensor& eta) {
  if (xi.rows() == 0) throw std::invalid_argument("contrastive: empty batch");
  if (xi.rows() != eta.rows() || xi.cols() != eta.cols()) {
    throw std::invalid_argument("contrastive: batch shapes " + shape_string(xi.shape()) + " and " +
                                shape_string(eta.shape()) + " differ");
  }
  for (const Tensor* t : {&xi, &eta}) {
    for (std::size_t i = 0; i < t->rows(); ++i) {
      double ss = 0.0;
      for (std::size_t j = 0; j < t->cols(); ++j) ss += (*t)(i, j) * (*t)(i, j);
      if (std::abs(std::sqrt(ss) - 1.0) > 1e-8) {
        throw std::invalid_argument("contrastive: row " + std::to_string(i) + " is not unit-norm");
      }
    }
  }
}

// -log softmax(row)[diag] and whether the diagonal is the row argmax.
void row_terms(const std::vector<double>& logits, std::size_t diag, double& loss, bool& hit) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  loss = mx + std::log(z) - logits[diag];
  hit = std::max_element(logits.begin(), logits.end()) - logits.begin() ==
        static_cast<std::ptrdiff_t>(diag);
}

void check_cells(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " +
                                shape_string(b.shape()) + " differ");
  }
}

Tensor idr_weights(const Tensor& estimate, const Tensor& target) {
  check_cells(estimate, target, "idr_loss");
  if (target.cols() != 2) throw std::invalid_argument("idr_loss: expected [cells, 2] (re, im)");
  const std::size_t n = target.rows();
  double rho_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) rho_max = std::max(rho_max, std::hypot(target(i, 0), target(i, 1)));
  if (!(rho_max > 0.0)) throw std::invalid_argument("idr_loss: target visibility is all zero");
  Tensor w = Tensor::matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double rho = std::hypot(target(i, 0), target(i, 1));
    const double d = std::hypot(estimate(i, 0) - target(i, 0), estimate(i, 1) - target(i, 1));
    w(i, 0) = w(i, 1) = (rho / rho_max + 1.0) * d;
  }
  return w;
}

}  // namespace

ContrastiveResult contrastive_loss(const Tensor& xi, const Tensor& eta, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("contrastive: temperature must be > 0");
  check_batch(xi, eta);
  const std::size_t n = xi.rows(), d = xi.cols();
  std::vector<double> sim(n * n);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += xi(l, k) * eta(j, k);
      sim[l * n + j] = s / temperature;
    }
  }
  ContrastiveResult r;
  r.row_loss.resize(n);
  r.row_accuracy.resize(n);
  std::vector<double> row(n);
  for (std::size_t l = 0; l < n; ++l) {
    double lv = 0.0, li = 0.0;
    bool hv = false, hi = false;
    for (std::size_t j = 0; j < n; ++j) row[j] = sim[l * n + j];
    row_terms(row, l, lv, hv);
    for (std::size_t j = 0; j < n; ++j) row[j] = sim[j * n + l];
    row_terms(row, l, li, hi);
    r.vis_to_img += lv;
    r.img_to_vis += li;
    r.row_loss[l] = 0.5 * (lv + li);
    r.row_accuracy[l] = 0.5 * ((hv ? 1.0 : 0.0) + (hi ? 1.0 : 0.0));
    r.accuracy += r.row_accuracy[l];
  }
  const double dn = static_cast<double>(n);
  r.vis_to_img /= dn;
  r.img_to_vis /= dn;
  r.total = 0.5 * (r.vis_to_img + r.img_to_vis);
  r.accuracy /= dn;
  return r;
}

double contrastive_accuracy(const Tensor& xi, const Tensor& eta) {
  return contrastive_loss(xi, eta, 1.0).accuracy;
}

Var contrastive_loss(Tape& tape, Var xi, Var eta, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("contrastive: temperature must be > 0");
  check_batch(tape.value(xi), tape.value(eta));
  Var logits = tape.scale(tape.matmul(xi, tape.transpose(eta)), 1.0 / temperature);
  Var v2i = tape.softmax_xent_diag(logits);
  Var i2v = tape.softmax_xent_diag(tape.transpose(logits));
  return tape.scale(tape.add(v2i, i2v), 0.5);
}

double mse(const Tensor& target, const Tensor& estimate) {
  check_cells(target, estimate, "mse");
  if (target.size() == 0) throw std::invalid_argument("mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = estimate[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(target.size());
}

double recon_loss_vis(const ComplexGrid& target, const ComplexGrid& estimate) {
  if (target.height != estimate.height || target.width != estimate.width) {
    throw std::invalid_argument("recon_loss_vis: grid shapes differ");
  }
  return mse(grid_to_cells(target), grid_to_cells(estimate));
}

double recon_loss_img(const RealGrid& target, const RealGrid& estimate) {
  if (target.height != estimate.height || target.width != estimate.width) {
    throw std::invalid_argument("recon_loss_img: grid shapes differ");
  }
  return mse(Tensor({target.size()}, target.values), Tensor({estimate.size()}, estimate.values));
}

Var mse(Tape& tape, Var target, Var estimate) {
  Var d = tape.sub(estimate, target);
  return tape.mean(tape.mul(d, d));
}

double scm_loss(double rec_vis, double rec_img, double contrastive, double kappa) {
  return rec_vis + rec_img + kappa * contrastive;
}

double idr_loss(const Tensor& estimate, const Tensor& target) {
  const Tensor w = idr_weights(estimate, target);
  double acc = 0.0;
  for (std::size_t i = 0; i < target.rows(); ++i) {
    const double dr = estimate(i, 0) - target(i, 0), di = estimate(i, 1) - target(i, 1);
    acc += w(i, 0) * (dr * dr + di * di);
  }
  return acc / static_cast<double>(target.rows());
}

double idr_loss(const ComplexGrid& estimate, const ComplexGrid& target) {
  return idr_loss(grid_to_cells(estimate), grid_to_cells(target));
}

Var idr_loss(Tape& tape, Var estimate, const Tensor& target) {
  const Tensor w = idr_weights(tape.value(estimate), target);
  Var d = tape.sub(estimate, tape.constant(target));
  Var weighted = tape.mul(tape.mul(d, d), tape.constant(w));
  // Sum over re/im per cell, averaged over cells.
  return tape.scale(tape.sum(weighted), 1.0 / static_cast<double>(target.rows()));
}

}  // namespace uvrec
