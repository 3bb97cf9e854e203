#pragma once

#include <cstddef>
#include <vector>

#include "uvrec/fourier.hpp"
#include "uvrec/tape.hpp"
#include "uvrec/tensor.hpp"

namespace uvrec {

struct LossConfig {
  double temperature = 0.07;
  double kappa = 0.1;
};

struct ContrastiveResult {
  double vis_to_img = 0.0;
  double img_to_vis = 0.0;
  double total = 0.0;     // mean of the two directions
  double accuracy = 0.0;  // mean over both directions of diagonal-argmax rows
  // Per-pair contributions; their means equal the fields above.
  std::vector<double> row_loss;
  std::vector<double> row_accuracy;
};

// Bidirectional InfoNCE over cosine similarities s_lj = xi_l . eta_j of
// unit-norm [n, d] batches, with logits s / temperature.
ContrastiveResult contrastive_loss(const Tensor& xi, const Tensor& eta, double temperature);
double contrastive_accuracy(const Tensor& xi, const Tensor& eta);

// Tape form; inputs must already be unit rows. Returns L^c.
Var contrastive_loss(Tape& tape, Var xi, Var eta, double temperature);

// Mean squared error over every entry.
double mse(const Tensor& target, const Tensor& estimate);
double recon_loss_vis(const ComplexGrid& target, const ComplexGrid& estimate);
double recon_loss_img(const RealGrid& target, const RealGrid& estimate);
Var mse(Tape& tape, Var target, Var estimate);

double scm_loss(double rec_vis, double rec_img, double contrastive, double kappa);

// Amplitude-weighted spectral loss on [H*W, 2] (re, im) cells:
// mean over cells of w |d|^2 with w = (rho / max rho + 1) |d| held constant,
// rho the target amplitude.
double idr_loss(const Tensor& estimate, const Tensor& target);
double idr_loss(const ComplexGrid& estimate, const ComplexGrid& target);
Var idr_loss(Tape& tape, Var estimate, const Tensor& target);

}  // namespace uvrec
