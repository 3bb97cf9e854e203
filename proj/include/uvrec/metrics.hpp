#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uvrec/fourier.hpp"

namespace uvrec {

struct Model;
struct Dataset;

// 10 log10(1 / MSE) for images on [0, 1]; +inf when identical.
double psnr(const RealGrid& reference, const RealGrid& test);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Gaussian-windowed SSIM averaged over every window that fits inside the image.
double ssim(const RealGrid& reference, const RealGrid& test, const SsimOptions& options = {});

// Normalized 1D Gaussian taps.
std::vector<double> gaussian_window(std::size_t size, double sigma);

struct EvalRow {
  std::string id;
  double psnr_dirty = 0.0;
  double ssim_dirty = 0.0;
  double psnr_recon = 0.0;
  double ssim_recon = 0.0;
  // Present when the checkpoint carries the pretraining networks.
  std::optional<double> accuracy;
  std::optional<double> contrastive;
  std::optional<double> rec_vis;
  std::optional<double> rec_img;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  EvalRow mean;  // arithmetic means of the rows; id "mean"

  void finalize();
  std::string to_csv() const;
};

std::string format_metric(double v);

// One row per sample: id, pooled visibility embedding, pooled image embedding.
std::string export_embeddings(const Model& model, const Dataset& dataset, std::uint64_t seed);

}  // namespace uvrec
