#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/motion.hpp"
#include "core/multigrid.hpp"
#include "core/synthesis.hpp"
#include "core/training.hpp"

MGNR_NS_BEGIN

// Every tunable in one key=value surface. Unknown keys are rejected and
// all values are validated before any work starts, so a typo cannot cost
// a training run.
struct Config {
  // model geometry (latent h,w derive from the input dims and upscales)
  int c = 40;
  std::vector<int> upscales{2, 2, 2};
  std::vector<int> channels;  // empty: default taper scaled by width_mult
  double width_mult = 1.0;
  bool ge = true;
  int ge_channels = 2;

  // training
  double alpha = 0.7;
  double beta = 0.5;
  double lr = 5e-4;
  double lr_final = 1e-6;
  int epochs = 300;
  int batch_size = 2;
  int finetune_epochs = 100;
  uint64_t seed = 1;

  // compression
  double sparsity = 0.4;
  int bits = 8;
  bool quantize = true;
  bool entropy = true;

  // motion weighting; "none" trains with all-ones weights
  std::string motion = "hs";
  double percentile = 98.0;

  static Config parse_text(const std::string& text);
  static Config parse_file(const std::string& path);
  void validate() const;

  // --quality q: q becomes the latent channel count and scales the
  // synthesis-net width with it, so one integer moves both rate knobs.
  void apply_quality(int quality);

  GridConfig grid_for(int T, int N, int H, int W) const;
  NetConfig net_for() const;
  TrainConfig train_for() const;
  bool motion_none() const { return motion == "none"; }
};

MGNR_NS_END
