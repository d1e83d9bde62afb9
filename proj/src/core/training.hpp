#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/compress.hpp"
#include "core/dataio.hpp"
#include "core/model.hpp"
#include "core/motion.hpp"
#include "core/tensor.hpp"

MGNR_NS_BEGIN

struct TrainConfig {
  int epochs = 300;
  int batch_size = 2;
  int finetune_epochs = 100;
  double alpha = 0.7;  // L1 weight; 1-alpha goes to the SSIM term
  double lr = 5e-4;
  double lr_final = 1e-6;  // cosine floor
  uint64_t seed = 1;

  void validate() const;
};

struct EpochStat {
  int epoch = 0;
  double loss = 0;     // pair-weighted mean of batch losses
  double psnr = 0;     // pooled over the epoch's reconstructions
  double seconds = 0;  // wall time of the epoch
};

struct TrainLog {
  std::vector<EpochStat> epochs;
};

// CSV with header `epoch,loss,psnr,seconds`.
void save_train_log(const TrainLog& log, const std::string& path);

// mean over pixels of weight * (alpha*|recon-target| + (1-alpha)*(1-ssim)),
// the absolute difference channel-averaged first so both terms are
// per-pixel maps. weight broadcasts nothing: it must be [1,1,H,W].
Tensor motion_loss(Tape& tape, const Tensor& recon, const Tensor& target, const Tensor& weight,
                   double alpha);

// Adam over every parameter, batches of distinct (t,v) pairs in seeded
// shuffled order, cosine learning rate. Deterministic for a fixed seed.
// A non-finite loss aborts with an error naming the epoch and batch.
TrainLog train(Model& model, const VideoSequence& video, const MotionMaskSet& masks,
               const TrainConfig& cfg);

// Post-compression phase: same loop, but pruned positions (mask over
// `scope`, the tensor list the mask was built from) stay zero and their
// gradients are discarded; when `specs` is non-empty (aligned with
// model.params()) every forward pass runs off quantize->dequantize
// weights while updates apply to the true weights underneath, so the
// quantizer is trained through as if it were the identity. Empty specs
// make finetune an exact replay of masked training.
TrainLog finetune(Model& model, const VideoSequence& video, const MotionMaskSet& masks,
                  const TrainConfig& cfg, const PruneMask& mask, const std::vector<Tensor>& scope,
                  const std::vector<QuantSpec>& specs);

MGNR_NS_END
