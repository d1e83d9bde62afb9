#include "core/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <utility>

#include "core/adam.hpp"
#include "core/ssim.hpp"

MGNR_NS_BEGIN

void TrainConfig::validate() const {
  if (!(alpha >= 0 && alpha <= 1))
    throw Error(ErrorKind::config, "alpha must lie in [0,1], got " + std::to_string(alpha));
  if (batch_size < 1) throw Error(ErrorKind::config, "batch_size must be at least 1");
  if (epochs < 0) throw Error(ErrorKind::config, "epochs must be non-negative");
  if (finetune_epochs < 0) throw Error(ErrorKind::config, "finetune_epochs must be non-negative");
  if (!(lr > 0)) throw Error(ErrorKind::config, "lr must be positive");
  if (!(lr_final >= 0) || lr_final > lr)
    throw Error(ErrorKind::config, "lr_final must lie in [0, lr]");
}

void save_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  out << "epoch,loss,psnr,seconds\n";
  char buf[128];
  for (const EpochStat& e : log.epochs) {
    if (std::isinf(e.psnr))
      std::snprintf(buf, sizeof buf, "%d,%.8f,inf,%.3f\n", e.epoch, e.loss, e.seconds);
    else
      std::snprintf(buf, sizeof buf, "%d,%.8f,%.4f,%.3f\n", e.epoch, e.loss, e.psnr, e.seconds);
    out << buf;
  }
  if (!out) throw Error(ErrorKind::io, "write failed for " + path);
}

Tensor motion_loss(Tape& tape, const Tensor& recon, const Tensor& target, const Tensor& weight,
                   double alpha) {
  if (recon.shape() != target.shape())
    throw Error(ErrorKind::config, "loss shapes differ: " + shape_str(recon.shape()) + " vs " +
                                       shape_str(target.shape()));
  if (!(alpha >= 0 && alpha <= 1))
    throw Error(ErrorKind::config, "alpha must lie in [0,1]");
  Tensor l1 = mean_channels(tape, abs_diff(tape, recon, target));
  Tensor term;
  if (alpha == 1) {
    term = l1;  // skip the SSIM graph entirely so alpha=1 is exactly L1
  } else {
    Tensor dssim = affine(tape, ssim_map(tape, recon, target), scalar(-1), scalar(1));
    term = add(tape, scalar_mul(tape, l1, scalar(alpha)),
               scalar_mul(tape, dssim, scalar(1 - alpha)));
  }
  return mean(tape, mul(tape, weight, term));
}

namespace {

struct LoopOpts {
  int epochs = 0;
  const PruneMask* mask = nullptr;
  const std::vector<Tensor>* scope = nullptr;     // tensor list the mask indexes
  const std::vector<QuantSpec>* specs = nullptr;  // aligned with model.params()
};

double cosine_lr(const TrainConfig& cfg, int epoch, int total) {
  double t = double(epoch) / double(std::max(1, total - 1));
  return cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1.0 + std::cos(t * 3.14159265358979323846));
}

void zero_pruned_grads(const std::vector<Tensor>& scope, const PruneMask& mask) {
  for (size_t i = 0; i < scope.size(); ++i) {
    Tensor t = scope[i];
    std::span<scalar> g = t.grad();
    const std::vector<uint8_t>& keep = mask.keep[i];
    for (size_t k = 0; k < g.size(); ++k)
      if (!keep[k]) g[k] = 0;
  }
}

TrainLog run_loop(Model& model, const VideoSequence& video, const MotionMaskSet& masks,
                  const TrainConfig& cfg, const LoopOpts& opts) {
  cfg.validate();
  const GridConfig& gc = model.grid.cfg;
  if (video.N != gc.N || video.T != gc.T || video.H != model.frame_height() ||
      video.W != model.frame_width())
    throw Error(ErrorKind::config,
                "video dims " + std::to_string(video.N) + "x" + std::to_string(video.T) + "x" +
                    std::to_string(video.H) + "x" + std::to_string(video.W) +
                    " disagree with the model (" + std::to_string(gc.N) + "x" +
                    std::to_string(gc.T) + "x" + std::to_string(model.frame_height()) + "x" +
                    std::to_string(model.frame_width()) + ")");
  if (masks.N != video.N || masks.T != video.T || masks.H != video.H || masks.W != video.W)
    throw Error(ErrorKind::config, "mask dims disagree with the video");

  std::vector<Tensor> params = model.params();
  if (opts.specs && !opts.specs->empty() && opts.specs->size() != params.size())
    throw Error(ErrorKind::internal, "quantization spec count disagrees with parameter count");
  if (opts.mask) {
    if (!opts.scope || opts.mask->keep.size() != opts.scope->size())
      throw Error(ErrorKind::internal, "prune mask does not match its scope");
    for (size_t i = 0; i < opts.scope->size(); ++i)
      if (int64_t(opts.mask->keep[i].size()) != (*opts.scope)[i].numel())
        throw Error(ErrorKind::internal, "prune mask tensor size mismatch");
  }
  const bool qat = opts.specs && !opts.specs->empty();

  Adam opt(params, AdamConfig{scalar(cfg.lr)});
  SplitMix64 rng(cfg.seed);

  std::vector<std::pair<int, int>> pairs;  // (t, v)
  pairs.reserve(size_t(video.T) * video.N);
  for (int t = 0; t < video.T; ++t)
    for (int v = 0; v < video.N; ++v) pairs.push_back({t, v});

  std::vector<std::vector<scalar>> saved;  // true weights during a QAT batch
  if (qat) saved.resize(params.size());

  TrainLog log;
  log.epochs.reserve(size_t(std::max(0, opts.epochs)));
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    opt.set_lr(scalar(cosine_lr(cfg, epoch, opts.epochs)));
    rng.shuffle(pairs);

    double loss_sum = 0;
    double sse = 0, pixel_count = 0;
    for (size_t start = 0; start < pairs.size(); start += size_t(cfg.batch_size)) {
      size_t stop = std::min(pairs.size(), start + size_t(cfg.batch_size));
      int batch_index = int(start / size_t(cfg.batch_size));

      if (qat) {
        for (size_t i = 0; i < params.size(); ++i) {
          Tensor p = params[i];
          std::span<scalar> d = p.data();
          saved[i].assign(d.begin(), d.end());
          try {
            std::vector<scalar> deq = dequantize(quantize_with(p, (*opts.specs)[i]), (*opts.specs)[i]);
            std::copy(deq.begin(), deq.end(), d.begin());
          } catch (const Error& e) {
            throw Error(ErrorKind::numeric, std::string(e.what()) + " at epoch " +
                                                std::to_string(epoch) + ", batch " +
                                                std::to_string(batch_index));
          }
        }
      }

      Tape tape;
      Tensor batch_loss;
      for (size_t k = start; k < stop; ++k) {
        auto [t, v] = pairs[k];
        Tensor recon = model.forward(tape, t, v);
        const Tensor& target = video.frame(v, t);
        Tensor weight = masks.effective_weight(v, t);
        Tensor item = motion_loss(tape, recon, target, weight, cfg.alpha);
        batch_loss = batch_loss.defined() ? add(tape, batch_loss, item) : item;

        std::span<const scalar> a = recon.data();
        std::span<const scalar> b = target.data();
        for (size_t i = 0; i < a.size(); ++i) {
          double d = double(a[i]) - double(b[i]);
          sse += d * d;
        }
        pixel_count += double(a.size());
      }
      if (stop - start > 1)
        batch_loss = scalar_mul(tape, batch_loss, scalar(1.0 / double(stop - start)));

      double loss_value = double(batch_loss.item());
      if (!std::isfinite(loss_value)) {
        if (qat)
          for (size_t i = 0; i < params.size(); ++i) {
            Tensor p = params[i];
            std::copy(saved[i].begin(), saved[i].end(), p.data().begin());
          }
        throw Error(ErrorKind::numeric, "non-finite loss at epoch " + std::to_string(epoch) +
                                            ", batch " + std::to_string(batch_index));
      }
      loss_sum += loss_value * double(stop - start);

      tape.backward(batch_loss);

      if (qat)
        for (size_t i = 0; i < params.size(); ++i) {
          Tensor p = params[i];
          std::copy(saved[i].begin(), saved[i].end(), p.data().begin());
        }
      if (opts.mask) zero_pruned_grads(*opts.scope, *opts.mask);
      opt.step();
      opt.zero_grad();
      if (opts.mask) apply_mask(*opts.scope, *opts.mask);
    }

    EpochStat stat;
    stat.epoch = epoch;
    stat.loss = loss_sum / double(pairs.size());
    stat.psnr = sse == 0 ? std::numeric_limits<double>::infinity()
                         : -10.0 * std::log10(sse / pixel_count);
    stat.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.epochs.push_back(stat);
  }
  return log;
}

}  // namespace

TrainLog train(Model& model, const VideoSequence& video, const MotionMaskSet& masks,
               const TrainConfig& cfg) {
  LoopOpts opts;
  opts.epochs = cfg.epochs;
  return run_loop(model, video, masks, cfg, opts);
}

TrainLog finetune(Model& model, const VideoSequence& video, const MotionMaskSet& masks,
                  const TrainConfig& cfg, const PruneMask& mask, const std::vector<Tensor>& scope,
                  const std::vector<QuantSpec>& specs) {
  LoopOpts opts;
  opts.epochs = cfg.finetune_epochs;
  opts.mask = &mask;
  opts.scope = &scope;
  opts.specs = &specs;
  return run_loop(model, video, masks, cfg, opts);
}

MGNR_NS_END
