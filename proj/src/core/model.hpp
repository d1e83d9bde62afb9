#pragma once

#include <string>
#include <vector>

#include "core/compress.hpp"
#include "core/dataio.hpp"
#include "core/multigrid.hpp"
#include "core/synthesis.hpp"

MGNR_NS_BEGIN

// The codec "model": grids plus synthesis net. Encoding trains it on one
// sequence; decoding rebuilds it from the container and renders.
struct Model {
  MultiGrid grid;
  SynthesisNet net;

  static Model init(const GridConfig& g, const NetConfig& n, uint64_t seed);

  // Grid tables first, then net tensors; the container and every
  // spec/mask alignment use this order.
  std::vector<Tensor> params() const;
  std::vector<std::string> param_names() const;

  // Default pruning scope: net weights only. Grids hold per-frame
  // content, so pruning them degrades isolated frames; GE grids count
  // as grids for the same reason.
  std::vector<Tensor> prune_scope(bool synthesis_only = true) const;

  int64_t param_count() const;
  int frame_height() const;
  int frame_width() const;

  Tensor forward(Tape& tape, int t, int v) const;

  // Every frame, gradient-free, in dataio layout (v-major).
  VideoSequence render() const;

  ModelBundle to_bundle() const;
  static Model from_bundle(const ModelBundle& bundle);
};

MGNR_NS_END
