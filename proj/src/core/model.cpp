#include "core/model.hpp"

#include <cstring>

MGNR_NS_BEGIN

Model Model::init(const GridConfig& g, const NetConfig& n, uint64_t seed) {
  SplitMix64 rng(seed);
  Model m;
  m.grid = MultiGrid::init(g, rng);
  m.net = SynthesisNet::init(g, n, rng);
  return m;
}

std::vector<Tensor> Model::params() const {
  std::vector<Tensor> out = grid.params();
  std::vector<Tensor> net_params = net.params();
  out.insert(out.end(), net_params.begin(), net_params.end());
  return out;
}

std::vector<std::string> Model::param_names() const {
  std::vector<std::string> names;
  if (grid.g_time_1.defined()) names.push_back("g_time_1");
  if (grid.g_time_2.defined()) names.push_back("g_time_2");
  if (grid.g_view.defined()) names.push_back("g_view");
  if (grid.g_tv.defined()) names.push_back("g_tv");
  for (size_t k = 0; k < net.blocks.size(); ++k) {
    names.push_back("b" + std::to_string(k) + ".w");
    names.push_back("b" + std::to_string(k) + ".b");
  }
  for (size_t k = 0; k < net.ge_grids.size(); ++k)
    names.push_back("ge" + std::to_string(k) + ".grid");
  for (size_t k = 0; k < net.ge_proj.size(); ++k)
    names.push_back("ge" + std::to_string(k) + ".proj");
  names.push_back("head.w");
  names.push_back("head.b");
  return names;
}

std::vector<Tensor> Model::prune_scope(bool synthesis_only) const {
  if (synthesis_only) return net.weight_params();
  return params();
}

int64_t Model::param_count() const { return grid.param_count() + net.param_count(); }

int Model::frame_height() const {
  int f = 1;
  for (int s : net.cfg.upscales) f *= s;
  return grid.cfg.h * f;
}

int Model::frame_width() const {
  int f = 1;
  for (int s : net.cfg.upscales) f *= s;
  return grid.cfg.w * f;
}

Tensor Model::forward(Tape& tape, int t, int v) const {
  Tensor latent = assemble(tape, grid, t, v);
  return synthesis_forward(tape, net, grid.cfg, latent, t, v);
}

VideoSequence Model::render() const {
  VideoSequence seq;
  seq.N = grid.cfg.N;
  seq.T = grid.cfg.T;
  seq.H = frame_height();
  seq.W = frame_width();
  seq.frames.resize(static_cast<size_t>(seq.N) * seq.T);
  Tape tape(false);
  for (int v = 0; v < seq.N; ++v)
    for (int t = 0; t < seq.T; ++t) seq.frame(v, t) = forward(tape, t, v);
  return seq;
}

ModelBundle Model::to_bundle() const {
  ModelBundle bundle;
  bundle.grid = grid.cfg;
  bundle.net = net.cfg;
  std::vector<std::string> names = param_names();
  std::vector<Tensor> tensors = params();
  if (names.size() != tensors.size())
    throw Error(ErrorKind::internal, "parameter naming out of step with parameter list");
  bundle.tensors.reserve(tensors.size());
  for (size_t i = 0; i < tensors.size(); ++i)
    bundle.tensors.push_back({names[i], tensors[i]});
  return bundle;
}

Model Model::from_bundle(const ModelBundle& bundle) {
  Model m;
  try {
    m = init(bundle.grid, bundle.net, 0);
  } catch (const Error& e) {
    // Geometry that cannot build a model means the stream is bad, not
    // the caller's configuration.
    throw Error(ErrorKind::bitstream, std::string("container geometry rejected: ") + e.what());
  }
  std::vector<std::string> names = m.param_names();
  std::vector<Tensor> tensors = m.params();
  if (bundle.tensors.size() != tensors.size())
    throw Error(ErrorKind::bitstream,
                "container holds " + std::to_string(bundle.tensors.size()) + " tensors, model needs " +
                    std::to_string(tensors.size()));
  for (size_t i = 0; i < tensors.size(); ++i) {
    const TensorEntry& entry = bundle.tensors[i];
    if (entry.name != names[i])
      throw Error(ErrorKind::bitstream,
                  "tensor " + std::to_string(i) + " named '" + entry.name + "', expected '" +
                      names[i] + "'");
    if (entry.tensor.shape() != tensors[i].shape())
      throw Error(ErrorKind::bitstream, "tensor '" + entry.name + "' has shape " +
                                            shape_str(entry.tensor.shape()) + ", expected " +
                                            shape_str(tensors[i].shape()));
    Tensor dst = tensors[i];
    std::span<const scalar> src = entry.tensor.data();
    std::memcpy(dst.data().data(), src.data(), src.size() * sizeof(scalar));
  }
  return m;
}

MGNR_NS_END
