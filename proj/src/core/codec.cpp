#include "core/codec.hpp"

#include <chrono>
#include <fstream>

#include "core/metrics.hpp"
#include "core/model.hpp"

MGNR_NS_BEGIN

EncodeResult encode_sequence(const VideoSequence& video, const Config& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (video.N < 1 || video.T < 1 || video.frames.empty())
    throw Error(ErrorKind::config, "empty input sequence");

  GridConfig grid = cfg.grid_for(video.T, video.N, video.H, video.W);
  NetConfig net = cfg.net_for();
  stage_shapes(grid, net);  // fail on inconsistent geometry before any work

  MotionMaskSet masks =
      cfg.motion_none()
          ? MotionMaskSet::all_ones(video.N, video.T, video.H, video.W)
          : build_masks(video, parse_flow_method(cfg.motion), cfg.percentile, scalar(cfg.beta));

  Model model = Model::init(grid, net, cfg.seed);
  TrainConfig tcfg = cfg.train_for();

  EncodeResult result;
  result.log = train(model, video, masks, tcfg);

  std::vector<Tensor> scope = model.prune_scope();
  PruneMask mask = prune_global(scope, cfg.sparsity);
  apply_mask(scope, mask);

  // The quantizer is frozen on the pruned weights; fine-tuning then runs
  // every forward pass through it, and the stream stores symbols under
  // the very same spec, so decode sees the weights training optimized.
  std::vector<Tensor> params = model.params();
  std::vector<QuantSpec> specs;
  if (cfg.quantize)
    for (const Tensor& p : params) specs.push_back(quantize(p, cfg.bits).second);
  finetune(model, video, masks, tcfg, mask, scope, specs);

  // Align the per-scope keep masks with the serialized tensor order.
  std::vector<std::vector<uint8_t>> keep(params.size());
  for (size_t s = 0; s < scope.size(); ++s)
    for (size_t p = 0; p < params.size(); ++p)
      if (params[p].id() == scope[s].id()) {
        keep[p] = mask.keep[s];
        break;
      }

  SerializeOptions opt;
  opt.quantized = cfg.quantize;
  opt.entropy = cfg.entropy;
  result.stream = serialize(model.to_bundle(), keep, specs, opt);

  Model decoded = Model::from_bundle(deserialize(result.stream));
  result.recon = decoded.render();
  // Report what a viewer of the decoded 8-bit frames sees, which also
  // makes the numbers reproducible from the decode output on disk.
  for (Tensor& f : result.recon.frames) f = quantize_frame_8bit(f);
  result.bpp = measure_bpp(result.stream.size(), video.N, video.T, video.H, video.W);
  result.psnr = psnr(result.recon, video);
  result.ssim = ssim_sequence(result.recon, video);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

VideoSequence decode_stream(const std::vector<uint8_t>& bytes) {
  Model model = Model::from_bundle(deserialize(bytes));
  return model.render();
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::io, "read failed for " + path);
  return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "write failed for " + path);
}

MGNR_NS_END
