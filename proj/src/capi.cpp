#include "mgnr/mgnr.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "core/codec.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"
#include "core/ssim.hpp"

namespace {

thread_local std::string g_error;

template <typename F>
int guarded(F&& body) {
  try {
    g_error.clear();
    body();
    return MGNR_OK;
  } catch (const mgnr::Error& e) {
    g_error = e.what();
    return e.exit_code();
  } catch (const std::exception& e) {
    g_error = e.what();
    return MGNR_E_IO;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw mgnr::Error(mgnr::ErrorKind::config, std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

struct mgnr_stream {
  std::vector<uint8_t> bytes;
  mgnr::ModelBundle bundle;
  mgnr::StreamInfo info;
};

const char* mgnr_last_error(void) { return g_error.c_str(); }

int mgnr_encode(const char* input_dir, const char* config_text, const char* output_path,
                mgnr_stats* stats) {
  return guarded([&] {
    require(input_dir, "input_dir");
    require(output_path, "output_path");
    mgnr::Config cfg = mgnr::Config::parse_text(config_text ? config_text : "");
    mgnr::VideoSequence video = mgnr::load_sequence(input_dir);
    mgnr::EncodeResult result = mgnr::encode_sequence(video, cfg);
    mgnr::write_file_bytes(output_path, result.stream);
    mgnr::save_train_log(result.log, std::string(output_path) + ".train.csv");
    if (stats) {
      stats->bpp = result.bpp;
      stats->psnr = result.psnr;
      stats->ssim = result.ssim;
      stats->seconds = result.seconds;
    }
  });
}

int mgnr_stream_open(const char* path, mgnr_stream** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto s = std::make_unique<mgnr_stream>();
    s->bytes = mgnr::read_file_bytes(path);
    s->bundle = mgnr::deserialize(s->bytes);
    s->info = mgnr::inspect_stream(s->bytes);
    *out = s.release();
  });
}

void mgnr_stream_close(mgnr_stream* stream) { delete stream; }

int mgnr_stream_decode(mgnr_stream* stream, const char* output_dir) {
  return guarded([&] {
    require(stream, "stream");
    require(output_dir, "output_dir");
    mgnr::Model model = mgnr::Model::from_bundle(stream->bundle);
    mgnr::save_sequence(model.render(), output_dir);
  });
}

int mgnr_stream_info(mgnr_stream* stream, char* buf, size_t buflen, size_t* needed) {
  return guarded([&] {
    require(stream, "stream");
    const mgnr::StreamInfo& info = stream->info;
    std::ostringstream out;
    out << "container: " << info.total_bytes << " bytes, bpp "
        << mgnr::measure_bpp(info.total_bytes, info.grid.N, info.grid.T, info.frame_h,
                             info.frame_w)
        << "\n";
    out << "video: N=" << info.grid.N << " T=" << info.grid.T << " " << info.frame_w << "x"
        << info.frame_h << "\n";
    out << "latent: " << info.grid.w << "x" << info.grid.h << " c=" << info.grid.c
        << " (c1=" << info.grid.c1 << " c2=" << info.grid.c2 << ")\n";
    out << "stages: upscales";
    for (int s : info.net.upscales) out << " " << s;
    out << ", channels";
    for (int ch : info.net.channels) out << " " << ch;
    out << "\n";
    out << "flags: ge=" << (info.grid.ge_enabled ? 1 : 0) << " quantized=" << (info.quantized ? 1 : 0)
        << " entropy=" << (info.entropy ? 1 : 0) << "\n";
    out << "tensor_count: " << info.tensors.size() << "\n";
    for (const mgnr::TensorStat& t : info.tensors) {
      out << "  " << t.name << " " << mgnr::shape_str(t.shape) << " elements=" << t.elements
          << " stored=" << t.stored << " payload_bits=" << t.payload_bits
          << (t.bitmap ? " bitmap" : "") << "\n";
    }
    const std::string text = out.str();
    if (needed) *needed = text.size() + 1;
    if (buf && buflen > 0) {
      const size_t n = std::min(buflen - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

int mgnr_eval(const char* recon_dir, const char* source_dir, const char* bitstream_path,
              mgnr_frame_stat_fn on_frame, void* user, mgnr_stats* stats) {
  return guarded([&] {
    require(recon_dir, "recon_dir");
    require(source_dir, "source_dir");
    mgnr::VideoSequence recon = mgnr::load_sequence(recon_dir);
    mgnr::VideoSequence source = mgnr::load_sequence(source_dir);
    if (on_frame) {
      for (int v = 0; v < recon.N; ++v)
        for (int t = 0; t < recon.T; ++t) {
          double fp = mgnr::psnr_frame(recon.frame(v, t), source.frame(v, t));
          double fs = double(mgnr::ssim_scalar(recon.frame(v, t), source.frame(v, t)));
          on_frame(v, t, fp, fs, user);
        }
    }
    double bpp = 0;
    if (bitstream_path) {
      std::vector<uint8_t> bytes = mgnr::read_file_bytes(bitstream_path);
      bpp = mgnr::measure_bpp(bytes.size(), source.N, source.T, source.H, source.W);
    }
    if (stats) {
      stats->bpp = bpp;
      stats->psnr = mgnr::psnr(recon, source);
      stats->ssim = mgnr::ssim_sequence(recon, source);
      stats->seconds = 0;
    }
  });
}

int mgnr_bd_rate(const char* anchor_csv, const char* test_csv, const char* key,
                 double* out_percent) {
  return guarded([&] {
    require(anchor_csv, "anchor_csv");
    require(test_csv, "test_csv");
    require(key, "key");
    require(out_percent, "out_percent");
    mgnr::QualityKey qk;
    if (std::strcmp(key, "psnr") == 0)
      qk = mgnr::QualityKey::psnr;
    else if (std::strcmp(key, "ssim") == 0)
      qk = mgnr::QualityKey::ssim;
    else
      throw mgnr::Error(mgnr::ErrorKind::config,
                        std::string("key must be psnr or ssim, got '") + key + "'");
    *out_percent = mgnr::bd_rate(mgnr::read_rd_csv(anchor_csv), mgnr::read_rd_csv(test_csv), qk);
  });
}

int mgnr_synth(const char* spec_path, const char* output_dir) {
  return guarded([&] {
    require(output_dir, "output_dir");
    mgnr::SynthSpec spec =
        spec_path ? mgnr::SynthSpec::parse_file(spec_path) : mgnr::SynthSpec{};
    spec.validate();
    mgnr::SyntheticResult result = mgnr::generate_synthetic(spec);
    mgnr::save_sequence(result.video, output_dir);
    const std::filesystem::path mask_root = std::filesystem::path(output_dir) / "masks";
    for (int v = 0; v < result.video.N; ++v)
      for (int t = 0; t < result.video.T; ++t) {
        const auto& m = result.object_masks[size_t(v) * result.video.T + size_t(t)];
        std::vector<mgnr::scalar> gray(m.begin(), m.end());
        const std::filesystem::path dir = mask_root / ("v" + std::string(v < 10 ? "0" : "") +
                                                       std::to_string(v));
        std::filesystem::create_directories(dir);
        char name[32];
        std::snprintf(name, sizeof name, "f%04d.pgm", t);
        mgnr::save_mask_pgm(gray, result.video.H, result.video.W, (dir / name).string());
      }
  });
}

}  // extern "C"
