// Command-line front end. Links only the C API so it exercises the same
// surface any other client gets.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <mgnr/mgnr.h>

namespace {

int fail(int code) {
  std::fprintf(stderr, "error: %s\n", mgnr_last_error());
  return code;
}

void print_stats(const mgnr_stats& s, bool with_rate, bool with_time) {
  if (with_rate) std::printf("bpp=%.8f ", s.bpp);
  std::printf("psnr=%.10f ssim=%.10f", s.psnr, s.ssim);
  if (with_time) std::printf(" seconds=%.2f", s.seconds);
  std::printf("\n");
}

int cmd_encode(const std::string& input, const std::string& config_path,
               const std::string& output, int quality, bool no_ge, bool no_motion) {
  std::string text;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::fprintf(stderr, "error: cannot open config %s\n", config_path.c_str());
      return MGNR_E_IO;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    text = buf.str();
    if (!text.empty() && text.back() != '\n') text += '\n';
  }
  if (quality != 0) text += "quality=" + std::to_string(quality) + "\n";
  if (no_ge) text += "ge=0\n";
  if (no_motion) text += "motion=none\n";

  mgnr_stats stats{};
  int rc = mgnr_encode(input.c_str(), text.c_str(), output.c_str(), &stats);
  if (rc != MGNR_OK) return fail(rc);
  print_stats(stats, true, true);
  std::printf("wrote %s (training log %s.train.csv)\n", output.c_str(), output.c_str());
  return MGNR_OK;
}

int cmd_decode(const std::string& input, const std::string& output) {
  mgnr_stream* stream = nullptr;
  int rc = mgnr_stream_open(input.c_str(), &stream);
  if (rc != MGNR_OK) return fail(rc);
  rc = mgnr_stream_decode(stream, output.c_str());
  mgnr_stream_close(stream);
  if (rc != MGNR_OK) return fail(rc);
  std::printf("decoded %s -> %s\n", input.c_str(), output.c_str());
  return MGNR_OK;
}

int cmd_info(const std::string& input) {
  mgnr_stream* stream = nullptr;
  int rc = mgnr_stream_open(input.c_str(), &stream);
  if (rc != MGNR_OK) return fail(rc);
  size_t needed = 0;
  rc = mgnr_stream_info(stream, nullptr, 0, &needed);
  if (rc == MGNR_OK) {
    std::vector<char> buf(needed);
    rc = mgnr_stream_info(stream, buf.data(), buf.size(), nullptr);
    if (rc == MGNR_OK) std::fputs(buf.data(), stdout);
  }
  mgnr_stream_close(stream);
  return rc == MGNR_OK ? MGNR_OK : fail(rc);
}

int cmd_eval(const std::string& recon, const std::string& source, const std::string& bitstream,
             const std::string& csv) {
  if (!csv.empty() && bitstream.empty()) {
    std::fprintf(stderr, "error: --csv needs --bitstream for the rate column\n");
    return MGNR_E_CONFIG;
  }
  mgnr_stats stats{};
  auto on_frame = [](int v, int t, double psnr, double ssim, void*) {
    std::printf("v=%02d t=%04d psnr=%.10f ssim=%.10f\n", v, t, psnr, ssim);
  };
  int rc = mgnr_eval(recon.c_str(), source.c_str(), bitstream.empty() ? nullptr : bitstream.c_str(),
                     on_frame, nullptr, &stats);
  if (rc != MGNR_OK) return fail(rc);
  print_stats(stats, !bitstream.empty(), false);
  if (!csv.empty()) {
    std::ofstream out(csv);
    if (!out) {
      std::fprintf(stderr, "error: cannot open %s for writing\n", csv.c_str());
      return MGNR_E_IO;
    }
    char row[160];
    std::snprintf(row, sizeof row, "bpp,psnr,ssim\n%.10g,%.10g,%.10g\n", stats.bpp, stats.psnr,
                  stats.ssim);
    out << row;
  }
  return MGNR_OK;
}

int cmd_bdrate(const std::string& anchor, const std::string& test, const std::string& key) {
  double percent = 0;
  int rc = mgnr_bd_rate(anchor.c_str(), test.c_str(), key.c_str(), &percent);
  if (rc != MGNR_OK) return fail(rc);
  std::printf("bd_rate=%.6f%%\n", percent);
  return MGNR_OK;
}

int cmd_synth(const std::string& spec, const std::string& output) {
  int rc = mgnr_synth(spec.empty() ? nullptr : spec.c_str(), output.c_str());
  if (rc != MGNR_OK) return fail(rc);
  std::printf("wrote synthetic sequence to %s\n", output.c_str());
  return MGNR_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mgnr: multi-grid neural multi-view video codec"};
  app.require_subcommand(1);

  std::string input, output, config_path, recon, source, bitstream, csv, key = "psnr", spec;
  int quality = 0;
  bool no_ge = false, no_motion = false;

  CLI::App* enc = app.add_subcommand("encode", "Train on a sequence and write a container");
  enc->add_option("--input", input, "source sequence directory")->required();
  enc->add_option("--config", config_path, "key=value config file");
  enc->add_option("--output", output, "container path to write")->required();
  enc->add_option("--quality", quality, "rate point: 20, 30, 40, 60 or 80");
  enc->add_flag("--no-ge", no_ge, "disable per-stage grid injection");
  enc->add_flag("--no-motion", no_motion, "train with uniform pixel weights");

  CLI::App* dec = app.add_subcommand("decode", "Render a container to PPM frames");
  dec->add_option("--input", input, "container path")->required();
  dec->add_option("--output", output, "directory for the decoded frames")->required();

  CLI::App* info = app.add_subcommand("info", "Print container header and tensor sizes");
  info->add_option("--input", input, "container path")->required();

  CLI::App* eval = app.add_subcommand("eval", "Compare a decoded sequence against its source");
  eval->add_option("--recon", recon, "decoded sequence directory")->required();
  eval->add_option("--source", source, "source sequence directory")->required();
  eval->add_option("--bitstream", bitstream, "container path for the rate column");
  eval->add_option("--csv", csv, "write the rate-distortion row here");

  CLI::App* bd = app.add_subcommand("bdrate", "Delta rate between two RD CSV files");
  bd->add_option("--anchor", recon, "anchor curve CSV")->required();
  bd->add_option("--test", source, "test curve CSV")->required();
  bd->add_option("--key", key, "quality column: psnr or ssim");

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic multi-view sequence");
  synth->add_option("--spec", spec, "key=value synthesis spec file");
  synth->add_option("--output", output, "directory for the generated frames")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    // Help and version requests exit cleanly; anything else is bad usage.
    return rc == 0 ? 0 : MGNR_E_CONFIG;
  }

  if (enc->parsed()) return cmd_encode(input, config_path, output, quality, no_ge, no_motion);
  if (dec->parsed()) return cmd_decode(input, output);
  if (info->parsed()) return cmd_info(input);
  if (eval->parsed()) return cmd_eval(recon, source, bitstream, csv);
  if (bd->parsed()) return cmd_bdrate(recon, source, key);
  if (synth->parsed()) return cmd_synth(spec, output);
  return MGNR_E_CONFIG;
}
