// Drives the installed binary as a subprocess and checks stdout plus
// exit codes, which are part of the contract.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
  static int counter = 0;
  const fs::path cap = fs::temp_directory_path() / ("mgnr_cli_out_" + std::to_string(counter++));
  const std::string cmd = std::string(CLI_BIN_PATH) + " " + args + " > " + cap.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(cap);
  std::stringstream buf;
  buf << in.rdbuf();
  r.output = buf.str();
  fs::remove(cap);
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& child = "") const {
    return child.empty() ? path.string() : (path / child).string();
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// First number following "key=" in the captured output.
double field(const std::string& output, const std::string& key) {
  size_t at = output.find(key + "=");
  REQUIRE(at != std::string::npos);
  return std::strtod(output.c_str() + at + key.size() + 1, nullptr);
}

// The totals line is the one starting with "bpp="; per-frame lines
// carry their own psnr=/ssim= fields before it.
double total_field(const std::string& output, const std::string& key) {
  size_t line = output.rfind("\nbpp=");
  REQUIRE(line != std::string::npos);
  return field(output.substr(line), key);
}

std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>((std::istreambuf_iterator<char>(in)), {});
}

}  // namespace

TEST_CASE("the full pipeline runs and the numbers line up") {
  TempDir dir("mgnr_cli_pipeline");
  write_text(dir.str("synth.spec"), "views=2\nframes=3\nwidth=16\nheight=16\nseed=11\nobjects=1\n");
  write_text(dir.str("enc.cfg"),
             "epochs=30\nfinetune_epochs=8\nupscales=2\nchannels=12\nc=8\nseed=4\n");

  RunResult synth = run("synth --spec " + dir.str("synth.spec") + " --output " + dir.str("seq"));
  REQUIRE(synth.code == 0);

  RunResult enc = run("encode --input " + dir.str("seq") + " --config " + dir.str("enc.cfg") +
                      " --output " + dir.str("out.mgnr"));
  REQUIRE(enc.code == 0);
  CHECK(field(enc.output, "bpp") > 0);
  CHECK(fs::exists(dir.str("out.mgnr.train.csv")));

  RunResult dec = run("decode --input " + dir.str("out.mgnr") + " --output " + dir.str("dec"));
  REQUIRE(dec.code == 0);

  RunResult ev = run("eval --recon " + dir.str("dec") + " --source " + dir.str("seq") +
                     " --bitstream " + dir.str("out.mgnr") + " --csv " + dir.str("rd.csv"));
  REQUIRE(ev.code == 0);
  // The encoder reported quality from the decoded stream at 8-bit frame
  // granularity, so evaluating the decoded files reproduces it exactly.
  CHECK(std::fabs(total_field(ev.output, "psnr") - field(enc.output, "psnr")) < 1e-9);
  CHECK(std::fabs(total_field(ev.output, "ssim") - field(enc.output, "ssim")) < 1e-9);
  CHECK(total_field(ev.output, "bpp") == doctest::Approx(field(enc.output, "bpp")).epsilon(1e-12));
  // Per-frame detail lines, one per (view, frame).
  CHECK(ev.output.find("v=01 t=0002") != std::string::npos);
  CHECK(fs::exists(dir.str("rd.csv")));

  RunResult info = run("info --input " + dir.str("out.mgnr"));
  REQUIRE(info.code == 0);
  // tensor_count matches the number of per-tensor lines printed.
  size_t at = info.output.find("tensor_count: ");
  REQUIRE(at != std::string::npos);
  size_t count = size_t(std::strtoul(info.output.c_str() + at + 14, nullptr, 10));
  size_t lines = 0;
  for (size_t at = info.output.find("payload_bits="); at != std::string::npos;
       at = info.output.find("payload_bits=", at + 1))
    ++lines;
  CHECK(lines == count);

  RunResult bd = run("bdrate --anchor " + dir.str("rd.csv") + " --test " + dir.str("rd.csv"));
  // One RD point cannot fit a cubic; the structured failure is exit 2.
  CHECK(bd.code == 2);
}

TEST_CASE("repeated decodes are byte-identical") {
  TempDir dir("mgnr_cli_bits");
  write_text(dir.str("synth.spec"), "views=1\nframes=2\nwidth=16\nheight=16\nseed=3\nobjects=1\n");
  write_text(dir.str("enc.cfg"), "epochs=10\nfinetune_epochs=4\nupscales=2\nchannels=8\nc=6\n");
  REQUIRE(run("synth --spec " + dir.str("synth.spec") + " --output " + dir.str("seq")).code == 0);
  REQUIRE(run("encode --input " + dir.str("seq") + " --config " + dir.str("enc.cfg") +
              " --output " + dir.str("out.mgnr"))
              .code == 0);
  REQUIRE(run("decode --input " + dir.str("out.mgnr") + " --output " + dir.str("a")).code == 0);
  REQUIRE(run("decode --input " + dir.str("out.mgnr") + " --output " + dir.str("b")).code == 0);
  CHECK(read_bytes(dir.str("a/v00/f0001.ppm")) == read_bytes(dir.str("b/v00/f0001.ppm")));
}

TEST_CASE("quality, no-ge and no-motion flags reach the model") {
  TempDir dir("mgnr_cli_flags");
  write_text(dir.str("synth.spec"), "views=1\nframes=2\nwidth=16\nheight=16\nseed=3\nobjects=1\n");
  write_text(dir.str("enc.cfg"), "epochs=4\nfinetune_epochs=2\nupscales=2\n");
  REQUIRE(run("synth --spec " + dir.str("synth.spec") + " --output " + dir.str("seq")).code == 0);

  RunResult q20 = run("encode --input " + dir.str("seq") + " --config " + dir.str("enc.cfg") +
                      " --quality 20 --no-ge --no-motion --output " + dir.str("q20.mgnr"));
  REQUIRE(q20.code == 0);
  RunResult q80 = run("encode --input " + dir.str("seq") + " --config " + dir.str("enc.cfg") +
                      " --quality 80 --output " + dir.str("q80.mgnr"));
  REQUIRE(q80.code == 0);
  CHECK(field(q80.output, "bpp") > field(q20.output, "bpp"));

  RunResult info20 = run("info --input " + dir.str("q20.mgnr"));
  CHECK(info20.output.find("ge=0") != std::string::npos);
  CHECK(info20.output.find("c=20") != std::string::npos);
  RunResult info80 = run("info --input " + dir.str("q80.mgnr"));
  CHECK(info80.output.find("ge=1") != std::string::npos);
  CHECK(info80.output.find("c=80") != std::string::npos);

  RunResult bad = run("encode --input " + dir.str("seq") + " --quality 25 --output " +
                      dir.str("x.mgnr"));
  CHECK(bad.code == 2);
}

TEST_CASE("error paths exit with the documented codes") {
  TempDir dir("mgnr_cli_errors");
  CHECK(run("nonsense-subcommand").code == 2);
  CHECK(run("decode --input " + dir.str("missing.mgnr") + " --output " + dir.str("d")).code == 1);

  write_text(dir.str("synth.spec"), "views=1\nframes=2\nwidth=16\nheight=16\nseed=3\nobjects=1\n");
  write_text(dir.str("enc.cfg"), "epochs=2\nfinetune_epochs=1\nupscales=2\nchannels=8\nc=6\n");
  REQUIRE(run("synth --spec " + dir.str("synth.spec") + " --output " + dir.str("seq")).code == 0);
  REQUIRE(run("encode --input " + dir.str("seq") + " --config " + dir.str("enc.cfg") +
              " --output " + dir.str("out.mgnr"))
              .code == 0);

  // Flip one byte mid-stream: CRC catches it, exit code 4.
  std::vector<char> bytes = read_bytes(dir.str("out.mgnr"));
  bytes[bytes.size() / 2] = char(bytes[bytes.size() / 2] ^ 0x20);
  std::ofstream(dir.str("bad.mgnr"), std::ios::binary)
      .write(bytes.data(), std::streamsize(bytes.size()));
  RunResult bad = run("decode --input " + dir.str("bad.mgnr") + " --output " + dir.str("d"));
  CHECK(bad.code == 4);
  CHECK(bad.output.find("CRC") != std::string::npos);

  write_text(dir.str("bad.cfg"), "epochs=not_a_number\n");
  CHECK(run("encode --input " + dir.str("seq") + " --config " + dir.str("bad.cfg") +
            " --output " + dir.str("x.mgnr"))
            .code == 2);
}

TEST_CASE("the desk-scale synthetic sequence encodes end to end") {
  TempDir dir("mgnr_cli_desk");
  write_text(dir.str("synth.spec"), "views=4\nframes=8\nwidth=64\nheight=48\nseed=9\nobjects=2\n");
  write_text(dir.str("enc.cfg"),
             "epochs=2\nfinetune_epochs=1\nupscales=2,2,2\nwidth_mult=0.5\nc=40\n");
  REQUIRE(run("synth --spec " + dir.str("synth.spec") + " --output " + dir.str("seq")).code == 0);
  RunResult enc = run("encode --input " + dir.str("seq") + " --config " + dir.str("enc.cfg") +
                      " --output " + dir.str("out.mgnr"));
  REQUIRE(enc.code == 0);
  CHECK(field(enc.output, "bpp") > 0);
}
