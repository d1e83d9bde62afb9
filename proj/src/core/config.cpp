#include "core/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

MGNR_NS_BEGIN

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_real(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(value.c_str(), &end);
  if (errno != 0 || end == value.c_str() || *end != '\0')
    throw Error(ErrorKind::config, key + ": '" + value + "' is not a number");
  return v;
}

long long parse_int(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0')
    throw Error(ErrorKind::config, key + ": '" + value + "' is not an integer");
  return v;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0' || value.find('-') != std::string::npos)
    throw Error(ErrorKind::config, key + ": '" + value + "' is not an unsigned integer");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw Error(ErrorKind::config, key + ": '" + value + "' is not a boolean (use 0/1)");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw Error(ErrorKind::config, key + ": empty list element");
    out.push_back(static_cast<int>(parse_int(key, item)));
  }
  if (out.empty()) throw Error(ErrorKind::config, key + ": empty list");
  return out;
}

}  // namespace

Config Config::parse_text(const std::string& text) {
  Config cfg;
  int quality = 0;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::config,
                  "line " + std::to_string(lineno) + ": expected key=value, got '" + stripped + "'");
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::config, "line " + std::to_string(lineno) + ": empty key");

    if (key == "c")
      cfg.c = static_cast<int>(parse_int(key, value));
    else if (key == "upscales")
      cfg.upscales = parse_int_list(key, value);
    else if (key == "channels")
      cfg.channels = parse_int_list(key, value);
    else if (key == "width_mult")
      cfg.width_mult = parse_real(key, value);
    else if (key == "ge")
      cfg.ge = parse_bool(key, value);
    else if (key == "ge_channels")
      cfg.ge_channels = static_cast<int>(parse_int(key, value));
    else if (key == "alpha")
      cfg.alpha = parse_real(key, value);
    else if (key == "beta")
      cfg.beta = parse_real(key, value);
    else if (key == "lr")
      cfg.lr = parse_real(key, value);
    else if (key == "lr_final")
      cfg.lr_final = parse_real(key, value);
    else if (key == "epochs")
      cfg.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "batch_size")
      cfg.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "finetune_epochs")
      cfg.finetune_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "seed")
      cfg.seed = parse_u64(key, value);
    else if (key == "sparsity")
      cfg.sparsity = parse_real(key, value);
    else if (key == "bits")
      cfg.bits = static_cast<int>(parse_int(key, value));
    else if (key == "quantize")
      cfg.quantize = parse_bool(key, value);
    else if (key == "entropy")
      cfg.entropy = parse_bool(key, value);
    else if (key == "motion")
      cfg.motion = value;
    else if (key == "percentile")
      cfg.percentile = parse_real(key, value);
    else if (key == "quality")
      quality = static_cast<int>(parse_int(key, value));
    else
      throw Error(ErrorKind::config, "unknown key '" + key + "'");
  }
  // Applied last wherever it appeared: quality owns c and the net width.
  if (quality != 0) cfg.apply_quality(quality);
  cfg.validate();
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

void Config::validate() const {
  if (c < 1 || c > 0xFFFF) throw Error(ErrorKind::config, "c must lie in [1, 65535]");
  if (upscales.empty() || upscales.size() > 8)
    throw Error(ErrorKind::config, "upscales needs 1..8 stages");
  for (int s : upscales)
    if (s < 1 || s > 16) throw Error(ErrorKind::config, "each upscale must lie in [1, 16]");
  if (!channels.empty()) {
    if (channels.size() != upscales.size())
      throw Error(ErrorKind::config, "channels must list one width per upscale stage");
    for (int ch : channels)
      if (ch < 1 || ch > 0xFFFF) throw Error(ErrorKind::config, "each channel width must be >= 1");
  }
  if (!(width_mult > 0) || width_mult > 16)
    throw Error(ErrorKind::config, "width_mult must lie in (0, 16]");
  if (ge_channels < 1 || ge_channels > 255)
    throw Error(ErrorKind::config, "ge_channels must lie in [1, 255]");
  if (!(alpha >= 0 && alpha <= 1)) throw Error(ErrorKind::config, "alpha must lie in [0,1]");
  if (!(beta >= 0 && beta <= 1)) throw Error(ErrorKind::config, "beta must lie in [0,1]");
  if (!(lr > 0)) throw Error(ErrorKind::config, "lr must be positive");
  if (!(lr_final >= 0) || lr_final > lr)
    throw Error(ErrorKind::config, "lr_final must lie in [0, lr]");
  if (epochs < 0) throw Error(ErrorKind::config, "epochs must be non-negative");
  if (batch_size < 1) throw Error(ErrorKind::config, "batch_size must be at least 1");
  if (finetune_epochs < 0) throw Error(ErrorKind::config, "finetune_epochs must be non-negative");
  if (!(sparsity >= 0 && sparsity < 1))
    throw Error(ErrorKind::config, "sparsity must lie in [0, 1)");
  if (bits < 2 || bits > 8) throw Error(ErrorKind::config, "bits must lie in [2, 8]");
  if (entropy && !quantize)
    throw Error(ErrorKind::config, "entropy coding requires quantize=1");
  if (motion != "hs" && motion != "tdiff" && motion != "none")
    throw Error(ErrorKind::config, "motion must be hs, tdiff, or none");
  if (!(percentile > 0 && percentile <= 100))
    throw Error(ErrorKind::config, "percentile must lie in (0, 100]");
}

void Config::apply_quality(int quality) {
  switch (quality) {
    case 20: width_mult = 0.5; break;
    case 30: width_mult = 0.75; break;
    case 40: width_mult = 1.0; break;
    case 60: width_mult = 1.25; break;
    case 80: width_mult = 1.5; break;
    default:
      throw Error(ErrorKind::config,
                  "quality must be one of 20, 30, 40, 60, 80; got " + std::to_string(quality));
  }
  c = quality;
  channels.clear();  // quality drives the width; explicit lists would fight it
}

GridConfig Config::grid_for(int T, int N, int H, int W) const {
  int f = 1;
  for (int s : upscales) f *= s;
  if (H % f != 0 || W % f != 0)
    throw Error(ErrorKind::config, "frame size " + std::to_string(H) + "x" + std::to_string(W) +
                                       " is not divisible by the upscale product " +
                                       std::to_string(f));
  return GridConfig::make(T, N, H / f, W / f, c, ge, ge_channels);
}

NetConfig Config::net_for() const {
  NetConfig net;
  net.upscales = upscales;
  net.channels = channels.empty()
                     ? NetConfig::default_channels(static_cast<int>(upscales.size()), width_mult)
                     : channels;
  return net;
}

TrainConfig Config::train_for() const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.finetune_epochs = finetune_epochs;
  t.alpha = alpha;
  t.lr = lr;
  t.lr_final = lr_final;
  t.seed = seed;
  return t;
}

MGNR_NS_END
