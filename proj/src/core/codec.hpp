#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/dataio.hpp"
#include "core/training.hpp"

MGNR_NS_BEGIN

struct EncodeResult {
  std::vector<uint8_t> stream;
  VideoSequence recon;  // rendered from the decoded stream, not the live model
  TrainLog log;
  double bpp = 0;
  double psnr = 0;
  double ssim = 0;
  double seconds = 0;
};

// Full encode: motion masks, training, pruning, quantization-aware
// fine-tuning under the frozen quantizer, serialization. The reported
// quality comes from deserializing the produced stream and rendering,
// so it is exactly what any decoder will see.
EncodeResult encode_sequence(const VideoSequence& video, const Config& cfg);

VideoSequence decode_stream(const std::vector<uint8_t>& bytes);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

MGNR_NS_END
