#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

MGNR_NS_BEGIN

// Frames are channels-first [1,3,H,W] with unit-range values; disk form is
// binary PPM (P6, maxval 255) under root/v{view:02}/f{frame:04}.ppm.
struct VideoSequence {
  int N = 0, T = 0, H = 0, W = 0;
  std::vector<Tensor> frames;  // index v*T + t

  Tensor& frame(int v, int t);
  const Tensor& frame(int v, int t) const;
};

Tensor load_frame_ppm(const std::string& path);
void save_frame_ppm(const Tensor& frame, const std::string& path);

// Collapse values to exactly what a save/load round-trip through 8-bit
// PPM produces, so in-memory metrics equal on-disk metrics.
Tensor quantize_frame_8bit(const Tensor& frame);

std::string frame_rel_path(int v, int t);
VideoSequence load_sequence(const std::string& root);
void save_sequence(const VideoSequence& seq, const std::string& root);

// Grayscale dump for mask inspection: value = round(mask * 255), PGM P5.
void save_mask_pgm(const std::vector<scalar>& mask, int H, int W, const std::string& path);

struct SynthObject {
  int x = 0, y = 0, w = 8, h = 8;   // top-left and size at (t=0, v=0)
  double vx = 1, vy = 0;            // px/frame
  double r = 1, g = 0, b = 0;
};

// Plain-text key=value spec. Objects either given as
// objectK=x,y,w,h,vx,vy,r,g,b lines or auto-placed from `objects=K`.
struct SynthSpec {
  int views = 2, frames = 8, width = 64, height = 48;
  uint64_t seed = 1;
  double disparity = 2.0;  // horizontal px shift per view index
  std::vector<SynthObject> objects;
  int auto_objects = 2;  // used only when objects is empty

  static SynthSpec parse_file(const std::string& path);
  void validate() const;  // every object stays in frame for all (t, v)
};

struct SyntheticResult {
  VideoSequence video;
  // 1 = pixel belongs to a moving rectangle; index v*T + t.
  std::vector<std::vector<uint8_t>> object_masks;
};

SyntheticResult generate_synthetic(const SynthSpec& spec);

MGNR_NS_END
