#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqzt/tensor.hpp"

namespace sqzt {

/// Direction classes of the synthetic temporal-order task. A single frame
/// determines position but never direction: starts are uniform over the full
/// (wrapping) frame, so the per-frame marginal is identical across classes.
enum class Motion : int { right = 0, left = 1, up = 2, down = 3 };

inline const char* motion_name(int label) {
  switch (label) {
    case 0: return "move_right";
    case 1: return "move_left";
    case 2: return "move_up";
    case 3: return "move_down";
    default: return "?";
  }
}

struct SyntheticVideoSpec {
  int per_class = 50;
  int height = 48;
  int width = 48;
  int length = 32;     // frames per video
  int object_size = 7;
  double noise_std = 0.05;
  double speed = 1.25;  // px per frame along the class direction
  uint64_t seed = 7;

  void validate() const;
};

struct VideoRecord {
  Tensor<float> frames;  // (3,L,h,w) in [0,1]
  int label = 0;
};

/// One bright square translating along the class direction over L frames
/// (wrapping at the borders) plus additive Gaussian noise, clamped to [0,1].
/// Deterministic under the spec seed.
std::vector<VideoRecord> generate_dataset(const SyntheticVideoSpec& spec);

// "SQVD" container: magic, version, counts, dims, dtype tag, then records as
// little-endian raw f32 frames followed by one label byte each.
void save_dataset(const std::string& path, const std::vector<VideoRecord>& records);
std::vector<VideoRecord> load_dataset(const std::string& path);

/// Dense sampling: frame indices offset + i*interval for i in [0,T), wrapped
/// modulo the video length.
Tensor<float> sample_clip(const VideoRecord& video, int t, int interval, int offset);

/// n_clips temporal offsets evenly spaced over L x n_crops spatial crops
/// along the longer axis (centered on the other axis). crop_h/crop_w of 0
/// mean the full frame.
std::vector<Tensor<float>> make_views(const VideoRecord& video, int t, int interval, int n_clips,
                                      int n_crops, int crop_h, int crop_w);

/// Horizontal flip of a clip (3,T,h,w); swaps the left/right labels.
Tensor<float> hflip_clip(const Tensor<float>& clip);
inline int hflip_label(int label) {
  if (label == static_cast<int>(Motion::right)) return static_cast<int>(Motion::left);
  if (label == static_cast<int>(Motion::left)) return static_cast<int>(Motion::right);
  return label;
}

/// In-place random permutation of the T frames of a clip (3,T,h,w).
void shuffle_clip_frames(Tensor<float>& clip, Rng& rng);

}  // namespace sqzt
