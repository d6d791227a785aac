#include "sqzt/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sqzt {

void SyntheticVideoSpec::validate() const {
  if (per_class < 1) throw std::invalid_argument("datagen: per_class must be >= 1");
  if (length < 1) throw std::invalid_argument("datagen: length must be >= 1");
  if (object_size < 1 || object_size > height || object_size > width) {
    throw std::invalid_argument("datagen: object size " + std::to_string(object_size) +
                                " does not fit a " + std::to_string(height) + "x" +
                                std::to_string(width) + " frame");
  }
  if (noise_std < 0) throw std::invalid_argument("datagen: noise_std must be >= 0");
  if (speed <= 0) throw std::invalid_argument("datagen: speed must be > 0");
}

namespace {

inline int64_t wrap(int64_t v, int64_t m) {
  v %= m;
  return v < 0 ? v + m : v;
}

}  // namespace

std::vector<VideoRecord> generate_dataset(const SyntheticVideoSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int64_t h = spec.height, w = spec.width, L = spec.length;
  const int64_t plane = h * w;
  // direction unit vectors (dx,dy) per class
  const double dir[4][2] = {{1, 0}, {-1, 0}, {0, -1}, {0, 1}};

  std::vector<VideoRecord> out;
  out.reserve(static_cast<size_t>(4 * spec.per_class));
  for (int cls = 0; cls < 4; ++cls) {
    for (int s = 0; s < spec.per_class; ++s) {
      VideoRecord rec;
      rec.label = cls;
      rec.frames = Tensor<float>({3, L, h, w});
      const double sx = rng.uniform(0.0, static_cast<double>(w));
      const double sy = rng.uniform(0.0, static_cast<double>(h));
      for (int64_t t = 0; t < L; ++t) {
        const double cx = sx + spec.speed * static_cast<double>(t) * dir[cls][0];
        const double cy = sy + spec.speed * static_cast<double>(t) * dir[cls][1];
        const int64_t x0 = static_cast<int64_t>(std::llround(cx)) - spec.object_size / 2;
        const int64_t y0 = static_cast<int64_t>(std::llround(cy)) - spec.object_size / 2;
        for (int64_t dy = 0; dy < spec.object_size; ++dy) {
          const int64_t yy = wrap(y0 + dy, h);
          for (int64_t dx = 0; dx < spec.object_size; ++dx) {
            const int64_t xx = wrap(x0 + dx, w);
            for (int64_t c = 0; c < 3; ++c) {
              rec.frames[(c * L + t) * plane + yy * w + xx] = 1.0f;
            }
          }
        }
      }
      if (spec.noise_std > 0) {
        for (int64_t i = 0; i < rec.frames.numel(); ++i) {
          const float v = rec.frames[i] + static_cast<float>(rng.normal() * spec.noise_std);
          rec.frames[i] = std::clamp(v, 0.0f, 1.0f);
        }
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'V', 'D'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("dataset: truncated file");
  return v;
}

}  // namespace

void save_dataset(const std::string& path, const std::vector<VideoRecord>& records) {
  if (records.empty()) throw std::invalid_argument("dataset: nothing to save");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("dataset: cannot open '" + path + "' for writing");
  const Tensor<float>& f0 = records.front().frames;
  const uint32_t L = static_cast<uint32_t>(f0.extent(1));
  const uint32_t h = static_cast<uint32_t>(f0.extent(2));
  const uint32_t w = static_cast<uint32_t>(f0.extent(3));
  int max_label = 0;
  for (const VideoRecord& r : records) max_label = std::max(max_label, r.label);
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, static_cast<uint32_t>(records.size()));
  write_pod(os, static_cast<uint32_t>(max_label + 1));
  write_pod(os, L);
  write_pod(os, h);
  write_pod(os, w);
  write_pod(os, static_cast<uint8_t>(0));  // dtype f32
  for (const VideoRecord& r : records) {
    if (r.frames.shape() != f0.shape()) {
      throw std::invalid_argument("dataset: inconsistent record shapes");
    }
    os.write(reinterpret_cast<const char*>(r.frames.data()),
             static_cast<std::streamsize>(sizeof(float)) * r.frames.numel());
    const uint8_t lab = static_cast<uint8_t>(r.label);
    os.write(reinterpret_cast<const char*>(&lab), 1);
  }
  if (!os) throw std::runtime_error("dataset: write failed for '" + path + "'");
}

std::vector<VideoRecord> load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("dataset: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("dataset: '" + path + "' is not an SQVD file");
  }
  const uint32_t version = read_pod<uint32_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("dataset: unsupported SQVD version " + std::to_string(version));
  }
  const uint32_t n = read_pod<uint32_t>(is);
  read_pod<uint32_t>(is);  // class count (informational)
  const uint32_t L = read_pod<uint32_t>(is);
  const uint32_t h = read_pod<uint32_t>(is);
  const uint32_t w = read_pod<uint32_t>(is);
  const uint8_t dtype = read_pod<uint8_t>(is);
  if (dtype != 0) throw std::runtime_error("dataset: unsupported dtype tag");
  std::vector<VideoRecord> out;
  out.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    VideoRecord r;
    r.frames = Tensor<float>({3, L, h, w});
    is.read(reinterpret_cast<char*>(r.frames.data()),
            static_cast<std::streamsize>(sizeof(float)) * r.frames.numel());
    uint8_t lab = 0;
    is.read(reinterpret_cast<char*>(&lab), 1);
    if (!is) throw std::runtime_error("dataset: truncated record " + std::to_string(i));
    r.label = lab;
    out.push_back(std::move(r));
  }
  return out;
}

Tensor<float> sample_clip(const VideoRecord& video, int t, int interval, int offset) {
  if (t < 1 || interval < 1) {
    throw std::invalid_argument("sample_clip: T and interval must be >= 1");
  }
  const int64_t L = video.frames.extent(1);
  const int64_t h = video.frames.extent(2), w = video.frames.extent(3);
  const int64_t plane = h * w;
  Tensor<float> clip({3, t, h, w});
  for (int64_t c = 0; c < 3; ++c) {
    for (int64_t i = 0; i < t; ++i) {
      const int64_t idx = wrap(offset + i * interval, L);
      std::copy(video.frames.data() + (c * L + idx) * plane,
                video.frames.data() + (c * L + idx + 1) * plane,
                clip.data() + (c * t + i) * plane);
    }
  }
  return clip;
}

std::vector<Tensor<float>> make_views(const VideoRecord& video, int t, int interval, int n_clips,
                                      int n_crops, int crop_h, int crop_w) {
  if (n_clips < 1 || n_crops < 1) {
    throw std::invalid_argument("make_views: clip and crop counts must be >= 1");
  }
  const int64_t L = video.frames.extent(1);
  const int64_t h = video.frames.extent(2), w = video.frames.extent(3);
  if (crop_h <= 0) crop_h = static_cast<int>(h);
  if (crop_w <= 0) crop_w = static_cast<int>(w);
  if (crop_h > h || crop_w > w) {
    throw std::invalid_argument("make_views: crop " + std::to_string(crop_h) + "x" +
                                std::to_string(crop_w) + " larger than frame " +
                                std::to_string(h) + "x" + std::to_string(w));
  }

  // crop origins: evenly spaced along the longer axis, centered on the other
  const bool along_w = w >= h;
  const int64_t span = along_w ? w - crop_w : h - crop_h;
  std::vector<std::pair<int64_t, int64_t>> origins;  // (y0, x0)
  for (int i = 0; i < n_crops; ++i) {
    const int64_t off = n_crops == 1
                            ? span / 2
                            : static_cast<int64_t>(std::llround(
                                  static_cast<double>(i) * static_cast<double>(span) /
                                  static_cast<double>(n_crops - 1)));
    const int64_t y0 = along_w ? (h - crop_h) / 2 : off;
    const int64_t x0 = along_w ? off : (w - crop_w) / 2;
    origins.emplace_back(y0, x0);
  }

  std::vector<Tensor<float>> views;
  views.reserve(static_cast<size_t>(n_clips) * static_cast<size_t>(n_crops));
  for (int j = 0; j < n_clips; ++j) {
    const int offset = static_cast<int>(static_cast<int64_t>(j) * L / n_clips);
    Tensor<float> clip = sample_clip(video, t, interval, offset);
    for (auto [y0, x0] : origins) {
      Tensor<float> view({3, t, crop_h, crop_w});
      for (int64_t c = 0; c < 3; ++c) {
        for (int64_t ti = 0; ti < t; ++ti) {
          for (int64_t y = 0; y < crop_h; ++y) {
            const float* src = clip.data() + ((c * t + ti) * h + y0 + y) * w + x0;
            std::copy(src, src + crop_w, view.data() + ((c * t + ti) * crop_h + y) * crop_w);
          }
        }
      }
      views.push_back(std::move(view));
    }
  }
  return views;
}

Tensor<float> hflip_clip(const Tensor<float>& clip) {
  if (clip.rank() != 4) throw std::invalid_argument("hflip_clip: expected (3,T,h,w)");
  Tensor<float> out(clip.shape());
  const int64_t planes = clip.extent(0) * clip.extent(1);
  const int64_t h = clip.extent(2), w = clip.extent(3);
  for (int64_t p = 0; p < planes; ++p) {
    for (int64_t y = 0; y < h; ++y) {
      const float* src = clip.data() + (p * h + y) * w;
      float* dst = out.data() + (p * h + y) * w;
      for (int64_t x = 0; x < w; ++x) dst[x] = src[w - 1 - x];
    }
  }
  return out;
}

void shuffle_clip_frames(Tensor<float>& clip, Rng& rng) {
  if (clip.rank() != 4) throw std::invalid_argument("shuffle_clip_frames: expected (3,T,h,w)");
  const int64_t t = clip.extent(1);
  std::vector<int64_t> perm(static_cast<size_t>(t));
  for (int64_t i = 0; i < t; ++i) perm[static_cast<size_t>(i)] = i;
  rng.shuffle(perm);
  const int64_t plane = clip.extent(2) * clip.extent(3);
  Tensor<float> tmp(clip.shape());
  for (int64_t c = 0; c < 3; ++c) {
    for (int64_t i = 0; i < t; ++i) {
      std::copy(clip.data() + (c * t + perm[static_cast<size_t>(i)]) * plane,
                clip.data() + (c * t + perm[static_cast<size_t>(i)] + 1) * plane,
                tmp.data() + (c * t + i) * plane);
    }
  }
  clip = std::move(tmp);
}

}  // namespace sqzt
