#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bradcn/types.hpp"

namespace bradcn {

/// One all-in-focus / bokeh training pair. Both images share dimensions.
struct PairedSample {
  std::string id;
  ImageTensor sharp;
  ImageTensor bokeh;
};

/// One RGB image with aligned ground-truth depth, normalized to [0, 1].
struct RgbdSample {
  std::string id;
  ImageTensor rgb;
  DepthMap depth_gt;
};

/// Seed-reproducible train/test id split. train and test never intersect.
struct SplitManifest {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  uint64_t seed = 0;
};

/// Loads a paired corpus from `root/original` and `root/bokeh`. Samples are
/// matched by filename stem; files present on only one side are a hard error
/// naming the offenders. Ids come back lexicographically sorted. Decoding
/// parallelizes across files; BRADCN_NUM_WORKERS caps the worker count.
std::vector<PairedSample> load_paired_corpus(const std::filesystem::path& root);

/// Loads an RGB-D corpus from `root/rgb` and `root/depth`. Depth files must
/// be single-channel 16-bit PNGs (DecodeError otherwise) with the RGB
/// image's dimensions (ShapeError otherwise); values are min-max normalized
/// per image.
std::vector<RgbdSample> load_rgbd_corpus(const std::filesystem::path& root);

std::vector<std::string> corpus_ids(const std::vector<PairedSample>& corpus);
std::vector<std::string> corpus_ids(const std::vector<RgbdSample>& corpus);

/// Uniform random disjoint train/test selection, deterministic in seed and
/// stable across platforms. Throws CountError when counts exceed the corpus.
SplitManifest make_split(const std::vector<std::string>& ids, int64_t train_count,
                         int64_t test_count, uint64_t seed);

/// Writes train_manifest.txt / test_manifest.txt under dir: one-line header
/// `seed=<int>`, then newline-delimited ids.
void save_manifest(const SplitManifest& manifest, const std::filesystem::path& dir);

/// Loads and cross-checks a manifest pair; a train/test overlap is a hard
/// error.
SplitManifest load_manifest(const std::filesystem::path& dir);

template <typename Sample>
std::vector<Sample> subset_by_ids(const std::vector<Sample>& corpus,
                                  const std::vector<std::string>& ids) {
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    for (const auto& s : corpus) {
      if (s.id == id) {
        out.push_back(s);
        break;
      }
    }
  }
  return out;
}

/// Synthetic scene generation knobs. Blur radius in pixels is
/// round(blur_scale * |depth - focus|) capped at max_radius; the focus plane
/// defaults to the nearest shape's depth (fixed_focus overrides).
struct SynthOptions {
  double blur_scale = 10.0;
  int64_t max_radius = 6;
  int64_t min_shapes = 3;
  int64_t max_shapes = 5;
  std::optional<double> fixed_focus;
};

struct SynthScenes {
  std::vector<RgbdSample> rgbd;
  std::vector<PairedSample> pairs;
  std::vector<double> focus_depths;  // per scene
};

/// Procedural scenes of colored shapes over a depth-graded background.
/// Depth is analytic (exact per pixel) and shape colors are keyed to depth,
/// so depth is recoverable from appearance. The bokeh target is produced by
/// disc_blur, making it exactly reproducible by an independent
/// reimplementation.
SynthScenes synth_scene(int64_t n, std::pair<int64_t, int64_t> hw, uint64_t seed,
                        const SynthOptions& options = {});

/// Classical depth-dependent disc blur (gather form), computed in double
/// precision. For every pixel p with radius r(p) = round(blur_scale *
/// |depth(p) - focus|) clamped to max_radius, the output is the mean of the
/// sharp image over the in-bounds disc of radius r(p) centered at p
/// (offsets with dx^2 + dy^2 <= r^2).
torch::Tensor disc_blur(const torch::Tensor& sharp_chw, const torch::Tensor& depth_hw,
                        double focus, double blur_scale, int64_t max_radius);

/// Writes a synthetic corpus in the canonical on-disk layout:
/// paired/original, paired/bokeh, rgbd/rgb, rgbd/depth.
void write_synth_corpus(const SynthScenes& scenes, const std::filesystem::path& root);

}  // namespace bradcn
