#include "bradcn/data.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "bradcn/errors.hpp"
#include "bradcn/image_io.hpp"
#include "bradcn/rng.hpp"

namespace bradcn {

namespace fs = std::filesystem;
namespace F = torch::nn::functional;

namespace {

int64_t decode_workers(int64_t jobs) {
  int64_t workers = static_cast<int64_t>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (const char* env = std::getenv("BRADCN_NUM_WORKERS")) {
    try {
      workers = std::min(workers, std::max<int64_t>(1, std::stoll(env)));
    } catch (const std::exception&) {
      throw ConfigError("BRADCN_NUM_WORKERS must be an integer");
    }
  }
  return std::min(workers, std::max<int64_t>(1, jobs));
}

/// Runs fn(i) for i in [0, jobs) on a small worker pool; rethrows the first
/// failure after joining.
template <typename Fn>
void parallel_for(int64_t jobs, Fn&& fn) {
  const int64_t workers = decode_workers(jobs);
  if (workers <= 1) {
    for (int64_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int64_t t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      while (true) {
        const int64_t i = next.fetch_add(1);
        if (i >= jobs) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::map<std::string, fs::path> index_by_stem(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw LayoutError("missing corpus subdirectory: " + dir.string());
  }
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto stem = entry.path().stem().string();
    if (out.count(stem)) {
      throw LayoutError("duplicate id '" + stem + "' in " + dir.string());
    }
    out[stem] = entry.path();
  }
  return out;
}

std::vector<std::string> matched_ids(const std::map<std::string, fs::path>& a,
                                     const std::map<std::string, fs::path>& b,
                                     const std::string& a_name, const std::string& b_name) {
  std::vector<std::string> orphans;
  for (const auto& [stem, _] : a) {
    if (!b.count(stem)) orphans.push_back(a_name + "/" + stem);
  }
  for (const auto& [stem, _] : b) {
    if (!a.count(stem)) orphans.push_back(b_name + "/" + stem);
  }
  if (!orphans.empty()) {
    std::ostringstream msg;
    msg << "unmatched corpus files:";
    for (const auto& o : orphans) msg << " " << o;
    throw LayoutError(msg.str());
  }
  std::vector<std::string> ids;
  ids.reserve(a.size());
  for (const auto& [stem, _] : a) ids.push_back(stem);  // map iterates sorted
  return ids;
}

}  // namespace

std::vector<PairedSample> load_paired_corpus(const fs::path& root) {
  const auto originals = index_by_stem(root / "original");
  const auto bokehs = index_by_stem(root / "bokeh");
  const auto ids = matched_ids(originals, bokehs, "original", "bokeh");

  std::vector<PairedSample> corpus(ids.size());
  parallel_for(static_cast<int64_t>(ids.size()), [&](int64_t i) {
    const auto& id = ids[static_cast<size_t>(i)];
    PairedSample s;
    s.id = id;
    s.sharp = read_image_rgb8(originals.at(id));
    s.bokeh = read_image_rgb8(bokehs.at(id));
    if (s.sharp.data.sizes() != s.bokeh.data.sizes()) {
      throw ShapeError("pair '" + id + "': sharp and bokeh dimensions differ");
    }
    corpus[static_cast<size_t>(i)] = std::move(s);
  });
  return corpus;
}

std::vector<RgbdSample> load_rgbd_corpus(const fs::path& root) {
  const auto rgbs = index_by_stem(root / "rgb");
  const auto depths = index_by_stem(root / "depth");
  const auto ids = matched_ids(rgbs, depths, "rgb", "depth");

  std::vector<RgbdSample> corpus(ids.size());
  parallel_for(static_cast<int64_t>(ids.size()), [&](int64_t i) {
    const auto& id = ids[static_cast<size_t>(i)];
    RgbdSample s;
    s.id = id;
    s.rgb = read_image_rgb8(rgbs.at(id));
    auto raw = read_depth_png16(depths.at(id));
    if (raw.size(2) != s.rgb.height() || raw.size(3) != s.rgb.width()) {
      std::ostringstream msg;
      msg << "sample '" << id << "': rgb " << s.rgb.height() << "x" << s.rgb.width()
          << " but depth " << raw.size(2) << "x" << raw.size(3);
      throw ShapeError(msg.str());
    }
    const auto lo = raw.min();
    const auto span = torch::clamp_min(raw.max() - lo, 1e-12);
    s.depth_gt = DepthMap((raw - lo) / span);
    corpus[static_cast<size_t>(i)] = std::move(s);
  });
  return corpus;
}

std::vector<std::string> corpus_ids(const std::vector<PairedSample>& corpus) {
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& s : corpus) ids.push_back(s.id);
  return ids;
}

std::vector<std::string> corpus_ids(const std::vector<RgbdSample>& corpus) {
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& s : corpus) ids.push_back(s.id);
  return ids;
}

SplitManifest make_split(const std::vector<std::string>& ids, int64_t train_count,
                         int64_t test_count, uint64_t seed) {
  if (train_count < 0 || test_count < 0 ||
      train_count + test_count > static_cast<int64_t>(ids.size())) {
    std::ostringstream msg;
    msg << "split " << train_count << "+" << test_count << " exceeds corpus size " << ids.size();
    throw CountError(msg.str());
  }
  std::vector<std::string> pool = ids;
  std::sort(pool.begin(), pool.end());
  Rng rng(mix_seed(seed, {0x5eedu, pool.size()}));
  rng.shuffle(pool);

  SplitManifest m;
  m.seed = seed;
  m.train_ids.assign(pool.begin(), pool.begin() + train_count);
  m.test_ids.assign(pool.begin() + train_count, pool.begin() + train_count + test_count);
  std::sort(m.train_ids.begin(), m.train_ids.end());
  std::sort(m.test_ids.begin(), m.test_ids.end());
  return m;
}

namespace {

void write_id_file(const fs::path& path, uint64_t seed, const std::vector<std::string>& ids) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << "seed=" << seed << "\n";
  for (const auto& id : ids) out << id << "\n";
}

std::pair<uint64_t, std::vector<std::string>> read_id_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read manifest: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("seed=", 0) != 0) {
    throw DataError("manifest missing 'seed=<int>' header: " + path.string());
  }
  uint64_t seed = 0;
  try {
    seed = std::stoull(line.substr(5));
  } catch (const std::exception&) {
    throw DataError("manifest has malformed seed header: " + path.string());
  }
  std::vector<std::string> ids;
  while (std::getline(in, line)) {
    if (!line.empty()) ids.push_back(line);
  }
  return {seed, ids};
}

}  // namespace

void save_manifest(const SplitManifest& manifest, const fs::path& dir) {
  fs::create_directories(dir);
  write_id_file(dir / "train_manifest.txt", manifest.seed, manifest.train_ids);
  write_id_file(dir / "test_manifest.txt", manifest.seed, manifest.test_ids);
}

SplitManifest load_manifest(const fs::path& dir) {
  auto [train_seed, train_ids] = read_id_file(dir / "train_manifest.txt");
  auto [test_seed, test_ids] = read_id_file(dir / "test_manifest.txt");
  if (train_seed != test_seed) {
    throw DataError("manifest pair has mismatched seeds in " + dir.string());
  }
  std::set<std::string> train_set(train_ids.begin(), train_ids.end());
  for (const auto& id : test_ids) {
    if (train_set.count(id)) {
      throw DataError("manifest leak: id '" + id + "' is in both train and test");
    }
  }
  SplitManifest m;
  m.seed = train_seed;
  m.train_ids = std::move(train_ids);
  m.test_ids = std::move(test_ids);
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

torch::Tensor disc_blur(const torch::Tensor& sharp_chw, const torch::Tensor& depth_hw,
                        double focus, double blur_scale, int64_t max_radius) {
  if (sharp_chw.dim() != 3 || depth_hw.dim() != 2) {
    throw ShapeError("disc_blur expects (C, H, W) image and (H, W) depth");
  }
  if (sharp_chw.size(1) != depth_hw.size(0) || sharp_chw.size(2) != depth_hw.size(1)) {
    throw ShapeError("disc_blur: image and depth dims differ");
  }
  auto sharp = sharp_chw.to(torch::kDouble);
  auto depth = depth_hw.to(torch::kDouble);
  const int64_t c = sharp.size(0);
  const int64_t h = sharp.size(1);
  const int64_t w = sharp.size(2);

  auto radii = torch::round(blur_scale * (depth - focus).abs())
                   .clamp(0, static_cast<double>(max_radius))
                   .to(torch::kLong);
  auto out = torch::zeros_like(sharp);
  auto sharp4 = sharp.unsqueeze(0);
  auto ones = torch::ones({1, 1, h, w}, torch::kDouble);

  for (int64_t r = 0; r <= max_radius; ++r) {
    auto mask = (radii == r);
    if (!mask.any().item<bool>()) continue;
    auto mask_d = mask.to(torch::kDouble);
    if (r == 0) {
      out = out + sharp * mask_d;
      continue;
    }
    const int64_t k = 2 * r + 1;
    auto yy = torch::arange(k, torch::kDouble) - r;
    auto disc = (yy.reshape({k, 1}).pow(2) + yy.reshape({1, k}).pow(2) <=
                 static_cast<double>(r * r))
                    .to(torch::kDouble)
                    .reshape({1, 1, k, k});
    auto num = F::conv2d(sharp4, disc.expand({c, 1, k, k}).contiguous(),
                         F::Conv2dFuncOptions().groups(c).padding(r));
    auto den = F::conv2d(ones, disc, F::Conv2dFuncOptions().padding(r));
    out = out + (num / den).squeeze(0) * mask_d;
  }
  return out;
}

namespace {

struct Shape {
  bool is_circle;
  double cx, cy;      // center (pixels)
  double radius;      // circles
  double half_w, half_h;  // rectangles
  double depth;
  double r, g, b;
};

// Depth-keyed palette with a little jitter: appearance carries depth.
void depth_color(double depth, Rng& rng, double* r, double* g, double* b) {
  *r = std::clamp(0.15 + 0.75 * depth + 0.08 * (rng.next_real() - 0.5), 0.0, 1.0);
  *g = std::clamp(0.80 - 0.60 * depth + 0.08 * (rng.next_real() - 0.5), 0.0, 1.0);
  *b = std::clamp(0.30 + 0.40 * std::sin(6.28318530717958648 * depth) * 0.5 + 0.2 +
                      0.08 * (rng.next_real() - 0.5),
                  0.0, 1.0);
}

}  // namespace

SynthScenes synth_scene(int64_t n, std::pair<int64_t, int64_t> hw, uint64_t seed,
                        const SynthOptions& options) {
  const int64_t h = hw.first;
  const int64_t w = hw.second;
  SynthScenes scenes;

  for (int64_t scene = 0; scene < n; ++scene) {
    Rng rng(mix_seed(seed, {0x5ce9eull, static_cast<uint64_t>(scene)}));

    auto depth = torch::empty({h, w}, torch::kDouble);
    auto img = torch::empty({3, h, w}, torch::kDouble);
    auto da = depth.accessor<double, 2>();
    auto ia = img.accessor<double, 3>();

    // Far background: vertical depth ramp with a matching muted color ramp.
    for (int64_t y = 0; y < h; ++y) {
      const double t = h > 1 ? static_cast<double>(y) / static_cast<double>(h - 1) : 0.0;
      const double d_bg = 0.80 + 0.20 * t;
      for (int64_t x = 0; x < w; ++x) {
        const double u = w > 1 ? static_cast<double>(x) / static_cast<double>(w - 1) : 0.0;
        da[y][x] = d_bg;
        ia[0][y][x] = 0.25 + 0.10 * t;
        ia[1][y][x] = 0.30 + 0.10 * u;
        ia[2][y][x] = 0.45 - 0.10 * t;
      }
    }

    const int64_t count = rng.next_int(options.min_shapes, options.max_shapes);
    std::vector<Shape> shapes;
    for (int64_t i = 0; i < count; ++i) {
      Shape s;
      s.is_circle = rng.next_real() < 0.5;
      s.cx = rng.next_real() * static_cast<double>(w - 1);
      s.cy = rng.next_real() * static_cast<double>(h - 1);
      const double min_dim = static_cast<double>(std::min(h, w));
      s.radius = (0.08 + 0.17 * rng.next_real()) * min_dim;
      s.half_w = (0.07 + 0.15 * rng.next_real()) * min_dim;
      s.half_h = (0.07 + 0.15 * rng.next_real()) * min_dim;
      s.depth = 0.10 + 0.65 * rng.next_real();
      depth_color(s.depth, rng, &s.r, &s.g, &s.b);
      shapes.push_back(s);
    }
    // Paint far to near so nearer shapes occlude.
    std::sort(shapes.begin(), shapes.end(),
              [](const Shape& a, const Shape& b) { return a.depth > b.depth; });
    for (const auto& s : shapes) {
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
          const double dx = static_cast<double>(x) - s.cx;
          const double dy = static_cast<double>(y) - s.cy;
          const bool inside = s.is_circle
                                  ? (dx * dx + dy * dy <= s.radius * s.radius)
                                  : (std::abs(dx) <= s.half_w && std::abs(dy) <= s.half_h);
          if (inside) {
            da[y][x] = s.depth;
            ia[0][y][x] = s.r;
            ia[1][y][x] = s.g;
            ia[2][y][x] = s.b;
          }
        }
      }
    }

    double focus = options.fixed_focus.value_or(0.0);
    if (!options.fixed_focus) {
      // Focus on the nearest shape (the subject); background stays far.
      focus = 1.0;
      for (const auto& s : shapes) focus = std::min(focus, s.depth);
    }

    auto bokeh = disc_blur(img, depth, focus, options.blur_scale, options.max_radius);

    std::ostringstream id;
    id << "scene_" << std::setw(4) << std::setfill('0') << scene;

    RgbdSample rgbd;
    rgbd.id = id.str();
    rgbd.rgb = ImageTensor(img.to(torch::kFloat32).unsqueeze(0).contiguous());
    rgbd.depth_gt = DepthMap(depth.to(torch::kFloat32).reshape({1, 1, h, w}).contiguous());

    PairedSample pair;
    pair.id = id.str();
    pair.sharp = ImageTensor(rgbd.rgb.data.clone());
    pair.bokeh = ImageTensor(bokeh.clamp(0.0, 1.0).to(torch::kFloat32).unsqueeze(0).contiguous());

    scenes.rgbd.push_back(std::move(rgbd));
    scenes.pairs.push_back(std::move(pair));
    scenes.focus_depths.push_back(focus);
  }
  return scenes;
}

void write_synth_corpus(const SynthScenes& scenes, const fs::path& root) {
  fs::create_directories(root / "paired" / "original");
  fs::create_directories(root / "paired" / "bokeh");
  fs::create_directories(root / "rgbd" / "rgb");
  fs::create_directories(root / "rgbd" / "depth");
  for (const auto& p : scenes.pairs) {
    write_image_rgb8(p.sharp, root / "paired" / "original" / (p.id + ".png"));
    write_image_rgb8(p.bokeh, root / "paired" / "bokeh" / (p.id + ".png"));
  }
  for (const auto& s : scenes.rgbd) {
    write_image_rgb8(s.rgb, root / "rgbd" / "rgb" / (s.id + ".png"));
    // store as integer millimeters in [0, 4000]
    write_depth_png16(s.depth_gt.data * 4000.0, root / "rgbd" / "depth" / (s.id + ".png"));
  }
}

}  // namespace bradcn
