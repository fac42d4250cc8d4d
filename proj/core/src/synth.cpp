#include "toolnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace toolnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// cheap value noise for the background texture
double hash_noise(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return static_cast<double>(mix(mix(a, b), c) & 0xffffff) / static_cast<double>(0xffffff);
}

struct Rgb {
  double r, g, b;
};

Rgb class_color(std::size_t class_index, std::size_t vocab_offset) {
  // golden-ratio hue sequence keeps colors well separated
  double hue = std::fmod(static_cast<double>(class_index + vocab_offset) * 0.61803398875, 1.0);
  double h6 = hue * 6.0;
  double s = 0.9, v = 0.9;
  int i = static_cast<int>(h6) % 6;
  double f = h6 - std::floor(h6);
  double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

double dist_to_segment(double px, double py, double ax, double ay, double bx, double by) {
  double dx = bx - ax, dy = by - ay;
  double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? std::clamp(((px - ax) * dx + (py - ay) * dy) / len2, 0.0, 1.0) : 0.0;
  double qx = ax + t * dx, qy = ay + t * dy;
  return std::hypot(px - qx, py - qy);
}

struct ToolPose {
  double cx, cy;      // anchor, in pixels
  double angle;       // radians
  double scale;       // relative size jitter
};

void render_frame(Image& img, std::size_t video_idx, std::size_t frame_idx,
                  const std::vector<std::size_t>& active_classes, const std::vector<ToolPose>& poses,
                  std::size_t vocab_offset, std::uint64_t seed) {
  std::size_t w = img.width, h = img.height;
  double cx = 0.5 * static_cast<double>(w);
  double cy = 0.5 * static_cast<double>(h);
  // slight per-frame camera jitter
  cx += 2.0 * (hash_noise(seed, video_idx * 131 + frame_idx, 7) - 0.5);
  cy += 2.0 * (hash_noise(seed, video_idx * 131 + frame_idx, 11) - 0.5);
  double eye_r = 0.45 * static_cast<double>(std::min(w, h));
  // per-video iris tint
  Rgb iris = class_color(video_idx, 97);

  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double r = std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy);
      double base = 0.55, rr = base, gg = base * 0.85, bb = base * 0.8;
      if (r < eye_r) {
        double ring = r / eye_r;
        rr = 0.25 + 0.35 * iris.r * (1.0 - ring);
        gg = 0.25 + 0.35 * iris.g * (1.0 - ring);
        bb = 0.25 + 0.35 * iris.b * (1.0 - ring);
        if (r < 0.25 * eye_r) {
          rr *= 0.3;
          gg *= 0.3;
          bb *= 0.3;
        }
      }
      double n = 0.06 * (hash_noise(x / 3, y / 3, mix(seed, video_idx)) - 0.5);
      img.at(0, y, x) = std::clamp(rr + n, 0.0, 1.0);
      img.at(1, y, x) = std::clamp(gg + n, 0.0, 1.0);
      img.at(2, y, x) = std::clamp(bb + n, 0.0, 1.0);
    }
  }

  double dim = static_cast<double>(std::min(w, h));
  for (std::size_t ai = 0; ai < active_classes.size(); ++ai) {
    std::size_t cls = active_classes[ai];
    const ToolPose& pose = poses[cls];
    Rgb col = class_color(cls, vocab_offset);
    std::size_t kind = (cls + vocab_offset) % 3;
    // thin elongated shapes, thickness 3-6% of the smaller image extent
    double thick = (0.03 + 0.03 * static_cast<double>((cls + vocab_offset) % 4) / 3.0) * dim * pose.scale;
    double len = 0.55 * dim * pose.scale;
    double ct = std::cos(pose.angle), st = std::sin(pose.angle);

    double ax = pose.cx - 0.5 * len * ct, ay = pose.cy - 0.5 * len * st;
    double bx = pose.cx + 0.5 * len * ct, by = pose.cy + 0.5 * len * st;
    double radius = 0.5 * len * 0.5;

    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double px = static_cast<double>(x), py = static_cast<double>(y);
        bool hit = false;
        if (kind == 0) {  // line
          hit = dist_to_segment(px, py, ax, ay, bx, by) < 0.5 * thick;
        } else if (kind == 1) {  // ring
          double r = std::hypot(px - pose.cx, py - pose.cy);
          hit = std::abs(r - radius) < 0.5 * thick;
        } else {  // open triangle outline
          double x1 = pose.cx + radius * std::cos(pose.angle);
          double y1 = pose.cy + radius * std::sin(pose.angle);
          double x2 = pose.cx + radius * std::cos(pose.angle + 2.094);
          double y2 = pose.cy + radius * std::sin(pose.angle + 2.094);
          double x3 = pose.cx + radius * std::cos(pose.angle + 4.189);
          double y3 = pose.cy + radius * std::sin(pose.angle + 4.189);
          hit = dist_to_segment(px, py, x1, y1, x2, y2) < 0.5 * thick ||
                dist_to_segment(px, py, x2, y2, x3, y3) < 0.5 * thick ||
                dist_to_segment(px, py, x3, y3, x1, y1) < 0.5 * thick;
        }
        if (hit) {
          img.at(0, y, x) = col.r;
          img.at(1, y, x) = col.g;
          img.at(2, y, x) = col.b;
        }
      }
    }
  }
}

std::vector<std::vector<std::uint8_t>> video_coverage(const GeneratorConfig& cfg) {
  // covered[class][video]: which videos may show the class; deterministic.
  std::size_t c = cfg.classes.size();
  std::vector<std::vector<std::uint8_t>> covered(c, std::vector<std::uint8_t>(cfg.num_videos, 0));
  std::mt19937_64 rng(mix(cfg.seed, 0xc0ffee));
  for (std::size_t i = 0; i < c; ++i) {
    std::size_t cov = cfg.classes[i].coverage == 0 ? cfg.num_videos : cfg.classes[i].coverage;
    std::vector<std::size_t> vids(cfg.num_videos);
    std::iota(vids.begin(), vids.end(), 0);
    std::shuffle(vids.begin(), vids.end(), rng);
    for (std::size_t j = 0; j < cov; ++j) covered[i][vids[j]] = 1;
  }
  return covered;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (classes.size() < 2) throw std::invalid_argument("GeneratorConfig: need at least 2 classes");
  if (image_w < 32 || image_h < 32) throw std::invalid_argument("GeneratorConfig: image size must be >= 32x32");
  if (num_videos < 1 || frames_per_video < 1) {
    throw std::invalid_argument("GeneratorConfig: need at least one video and frame");
  }
  if (max_simultaneous < 1) throw std::invalid_argument("GeneratorConfig: max_simultaneous must be >= 1");
  if (annotator_noise < 0.0 || annotator_noise > 1.0) {
    throw std::invalid_argument("GeneratorConfig: annotator_noise must be in [0,1]");
  }
  for (const auto& cp : classes) {
    std::size_t cov = cp.coverage == 0 ? num_videos : cp.coverage;
    if (cov > num_videos) {
      throw std::invalid_argument("GeneratorConfig: class '" + cp.name + "' coverage " + std::to_string(cov) +
                                  " exceeds video count");
    }
    if (cp.prevalence <= 0.0 || cp.prevalence >= 1.0) {
      throw std::invalid_argument("GeneratorConfig: class '" + cp.name + "' prevalence must be in (0,1)");
    }
    double max_prev = 0.95 * static_cast<double>(cov) / static_cast<double>(num_videos);
    if (cp.prevalence > max_prev) {
      throw std::invalid_argument("GeneratorConfig: class '" + cp.name +
                                  "' prevalence unreachable with coverage " + std::to_string(cov));
    }
  }
}

ToolSchedule schedule_tools(const GeneratorConfig& cfg) {
  cfg.validate();
  std::size_t c = cfg.classes.size();
  auto covered = video_coverage(cfg);

  ToolSchedule sched(cfg.num_videos);
  for (std::size_t v = 0; v < cfg.num_videos; ++v) {
    sched[v].assign(cfg.frames_per_video, std::vector<std::uint8_t>(c, 0));
    std::mt19937_64 rng(mix(cfg.seed, 1000 + v));
    for (std::size_t cls = 0; cls < c; ++cls) {
      if (!covered[cls][v]) continue;
      std::size_t cov = cfg.classes[cls].coverage == 0 ? cfg.num_videos : cfg.classes[cls].coverage;
      double p = cfg.classes[cls].prevalence * static_cast<double>(cfg.num_videos) / static_cast<double>(cov);
      p = std::min(p, 0.95);
      double ep_mean = cfg.mean_episode_frames;
      double gap_mean = ep_mean * (1.0 - p) / p;

      std::geometric_distribution<std::size_t> gap_dist(1.0 / (gap_mean + 1.0));
      std::geometric_distribution<std::size_t> ep_dist(1.0 / ep_mean);
      std::size_t t = gap_dist(rng);  // initial idle phase
      while (t < cfg.frames_per_video) {
        std::size_t ep = 1 + ep_dist(rng);
        for (std::size_t f = t; f < std::min(t + ep, cfg.frames_per_video); ++f) sched[v][f][cls] = 1;
        t += ep + gap_dist(rng);
      }
    }
    // enforce the simultaneity cap; highest class index yields first
    for (std::size_t f = 0; f < cfg.frames_per_video; ++f) {
      std::size_t active = 0;
      for (std::size_t cls = 0; cls < c; ++cls) active += sched[v][f][cls];
      for (std::size_t cls = c; cls-- > 0 && active > cfg.max_simultaneous;) {
        if (sched[v][f][cls]) {
          sched[v][f][cls] = 0;
          --active;
        }
      }
    }
  }
  return sched;
}

namespace {

DatasetManifest generate_impl(const GeneratorConfig& cfg, const std::string& out_dir,
                              const std::vector<std::string>& names) {
  auto sched = schedule_tools(cfg);
  std::size_t c = cfg.classes.size();
  fs::create_directories(out_dir);

  json doc;
  doc["tool_names"] = names;
  doc["videos"] = json::array();

  for (std::size_t v = 0; v < cfg.num_videos; ++v) {
    char vid[32];
    std::snprintf(vid, sizeof(vid), "video_%02zu", v);
    fs::path vdir = fs::path(out_dir) / vid;
    fs::create_directories(vdir);

    std::mt19937_64 rng(mix(cfg.seed, 2000 + v));
    std::mt19937_64 noise_rng(mix(cfg.seed, 3000 + v));
    double w = static_cast<double>(cfg.image_w), h = static_cast<double>(cfg.image_h);
    std::uniform_real_distribution<double> ux(0.25 * w, 0.75 * w);
    std::uniform_real_distribution<double> uy(0.25 * h, 0.75 * h);
    std::uniform_real_distribution<double> uangle(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> uscale(0.85, 1.15);
    std::uniform_real_distribution<double> ujit(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<ToolPose> poses(c);
    std::vector<std::uint8_t> prev_active(c, 0);

    std::ofstream csv(vdir / "annotations.csv");
    std::ofstream csv2;
    if (cfg.annotator_noise > 0.0) csv2.open(vdir / "annotations2.csv");
    auto header = [&](std::ofstream& os) {
      os << "frame";
      for (const auto& n : names) os << ',' << n;
      os << '\n';
    };
    header(csv);
    if (csv2.is_open()) header(csv2);

    Image img(cfg.image_w, cfg.image_h);
    for (std::size_t f = 0; f < cfg.frames_per_video; ++f) {
      std::vector<std::size_t> active;
      for (std::size_t cls = 0; cls < c; ++cls) {
        if (!sched[v][f][cls]) {
          prev_active[cls] = 0;
          continue;
        }
        if (!prev_active[cls]) {
          // new episode: draw a fresh pose
          poses[cls] = ToolPose{ux(rng), uy(rng), uangle(rng), uscale(rng)};
          prev_active[cls] = 1;
        } else {
          // temporal coherence: the tool drifts slightly between frames
          poses[cls].cx = std::clamp(poses[cls].cx + ujit(rng), 0.15 * w, 0.85 * w);
          poses[cls].cy = std::clamp(poses[cls].cy + ujit(rng), 0.15 * h, 0.85 * h);
          poses[cls].angle += 0.03 * ujit(rng);
        }
        active.push_back(cls);
      }
      render_frame(img, v, f, active, poses, cfg.shape_vocabulary_offset, cfg.seed);
      write_ppm(img, (vdir / frame_image_name(f)).string());

      csv << f;
      for (std::size_t cls = 0; cls < c; ++cls) csv << ',' << (sched[v][f][cls] ? 1 : 0);
      csv << '\n';
      if (csv2.is_open()) {
        csv2 << f;
        for (std::size_t cls = 0; cls < c; ++cls) {
          int bit = sched[v][f][cls] ? 1 : 0;
          if (unit(noise_rng) < cfg.annotator_noise) bit = 1 - bit;
          csv2 << ',' << bit;
        }
        csv2 << '\n';
      }
    }

    json jv;
    jv["video_id"] = vid;
    jv["frame_dir"] = vid;
    jv["annotations"] = std::string(vid) + "/annotations.csv";
    if (cfg.annotator_noise > 0.0) jv["annotations2"] = std::string(vid) + "/annotations2.csv";
    doc["videos"].push_back(jv);
  }

  fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  std::ofstream os(manifest_path);
  os << doc.dump(2) << '\n';
  os.close();
  return load_manifest(manifest_path.string());
}

}  // namespace

DatasetManifest generate(const GeneratorConfig& cfg, const std::string& out_dir) {
  std::vector<std::string> names;
  for (const auto& cp : cfg.classes) names.push_back(cp.name);
  return generate_impl(cfg, out_dir, names);
}

DatasetManifest generate_source_task(const GeneratorConfig& cfg, const std::string& out_dir) {
  GeneratorConfig src = cfg;
  src.shape_vocabulary_offset = cfg.shape_vocabulary_offset + cfg.classes.size() + 1;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < src.classes.size(); ++i) {
    src.classes[i].name = "src_" + cfg.classes[i].name;
    names.push_back(src.classes[i].name);
  }
  return generate_impl(src, out_dir, names);
}

}  // namespace toolnet
