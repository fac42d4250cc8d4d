#include "toolnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace toolnet {

namespace fs = std::filesystem;
using nlohmann::json;

const VideoRecord& DatasetManifest::video(const std::string& id) const {
  for (const auto& v : videos) {
    if (v.video_id == id) return v;
  }
  throw std::out_of_range("unknown video id: " + id);
}

std::string frame_image_name(std::size_t frame_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu.ppm", frame_index);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

struct AnnotationFile {
  std::vector<std::string> tool_names;
  std::vector<std::pair<std::size_t, std::vector<std::uint8_t>>> rows;  // frame index -> bits
};

AnnotationFile read_annotations(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open annotation CSV: " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty annotation CSV: " + path);
  AnnotationFile out;
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "frame") {
    throw std::runtime_error("annotation CSV must start with a 'frame' column: " + path);
  }
  out.tool_names.assign(header.begin() + 1, header.end());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    std::vector<std::uint8_t> bits(out.tool_names.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (cells[i + 1] != "0" && cells[i + 1] != "1") {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": label cells must be 0 or 1");
      }
      bits[i] = cells[i + 1] == "1";
    }
    out.rows.emplace_back(std::stoul(cells[0]), std::move(bits));
  }
  return out;
}

std::string resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute()) return path.string();
  return (base / path).lexically_normal().string();
}

}  // namespace

DatasetManifest load_manifest(const std::string& json_path) {
  std::ifstream is(json_path);
  if (!is) throw std::runtime_error("cannot open manifest: " + json_path);
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("manifest parse error in " + json_path + ": " + e.what());
  }
  fs::path base = fs::path(json_path).parent_path();

  DatasetManifest m;
  m.tool_names = doc.at("tool_names").get<std::vector<std::string>>();
  for (const auto& v : doc.at("videos")) {
    VideoRecord rec;
    rec.video_id = v.at("video_id").get<std::string>();
    std::string frame_dir = resolve(base, v.at("frame_dir").get<std::string>());
    AnnotationFile ann = read_annotations(resolve(base, v.at("annotations").get<std::string>()));
    if (ann.tool_names != m.tool_names) {
      throw std::runtime_error("annotation header of video " + rec.video_id +
                               " does not match manifest tool_names");
    }
    std::vector<std::pair<std::size_t, std::vector<std::uint8_t>>> second;
    if (v.contains("annotations2")) {
      AnnotationFile ann2 = read_annotations(resolve(base, v.at("annotations2").get<std::string>()));
      if (ann2.tool_names != m.tool_names || ann2.rows.size() != ann.rows.size()) {
        throw std::runtime_error("second annotator file of video " + rec.video_id +
                                 " does not match the first");
      }
      second = std::move(ann2.rows);
    }
    std::size_t prev = 0;
    bool first = true;
    for (std::size_t r = 0; r < ann.rows.size(); ++r) {
      const auto& [idx, bits] = ann.rows[r];
      if (!first && idx <= prev) {
        throw std::runtime_error("frame indices not strictly increasing in video " + rec.video_id);
      }
      first = false;
      prev = idx;
      FrameEntry fe;
      fe.frame_index = idx;
      fe.image_path = (fs::path(frame_dir) / frame_image_name(idx)).string();
      fe.labels = LabelVector(m.tool_names.size());
      fe.labels.present.assign(bits.begin(), bits.end());
      if (!second.empty()) {
        if (second[r].first != idx) {
          throw std::runtime_error("annotator files disagree on frame indices in video " + rec.video_id);
        }
        for (std::size_t i = 0; i < bits.size(); ++i) {
          if (second[r].second[i] != bits[i]) fe.labels.evaluate[i] = 0;
        }
      }
      rec.frames.push_back(std::move(fe));
    }
    m.videos.push_back(std::move(rec));
  }
  return m;
}

namespace {

std::vector<std::vector<std::uint8_t>> tool_incidence(const DatasetManifest& m) {
  std::vector<std::vector<std::uint8_t>> inc(m.videos.size(), std::vector<std::uint8_t>(m.num_classes(), 0));
  for (std::size_t v = 0; v < m.videos.size(); ++v) {
    for (const auto& f : m.videos[v].frames) {
      for (std::size_t c = 0; c < m.num_classes(); ++c) {
        if (f.labels.present[c]) inc[v][c] = 1;
      }
    }
  }
  return inc;
}

std::size_t coverage_score(const std::vector<std::vector<std::uint8_t>>& inc, const std::vector<bool>& in_val,
                           std::size_t num_classes) {
  std::size_t score = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    bool train_side = false, val_side = false;
    for (std::size_t v = 0; v < inc.size(); ++v) {
      if (!inc[v][c]) continue;
      (in_val[v] ? val_side : train_side) = true;
    }
    if (train_side && val_side) ++score;
  }
  return score;
}

double binom(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 0; i < k; ++i) r *= static_cast<double>(n - i) / static_cast<double>(i + 1);
  return r;
}

bool next_combination(std::vector<std::size_t>& comb, std::size_t n) {
  std::size_t k = comb.size();
  for (std::size_t i = k; i-- > 0;) {
    if (comb[i] < n - k + i) {
      ++comb[i];
      for (std::size_t j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

SplitPlan plan_split(const DatasetManifest& manifest, std::size_t n_val_videos, std::uint64_t seed) {
  std::size_t nv = manifest.videos.size();
  if (n_val_videos < 1) throw std::invalid_argument("plan_split: need at least one validation video");
  if (n_val_videos >= nv) {
    throw std::invalid_argument("plan_split: n_val_videos must be smaller than the video count");
  }
  auto inc = tool_incidence(manifest);
  std::size_t c = manifest.num_classes();

  std::vector<bool> best(nv, false);
  std::size_t best_score = 0;
  bool have_best = false;

  if (binom(nv, n_val_videos) <= 100000.0) {
    // Exact: enumerate all validation subsets.
    std::vector<std::size_t> comb(n_val_videos);
    std::iota(comb.begin(), comb.end(), 0);
    do {
      std::vector<bool> in_val(nv, false);
      for (std::size_t i : comb) in_val[i] = true;
      std::size_t score = coverage_score(inc, in_val, c);
      if (!have_best || score > best_score) {
        best = in_val;
        best_score = score;
        have_best = true;
      }
    } while (next_combination(comb, nv));
  } else {
    // Seeded randomized restarts with greedy swap improvement.
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> ids(nv);
    std::iota(ids.begin(), ids.end(), 0);
    for (int restart = 0; restart < 64; ++restart) {
      std::shuffle(ids.begin(), ids.end(), rng);
      std::vector<bool> in_val(nv, false);
      for (std::size_t i = 0; i < n_val_videos; ++i) in_val[ids[i]] = true;
      std::size_t score = coverage_score(inc, in_val, c);
      bool improved = true;
      while (improved) {
        improved = false;
        for (std::size_t a = 0; a < nv && !improved; ++a) {
          if (!in_val[a]) continue;
          for (std::size_t b = 0; b < nv && !improved; ++b) {
            if (in_val[b]) continue;
            in_val[a] = false;
            in_val[b] = true;
            std::size_t s2 = coverage_score(inc, in_val, c);
            if (s2 > score) {
              score = s2;
              improved = true;
            } else {
              in_val[a] = true;
              in_val[b] = false;
            }
          }
        }
      }
      if (!have_best || score > best_score) {
        best = in_val;
        best_score = score;
        have_best = true;
      }
    }
  }

  SplitPlan plan;
  for (std::size_t v = 0; v < nv; ++v) {
    (best[v] ? plan.val_video_ids : plan.train_video_ids).push_back(manifest.videos[v].video_id);
  }
  for (std::size_t cls = 0; cls < c; ++cls) {
    bool train_side = false, val_side = false;
    for (std::size_t v = 0; v < nv; ++v) {
      if (!inc[v][cls]) continue;
      (best[v] ? val_side : train_side) = true;
    }
    if (!(train_side && val_side)) plan.excluded_tools.push_back(manifest.tool_names[cls]);
  }
  return plan;
}

std::vector<FrameEntry> subsample_frames(const VideoRecord& video, std::size_t stride) {
  if (stride < 1) throw std::invalid_argument("subsample_frames: stride must be at least 1");
  std::vector<FrameEntry> out;
  for (std::size_t i = 0; i < video.frames.size(); i += stride) out.push_back(video.frames[i]);
  return out;
}

std::vector<FrameEntry> undersample_empty(const std::vector<FrameEntry>& frames, double ratio,
                                          std::uint64_t seed) {
  if (ratio <= 0.0 || ratio > 1.0) throw std::invalid_argument("undersample_empty: ratio must be in (0,1]");
  std::vector<std::size_t> empty_idx;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (!frames[i].labels.any_present()) empty_idx.push_back(i);
  }
  std::size_t keep = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(empty_idx.size())));
  std::mt19937_64 rng(seed);
  std::shuffle(empty_idx.begin(), empty_idx.end(), rng);
  empty_idx.resize(keep);
  std::sort(empty_idx.begin(), empty_idx.end());

  std::vector<FrameEntry> out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].labels.any_present()) {
      out.push_back(frames[i]);
    } else if (next < empty_idx.size() && empty_idx[next] == i) {
      out.push_back(frames[i]);
      ++next;
    }
  }
  return out;
}

Image compute_mean_image(const std::vector<Image>& images) {
  if (images.empty()) throw std::invalid_argument("compute_mean_image: empty training set");
  Image mean(images[0].width, images[0].height);
  for (const auto& img : images) {
    if (img.width != mean.width || img.height != mean.height) {
      throw std::invalid_argument("compute_mean_image: images differ in resolution");
    }
    for (std::size_t i = 0; i < mean.pix.size(); ++i) mean.pix[i] += img.pix[i];
  }
  for (auto& v : mean.pix) v /= static_cast<double>(images.size());
  return mean;
}

Image center(const Image& img, const Image& mean) {
  if (img.width != mean.width || img.height != mean.height) {
    throw std::invalid_argument("center: image and mean image differ in resolution");
  }
  Image out = img;
  for (std::size_t i = 0; i < out.pix.size(); ++i) out.pix[i] -= mean.pix[i];
  return out;
}

}  // namespace toolnet
