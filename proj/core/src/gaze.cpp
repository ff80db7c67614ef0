// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/gaze.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "egsf/errors.hpp"
#include "egsf/pgm.hpp"

namespace egsf {

Tensor heatmap_from_fixations(const GazeRecord& record, double sigma, std::size_t height,
                              std::size_t width) {
  if (!(sigma > 0.0)) throw ContractError("heatmap_from_fixations: sigma must be positive");
  if (height == 0 || width == 0) throw DimensionError("heatmap_from_fixations: empty image");
  Tensor map({height, width}, 0.0);
  if (record.fixations.empty()) return map;

  bool any_duration = false;
  for (const auto& f : record.fixations) any_duration |= f.duration_ms > 0.0;
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> gx(width), gy(height);
  for (const auto& f : record.fixations) {
    const double w = any_duration ? std::max(f.duration_ms, 0.0) : 1.0;
    if (w == 0.0) continue;
    const double cx = std::clamp(f.x, 0.0, static_cast<double>(width - 1));
    const double cy = std::clamp(f.y, 0.0, static_cast<double>(height - 1));
    // Separable: exp(-(dx^2+dy^2)/2s^2) = exp(-dx^2/2s^2) * exp(-dy^2/2s^2).
    for (std::size_t x = 0; x < width; ++x) {
      const double d = static_cast<double>(x) - cx;
      gx[x] = std::exp(-d * d * inv2s2);
    }
    for (std::size_t y = 0; y < height; ++y) {
      const double d = static_cast<double>(y) - cy;
      gy[y] = w * std::exp(-d * d * inv2s2);
    }
    for (std::size_t y = 0; y < height; ++y) {
      double* row = map.data().data() + y * width;
      for (std::size_t x = 0; x < width; ++x) row[x] += gy[y] * gx[x];
    }
  }
  const double peak = *std::max_element(map.data().begin(), map.data().end());
  if (peak > 0.0) {
    for (double& v : map.data()) v /= peak;
  }
  return map;
}

Tensor apply_gaze_mask(const Tensor& image, const Tensor& mask, double alpha, bool clip) {
  if (!(alpha >= 0.0)) throw ContractError("apply_gaze_mask: alpha must be >= 0");
  std::size_t batch = 1, channels = 0;
  if (image.rank() == 3 && mask.rank() == 2) {
    channels = image.dim(0);
  } else if (image.rank() == 4 && mask.rank() == 3 && mask.dim(0) == image.dim(0)) {
    batch = image.dim(0);
    channels = image.dim(1);
  } else {
    throw DimensionError("apply_gaze_mask: image " + shape_string(image.shape()) +
                         " does not pair with mask " + shape_string(mask.shape()));
  }
  const std::size_t h = image.dim(image.rank() - 2), w = image.dim(image.rank() - 1);
  if (mask.dim(mask.rank() - 2) != h || mask.dim(mask.rank() - 1) != w) {
    throw DimensionError("apply_gaze_mask: mask " + shape_string(mask.shape()) +
                         " does not match image " + shape_string(image.shape()));
  }
  Tensor out = image;
  const std::size_t hw = h * w;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* m = mask.data().data() + b * hw;
    for (std::size_t c = 0; c < channels; ++c) {
      double* px = out.data().data() + (b * channels + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        double v = px[i] * (1.0 + alpha * m[i]);
        if (clip) v = std::clamp(v, 0.0, 1.0);
        px[i] = v;
      }
    }
  }
  return out;
}

std::vector<double> gaze_patch_distribution(const Tensor& mask, std::size_t patch) {
  if (mask.rank() != 2) {
    throw DimensionError("gaze_patch_distribution: expected [H, W], got " +
                         shape_string(mask.shape()));
  }
  const std::size_t h = mask.dim(0), w = mask.dim(1);
  if (patch == 0 || h % patch != 0 || w % patch != 0) {
    throw ContractError("gaze_patch_distribution: " + std::to_string(h) + "x" +
                        std::to_string(w) + " is not divisible by patch " + std::to_string(patch));
  }
  const std::size_t gh = h / patch, gw = w / patch;
  std::vector<double> g(gh * gw, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) g[(y / patch) * gw + x / patch] += mask[y * w + x];
  }
  double total = 0.0;
  for (double v : g) total += v;
  if (total > 0.0) {
    for (double& v : g) v /= total;
  } else {
    std::fill(g.begin(), g.end(), 1.0 / static_cast<double>(g.size()));
  }
  return g;
}

Tensor gaze_token_attention(const Tensor& mask, std::size_t patch) {
  const auto g = gaze_patch_distribution(mask, patch);
  const std::size_t n = g.size();
  Tensor a({n, n});
  for (std::size_t i = 0; i < n; ++i) std::copy(g.begin(), g.end(), a.data().begin() + i * n);
  return a;
}

Var alignment_loss(Tape& tape, const Var& a_t, const Tensor& a_g) {
  if (a_t->shape() != a_g.shape()) {
    throw DimensionError("alignment_loss: " + shape_string(a_t->shape()) + " vs " +
                         shape_string(a_g.shape()));
  }
  return mean_squared_error(tape, a_t, a_g);
}

double alignment_loss(const Tensor& a_t, const Tensor& a_g) {
  if (a_t.shape() != a_g.shape()) {
    throw DimensionError("alignment_loss: " + shape_string(a_t.shape()) + " vs " +
                         shape_string(a_g.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a_t.numel(); ++i) {
    const double d = a_t[i] - a_g[i];
    s += d * d;
  }
  return s / static_cast<double>(a_t.numel());
}

Var total_loss(Tape& tape, const Var& cls_loss, const Var& align_loss, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("total_loss: lambda must be >= 0");
  return add(tape, cls_loss, scale(tape, align_loss, lambda));
}

double total_loss(double cls_loss, double align_loss, double lambda) {
  if (!(lambda >= 0.0)) throw ContractError("total_loss: lambda must be >= 0");
  return cls_loss + lambda * align_loss;
}

namespace {

double parse_number(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\r')) --e;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || !std::isfinite(v)) {
    throw FormatError(path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<GazeRecord> read_gaze_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != "image_id,x,y,duration_ms") {
    throw FormatError(path.string() + ": expected header image_id,x,y,duration_ms");
  }
  std::vector<GazeRecord> records;
  std::map<std::string, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 4) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 4 columns");
    }
    Fixation f{parse_number(cols[1], path, lineno), parse_number(cols[2], path, lineno),
               parse_number(cols[3], path, lineno)};
    if (f.duration_ms < 0.0) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": negative duration");
    }
    auto [it, inserted] = index.emplace(cols[0], records.size());
    if (inserted) records.push_back({cols[0], {}});
    records[it->second].fixations.push_back(f);
  }
  return records;
}

void write_gaze_csv(const std::filesystem::path& path, const std::vector<GazeRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "image_id,x,y,duration_ms\n";
  char buf[64];
  auto put = [&](double v) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, p - buf);
  };
  for (const auto& r : records) {
    for (const auto& f : r.fixations) {
      out << r.image_id << ',';
      put(f.x);
      out << ',';
      put(f.y);
      out << ',';
      put(f.duration_ms);
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void export_mask_pgm(const std::filesystem::path& path, const Tensor& mask) {
  write_pgm16(path, mask);
}

}  // namespace egsf
