// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "egsf/errors.hpp"

namespace egsf {
namespace {

void same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": " + std::to_string(a) + " predictions for " +
                         std::to_string(b) + " labels");
  }
}

}  // namespace

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  same_length(predicted.size(), labels.size(), "accuracy");
  if (labels.empty()) throw ContractError("accuracy: empty split");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

std::optional<double> roc_auc(std::span<const double> scores, std::span<const std::size_t> labels) {
  same_length(scores.size(), labels.size(), "roc_auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Rank sums are multiples of 1/2, so this is exact for any practical n.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double f1_score(std::span<const std::size_t> predicted, std::span<const std::size_t> labels,
                std::size_t positive) {
  same_length(predicted.size(), labels.size(), "f1_score");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predicted[i] == positive, l = labels[i] == positive;
    tp += p && l;
    fp += p && !l;
    fn += !p && l;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

std::size_t fitting_ssim_window(std::size_t h, std::size_t w, std::size_t preferred) {
  std::size_t win = std::min({preferred, h, w});
  if (win % 2 == 0) --win;
  if (win == 0) throw DimensionError("fitting_ssim_window: empty map");
  return win;
}

double ssim(const Tensor& a, const Tensor& b, const SsimOptions& o) {
  if (a.rank() != 2 || a.shape() != b.shape()) {
    throw DimensionError("ssim: expected equal [h, w] maps, got " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  }
  const std::size_t h = a.dim(0), w = a.dim(1), k = o.window;
  if (k == 0 || h < k || w < k) {
    throw DimensionError("ssim: window " + std::to_string(k) + " does not fit " +
                         shape_string(a.shape()));
  }
  std::vector<double> g(k * k);
  const double c = 0.5 * static_cast<double>(k - 1);
  double gs = 0.0;
  for (std::size_t y = 0; y < k; ++y) {
    for (std::size_t x = 0; x < k; ++x) {
      const double dy = static_cast<double>(y) - c, dx = static_cast<double>(x) - c;
      gs += g[y * k + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * o.sigma * o.sigma));
    }
  }
  for (double& v : g) v /= gs;
  const double c1 = (o.k1 * o.dynamic_range) * (o.k1 * o.dynamic_range);
  const double c2 = (o.k2 * o.dynamic_range) * (o.k2 * o.dynamic_range);

  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t y0 = 0; y0 + k <= h; ++y0) {
    for (std::size_t x0 = 0; x0 + k <= w; ++x0) {
      double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
      for (std::size_t y = 0; y < k; ++y) {
        for (std::size_t x = 0; x < k; ++x) {
          const double wt = g[y * k + x];
          const double va = a[(y0 + y) * w + x0 + x], vb = b[(y0 + y) * w + x0 + x];
          ma += wt * va;
          mb += wt * vb;
          aa += wt * va * va;
          bb += wt * vb * vb;
          ab += wt * va * vb;
        }
      }
      const double var_a = aa - ma * ma, var_b = bb - mb * mb, cov = ab - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

Tensor attention_grid(const Tensor& attention, std::size_t grid) {
  if (attention.rank() != 2 || attention.dim(0) != attention.dim(1) ||
      attention.dim(0) != grid * grid) {
    throw DimensionError("attention_grid: expected [" + std::to_string(grid * grid) + ", " +
                         std::to_string(grid * grid) + "], got " +
                         shape_string(attention.shape()));
  }
  const std::size_t n = grid * grid;
  Tensor out({grid, grid}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j] += attention[i * n + j];
  }
  double total = 0.0;
  for (double v : out.data()) total += v;
  if (total > 0.0) {
    for (double& v : out.data()) v /= total;
  }
  return out;
}

Tensor peak_normalized(const Tensor& map) {
  Tensor out = map;
  double peak = 0.0;
  for (double v : out.data()) peak = std::max(peak, v);
  if (peak > 0.0) {
    for (double& v : out.data()) v /= peak;
  }
  return out;
}

}  // namespace egsf
