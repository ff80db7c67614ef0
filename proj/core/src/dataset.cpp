// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "egsf/errors.hpp"
#include "egsf/pgm.hpp"
#include "egsf/rng.hpp"
#include "json.hpp"

namespace egsf {
namespace {

constexpr std::uint64_t kTrainStream = 0x747261696eULL;  // "train"
constexpr std::uint64_t kTestStream = 0x74657374ULL;     // "test"
constexpr std::uint64_t kLayoutIndex = ~0ULL;

std::string sample_id(const char* split, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu", split, i);
  return buf;
}

// Separable Gaussian blur with reflected borders.
std::vector<double> blur(const std::vector<double>& in, std::size_t n, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double ks = 0.0;
  for (int i = -r; i <= r; ++i) ks += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= ks;
  const int ni = static_cast<int>(n);
  auto reflect = [ni](int i) {
    while (i < 0 || i >= ni) i = i < 0 ? -i - 1 : 2 * ni - i - 1;
    return i;
  };
  std::vector<double> tmp(n * n), out(n * n);
  for (int y = 0; y < ni; ++y) {
    for (int x = 0; x < ni; ++x) {
      double s = 0.0;
      for (int d = -r; d <= r; ++d) s += k[d + r] * in[y * ni + reflect(x + d)];
      tmp[y * ni + x] = s;
    }
  }
  for (int y = 0; y < ni; ++y) {
    for (int x = 0; x < ni; ++x) {
      double s = 0.0;
      for (int d = -r; d <= r; ++d) s += k[d + r] * tmp[reflect(y + d) * ni + x];
      out[y * ni + x] = s;
    }
  }
  return out;
}

SyntheticSample make_sample(const DatasetConfig& c, std::string id, std::size_t label, bool tag,
                            std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = c.image_size;
  SyntheticSample s;
  s.image_id = std::move(id);
  s.label = label;
  s.shortcut_tag = tag;
  s.gaze.image_id = s.image_id;

  std::vector<double> noise(n * n);
  for (double& v : noise) v = rng.normal();
  noise = blur(noise, n, c.noise_sigma);
  double mu = 0.0, var = 0.0;
  for (double v : noise) mu += v;
  mu /= static_cast<double>(noise.size());
  for (double v : noise) var += (v - mu) * (v - mu);
  const double sd = std::sqrt(var / static_cast<double>(noise.size()));
  std::vector<double> px(n * n);
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = c.background + c.noise_amplitude * (sd > 0.0 ? (noise[i] - mu) / sd : 0.0);
  }

  // The lesion stays clear of the tag corner so it never overlaps the tag.
  const double lo = static_cast<double>(c.tag_size) + 2.0 * c.lesion_sigma;
  const double hi = static_cast<double>(n) - 1.0 - 2.0 * c.lesion_sigma;
  const double lx = rng.uniform(lo, hi), ly = rng.uniform(lo, hi);
  if (label == 1) {
    s.lesion_x = lx;
    s.lesion_y = ly;
    const double inv = 1.0 / (2.0 * c.lesion_sigma * c.lesion_sigma);
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        const double dx = static_cast<double>(x) - lx, dy = static_cast<double>(y) - ly;
        px[y * n + x] += c.lesion_amplitude * std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  if (tag) {
    for (std::size_t y = 1; y <= c.tag_size; ++y) {
      for (std::size_t x = 1; x <= c.tag_size; ++x) px[y * n + x] = c.tag_value;
    }
  }

  Tensor img({1, n, n});
  for (std::size_t i = 0; i < px.size(); ++i) img[i] = dequantize16(quantize16(px[i]));
  s.image = std::move(img);

  const double edge = static_cast<double>(n - 1);
  auto scatter = [&](std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      s.gaze.fixations.push_back(
          {rng.uniform(0.0, edge), rng.uniform(0.0, edge), rng.uniform(30.0, 120.0)});
    }
  };
  if (label == 1) {
    const std::size_t on = 2 + rng.below(3);
    for (std::size_t i = 0; i < on; ++i) {
      const double fx = std::clamp(lx + rng.normal(0.0, 1.0), 0.0, edge);
      const double fy = std::clamp(ly + rng.normal(0.0, 1.0), 0.0, edge);
      s.gaze.fixations.push_back({fx, fy, rng.uniform(200.0, 600.0)});
    }
    scatter(rng.below(3));
  } else {
    scatter(3 + rng.below(4));
  }
  // Fixation coordinates are stored at millipixel and millisecond
  // resolution so the text file reproduces them exactly.
  for (auto& f : s.gaze.fixations) {
    f.x = std::round(f.x * 1000.0) / 1000.0;
    f.y = std::round(f.y * 1000.0) / 1000.0;
    f.duration_ms = std::round(f.duration_ms * 1000.0) / 1000.0;
  }
  return s;
}

std::vector<SyntheticSample> make_split(const DatasetConfig& c, std::size_t n, double rho,
                                        std::uint64_t seed, std::uint64_t stream,
                                        const char* prefix) {
  const SplitLayout layout =
      split_layout(n, c.positive_fraction, rho, derive_seed(seed, stream, kLayoutIndex));
  std::vector<SyntheticSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(make_sample(c, sample_id(prefix, i), layout.labels[i], layout.tags[i],
                              derive_seed(seed, stream, i)));
  }
  return out;
}

}  // namespace

void DatasetConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ContractError("dataset: " + what);
  };
  require(image_size >= 8, "image_size must be at least 8");
  require(train_size > 0 && test_size > 0, "split sizes must be positive");
  require(positive_fraction > 0.0 && positive_fraction < 1.0,
          "positive_fraction must lie in (0, 1)");
  require(rho_train >= 0.0 && rho_train <= 1.0 && rho_test >= 0.0 && rho_test <= 1.0,
          "tag correlations must lie in [0, 1]");
  require(noise_amplitude >= 0.0 && noise_sigma > 0.0, "noise parameters out of range");
  require(lesion_sigma > 0.0, "lesion_sigma must be positive");
  require(tag_size >= 1 && tag_size + 1 < image_size / 2, "tag_size does not fit the image");
  require(static_cast<double>(tag_size) + 4.0 * lesion_sigma < static_cast<double>(image_size) - 1.0,
          "lesion does not fit beside the tag");
}

SplitLayout split_layout(std::size_t n, double positive_fraction, double rho,
                         std::uint64_t seed) {
  const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) * positive_fraction));
  const std::size_t n_neg = n - n_pos;
  auto flips = [rho](std::size_t count) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(count) * (1.0 - rho) / 2.0));
  };
  std::vector<std::pair<std::size_t, bool>> rows;
  rows.reserve(n);
  const std::size_t fp = flips(n_pos), fn = flips(n_neg);
  for (std::size_t i = 0; i < n_pos; ++i) rows.push_back({1, i >= fp});
  for (std::size_t i = 0; i < n_neg; ++i) rows.push_back({0, i < fn});
  Rng rng(seed);
  rng.shuffle(rows);
  SplitLayout layout;
  for (const auto& [label, tag] : rows) {
    layout.labels.push_back(label);
    layout.tags.push_back(tag);
  }
  return layout;
}

Dataset generate_dataset(const DatasetConfig& config, std::uint64_t seed) {
  config.validate();
  Dataset d;
  d.config = config;
  d.seed = seed;
  d.train = make_split(config, config.train_size, config.rho_train, seed, kTrainStream, "train");
  d.test = make_split(config, config.test_size, config.rho_test, seed, kTestStream, "test");
  return d;
}

double tag_label_correlation(const std::vector<SyntheticSample>& split) {
  double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (const auto& s : split) {
    const double x = s.shortcut_tag ? 1.0 : 0.0, y = static_cast<double>(s.label);
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  const double vx = sxx / n - (sx / n) * (sx / n), vy = syy / n - (sy / n) * (sy / n);
  if (vx <= 0.0 || vy <= 0.0) return 0.0;
  return cov / std::sqrt(vx * vy);
}

namespace {

nlohmann::ordered_json config_to_json(const DatasetConfig& c) {
  return {{"image_size", c.image_size},
          {"train_size", c.train_size},
          {"test_size", c.test_size},
          {"positive_fraction", c.positive_fraction},
          {"rho_train", c.rho_train},
          {"rho_test", c.rho_test},
          {"background", c.background},
          {"noise_amplitude", c.noise_amplitude},
          {"noise_sigma", c.noise_sigma},
          {"lesion_amplitude", c.lesion_amplitude},
          {"lesion_sigma", c.lesion_sigma},
          {"tag_value", c.tag_value},
          {"tag_size", c.tag_size}};
}

DatasetConfig config_from_json(const nlohmann::json& j) {
  DatasetConfig c;
  c.image_size = j.at("image_size").get<std::size_t>();
  c.train_size = j.at("train_size").get<std::size_t>();
  c.test_size = j.at("test_size").get<std::size_t>();
  c.positive_fraction = j.at("positive_fraction").get<double>();
  c.rho_train = j.at("rho_train").get<double>();
  c.rho_test = j.at("rho_test").get<double>();
  c.background = j.at("background").get<double>();
  c.noise_amplitude = j.at("noise_amplitude").get<double>();
  c.noise_sigma = j.at("noise_sigma").get<double>();
  c.lesion_amplitude = j.at("lesion_amplitude").get<double>();
  c.lesion_sigma = j.at("lesion_sigma").get<double>();
  c.tag_value = j.at("tag_value").get<double>();
  c.tag_size = j.at("tag_size").get<std::size_t>();
  return c;
}

}  // namespace

void write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  std::ofstream labels(dir / "labels.csv", std::ios::trunc);
  if (!labels) throw std::runtime_error("cannot write " + (dir / "labels.csv").string());
  labels << "image_id,label,shortcut_tag\n";
  std::vector<GazeRecord> gaze;
  for (const auto* split : {&data.train, &data.test}) {
    for (const auto& s : *split) {
      const std::size_t n = s.image.dim(1);
      write_pgm16(dir / "images" / (s.image_id + ".pgm"), s.image.reshaped({n, n}));
      labels << s.image_id << ',' << s.label << ',' << (s.shortcut_tag ? 1 : 0) << '\n';
      gaze.push_back(s.gaze);
    }
  }
  write_gaze_csv(dir / "gaze.csv", gaze);

  nlohmann::ordered_json m;
  m["schema"] = "egsf.dataset/1";
  m["generator"] = "synthetic-shortcut";
  m["seed"] = data.seed;
  m["config"] = config_to_json(data.config);
  m["splits"] = {{"train", data.train.size()}, {"test", data.test.size()}};
  m["files"] = {{"images", "images/<image_id>.pgm"},
                {"labels", "labels.csv"},
                {"gaze", "gaze.csv"}};
  std::ofstream mf(dir / "manifest.json", std::ios::trunc);
  mf << m.dump(2) << '\n';
  if (!mf) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw std::runtime_error("no manifest.json in " + dir.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  if (m.value("schema", "") != "egsf.dataset/1") {
    throw FormatError("manifest.json: unsupported schema");
  }
  Dataset d;
  try {
    d.seed = m.at("seed").get<std::uint64_t>();
    d.config = config_from_json(m.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }

  std::map<std::string, GazeRecord> gaze;
  for (auto& r : read_gaze_csv(dir / "gaze.csv")) gaze.emplace(r.image_id, std::move(r));

  std::ifstream labels(dir / "labels.csv");
  if (!labels) throw std::runtime_error("cannot open " + (dir / "labels.csv").string());
  std::string line;
  std::getline(labels, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "image_id,label,shortcut_tag") {
    throw FormatError("labels.csv: expected header image_id,label,shortcut_tag");
  }
  while (std::getline(labels, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, label, tag;
    if (!std::getline(ss, id, ',') || !std::getline(ss, label, ',') || !std::getline(ss, tag)) {
      throw FormatError("labels.csv: malformed row '" + line + "'");
    }
    SyntheticSample s;
    s.image_id = id;
    if (label != "0" && label != "1") throw FormatError("labels.csv: bad label in '" + line + "'");
    if (tag != "0" && tag != "1") throw FormatError("labels.csv: bad tag in '" + line + "'");
    s.label = label == "1" ? 1 : 0;
    s.shortcut_tag = tag == "1";
    Tensor img = read_pgm16(dir / "images" / (id + ".pgm"));
    if (img.dim(0) != d.config.image_size || img.dim(1) != d.config.image_size) {
      throw FormatError(id + ".pgm: extents disagree with the manifest");
    }
    s.image = img.reshaped({1, img.dim(0), img.dim(1)});
    auto g = gaze.find(id);
    s.gaze = g != gaze.end() ? g->second : GazeRecord{id, {}};
    if (id.rfind("train_", 0) == 0) {
      d.train.push_back(std::move(s));
    } else if (id.rfind("test_", 0) == 0) {
      d.test.push_back(std::move(s));
    } else {
      throw FormatError("labels.csv: id '" + id + "' has no split prefix");
    }
  }
  if (d.train.size() != m["splits"].value("train", 0ULL) ||
      d.test.size() != m["splits"].value("test", 0ULL)) {
    throw FormatError("dataset: split sizes disagree with the manifest");
  }
  return d;
}

}  // namespace egsf
