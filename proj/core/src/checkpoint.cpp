// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "egsf/errors.hpp"

namespace egsf {
namespace {

constexpr char kMagic[8] = {'E', 'G', 'S', 'F', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str(std::size_t len) {
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  std::size_t remaining() const { return n_ - pos_; }

 private:
  void need(std::size_t k) const {
    if (n_ - pos_ < k) throw FormatError("checkpoint: truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t get(int k) {
    need(static_cast<std::size_t>(k));
    std::uint64_t v = 0;
    for (int i = 0; i < k; ++i) v |= static_cast<std::uint64_t>(p_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(k);
    return v;
  }
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::vector<std::size_t*> config_fields(ModelConfig& c) {
  return {&c.image_size, &c.in_channels,      &c.stem_channels, &c.kernel_size, &c.conv_blocks,
          &c.patch_size, &c.token_dim, &c.attention_blocks, &c.num_classes, &c.timesteps};
}

}  // namespace

Checkpoint snapshot(const EgSpikeFormer& model) {
  Checkpoint ckpt{model.config(), model.lif(), {}};
  for (const auto& p : model.parameters()) ckpt.tensors.push_back({p.name, false, *p.var});
  for (const auto& b : model.buffers()) ckpt.tensors.push_back({b.name, true, *b.var});
  // Gradients are not part of the container.
  for (auto& t : ckpt.tensors) t.value.drop_grad();
  return ckpt;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  ModelConfig cfg = ckpt.model;
  for (std::size_t* f : config_fields(cfg)) w.u64(*f);
  w.f64(ckpt.lif.v_threshold);
  w.f64(ckpt.lif.v_reset);
  w.f64(ckpt.lif.leak);
  w.f64(ckpt.lif.surrogate_width);
  w.u64(ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.u8(t.is_buffer ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t d : t.value.shape()) w.u64(d);
    for (double v : t.value.data()) w.f64(v);
  }
  auto& buf = w.buffer();
  const std::uint64_t h = fnv1a(buf.data(), buf.size());
  w.u64(h);
  return std::move(buf);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kMagic + 4 + 8) throw FormatError("checkpoint: file too short");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("checkpoint: bad magic, not an egsf checkpoint");
  }
  const std::size_t body = bytes.size() - 8;
  Reader tail(bytes.data() + body, 8);
  if (tail.u64() != fnv1a(bytes.data(), body)) throw FormatError("checkpoint: hash mismatch");

  Reader r(bytes.data() + sizeof kMagic, body - sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  for (std::size_t* f : config_fields(ckpt.model)) *f = r.u64();
  ckpt.lif.v_threshold = r.f64();
  ckpt.lif.v_reset = r.f64();
  ckpt.lif.leak = r.f64();
  ckpt.lif.surrogate_width = r.f64();
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.str(r.u32());
    t.is_buffer = r.u8() != 0;
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError("checkpoint: implausible rank for " + t.name);
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const std::size_t n = shape_numel(shape);
    if (n > r.remaining() / 8) throw FormatError("checkpoint: truncated tensor " + t.name);
    std::vector<double> values(n);
    for (auto& v : values) v = r.f64();
    t.value = Tensor(std::move(shape), std::move(values));
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const EgSpikeFormer& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(snapshot(model));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void restore(EgSpikeFormer& model, const Checkpoint& ckpt) {
  if (!(model.config() == ckpt.model)) {
    throw FormatError("checkpoint: architecture does not match the model");
  }
  std::map<std::string, const CheckpointTensor*> by_name;
  for (const auto& t : ckpt.tensors) {
    if (!by_name.emplace(t.name, &t).second) throw FormatError("checkpoint: duplicate " + t.name);
  }
  auto all = model.named_tensors();
  if (all.size() != by_name.size()) {
    throw FormatError("checkpoint: holds " + std::to_string(by_name.size()) +
                      " tensors, model expects " + std::to_string(all.size()));
  }
  for (auto& p : all) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError("checkpoint: missing tensor " + p.name);
    const Tensor& src = it->second->value;
    if (src.shape() != p.var->shape()) {
      throw FormatError("checkpoint: " + p.name + " has shape " + shape_string(src.shape()) +
                        ", model expects " + shape_string(p.var->shape()));
    }
    std::copy(src.data().begin(), src.data().end(), p.var->data().begin());
  }
}

EgSpikeFormer load_model(const std::filesystem::path& path) {
  Checkpoint ckpt = read_checkpoint(path);
  EgSpikeFormer model(ckpt.model, ckpt.lif, 0);
  restore(model, ckpt);
  return model;
}

}  // namespace egsf
