// Copyright 2026 The egsf Authors
// SPDX-License-Identifier: Apache-2.0

#include "egsf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "egsf/errors.hpp"

namespace egsf {
namespace {

Var output(Tape& tape, Tensor value, std::initializer_list<const Var*> inputs) {
  return make_var(std::move(value), tape.wants_grad(inputs));
}

bool needs(const Var& v) { return v && v->requires_grad(); }

void expect_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_string(t.shape()));
  }
}

void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

// Fixed eight-lane accumulation so the compiler can vectorize without
// reassociating; the summation order is deterministic.
double dot(const double* x, const double* y, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += x[i + l] * y[i + l];
  }
  double total = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) total += x[i] * y[i];
  return total;
}

struct ChannelLayout {
  std::size_t outer = 1;
  std::size_t channels = 1;
  std::size_t inner = 1;
};

ChannelLayout channel_layout(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) throw DimensionError("channel axis out of range for " + shape_string(shape));
  ChannelLayout layout;
  for (std::size_t i = 0; i < axis; ++i) layout.outer *= shape[i];
  layout.channels = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) layout.inner *= shape[i];
  return layout;
}

struct ConvGeometry {
  std::size_t batch, c_in, h, w, c_out, k, h_out, w_out;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, const ConvSpec& spec) {
  if (input.rank() != 3 && input.rank() != 4) {
    throw DimensionError("conv2d: input must be [C,H,W] or [B,C,H,W], got " +
                         shape_string(input.shape()));
  }
  if (kernel.rank() != 4) {
    throw DimensionError("conv2d: kernel must be rank 4, got " + shape_string(kernel.shape()));
  }
  if (spec.stride == 0) throw ContractError("conv2d: stride must be positive");
  const std::size_t off = input.rank() == 4 ? 1 : 0;
  ConvGeometry g{};
  g.batch = input.rank() == 4 ? input.dim(0) : 1;
  g.c_in = input.dim(off);
  g.h = input.dim(off + 1);
  g.w = input.dim(off + 2);
  if (spec.mode == ConvMode::kPointwise) {
    if (kernel.dim(1) != g.c_in || kernel.dim(2) != 1 || kernel.dim(3) != 1) {
      throw DimensionError("conv2d pointwise: kernel " + shape_string(kernel.shape()) +
                           " does not fit input " + shape_string(input.shape()));
    }
    g.c_out = kernel.dim(0);
    g.k = 1;
  } else {
    if (kernel.dim(0) != g.c_in || kernel.dim(1) != 1 || kernel.dim(2) != kernel.dim(3)) {
      throw DimensionError("conv2d depthwise: kernel " + shape_string(kernel.shape()) +
                           " does not fit input " + shape_string(input.shape()));
    }
    g.c_out = g.c_in;
    g.k = kernel.dim(2);
  }
  g.h_out = conv_output_extent(g.h, g.k, spec.stride, spec.padding);
  g.w_out = conv_output_extent(g.w, g.k, spec.stride, spec.padding);
  return g;
}

Shape conv_output_shape(const Tensor& input, const ConvGeometry& g) {
  if (input.rank() == 4) return {g.batch, g.c_out, g.h_out, g.w_out};
  return {g.c_out, g.h_out, g.w_out};
}

// Range of output columns whose input column ox*stride + kx - padding lies
// inside [0, w).
void valid_range(std::size_t w, std::size_t w_out, std::size_t kx, const ConvSpec& s,
                 std::size_t& lo, std::size_t& hi) {
  const long stride = static_cast<long>(s.stride);
  const long shift = static_cast<long>(kx) - static_cast<long>(s.padding);
  long first = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
  long last = (static_cast<long>(w) - 1 - shift);
  last = last < 0 ? -1 : last / stride;
  last = std::min(last, static_cast<long>(w_out) - 1);
  if (first > last) {
    lo = hi = 0;
    return;
  }
  lo = static_cast<std::size_t>(first);
  hi = static_cast<std::size_t>(last) + 1;
}

// Generic strided/padded correlation used for every mode except the
// stride-1 unpadded pointwise case.
template <bool kDepthwise>
void conv_direct_forward(const double* in, const double* ker, double* out, const ConvGeometry& g,
                         const ConvSpec& s) {
  const std::size_t hw_in = g.h * g.w;
  const std::size_t hw_out = g.h_out * g.w_out;
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t co = 0; co < g.c_out; ++co) {
      double* o = out + (b * g.c_out + co) * hw_out;
      const std::size_t ci_begin = kDepthwise ? co : 0;
      const std::size_t ci_end = kDepthwise ? co + 1 : g.c_in;
      for (std::size_t ci = ci_begin; ci < ci_end; ++ci) {
        const double* x = in + (b * g.c_in + ci) * hw_in;
        const double* kk = kDepthwise ? ker + co * g.k * g.k : ker + (co * g.c_in + ci);
        for (std::size_t oy = 0; oy < g.h_out; ++oy) {
          double* orow = o + oy * g.w_out;
          for (std::size_t ky = 0; ky < g.k; ++ky) {
            const long iy = static_cast<long>(oy * s.stride + ky) - static_cast<long>(s.padding);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            const double* xrow = x + static_cast<std::size_t>(iy) * g.w;
            for (std::size_t kx = 0; kx < g.k; ++kx) {
              const double wv = kk[ky * g.k + kx];
              std::size_t lo, hi;
              valid_range(g.w, g.w_out, kx, s, lo, hi);
              const long shift = static_cast<long>(kx) - static_cast<long>(s.padding);
              if (s.stride == 1) {
                const double* xs = xrow + shift;
                for (std::size_t ox = lo; ox < hi; ++ox) orow[ox] += wv * xs[ox];
              } else {
                for (std::size_t ox = lo; ox < hi; ++ox) {
                  orow[ox] += wv * xrow[static_cast<long>(ox * s.stride) + shift];
                }
              }
            }
          }
        }
      }
    }
  }
}

template <bool kDepthwise>
void conv_direct_backward(const double* in, const double* ker, const double* gout, double* gin,
                          double* gker, const ConvGeometry& g, const ConvSpec& s) {
  const std::size_t hw_in = g.h * g.w;
  const std::size_t hw_out = g.h_out * g.w_out;
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t co = 0; co < g.c_out; ++co) {
      const double* go = gout + (b * g.c_out + co) * hw_out;
      const std::size_t ci_begin = kDepthwise ? co : 0;
      const std::size_t ci_end = kDepthwise ? co + 1 : g.c_in;
      for (std::size_t ci = ci_begin; ci < ci_end; ++ci) {
        const double* x = in + (b * g.c_in + ci) * hw_in;
        double* gx = gin ? gin + (b * g.c_in + ci) * hw_in : nullptr;
        const std::size_t kbase = kDepthwise ? co * g.k * g.k : (co * g.c_in + ci);
        for (std::size_t oy = 0; oy < g.h_out; ++oy) {
          const double* gorow = go + oy * g.w_out;
          for (std::size_t ky = 0; ky < g.k; ++ky) {
            const long iy = static_cast<long>(oy * s.stride + ky) - static_cast<long>(s.padding);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            const std::size_t row = static_cast<std::size_t>(iy) * g.w;
            for (std::size_t kx = 0; kx < g.k; ++kx) {
              const std::size_t kidx = kbase + ky * g.k + kx;
              std::size_t lo, hi;
              valid_range(g.w, g.w_out, kx, s, lo, hi);
              const long shift = static_cast<long>(kx) - static_cast<long>(s.padding);
              if (hi <= lo) continue;
              if (s.stride == 1) {
                const double* xs = x + row + shift;
                if (gker) gker[kidx] += dot(gorow + lo, xs + lo, hi - lo);
                if (gx) {
                  double* gxs = gx + row + shift;
                  const double kv = ker[kidx];
                  for (std::size_t ox = lo; ox < hi; ++ox) gxs[ox] += kv * gorow[ox];
                }
              } else {
                double acc = 0.0;
                for (std::size_t ox = lo; ox < hi; ++ox) {
                  const std::size_t ix =
                      row + static_cast<std::size_t>(static_cast<long>(ox * s.stride) + shift);
                  acc += gorow[ox] * x[ix];
                  if (gx) gx[ix] += ker[kidx] * gorow[ox];
                }
                if (gker) gker[kidx] += acc;
              }
            }
          }
        }
      }
    }
  }
}

bool is_fast_pointwise(const ConvSpec& s) {
  return s.mode == ConvMode::kPointwise && s.stride == 1 && s.padding == 0;
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t k, std::size_t stride,
                               std::size_t padding) {
  if (k > in + 2 * padding) {
    throw DimensionError("conv2d: kernel extent " + std::to_string(k) +
                         " exceeds padded input extent " + std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - k) / stride + 1;
}

namespace kernels {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool trans_a, bool trans_b,
          bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) std::fill(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(m * n), 0.0);
    return;
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstMap = Eigen::Map<const RowMajor>;
  const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n),
             K = static_cast<Eigen::Index>(k);
  const ConstMap A(a.data(), trans_a ? K : M, trans_a ? M : K);
  const ConstMap B(b.data(), trans_b ? N : K, trans_b ? K : N);
  Eigen::Map<RowMajor> C(c.data(), M, N);
  // Single threaded: Eigen is built without OpenMP here, so the reduction
  // order is fixed by the shapes alone.
  auto product = [&](const auto& lhs, const auto& rhs) {
    if (accumulate) {
      C.noalias() += lhs * rhs;
    } else {
      C.noalias() = lhs * rhs;
    }
  };
  if (trans_a && trans_b) {
    product(A.transpose(), B.transpose());
  } else if (trans_a) {
    product(A.transpose(), B);
  } else if (trans_b) {
    product(A, B.transpose());
  } else {
    product(A, B);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  expect_rank(a, 2, "matmul");
  expect_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner extents differ for " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  Tensor out({a.dim(0), b.dim(1)});
  gemm(a.data(), b.data(), out.data(), a.dim(0), a.dim(1), b.dim(1), false, false, false);
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const ConvSpec& spec) {
  const ConvGeometry g = conv_geometry(input, kernel, spec);
  Tensor out(conv_output_shape(input, g));
  if (is_fast_pointwise(spec)) {
    const std::size_t hw = g.h * g.w;
    for (std::size_t b = 0; b < g.batch; ++b) {
      gemm(kernel.data(), input.data().subspan(b * g.c_in * hw, g.c_in * hw),
           out.data().subspan(b * g.c_out * hw, g.c_out * hw), g.c_out, g.c_in, hw, false, false,
           false);
    }
  } else if (spec.mode == ConvMode::kPointwise) {
    conv_direct_forward<false>(input.data().data(), kernel.data().data(), out.data().data(), g,
                               spec);
  } else {
    conv_direct_forward<true>(input.data().data(), kernel.data().data(), out.data().data(), g,
                              spec);
  }
  return out;
}

}  // namespace kernels

Var matmul(Tape& tape, const Var& a, const Var& b) {
  Var out = output(tape, kernels::matmul(*a, *b), {&a, &b});
  if (out->requires_grad()) {
    tape.record([a, b, out] {
      if (!out->has_grad()) return;
      const std::size_t m = a->dim(0), k = a->dim(1), n = b->dim(1);
      auto g = std::as_const(*out).grad();
      if (needs(a)) kernels::gemm(g, b->data(), a->grad(), m, n, k, false, true, true);
      if (needs(b)) kernels::gemm(a->data(), g, b->grad(), k, m, n, true, false, true);
    });
  }
  return out;
}

Var batched_matmul(Tape& tape, const Var& a, const Var& b, bool transpose_b) {
  expect_rank(*a, 3, "batched_matmul");
  expect_rank(*b, 3, "batched_matmul");
  const std::size_t batch = a->dim(0), m = a->dim(1), k = a->dim(2);
  const std::size_t n = transpose_b ? b->dim(1) : b->dim(2);
  const std::size_t bk = transpose_b ? b->dim(2) : b->dim(1);
  if (b->dim(0) != batch || bk != k) {
    throw DimensionError("batched_matmul: incompatible " + shape_string(a->shape()) + " and " +
                         shape_string(b->shape()) + (transpose_b ? " (transposed)" : ""));
  }
  Tensor result({batch, m, n});
  for (std::size_t s = 0; s < batch; ++s) {
    kernels::gemm(a->data().subspan(s * m * k, m * k), b->data().subspan(s * k * n, k * n),
                  result.data().subspan(s * m * n, m * n), m, k, n, false, transpose_b, false);
  }
  Var out = output(tape, std::move(result), {&a, &b});
  if (out->requires_grad()) {
    tape.record([a, b, out, batch, m, k, n, transpose_b] {
      if (!out->has_grad()) return;
      auto g = std::as_const(*out).grad();
      for (std::size_t s = 0; s < batch; ++s) {
        auto gs = g.subspan(s * m * n, m * n);
        auto as = a->data().subspan(s * m * k, m * k);
        auto bs = b->data().subspan(s * k * n, k * n);
        if (needs(a)) {
          // dA = dC * op(B)^T
          kernels::gemm(gs, bs, a->grad().subspan(s * m * k, m * k), m, n, k, false, !transpose_b,
                        true);
        }
        if (needs(b)) {
          if (transpose_b) {
            // B is n x k: dB = dC^T * A
            kernels::gemm(gs, as, b->grad().subspan(s * k * n, k * n), n, m, k, true, false, true);
          } else {
            kernels::gemm(as, gs, b->grad().subspan(s * k * n, k * n), k, m, n, true, false, true);
          }
        }
      }
    });
  }
  return out;
}

Var linear(Tape& tape, const Var& x, const Var& weight, const Var& bias) {
  expect_rank(*weight, 2, "linear");
  const std::size_t in = weight->dim(1), out_features = weight->dim(0);
  if (x->rank() == 0 || x->shape().back() != in) {
    throw DimensionError("linear: input " + shape_string(x->shape()) + " vs weight " +
                         shape_string(weight->shape()));
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != out_features)) {
    throw DimensionError("linear: bias " + shape_string(bias->shape()) + " vs weight " +
                         shape_string(weight->shape()));
  }
  const std::size_t rows = x->numel() / in;
  Shape out_shape = x->shape();
  out_shape.back() = out_features;
  Tensor result(out_shape);
  kernels::gemm(x->data(), weight->data(), result.data(), rows, in, out_features, false, true,
                false);
  if (bias) {
    auto r = result.data();
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < out_features; ++j) r[i * out_features + j] += (*bias)[j];
    }
  }
  Var out = output(tape, std::move(result), {&x, &weight, &bias});
  if (out->requires_grad()) {
    tape.record([x, weight, bias, out, rows, in, out_features] {
      if (!out->has_grad()) return;
      auto g = std::as_const(*out).grad();
      if (needs(x)) kernels::gemm(g, weight->data(), x->grad(), rows, out_features, in, false, false, true);
      if (needs(weight)) kernels::gemm(g, x->data(), weight->grad(), out_features, rows, in, true, false, true);
      if (needs(bias)) {
        auto gb = bias->grad();
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < out_features; ++j) gb[j] += g[i * out_features + j];
        }
      }
    });
  }
  return out;
}

Var conv2d(Tape& tape, const Var& input, const Var& kernel, const ConvSpec& spec) {
  const ConvGeometry g = conv_geometry(*input, *kernel, spec);
  Var out = output(tape, kernels::conv2d(*input, *kernel, spec), {&input, &kernel});
  if (out->requires_grad()) {
    tape.record([input, kernel, out, g, spec] {
      if (!out->has_grad()) return;
      auto gout = std::as_const(*out).grad();
      double* gin = needs(input) ? input->grad().data() : nullptr;
      double* gker = needs(kernel) ? kernel->grad().data() : nullptr;
      if (is_fast_pointwise(spec)) {
        const std::size_t hw = g.h * g.w;
        for (std::size_t b = 0; b < g.batch; ++b) {
          auto go = gout.subspan(b * g.c_out * hw, g.c_out * hw);
          const double* x = input->data().data() + b * g.c_in * hw;
          if (gin) {
            kernels::gemm(kernel->data(), go, std::span<double>(gin + b * g.c_in * hw, g.c_in * hw),
                          g.c_in, g.c_out, hw, true, false, true);
          }
          if (gker) {
            kernels::gemm(go, std::span<const double>(x, g.c_in * hw),
                          std::span<double>(gker, g.c_out * g.c_in), g.c_out, hw, g.c_in, false,
                          true, true);
          }
        }
      } else if (spec.mode == ConvMode::kPointwise) {
        conv_direct_backward<false>(input->data().data(), kernel->data().data(), gout.data(), gin,
                                    gker, g, spec);
      } else {
        conv_direct_backward<true>(input->data().data(), kernel->data().data(), gout.data(), gin,
                                   gker, g, spec);
      }
    });
  }
  return out;
}

Var batch_norm(Tape& tape, const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
               Tensor& running_var, bool training, std::size_t channel_axis,
               const BatchNormConfig& config) {
  const ChannelLayout L = channel_layout(x->shape(), channel_axis);
  const std::size_t C = L.channels;
  for (const Tensor* p : {gamma.get(), beta.get(), &running_mean, &running_var}) {
    if (p->numel() != C) {
      throw DimensionError("batch_norm: parameter of shape " + shape_string(p->shape()) +
                           " for " + std::to_string(C) + " channels");
    }
  }
  const std::size_t count = L.outer * L.inner;
  auto xd = x->data();
  std::vector<double> mu(C, 0.0), inv_std(C, 0.0);
  if (training) {
    if (count == 0) throw DimensionError("batch_norm: empty batch");
    std::vector<double> var(C, 0.0);
    for (std::size_t o = 0; o < L.outer; ++o) {
      for (std::size_t c = 0; c < C; ++c) {
        const double* p = xd.data() + (o * C + c) * L.inner;
        double s = 0.0;
        for (std::size_t i = 0; i < L.inner; ++i) s += p[i];
        mu[c] += s;
      }
    }
    for (double& m : mu) m /= static_cast<double>(count);
    for (std::size_t o = 0; o < L.outer; ++o) {
      for (std::size_t c = 0; c < C; ++c) {
        const double* p = xd.data() + (o * C + c) * L.inner;
        double s = 0.0;
        for (std::size_t i = 0; i < L.inner; ++i) s += (p[i] - mu[c]) * (p[i] - mu[c]);
        var[c] += s;
      }
    }
    for (std::size_t c = 0; c < C; ++c) {
      var[c] /= static_cast<double>(count);
      inv_std[c] = 1.0 / std::sqrt(var[c] + config.eps);
      const double unbiased =
          count > 1 ? var[c] * static_cast<double>(count) / static_cast<double>(count - 1) : var[c];
      running_mean[c] = (1.0 - config.momentum) * running_mean[c] + config.momentum * mu[c];
      running_var[c] = (1.0 - config.momentum) * running_var[c] + config.momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mu[c] = running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(running_var[c] + config.eps);
    }
  }

  Tensor result(x->shape());
  auto r = result.data();
  for (std::size_t o = 0; o < L.outer; ++o) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (o * C + c) * L.inner;
      const double a = (*gamma)[c] * inv_std[c];
      const double shift = (*beta)[c] - a * mu[c];
      for (std::size_t i = 0; i < L.inner; ++i) r[base + i] = a * xd[base + i] + shift;
    }
  }
  Var out = output(tape, std::move(result), {&x, &gamma, &beta});
  if (out->requires_grad()) {
    tape.record([x, gamma, beta, out, L, mu, inv_std, training, count] {
      if (!out->has_grad()) return;
      const std::size_t C = L.channels;
      auto g = std::as_const(*out).grad();
      auto xd = x->data();
      std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
      for (std::size_t o = 0; o < L.outer; ++o) {
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t base = (o * C + c) * L.inner;
          double sg = 0.0, sgx = 0.0;
          for (std::size_t i = 0; i < L.inner; ++i) {
            sg += g[base + i];
            sgx += g[base + i] * (xd[base + i] - mu[c]) * inv_std[c];
          }
          sum_g[c] += sg;
          sum_gx[c] += sgx;
        }
      }
      if (needs(gamma)) {
        auto gg = gamma->grad();
        for (std::size_t c = 0; c < C; ++c) gg[c] += sum_gx[c];
      }
      if (needs(beta)) {
        auto gb = beta->grad();
        for (std::size_t c = 0; c < C; ++c) gb[c] += sum_g[c];
      }
      if (!needs(x)) return;
      auto gx = x->grad();
      const double n = static_cast<double>(count);
      for (std::size_t o = 0; o < L.outer; ++o) {
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t base = (o * C + c) * L.inner;
          const double a = (*gamma)[c] * inv_std[c];
          if (training) {
            const double mg = sum_g[c] / n, mgx = sum_gx[c] / n;
            for (std::size_t i = 0; i < L.inner; ++i) {
              const double xhat = (xd[base + i] - mu[c]) * inv_std[c];
              gx[base + i] += a * (g[base + i] - mg - xhat * mgx);
            }
          } else {
            for (std::size_t i = 0; i < L.inner; ++i) gx[base + i] += a * g[base + i];
          }
        }
      }
    });
  }
  return out;
}

Var add(Tape& tape, const Var& a, const Var& b) {
  expect_same_shape(*a, *b, "add");
  Tensor result(a->shape());
  auto r = result.data();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = (*a)[i] + (*b)[i];
  Var out = output(tape, std::move(result), {&a, &b});
  if (out->requires_grad()) {
    tape.record([a, b, out] {
      if (!out->has_grad()) return;
      auto g = std::as_const(*out).grad();
      for (const Var* v : {&a, &b}) {
        if (!needs(*v)) continue;
        auto gv = (*v)->grad();
        for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
      }
    });
  }
  return out;
}

Var mul(Tape& tape, const Var& a, const Var& b) {
  expect_same_shape(*a, *b, "mul");
  Tensor result(a->shape());
  auto r = result.data();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = (*a)[i] * (*b)[i];
  Var out = output(tape, std::move(result), {&a, &b});
  if (out->requires_grad()) {
    tape.record([a, b, out] {
      if (!out->has_grad()) return;
      auto g = std::as_const(*out).grad();
      if (needs(a)) {
        auto ga = a->grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*b)[i];
      }
      if (needs(b)) {
        auto gb = b->grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * (*a)[i];
      }
    });
  }
  return out;
}

Var scale(Tape& tape, const Var& a, double factor) {
  Tensor result(a->shape());
  auto r = result.data();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = (*a)[i] * factor;
  Var out = output(tape, std::move(result), {&a});
  if (out->requires_grad()) {
    tape.record([a, out, factor] {
      if (!out->has_grad()) return;
      auto g = std::as_const(*out).grad();
      auto ga = a->grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
  }
  return out;
}

Var sum(Tape& tape, const Var& a) {
  double s = 0.0;
  for (double v : a->data()) s += v;
  Var out = output(tape, Tensor::scalar(s), {&a});
  if (out->requires_grad()) {
    tape.record([a, out] {
      if (!out->has_grad()) return;
      const double g = std::as_const(*out).grad()[0];
      for (double& v : a->grad()) v += g;
    });
  }
  return out;
}

Var mean(Tape& tape, const Var& a) {
  if (a->numel() == 0) throw DimensionError("mean of empty tensor");
  return scale(tape, sum(tape, a), 1.0 / static_cast<double>(a->numel()));
}

Var reshape(Tape& tape, const Var& a, Shape shape) {
  Var out = output(tape, a->reshaped(std::move(shape)), {&a});
  if (out->requires_grad()) {
    tape.record([a, out] {
      if (!out->has_grad()) return;
      auto g = std::as_const(*out).grad();
      auto ga = a->grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

Var repeat_leading(Tape& tape, const Var& a, std::size_t times) {
  if (times == 0 || a->rank() == 0) throw ContractError("repeat_leading: need times >= 1 and rank >= 1");
  Shape shape = a->shape();
  shape[0] *= times;
  Tensor result(shape);
  const std::size_t n = a->numel();
  for (std::size_t t = 0; t < times; ++t) {
    std::copy(a->data().begin(), a->data().end(), result.data().begin() + static_cast<std::ptrdiff_t>(t * n));
  }
  Var out = output(tape, std::move(result), {&a});
  if (out->requires_grad()) {
    tape.record([a, out, times, n] {
      if (!out->has_grad()) return;
      auto g = std::as_const(*out).grad();
      auto ga = a->grad();
      for (std::size_t t = 0; t < times; ++t) {
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[t * n + i];
      }
    });
  }
  return out;
}

Var mean_leading(Tape& tape, const Var& a, std::size_t groups) {
  if (groups == 0 || a->rank() == 0 || a->dim(0) % groups != 0) {
    throw DimensionError("mean_leading: leading extent of " + shape_string(a->shape()) +
                         " not divisible by " + std::to_string(groups));
  }
  Shape shape = a->shape();
  shape[0] /= groups;
  Tensor result(shape);
  const std::size_t n = result.numel();
  const double inv = 1.0 / static_cast<double>(groups);
  auto r = result.data();
  for (std::size_t t = 0; t < groups; ++t) {
    for (std::size_t i = 0; i < n; ++i) r[i] += (*a)[t * n + i];
  }
  for (double& v : r) v *= inv;
  Var out = output(tape, std::move(result), {&a});
  if (out->requires_grad()) {
    tape.record([a, out, groups, n, inv] {
      if (!out->has_grad()) return;
      auto g = std::as_const(*out).grad();
      auto ga = a->grad();
      for (std::size_t t = 0; t < groups; ++t) {
        for (std::size_t i = 0; i < n; ++i) ga[t * n + i] += g[i] * inv;
      }
    });
  }
  return out;
}

Var mean_axis1(Tape& tape, const Var& a) {
  expect_rank(*a, 3, "mean_axis1");
  const std::size_t B = a->dim(0), N = a->dim(1), D = a->dim(2);
  Tensor result({B, D});
  const double inv = 1.0 / static_cast<double>(N);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t d = 0; d < D; ++d) result[b * D + d] += (*a)[(b * N + n) * D + d];
    }
    for (std::size_t d = 0; d < D; ++d) result[b * D + d] *= inv;
  }
  Var out = output(tape, std::move(result), {&a});
  if (out->requires_grad()) {
    tape.record([a, out, B, N, D, inv] {
      if (!out->has_grad()) return;
      auto g = std::as_const(*out).grad();
      auto ga = a->grad();
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t d = 0; d < D; ++d) ga[(b * N + n) * D + d] += g[b * D + d] * inv;
        }
      }
    });
  }
  return out;
}

Var patchify(Tape& tape, const Var& a, std::size_t patch) {
  expect_rank(*a, 4, "patchify");
  const std::size_t B = a->dim(0), C = a->dim(1), H = a->dim(2), W = a->dim(3);
  if (patch == 0 || H % patch != 0 || W % patch != 0) {
    throw DimensionError("patchify: spatial extents of " + shape_string(a->shape()) +
                         " not divisible by patch " + std::to_string(patch));
  }
  const std::size_t gh = H / patch, gw = W / patch, N = gh * gw, F = C * patch * patch;
  // index map from output position to input position
  auto source = [=](std::size_t b, std::size_t n, std::size_t f) {
    const std::size_t gy = n / gw, gx = n % gw;
    const std::size_t c = f / (patch * patch), rem = f % (patch * patch);
    const std::size_t dy = rem / patch, dx = rem % patch;
    return ((b * C + c) * H + gy * patch + dy) * W + gx * patch + dx;
  };
  Tensor result({B, N, F});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t f = 0; f < F; ++f) result[(b * N + n) * F + f] = (*a)[source(b, n, f)];
    }
  }
  Var out = output(tape, std::move(result), {&a});
  if (out->requires_grad()) {
    tape.record([a, out, B, N, F, source] {
      if (!out->has_grad()) return;
      auto g = std::as_const(*out).grad();
      auto ga = a->grad();
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t f = 0; f < F; ++f) ga[source(b, n, f)] += g[(b * N + n) * F + f];
        }
      }
    });
  }
  return out;
}

Var row_normalize(Tape& tape, const Var& a, double eps) {
  if (a->rank() == 0) throw DimensionError("row_normalize: rank-0 input");
  const std::size_t n = a->shape().back();
  const std::size_t rows = a->numel() / n;
  Tensor result(a->shape());
  std::vector<double> denom(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += (*a)[r * n + j];
    denom[r] = s + eps;
    const double floor = eps / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) result[r * n + j] = ((*a)[r * n + j] + floor) / denom[r];
  }
  Var out = output(tape, std::move(result), {&a});
  if (out->requires_grad()) {
    tape.record([a, out, n, rows, denom = std::move(denom)] {
      if (!out->has_grad()) return;
      auto g = std::as_const(*out).grad();
      auto ga = a->grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double weighted = 0.0;
        for (std::size_t j = 0; j < n; ++j) weighted += g[r * n + j] * (*out)[r * n + j];
        for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += (g[r * n + j] - weighted) / denom[r];
      }
    });
  }
  return out;
}

Var softmax_cross_entropy(Tape& tape, const Var& logits, std::span<const std::size_t> labels) {
  expect_rank(*logits, 2, "softmax_cross_entropy");
  const std::size_t B = logits->dim(0), C = logits->dim(1);
  if (labels.size() != B) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(B));
  }
  Tensor probs({B, C});
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= C) throw ContractError("softmax_cross_entropy: label out of range");
    const double* z = logits->data().data() + b * C;
    const double zmax = *std::max_element(z, z + C);
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += std::exp(z[c] - zmax);
    for (std::size_t c = 0; c < C; ++c) probs[b * C + c] = std::exp(z[c] - zmax) / s;
    loss += std::log(s) + zmax - z[labels[b]];
  }
  loss /= static_cast<double>(B);
  Var out = output(tape, Tensor::scalar(loss), {&logits});
  if (out->requires_grad()) {
    std::vector<std::size_t> lab(labels.begin(), labels.end());
    tape.record([logits, out, probs = std::move(probs), lab = std::move(lab), B, C] {
      if (!out->has_grad()) return;
      const double g = std::as_const(*out).grad()[0] / static_cast<double>(B);
      auto gl = logits->grad();
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
          gl[b * C + c] += g * (probs[b * C + c] - (c == lab[b] ? 1.0 : 0.0));
        }
      }
    });
  }
  return out;
}

Var mean_squared_error(Tape& tape, const Var& a, const Tensor& target) {
  expect_same_shape(*a, target, "mean_squared_error");
  double s = 0.0;
  for (std::size_t i = 0; i < a->numel(); ++i) {
    const double d = (*a)[i] - target[i];
    s += d * d;
  }
  const double inv = 1.0 / static_cast<double>(a->numel());
  Var out = output(tape, Tensor::scalar(s * inv), {&a});
  if (out->requires_grad()) {
    tape.record([a, out, target, inv] {
      if (!out->has_grad()) return;
      const double g = std::as_const(*out).grad()[0];
      auto ga = a->grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * 2.0 * ((*a)[i] - target[i]) * inv;
    });
  }
  return out;
}

}  // namespace egsf
