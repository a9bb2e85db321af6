#include "rca/ops.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gemm.hpp"

namespace rca::ops {

namespace {

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void check_finite([[maybe_unused]] const Tensor& t, [[maybe_unused]] const char* op) {
#ifndef NDEBUG
  for (double v : t.values()) {
    assert(std::isfinite(v) && "non-finite value after forward op");
  }
#endif
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got " + shape_str(t.shape()));
  }
}

// Shared scaffolding for elementwise unary ops: dy/dx is computed from the
// saved input and output values.
template <typename Fwd, typename Deriv>
Tensor unary(Tape& tape, const Tensor& x, const char* name, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  Tensor y = Tensor::from(x.shape(), std::move(out), x.requires_grad());
  check_finite(y, name);
  if (x.requires_grad()) {
    tape.record({x}, y, [x, y, deriv]() mutable {
      auto gx = x.grad_mut();
      auto gy = y.grad();
      auto xv = x.values();
      auto yv = y.values();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * deriv(xv[i], yv[i]);
    });
  }
  return y;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  const bool rg = any_requires_grad({&a, &b});
  Tensor y = Tensor::from(a.shape(), std::move(out), rg);
  if (rg) {
    tape.record({a, b}, y, [a, b, y]() mutable {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto g = a.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto g = b.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      }
    });
  }
  return y;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  const bool rg = any_requires_grad({&a, &b});
  Tensor y = Tensor::from(a.shape(), std::move(out), rg);
  if (rg) {
    tape.record({a, b}, y, [a, b, y]() mutable {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto g = a.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto g = b.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= gy[i];
      }
    });
  }
  return y;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  const bool rg = any_requires_grad({&a, &b});
  Tensor y = Tensor::from(a.shape(), std::move(out), rg);
  check_finite(y, "mul");
  if (rg) {
    tape.record({a, b}, y, [a, b, y]() mutable {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto g = a.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * b[i];
      }
      if (b.requires_grad()) {
        auto g = b.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * a[i];
      }
    });
  }
  return y;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  return unary(
      tape, a, "scale", [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

Tensor relu(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double s) { return s * (1.0 - s); });
}

Tensor exp(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, "exp", [](double v) { return std::exp(v); }, [](double, double e) { return e; });
}

Tensor log(Tape& tape, const Tensor& x) {
  for (double v : x.values()) {
    if (!(v > 0.0)) throw std::domain_error("log: non-positive input");
  }
  return unary(
      tape, x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sum(Tape& tape, const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor y = Tensor::scalar(s, x.requires_grad());
  if (x.requires_grad()) {
    tape.record({x}, y, [x, y]() mutable {
      const double g = y.grad()[0];
      for (auto& gx : x.grad_mut()) gx += g;
    });
  }
  return y;
}

Tensor mean(Tape& tape, const Tensor& x) {
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.numel()));
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  detail::gemm(false, false, m, n, k, a.values().data(), b.values().data(), out.data(), false);
  const bool rg = any_requires_grad({&a, &b});
  Tensor y = Tensor::from({m, n}, std::move(out), rg);
  check_finite(y, "matmul");
  if (rg) {
    tape.record({a, b}, y, [a, b, y, m, n, k]() mutable {
      const double* gy = y.grad().data();
      if (a.requires_grad()) {
        // dA = dY * B^T
        detail::gemm(false, true, m, k, n, gy, b.values().data(), a.grad_mut().data(), true);
      }
      if (b.requires_grad()) {
        // dB = A^T * dY
        detail::gemm(true, false, k, n, m, a.values().data(), gy, b.grad_mut().data(), true);
      }
    });
  }
  return y;
}

Tensor transpose(Tape& tape, const Tensor& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  }
  Tensor y = Tensor::from({c, r}, std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record({x}, y, [x, y, r, c]() mutable {
      auto gx = x.grad_mut();
      auto gy = y.grad();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gy[j * r + i];
      }
    });
  }
  return y;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  Tensor y = Tensor::from(std::move(shape), std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record({x}, y, [x, y]() mutable {
      auto gx = x.grad_mut();
      auto gy = y.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    });
  }
  return y;
}

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, ho, wo, stride;
};

// Column matrix: (cin*9) x (ho*wo).
std::vector<double> im2col(std::span<const double> x, const ConvGeometry& g) {
  std::vector<double> col(g.cin * 9 * g.ho * g.wo, 0.0);
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = col.data() + ((c * 3 + ky) * 3 + kx) * g.ho * g.wo;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - 1;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          const double* src = x.data() + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - 1;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            row[oy * g.wo + ox] = src[ix];
          }
        }
      }
    }
  }
  return col;
}

void col2im_add(std::span<const double> col, const ConvGeometry& g, std::span<double> dx) {
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = col.data() + ((c * 3 + ky) * 3 + kx) * g.ho * g.wo;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - 1;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          double* dst = dx.data() + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - 1;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dst[ix] += row[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& kernel, std::size_t stride) {
  require_rank(x, 3, "conv2d");
  require_rank(kernel, 4, "conv2d");
  if (kernel.dim(2) != 3 || kernel.dim(3) != 3) {
    throw std::invalid_argument("conv2d: only 3x3 kernels are supported, got " + shape_str(kernel.shape()));
  }
  if (kernel.dim(1) != x.dim(0)) {
    throw std::invalid_argument("conv2d: kernel " + shape_str(kernel.shape()) + " does not match input " +
                                shape_str(x.shape()));
  }
  if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");

  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), (x.dim(1) + stride - 1) / stride,
                 (x.dim(2) + stride - 1) / stride, stride};
  const std::size_t cout = kernel.dim(0);
  const std::size_t patch = g.cin * 9;
  const std::size_t npix = g.ho * g.wo;

  auto col = std::make_shared<std::vector<double>>(im2col(x.values(), g));
  std::vector<double> out(cout * npix);
  detail::gemm(false, false, cout, npix, patch, kernel.values().data(), col->data(), out.data(), false);

  const bool rg = any_requires_grad({&x, &kernel});
  Tensor y = Tensor::from({cout, g.ho, g.wo}, std::move(out), rg);
  check_finite(y, "conv2d");
  if (rg) {
    tape.record({x, kernel}, y, [x, kernel, y, col, g, cout, patch, npix]() mutable {
      const double* gy = y.grad().data();
      if (kernel.requires_grad()) {
        detail::gemm(false, true, cout, patch, npix, gy, col->data(), kernel.grad_mut().data(), true);
      }
      if (x.requires_grad()) {
        std::vector<double> dcol(patch * npix);
        detail::gemm(true, false, patch, npix, cout, kernel.values().data(), gy, dcol.data(), false);
        col2im_add(dcol, g, x.grad_mut());
      }
    });
  }
  return y;
}

Tensor concat_channels(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  Shape trailing(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t channels = 0;
  bool rg = false;
  for (const auto& p : parts) {
    Shape t(p.shape().begin() + 1, p.shape().end());
    if (t != trailing) {
      throw std::invalid_argument("concat_channels: shape mismatch " + shape_str(parts[0].shape()) + " vs " +
                                  shape_str(p.shape()));
    }
    channels += p.dim(0);
    rg = rg || p.requires_grad();
  }
  std::vector<double> out;
  out.reserve(channels * shape_numel(trailing));
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  Shape shape{channels};
  shape.insert(shape.end(), trailing.begin(), trailing.end());
  Tensor y = Tensor::from(std::move(shape), std::move(out), rg);
  if (rg) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    tape.record(inputs, y, [inputs, y]() mutable {
      auto gy = y.grad();
      std::size_t offset = 0;
      for (auto& p : inputs) {
        if (p.requires_grad()) {
          auto g = p.grad_mut();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[offset + i];
        }
        offset += p.numel();
      }
    });
  }
  return y;
}

Tensor softmax_rows(Tape& tape, const Tensor& x) {
  require_rank(x, 2, "softmax_rows");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv.data() + i * c;
    double* o = out.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = std::exp(row[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < c; ++j) o[j] /= z;
  }
  Tensor y = Tensor::from(x.shape(), std::move(out), x.requires_grad());
  check_finite(y, "softmax_rows");
  if (x.requires_grad()) {
    tape.record({x}, y, [x, y, r, c]() mutable {
      auto gx = x.grad_mut();
      auto gy = y.grad();
      auto yv = y.values();
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += gy[i * c + j] * yv[i * c + j];
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += yv[i * c + j] * (gy[i * c + j] - dot);
      }
    });
  }
  return y;
}

Tensor l2_normalize_rows(Tape& tape, const Tensor& x, std::vector<std::size_t>* zero_rows) {
  require_rank(x, 2, "l2_normalize_rows");
  const std::size_t r = x.dim(0), c = x.dim(1);
  auto xv = x.values();
  std::vector<double> norms(r);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += xv[i * c + j] * xv[i * c + j];
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) {
      if (zero_rows) zero_rows->push_back(i);
      for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j];
    } else {
      for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] / norms[i];
    }
  }
  Tensor y = Tensor::from(x.shape(), std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record({x}, y, [x, y, r, c, norms]() mutable {
      auto gx = x.grad_mut();
      auto gy = y.grad();
      auto yv = y.values();
      for (std::size_t i = 0; i < r; ++i) {
        if (norms[i] == 0.0) {
          for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gy[i * c + j];
          continue;
        }
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += gy[i * c + j] * yv[i * c + j];
        for (std::size_t j = 0; j < c; ++j) {
          gx[i * c + j] += (gy[i * c + j] - yv[i * c + j] * dot) / norms[i];
        }
      }
    });
  }
  return y;
}

Tensor global_average_pool(Tape& tape, const Tensor& x) {
  require_rank(x, 3, "global_average_pool");
  const std::size_t l = x.dim(0), npix = x.dim(1) * x.dim(2);
  std::vector<double> out(l, 0.0);
  auto xv = x.values();
  for (std::size_t c = 0; c < l; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < npix; ++i) s += xv[c * npix + i];
    out[c] = s / static_cast<double>(npix);
  }
  Tensor y = Tensor::from({l}, std::move(out), x.requires_grad());
  if (x.requires_grad()) {
    tape.record({x}, y, [x, y, l, npix]() mutable {
      auto gx = x.grad_mut();
      auto gy = y.grad();
      const double inv = 1.0 / static_cast<double>(npix);
      for (std::size_t c = 0; c < l; ++c) {
        for (std::size_t i = 0; i < npix; ++i) gx[c * npix + i] += gy[c] * inv;
      }
    });
  }
  return y;
}

Tensor bce_with_logits(Tape& tape, const Tensor& logits, std::span<const double> targets) {
  if (targets.size() != logits.numel()) {
    throw std::invalid_argument("bce_with_logits: " + std::to_string(targets.size()) + " targets for " +
                                shape_str(logits.shape()) + " logits");
  }
  const std::size_t n = logits.numel();
  auto z = logits.values();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // max(z,0) - z*t + log(1 + exp(-|z|))
    total += std::max(z[i], 0.0) - z[i] * targets[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  Tensor y = Tensor::scalar(total / static_cast<double>(n), logits.requires_grad());
  if (logits.requires_grad()) {
    std::vector<double> t(targets.begin(), targets.end());
    tape.record({logits}, y, [logits, y, t, n]() mutable {
      auto g = logits.grad_mut();
      auto z = logits.values();
      const double gy = y.grad()[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double s = z[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-z[i])) : std::exp(z[i]) / (1.0 + std::exp(z[i]));
        g[i] += gy * (s - t[i]);
      }
    });
  }
  return y;
}

}  // namespace rca::ops
