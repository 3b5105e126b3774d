#include "motionguide/ndiff/ops.hpp"

#include <algorithm>
#include <cmath>

#include "motionguide/errors.hpp"

namespace mg::nd {
namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw structural_error(std::string(op) + ": operands live on different tapes");
}

void require_shape(const char* op, const char* what, const Shape& expected, const Shape& actual) {
  if (expected != actual) {
    throw structural_error(std::string(op) + ": " + what + " expected " + shape_string(expected) + ", got " +
                           shape_string(actual));
  }
}

void require_rank(const char* op, const char* what, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw structural_error(std::string(op) + ": " + what + " expected rank " + std::to_string(rank) +
                           ", got shape " + shape_string(t.shape()));
  }
}

// Adds `delta` into the gradient of node `id` if it participates in backward.
template <class F>
void accumulate(Tape& tape, std::size_t id, F&& fill) {
  if (!tape.requires_grad(id)) return;
  fill(tape.grad_buffer(id).data());
}

}  // namespace

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  require_shape("add", "rhs shape", a.shape(), b.shape());
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
    for (std::size_t id : {ia, ib}) {
      accumulate(t, id, [&](std::span<double> dst) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
      });
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  require_shape("mul", "rhs shape", a.shape(), b.shape());
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    accumulate(t, ia, [&](std::span<double> dst) {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * bv[i];
    });
    accumulate(t, ib, [&](std::span<double> dst) {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * av[i];
    });
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const std::size_t ia = a.id();
  return a.tape().push(Tensor::scalar(total), {ia}, [ia](Tape& t, const Tensor& g) {
    accumulate(t, ia, [&](std::span<double> dst) {
      for (double& d : dst) d += g[0];
    });
  });
}

Var dense(Var x, Var weight, Var bias) {
  require_same_tape(x, weight, "dense");
  require_same_tape(x, bias, "dense");
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require_rank("dense", "weight", wv, 2);
  const std::size_t out_features = wv.dim(0), in_features = wv.dim(1);
  require_shape("dense", "bias", Shape{out_features}, bias.shape());
  std::size_t rows = 0;
  if (xv.rank() == 1) {
    require_shape("dense", "input", Shape{in_features}, xv.shape());
    rows = 1;
  } else if (xv.rank() == 2) {
    if (xv.dim(1) != in_features) require_shape("dense", "input", Shape{xv.dim(0), in_features}, xv.shape());
    rows = xv.dim(0);
  } else {
    throw structural_error("dense: input expected rank 1 or 2, got shape " + shape_string(xv.shape()));
  }

  Shape out_shape = xv.rank() == 1 ? Shape{out_features} : Shape{rows, out_features};
  Tensor out(out_shape);
  const auto bv = bias.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data().data() + r * in_features;
    double* yr = out.data().data() + r * out_features;
    for (std::size_t o = 0; o < out_features; ++o) {
      const double* wr = wv.data().data() + o * in_features;
      double acc = bv[o];
      for (std::size_t i = 0; i < in_features; ++i) acc += wr[i] * xr[i];
      yr[o] = acc;
    }
  }

  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().push(std::move(out), {ix, iw, ib},
                       [ix, iw, ib, rows, in_features, out_features](Tape& t, const Tensor& g) {
    const auto xd = t.value(ix).data();
    const auto wd = t.value(iw).data();
    accumulate(t, ix, [&](std::span<double> dx) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < out_features; ++o) {
          const double go = g[r * out_features + o];
          if (go == 0.0) continue;
          const double* wr = wd.data() + o * in_features;
          double* dxr = dx.data() + r * in_features;
          for (std::size_t i = 0; i < in_features; ++i) dxr[i] += go * wr[i];
        }
      }
    });
    accumulate(t, iw, [&](std::span<double> dw) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xd.data() + r * in_features;
        for (std::size_t o = 0; o < out_features; ++o) {
          const double go = g[r * out_features + o];
          double* dwr = dw.data() + o * in_features;
          for (std::size_t i = 0; i < in_features; ++i) dwr[i] += go * xr[i];
        }
      }
    });
    accumulate(t, ib, [&](std::span<double> db) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < out_features; ++o) db[o] += g[r * out_features + o];
      }
    });
  });
}

Var conv1d(Var x, Var weight, Var bias, Conv1dSpec spec) {
  require_same_tape(x, weight, "conv1d");
  require_same_tape(x, bias, "conv1d");
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require_rank("conv1d", "input", xv, 2);
  require_rank("conv1d", "weight", wv, 3);
  const std::size_t steps = xv.dim(0), cin = xv.dim(1);
  const std::size_t cout = wv.dim(0), kernel = wv.dim(2);
  if (wv.dim(1) != cin) require_shape("conv1d", "weight", Shape{cout, cin, kernel}, wv.shape());
  require_shape("conv1d", "bias", Shape{cout}, bias.shape());
  if (spec.stride == 0) throw structural_error("conv1d: stride must be positive");
  const std::size_t padded = steps + 2 * spec.padding;
  if (kernel == 0 || padded < kernel) {
    throw structural_error("conv1d: kernel " + std::to_string(kernel) + " does not fit padded length " +
                           std::to_string(padded));
  }
  const std::size_t out_steps = (padded - kernel) / spec.stride + 1;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(spec.padding);

  Tensor out({out_steps, cout});
  const double* xd = xv.data().data();
  const double* wd = wv.data().data();
  const auto bd = bias.value().data();
  for (std::size_t to = 0; to < out_steps; ++to) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(to * spec.stride) - pad;
    for (std::size_t co = 0; co < cout; ++co) {
      double acc = bd[co];
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::ptrdiff_t ti = start + static_cast<std::ptrdiff_t>(k);
        if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(steps)) continue;
        const double* xr = xd + static_cast<std::size_t>(ti) * cin;
        const double* wr = wd + co * cin * kernel + k;
        for (std::size_t ci = 0; ci < cin; ++ci) acc += wr[ci * kernel] * xr[ci];
      }
      out(to, co) = acc;
    }
  }

  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  const std::size_t stride = spec.stride;
  return x.tape().push(std::move(out), {ix, iw, ib},
                       [=](Tape& t, const Tensor& g) {
    const double* xd = t.value(ix).data().data();
    const double* wd = t.value(iw).data().data();
    const bool need_x = t.requires_grad(ix), need_w = t.requires_grad(iw);
    double* dx = need_x ? t.grad_buffer(ix).data().data() : nullptr;
    double* dw = need_w ? t.grad_buffer(iw).data().data() : nullptr;
    for (std::size_t to = 0; to < out_steps; ++to) {
      const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(to * stride) - pad;
      for (std::size_t co = 0; co < cout; ++co) {
        const double go = g[to * cout + co];
        if (go == 0.0) continue;
        for (std::size_t k = 0; k < kernel; ++k) {
          const std::ptrdiff_t ti = start + static_cast<std::ptrdiff_t>(k);
          if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(steps)) continue;
          const std::size_t row = static_cast<std::size_t>(ti) * cin;
          const std::size_t wbase = co * cin * kernel + k;
          if (dx) {
            for (std::size_t ci = 0; ci < cin; ++ci) dx[row + ci] += go * wd[wbase + ci * kernel];
          }
          if (dw) {
            for (std::size_t ci = 0; ci < cin; ++ci) dw[wbase + ci * kernel] += go * xd[row + ci];
          }
        }
      }
    }
    accumulate(t, ib, [&](std::span<double> db) {
      for (std::size_t to = 0; to < out_steps; ++to) {
        for (std::size_t co = 0; co < cout; ++co) db[co] += g[to * cout + co];
      }
    });
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  const std::size_t ix = x.id();
  return x.tape().push(std::move(out), {ix}, [ix](Tape& t, const Tensor& g) {
    const auto xv = t.value(ix).data();
    accumulate(t, ix, [&](std::span<double> dst) {
      for (std::size_t i = 0; i < dst.size(); ++i) {
        if (xv[i] > 0.0) dst[i] += g[i];
      }
    });
  });
}

Var tanh(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = std::tanh(v);
  Tape& tape = x.tape();
  const std::size_t ix = x.id(), iy = tape.size();
  return tape.push(std::move(out), {ix}, [ix, iy](Tape& t, const Tensor& g) {
    const auto yv = t.value(iy).data();
    accumulate(t, ix, [&](std::span<double> dst) {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * (1.0 - yv[i] * yv[i]);
    });
  });
}

Var softmax(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 1 && xv.rank() != 2) {
    throw structural_error("softmax: input expected rank 1 or 2, got shape " + shape_string(xv.shape()));
  }
  const std::size_t width = xv.shape().back();
  const std::size_t rows = xv.size() / width;
  Tensor out = xv;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data().data() + r * width;
    const double peak = *std::max_element(row, row + width);
    double total = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      row[i] = std::exp(row[i] - peak);
      total += row[i];
    }
    for (std::size_t i = 0; i < width; ++i) row[i] /= total;
  }
  Tape& tape = x.tape();
  const std::size_t ix = x.id(), iy = tape.size();
  return tape.push(std::move(out), {ix}, [ix, iy, rows, width](Tape& t, const Tensor& g) {
    const auto yv = t.value(iy).data();
    accumulate(t, ix, [&](std::span<double> dst) {
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * width;
        double dot = 0.0;
        for (std::size_t i = 0; i < width; ++i) dot += g[base + i] * yv[base + i];
        for (std::size_t i = 0; i < width; ++i) dst[base + i] += yv[base + i] * (g[base + i] - dot);
      }
    });
  });
}

Var mean_pool(Var x, std::size_t window, std::size_t stride) {
  const Tensor& xv = x.value();
  require_rank("mean_pool", "input", xv, 2);
  const std::size_t steps = xv.dim(0), channels = xv.dim(1);
  if (window == 0 || stride == 0 || window > steps) {
    throw structural_error("mean_pool: window " + std::to_string(window) + " / stride " + std::to_string(stride) +
                           " invalid for input " + shape_string(xv.shape()));
  }
  const std::size_t out_steps = (steps - window) / stride + 1;
  const double inv = 1.0 / static_cast<double>(window);
  Tensor out({out_steps, channels});
  for (std::size_t to = 0; to < out_steps; ++to) {
    for (std::size_t k = 0; k < window; ++k) {
      const std::size_t ti = to * stride + k;
      for (std::size_t c = 0; c < channels; ++c) out(to, c) += xv(ti, c) * inv;
    }
  }
  const std::size_t ix = x.id();
  return x.tape().push(std::move(out), {ix}, [=](Tape& t, const Tensor& g) {
    accumulate(t, ix, [&](std::span<double> dst) {
      for (std::size_t to = 0; to < out_steps; ++to) {
        for (std::size_t k = 0; k < window; ++k) {
          const std::size_t ti = to * stride + k;
          for (std::size_t c = 0; c < channels; ++c) dst[ti * channels + c] += g[to * channels + c] * inv;
        }
      }
    });
  });
}

Var upsample(Var x, std::size_t factor) {
  const Tensor& xv = x.value();
  require_rank("upsample", "input", xv, 2);
  if (factor == 0) throw structural_error("upsample: factor must be positive");
  const std::size_t steps = xv.dim(0), channels = xv.dim(1);
  const std::size_t length = steps * factor;
  // Linear interpolation at half-sample centres, clamped at the ends.
  struct Tap {
    std::size_t lo, hi;
    double w;
  };
  std::vector<Tap> taps(length);
  for (std::size_t to = 0; to < length; ++to) {
    const double s = std::clamp((static_cast<double>(to) + 0.5) / static_cast<double>(factor) - 0.5, 0.0,
                                static_cast<double>(steps - 1));
    const auto lo = static_cast<std::size_t>(s);
    taps[to] = {lo, std::min(lo + 1, steps - 1), s - static_cast<double>(lo)};
  }
  Tensor out({length, channels});
  for (std::size_t to = 0; to < length; ++to) {
    const Tap& tp = taps[to];
    for (std::size_t c = 0; c < channels; ++c) out(to, c) = (1.0 - tp.w) * xv(tp.lo, c) + tp.w * xv(tp.hi, c);
  }
  const std::size_t ix = x.id();
  return x.tape().push(std::move(out), {ix}, [=](Tape& t, const Tensor& g) {
    accumulate(t, ix, [&](std::span<double> dst) {
      for (std::size_t to = 0; to < length; ++to) {
        const Tap& tp = taps[to];
        for (std::size_t c = 0; c < channels; ++c) {
          dst[tp.lo * channels + c] += (1.0 - tp.w) * g[to * channels + c];
          dst[tp.hi * channels + c] += tp.w * g[to * channels + c];
        }
      }
    });
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t ix = x.id();
  return x.tape().push(std::move(out), {ix}, [ix](Tape& t, const Tensor& g) {
    accumulate(t, ix, [&](std::span<double> dst) {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    });
  });
}

Var mse(Var x, const Tensor& target) {
  require_shape("mse", "target", x.shape(), target.shape());
  const auto xv = x.value().data();
  const auto tv = target.data();
  const double n = static_cast<double>(xv.size());
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double d = xv[i] - tv[i];
    total += d * d;
  }
  const std::size_t ix = x.id();
  return x.tape().push(Tensor::scalar(total / n), {ix}, [ix, target, n](Tape& t, const Tensor& g) {
    const auto xv = t.value(ix).data();
    const auto tv = target.data();
    accumulate(t, ix, [&](std::span<double> dst) {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[0] * 2.0 * (xv[i] - tv[i]) / n;
    });
  });
}

CrossEntropyValue cross_entropy(std::span<const double> probabilities, std::size_t target) {
  if (target >= probabilities.size()) {
    throw structural_error("cross_entropy: target " + std::to_string(target) + " out of range for " +
                           std::to_string(probabilities.size()) + " classes");
  }
  const double p = probabilities[target];
  if (p < kProbabilityFloor) return {-std::log(kProbabilityFloor), true};
  return {-std::log(p), false};
}

Var cross_entropy(Var probabilities, std::size_t target) {
  const Tensor& pv = probabilities.value();
  if (!(pv.rank() == 1 || (pv.rank() == 2 && pv.dim(0) == 1))) {
    throw structural_error("cross_entropy: expected a single probability vector, got shape " +
                           shape_string(pv.shape()));
  }
  const CrossEntropyValue ce = cross_entropy(pv.data(), target);
  Tape& tape = probabilities.tape();
  if (ce.floored) tape.note_floor_event();
  const double p = std::max(pv[target], kProbabilityFloor);
  const std::size_t ip = probabilities.id();
  return tape.push(Tensor::scalar(ce.loss), {ip}, [ip, target, p](Tape& t, const Tensor& g) {
    accumulate(t, ip, [&](std::span<double> dst) { dst[target] += -g[0] / p; });
  });
}

}  // namespace mg::nd
