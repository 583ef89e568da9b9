// SPDX-License-Identifier: Apache-2.0
#include "pbgru/numerics/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "pbgru/numerics/errors.hpp"

namespace pbgru {

namespace fault {
namespace {
std::atomic<bool> g_tanh_flip{false};
}
void set_tanh_grad_sign_flip(bool enabled) { g_tanh_flip.store(enabled); }
bool tanh_grad_sign_flipped() { return g_tanh_flip.load(); }
}  // namespace fault

namespace {

using detail::Node;
using BackwardFn = std::function<void(Node&)>;

Tensor make_result_n(const char* op, Shape shape, std::vector<double> value, std::span<const Tensor> parents,
                     BackwardFn backward) {
  for (double v : value) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + " produced a non-finite value");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->leaf = false;
  node->op = op;
  bool tracked = false;
  for (const Tensor& p : parents) tracked = tracked || p.requires_grad();
  if (tracked) {
    node->requires_grad = true;
    for (const Tensor& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor make_result(const char* op, Shape shape, std::vector<double> value, std::initializer_list<Tensor> parents,
                   BackwardFn backward) {
  return make_result_n(op, std::move(shape), std::move(value), std::span<const Tensor>(parents.begin(), parents.size()),
                       std::move(backward));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank2(const char* op, const Tensor& a) {
  if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_nn(a, bt.data(), c, m, k, n);
}

// C[m x n] += A[k x m]^T * B[k x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t k, std::size_t m, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = arow[i];
      if (api == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

// Unary elementwise op whose derivative is expressed through input x and
// output y.
template <typename F, typename D>
Tensor unary(const char* op, const Tensor& x, F f, D deriv) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_result(op, x.shape(), std::move(out), {x}, [deriv](Node& self) {
    Node& in = parent(self, 0);
    if (!in.requires_grad) return;
    for (std::size_t i = 0; i < self.value.size(); ++i) in.grad[i] += self.grad[i] * deriv(in.value[i], self.value[i]);
  });
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return make_result("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) gemm_nt(self.grad.data(), pb.value.data(), pa.grad.data(), m, n, k);
    if (pb.requires_grad) gemm_tn(pa.value.data(), self.grad.data(), pb.grad.data(), m, k, n);
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank2("linear", x);
  require_rank2("linear", weight);
  const std::size_t r = x.dim(0), in = x.dim(1), out_w = weight.dim(0);
  if (weight.dim(1) != in) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != out_w) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  std::vector<double> out(r * out_w, 0.0);
  if (has_bias) {
    const auto bv = bias.values();
    for (std::size_t i = 0; i < r; ++i) std::copy(bv.begin(), bv.end(), out.begin() + i * out_w);
  }
  gemm_nt(x.values().data(), weight.values().data(), out.data(), r, in, out_w);
  auto backward = [r, in, out_w, has_bias](Node& self) {
    Node& px = parent(self, 0);
    Node& pw = parent(self, 1);
    if (px.requires_grad) gemm_nn(self.grad.data(), pw.value.data(), px.grad.data(), r, out_w, in);
    if (pw.requires_grad) gemm_tn(self.grad.data(), px.value.data(), pw.grad.data(), r, out_w, in);
    if (has_bias) {
      Node& pb = parent(self, 2);
      if (pb.requires_grad) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < out_w; ++j) pb.grad[j] += self.grad[i * out_w + j];
      }
    }
  };
  if (has_bias) return make_result("linear", {r, out_w}, std::move(out), {x, weight, bias}, backward);
  return make_result("linear", {r, out_w}, std::move(out), {x, weight}, backward);
}

Tensor transpose(const Tensor& a) {
  require_rank2("transpose", a);
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<std::size_t> idx(m * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) idx[i * m + j] = j * n + i;
  return gather(a, std::move(idx), {n, m});
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  const auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      Node& in = parent(self, p);
      if (!in.requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  const auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    if (pb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  const auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
    if (pb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
  });
}

Tensor affine(const Tensor& x, double scale, double shift) {
  return unary(
      "affine", x, [scale, shift](double v) { return scale * v + shift; }, [scale](double, double) { return scale; });
}

Tensor tanh(const Tensor& x) {
  const double sign = fault::tanh_grad_sign_flipped() ? -1.0 : 1.0;
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); }, [sign](double, double y) { return sign * (1.0 - y * y); });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor map_unary(const Tensor& x, const std::function<double(double)>& f, const std::function<double(double)>& df,
                 const char* name) {
  return unary(name, x, f, [df](double v, double) { return df(v); });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() == 0 || bias.numel() != x.shape().back()) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " vs input " + shape_str(x.shape()));
  }
  const std::size_t c = bias.numel();
  const auto xv = x.values(), bv = bias.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + bv[i % c];
  return make_result("add_bias", x.shape(), std::move(out), {x, bias}, [c](Node& self) {
    Node& px = parent(self, 0);
    Node& pb = parent(self, 1);
    if (px.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
    if (pb.requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i % c] += self.grad[i];
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  require_rank2("scale_rows", x);
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (s.numel() != r) throw ShapeError("scale_rows: " + shape_str(s.shape()) + " vs " + shape_str(x.shape()));
  const auto xv = x.values(), sv = s.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] * sv[i];
  return make_result("scale_rows", x.shape(), std::move(out), {x, s}, [r, c](Node& self) {
    Node& px = parent(self, 0);
    Node& ps = parent(self, 1);
    for (std::size_t i = 0; i < r; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const std::size_t k = i * c + j;
        if (px.requires_grad) px.grad[k] += self.grad[k] * ps.value[i];
        acc += self.grad[k] * px.value[k];
      }
      if (ps.requires_grad) ps.grad[i] += acc;
    }
  });
}

Tensor concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_last: no operands");
  Shape lead = parts[0].shape();
  lead.pop_back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    Shape s = p.shape();
    if (s.empty()) throw ShapeError("concat_last: scalar operand");
    const std::size_t w = s.back();
    s.pop_back();
    if (s != lead) throw ShapeError("concat_last: leading dims differ, " + shape_str(p.shape()));
    widths.push_back(w);
    total += w;
  }
  const std::size_t rows = shape_numel(lead);
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto v = parts[k].values();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(v.begin() + i * widths[k], widths[k], out.begin() + i * total + offset);
    offset += widths[k];
  }
  Shape shape = lead;
  shape.push_back(total);
  return make_result_n("concat_last", std::move(shape), std::move(out), parts, [widths, rows, total](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Node& in = parent(self, k);
      if (in.requires_grad) {
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) in.grad[i * widths[k] + j] += self.grad[i * total + off + j];
      }
      off += widths[k];
    }
  });
}

Tensor concat_last(std::initializer_list<Tensor> parts) {
  return concat_last(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin > end || end > x.shape().back()) {
    throw ShapeError("slice_last: [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                     shape_str(x.shape()));
  }
  const std::size_t c = x.shape().back();
  const std::size_t rows = x.numel() / std::max<std::size_t>(c, 1);
  const std::size_t w = end - begin;
  const auto xv = x.values();
  std::vector<double> out(rows * w);
  for (std::size_t i = 0; i < rows; ++i) std::copy_n(xv.begin() + i * c + begin, w, out.begin() + i * w);
  Shape shape = x.shape();
  shape.back() = w;
  return make_result("slice_last", std::move(shape), std::move(out), {x}, [rows, c, w, begin](Node& self) {
    Node& in = parent(self, 0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < w; ++j) in.grad[i * c + begin + j] += self.grad[i * w + j];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  const auto xv = x.values();
  return make_result("reshape", std::move(shape), std::vector<double>(xv.begin(), xv.end()), {x}, [](Node& self) {
    Node& in = parent(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
  });
}

Tensor gather(const Tensor& x, std::vector<std::size_t> indices, Shape shape) {
  if (shape_numel(shape) != indices.size()) {
    throw ShapeError("gather: " + std::to_string(indices.size()) + " indices for shape " + shape_str(shape));
  }
  const auto xv = x.values();
  std::vector<double> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= xv.size()) throw ShapeError("gather: index out of range for " + shape_str(x.shape()));
    out[i] = xv[indices[i]];
  }
  return make_result("gather", std::move(shape), std::move(out), {x}, [idx = std::move(indices)](Node& self) {
    Node& in = parent(self, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) in.grad[idx[i]] += self.grad[i];
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw ShapeError("softmax: axis " + std::to_string(axis) + " for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = -INFINITY;
      for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, xv[base + k * inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const double e = std::exp(xv[base + k * inner] - mx);
        out[base + k * inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= z;
    }
  return make_result("softmax", s, std::move(out), {x}, [outer, inner, len](Node& self) {
    Node& px = parent(self, 0);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < len; ++k) dot += self.grad[base + k * inner] * self.value[base + k * inner];
        for (std::size_t k = 0; k < len; ++k) {
          const std::size_t i = base + k * inner;
          px.grad[i] += self.value[i] * (self.grad[i] - dot);
        }
      }
  });
}

Tensor sum(const Tensor& x) {
  const auto xv = x.values();
  const double s = std::accumulate(xv.begin(), xv.end(), 0.0);
  return make_result("sum", {1}, {s}, {x}, [](Node& self) {
    Node& in = parent(self, 0);
    for (double& g : in.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const std::size_t n = x.numel();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  const auto xv = x.values();
  const double s = std::accumulate(xv.begin(), xv.end(), 0.0) / static_cast<double>(n);
  return make_result("mean", {1}, {s}, {x}, [n](Node& self) {
    Node& in = parent(self, 0);
    const double g = self.grad[0] / static_cast<double>(n);
    for (double& v : in.grad) v += g;
  });
}

}  // namespace pbgru
