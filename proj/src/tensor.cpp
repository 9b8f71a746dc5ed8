#include "dlgdd/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "dlgdd/common.hpp"

namespace dlgdd::diff {

using MatMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                   Eigen::Dynamic, Eigen::RowMajor>>;

namespace {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw UsageError("tensor shape dims must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw UsageError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

bool tracks(const Tensor& t) { return t.node()->requires_grad; }

std::shared_ptr<Tensor::Node> make_node(std::vector<int> shape) {
  auto n = std::make_shared<Tensor::Node>();
  n->shape = std::move(shape);
  n->values.assign(shape_size(n->shape), 0.0);
  return n;
}

// Attach parents + backward fn only when some parent is part of a
// differentiable graph; otherwise the result is a plain value.
Tensor finish(std::shared_ptr<Tensor::Node> n,
              std::vector<Tensor> parents,
              std::function<void(Tensor::Node&)> backward_fn) {
  bool any = false;
  for (const Tensor& p : parents) any = any || tracks(p);
  if (any) {
    n->requires_grad = true;
    for (const Tensor& p : parents) n->parents.push_back(p.shared_node());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

// Gradient sink test: leaves without requires_grad don't accumulate.
bool wants_grad(const Tensor::Node& n) { return n.requires_grad; }

void accumulate(Tensor::Node& dst, std::size_t i, double v) {
  dst.grad[i] += v;
}

void prep(Tensor::Node& n) {
  if (wants_grad(n)) n.ensure_grad();
}

}  // namespace

std::size_t Tensor::Node::size() const { return values.size(); }

void Tensor::Node::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  auto n = make_node(std::move(shape));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values,
                    bool requires_grad) {
  auto n = make_node(std::move(shape));
  if (values.size() != n->values.size()) {
    throw UsageError("Tensor::from: " + std::to_string(values.size()) +
                     " values for shape " + shape_str(n->shape));
  }
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const std::vector<int>& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->size(); }
const std::vector<double>& Tensor::values() const { return node_->values; }
std::vector<double>& Tensor::values() { return node_->values; }
bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) throw UsageError("tensor has no gradient");
  return node_->grad;
}
std::vector<double>& Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}
void Tensor::zero_grad() {
  node_->ensure_grad();
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}
void Tensor::clear_grad() { node_->grad.clear(); }

double Tensor::item() const {
  if (size() != 1) throw UsageError("item() on non-scalar tensor");
  return node_->values[0];
}

void Tensor::backward() const {
  if (size() != 1) throw UsageError("backward() requires a scalar tensor");
  // Iterative post-order DFS over parents, then replay reversed.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (!visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

void assert_finite(const Tensor& t, const std::string& what) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value in " + what);
    }
  }
}

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto n = make_node(a.shape());
  for (std::size_t i = 0; i < n->size(); ++i)
    n->values[i] = a.values()[i] + b.values()[i];
  return finish(n, {a, b}, [](Tensor::Node& self) {
    for (int k = 0; k < 2; ++k) {
      Tensor::Node& p = *self.parents[k];
      if (!wants_grad(p)) continue;
      p.ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        accumulate(p, i, self.grad[i]);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto n = make_node(a.shape());
  for (std::size_t i = 0; i < n->size(); ++i)
    n->values[i] = a.values()[i] - b.values()[i];
  return finish(n, {a, b}, [](Tensor::Node& self) {
    for (int k = 0; k < 2; ++k) {
      Tensor::Node& p = *self.parents[k];
      if (!wants_grad(p)) continue;
      p.ensure_grad();
      double s = k == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < self.size(); ++i)
        accumulate(p, i, s * self.grad[i]);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto n = make_node(a.shape());
  for (std::size_t i = 0; i < n->size(); ++i)
    n->values[i] = a.values()[i] * b.values()[i];
  return finish(n, {a, b}, [](Tensor::Node& self) {
    Tensor::Node& pa = *self.parents[0];
    Tensor::Node& pb = *self.parents[1];
    if (wants_grad(pa)) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        accumulate(pa, i, self.grad[i] * pb.values[i]);
    }
    if (wants_grad(pb)) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        accumulate(pb, i, self.grad[i] * pa.values[i]);
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  auto n = make_node(a.shape());
  for (std::size_t i = 0; i < n->size(); ++i) n->values[i] = c * a.values()[i];
  return finish(n, {a}, [c](Tensor::Node& self) {
    Tensor::Node& p = *self.parents[0];
    if (!wants_grad(p)) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      accumulate(p, i, c * self.grad[i]);
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.shape().size() != 1 || x.shape().empty() ||
      x.shape().back() != bias.shape()[0]) {
    throw UsageError("add_bias: shape mismatch " + shape_str(x.shape()) +
                     " vs " + shape_str(bias.shape()));
  }
  std::size_t cols = static_cast<std::size_t>(bias.shape()[0]);
  auto n = make_node(x.shape());
  for (std::size_t i = 0; i < n->size(); ++i)
    n->values[i] = x.values()[i] + bias.values()[i % cols];
  return finish(n, {x, bias}, [cols](Tensor::Node& self) {
    Tensor::Node& px = *self.parents[0];
    Tensor::Node& pb = *self.parents[1];
    if (wants_grad(px)) {
      px.ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        accumulate(px, i, self.grad[i]);
    }
    if (wants_grad(pb)) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        accumulate(pb, i % cols, self.grad[i]);
    }
  });
}

Tensor min_elem(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "min_elem");
  auto n = make_node(a.shape());
  for (std::size_t i = 0; i < n->size(); ++i)
    n->values[i] = std::min(a.values()[i], b.values()[i]);
  return finish(n, {a, b}, [](Tensor::Node& self) {
    Tensor::Node& pa = *self.parents[0];
    Tensor::Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.size(); ++i) {
      bool take_a = pa.values[i] <= pb.values[i];
      Tensor::Node& p = take_a ? pa : pb;
      if (!wants_grad(p)) continue;
      p.ensure_grad();
      accumulate(p, i, self.grad[i]);
    }
  });
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  if (shape_size(shape) != x.size()) {
    throw UsageError("reshape: element count mismatch " +
                     shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  auto n = make_node(std::move(shape));
  n->values = x.values();
  return finish(n, {x}, [](Tensor::Node& self) {
    Tensor::Node& p = *self.parents[0];
    if (!wants_grad(p)) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      accumulate(p, i, self.grad[i]);
  });
}

Tensor slice_last(const Tensor& x, int from, int to) {
  int last = x.shape().back();
  if (from < 0 || to > last || from >= to) {
    throw UsageError("slice_last: bad range [" + std::to_string(from) + "," +
                     std::to_string(to) + ") for last dim " +
                     std::to_string(last));
  }
  std::vector<int> shape = x.shape();
  shape.back() = to - from;
  std::size_t outer = x.size() / static_cast<std::size_t>(last);
  std::size_t width = static_cast<std::size_t>(to - from);
  auto n = make_node(shape);
  for (std::size_t r = 0; r < outer; ++r)
    for (std::size_t c = 0; c < width; ++c)
      n->values[r * width + c] =
          x.values()[r * static_cast<std::size_t>(last) + from + c];
  return finish(n, {x}, [outer, width, last, from](Tensor::Node& self) {
    Tensor::Node& p = *self.parents[0];
    if (!wants_grad(p)) return;
    p.ensure_grad();
    for (std::size_t r = 0; r < outer; ++r)
      for (std::size_t c = 0; c < width; ++c)
        accumulate(p, r * static_cast<std::size_t>(last) + from + c,
                   self.grad[r * width + c]);
  });
}

Tensor concat_last(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw UsageError("concat_last: empty input");
  std::vector<int> shape = xs[0].shape();
  int total = 0;
  std::size_t outer = xs[0].size() / static_cast<std::size_t>(shape.back());
  std::vector<int> widths;
  for (const Tensor& t : xs) {
    std::vector<int> s = t.shape();
    int w = s.back();
    s.back() = shape.back();
    if (s != shape) throw UsageError("concat_last: incompatible shapes");
    widths.push_back(w);
    total += w;
  }
  shape.back() = total;
  auto n = make_node(shape);
  std::size_t off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    std::size_t w = static_cast<std::size_t>(widths[k]);
    for (std::size_t r = 0; r < outer; ++r)
      for (std::size_t c = 0; c < w; ++c)
        n->values[r * static_cast<std::size_t>(total) + off + c] =
            xs[k].values()[r * w + c];
    off += w;
  }
  std::vector<Tensor> parents(xs.begin(), xs.end());
  return finish(n, parents, [outer, total, widths](Tensor::Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Tensor::Node& p = *self.parents[k];
      std::size_t w = static_cast<std::size_t>(widths[k]);
      if (wants_grad(p)) {
        p.ensure_grad();
        for (std::size_t r = 0; r < outer; ++r)
          for (std::size_t c = 0; c < w; ++c)
            accumulate(p, r * w + c,
                       self.grad[r * static_cast<std::size_t>(total) + off + c]);
      }
      off += w;
    }
  });
}

Tensor transpose_last(const Tensor& x) {
  if (x.shape().size() < 2) throw UsageError("transpose_last: rank < 2");
  std::vector<int> shape = x.shape();
  int m = shape[shape.size() - 2];
  int k = shape[shape.size() - 1];
  std::swap(shape[shape.size() - 2], shape[shape.size() - 1]);
  std::size_t mat = static_cast<std::size_t>(m) * static_cast<std::size_t>(k);
  std::size_t batches = x.size() / mat;
  auto n = make_node(shape);
  for (std::size_t b = 0; b < batches; ++b)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j)
        n->values[b * mat + static_cast<std::size_t>(j) * m + i] =
            x.values()[b * mat + static_cast<std::size_t>(i) * k + j];
  return finish(n, {x}, [batches, mat, m, k](Tensor::Node& self) {
    Tensor::Node& p = *self.parents[0];
    if (!wants_grad(p)) return;
    p.ensure_grad();
    for (std::size_t b = 0; b < batches; ++b)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j)
          accumulate(p, b * mat + static_cast<std::size_t>(i) * k + j,
                     self.grad[b * mat + static_cast<std::size_t>(j) * m + i]);
  });
}

// ------------------------------------------------------------ nonlinearities

Tensor relu(const Tensor& x) {
  auto n = make_node(x.shape());
  for (std::size_t i = 0; i < n->size(); ++i)
    n->values[i] = x.values()[i] > 0.0 ? x.values()[i] : 0.0;
  return finish(n, {x}, [](Tensor::Node& self) {
    Tensor::Node& p = *self.parents[0];
    if (!wants_grad(p)) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      if (p.values[i] > 0.0) accumulate(p, i, self.grad[i]);
  });
}

static double sigmoid_s(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  double e = std::exp(v);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) {
  auto n = make_node(x.shape());
  for (std::size_t i = 0; i < n->size(); ++i)
    n->values[i] = sigmoid_s(x.values()[i]);
  return finish(n, {x}, [](Tensor::Node& self) {
    Tensor::Node& p = *self.parents[0];
    if (!wants_grad(p)) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      double y = self.values[i];
      accumulate(p, i, self.grad[i] * y * (1.0 - y));
    }
  });
}

Tensor softplus(const Tensor& x) {
  auto n = make_node(x.shape());
  for (std::size_t i = 0; i < n->size(); ++i) {
    double v = x.values()[i];
    n->values[i] = std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v)));
  }
  return finish(n, {x}, [](Tensor::Node& self) {
    Tensor::Node& p = *self.parents[0];
    if (!wants_grad(p)) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      accumulate(p, i, self.grad[i] * sigmoid_s(p.values[i]));
  });
}

static void softmax_backward_rows(Tensor::Node& self, std::size_t rows,
                                  std::size_t cols) {
  Tensor::Node& p = *self.parents[0];
  if (!wants_grad(p)) return;
  p.ensure_grad();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* y = self.values.data() + r * cols;
    const double* g = self.grad.data() + r * cols;
    double dot = 0.0;
    for (std::size_t c = 0; c < cols; ++c) dot += y[c] * g[c];
    for (std::size_t c = 0; c < cols; ++c)
      accumulate(p, r * cols + c, y[c] * (g[c] - dot));
  }
}

Tensor softmax_last(const Tensor& x) {
  std::size_t cols = static_cast<std::size_t>(x.shape().back());
  std::size_t rows = x.size() / cols;
  auto n = make_node(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.values().data() + r * cols;
    double* out = n->values.data() + r * cols;
    double mx = in[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] = std::exp(in[c] - mx);
      z += out[c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[c] /= z;
  }
  return finish(n, {x}, [rows, cols](Tensor::Node& self) {
    softmax_backward_rows(self, rows, cols);
  });
}

Tensor softmax_last_masked(const Tensor& x,
                           const std::vector<std::uint8_t>& col_mask) {
  if (x.shape().size() != 3) {
    throw UsageError("softmax_last_masked: expected rank-3 tensor [G,R,C]");
  }
  std::size_t groups = static_cast<std::size_t>(x.shape()[0]);
  std::size_t rows = static_cast<std::size_t>(x.shape()[1]);
  std::size_t cols = static_cast<std::size_t>(x.shape()[2]);
  if (col_mask.size() != groups * cols) {
    throw UsageError("softmax_last_masked: mask size mismatch");
  }
  auto n = make_node(x.shape());
  for (std::size_t g = 0; g < groups; ++g) {
    const std::uint8_t* m = col_mask.data() + g * cols;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* in = x.values().data() + (g * rows + r) * cols;
      double* out = n->values.data() + (g * rows + r) * cols;
      double mx = -1e300;
      for (std::size_t c = 0; c < cols; ++c)
        if (!m[c]) mx = std::max(mx, in[c]);
      double z = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        out[c] = m[c] ? 0.0 : std::exp(in[c] - mx);
        z += out[c];
      }
      if (z > 0.0)
        for (std::size_t c = 0; c < cols; ++c) out[c] /= z;
    }
  }
  // Masked columns hold exact zeros, so the plain softmax backward formula
  // already sends them zero gradient.
  return finish(n, {x}, [groups, rows, cols](Tensor::Node& self) {
    softmax_backward_rows(self, groups * rows, cols);
  });
}

Tensor layer_norm_last(const Tensor& x, const Tensor& gamma,
                       const Tensor& beta, double eps) {
  std::size_t cols = static_cast<std::size_t>(x.shape().back());
  if (gamma.shape() != std::vector<int>{static_cast<int>(cols)} ||
      beta.shape() != std::vector<int>{static_cast<int>(cols)}) {
    throw UsageError("layer_norm_last: gamma/beta must have shape [" +
                     std::to_string(cols) + "]");
  }
  std::size_t rows = x.size() / cols;
  auto n = make_node(x.shape());
  std::vector<double> inv_sigma(rows);
  std::vector<double> xhat(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.values().data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += in[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      double d = in[c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      double xh = (in[c] - mean) * is;
      xhat[r * cols + c] = xh;
      n->values[r * cols + c] = xh * gamma.values()[c] + beta.values()[c];
    }
  }
  return finish(
      n, {x, gamma, beta},
      [rows, cols, inv_sigma = std::move(inv_sigma),
       xhat = std::move(xhat)](Tensor::Node& self) {
        Tensor::Node& px = *self.parents[0];
        Tensor::Node& pg = *self.parents[1];
        Tensor::Node& pb = *self.parents[2];
        if (wants_grad(pg)) pg.ensure_grad();
        if (wants_grad(pb)) pb.ensure_grad();
        if (wants_grad(px)) px.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = self.grad.data() + r * cols;
          const double* xh = xhat.data() + r * cols;
          double mean_gy = 0.0, mean_gyx = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            double gy = g[c] * pg.values[c];
            mean_gy += gy;
            mean_gyx += gy * xh[c];
          }
          mean_gy /= static_cast<double>(cols);
          mean_gyx /= static_cast<double>(cols);
          for (std::size_t c = 0; c < cols; ++c) {
            if (wants_grad(pg)) accumulate(pg, c, g[c] * xh[c]);
            if (wants_grad(pb)) accumulate(pb, c, g[c]);
            if (wants_grad(px)) {
              double gy = g[c] * pg.values[c];
              accumulate(px, r * cols + c,
                         (gy - mean_gy - xh[c] * mean_gyx) * inv_sigma[r]);
            }
          }
        }
      });
}

Tensor row_l2_normalize(const Tensor& x, double eps) {
  std::size_t cols = static_cast<std::size_t>(x.shape().back());
  std::size_t rows = x.size() / cols;
  auto n = make_node(x.shape());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.values().data() + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += in[c] * in[c];
    double norm = std::max(std::sqrt(s), eps);
    norms[r] = norm;
    for (std::size_t c = 0; c < cols; ++c)
      n->values[r * cols + c] = in[c] / norm;
  }
  return finish(n, {x},
                [rows, cols, norms = std::move(norms)](Tensor::Node& self) {
                  Tensor::Node& p = *self.parents[0];
                  if (!wants_grad(p)) return;
                  p.ensure_grad();
                  for (std::size_t r = 0; r < rows; ++r) {
                    const double* g = self.grad.data() + r * cols;
                    const double* y = self.values.data() + r * cols;
                    double dot = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) dot += g[c] * y[c];
                    for (std::size_t c = 0; c < cols; ++c)
                      accumulate(p, r * cols + c,
                                 (g[c] - y[c] * dot) / norms[r]);
                  }
                });
}

// --------------------------------------------------------------- contractions

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[1] != b.shape()[0]) {
    throw UsageError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  int m = a.shape()[0], k = a.shape()[1], p = b.shape()[1];
  auto n = make_node({m, p});
  ConstMatMap A(a.values().data(), m, k);
  ConstMatMap B(b.values().data(), k, p);
  MatMap Y(n->values.data(), m, p);
  Y.noalias() = A * B;
  return finish(n, {a, b}, [m, k, p](Tensor::Node& self) {
    Tensor::Node& pa = *self.parents[0];
    Tensor::Node& pb = *self.parents[1];
    ConstMatMap G(self.grad.data(), m, p);
    if (wants_grad(pa)) {
      pa.ensure_grad();
      ConstMatMap B(pb.values.data(), k, p);
      MatMap dA(pa.grad.data(), m, k);
      dA.noalias() += G * B.transpose();
    }
    if (wants_grad(pb)) {
      pb.ensure_grad();
      ConstMatMap A(pa.values.data(), m, k);
      MatMap dB(pb.grad.data(), k, p);
      dB.noalias() += A.transpose() * G;
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 3 || b.shape().size() != 3 ||
      a.shape()[0] != b.shape()[0] || a.shape()[2] != b.shape()[1]) {
    throw UsageError("bmm: incompatible shapes " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  int bs = a.shape()[0], m = a.shape()[1], k = a.shape()[2], p = b.shape()[2];
  auto n = make_node({bs, m, p});
  for (int i = 0; i < bs; ++i) {
    ConstMatMap A(a.values().data() + static_cast<std::size_t>(i) * m * k, m, k);
    ConstMatMap B(b.values().data() + static_cast<std::size_t>(i) * k * p, k, p);
    MatMap Y(n->values.data() + static_cast<std::size_t>(i) * m * p, m, p);
    Y.noalias() = A * B;
  }
  return finish(n, {a, b}, [bs, m, k, p](Tensor::Node& self) {
    Tensor::Node& pa = *self.parents[0];
    Tensor::Node& pb = *self.parents[1];
    if (wants_grad(pa)) pa.ensure_grad();
    if (wants_grad(pb)) pb.ensure_grad();
    for (int i = 0; i < bs; ++i) {
      ConstMatMap G(self.grad.data() + static_cast<std::size_t>(i) * m * p, m, p);
      if (wants_grad(pa)) {
        ConstMatMap B(pb.values.data() + static_cast<std::size_t>(i) * k * p, k, p);
        MatMap dA(pa.grad.data() + static_cast<std::size_t>(i) * m * k, m, k);
        dA.noalias() += G * B.transpose();
      }
      if (wants_grad(pb)) {
        ConstMatMap A(pa.values.data() + static_cast<std::size_t>(i) * m * k, m, k);
        MatMap dB(pb.grad.data() + static_cast<std::size_t>(i) * k * p, k, p);
        dB.noalias() += A.transpose() * G;
      }
    }
  });
}

// ---------------------------------------------------------- masking / pooling

Tensor mask_rows_zero(const Tensor& x,
                      const std::vector<std::uint8_t>& row_mask) {
  if (x.shape().size() != 3) {
    throw UsageError("mask_rows_zero: expected rank-3 tensor [B,N,D]");
  }
  std::size_t rows = static_cast<std::size_t>(x.shape()[0]) *
                     static_cast<std::size_t>(x.shape()[1]);
  std::size_t cols = static_cast<std::size_t>(x.shape()[2]);
  if (row_mask.size() != rows) {
    throw UsageError("mask_rows_zero: mask size mismatch");
  }
  auto n = make_node(x.shape());
  for (std::size_t r = 0; r < rows; ++r)
    if (!row_mask[r])
      for (std::size_t c = 0; c < cols; ++c)
        n->values[r * cols + c] = x.values()[r * cols + c];
  return finish(n, {x}, [rows, cols, row_mask](Tensor::Node& self) {
    Tensor::Node& p = *self.parents[0];
    if (!wants_grad(p)) return;
    p.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      if (!row_mask[r])
        for (std::size_t c = 0; c < cols; ++c)
          accumulate(p, r * cols + c, self.grad[r * cols + c]);
  });
}

Tensor masked_mean_rows(const Tensor& x,
                        const std::vector<std::uint8_t>& row_mask) {
  if (x.shape().size() != 3) {
    throw UsageError("masked_mean_rows: expected rank-3 tensor [B,N,D]");
  }
  std::size_t bs = static_cast<std::size_t>(x.shape()[0]);
  std::size_t rows = static_cast<std::size_t>(x.shape()[1]);
  std::size_t cols = static_cast<std::size_t>(x.shape()[2]);
  if (row_mask.size() != bs * rows) {
    throw UsageError("masked_mean_rows: mask size mismatch");
  }
  std::vector<double> counts(bs, 0.0);
  for (std::size_t b = 0; b < bs; ++b)
    for (std::size_t r = 0; r < rows; ++r)
      if (!row_mask[b * rows + r]) counts[b] += 1.0;
  for (std::size_t b = 0; b < bs; ++b)
    if (counts[b] == 0.0)
      throw UsageError("masked_mean_rows: batch item with all rows masked");
  auto n = make_node({static_cast<int>(bs), static_cast<int>(cols)});
  for (std::size_t b = 0; b < bs; ++b)
    for (std::size_t r = 0; r < rows; ++r)
      if (!row_mask[b * rows + r])
        for (std::size_t c = 0; c < cols; ++c)
          n->values[b * cols + c] +=
              x.values()[(b * rows + r) * cols + c] / counts[b];
  return finish(n, {x},
                [bs, rows, cols, row_mask,
                 counts = std::move(counts)](Tensor::Node& self) {
                  Tensor::Node& p = *self.parents[0];
                  if (!wants_grad(p)) return;
                  p.ensure_grad();
                  for (std::size_t b = 0; b < bs; ++b)
                    for (std::size_t r = 0; r < rows; ++r)
                      if (!row_mask[b * rows + r])
                        for (std::size_t c = 0; c < cols; ++c)
                          accumulate(p, (b * rows + r) * cols + c,
                                     self.grad[b * cols + c] / counts[b]);
                });
}

// --------------------------------------------------------- reductions, losses

Tensor overlap_area(const Tensor& geometry,
                    const std::vector<std::uint8_t>& row_mask) {
  if (geometry.shape().size() != 3 || geometry.shape()[2] != 4) {
    throw UsageError("overlap_area: expected geometry tensor [B,N,4]");
  }
  std::size_t bs = static_cast<std::size_t>(geometry.shape()[0]);
  std::size_t rows = static_cast<std::size_t>(geometry.shape()[1]);
  if (row_mask.size() != bs * rows) {
    throw UsageError("overlap_area: mask size mismatch");
  }
  const std::vector<double>& v = geometry.values();
  auto n = make_node({1});
  double total = 0.0;
  for (std::size_t b = 0; b < bs; ++b) {
    for (std::size_t i = 0; i < rows; ++i) {
      if (row_mask[b * rows + i]) continue;
      for (std::size_t j = i + 1; j < rows; ++j) {
        if (row_mask[b * rows + j]) continue;
        const double* gi = v.data() + (b * rows + i) * 4;
        const double* gj = v.data() + (b * rows + j) * 4;
        double ow = std::min(gi[0] + gi[2], gj[0] + gj[2]) -
                    std::max(gi[0], gj[0]);
        double oh = std::min(gi[1] + gi[3], gj[1] + gj[3]) -
                    std::max(gi[1], gj[1]);
        if (ow > 0.0 && oh > 0.0) total += ow * oh;
      }
    }
  }
  n->values[0] = total / static_cast<double>(bs);
  return finish(n, {geometry}, [bs, rows, row_mask](Tensor::Node& self) {
    Tensor::Node& p = *self.parents[0];
    if (!wants_grad(p)) return;
    p.ensure_grad();
    double g0 = self.grad[0] / static_cast<double>(bs);
    // Subgradients follow the forward comparisons: ties take the first
    // box, matching min_elem's "<=" rule.
    for (std::size_t b = 0; b < bs; ++b) {
      for (std::size_t i = 0; i < rows; ++i) {
        if (row_mask[b * rows + i]) continue;
        for (std::size_t j = i + 1; j < rows; ++j) {
          if (row_mask[b * rows + j]) continue;
          std::size_t oi = (b * rows + i) * 4;
          std::size_t oj = (b * rows + j) * 4;
          const double* gi = p.values.data() + oi;
          const double* gj = p.values.data() + oj;
          double ow = std::min(gi[0] + gi[2], gj[0] + gj[2]) -
                      std::max(gi[0], gj[0]);
          double oh = std::min(gi[1] + gi[3], gj[1] + gj[3]) -
                      std::max(gi[1], gj[1]);
          if (ow <= 0.0 || oh <= 0.0) continue;
          // d(ow)/d inputs
          bool hi_i_x = gi[0] + gi[2] <= gj[0] + gj[2];
          bool lo_i_x = gi[0] >= gj[0];
          bool hi_i_y = gi[1] + gi[3] <= gj[1] + gj[3];
          bool lo_i_y = gi[1] >= gj[1];
          double dw = g0 * oh;  // d(area)/d(ow)
          double dh = g0 * ow;  // d(area)/d(oh)
          if (hi_i_x) {
            accumulate(p, oi + 0, dw);
            accumulate(p, oi + 2, dw);
          } else {
            accumulate(p, oj + 0, dw);
            accumulate(p, oj + 2, dw);
          }
          accumulate(p, lo_i_x ? oi + 0 : oj + 0, -dw);
          if (hi_i_y) {
            accumulate(p, oi + 1, dh);
            accumulate(p, oi + 3, dh);
          } else {
            accumulate(p, oj + 1, dh);
            accumulate(p, oj + 3, dh);
          }
          accumulate(p, lo_i_y ? oi + 1 : oj + 1, -dh);
        }
      }
    }
  });
}

Tensor sum_all(const Tensor& x) {
  auto n = make_node({1});
  double s = 0.0;
  for (double v : x.values()) s += v;
  n->values[0] = s;
  return finish(n, {x}, [](Tensor::Node& self) {
    Tensor::Node& p = *self.parents[0];
    if (!wants_grad(p)) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < p.size(); ++i)
      accumulate(p, i, self.grad[0]);
  });
}

Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

Tensor bce_with_logits(const Tensor& logits,
                       const std::vector<double>& targets) {
  if (targets.size() != logits.size()) {
    throw UsageError("bce_with_logits: target count mismatch");
  }
  auto n = make_node({1});
  double inv = 1.0 / static_cast<double>(logits.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double z = logits.values()[i];
    loss += std::max(z, 0.0) - z * targets[i] +
            std::log1p(std::exp(-std::fabs(z)));
  }
  n->values[0] = loss * inv;
  return finish(n, {logits}, [targets, inv](Tensor::Node& self) {
    Tensor::Node& p = *self.parents[0];
    if (!wants_grad(p)) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < p.size(); ++i)
      accumulate(p, i,
                 self.grad[0] * inv * (sigmoid_s(p.values[i]) - targets[i]));
  });
}

Tensor supcon_loss(const Tensor& z, const std::vector<int>& labels,
                   double tau) {
  if (z.shape().size() != 2) {
    throw UsageError("supcon_loss: embeddings must be [B,D]");
  }
  std::size_t bs = static_cast<std::size_t>(z.shape()[0]);
  std::size_t dim = static_cast<std::size_t>(z.shape()[1]);
  if (labels.size() != bs) throw UsageError("supcon_loss: label count mismatch");
  if (bs < 2) throw UsageError("supcon_loss: batch too small");
  for (std::size_t i = 0; i < bs; ++i) {
    int same = 0;
    for (std::size_t j = 0; j < bs; ++j)
      if (labels[j] == labels[i]) ++same;
    if (same < 2) {
      throw UsageError("supcon_loss: label " + std::to_string(labels[i]) +
                       " appears only once in the batch");
    }
  }
  // S = Z Z^T / tau; per anchor i: softmax over a != i.
  std::vector<double> S(bs * bs, 0.0);
  {
    ConstMatMap Z(z.values().data(), static_cast<int>(bs),
                  static_cast<int>(dim));
    MatMap Sm(S.data(), static_cast<int>(bs), static_cast<int>(bs));
    Sm.noalias() = Z * Z.transpose() / tau;
  }
  std::vector<double> prob(bs * bs, 0.0);  // p_ia over a != i
  double loss = 0.0;
  for (std::size_t i = 0; i < bs; ++i) {
    double mx = -1e300;
    for (std::size_t a = 0; a < bs; ++a)
      if (a != i) mx = std::max(mx, S[i * bs + a]);
    double zsum = 0.0;
    for (std::size_t a = 0; a < bs; ++a)
      if (a != i) zsum += std::exp(S[i * bs + a] - mx);
    double logz = mx + std::log(zsum);
    for (std::size_t a = 0; a < bs; ++a)
      if (a != i) prob[i * bs + a] = std::exp(S[i * bs + a] - logz);
    std::size_t npos = 0;
    double pos_sum = 0.0;
    for (std::size_t p = 0; p < bs; ++p) {
      if (p != i && labels[p] == labels[i]) {
        ++npos;
        pos_sum += S[i * bs + p] - logz;
      }
    }
    loss -= pos_sum / static_cast<double>(npos);
  }
  auto n = make_node({1});
  n->values[0] = loss / static_cast<double>(bs);
  return finish(
      n, {z},
      [bs, dim, tau, labels, prob = std::move(prob)](Tensor::Node& self) {
        Tensor::Node& p = *self.parents[0];
        if (!wants_grad(p)) return;
        p.ensure_grad();
        // dL/dS_ia = (1/B) (p_ia - [a in P(i)]/|P(i)|), a != i.
        std::vector<double> G(bs * bs, 0.0);
        for (std::size_t i = 0; i < bs; ++i) {
          std::size_t npos = 0;
          for (std::size_t a = 0; a < bs; ++a)
            if (a != i && labels[a] == labels[i]) ++npos;
          for (std::size_t a = 0; a < bs; ++a) {
            if (a == i) continue;
            double g = prob[i * bs + a];
            if (labels[a] == labels[i]) g -= 1.0 / static_cast<double>(npos);
            G[i * bs + a] = g / static_cast<double>(bs);
          }
        }
        ConstMatMap Gm(G.data(), static_cast<int>(bs), static_cast<int>(bs));
        ConstMatMap Z(p.values.data(), static_cast<int>(bs),
                      static_cast<int>(dim));
        MatMap dZ(p.grad.data(), static_cast<int>(bs), static_cast<int>(dim));
        dZ.noalias() +=
            (self.grad[0] / tau) * ((Gm + Gm.transpose()) * Z);
      });
}

// ---------------------------------------------------------------- convolution

Tensor conv2d_s2(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.shape().size() != 4 || w.shape().size() != 4 ||
      w.shape()[2] != 3 || w.shape()[3] != 3 || x.shape()[1] != w.shape()[1] ||
      b.shape() != std::vector<int>{w.shape()[0]}) {
    throw UsageError("conv2d_s2: incompatible shapes " + shape_str(x.shape()) +
                     ", " + shape_str(w.shape()));
  }
  int bs = x.shape()[0], ci = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
  int co = w.shape()[0];
  int oh = (h + 1) / 2, ow = (wd + 1) / 2;
  int cols_k = ci * 9, cols_n = oh * ow;

  auto im2col = [=](const double* img, std::vector<double>& cols) {
    // cols is [ci*9, oh*ow], row-major
    for (int c = 0; c < ci; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          double* row = cols.data() +
                        static_cast<std::size_t>((c * 9 + ky * 3 + kx)) * cols_n;
          for (int oy = 0; oy < oh; ++oy) {
            int iy = oy * 2 + ky - 1;
            for (int ox = 0; ox < ow; ++ox) {
              int ix = ox * 2 + kx - 1;
              row[oy * ow + ox] =
                  (iy >= 0 && iy < h && ix >= 0 && ix < wd)
                      ? img[(static_cast<std::size_t>(c) * h + iy) * wd + ix]
                      : 0.0;
            }
          }
        }
      }
    }
  };

  auto n = make_node({bs, co, oh, ow});
  std::vector<double> cols(static_cast<std::size_t>(cols_k) * cols_n);
  ConstMatMap W(w.values().data(), co, cols_k);
  for (int i = 0; i < bs; ++i) {
    im2col(x.values().data() + static_cast<std::size_t>(i) * ci * h * wd, cols);
    ConstMatMap C(cols.data(), cols_k, cols_n);
    MatMap Y(n->values.data() + static_cast<std::size_t>(i) * co * cols_n, co,
             cols_n);
    Y.noalias() = W * C;
    for (int o = 0; o < co; ++o)
      Y.row(o).array() += b.values()[static_cast<std::size_t>(o)];
  }
  return finish(n, {x, w, b}, [=](Tensor::Node& self) {
    Tensor::Node& px = *self.parents[0];
    Tensor::Node& pw = *self.parents[1];
    Tensor::Node& pb = *self.parents[2];
    if (wants_grad(px)) px.ensure_grad();
    if (wants_grad(pw)) pw.ensure_grad();
    if (wants_grad(pb)) pb.ensure_grad();
    std::vector<double> cols(static_cast<std::size_t>(cols_k) * cols_n);
    std::vector<double> dcols(static_cast<std::size_t>(cols_k) * cols_n);
    ConstMatMap W(pw.values.data(), co, cols_k);
    for (int i = 0; i < bs; ++i) {
      const double* img =
          px.values.data() + static_cast<std::size_t>(i) * ci * h * wd;
      ConstMatMap G(self.grad.data() + static_cast<std::size_t>(i) * co * cols_n,
                    co, cols_n);
      if (wants_grad(pb)) {
        for (int o = 0; o < co; ++o)
          pb.grad[static_cast<std::size_t>(o)] += G.row(o).sum();
      }
      if (wants_grad(pw) || wants_grad(px)) im2col(img, cols);
      if (wants_grad(pw)) {
        ConstMatMap C(cols.data(), cols_k, cols_n);
        MatMap dW(pw.grad.data(), co, cols_k);
        dW.noalias() += G * C.transpose();
      }
      if (wants_grad(px)) {
        MatMap dC(dcols.data(), cols_k, cols_n);
        dC.noalias() = W.transpose() * G;
        double* dimg =
            px.grad.data() + static_cast<std::size_t>(i) * ci * h * wd;
        for (int c = 0; c < ci; ++c) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const double* row =
                  dcols.data() +
                  static_cast<std::size_t>((c * 9 + ky * 3 + kx)) * cols_n;
              for (int oy = 0; oy < oh; ++oy) {
                int iy = oy * 2 + ky - 1;
                if (iy < 0 || iy >= h) continue;
                for (int ox = 0; ox < ow; ++ox) {
                  int ix = ox * 2 + kx - 1;
                  if (ix < 0 || ix >= wd) continue;
                  dimg[(static_cast<std::size_t>(c) * h + iy) * wd + ix] +=
                      row[oy * ow + ox];
                }
              }
            }
          }
        }
      }
    }
  });
}

// ------------------------------------------------------------------ gradcheck

double grad_check(const std::function<Tensor(const Tensor&)>& fn,
                  const Tensor& point, double eps) {
  Tensor p = Tensor::from(point.shape(), point.values(), true);
  Tensor out = fn(p);
  if (out.size() != 1) {
    throw UsageError("grad_check: function output must be scalar");
  }
  out.backward();
  std::vector<double> analytic = p.has_grad()
                                     ? p.grad()
                                     : std::vector<double>(p.size(), 0.0);
  double max_rel = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    Tensor plus = Tensor::from(point.shape(), point.values(), false);
    plus.values()[i] += eps;
    Tensor minus = Tensor::from(point.shape(), point.values(), false);
    minus.values()[i] -= eps;
    double fd = (fn(plus).item() - fn(minus).item()) / (2.0 * eps);
    double denom = std::max({1e-6, std::fabs(analytic[i]) + std::fabs(fd)});
    max_rel = std::max(max_rel, std::fabs(analytic[i] - fd) / denom);
  }
  return max_rel;
}

}  // namespace dlgdd::diff
