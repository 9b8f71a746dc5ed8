#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dlgdd::diff {

// Dense double tensor with reverse-mode gradient tracking. Tensor is a
// cheap handle onto a shared node; ops record the graph as they run and
// backward() replays it in reverse topological order. One graph belongs
// to one thread; distinct graphs may run concurrently.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value,
                     bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  std::size_t size() const;
  const std::vector<double>& values() const;
  std::vector<double>& values();
  bool requires_grad() const;
  bool has_grad() const;
  const std::vector<double>& grad() const;
  std::vector<double>& grad();
  void zero_grad();
  void clear_grad();

  double item() const;  // scalar tensors only

  // Scalar tensors only: seeds d(self)/d(self)=1 and accumulates into
  // every reachable tensor with requires_grad.
  void backward() const;

  struct Node;
  Node* node() const { return node_.get(); }
  std::shared_ptr<Node> shared_node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

struct Tensor::Node {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::size_t size() const;
  void ensure_grad();
};

void assert_finite(const Tensor& t, const std::string& what);

// ---- elementwise / shape ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_bias(const Tensor& x, const Tensor& bias);  // bias over last dim
Tensor min_elem(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor slice_last(const Tensor& x, int from, int to);
Tensor concat_last(const std::vector<Tensor>& xs);
Tensor transpose_last(const Tensor& x);  // swap final two dims

// ---- nonlinearities ----
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor softmax_last(const Tensor& x);
// Softmax over the last dim where masked columns (mask[j] true = padded)
// get exactly zero weight and no gradient. mask has length = last dim, or
// per-row layout [rows] x [cols] given as row-major bool matrix.
Tensor softmax_last_masked(const Tensor& x, const std::vector<std::uint8_t>& col_mask);
Tensor layer_norm_last(const Tensor& x, const Tensor& gamma,
                       const Tensor& beta, double eps = 1e-5);
Tensor row_l2_normalize(const Tensor& x, double eps = 1e-12);

// ---- contractions ----
Tensor matmul(const Tensor& a, const Tensor& b);      // [M,K]x[K,N]
Tensor bmm(const Tensor& a, const Tensor& b);         // [B,M,K]x[B,K,N]

// ---- masking / pooling ----
// Zero out rows of x[B,N,D] where row_mask[b*N+n] is true; no gradient
// flows through zeroed rows.
Tensor mask_rows_zero(const Tensor& x, const std::vector<std::uint8_t>& row_mask);
// Mean over unmasked rows: x[B,N,D], row_mask[B*N] -> [B,D].
Tensor masked_mean_rows(const Tensor& x, const std::vector<std::uint8_t>& row_mask);

// ---- reductions / losses ----
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
// Mean of elementwise BCE between logits and constant targets in [0,1].
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets);
// Supervised contrastive loss over unit-norm embeddings z[B,D] with integer
// labels; every label must appear at least twice. Mean over anchors of
// -1/|P(i)| sum_{p in P(i)} log softmax_{a != i}(z_i . z_a / tau)_p.
Tensor supcon_loss(const Tensor& z, const std::vector<int>& labels, double tau);

// Mean over batch items of the summed pairwise intersection area of
// unmasked boxes. geometry[B,N,4] rows are (x,y,w,h); row_mask[B*N].
Tensor overlap_area(const Tensor& geometry,
                    const std::vector<std::uint8_t>& row_mask);

// ---- convolution (3x3, stride 2, pad 1) ----
// x[B,C,H,W], w[O,C,3,3], b[O] -> [B,O,(H+1)/2,(W+1)/2]
Tensor conv2d_s2(const Tensor& x, const Tensor& w, const Tensor& b);

// Componentwise central-difference check of a scalar-valued function.
// Returns the maximum relative error max_i |g_i - fd_i| / max(1, |g_i|, |fd_i|).
double grad_check(const std::function<Tensor(const Tensor&)>& fn,
                  const Tensor& point, double eps = 1e-4);

}  // namespace dlgdd::diff
