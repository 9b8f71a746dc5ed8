#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dlgdd/tensor.hpp"

namespace dlgdd::diff {

// Named parameters plus per-parameter adaptive-moment state.
class ParameterStore {
 public:
  Tensor& create(const std::string& name, std::vector<int> shape);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;

  void init_uniform(std::mt19937_64& rng, double scale);
  void zero_grads();
  // Scale all gradients so the global L2 norm is at most max_norm.
  double clip_grad_norm(double max_norm);

  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  friend void adam_step(ParameterStore&, double, double, double, double);
  struct Slot {
    Tensor param;
    std::vector<double> m;
    std::vector<double> v;
  };
  std::map<std::string, Slot> slots_;
  std::int64_t step_ = 0;
};

// Bias-corrected adaptive-moment update; clears gradients afterwards.
// Every parameter must carry a gradient.
void adam_step(ParameterStore& store, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// y = x W + b for x[B,I]; higher-rank x is flattened over leading dims.
Tensor affine(const Tensor& x, const Tensor& weights, const Tensor& bias);

struct AttentionParams {
  Tensor wq, wk, wv, wo;      // [D,D]
  Tensor bq, bk, bv, bo;      // [D]
  Tensor ln1_g, ln1_b;        // [D]
  Tensor ln2_g, ln2_b;        // [D]
  Tensor ff_w1, ff_b1;        // [D,F], [F]
  Tensor ff_w2, ff_b2;        // [F,D], [D]
};

// Registers one pre-norm transformer layer's parameters under prefix.
AttentionParams make_attention_params(ParameterStore& store,
                                      const std::string& prefix, int dim,
                                      int ff_dim, std::mt19937_64& rng);
AttentionParams attention_params_from_store(ParameterStore& store,
                                            const std::string& prefix);

// Pre-norm block: x + MHA(LN(x)), then h + FF(LN(h)). mask[b*N+n] true
// marks padded slots; masked slots get zero attention weight, produce
// zero output rows, and exchange no gradient.
Tensor self_attention(const Tensor& x, const AttentionParams& params,
                      int heads,
                      const std::vector<std::uint8_t>& mask = {});

}  // namespace dlgdd::diff
