#include "dlgdd/nn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dlgdd/common.hpp"
#include "json.hpp"

namespace dlgdd::diff {

Tensor& ParameterStore::create(const std::string& name,
                               std::vector<int> shape) {
  if (slots_.count(name)) {
    throw UsageError("parameter '" + name + "' already exists");
  }
  Slot slot;
  slot.param = Tensor::zeros(std::move(shape), true);
  slot.m.assign(slot.param.size(), 0.0);
  slot.v.assign(slot.param.size(), 0.0);
  auto [it, ok] = slots_.emplace(name, std::move(slot));
  return it->second.param;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw UsageError("unknown parameter '" + name + "'");
  return it->second.param;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw UsageError("unknown parameter '" + name + "'");
  return it->second.param;
}

bool ParameterStore::contains(const std::string& name) const {
  return slots_.count(name) != 0;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, slot] : slots_) out.push_back(name);
  return out;
}

void ParameterStore::init_uniform(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto& [name, slot] : slots_)
    for (double& v : slot.param.values()) v = dist(rng);
}

void ParameterStore::zero_grads() {
  for (auto& [name, slot] : slots_) slot.param.zero_grad();
}

double ParameterStore::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (auto& [name, slot] : slots_) {
    if (!slot.param.has_grad()) continue;
    for (double g : slot.param.grad()) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double s = max_norm / norm;
    for (auto& [name, slot] : slots_) {
      if (!slot.param.has_grad()) continue;
      for (double& g : slot.param.grad()) g *= s;
    }
  }
  return norm;
}

void adam_step(ParameterStore& store, double lr, double beta1, double beta2,
               double eps) {
  for (auto& [name, slot] : store.slots_) {
    if (!slot.param.has_grad()) {
      throw UsageError("adam_step: parameter '" + name + "' has no gradient");
    }
  }
  store.step_ += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(store.step_));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(store.step_));
  for (auto& [name, slot] : store.slots_) {
    std::vector<double>& g = slot.param.grad();
    std::vector<double>& p = slot.param.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      slot.m[i] = beta1 * slot.m[i] + (1.0 - beta1) * g[i];
      slot.v[i] = beta2 * slot.v[i] + (1.0 - beta2) * g[i] * g[i];
      double mhat = slot.m[i] / bc1;
      double vhat = slot.v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    slot.param.clear_grad();
  }
}

void ParameterStore::save(const std::string& path) const {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, slot] : slots_) {
    params[name] = {{"shape", slot.param.shape()},
                    {"values", slot.param.values()}};
  }
  nlohmann::json doc{{"format_version", 1}, {"parameters", params}};
  std::ofstream f(path);
  if (!f) throw DataError("cannot open checkpoint '" + path + "' for writing");
  f << doc.dump() << "\n";
  if (!f) throw DataError("checkpoint write failed for '" + path + "'");
}

void ParameterStore::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open checkpoint '" + path + "'");
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint '" + path + "': " + e.what());
  }
  if (!doc.contains("format_version") ||
      doc["format_version"].get<int>() != 1) {
    throw DataError("checkpoint '" + path + "': unsupported format version");
  }
  // When the store already declares parameters, the checkpoint must
  // match them exactly; otherwise adopt the checkpoint's layout.
  std::map<std::string, std::vector<int>> declared;
  for (const auto& [name, slot] : slots_) declared[name] = slot.param.shape();
  slots_.clear();
  step_ = 0;
  for (const auto& [name, entry] : doc["parameters"].items()) {
    std::vector<int> shape = entry["shape"].get<std::vector<int>>();
    std::vector<double> values = entry["values"].get<std::vector<double>>();
    if (!declared.empty()) {
      auto it = declared.find(name);
      if (it == declared.end()) {
        throw DataError("checkpoint '" + path + "': unexpected parameter '" +
                        name + "'");
      }
      if (it->second != shape) {
        throw DataError("checkpoint '" + path + "': shape mismatch for '" +
                        name + "'");
      }
      declared.erase(it);
    }
    Slot slot;
    slot.param = Tensor::from(shape, std::move(values), true);
    slot.m.assign(slot.param.size(), 0.0);
    slot.v.assign(slot.param.size(), 0.0);
    slots_.emplace(name, std::move(slot));
  }
  if (!declared.empty()) {
    throw DataError("checkpoint '" + path + "': missing parameter '" +
                    declared.begin()->first + "'");
  }
}

Tensor affine(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  if (weights.shape().size() != 2) {
    throw UsageError("affine: weights must be rank 2");
  }
  int in_dim = weights.shape()[0];
  if (x.shape().back() != in_dim) {
    throw UsageError("affine: input last dim " +
                     std::to_string(x.shape().back()) +
                     " != weight rows " + std::to_string(in_dim));
  }
  if (x.shape().size() == 2) {
    return add_bias(matmul(x, weights), bias);
  }
  int rows = static_cast<int>(x.size()) / in_dim;
  Tensor flat = reshape(x, {rows, in_dim});
  Tensor y = add_bias(matmul(flat, weights), bias);
  std::vector<int> out_shape = x.shape();
  out_shape.back() = weights.shape()[1];
  return reshape(y, out_shape);
}

namespace {

Tensor& create_init(ParameterStore& store, const std::string& name,
                    std::vector<int> shape, std::mt19937_64& rng,
                    double scale) {
  Tensor& t = store.create(name, std::move(shape));
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

AttentionParams make_attention_params(ParameterStore& store,
                                      const std::string& prefix, int dim,
                                      int ff_dim, std::mt19937_64& rng) {
  double s = 1.0 / std::sqrt(static_cast<double>(dim));
  double sf = 1.0 / std::sqrt(static_cast<double>(ff_dim));
  AttentionParams p;
  p.wq = create_init(store, prefix + ".wq", {dim, dim}, rng, s);
  p.wk = create_init(store, prefix + ".wk", {dim, dim}, rng, s);
  p.wv = create_init(store, prefix + ".wv", {dim, dim}, rng, s);
  p.wo = create_init(store, prefix + ".wo", {dim, dim}, rng, s);
  p.bq = store.create(prefix + ".bq", {dim});
  p.bk = store.create(prefix + ".bk", {dim});
  p.bv = store.create(prefix + ".bv", {dim});
  p.bo = store.create(prefix + ".bo", {dim});
  p.ln1_g = store.create(prefix + ".ln1_g", {dim});
  std::fill(p.ln1_g.values().begin(), p.ln1_g.values().end(), 1.0);
  p.ln1_b = store.create(prefix + ".ln1_b", {dim});
  p.ln2_g = store.create(prefix + ".ln2_g", {dim});
  std::fill(p.ln2_g.values().begin(), p.ln2_g.values().end(), 1.0);
  p.ln2_b = store.create(prefix + ".ln2_b", {dim});
  p.ff_w1 = create_init(store, prefix + ".ff_w1", {dim, ff_dim}, rng, s);
  p.ff_b1 = store.create(prefix + ".ff_b1", {ff_dim});
  p.ff_w2 = create_init(store, prefix + ".ff_w2", {ff_dim, dim}, rng, sf);
  p.ff_b2 = store.create(prefix + ".ff_b2", {dim});
  return p;
}

AttentionParams attention_params_from_store(ParameterStore& store,
                                            const std::string& prefix) {
  AttentionParams p;
  p.wq = store.get(prefix + ".wq");
  p.wk = store.get(prefix + ".wk");
  p.wv = store.get(prefix + ".wv");
  p.wo = store.get(prefix + ".wo");
  p.bq = store.get(prefix + ".bq");
  p.bk = store.get(prefix + ".bk");
  p.bv = store.get(prefix + ".bv");
  p.bo = store.get(prefix + ".bo");
  p.ln1_g = store.get(prefix + ".ln1_g");
  p.ln1_b = store.get(prefix + ".ln1_b");
  p.ln2_g = store.get(prefix + ".ln2_g");
  p.ln2_b = store.get(prefix + ".ln2_b");
  p.ff_w1 = store.get(prefix + ".ff_w1");
  p.ff_b1 = store.get(prefix + ".ff_b1");
  p.ff_w2 = store.get(prefix + ".ff_w2");
  p.ff_b2 = store.get(prefix + ".ff_b2");
  return p;
}

Tensor self_attention(const Tensor& x, const AttentionParams& params,
                      int heads, const std::vector<std::uint8_t>& mask) {
  if (x.shape().size() != 3) {
    throw UsageError("self_attention: input must be [B,N,D]");
  }
  int bs = x.shape()[0], n = x.shape()[1], dim = x.shape()[2];
  if (heads < 1 || dim % heads != 0) {
    throw UsageError("self_attention: dim " + std::to_string(dim) +
                     " not divisible by heads " + std::to_string(heads));
  }
  std::vector<std::uint8_t> row_mask = mask;
  if (row_mask.empty()) {
    row_mask.assign(static_cast<std::size_t>(bs) * n, 0);
  } else if (row_mask.size() != static_cast<std::size_t>(bs) * n) {
    throw UsageError("self_attention: mask size mismatch");
  }
  int dh = dim / heads;

  Tensor xn = layer_norm_last(x, params.ln1_g, params.ln1_b);
  Tensor q = affine(xn, params.wq, params.bq);
  Tensor k = affine(xn, params.wk, params.bk);
  Tensor v = affine(xn, params.wv, params.bv);
  std::vector<Tensor> head_outs;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int hidx = 0; hidx < heads; ++hidx) {
    Tensor qh = slice_last(q, hidx * dh, (hidx + 1) * dh);
    Tensor kh = slice_last(k, hidx * dh, (hidx + 1) * dh);
    Tensor vh = slice_last(v, hidx * dh, (hidx + 1) * dh);
    Tensor scores = scale(bmm(qh, transpose_last(kh)), inv_sqrt);
    Tensor att = softmax_last_masked(scores, row_mask);
    head_outs.push_back(bmm(att, vh));
  }
  Tensor mha = affine(concat_last(head_outs), params.wo, params.bo);
  Tensor h = add(x, mask_rows_zero(mha, row_mask));

  Tensor hn = layer_norm_last(h, params.ln2_g, params.ln2_b);
  Tensor ff = affine(relu(affine(hn, params.ff_w1, params.ff_b1)),
                     params.ff_w2, params.ff_b2);
  Tensor y = add(h, mask_rows_zero(ff, row_mask));
  return mask_rows_zero(y, row_mask);
}

}  // namespace dlgdd::diff
