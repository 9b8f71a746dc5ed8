#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "dlgdd/common.hpp"
#include "dlgdd/nn.hpp"
#include "dlgdd/tensor.hpp"

using namespace dlgdd;
using diff::Tensor;

namespace {

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed,
                     double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  std::vector<double> vals(n);
  for (double& v : vals) v = u(rng);
  return Tensor::from(std::move(shape), std::move(vals), true);
}

Tensor scalarize(const Tensor& t, std::uint64_t seed = 777) {
  Tensor w = random_tensor(t.shape(), seed, 0.3, 1.7);
  Tensor wc = Tensor::from(w.shape(), w.values());
  return diff::sum_all(diff::mul(t, wc));
}

}  // namespace

TEST_CASE("adam matches a hand-stepped reference on a quadratic") {
  // Minimize f(w) = 0.5 * w^2 starting from w = 1; replicate the
  // bias-corrected update by hand alongside.
  diff::ParameterStore store;
  Tensor& w = store.create("w", {1});
  w.values()[0] = 1.0;

  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double ref = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 25; ++t) {
    Tensor loss = diff::scale(diff::sum_all(diff::mul(w, w)), 0.5);
    loss.backward();
    double g = ref;  // df/dw = w at the reference point
    CHECK(w.grad()[0] == doctest::Approx(w.values()[0]).epsilon(1e-12));
    diff::adam_step(store, lr, b1, b2, eps);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double mh = m / (1 - std::pow(b1, t));
    double vh = v / (1 - std::pow(b2, t));
    ref -= lr * mh / (std::sqrt(vh) + eps);
    CHECK(w.values()[0] == doctest::Approx(ref).epsilon(1e-10));
  }
  CHECK(std::abs(w.values()[0]) < 1.0);  // moved toward the minimum
}

TEST_CASE("adam_step clears gradients and requires them") {
  diff::ParameterStore store;
  Tensor& w = store.create("w", {2});
  CHECK_THROWS_AS(diff::adam_step(store, 0.1), UsageError);  // no grads yet
  Tensor loss = diff::sum_all(diff::mul(w, w));
  loss.backward();
  diff::adam_step(store, 0.1);
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("clip_grad_norm rescales to the cap and leaves small grads alone") {
  diff::ParameterStore store;
  Tensor& a = store.create("a", {2});
  a.values() = {3.0, 0.0};
  Tensor& b = store.create("b", {1});
  b.values() = {4.0};
  Tensor loss = diff::add(
      diff::scale(diff::sum_all(diff::mul(a, a)), 0.5),
      diff::scale(diff::sum_all(diff::mul(b, b)), 0.5));
  loss.backward();
  // Global norm is 5; cap at 1 scales everything by 1/5.
  double norm = store.clip_grad_norm(1.0);
  CHECK(norm == doctest::Approx(5.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
  CHECK(b.grad()[0] == doctest::Approx(0.8));
  double norm2 = store.clip_grad_norm(10.0);  // already below the cap
  CHECK(norm2 == doctest::Approx(1.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
}

TEST_CASE("affine matches the naive product and flattens leading dims") {
  Tensor x = random_tensor({2, 3, 4}, 1);
  Tensor w = random_tensor({4, 5}, 2);
  Tensor b = random_tensor({5}, 3);
  Tensor y = diff::affine(x, w, b);
  REQUIRE(y.shape() == std::vector<int>{2, 3, 5});
  for (int r = 0; r < 6; ++r)
    for (int j = 0; j < 5; ++j) {
      double s = b.values()[j];
      for (int k = 0; k < 4; ++k)
        s += x.values()[r * 4 + k] * w.values()[k * 5 + j];
      CHECK(y.values()[r * 5 + j] == doctest::Approx(s).epsilon(1e-10));
    }
  auto fn = [&](const Tensor& t) { return scalarize(diff::affine(t, w, b)); };
  CHECK(diff::grad_check(fn, x) < 1e-4);
}

TEST_CASE("self_attention passes grad_check") {
  diff::ParameterStore store;
  std::mt19937_64 rng(9);
  auto params = diff::make_attention_params(store, "blk", 8, 16, rng);
  std::vector<std::uint8_t> mask = {0, 0, 1, 0, 0, 0};
  Tensor x = random_tensor({2, 3, 8}, 10);
  auto fn = [&](const Tensor& t) {
    return scalarize(diff::self_attention(t, params, 2, mask));
  };
  CHECK(diff::grad_check(fn, x) < 1e-4);
}

TEST_CASE("self_attention is permutation equivariant") {
  diff::ParameterStore store;
  std::mt19937_64 rng(11);
  auto params = diff::make_attention_params(store, "blk", 8, 16, rng);
  Tensor x = random_tensor({1, 4, 8}, 12);
  Tensor y = diff::self_attention(x, params, 2);

  // Permute the four rows and re-run: output rows permute identically.
  std::vector<int> perm = {2, 0, 3, 1};
  std::vector<double> pv(4 * 8);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 8; ++c)
      pv[r * 8 + c] = x.values()[perm[r] * 8 + c];
  Tensor xp = Tensor::from({1, 4, 8}, std::move(pv));
  Tensor yp = diff::self_attention(xp, params, 2);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 8; ++c)
      CHECK(yp.values()[r * 8 + c] ==
            doctest::Approx(y.values()[perm[r] * 8 + c]).epsilon(1e-9));
}

TEST_CASE("self_attention masks padded slots completely") {
  diff::ParameterStore store;
  std::mt19937_64 rng(13);
  auto params = diff::make_attention_params(store, "blk", 8, 16, rng);
  std::vector<std::uint8_t> mask = {0, 0, 1};
  Tensor x = random_tensor({1, 3, 8}, 14);
  Tensor y = diff::self_attention(x, params, 2, mask);
  for (int c = 0; c < 8; ++c) CHECK(y.values()[2 * 8 + c] == 0.0);

  // Changing a padded slot's content must not change unmasked outputs.
  Tensor x2 = Tensor::from(x.shape(), x.values());
  for (int c = 0; c < 8; ++c) x2.values()[2 * 8 + c] += 3.5;
  Tensor y2 = diff::self_attention(x2, params, 2, mask);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 8; ++c)
      CHECK(y2.values()[r * 8 + c] ==
            doctest::Approx(y.values()[r * 8 + c]).epsilon(1e-12));
}

TEST_CASE("parameter store save/load round trip") {
  diff::ParameterStore store;
  std::mt19937_64 rng(15);
  store.create("w1", {3, 4});
  store.create("b1", {4});
  store.init_uniform(rng, 0.2);
  std::string path =
      (std::filesystem::temp_directory_path() / "params_rt.json").string();
  store.save(path);

  diff::ParameterStore back;
  back.create("w1", {3, 4});
  back.create("b1", {4});
  back.load(path);
  for (const auto& name : store.names())
    CHECK(back.get(name).values() == store.get(name).values());
  std::filesystem::remove(path);
}

TEST_CASE("parameter store load rejects mismatched shapes") {
  diff::ParameterStore store;
  store.create("w", {2, 2});
  std::string path =
      (std::filesystem::temp_directory_path() / "params_bad.json").string();
  store.save(path);
  diff::ParameterStore other;
  other.create("w", {3, 2});
  CHECK_THROWS_AS(other.load(path), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("duplicate parameter names are rejected") {
  diff::ParameterStore store;
  store.create("w", {2});
  CHECK_THROWS_AS(store.create("w", {2}), UsageError);
  CHECK_THROWS_AS(store.get("missing"), UsageError);
}
