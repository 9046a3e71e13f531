#include "doctest.h"

#include <cmath>
#include <vector>

#include "dadapt/ops.hpp"
#include "dadapt/rng.hpp"
#include "dadapt/tensor.hpp"

using namespace dadapt;

namespace {

// Deterministic random graph over the smooth op subset: same seed, same
// structure. Used for the AD-vs-finite-difference oracle.
Tensor build_graph(const std::vector<Tensor>& leaves, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor& A = leaves[0];  // 3x4
  const Tensor& x = leaves[1];  // 4
  const Tensor& b = leaves[2];  // 3
  Tensor h = matvec(A, x);
  for (int step = 0; step < 6; ++step) {
    switch (rng.below(9)) {
      case 0: h = tanh(h); break;
      case 1: h = sigmoid(h); break;
      case 2: h = softplus(h); break;
      case 3: h = exp(mul_scalar(h, 0.3)); break;
      case 4: h = add(h, b); break;
      case 5: h = mul(h, b); break;
      case 6: h = sub(h, mul_scalar(b, 0.5)); break;
      case 7: h = log(add_scalar(softplus(h), 0.5)); break;
      case 8: h = sqrt(add_scalar(softplus(h), 0.5)); break;
    }
  }
  return add(mean(h), mul_scalar(dot(x, x), 0.01));
}

std::vector<Tensor> make_leaves(Rng& rng) {
  auto draw = [&rng](std::size_t n) {
    std::vector<double> v(n);
    for (auto& e : v) e = rng.gaussian();
    return v;
  };
  return {Tensor::from_values(draw(12), {3, 4}, true),
          Tensor::from_values(draw(4), {4}, true),
          Tensor::from_values(draw(3), {3}, true)};
}

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("matmul identity and projector") {
  Tensor I = Tensor::matrix({{1, 0}, {0, 1}});
  Tensor M = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor out = matmul(I, M);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 1) == 2.0);
  CHECK(out(1, 0) == 3.0);
  CHECK(out(1, 1) == 4.0);

  Tensor P = Tensor::matrix({{1, 0}, {0, 0}});
  Tensor v = Tensor::matrix({{5}, {7}});
  Tensor pv = matmul(P, v);
  CHECK(pv(0, 0) == 5.0);
  CHECK(pv(1, 0) == 0.0);
}

TEST_CASE("matmul gradient of sum(A*B)") {
  Tensor A = Tensor::matrix({{1, 1}}, true);
  Tensor B = Tensor::matrix({{2}, {3}});
  Tape tape;
  Tensor loss = sum(matmul(A, B));
  tape.backward(loss);
  CHECK(A.grad()[0] == doctest::Approx(2.0));
  CHECK(A.grad()[1] == doctest::Approx(3.0));
}

TEST_CASE("elementwise values") {
  Tensor z = Tensor::scalar(0.0);
  CHECK(sigmoid(z).item() == doctest::Approx(0.5));
  CHECK(softplus(z).item() == doctest::Approx(std::log(2.0)));
  CHECK(tanh(z).item() == doctest::Approx(0.0));
}

TEST_CASE("tanh gradient at zero is one") {
  Tensor x = Tensor::scalar(0.0, true);
  Tape tape;
  Tensor y = tanh(x);
  tape.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(1.0));
}

TEST_CASE("backward on x squared") {
  Tensor x = Tensor::scalar(3.0, true);
  Tape tape;
  Tensor loss = mul(x, x);
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor x = Tensor::from_values({1.0, 2.0}, {2}, true);
  Tape tape;
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("shape mismatch raises dimension error") {
  Tensor a = Tensor::from_values({1, 2, 3}, {3});
  Tensor b = Tensor::from_values({1, 2}, {2});
  CHECK_THROWS_AS(add(a, b), DimensionError);
  CHECK_THROWS_AS(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 2}})),
                  DimensionError);
}

TEST_CASE("checked mode rejects non-finite results") {
  Tensor neg = Tensor::scalar(-1.0);
  CHECK_THROWS_AS(log(neg), NumericError);
  CHECK_THROWS_AS(Tensor::from_values({std::nan("")}, {1}), NumericError);
}

TEST_CASE("AD matches central finite differences on 100 random graphs") {
  const double fd_h = 1e-5;
  for (std::uint64_t g = 0; g < 100; ++g) {
    Rng rng(Rng::mix(42, g));
    auto leaves = make_leaves(rng);
    Tape tape;
    Tensor loss = build_graph(leaves, g);
    tape.backward(loss);
    std::vector<std::vector<double>> grads;
    for (auto& leaf : leaves) grads.push_back(leaf.grad());

    for (std::size_t li = 0; li < leaves.size(); ++li) {
      for (std::size_t i = 0; i < leaves[li].size(); ++i) {
        double orig = leaves[li].value_at(i);
        leaves[li].mutable_values()[i] = orig + fd_h;
        double up = build_graph(leaves, g).item();
        leaves[li].mutable_values()[i] = orig - fd_h;
        double down = build_graph(leaves, g).item();
        leaves[li].mutable_values()[i] = orig;
        double fd = (up - down) / (2.0 * fd_h);
        double ad = grads[li][i];
        double rel = std::fabs(ad - fd) / std::max({std::fabs(ad), std::fabs(fd), 1e-6});
        CHECK(rel < 1e-4);
      }
    }
  }
}

TEST_CASE("determinism: identical seeds give identical outputs and gradients") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    auto leaves = make_leaves(rng);
    Tape tape;
    Tensor loss = build_graph(leaves, seed);
    tape.backward(loss);
    std::vector<double> all;
    all.push_back(loss.item());
    for (auto& leaf : leaves) {
      for (double v : leaf.grad()) all.push_back(v);
    }
    return all;
  };
  auto a = run(7);
  auto b = run(7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("no tape leakage after backward") {
  Tensor x = Tensor::scalar(2.0, true);
  Tape tape;
  Tensor y = mul(x, x);
  CHECK(tape.node_count() > 0);
  tape.backward(y);
  CHECK(tape.node_count() == 0);
  x.zero_grad();
  Tensor z = mul(x, x);
  CHECK(tape.node_count() == 1);
  tape.backward(z);
  CHECK(x.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("ops outside a tape do not record") {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = mul(x, x);  // no tape alive
  CHECK(y.item() == doctest::Approx(4.0));
  CHECK(!y.has_grad());
}

TEST_CASE("gather scatter-adds its gradient") {
  Tensor x = Tensor::from_values({1, 2, 3}, {3}, true);
  Tape tape;
  Tensor y = gather(x, {0, 0, 2}, {3});
  tape.backward(sum(y));
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(0.0));
  CHECK(x.grad()[2] == doctest::Approx(1.0));
}

TEST_CASE("concat splits its gradient") {
  Tensor a = Tensor::from_values({1, 2}, {2}, true);
  Tensor b = Tensor::from_values({3}, {1}, true);
  Tape tape;
  Tensor c = concat({a, b});
  Tensor loss = dot(c, Tensor::from_values({1, 10, 100}, {3}));
  tape.backward(loss);
  CHECK(a.grad()[0] == doctest::Approx(1.0));
  CHECK(a.grad()[1] == doctest::Approx(10.0));
  CHECK(b.grad()[0] == doctest::Approx(100.0));
}

TEST_CASE("straight-through threshold: hard forward, identity backward") {
  Tensor x = Tensor::from_values({0.4, 0.6}, {2}, true);
  Tape tape;
  Tensor y = straight_through_threshold(x, 0.5);
  CHECK(y.value_at(0) == 0.0);
  CHECK(y.value_at(1) == 1.0);
  tape.backward(sum(y));
  CHECK(x.grad()[0] == doctest::Approx(1.0));
  CHECK(x.grad()[1] == doctest::Approx(1.0));
}

TEST_CASE("scalar broadcast on binary ops") {
  Tensor s = Tensor::scalar(2.0, true);
  Tensor v = Tensor::from_values({1, 2, 3}, {3});
  Tape tape;
  Tensor y = mul(s, v);
  tape.backward(sum(y));
  CHECK(y.value_at(2) == doctest::Approx(6.0));
  CHECK(s.grad()[0] == doctest::Approx(6.0));
}

TEST_SUITE_END();
