#include "doctest.h"

#include <cmath>
#include <vector>

#include "dadapt/adam.hpp"
#include "dadapt/ops.hpp"

using namespace dadapt;

TEST_SUITE_BEGIN("adam");

TEST_CASE("first step moves by about lr against the gradient sign") {
  Tensor p = Tensor::from_values({1.0, -2.0}, {2}, true);
  AdamConfig cfg;
  cfg.lr = 1e-3;
  AdamState opt({p}, cfg);
  p.mutable_grad() = {0.5, -3.0};
  opt.step();
  // bias-corrected first step: |delta| = lr * g / (|g| + eps') ~ lr
  CHECK(p.value_at(0) == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
  CHECK(p.value_at(1) == doctest::Approx(-2.0 + 1e-3).epsilon(1e-6));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::from_values({1.5}, {1}, true);
  AdamState opt({p});
  p.mutable_grad() = {0.0};
  opt.step();
  CHECK(p.value_at(0) == 1.5);
}

TEST_CASE("parameter with no gradient is skipped") {
  Tensor p = Tensor::from_values({1.5}, {1}, true);
  AdamState opt({p});
  opt.step();
  CHECK(p.value_at(0) == 1.5);
}

TEST_CASE("1000 steps on x^2 reach the minimum and match a scalar oracle") {
  // independent plain-double Adam recurrence
  double ox = 1.0, om = 0.0, ov = 0.0;
  const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  Tensor x = Tensor::scalar(1.0, true);
  AdamConfig cfg;
  cfg.lr = lr;
  AdamState opt({x}, cfg);

  for (int t = 1; t <= 1000; ++t) {
    {
      Tape tape;
      Tensor loss = mul(x, x);
      tape.backward(loss);
    }
    opt.step();

    double g = 2.0 * ox;
    om = b1 * om + (1 - b1) * g;
    ov = b2 * ov + (1 - b2) * g * g;
    double mhat = om / (1 - std::pow(b1, t));
    double vhat = ov / (1 - std::pow(b2, t));
    ox -= lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(x.value_at(0) == doctest::Approx(ox).epsilon(1e-12));
  }
  CHECK(std::fabs(x.value_at(0)) < 1e-3);
}

TEST_CASE("NaN gradient aborts with the parameter name") {
  Tensor p = Tensor::from_values({1.0}, {1}, true);
  p.set_name("theta.w0");
  AdamState opt({p});
  p.mutable_grad() = {std::nan("")};
  CHECK_THROWS_WITH_AS(opt.step(),
                       doctest::Contains("theta.w0"), TrainingError);
}

TEST_SUITE_END();
