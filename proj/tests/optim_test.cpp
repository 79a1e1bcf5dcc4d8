#include <gtest/gtest.h>

#include <cmath>

#include "dualscope/optim.hpp"

using namespace dualscope;

namespace {

// x^2 gradient written straight into the parameter.
void set_square_grad(Parameter<double>& p) {
  for (std::size_t i = 0; i < p.size(); ++i) p.gradient[i] = 2.0 * p.value[i];
}

}  // namespace

TEST(Adam, TwoStepsOnSquareMatchHandRecurrence) {
  Parameter<double> p("x", Tensor4d(Shape4{1, 1, 1, 1}, 1.0));
  double x = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    set_square_grad(p);
    adam_step(p, 0.1);
    const double g = 2.0 * x;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.1 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p.value[0], x, 1e-12) << "step " << t;
  }
  EXPECT_NEAR(x, 0.80041, 1e-5);
  EXPECT_EQ(p.step_count, 2u);
}

TEST(Adam, ZeroGradientLeavesValueUnchanged) {
  Parameter<float> p("w", Tensor4(Shape4{1, 1, 2, 3}, 0.25f));
  adam_step(p, 1e-2);
  for (float v : p.value.data()) EXPECT_EQ(v, 0.25f);
  EXPECT_EQ(p.step_count, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter<double> p("w", Tensor4d::from_values(Shape4{1, 1, 1, 3}, {0.0, 0.0, 0.0}));
  p.gradient = Tensor4d::from_values(Shape4{1, 1, 1, 3}, {3.0, -0.01, 250.0});
  adam_step(p, 1e-3);
  EXPECT_NEAR(p.value[0], -1e-3, 1e-9);
  EXPECT_NEAR(p.value[1], 1e-3, 1e-9);
  EXPECT_NEAR(p.value[2], -1e-3, 1e-9);
}

TEST(Adam, NearlyInvariantToLossScale) {
  Parameter<double> a("a", Tensor4d::from_values(Shape4{1, 1, 1, 2}, {1.0, -0.5}));
  Parameter<double> b = a;
  for (int t = 0; t < 5; ++t) {
    set_square_grad(a);
    set_square_grad(b);
    for (double& g : b.gradient.data()) g *= 100.0;
    const double a0 = a.value[0];
    const double b0 = b.value[0];
    adam_step(a, 0.01);
    adam_step(b, 0.01);
    const double da = a.value[0] - a0;
    const double db = b.value[0] - b0;
    EXPECT_LT(std::abs(db - da) / std::abs(da), 0.01);
  }
}

TEST(LrSchedule, EndpointsAndGeometricMidpoint) {
  EXPECT_DOUBLE_EQ(lr_schedule(0), 1e-2);
  EXPECT_DOUBLE_EQ(lr_schedule(10), 1e-5);
  EXPECT_DOUBLE_EQ(lr_schedule(500), 1e-5);
  EXPECT_NEAR(lr_schedule(5), 3.1623e-4, 1e-7);
  EXPECT_NEAR(lr_schedule(5), std::sqrt(1e-2 * 1e-5), 1e-15);
  for (std::size_t e = 1; e < 10; ++e) EXPECT_LT(lr_schedule(e), lr_schedule(e - 1));
  EXPECT_DOUBLE_EQ(lr_schedule(20, 1e-2, 1e-5, 40), std::sqrt(1e-2 * 1e-5));
}

TEST(LrSchedule, RejectsBadArguments) {
  EXPECT_THROW(lr_schedule(0, 1e-2, 1e-5, 0), std::invalid_argument);
  EXPECT_THROW(lr_schedule(0, 0.0, 1e-5, 10), std::invalid_argument);
  EXPECT_THROW(lr_schedule(0, 1e-2, -1.0, 10), std::invalid_argument);
}
