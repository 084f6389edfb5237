#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "nlse/autodiff.hpp"
#include "nlse/model.hpp"
#include "nlse/optim.hpp"
#include "test_support.hpp"

namespace nlse {
namespace {

using J = Jet<double>;

TEST(SeedInputJets, CanonicalSeeds) {
  auto [jx, jt] = seed_input_jets(0.0, 0.0);
  EXPECT_EQ(jx, (J{0, 1, 0, 0}));
  EXPECT_EQ(jt, (J{0, 0, 1, 0}));
  EXPECT_EQ(seed_input_jets(-5.0, 0.0).first, (J{-5, 1, 0, 0}));
  EXPECT_EQ(seed_input_jets(2.5, 1.4).second, (J{1.4, 0, 1, 0}));
}

TEST(JetAffine, IdentityLeavesJetsUnchanged) {
  const std::array<J, 3> in{J{0.3, 1, -2, 0.5}, J{-1, 0, 1, 4}, J{2, 0.25, 0, -1}};
  const auto out = jet_affine<double>(MatrixX<double>::Identity(3, 3), VectorX<double>::Zero(3), in);
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out[i], in[i]);
}

TEST(JetAffine, ScalarLinearity) {
  MatrixX<double> w(1, 1);
  w << 2;
  VectorX<double> b(1);
  b << 3;
  const std::array<J, 1> in{J{1, 1, 0, 0}};
  EXPECT_EQ(jet_affine<double>(w, b, in)[0], (J{5, 2, 0, 0}));
}

TEST(JetAffine, DimensionMismatchIsConfigError) {
  const std::array<J, 2> in{};
  EXPECT_THROW(jet_affine<double>(MatrixX<double>::Ones(3, 3), VectorX<double>::Zero(3), in), ConfigError);
  const std::array<J, 3> in3{};
  EXPECT_THROW(jet_affine<double>(MatrixX<double>::Ones(3, 3), VectorX<double>::Zero(2), in3), ConfigError);
}

// Composite evaluation x -> tanh(W0 [x, t] + b0) -> W1 (.) + b1 with a random 3x3 W1.
TEST(JetAffine, SecondDerivativeMatchesFiniteDifferences) {
  Rng rng(7);
  MatrixX<double> w0(3, 2), w1(3, 3);
  VectorX<double> b0(3), b1(3);
  for (Index i = 0; i < w0.size(); ++i) w0.data()[i] = rng.uniform(-1, 1);
  for (Index i = 0; i < w1.size(); ++i) w1.data()[i] = rng.uniform(-1, 1);
  for (Index i = 0; i < 3; ++i) {
    b0[i] = rng.uniform(-1, 1);
    b1[i] = rng.uniform(-1, 1);
  }
  auto value = [&](double x, double t) {
    VectorX<double> z(2);
    z << x, t;
    const VectorX<double> y = (w0 * z + b0).array().tanh().matrix();
    return VectorX<double>(w1 * y + b1);
  };
  const double x = 0.37, t = 0.81, h = 1e-4;
  auto [jx, jt] = seed_input_jets(x, t);
  const std::array<J, 2> seeds{jx, jt};
  const auto hidden = jet_tanh<double>(jet_affine<double>(w0, b0, seeds));
  const auto out = jet_affine<double>(w1, b1, hidden);
  const VectorX<double> fd = (value(x + h, t) - 2 * value(x, t) + value(x - h, t)) / (h * h);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(out[static_cast<std::size_t>(i)].d2_dx2, fd[i], 1e-6);
}

TEST(JetTanh, Origin) {
  const std::array<J, 2> in{J{0, 1, 0, 0}, J{0, 2, 0, 0}};
  const auto out = jet_tanh<double>(in);
  EXPECT_EQ(out[0], (J{0, 1, 0, 0}));
  EXPECT_EQ(out[1].d2_dx2, 0.0);
  EXPECT_EQ(out[1].d_dx, 2.0);
}

// z(x, t) = 0.5 + (x - x0) + 0.3 (t - t0) - 0.1 (x - x0)^2 has jet (0.5, 1, 0.3, -0.2) at (x0, t0).
TEST(JetTanh, MatchesFiniteDifferencesOfComposition) {
  const double x0 = 0.2, t0 = 0.4;
  auto f = [&](double x, double t) {
    const double dx = x - x0;
    return std::tanh(0.5 + dx + 0.3 * (t - t0) - 0.1 * dx * dx);
  };
  const std::array<J, 1> in{J{0.5, 1.0, 0.3, -0.2}};
  const J out = jet_tanh<double>(in)[0];
  const double h1 = 1e-5, h2 = 1e-4;
  const double fx = (f(x0 + h1, t0) - f(x0 - h1, t0)) / (2 * h1);
  const double ft = (f(x0, t0 + h1) - f(x0, t0 - h1)) / (2 * h1);
  const double fxx = (f(x0 + h2, t0) - 2 * f(x0, t0) + f(x0 - h2, t0)) / (h2 * h2);
  EXPECT_NEAR(out.value, f(x0, t0), 1e-15);
  EXPECT_NEAR(out.d_dx, fx, 1e-6 * std::abs(fx));
  EXPECT_NEAR(out.d_dt, ft, 1e-6 * std::abs(ft));
  EXPECT_NEAR(out.d2_dx2, fxx, 1e-6 * std::abs(fxx));
}

TEST(Backward, BeforeForwardIsUsageError) {
  JetTape<double> tape;
  EXPECT_FALSE(tape.recorded());
  EXPECT_THROW(tape.backward(JetBlock<double>{}, 0.0), UsageError);
  EXPECT_THROW(tape.outputs(), UsageError);
}

TEST(Backward, BetaSquared) {
  // L = beta^2 does not touch the network: zero output adjoint, explicit dL/dbeta = 2 beta.
  Rng rng(3);
  MlpParams<double> p = set_beta(xavier_init<double>({2, 4, 2}, rng), 3.0);
  JetTape<double> tape;
  PointMatrix<double> pts(2, 1);
  pts << 0.1, 0.2;
  tape.record(layers_of(p), pts, true);
  JetBlock<double> zero{MatrixX<double>::Zero(2, 1), MatrixX<double>::Zero(2, 1), MatrixX<double>::Zero(2, 1),
                        MatrixX<double>::Zero(2, 1)};
  const auto g = tape.backward(zero, 2 * p.beta);
  EXPECT_EQ(g.beta(), 6.0);
  EXPECT_EQ(g.flat().head(g.size() - 1).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, ConstantLossGivesZeroBuffer) {
  Rng rng(4);
  const MlpParams<double> p = xavier_init<double>({2, 3, 3, 2}, rng);
  JetTape<double> tape;
  const PointMatrix<double> pts = draw_training_points<double>(5, DomainBounds<double>{}, rng);
  tape.record(layers_of(p), pts, false);
  JetBlock<double> zero;
  zero.value = MatrixX<double>::Zero(2, 5);
  const auto g = tape.backward(zero, 0.0);
  EXPECT_EQ(g.size(), p.layout().size());
  EXPECT_TRUE((g.flat().array() == 0).all());
}

TEST(Backward, ToyCompositeLossMatchesFiniteDifferences) {
  Rng rng(11);
  const auto toy = test::random_toy_problem(rng, 2, 10);
  const auto lg = loss_and_gradient(toy.params, toy.data, toy.collocation, toy.weights);
  const VectorX<double> fd = test::fd_loss_gradient(toy, 1e-5);
  ASSERT_EQ(fd.size(), lg.gradient.size());
  for (Index i = 0; i < fd.size(); ++i) {
    EXPECT_LT(test::scaled_error(lg.gradient.flat()[i], fd[i]), 1e-4) << "parameter " << i;
  }
}

TEST(GradientBuffer, AccumulationIsAdditive) {
  ParameterLayout layout({{3, 2}, {2, 3}});
  GradientBuffer<double> a(layout), b(layout);
  EXPECT_EQ(a.size(), 3 * 2 + 3 + 2 * 3 + 2 + 1);
  a.weights(0)(1, 0) = 1.5;
  b.weights(0)(1, 0) = 2.0;
  b.beta() = -1;
  a += b;
  EXPECT_EQ(a.weights(0)(1, 0), 3.5);
  EXPECT_EQ(a.beta(), -1);
  // Row-major flat layout: layer-0 weight (1, 0) sits at offset 2.
  EXPECT_EQ(a.flat()[2], 3.5);
  GradientBuffer<double> other(ParameterLayout({{1, 2}}));
  EXPECT_THROW(a += other, ConfigError);
}

// Property: every gradient component matches central differences on random small networks.
TEST(BackwardProperty, GradientExactnessOnRandomNetworks) {
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto toy = test::random_toy_problem(rng, 2, 10);
    const auto lg = loss_and_gradient(toy.params, toy.data, toy.collocation, toy.weights);
    const VectorX<double> fd = test::fd_loss_gradient(toy, 1e-5);
    for (Index i = 0; i < fd.size(); ++i) {
      ASSERT_LT(test::scaled_error(lg.gradient.flat()[i], fd[i]), 1e-4)
          << "trial " << trial << " parameter " << i << " autodiff " << lg.gradient.flat()[i] << " fd " << fd[i];
    }
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(BackwardProperty, JetChannelsMatchFiniteDifferences) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = test::random_network(rng);
    const double x = rng.uniform(-4.5, 4.5), t = rng.uniform(0.1, 1.4);
    const auto j = forward_with_derivatives(p, x, t);
    const auto fd = test::fd_network_jet(p, x, t);
    EXPECT_LT(test::scaled_error(j.u_x, fd.u_x), 1e-5);
    EXPECT_LT(test::scaled_error(j.v_x, fd.v_x), 1e-5);
    EXPECT_LT(test::scaled_error(j.u_t, fd.u_t), 1e-5);
    EXPECT_LT(test::scaled_error(j.v_t, fd.v_t), 1e-5);
    EXPECT_LT(test::scaled_error(j.u_xx, fd.u_xx), 1e-4);
    EXPECT_LT(test::scaled_error(j.v_xx, fd.v_xx), 1e-4);
  }
}

TEST(BackwardProperty, LinearInTheLoss) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto toy = test::random_toy_problem(rng, 4, 12);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const auto g_data = loss_and_gradient(toy.params, toy.data, toy.collocation, LossWeights<double>{1, 0}).gradient;
    const auto g_phys = loss_and_gradient(toy.params, toy.data, toy.collocation, LossWeights<double>{0, 1}).gradient;
    const auto g_mix = loss_and_gradient(toy.params, toy.data, toy.collocation, LossWeights<double>{a, b}).gradient;
    const VectorX<double> combined = a * g_data.flat() + b * g_phys.flat();
    const double scale = std::max(1.0, combined.cwiseAbs().maxCoeff());
    EXPECT_LT((g_mix.flat() - combined).cwiseAbs().maxCoeff() / scale, 1e-13);
  }
}

TEST(BackwardProperty, Deterministic) {
  Rng rng(6);
  const auto toy = test::random_toy_problem(rng, 300, 700);
  const auto g1 = loss_and_gradient(toy.params, toy.data, toy.collocation, toy.weights);
  const auto g2 = loss_and_gradient(toy.params, toy.data, toy.collocation, toy.weights);
  EXPECT_EQ(g1.loss.total, g2.loss.total);
  EXPECT_TRUE((g1.gradient.flat().array() == g2.gradient.flat().array()).all());
}

TEST(JetTape, ReuseAcrossBatchSizes) {
  Rng rng(8);
  const auto p = test::random_network(rng);
  JetTape<double> tape;
  const PointMatrix<double> a = draw_training_points<double>(7, DomainBounds<double>{}, rng);
  const PointMatrix<double> b = draw_training_points<double>(3, DomainBounds<double>{}, rng);
  tape.record(layers_of(p), a, true);
  const JetBlock<double> out_b = tape.record(layers_of(p), b, false);
  EXPECT_FALSE(out_b.has_derivatives());
  const MatrixX<double> ref = forward_batch(p, b);
  EXPECT_TRUE(out_b.value.isApprox(ref, 1e-14));
}

}  // namespace
}  // namespace nlse
