#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "zeroflow/errors.hpp"
#include "zeroflow/gradcheck.hpp"
#include "zeroflow/models.hpp"
#include "zeroflow/rng.hpp"
#include "zeroflow/tape.hpp"

using namespace zf;
using ad::Var;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = 4.0 * rng.uniform() - 2.0;
  return t;
}

// Keeps values off the ReLU kink so central differences stay valid.
Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.storage()) {
    const double u = 1.9 * rng.uniform() + 0.1;
    v = rng.bernoulli(0.5) ? u : -u;
  }
  return t;
}

}  // namespace

TEST(Tape, BackwardExamples) {
  {
    ad::Tape tape;
    const Var w = tape.parameter(Tensor::vector({1, 2}), 0);
    const Var loss = ad::sum(w * tape.constant(Tensor::vector({3, 4})));
    const ad::Gradients g = tape.backward(loss);
    EXPECT_EQ(g.at(0), Tensor::vector({3, 4}));
  }
  {
    ad::Tape tape;
    const Var w = tape.parameter(Tensor::vector({1, -2}), 0);
    const ad::Gradients g = tape.backward(ad::sum(ad::square(w)));
    EXPECT_EQ(g.at(0), Tensor::vector({2, -4}));
  }
  {
    ad::Tape tape;
    const Var c = tape.constant(Tensor::vector({1, 2}));
    EXPECT_TRUE(tape.backward(ad::sum(c)).empty());
  }
}

TEST(Tape, ScaledScalarLossPropagates) {
  ad::Tape tape;
  const Var w = tape.parameter(Tensor::vector({1, 2, 3}), 0);
  const ad::Gradients g = tape.backward(0.5 * ad::sum(w));
  EXPECT_EQ(g.at(0), Tensor::vector({0.5, 0.5, 0.5}));
}

TEST(Tape, NonScalarLossIsRejected) {
  ad::Tape tape;
  const Var w = tape.parameter(Tensor::vector({1, 2}), 0);
  EXPECT_THROW(tape.backward(w), ContractError);
}

TEST(Tape, ReusedSlotIsRejected) {
  ad::Tape tape;
  (void)tape.parameter(Tensor::scalar(1), 3);
  EXPECT_THROW((void)tape.parameter(Tensor::scalar(1), 3), ContractError);
}

TEST(Tape, ReluSubgradientIsZeroAtZero) {
  ad::Tape tape;
  const Var x = tape.parameter(Tensor::vector({-1, 0, 2}), 0);
  const ad::Gradients g = tape.backward(ad::sum(ad::relu(x)));
  EXPECT_EQ(g.at(0), Tensor::vector({0, 0, 1}));
}

TEST(Tape, ConcatBackwardSplitsAdjoint) {
  ad::Tape tape;
  const Var a = tape.parameter(Tensor::vector({1, 2}), 0);
  const Var b = tape.parameter(Tensor::vector({3}), 1);
  const std::vector<Var> parts{a, b};
  const Var c = ad::concat(parts, 0);
  const Var loss = ad::sum(c * tape.constant(Tensor::vector({10, 20, 30})));
  const ad::Gradients g = tape.backward(loss);
  EXPECT_EQ(g.at(0), Tensor::vector({10, 20}));
  EXPECT_EQ(g.at(1), Tensor::vector({30}));
}

TEST(Tape, SumOfIndependentSubgraphsIsUnionOfGradients) {
  Rng rng(5);
  const Tensor a0 = random_tensor({3, 2}, rng), b0 = random_tensor({2, 4}, rng);
  auto f_a = [](ad::Tape&, Var a) { return ad::sum(ad::square(ad::sigmoid(a))); };
  auto f_b = [&](ad::Tape& t, Var b) { return ad::sum(ad::relu(b) * t.constant(Tensor({2, 4}, 3.0))); };

  ad::Tape joint;
  const Var a = joint.parameter(a0, 0), b = joint.parameter(b0, 1);
  const ad::Gradients g = joint.backward(f_a(joint, a) + f_b(joint, b));

  ad::Tape ta;
  const ad::Gradients ga = ta.backward(f_a(ta, ta.parameter(a0, 0)));
  ad::Tape tb;
  const ad::Gradients gb = tb.backward(f_b(tb, tb.parameter(b0, 1)));
  EXPECT_EQ(g.at(0), ga.at(0));
  EXPECT_EQ(g.at(1), gb.at(1));
}

TEST(GradCheck, QuadraticIsTight) {
  const std::vector<Tensor> params{Tensor::vector({0.3, -1.2, 2.0})};
  const Objective f = [](ad::Tape&, std::span<const Var> p) { return ad::sum(ad::square(p[0])); };
  EXPECT_LT(grad_check(f, params, 1e-5), 1e-7);
}

TEST(GradCheck, EmptyParameterSetIsZero) {
  const Objective f = [](ad::Tape& t, std::span<const Var>) { return t.constant(Tensor::scalar(1.0)); };
  EXPECT_EQ(grad_check(f, {}, 1e-5), 0.0);
}

TEST(GradCheck, NonFiniteObjectiveThrows) {
  const std::vector<Tensor> params{Tensor::vector({1.0})};
  const Objective f = [](ad::Tape& t, std::span<const Var> p) {
    return ad::sum(p[0] * t.constant(Tensor::vector({std::numeric_limits<double>::infinity()})));
  };
  EXPECT_THROW(grad_check(f, params, 1e-5), NumericError);
  EXPECT_THROW(grad_check(f, params, 0.0), ParameterError);
}

TEST(GradCheck, TwoLayerReluMlp) {
  const std::size_t dims[] = {3, 16, 2};
  const MlpParams mlp = init_mlp(dims, 17);
  Rng rng(2);
  const Tensor x = away_from_zero({8, 3}, rng);
  const Tensor target = random_tensor({8, 2}, rng);
  std::vector<Tensor> params{mlp.weights[0], mlp.biases[0], mlp.weights[1], mlp.biases[1]};
  const Objective f = [&](ad::Tape& t, std::span<const Var> p) {
    MlpVars vars{{p[0], p[2]}, {p[1], p[3]}};
    const Var out = mlp_forward(mlp, vars, t.constant(x));
    return ad::sum(ad::square(out - t.constant(target)));
  };
  EXPECT_LT(grad_check(f, params, 1e-5), 1e-4);
}

// Every differentiable op against central differences, over random shapes
// and values in [-2, 2].
TEST(GradCheck, EveryOpProperty) {
  using Builder = std::function<Var(ad::Tape&, std::span<const Var>)>;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const std::size_t n = 1 + rng.below(4), k = 1 + rng.below(4), m = 1 + rng.below(4);
    const Tensor a = random_tensor({n, k}, rng), b = random_tensor({k, m}, rng);
    const Tensor c = random_tensor({n, k}, rng), row = random_tensor({k}, rng);
    const Tensor w = random_tensor({n, k}, rng), wm = random_tensor({n, m}, rng);
    const Tensor kinkless = away_from_zero({n, k}, rng);

    struct Case {
      const char* name;
      std::vector<Tensor> params;
      Builder f;
    };
    const std::vector<Case> cases{
        {"matmul", {a, b}, [&](ad::Tape& t, std::span<const Var> p) {
           return ad::sum(ad::matmul(p[0], p[1]) * t.constant(wm));
         }},
        {"add_row", {a, row}, [&](ad::Tape& t, std::span<const Var> p) {
           return ad::sum(ad::add_row(p[0], p[1]) * t.constant(w));
         }},
        {"add", {a, c}, [&](ad::Tape& t, std::span<const Var> p) { return ad::sum((p[0] + p[1]) * t.constant(w)); }},
        {"sub", {a, c}, [&](ad::Tape& t, std::span<const Var> p) { return ad::sum((p[0] - p[1]) * t.constant(w)); }},
        {"mul", {a, c}, [&](ad::Tape&, std::span<const Var> p) { return ad::sum(p[0] * p[1]); }},
        {"scale", {a}, [&](ad::Tape& t, std::span<const Var> p) { return ad::sum((-1.7 * p[0]) * t.constant(w)); }},
        {"relu", {kinkless}, [&](ad::Tape& t, std::span<const Var> p) { return ad::sum(ad::relu(p[0]) * t.constant(w)); }},
        {"sigmoid", {a}, [&](ad::Tape& t, std::span<const Var> p) { return ad::sum(ad::sigmoid(p[0]) * t.constant(w)); }},
        {"square", {a}, [&](ad::Tape& t, std::span<const Var> p) { return ad::sum(ad::square(p[0]) * t.constant(w)); }},
        {"concat", {a, c}, [&](ad::Tape& t, std::span<const Var> p) {
           const std::vector<Var> parts{p[0], p[1]};
           return ad::sum(ad::square(ad::concat(parts, 1)));
         }},
    };
    for (const Case& cs : cases) {
      EXPECT_LT(grad_check(cs.f, cs.params, 1e-5), 1e-4) << cs.name << " seed " << seed;
    }
  }
}
