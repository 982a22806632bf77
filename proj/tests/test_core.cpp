#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "gazediff/core/adam.hpp"
#include "gazediff/core/checkpoint.hpp"
#include "gazediff/core/grad_check.hpp"
#include "gazediff/core/ops.hpp"

using namespace gazediff;

namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = dist(rng);
  return t;
}

// Reduces an op output to a scalar through a fixed random projection so that
// every output coordinate contributes a distinct weight to the loss.
Var<double> project(Var<double> y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ops::sum(ops::mul(y, y.tape().constant(random_tensor(y.shape(), rng))));
}

using UnaryCase = std::function<Var<double>(Tape<double>&, Var<double>, std::mt19937_64&)>;

void check_op_100(const Shape& shape, const UnaryCase& op, double tol = 1e-3) {
  for (int trial = 0; trial < 100; ++trial) {
    std::mt19937_64 rng(1000 + trial);
    const Tensor<double> x = random_tensor(shape, rng);
    const std::uint64_t side_seed = rng();
    const double err = grad_check(
        [&](Tape<double>& tape, Var<double> v) {
          std::mt19937_64 side(side_seed);
          return project(op(tape, v, side), side_seed + 1);
        },
        x, 1e-5);
    ASSERT_LT(err, tol) << "trial " << trial;
  }
}

}  // namespace

TEST(Primitives, SoftmaxOfZerosIsUniform) {
  Tape<double> tape;
  auto y = ops::softmax(tape.constant(Tensor<double>({3}, {0, 0, 0})));
  for (double v : y.value().data) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Primitives, SiluOfZeroIsZero) {
  Tape<double> tape;
  auto y = ops::silu(tape.constant(Tensor<double>({1}, {0.0})));
  EXPECT_EQ(y.value()[0], 0.0);
}

TEST(Primitives, IdentityKernelConvolutionIsIdentity) {
  Tape<double> tape;
  std::mt19937_64 rng(3);
  auto x = random_tensor({2, 7, 1}, rng);
  auto y = ops::conv1d(tape.constant(x), tape.constant(Tensor<double>({1, 1, 1}, {1.0})));
  EXPECT_EQ(y.value().data, x.data);
}

TEST(Primitives, ShapeMismatchReportsBothShapes) {
  Tape<double> tape;
  auto a = tape.constant(Tensor<double>({2, 3}));
  auto b = tape.constant(Tensor<double>({3, 2}));
  try {
    ops::add(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    EXPECT_NE(msg.find("[3,2]"), std::string::npos);
  }
}

TEST(Primitives, StridedConvolutionLength) {
  Tape<double> tape;
  auto x = tape.constant(Tensor<double>({1, 16, 2}, 1.0));
  auto y = ops::conv1d(x, tape.constant(Tensor<double>({3, 2, 4}, 1.0)), {}, 2, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 8, 4}));
}

TEST(GradCheck, SquareSumClosedForm) {
  Tensor<double> x({2}, {1.0, 2.0});
  Tape<double> tape;
  auto v = tape.variable(x);
  tape.backward(ops::sum(ops::mul(v, v)));
  EXPECT_NEAR(tape.grad_of(v)[0], 2.0, 1e-12);
  EXPECT_NEAR(tape.grad_of(v)[1], 4.0, 1e-12);
  EXPECT_LT(grad_check([](Tape<double>&, Var<double> z) { return ops::sum(ops::mul(z, z)); }, x), 1e-6);
}

TEST(GradCheck, LinearFunctionIsExact) {
  std::mt19937_64 rng(9);
  auto x = random_tensor({5}, rng);
  EXPECT_LT(grad_check([](Tape<double>&, Var<double> z) { return ops::sum(z); }, x), 1e-8);
}

TEST(GradCheck, NonFiniteForwardThrows) {
  Tensor<double> x({1}, {1.0});
  auto f = [](Tape<double>&, Var<double> z) { return ops::scale(ops::sum(z), std::numeric_limits<double>::infinity()); };
  EXPECT_THROW(grad_check(f, x), NumericError);
}

TEST(GradCheck, AddSubMul) {
  check_op_100({3, 4}, [](Tape<double>& t, Var<double> x, std::mt19937_64& r) {
    auto c = t.variable(random_tensor({3, 4}, r));
    return ops::mul(ops::sub(ops::add(x, c), t.constant(random_tensor({3, 4}, r))), x);
  });
}

TEST(GradCheck, Scale) {
  check_op_100({6}, [](Tape<double>&, Var<double> x, std::mt19937_64&) { return ops::scale(x, -2.5); });
}

TEST(GradCheck, AddBiasAndAddRows) {
  check_op_100({2, 3, 4}, [](Tape<double>& t, Var<double> x, std::mt19937_64& r) {
    return ops::add_rows(ops::add_bias(x, t.constant(random_tensor({4}, r))), t.constant(random_tensor({2, 4}, r)));
  });
  // gradient with respect to the broadcast operands
  check_op_100({4}, [](Tape<double>& t, Var<double> b, std::mt19937_64& r) {
    return ops::add_bias(t.constant(random_tensor({2, 3, 4}, r)), b);
  });
  check_op_100({2, 4}, [](Tape<double>& t, Var<double> v, std::mt19937_64& r) {
    return ops::add_rows(t.constant(random_tensor({2, 3, 4}, r)), v);
  });
}

TEST(GradCheck, LinearInputAndWeight) {
  check_op_100({2, 3, 4}, [](Tape<double>& t, Var<double> x, std::mt19937_64& r) {
    return ops::linear(x, t.constant(random_tensor({4, 5}, r)), t.constant(random_tensor({5}, r)));
  });
  check_op_100({4, 5}, [](Tape<double>& t, Var<double> w, std::mt19937_64& r) {
    return ops::linear(t.constant(random_tensor({2, 3, 4}, r)), w);
  });
}

TEST(GradCheck, BatchedMatmul) {
  for (bool tb : {false, true}) {
    check_op_100({2, 3, 4}, [tb](Tape<double>& t, Var<double> a, std::mt19937_64& r) {
      return ops::bmm(a, t.constant(random_tensor(tb ? Shape{2, 5, 4} : Shape{2, 4, 5}, r)), tb);
    });
    check_op_100(tb ? Shape{2, 5, 4} : Shape{2, 4, 5}, [tb](Tape<double>& t, Var<double> b, std::mt19937_64& r) {
      return ops::bmm(t.constant(random_tensor({2, 3, 4}, r)), b, tb);
    });
  }
}

TEST(GradCheck, SoftmaxSilu) {
  check_op_100({3, 5}, [](Tape<double>&, Var<double> x, std::mt19937_64&) { return ops::softmax(x); });
  check_op_100({3, 5}, [](Tape<double>&, Var<double> x, std::mt19937_64&) { return ops::silu(x); });
}

TEST(GradCheck, LayerNorm) {
  check_op_100({2, 3, 6}, [](Tape<double>& t, Var<double> x, std::mt19937_64& r) {
    return ops::layer_norm(x, t.constant(random_tensor({6}, r)), t.constant(random_tensor({6}, r)));
  });
  check_op_100({6}, [](Tape<double>& t, Var<double> g, std::mt19937_64& r) {
    return ops::layer_norm(t.constant(random_tensor({2, 3, 6}, r)), g, t.constant(random_tensor({6}, r)));
  });
  check_op_100({6}, [](Tape<double>& t, Var<double> b, std::mt19937_64& r) {
    return ops::layer_norm(t.constant(random_tensor({2, 3, 6}, r)), t.constant(random_tensor({6}, r)), b);
  });
}

TEST(GradCheck, Conv1dStrideAndPadding) {
  for (std::size_t stride : {1u, 2u}) {
    check_op_100({2, 8, 3}, [stride](Tape<double>& t, Var<double> x, std::mt19937_64& r) {
      return ops::conv1d(x, t.constant(random_tensor({3, 3, 4}, r)), t.constant(random_tensor({4}, r)), stride, 1);
    });
    check_op_100({3, 3, 4}, [stride](Tape<double>& t, Var<double> w, std::mt19937_64& r) {
      return ops::conv1d(t.constant(random_tensor({2, 8, 3}, r)), w, {}, stride, 1);
    });
  }
}

TEST(GradCheck, Resampling) {
  check_op_100({2, 4, 3}, [](Tape<double>&, Var<double> x, std::mt19937_64&) { return ops::upsample_nearest(x, 2); });
  check_op_100({2, 4, 6}, [](Tape<double>&, Var<double> x, std::mt19937_64&) {
    return ops::merge_heads(ops::split_heads(x, 3), 3);
  });
  check_op_100({2, 4, 6}, [](Tape<double>&, Var<double> x, std::mt19937_64&) { return ops::split_heads(x, 2); });
  check_op_100({6, 4, 2}, [](Tape<double>&, Var<double> x, std::mt19937_64&) { return ops::merge_heads(x, 3); });
}

TEST(GradCheck, Concatenation) {
  check_op_100({2, 4, 3}, [](Tape<double>& t, Var<double> x, std::mt19937_64& r) {
    return ops::concat_channels(x, t.variable(random_tensor({2, 4, 2}, r)));
  });
  check_op_100({2, 4, 3}, [](Tape<double>& t, Var<double> x, std::mt19937_64& r) {
    return ops::concat_sequence(t.variable(random_tensor({2, 1, 3}, r)), x);
  });
}

TEST(GradCheck, ReductionsAndGather) {
  check_op_100({4, 3}, [](Tape<double>&, Var<double> x, std::mt19937_64&) { return ops::mean(ops::mul(x, x)); });
  check_op_100({5, 3}, [](Tape<double>&, Var<double> x, std::mt19937_64&) {
    return ops::gather_rows(x, {4, 0, 0, 2});
  });
  check_op_100({3, 4}, [](Tape<double>& t, Var<double> x, std::mt19937_64& r) {
    return ops::mse(x, t.constant(random_tensor({3, 4}, r)));
  });
}

TEST(Tape, ReplayIsBitwiseIdentical) {
  std::mt19937_64 rng(5);
  auto x = random_tensor({2, 8, 3}, rng);
  auto w = random_tensor({3, 3, 4}, rng);
  auto run = [&] {
    Tape<double> tape;
    auto wv = tape.variable(w);
    auto y = ops::softmax(ops::conv1d(tape.constant(x), wv, {}, 1, 1));
    auto loss = ops::sum(ops::mul(y, y));
    tape.backward(loss);
    auto g1 = tape.grad_of(wv);
    tape.backward(loss);
    auto g2 = tape.grad_of(wv);
    EXPECT_EQ(g1.data, g2.data);
    return g1;
  };
  EXPECT_EQ(run().data, run().data);
}

TEST(Tape, NoGradModeRecordsNoBackward) {
  Tape<float> tape;
  tape.set_grad_enabled(false);
  Tensor<float> p({2}, {1.f, 2.f});
  auto v = tape.parameter(p);
  EXPECT_FALSE(ops::mul(v, v).requires_grad());
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterStore<float> store;
  store.add("w", Tensor<float>({2}, {1.f, -1.f}));
  Adam<float> adam(AdamOptions{0.1});
  std::map<std::string, Tensor<float>> g{{"w", Tensor<float>({2}, {3.f, -0.5f})}};
  adam.step(store, g);
  EXPECT_NEAR(store.at("w")[0], 0.9f, 1e-6);
  EXPECT_NEAR(store.at("w")[1], -0.9f, 1e-6);
}

TEST(Adam, MinimizesQuadratic) {
  ParameterStore<double> store;
  store.add("x", Tensor<double>({3}, {2.0, -3.0, 0.5}));
  Adam<double> adam(AdamOptions{0.05});
  for (int i = 0; i < 2000; ++i) {
    Tape<double> tape;
    BoundParameters<double> p(tape, store);
    auto x = p("x");
    tape.backward(ops::sum(ops::mul(x, x)));
    adam.step(store, p.gradients());
  }
  for (double v : store.at("x").data) EXPECT_NEAR(v, 0.0, 1e-2);
}

TEST(Checkpoint, RoundTripAndPrecisionConversion) {
  ParameterStore<float> store;
  store.add("a.weight", Tensor<float>({2, 3}, {1, 2, 3, 4, 5, 6}));
  store.add("b", Tensor<float>({1}, {-0.25f}));
  const auto bytes = encode_checkpoint(store);
  auto back = decode_checkpoint<float>(bytes);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  auto wide = decode_checkpoint<double>(bytes);
  EXPECT_EQ(wide.at("a.weight").shape, (Shape{2, 3}));
  EXPECT_DOUBLE_EQ(wide.at("b")[0], -0.25);
  // 4 magic + 4 version + 4 count + entry(4+8 name, 1 dtype, 4 rank, 16 dims, 24 data) + entry(4+1, 1, 4, 8, 4)
  EXPECT_EQ(bytes.size(), 12u + (12 + 1 + 4 + 16 + 24) + (5 + 1 + 4 + 8 + 4));
}

TEST(Checkpoint, RejectsBadMagicAndTruncation) {
  ParameterStore<float> store;
  store.add("w", Tensor<float>({4}, 1.f));
  auto bytes = encode_checkpoint(store);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint<float>(bad), FormatError);
  bytes.pop_back();
  EXPECT_THROW(decode_checkpoint<float>(bytes), FormatError);
}
