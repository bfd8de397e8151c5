#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

#include "atlab/network.hpp"

using namespace atlab;
using namespace testutil;

TEST_CASE("FC-2 preset matches the reference stack at 1x28x28") {
  const NetworkModel m = build_architecture("FC-2", {1, 28, 28}, 10, 7);
  // Flatten, Dense(784,500), ReLU, Dense(500,10)
  REQUIRE(m.layers().size() == 4);
  const auto* d1 = std::get_if<DenseSpec>(&m.layers()[1]);
  const auto* d2 = std::get_if<DenseSpec>(&m.layers()[3]);
  REQUIRE(d1 != nullptr);
  REQUIRE(d2 != nullptr);
  CHECK(d1->in == 784);
  CHECK(d1->out == 500);
  CHECK(std::holds_alternative<ReluSpec>(m.layers()[2]));
  CHECK(d2->in == 500);
  CHECK(d2->out == 10);
}

TEST_CASE("Conv-2 preset flattens to 9216 units at 1x28x28") {
  const NetworkModel m = build_architecture("Conv-2", {1, 28, 28}, 10, 7);
  bool found = false;
  for (const auto& l : m.layers()) {
    if (const auto* d = std::get_if<DenseSpec>(&l)) {
      if (d->out == 128) {
        CHECK(d->in == 9216);
        found = true;
      }
    }
  }
  CHECK(found);
}

TEST_CASE("same seed builds bitwise-identical parameters") {
  const NetworkModel a = build_architecture("FC-2", {1, 28, 28}, 10, 7);
  const NetworkModel b = build_architecture("FC-2", {1, 28, 28}, 10, 7);
  const NetworkModel c = build_architecture("FC-2", {1, 28, 28}, 10, 8);
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    CHECK((a.params()[i].weight == b.params()[i].weight).all());
    CHECK((a.params()[i].bias == b.params()[i].bias).all());
  }
  CHECK_FALSE((a.params()[1].weight == c.params()[1].weight).all());
}

TEST_CASE("custom stack parameter count") {
  const NetworkModel m =
      build_architecture(std::vector<LayerSpec>{DenseSpec{4, 3}, ReluSpec{}, DenseSpec{3, 2}},
                         {4}, 2, 1);
  CHECK(m.param_count() == 23);  // 3*4+3 + 2*3+2
}

TEST_CASE("build errors: unknown preset, non-composing shapes") {
  CHECK_THROWS_AS(build_architecture("FC-3", {1, 28, 28}, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_architecture(std::vector<LayerSpec>{DenseSpec{4, 3}, DenseSpec{4, 2}},
                                     {4}, 2, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_architecture(std::vector<LayerSpec>{DenseSpec{4, 3}}, {4}, 10, 1),
                  std::invalid_argument);  // output != num_classes
}

TEST_CASE("forward: zero final layer gives zero logits") {
  NetworkModel m({DenseSpec{3, 2}}, {3}, 2);
  const Tensor batch = random_tensor({5, 3}, 11);
  const Tensor logits = forward(m, batch);
  CHECK(logits.data.abs().maxCoeff() == 0.0);
}

TEST_CASE("forward: identity dense maps input to logits") {
  NetworkModel m({DenseSpec{2, 2}}, {2}, 2);
  m.params()[0].weight[0] = 1.0;  // W = I, row-major [in,out]
  m.params()[0].weight[3] = 1.0;
  const Tensor batch = make_tensor({1, 2}, {1.0, 2.0});
  const Tensor logits = forward(m, batch);
  CHECK(logits.data[0] == doctest::Approx(1.0));
  CHECK(logits.data[1] == doctest::Approx(2.0));
}

TEST_CASE("forward matches an independent dense reference") {
  NetworkModel m({DenseSpec{6, 5}, ReluSpec{}, DenseSpec{5, 3}}, {6}, 3);
  m.init_parameters(21);
  const Tensor batch = random_tensor({4, 6}, 22, -1.0, 1.0);
  const Tensor logits = forward(m, batch);
  for (Index i = 0; i < 4; ++i) {
    const ArrayX want = reference_dense_forward(m.layers(), m.params(), ArrayX(batch.row(i)));
    const ArrayX got = logits.row(i);
    CHECK(max_rel_err(got, want, 1e-9) < 1e-12);
  }
}

TEST_CASE("forward rejects shape mismatches") {
  NetworkModel m({DenseSpec{3, 2}}, {3}, 2);
  CHECK_THROWS_AS(forward(m, random_tensor({2, 4}, 1)), std::invalid_argument);
}

TEST_CASE("uniform logits lose ln(C)") {
  NetworkModel m({DenseSpec{4, 10}}, {4}, 10);  // zero weights: logits all equal
  const Tensor batch = random_tensor({3, 4}, 5);
  const auto lg = loss_and_grads(m, batch, {0, 5, 9}, Wrt::Params);
  CHECK(lg.loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("near-perfect logits drive the loss to zero") {
  NetworkModel m({DenseSpec{1, 2}}, {1}, 2);
  m.params()[0].bias[0] = 100.0;  // label 0 wins by a huge margin
  const auto lg = loss_and_grads(m, make_tensor({1, 1}, {0.3}), {0}, Wrt::Params);
  CHECK(lg.loss < 1e-9);
}

TEST_CASE("invalid labels are rejected") {
  NetworkModel m({DenseSpec{2, 3}}, {2}, 3);
  CHECK_THROWS_AS(loss_and_grads(m, random_tensor({1, 2}, 1), {3}, Wrt::Both),
                  std::invalid_argument);
}

TEST_CASE("softmax rows sum to one") {
  const Tensor logits = random_tensor({40, 7}, 31, -30.0, 30.0);
  const Tensor p = softmax(logits);
  auto M = p.mat(40, 7);
  for (Index i = 0; i < 40; ++i) CHECK(std::abs(M.row(i).sum() - 1.0) < 1e-9);
}

TEST_CASE("input gradient matches central finite differences") {
  NetworkModel m({DenseSpec{8, 6}, ReluSpec{}, DenseSpec{6, 3}}, {8}, 3);
  m.init_parameters(41);
  const Tensor batch = random_tensor({3, 8}, 42, -0.8, 0.8);
  const std::vector<int> labels{0, 2, 1};
  const auto lg = loss_and_grads(m, batch, labels, Wrt::Input);
  const Tensor fd = fd_input_gradient(m, batch, labels);
  CHECK(max_rel_err(lg.grads.input.data, fd.data) < 1e-4);
}

TEST_CASE("parameter gradients match central finite differences, conv+pool included") {
  NetworkModel m({Conv2dSpec{1, 3, 3, 1}, ReluSpec{}, MaxPool2x2Spec{}, FlattenSpec{},
                  DenseSpec{12, 4}},
                 {1, 6, 6}, 4);
  m.init_parameters(51);
  const Tensor batch = random_tensor({2, 1, 6, 6}, 52, 0.1, 0.9);
  const std::vector<int> labels{1, 3};
  const auto lg = loss_and_grads(m, batch, labels, Wrt::Both);
  const Tensor fd_in = fd_input_gradient(m, batch, labels);
  CHECK(max_rel_err(lg.grads.input.data, fd_in.data) < 1e-4);
  const auto fd_p = fd_param_gradients(m, batch, labels);
  for (std::size_t li = 0; li < fd_p.size(); ++li) {
    if (fd_p[li].weight.size())
      CHECK(max_rel_err(lg.grads.params[li].weight, fd_p[li].weight) < 1e-4);
    if (fd_p[li].bias.size())
      CHECK(max_rel_err(lg.grads.params[li].bias, fd_p[li].bias) < 1e-4);
  }
}

TEST_CASE("conv with stride composes and differentiates") {
  NetworkModel m({Conv2dSpec{2, 2, 3, 2}, FlattenSpec{}, DenseSpec{8, 2}}, {2, 7, 7}, 2);
  m.init_parameters(61);
  const Tensor batch = random_tensor({2, 2, 7, 7}, 62, 0.1, 0.9);
  const std::vector<int> labels{0, 1};
  const auto lg = loss_and_grads(m, batch, labels, Wrt::Both);
  const Tensor fd = fd_input_gradient(m, batch, labels);
  CHECK(max_rel_err(lg.grads.input.data, fd.data) < 1e-4);
}

TEST_CASE("dropout is the identity in Eval mode") {
  NetworkModel m({DropoutSpec{0.5}, DenseSpec{6, 2}}, {6}, 2);
  m.init_parameters(71);
  m.set_mode(Mode::Eval);
  const Tensor batch = random_tensor({4, 6}, 72);
  const Tensor a = forward(m, batch);
  const Tensor b = forward(m, batch);
  CHECK((a.data == b.data).all());
}

TEST_CASE("train-mode dropout preserves the mean via inverted scaling") {
  NetworkModel m({DropoutSpec{0.3}, DenseSpec{1, 2}}, {1}, 2);
  m.params()[0 + 1].weight[0] = 1.0;  // logit0 = dropout(x)
  m.set_mode(Mode::Train);
  m.seed_rng(1234);
  const Tensor batch = make_tensor({1, 1}, {1.0});
  const int passes = 20000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < passes; ++i) {
    const double v = forward(m, batch).data[0];
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / passes;
  const double var = sumsq / passes - mean * mean;
  const double stderr_ = std::sqrt(var / passes);
  CHECK(std::abs(mean - 1.0) < 3.0 * stderr_);
}

TEST_CASE("predict: argmax with lowest-index ties") {
  NetworkModel m({DenseSpec{3, 3}}, {3}, 3);
  m.params()[0].weight[0] = 0.1;  // logits = x (identity on 3 dims)
  m.params()[0].weight[4] = 0.1;
  m.params()[0].weight[8] = 0.1;
  CHECK(predict(m, make_tensor({1, 3}, {0.1, 0.9, 0.0}))[0] == 1);
  CHECK(predict(m, make_tensor({1, 3}, {0.5, 0.5, 0.0}))[0] == 0);
}

TEST_CASE("predict is deterministic even when the model sits in Train mode") {
  NetworkModel m({DropoutSpec{0.5}, DenseSpec{4, 2}}, {4}, 2);
  m.init_parameters(81);
  m.set_mode(Mode::Train);
  const Tensor batch = random_tensor({6, 4}, 82);
  const auto a = predict(m, batch);
  const auto b = predict(m, batch);
  CHECK(a == b);
}
