#include "doctest.h"

#include "tspipe/recurrent_net.hpp"

#include <random>

using namespace tspipe;

namespace {

SequenceBatch<double> random_batch(std::mt19937_64& rng, Index batch, Index steps, Index in, Index out, Task task) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SequenceBatch<double> b;
  for (Index t = 0; t < steps; ++t) {
    b.inputs.push_back(Matrix::NullaryExpr(batch, in, [&] { return g(rng); }));
    b.targets.push_back(Matrix::NullaryExpr(batch, out, [&] {
      return task == Task::Classification ? (u(rng) < 0.5 ? 0.0 : 1.0) : g(rng);
    }));
    b.weights.push_back(Matrix::NullaryExpr(batch, out, [&] { return u(rng) < 0.2 ? 0.0 : 1.0; }));
  }
  return b;
}

/// Largest relative error between analytic and central-difference gradients.
double gradient_error(CellType cell, Index hidden, Index layers, Index steps, Task task, std::uint64_t seed,
                      bool with_initial) {
  std::mt19937_64 rng(seed);
  const Index in = 3, out = 2, batch = 4;
  RecurrentNet net(cell, in, hidden, layers, out, seed);
  auto b = random_batch(rng, batch, steps, in, out, task);
  if (with_initial) {
    std::normal_distribution<double> g(0.0, 0.5);
    for (Index l = 0; l < net.layers(); ++l) b.initial.push_back(Matrix::NullaryExpr(batch, hidden, [&] { return g(rng); }));
  }
  const double ridge = 0.05;
  auto grads = net.zeros_like();
  masked_loss(net, b, task, ridge, &grads);
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t p = 0; p < net.parameters().size(); ++p) {
    for (Index k = 0; k < net.parameters()[p].size(); ++k) {
      double& w = net.parameters()[p].data()[k];
      const double keep = w;
      w = keep + h;
      const double up = masked_loss<double>(net, b, task, ridge, nullptr);
      w = keep - h;
      const double down = masked_loss<double>(net, b, task, ridge, nullptr);
      w = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[p].data()[k];
      const double err = std::abs(numeric - analytic) / std::max(1e-3, std::abs(numeric) + std::abs(analytic));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  for (auto cell : {CellType::Linear, CellType::Rnn, CellType::Gru}) {
    for (auto task : {Task::Classification, Task::Regression}) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const double err = gradient_error(cell, 5, 2, 4, task, seed, seed == 2);
        CHECK_MESSAGE(err <= 1e-4, "cell " << static_cast<int>(cell) << " seed " << seed << " err " << err);
      }
    }
  }
}

TEST_CASE("network construction is deterministic in the seed") {
  RecurrentNet a(CellType::Gru, 3, 4, 1, 1, 5), b(CellType::Gru, 3, 4, 1, 1, 5), c(CellType::Gru, 3, 4, 1, 1, 6);
  CHECK(a.parameters()[0] == b.parameters()[0]);
  CHECK(a.parameters()[0] != c.parameters()[0]);
  CHECK(a.parameter_names() == std::vector<std::string>{"W0", "U0", "b0", "Wo", "bo"});
}

TEST_CASE("adam reduces a regression loss") {
  std::mt19937_64 rng(4);
  RecurrentNet net(CellType::Gru, 3, 6, 1, 1, 4);
  auto b = random_batch(rng, 16, 5, 3, 1, Task::Regression);
  for (auto& t : b.targets) t = b.inputs[&t - &b.targets[0]].col(0);
  AdamOptimizer<double> opt(net.parameters(), 0.01);
  const double start = masked_loss<double>(net, b, Task::Regression, 0.0, nullptr);
  for (int it = 0; it < 200; ++it) {
    auto g = net.zeros_like();
    masked_loss(net, b, Task::Regression, 0.0, &g);
    opt.step(net.parameters(), g);
  }
  CHECK(masked_loss<double>(net, b, Task::Regression, 0.0, nullptr) < 0.2 * start);
}
