#include "spectrain/network.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "grad_oracle.hpp"

using spectrain::LabeledDataset;
using spectrain::Matrix;
using spectrain::MlpParams;
using spectrain::MlpSpec;
using spectrain::OptimizerKind;

namespace {

MlpParams random_params(const MlpSpec& spec, std::uint64_t seed) {
  return spectrain::init_normal_xavier(spec, 1.0, seed);
}

LabeledDataset tiny_dataset(std::size_t n, std::size_t d, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  LabeledDataset ds;
  ds.features = Matrix(n, d);
  for (double& v : ds.features.data()) v = dist(rng);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(i % k);
  ds.num_classes = k;
  return ds;
}

}  // namespace

TEST(Init, EmpiricalStdMatchesGlorot) {
  MlpSpec spec{256, {256}, 2};
  MlpParams p = spectrain::init_normal_xavier(spec, 1.0, 5);
  const Matrix& w = p.weights[0];
  double sum = 0.0, sum_sq = 0.0;
  for (double v : w.data()) {
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(w.size());
  const double std_dev = std::sqrt(sum_sq / n - (sum / n) * (sum / n));
  const double target = std::sqrt(2.0 / 512.0);
  EXPECT_NEAR(std_dev, target, 0.05 * target);
}

TEST(Init, ScaleActsLinearlyOnSharedDraws) {
  MlpSpec spec{4, {3}, 2};
  MlpParams a = spectrain::init_normal_xavier(spec, 1.0, 77);
  MlpParams b = spectrain::init_normal_xavier(spec, 10.0, 77);
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    for (std::size_t i = 0; i < a.weights[l].size(); ++i) {
      EXPECT_DOUBLE_EQ(b.weights[l].data()[i], 10.0 * a.weights[l].data()[i]);
    }
  }
}

TEST(Init, BiasesAreZero) {
  MlpParams p = spectrain::init_normal_xavier(MlpSpec{4, {3, 3}, 2}, 2.0, 1);
  for (const auto& bias : p.biases) {
    for (double v : bias) EXPECT_EQ(v, 0.0);
  }
}

TEST(Init, RejectsNonPositiveScale) {
  EXPECT_THROW(spectrain::init_normal_xavier(MlpSpec{4, {3}, 2}, 0.0, 1),
               std::invalid_argument);
  EXPECT_THROW(spectrain::init_normal_xavier(MlpSpec{4, {3}, 2}, -1.0, 1),
               std::invalid_argument);
}

TEST(Forward, ZeroNetIsZero) {
  MlpParams p;
  p.weights = {Matrix(3, 4), Matrix(2, 3)};
  p.biases = {std::vector<double>(3, 0.0), std::vector<double>(2, 0.0)};
  Matrix x(5, 4, 0.5);
  auto fwd = spectrain::forward(p, x);
  for (double v : fwd.hidden[0].data()) EXPECT_EQ(v, 0.0);
  for (double v : fwd.logits.data()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, IdentityLayerOnNonNegativeInput) {
  MlpParams p;
  p.weights = {Matrix::identity(3), Matrix(2, 3)};
  p.biases = {std::vector<double>(3, 0.0), std::vector<double>(2, 0.0)};
  Matrix x = Matrix::from_rows({{0.0, 1.0, 2.0}, {3.0, 0.5, 0.0}});
  auto fwd = spectrain::forward(p, x);
  EXPECT_EQ(fwd.hidden[0], x);
}

TEST(Forward, HandEvaluatedTwoTwoTwo) {
  MlpParams p;
  p.weights = {Matrix::from_rows({{1.0, -1.0}, {0.5, 0.5}}),
               Matrix::from_rows({{1.0, 0.0}, {-1.0, 2.0}})};
  p.biases = {{0.25, -0.25}, {0.0, 1.0}};
  Matrix x = Matrix::from_rows({{1.0, 2.0}});
  auto fwd = spectrain::forward(p, x);
  // pre-activations: (1-2+0.25, 0.5+1-0.25) = (-0.75, 1.25) -> relu (0, 1.25)
  EXPECT_DOUBLE_EQ(fwd.hidden[0](0, 0), 0.0);
  EXPECT_DOUBLE_EQ(fwd.hidden[0](0, 1), 1.25);
  // logits: (0*1 + 1.25*0, 0*-1 + 1.25*2 + 1) = (0, 3.5)
  EXPECT_DOUBLE_EQ(fwd.logits(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(fwd.logits(0, 1), 3.5);
}

TEST(Forward, DimensionMismatchThrows) {
  MlpParams p = random_params(MlpSpec{4, {3}, 2}, 3);
  EXPECT_THROW(spectrain::forward(p, Matrix(2, 5)), std::invalid_argument);
}

TEST(Loss, UniformSoftmaxIsLogK) {
  MlpParams p;
  p.weights = {Matrix(3, 4), Matrix(2, 3)};
  p.biases = {std::vector<double>(3, 0.0), std::vector<double>(2, 0.0)};
  Matrix x(6, 4, 1.0);
  std::vector<int> labels(6, 1);
  auto lg = spectrain::loss_and_grads(p, x, labels);
  EXPECT_NEAR(lg.loss, std::log(2.0), 1e-12);
}

TEST(Loss, GradMatchesFiniteDifferences) {
  MlpSpec spec{4, {3}, 2};
  MlpParams p = random_params(spec, 11);
  LabeledDataset ds = tiny_dataset(8, 4, 2, 12);
  auto lg = spectrain::loss_and_grads(p, ds.features, ds.labels);
  auto fd = oracle::fd_gradients(p, ds.features, ds.labels);
  double worst = 0.0;
  EXPECT_TRUE(oracle::gradients_close(lg.grads, fd, 1e-4, 1e-7, &worst)) << worst;
}

TEST(Loss, DuplicatingSamplesChangesNothing) {
  MlpSpec spec{4, {3}, 2};
  MlpParams p = random_params(spec, 13);
  LabeledDataset ds = tiny_dataset(4, 4, 2, 14);
  Matrix doubled(8, 4);
  std::vector<int> doubled_labels(8);
  for (std::size_t i = 0; i < 8; ++i) {
    auto src = ds.features.row(i % 4);
    std::copy(src.begin(), src.end(), doubled.row(i).begin());
    doubled_labels[i] = ds.labels[i % 4];
  }
  auto a = spectrain::loss_and_grads(p, ds.features, ds.labels);
  auto b = spectrain::loss_and_grads(p, doubled, doubled_labels);
  EXPECT_NEAR(a.loss, b.loss, 1e-12);
  for (std::size_t l = 0; l < a.grads.weights.size(); ++l) {
    for (std::size_t i = 0; i < a.grads.weights[l].size(); ++i) {
      EXPECT_NEAR(a.grads.weights[l].data()[i], b.grads.weights[l].data()[i], 1e-12);
    }
  }
}

TEST(Loss, LabelOutOfRangeThrows) {
  MlpParams p = random_params(MlpSpec{4, {3}, 2}, 15);
  Matrix x(2, 4, 0.1);
  EXPECT_THROW(spectrain::loss_and_grads(p, x, {0, 2}), std::invalid_argument);
}

TEST(Optimizer, SgdStep) {
  MlpParams p;
  p.weights = {Matrix(1, 1, 1.0)};
  p.biases = {std::vector<double>{0.0}};
  MlpParams g;
  g.weights = {Matrix(1, 1, 2.0)};
  g.biases = {std::vector<double>{0.0}};
  auto st = spectrain::make_optimizer(OptimizerKind::Sgd, 0.1, p);
  spectrain::optimizer_apply(st, p, g);
  EXPECT_DOUBLE_EQ(p.weights[0](0, 0), 0.8);
  EXPECT_EQ(st.step, 1);
}

TEST(Optimizer, AdamFirstStep) {
  MlpParams p;
  p.weights = {Matrix(1, 1, 0.0)};
  p.biases = {std::vector<double>{0.0}};
  MlpParams g;
  g.weights = {Matrix(1, 1, 1.0)};
  g.biases = {std::vector<double>{0.0}};
  auto st = spectrain::make_optimizer(OptimizerKind::Adam, 1e-4, p);
  spectrain::optimizer_apply(st, p, g);
  // Bias-corrected first step: m_hat = v_hat = 1, so theta = -lr / (1 + eps).
  EXPECT_NEAR(p.weights[0](0, 0), -1e-4 / (1.0 + 1e-8), 1e-18);
}

TEST(Optimizer, RmsPropFirstStep) {
  MlpParams p;
  p.weights = {Matrix(1, 1, 0.0)};
  p.biases = {std::vector<double>{0.0}};
  MlpParams g;
  g.weights = {Matrix(1, 1, 1.0)};
  g.biases = {std::vector<double>{0.0}};
  auto st = spectrain::make_optimizer(OptimizerKind::RmsProp, 1e-3, p);
  spectrain::optimizer_apply(st, p, g);
  EXPECT_NEAR(p.weights[0](0, 0), -1e-3 / (std::sqrt(0.1) + 1e-8), 1e-15);
}

TEST(TrainEpoch, ZeroLearningRateLeavesParams) {
  MlpSpec spec{4, {3}, 2};
  MlpParams p = random_params(spec, 21);
  MlpParams before = p;
  LabeledDataset ds = tiny_dataset(10, 4, 2, 22);
  auto st = spectrain::make_optimizer(OptimizerKind::Sgd, 0.0, p);
  spectrain::BatchSchedule schedule{3, 5};
  const double epoch_loss = spectrain::train_epoch(p, st, ds, schedule, 0);
  EXPECT_EQ(p, before);
  EXPECT_NEAR(epoch_loss, spectrain::evaluate_loss(p, ds.features, ds.labels), 1e-12);
}

TEST(TrainEpoch, SingleBatchEqualsOneStep) {
  MlpSpec spec{4, {3}, 2};
  MlpParams p = random_params(spec, 31);
  LabeledDataset ds = tiny_dataset(6, 4, 2, 32);
  spectrain::BatchSchedule schedule{6, 5};

  MlpParams manual = p;
  auto manual_state = spectrain::make_optimizer(OptimizerKind::Adam, 1e-3, manual);
  auto order = schedule.epoch_order(ds.size(), 0);
  Matrix x(6, 4);
  std::vector<int> labels(6);
  for (std::size_t i = 0; i < 6; ++i) {
    auto src = ds.features.row(order[i]);
    std::copy(src.begin(), src.end(), x.row(i).begin());
    labels[i] = ds.labels[order[i]];
  }
  auto lg = spectrain::loss_and_grads(manual, x, labels);
  spectrain::optimizer_apply(manual_state, manual, lg.grads);

  auto st = spectrain::make_optimizer(OptimizerKind::Adam, 1e-3, p);
  const double epoch_loss = spectrain::train_epoch(p, st, ds, schedule, 0);
  EXPECT_EQ(p, manual);
  EXPECT_NEAR(epoch_loss, lg.loss, 1e-15);
}

TEST(TrainEpoch, BitIdenticalAcrossReruns) {
  MlpSpec spec{6, {5, 4}, 2};
  LabeledDataset ds = tiny_dataset(32, 6, 2, 41);
  spectrain::BatchSchedule schedule{8, 17};

  auto run = [&]() {
    MlpParams p = random_params(spec, 42);
    auto st = spectrain::make_optimizer(OptimizerKind::RmsProp, 1e-3, p);
    for (std::size_t epoch = 0; epoch < 3; ++epoch) {
      spectrain::train_epoch(p, st, ds, schedule, epoch);
    }
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(Accuracy, PerfectAndTieAndHand) {
  LabeledDataset ds = tiny_dataset(4, 3, 2, 51);
  ds.labels = {0, 1, 0, 1};

  // Zero net: all logits equal, argmax tie -> class 0, half the data.
  MlpParams zero;
  zero.weights = {Matrix(3, 3), Matrix(2, 3)};
  zero.biases = {std::vector<double>(3, 0.0), std::vector<double>(2, 0.0)};
  EXPECT_DOUBLE_EQ(spectrain::accuracy(zero, ds), 0.5);

  // Bias-only net scoring class by sign: 2 of 3 correct.
  LabeledDataset three = tiny_dataset(3, 2, 2, 52);
  three.labels = {1, 1, 0};
  MlpParams biased;
  biased.weights = {Matrix(2, 2), Matrix(2, 2)};
  biased.biases = {std::vector<double>(2, 0.0), std::vector<double>{0.0, 1.0}};
  EXPECT_NEAR(spectrain::accuracy(biased, three), 2.0 / 3.0, 1e-15);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  MlpParams p = random_params(MlpSpec{5, {4, 3}, 2}, 61);
  const auto path = std::filesystem::temp_directory_path() / "spectrain_params.bin";
  spectrain::save_params(p, path.string());
  MlpParams back = spectrain::load_params(path.string());
  EXPECT_EQ(p, back);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsBadMagic) {
  const auto path = std::filesystem::temp_directory_path() / "spectrain_badmagic.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTAMODL";
  }
  EXPECT_THROW(spectrain::load_params(path.string()), std::runtime_error);
  std::filesystem::remove(path);
}
