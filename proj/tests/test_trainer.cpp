#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lcnn/ensemble.hpp"
#include "lcnn/quantizer.hpp"
#include "lcnn/rng.hpp"
#include "lcnn/trainer.hpp"

namespace lcnn {
namespace {

const ArchConfig kSmall = ArchConfig::parse("4-4-8-16");

// Class c lights up mel rows [4c, 4c+4) on top of weak noise.
LabeledDataset stripes(std::size_t per_class, std::uint64_t seed) {
    Rng rng(seed);
    LabeledDataset d;
    for (std::size_t i = 0; i < per_class; ++i) {
        for (std::size_t c = 0; c < 10; ++c) {
            Tensor f(Shape{1, 40, 51});
            for (float& v : f) v = static_cast<float>(rng.uniform(-0.3, 0.3));
            for (std::size_t r = 4 * c; r < 4 * c + 4; ++r) {
                for (std::size_t t = 0; t < 51; ++t) f[r * 51 + t] += 2.0f;
            }
            d.add(std::move(f), c);
        }
    }
    return d;
}

TEST(CrossEntropy, ClosedForms) {
    const std::vector<float> uniform(10, 0.1f);
    EXPECT_NEAR(cross_entropy(uniform, 3), std::log(10.0), 1e-6);
    std::vector<float> onehot(10, 0.0f);
    onehot[7] = 1.0f;
    EXPECT_NEAR(cross_entropy(onehot, 7), 0.0, 1e-11);
    EXPECT_NEAR(cross_entropy(onehot, 2), -std::log(1e-12), 1e-9);
    EXPECT_THROW(cross_entropy(onehot, 10), InputError);
}

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
    Rng rng(1);
    Tensor p(Shape{200});
    Tensor g(Shape{200});
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
        g[i] = static_cast<float>(rng.uniform(0.01, 5.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0));
    }
    const Tensor before = p;
    Tensor m(p.shape());
    Tensor v(p.shape());
    TrainConfig cfg;
    adam_update(p, g, m, v, 1, cfg);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double step = static_cast<double>(p[i]) - before[i];
        EXPECT_NEAR(step, -cfg.learning_rate * (g[i] > 0 ? 1.0 : -1.0), 1e-6);
    }
}

TEST(Adam, MatchesReferenceOverSeveralSteps) {
    // Textbook recursion in double, written out independently.
    Rng rng(2);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    Tensor p(Shape{50});
    for (float& x : p) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    std::vector<double> ref(p.begin(), p.end());
    std::vector<double> rm(50, 0.0);
    std::vector<double> rv(50, 0.0);
    Tensor m(p.shape());
    Tensor v(p.shape());
    for (std::size_t t = 1; t <= 5; ++t) {
        Tensor g(p.shape());
        for (float& x : g) x = static_cast<float>(rng.uniform(-2.0, 2.0));
        adam_update(p, g, m, v, t, cfg);
        for (std::size_t i = 0; i < 50; ++i) {
            rm[i] = 0.9 * rm[i] + 0.1 * g[i];
            rv[i] = 0.999 * rv[i] + 0.001 * g[i] * static_cast<double>(g[i]);
            const double mh = rm[i] / (1.0 - std::pow(0.9, t));
            const double vh = rv[i] / (1.0 - std::pow(0.999, t));
            ref[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        }
    }
    for (std::size_t i = 0; i < 50; ++i) EXPECT_NEAR(p[i], ref[i], 1e-5);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    Network net = build(kSmall, 3);
    const Network before = net;
    AdamState state = make_adam_state(net);
    ParamGrads<float> zero;
    for (const auto& l : net.layers) {
        auto& g = zero.emplace_back();
        for (const auto& p : l.params) g.emplace_back(p.shape());
    }
    for (int i = 0; i < 3; ++i) adam_step(net, zero, state, TrainConfig{});
    EXPECT_EQ(net, before);
    EXPECT_EQ(state.step, 3u);
}

TEST(Adam, SkipsRunningStatistics) {
    Network net = build(kSmall, 4);
    const Network before = net;
    AdamState state = make_adam_state(net);
    ParamGrads<float> ones;
    for (const auto& l : net.layers) {
        auto& g = ones.emplace_back();
        for (const auto& p : l.params) g.emplace_back(p.shape(), 1.0f);
    }
    adam_step(net, ones, state, TrainConfig{});
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].spec.kind != LayerKind::BatchNorm) continue;
        EXPECT_EQ(net.layers[i].params[2], before.layers[i].params[2]);
        EXPECT_EQ(net.layers[i].params[3], before.layers[i].params[3]);
        EXPECT_NE(net.layers[i].params[0], before.layers[i].params[0]);
    }
}

TEST(Adam, ShapeMismatchIsStructuralError) {
    Tensor p(Shape{4});
    Tensor g(Shape{5});
    Tensor m(Shape{4});
    Tensor v(Shape{4});
    EXPECT_THROW(adam_update(p, g, m, v, 1, TrainConfig{}), StructuralError);
    Network net = build(kSmall, 5);
    AdamState state = make_adam_state(net);
    EXPECT_THROW(adam_step(net, ParamGrads<float>(3), state, TrainConfig{}), StructuralError);
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.max_epochs = 10;
    EXPECT_THROW(c.validate(), ConfigError);  // patience 50 > 10
    c.patience = 10;
    EXPECT_NO_THROW(c.validate());
}

TEST(Train, SeparableSetReachesLowLoss) {
    const LabeledDataset data = stripes(7, 6);  // 70 examples
    LabeledDataset train_set;
    for (std::size_t i = 0; i < 64; ++i) train_set.add(data.features[i], data.labels[i]);
    TrainConfig cfg;
    cfg.batch_size = 8;  // enough steps for the running statistics to settle
    cfg.max_epochs = 300;
    cfg.patience = 300;
    cfg.seed = 6;
    const TrainResult r = train(build(kSmall, 6), train_set, train_set, cfg);
    const auto best = std::min_element(r.history.begin(), r.history.end(),
                                       [](const auto& a, const auto& b) { return a.train_loss < b.train_loss; });
    EXPECT_LT(best->train_loss, 0.05);
    EXPECT_EQ(evaluate(r.network, train_set).accuracy, 100.0);
}

TEST(Train, DeterministicUnderSeed) {
    const LabeledDataset tr = stripes(3, 7);
    const LabeledDataset va = stripes(1, 8);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.max_epochs = 4;
    cfg.patience = 4;
    cfg.seed = 9;
    const TrainResult a = train(build(kSmall, 1), tr, va, cfg);
    const TrainResult b = train(build(kSmall, 1), tr, va, cfg);
    EXPECT_EQ(a.network, b.network);
    EXPECT_EQ(a.history, b.history);
    cfg.seed = 10;
    EXPECT_NE(train(build(kSmall, 1), tr, va, cfg).history, a.history);
}

TEST(Train, ReturnsTheBestEpoch) {
    const LabeledDataset tr = stripes(2, 11);
    const LabeledDataset va = stripes(1, 12);
    TrainConfig cfg;
    cfg.batch_size = 5;
    cfg.learning_rate = 0.05;  // noisy on purpose
    cfg.max_epochs = 15;
    cfg.patience = 15;
    const TrainResult r = train(build(kSmall, 2), tr, va, cfg);
    ASSERT_EQ(r.history.size(), 15u);
    for (const auto& h : r.history) EXPECT_LE(r.best_val_loss, h.val_loss);
    EXPECT_EQ(r.history[r.best_epoch - 1].val_loss, r.best_val_loss);
    // Replaying the returned weights reproduces the recorded loss.
    EXPECT_EQ(evaluate(r.network, va).log_loss, r.best_val_loss);
}

TEST(Train, ZeroPatienceStopsOneEpochAfterTheBest) {
    const LabeledDataset tr = stripes(2, 13);
    const LabeledDataset va = stripes(1, 14);
    TrainConfig cfg;
    cfg.batch_size = 5;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 40;
    cfg.patience = 0;
    const TrainResult r = train(build(kSmall, 3), tr, va, cfg);
    ASSERT_LT(r.history.size(), 40u);
    EXPECT_EQ(r.history.size(), r.best_epoch + 1);
    for (std::size_t e = 1; e < r.history.size() - 1; ++e) EXPECT_LT(r.history[e].val_loss, r.history[e - 1].val_loss);
    EXPECT_GE(r.history.back().val_loss, r.best_val_loss);
}

TEST(Train, RepeatedBatchLossFallsOverWindows) {
    const LabeledDataset batch = stripes(2, 15);
    TrainConfig cfg;
    cfg.batch_size = 20;
    cfg.max_epochs = 60;
    cfg.patience = 60;
    const TrainResult r = train(build(kSmall, 4), batch, batch, cfg);
    ASSERT_EQ(r.history.size(), 60u);
    double previous = INFINITY;
    for (std::size_t w = 0; w < 6; ++w) {
        double sum = 0.0;
        for (std::size_t e = 10 * w; e < 10 * w + 10; ++e) sum += r.history[e].train_loss;
        EXPECT_LE(sum / 10.0, previous) << "window " << w;
        previous = sum / 10.0;
    }
}

TEST(Train, RunningStatisticsTrackBatches) {
    const LabeledDataset tr = stripes(2, 16);
    TrainConfig cfg;
    cfg.batch_size = 20;
    cfg.max_epochs = 1;
    cfg.patience = 0;
    cfg.learning_rate = 1e-12;
    const Network init = build(kSmall, 5);
    const TrainResult r = train(init, tr, tr, cfg);
    // One step from mean 0, var 1: running = 0.99 * old + 0.01 * batch.
    Trace<float> trace;
    run_forward<float>(init.layers, tr.batch(0, 20), Mode::Training, &trace);
    const std::size_t bn = init.layer_index("C1.bn");
    ASSERT_EQ(tr.size(), 20u);
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_NEAR(r.network.layers[bn].params[2][c], 0.01 * trace.layers[bn].batch_norm.batch_mean[c], 1e-6);
        EXPECT_NEAR(r.network.layers[bn].params[3][c], 0.99 + 0.01 * trace.layers[bn].batch_norm.batch_var[c], 1e-6);
    }
}

TEST(Finetune, ZeroEpochsReturnsInput) {
    const Network net = build(kSmall, 6);
    TrainConfig cfg;
    cfg.max_epochs = 0;
    cfg.patience = 0;
    const TrainResult r = finetune(net, LabeledDataset{}, LabeledDataset{}, cfg);
    EXPECT_EQ(r.network, net);
    EXPECT_TRUE(r.history.empty());
    EXPECT_EQ(r.best_epoch, 0u);
}

TEST(Train, InputErrors) {
    const LabeledDataset d = stripes(1, 17);
    TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.patience = 1;
    EXPECT_THROW(train(build(kSmall, 1), LabeledDataset{}, d, cfg), InputError);
    EXPECT_THROW(train(build(kSmall, 1), d, LabeledDataset{}, cfg), InputError);
    EXPECT_THROW(train(quantize_model(build(kSmall, 1)), d, d, cfg), PrecisionError);
}

TEST(History, CsvLayout) {
    const std::vector<EpochRecord> h = {{1, 2.5, 2.25, 10.0}, {2, 1.5, 2.0, 20.0}};
    EXPECT_EQ(format_history(h), "epoch,train_loss,val_loss,val_acc\n1,2.5,2.25,10\n2,1.5,2,20\n");
}

}  // namespace
}  // namespace lcnn
