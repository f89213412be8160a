#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "bci/cnn.hpp"
#include "bci/error.hpp"
#include "bci/rng.hpp"

using namespace bci;

namespace {

CnnSpec tiny_spec() {
    CnnSpec s;
    s.in_channels = 2;
    s.in_length = 16;
    s.n_convs = 1;
    s.filters = 3;
    s.kernel = 4;
    s.dense_len = 8;
    return s;
}

std::vector<std::vector<double>> random_batch(int count, int size, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> out(static_cast<std::size_t>(count));
    for (auto& x : out) {
        x.resize(static_cast<std::size_t>(size));
        for (auto& v : x) v = rng.normal();
    }
    return out;
}

// Central differences over every learnable parameter; returns the worst
// |a - n| / max(|a|, |n|, 1e-6).
double max_gradient_error(const CnnSpec& spec, CnnParams params,
                          const std::vector<std::vector<double>>& batch,
                          const std::vector<ClassLabel>& labels, CnnMode mode) {
    CnnGradients g;
    cnn_loss_gradient(spec, params, batch, labels, mode, &g);
    const double h = 1e-4;
    double worst = 0.0;
    for (std::size_t bi = 0; bi < params.blocks.size(); ++bi) {
        if (!params.blocks[bi].learnable) continue;
        for (std::size_t q = 0; q < params.blocks[bi].data.size(); ++q) {
            const double orig = params.blocks[bi].data[q];
            params.blocks[bi].data[q] = orig + h;
            const double lp = cnn_loss_gradient(spec, params, batch, labels, mode, nullptr);
            params.blocks[bi].data[q] = orig - h;
            const double lm = cnn_loss_gradient(spec, params, batch, labels, mode, nullptr);
            params.blocks[bi].data[q] = orig;
            const double num = (lp - lm) / (2 * h);
            const double ana = g[bi][q];
            const double err = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-6});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace

TEST(CnnShapes, HandComputedChains) {
    for (int n = 1; n <= 4; ++n) {
        for (int l : {100, 200, 400, 800, 1600, 3200}) {
            auto [spec, params] = cnn_build(n, l, {8, 128}, 1);
            int len = 128;
            for (int i = 0; i < n; ++i) len = (len - 3) / 2;
            EXPECT_EQ(spec.flatten_len(), 50 * len);
            EXPECT_EQ(params.block(CnnParams::dense1_weight(n)).data.size(),
                      static_cast<std::size_t>(l) * static_cast<std::size_t>(50 * len));
        }
    }
    EXPECT_EQ(cnn_build(1, 100, {8, 128}, 1).first.flatten_len(), 3100);
    EXPECT_EQ(cnn_build(4, 100, {8, 128}, 1).first.flatten_len(), 250);
    EXPECT_EQ(cnn_build(4, 100, {8, 128}, 1).first.conv_lengths(), (std::vector<int>{125, 59, 26, 10}));
    EXPECT_EQ(cnn_build(4, 100, {8, 128}, 1).first.pooled_lengths(), (std::vector<int>{62, 29, 13, 5}));
}

TEST(CnnShapes, RejectsBadDepth) {
    try {
        cnn_build(0, 100, {8, 128}, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
    try {
        cnn_build(4, 100, {8, 16}, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ShapeUnderflow);
    }
}

TEST(CnnInit, GlorotBoundsAndDeterminism) {
    auto a = cnn_build(2, 100, {8, 128}, 7).second;
    auto b = cnn_build(2, 100, {8, 128}, 7).second;
    auto c = cnn_build(2, 100, {8, 128}, 8).second;
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    const double lim = std::sqrt(6.0 / (8 * 4 + 50 * 4));
    for (double w : a.block(0).data) EXPECT_LE(std::abs(w), lim);
    for (double v : a.block(CnnParams::conv_bias(0)).data) EXPECT_EQ(v, 0.0);
    for (double v : a.block(CnnParams::bn_gamma(1)).data) EXPECT_EQ(v, 1.0);
    for (double v : a.block(CnnParams::bn_var(1)).data) EXPECT_EQ(v, 1.0);
}

TEST(CnnForward, SoftmaxRowsSumToOne) {
    auto [spec, params] = cnn_build(2, 100, {8, 128}, 3);
    auto batch = random_batch(5, 8 * 128, 11);
    for (auto mode : {CnnMode::Train, CnnMode::Infer}) {
        for (const auto& row : cnn_forward(spec, params, batch, mode)) {
            double s = 0;
            for (double p : row) {
                EXPECT_GE(p, 0.0);
                EXPECT_LE(p, 1.0);
                s += p;
            }
            EXPECT_NEAR(s, 1.0, 1e-6);
        }
    }
    auto bad = random_batch(1, 100, 1);
    EXPECT_THROW(cnn_forward(spec, params, bad, CnnMode::Infer), Error);
}

TEST(CnnGradient, TinyNetTrainMode) {
    auto spec = tiny_spec();
    auto params = cnn_init(spec, 5);
    auto batch = random_batch(6, 2 * 16, 21);
    std::vector<ClassLabel> labels = {ClassLabel::None, ClassLabel::Left, ClassLabel::Right,
                                      ClassLabel::Both, ClassLabel::Left, ClassLabel::None};
    EXPECT_LT(max_gradient_error(spec, params, batch, labels, CnnMode::Train), 1e-4);
}

TEST(CnnGradient, TinyNetInferModeAndTwoBlocks) {
    auto spec = tiny_spec();
    spec.in_length = 24;
    spec.n_convs = 2;
    auto params = cnn_init(spec, 9);
    // non-trivial running stats and affine parameters
    Rng rng(4);
    for (int li = 0; li < 2; ++li) {
        for (auto& v : params.block(CnnParams::bn_mean(li)).data) v = rng.uniform(-0.2, 0.2);
        for (auto& v : params.block(CnnParams::bn_var(li)).data) v = rng.uniform(0.5, 2.0);
        for (auto& v : params.block(CnnParams::bn_gamma(li)).data) v = rng.uniform(0.5, 1.5);
        for (auto& v : params.block(CnnParams::conv_bias(li)).data) v = rng.uniform(-0.2, 0.2);
    }
    auto batch = random_batch(5, 2 * 24, 2);
    std::vector<ClassLabel> labels = {ClassLabel::Both, ClassLabel::Left, ClassLabel::Right,
                                      ClassLabel::None, ClassLabel::Left};
    EXPECT_LT(max_gradient_error(spec, params, batch, labels, CnnMode::Infer), 1e-4);
    EXPECT_LT(max_gradient_error(spec, params, batch, labels, CnnMode::Train), 1e-4);
}

TEST(CnnTrain, ZeroLearningRateLeavesLearnableParamsUnchanged) {
    auto spec = tiny_spec();
    auto params = cnn_init(spec, 5);
    auto x = random_batch(10, 32, 1);
    std::vector<ClassLabel> y(10, ClassLabel::Left);
    for (std::size_t i = 0; i < 5; ++i) y[i] = ClassLabel::Right;
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    auto res = cnn_train(spec, params, x, y, cfg);
    for (std::size_t i = 0; i < params.blocks.size(); ++i) {
        if (!params.blocks[i].learnable) continue;
        EXPECT_EQ(0, std::memcmp(params.blocks[i].data.data(), res.params.blocks[i].data.data(),
                                 params.blocks[i].data.size() * sizeof(double)));
    }
}

TEST(CnnTrain, OverfitsFortyExamples) {
    CnnSpec base;
    auto [spec, params] = cnn_build(1, 100, {8, 128}, 2, base);
    Rng rng(99);
    std::vector<std::vector<double>> x;
    std::vector<ClassLabel> y;
    for (int i = 0; i < 40; ++i) {
        const auto label = label_from_index(static_cast<std::size_t>(i % 4));
        std::vector<double> v(8 * 128);
        for (auto& e : v) e = 0.3 * rng.normal();
        // class signature: a raised block of bins on a class-specific channel
        for (int b = 20; b < 40; ++b) v[static_cast<std::size_t>((i % 4) * 128 + b)] += 2.0;
        x.push_back(std::move(v));
        y.push_back(label);
    }
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 200;
    cfg.batch_size = 8;
    cfg.seed = 1;
    double best = 0;
    auto res = cnn_train(spec, params, x, y, cfg, [&](const EpochStats& s, const CnnParams&) {
        best = std::max(best, s.accuracy);
        return s.accuracy < 0.95;
    });
    EXPECT_GE(res.history.back().accuracy, 0.95);
}

TEST(CnnTrain, DeterministicAndTransferFreezes) {
    auto spec = tiny_spec();
    auto params = cnn_init(spec, 5);
    auto x = random_batch(16, 32, 3);
    std::vector<ClassLabel> y;
    for (int i = 0; i < 16; ++i) y.push_back(label_from_index(static_cast<std::size_t>(i % 4)));
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 4;
    cfg.learning_rate = 0.01;
    auto a = cnn_train(spec, params, x, y, cfg);
    auto b = cnn_train(spec, params, x, y, cfg);
    EXPECT_EQ(a.params, b.params);

    auto x2 = random_batch(16, 32, 4);
    auto t = cnn_transfer(spec, a.params, x2, y, cfg);
    for (int bi = 0; bi < 6; ++bi) {
        const auto& before = a.params.block(bi).data;
        const auto& after = t.params.block(bi).data;
        EXPECT_EQ(0, std::memcmp(before.data(), after.data(), before.size() * sizeof(double)));
    }
    EXPECT_NE(a.params.block(CnnParams::dense1_weight(1)).data, t.params.block(CnnParams::dense1_weight(1)).data);
    EXPECT_NE(a.params.block(CnnParams::dense2_weight(1)).data, t.params.block(CnnParams::dense2_weight(1)).data);
}
