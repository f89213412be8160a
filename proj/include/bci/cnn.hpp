#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bci/labels.hpp"

namespace bci {

// 1-D convolutional classifier over the frequency axis, EEG channels as
// input depth:
//
//   n x [conv(filters, kernel, valid) -> batch norm -> sigmoid -> maxpool(2)]
//   -> flatten -> dense(dense_len) -> sigmoid -> dense(outputs) -> softmax
struct CnnSpec {
    int in_channels = 8;
    int in_length = 128;
    int n_convs = 2;
    int filters = 50;
    int kernel = 4;
    int pool = 2;
    int dense_len = 200;
    int outputs = static_cast<int>(kNumClasses);
    double bn_momentum = 0.9;
    double bn_eps = 1e-5;

    // Throws InvalidArgument for n_convs outside 1..4 or non-positive
    // sizes, ShapeUnderflow if a conv would see fewer samples than kernel.
    void validate() const;
    std::vector<int> conv_lengths() const;    // after each convolution
    std::vector<int> pooled_lengths() const;  // after each pool
    int flatten_len() const;
    int layer_count() const { return n_convs + 2; }

    bool operator==(const CnnSpec&) const = default;
};

struct ParamBlock {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;
    bool learnable = true;
    int layer = 0;

    bool operator==(const ParamBlock&) const = default;
};

// Parameter blocks in a fixed order: per conv block i
//   conv{i}.weight [filters, in, kernel], conv{i}.bias, bn{i}.gamma,
//   bn{i}.beta, bn{i}.running_mean, bn{i}.running_var
// then dense1.weight [dense_len, flatten], dense1.bias,
// dense2.weight [outputs, dense_len], dense2.bias.
// Layers: conv blocks 0..n-1 (conv + its batch norm), dense1 = n, dense2 = n+1.
struct CnnParams {
    std::vector<ParamBlock> blocks;
    std::vector<std::uint8_t> frozen;  // per layer

    static int conv_weight(int i) { return 6 * i; }
    static int conv_bias(int i) { return 6 * i + 1; }
    static int bn_gamma(int i) { return 6 * i + 2; }
    static int bn_beta(int i) { return 6 * i + 3; }
    static int bn_mean(int i) { return 6 * i + 4; }
    static int bn_var(int i) { return 6 * i + 5; }
    static int dense1_weight(int n) { return 6 * n; }
    static int dense1_bias(int n) { return 6 * n + 1; }
    static int dense2_weight(int n) { return 6 * n + 2; }
    static int dense2_bias(int n) { return 6 * n + 3; }

    ParamBlock& block(int i) { return blocks[static_cast<std::size_t>(i)]; }
    const ParamBlock& block(int i) const { return blocks[static_cast<std::size_t>(i)]; }
    bool is_frozen(int layer) const { return frozen[static_cast<std::size_t>(layer)] != 0; }
    std::size_t learnable_count() const;

    bool operator==(const CnnParams&) const = default;
};

// Glorot-uniform weights, zero biases, gamma 1, beta 0, running mean 0 and
// variance 1. Deterministic in seed.
CnnParams cnn_init(const CnnSpec& spec, std::uint64_t seed);
std::pair<CnnSpec, CnnParams> cnn_build(int n_convs, int dense_len,
                                        std::array<int, 2> input_shape, std::uint64_t seed,
                                        CnnSpec base = {});

enum class CnnMode { Train, Infer };

// One input is channels x length, channel-major. Returns softmax rows.
// Train mode normalizes with batch statistics (except frozen blocks, which
// always use running statistics); running statistics are not updated here.
std::vector<std::vector<double>> cnn_forward(const CnnSpec& spec, const CnnParams& params,
                                             std::span<const std::vector<double>> batch,
                                             CnnMode mode);

using CnnGradients = std::vector<std::vector<double>>;  // parallel to params.blocks

// Mean categorical cross-entropy over the batch and its gradient with
// respect to every learnable block (frozen blocks report zeros).
double cnn_loss_gradient(const CnnSpec& spec, const CnnParams& params,
                         std::span<const std::vector<double>> batch,
                         std::span<const ClassLabel> labels, CnnMode mode, CnnGradients* grads);

struct TrainConfig {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    int batch_size = 32;
    int epochs = 50;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;      // mean batch loss
    double accuracy = 0.0;  // on the training batches, train-mode forward
};

struct TrainResult {
    CnnParams params;
    std::vector<EpochStats> history;
};

// Returning false from the callback stops after that epoch.
using EpochCallback = std::function<bool(const EpochStats&, const CnnParams&)>;

// Mini-batch SGD with momentum on cross-entropy. Batches of a single
// example are skipped (batch statistics undefined). Throws
// DivergenceDetected if the loss becomes non-finite.
TrainResult cnn_train(const CnnSpec& spec, CnnParams params,
                      std::span<const std::vector<double>> inputs,
                      std::span<const ClassLabel> labels, const TrainConfig& cfg,
                      const EpochCallback& on_epoch = {});

// Freezes every conv/batch-norm block and retrains only the dense layers.
TrainResult cnn_transfer(const CnnSpec& spec, CnnParams params,
                         std::span<const std::vector<double>> inputs,
                         std::span<const ClassLabel> labels, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {});

ClassLabel argmax_label(std::span<const double> probabilities);

}  // namespace bci
