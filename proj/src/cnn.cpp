#include "bci/cnn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bci/error.hpp"
#include "bci/rng.hpp"

namespace bci {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Eigen::Index;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ConvCache {
    int cin = 0, lin = 0, lc = 0, lp = 0;
    bool batch_stats = false;
    std::vector<double> cols;    // B x (cin*K) x lc
    std::vector<double> xhat;    // B x F x lc
    std::vector<double> sig;     // B x F x lc
    std::vector<double> pooled;  // B x F x lp
    std::vector<int> argmax;     // B x F x lp, index into lc
    std::vector<double> mean, var, invstd;  // F
};

struct ForwardCache {
    int batch = 0;
    std::vector<ConvCache> convs;
    RowMat hidden;  // B x dense_len, post-sigmoid
    RowMat probs;   // B x outputs
    RowMat logits;
};

void forward(const CnnSpec& spec, const CnnParams& p, std::span<const std::vector<double>> batch,
             CnnMode mode, ForwardCache& fc) {
    const int B = static_cast<int>(batch.size());
    const int K = spec.kernel;
    const int F = spec.filters;
    const std::size_t in_size = static_cast<std::size_t>(spec.in_channels) * static_cast<std::size_t>(spec.in_length);
    fc.batch = B;
    fc.convs.resize(static_cast<std::size_t>(spec.n_convs));

    std::vector<double> first_input;
    first_input.reserve(in_size * static_cast<std::size_t>(B));
    for (const auto& x : batch) {
        if (x.size() != in_size) {
            raise(ErrorKind::ShapeMismatch, "CNN input has " + std::to_string(x.size()) +
                                                " values, expected " + std::to_string(in_size));
        }
        first_input.insert(first_input.end(), x.begin(), x.end());
    }

    const double* input = first_input.data();
    int cin = spec.in_channels;
    int lin = spec.in_length;
    for (int li = 0; li < spec.n_convs; ++li) {
        auto& cc = fc.convs[static_cast<std::size_t>(li)];
        cc.cin = cin;
        cc.lin = lin;
        cc.lc = lin - K + 1;
        cc.lp = cc.lc / spec.pool;
        const int lc = cc.lc;
        const int rows = cin * K;
        cc.cols.assign(static_cast<std::size_t>(B) * rows * lc, 0.0);
        std::vector<double> y(static_cast<std::size_t>(B) * F * lc);

        const CMapMat W(p.block(CnnParams::conv_weight(li)).data.data(), F, rows);
        const auto& bias = p.block(CnnParams::conv_bias(li)).data;
        for (int b = 0; b < B; ++b) {
            double* cols = cc.cols.data() + static_cast<std::size_t>(b) * rows * lc;
            const double* xb = input + static_cast<std::size_t>(b) * cin * lin;
            for (int c = 0; c < cin; ++c) {
                for (int k = 0; k < K; ++k) {
                    std::copy_n(xb + c * lin + k, lc, cols + (c * K + k) * lc);
                }
            }
            MapMat Y(y.data() + static_cast<std::size_t>(b) * F * lc, F, lc);
            Y.noalias() = W * CMapMat(cols, rows, lc);
            for (int f = 0; f < F; ++f) Y.row(f).array() += bias[static_cast<std::size_t>(f)];
        }

        // Batch norm
        cc.batch_stats = mode == CnnMode::Train && !p.is_frozen(li);
        cc.mean.assign(static_cast<std::size_t>(F), 0.0);
        cc.var.assign(static_cast<std::size_t>(F), 0.0);
        cc.invstd.assign(static_cast<std::size_t>(F), 0.0);
        if (cc.batch_stats) {
            const double m = static_cast<double>(B) * lc;
            for (int f = 0; f < F; ++f) {
                double s = 0.0;
                for (int b = 0; b < B; ++b) {
                    const double* row = y.data() + (static_cast<std::size_t>(b) * F + f) * lc;
                    for (int i = 0; i < lc; ++i) s += row[i];
                }
                const double mean = s / m;
                double v = 0.0;
                for (int b = 0; b < B; ++b) {
                    const double* row = y.data() + (static_cast<std::size_t>(b) * F + f) * lc;
                    for (int i = 0; i < lc; ++i) v += (row[i] - mean) * (row[i] - mean);
                }
                cc.mean[static_cast<std::size_t>(f)] = mean;
                cc.var[static_cast<std::size_t>(f)] = v / m;
            }
        } else {
            cc.mean = p.block(CnnParams::bn_mean(li)).data;
            cc.var = p.block(CnnParams::bn_var(li)).data;
        }
        for (int f = 0; f < F; ++f) {
            cc.invstd[static_cast<std::size_t>(f)] = 1.0 / std::sqrt(cc.var[static_cast<std::size_t>(f)] + spec.bn_eps);
        }

        const auto& gamma = p.block(CnnParams::bn_gamma(li)).data;
        const auto& beta = p.block(CnnParams::bn_beta(li)).data;
        cc.xhat.resize(y.size());
        cc.sig.resize(y.size());
        cc.pooled.resize(static_cast<std::size_t>(B) * F * cc.lp);
        cc.argmax.resize(cc.pooled.size());
        for (int b = 0; b < B; ++b) {
            for (int f = 0; f < F; ++f) {
                const std::size_t off = (static_cast<std::size_t>(b) * F + f) * lc;
                const double mu = cc.mean[static_cast<std::size_t>(f)];
                const double is = cc.invstd[static_cast<std::size_t>(f)];
                const double g = gamma[static_cast<std::size_t>(f)];
                const double bt = beta[static_cast<std::size_t>(f)];
                for (int i = 0; i < lc; ++i) {
                    const double xh = (y[off + i] - mu) * is;
                    cc.xhat[off + i] = xh;
                    cc.sig[off + i] = sigmoid(g * xh + bt);
                }
                const std::size_t poff = (static_cast<std::size_t>(b) * F + f) * cc.lp;
                for (int j = 0; j < cc.lp; ++j) {
                    int best = j * spec.pool;
                    for (int q = 1; q < spec.pool; ++q) {
                        if (cc.sig[off + j * spec.pool + q] > cc.sig[off + best]) best = j * spec.pool + q;
                    }
                    cc.pooled[poff + j] = cc.sig[off + best];
                    cc.argmax[poff + j] = best;
                }
            }
        }
        input = cc.pooled.data();
        cin = F;
        lin = cc.lp;
    }

    const int n = spec.n_convs;
    const int D = spec.flatten_len();
    const CMapMat flat(input, B, D);
    const CMapMat W1(p.block(CnnParams::dense1_weight(n)).data.data(), spec.dense_len, D);
    const Eigen::Map<const Eigen::RowVectorXd> b1(p.block(CnnParams::dense1_bias(n)).data.data(), spec.dense_len);
    fc.hidden.noalias() = flat * W1.transpose();
    fc.hidden.rowwise() += b1;
    fc.hidden = fc.hidden.unaryExpr([](double v) { return sigmoid(v); });

    const CMapMat W2(p.block(CnnParams::dense2_weight(n)).data.data(), spec.outputs, spec.dense_len);
    const Eigen::Map<const Eigen::RowVectorXd> b2(p.block(CnnParams::dense2_bias(n)).data.data(), spec.outputs);
    fc.logits.noalias() = fc.hidden * W2.transpose();
    fc.logits.rowwise() += b2;
    fc.probs.resize(B, spec.outputs);
    for (Index b = 0; b < B; ++b) {
        const double mx = fc.logits.row(b).maxCoeff();
        double z = 0.0;
        for (Index o = 0; o < spec.outputs; ++o) {
            fc.probs(b, o) = std::exp(fc.logits(b, o) - mx);
            z += fc.probs(b, o);
        }
        fc.probs.row(b) /= z;
    }
}

double batch_loss(const ForwardCache& fc, std::span<const ClassLabel> labels) {
    double loss = 0.0;
    for (Index b = 0; b < fc.batch; ++b) {
        const double mx = fc.logits.row(b).maxCoeff();
        const double lse = mx + std::log((fc.logits.row(b).array() - mx).exp().sum());
        loss += lse - fc.logits(b, static_cast<Index>(index_of(labels[static_cast<std::size_t>(b)])));
    }
    return loss / fc.batch;
}

void backward(const CnnSpec& spec, const CnnParams& p, std::span<const ClassLabel> labels,
              const ForwardCache& fc, CnnGradients& g) {
    const int B = fc.batch;
    const int n = spec.n_convs;
    const int D = spec.flatten_len();
    const int F = spec.filters;
    const int K = spec.kernel;
    g.resize(p.blocks.size());
    for (std::size_t i = 0; i < p.blocks.size(); ++i) g[i].assign(p.blocks[i].data.size(), 0.0);

    RowMat dz = fc.probs;
    for (Index b = 0; b < B; ++b) dz(b, static_cast<Index>(index_of(labels[static_cast<std::size_t>(b)]))) -= 1.0;
    dz /= static_cast<double>(B);

    if (!p.is_frozen(n + 1)) {
        MapMat(g[static_cast<std::size_t>(CnnParams::dense2_weight(n))].data(), spec.outputs, spec.dense_len)
            .noalias() = dz.transpose() * fc.hidden;
        Eigen::Map<Eigen::RowVectorXd>(g[static_cast<std::size_t>(CnnParams::dense2_bias(n))].data(), spec.outputs) =
            dz.colwise().sum();
    }
    const CMapMat W2(p.block(CnnParams::dense2_weight(n)).data.data(), spec.outputs, spec.dense_len);
    RowMat da1 = dz * W2;
    da1.array() *= fc.hidden.array() * (1.0 - fc.hidden.array());

    const double* flat_ptr = fc.convs.back().pooled.data();
    const CMapMat flat(flat_ptr, B, D);
    if (!p.is_frozen(n)) {
        MapMat(g[static_cast<std::size_t>(CnnParams::dense1_weight(n))].data(), spec.dense_len, D).noalias() =
            da1.transpose() * flat;
        Eigen::Map<Eigen::RowVectorXd>(g[static_cast<std::size_t>(CnnParams::dense1_bias(n))].data(), spec.dense_len) =
            da1.colwise().sum();
    }

    int first_trainable = n;
    for (int li = n - 1; li >= 0; --li) {
        if (!p.is_frozen(li)) first_trainable = li;
    }
    if (first_trainable == n) return;

    const CMapMat W1(p.block(CnnParams::dense1_weight(n)).data.data(), spec.dense_len, D);
    std::vector<double> dpooled(static_cast<std::size_t>(B) * D);
    MapMat(dpooled.data(), B, D).noalias() = da1 * W1;

    for (int li = n - 1; li >= 0; --li) {
        const auto& cc = fc.convs[static_cast<std::size_t>(li)];
        const int lc = cc.lc;
        const int rows = cc.cin * K;
        std::vector<double> dy(static_cast<std::size_t>(B) * F * lc, 0.0);
        // max-pool routing
        for (std::size_t q = 0; q < dpooled.size(); ++q) {
            const std::size_t bf = q / static_cast<std::size_t>(cc.lp);
            dy[bf * lc + static_cast<std::size_t>(cc.argmax[q])] += dpooled[q];
        }
        // sigmoid
        for (std::size_t q = 0; q < dy.size(); ++q) dy[q] *= cc.sig[q] * (1.0 - cc.sig[q]);

        const auto& gamma = p.block(CnnParams::bn_gamma(li)).data;
        auto& dgamma = g[static_cast<std::size_t>(CnnParams::bn_gamma(li))];
        auto& dbeta = g[static_cast<std::size_t>(CnnParams::bn_beta(li))];
        const bool frozen = p.is_frozen(li);
        const double m = static_cast<double>(B) * lc;
        for (int f = 0; f < F; ++f) {
            double sum_d = 0.0, sum_dx = 0.0;
            for (int b = 0; b < B; ++b) {
                const std::size_t off = (static_cast<std::size_t>(b) * F + f) * lc;
                for (int i = 0; i < lc; ++i) {
                    sum_d += dy[off + i];
                    sum_dx += dy[off + i] * cc.xhat[off + i];
                }
            }
            if (!frozen) {
                dgamma[static_cast<std::size_t>(f)] = sum_dx;
                dbeta[static_cast<std::size_t>(f)] = sum_d;
            }
            const double gm = gamma[static_cast<std::size_t>(f)];
            const double is = cc.invstd[static_cast<std::size_t>(f)];
            for (int b = 0; b < B; ++b) {
                const std::size_t off = (static_cast<std::size_t>(b) * F + f) * lc;
                for (int i = 0; i < lc; ++i) {
                    if (cc.batch_stats) {
                        // d/dy of gamma * (y - mean) * invstd with batch mean/var
                        dy[off + i] = gm * is / m * (m * dy[off + i] - sum_d - cc.xhat[off + i] * sum_dx);
                    } else {
                        dy[off + i] = gm * is * dy[off + i];
                    }
                }
            }
        }

        if (!frozen) {
            MapMat dW(g[static_cast<std::size_t>(CnnParams::conv_weight(li))].data(), F, rows);
            auto& db = g[static_cast<std::size_t>(CnnParams::conv_bias(li))];
            for (int b = 0; b < B; ++b) {
                const CMapMat dY(dy.data() + static_cast<std::size_t>(b) * F * lc, F, lc);
                const CMapMat cols(cc.cols.data() + static_cast<std::size_t>(b) * rows * lc, rows, lc);
                dW.noalias() += dY * cols.transpose();
                for (int f = 0; f < F; ++f) db[static_cast<std::size_t>(f)] += dY.row(f).sum();
            }
        }

        if (li - 1 < first_trainable) break;
        // Propagate into the previous block's pooled output.
        const CMapMat W(p.block(CnnParams::conv_weight(li)).data.data(), F, rows);
        std::vector<double> dinput(static_cast<std::size_t>(B) * cc.cin * cc.lin, 0.0);
        RowMat dcols(rows, lc);
        for (int b = 0; b < B; ++b) {
            const CMapMat dY(dy.data() + static_cast<std::size_t>(b) * F * lc, F, lc);
            dcols.noalias() = W.transpose() * dY;
            double* dx = dinput.data() + static_cast<std::size_t>(b) * cc.cin * cc.lin;
            for (int c = 0; c < cc.cin; ++c) {
                for (int k = 0; k < K; ++k) {
                    const double* src = dcols.data() + (c * K + k) * lc;
                    double* dst = dx + c * cc.lin + k;
                    for (int i = 0; i < lc; ++i) dst[i] += src[i];
                }
            }
        }
        dpooled = std::move(dinput);
    }
}

void glorot(std::vector<double>& w, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : w) v = rng.uniform(-limit, limit);
}

}  // namespace

// ---------------------------------------------------------------------------

void CnnSpec::validate() const {
    if (n_convs < 1 || n_convs > 4) raise(ErrorKind::InvalidArgument, "n_convs must be 1..4");
    if (in_channels < 1 || in_length < 1 || filters < 1 || kernel < 1 || pool < 1 ||
        dense_len < 1 || outputs < 2) {
        raise(ErrorKind::InvalidArgument, "CNN sizes must be positive");
    }
    if (outputs != static_cast<int>(kNumClasses)) {
        raise(ErrorKind::InvalidArgument, "CNN output layer must have 4 nodes");
    }
    int len = in_length;
    for (int i = 0; i < n_convs; ++i) {
        if (len < kernel) {
            raise(ErrorKind::ShapeUnderflow, "conv " + std::to_string(i) + " sees length " +
                                                 std::to_string(len) + " < kernel " +
                                                 std::to_string(kernel));
        }
        len = (len - kernel + 1) / pool;
        if (len < 1) raise(ErrorKind::ShapeUnderflow, "pooling leaves no samples");
    }
}

std::vector<int> CnnSpec::conv_lengths() const {
    std::vector<int> out;
    int len = in_length;
    for (int i = 0; i < n_convs; ++i) {
        out.push_back(len - kernel + 1);
        len = out.back() / pool;
    }
    return out;
}

std::vector<int> CnnSpec::pooled_lengths() const {
    std::vector<int> out;
    for (int lc : conv_lengths()) out.push_back(lc / pool);
    return out;
}

int CnnSpec::flatten_len() const { return filters * pooled_lengths().back(); }

std::size_t CnnParams::learnable_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks) {
        if (b.learnable) n += b.data.size();
    }
    return n;
}

CnnParams cnn_init(const CnnSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    CnnParams p;
    auto add = [&](std::string name, std::vector<int> shape, double fill, bool learnable, int layer) {
        std::size_t count = 1;
        for (int d : shape) count *= static_cast<std::size_t>(d);
        p.blocks.push_back(ParamBlock{std::move(name), std::move(shape),
                                      std::vector<double>(count, fill), learnable, layer});
        return &p.blocks.back();
    };
    int cin = spec.in_channels;
    for (int i = 0; i < spec.n_convs; ++i) {
        const auto s = std::to_string(i);
        auto* w = add("conv" + s + ".weight", {spec.filters, cin, spec.kernel}, 0.0, true, i);
        glorot(w->data, cin * spec.kernel, spec.filters * spec.kernel, rng);
        add("conv" + s + ".bias", {spec.filters}, 0.0, true, i);
        add("bn" + s + ".gamma", {spec.filters}, 1.0, true, i);
        add("bn" + s + ".beta", {spec.filters}, 0.0, true, i);
        add("bn" + s + ".running_mean", {spec.filters}, 0.0, false, i);
        add("bn" + s + ".running_var", {spec.filters}, 1.0, false, i);
        cin = spec.filters;
    }
    const int n = spec.n_convs;
    const int D = spec.flatten_len();
    auto* w1 = add("dense1.weight", {spec.dense_len, D}, 0.0, true, n);
    glorot(w1->data, D, spec.dense_len, rng);
    add("dense1.bias", {spec.dense_len}, 0.0, true, n);
    auto* w2 = add("dense2.weight", {spec.outputs, spec.dense_len}, 0.0, true, n + 1);
    glorot(w2->data, spec.dense_len, spec.outputs, rng);
    add("dense2.bias", {spec.outputs}, 0.0, true, n + 1);
    p.frozen.assign(static_cast<std::size_t>(spec.layer_count()), 0);
    return p;
}

std::pair<CnnSpec, CnnParams> cnn_build(int n_convs, int dense_len, std::array<int, 2> input_shape,
                                        std::uint64_t seed, CnnSpec base) {
    base.n_convs = n_convs;
    base.dense_len = dense_len;
    base.in_channels = input_shape[0];
    base.in_length = input_shape[1];
    base.validate();
    return {base, cnn_init(base, seed)};
}

std::vector<std::vector<double>> cnn_forward(const CnnSpec& spec, const CnnParams& params,
                                             std::span<const std::vector<double>> batch,
                                             CnnMode mode) {
    if (batch.empty()) return {};
    ForwardCache fc;
    forward(spec, params, batch, mode, fc);
    std::vector<std::vector<double>> out(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        out[b].resize(static_cast<std::size_t>(spec.outputs));
        for (int o = 0; o < spec.outputs; ++o) out[b][static_cast<std::size_t>(o)] = fc.probs(static_cast<Index>(b), o);
    }
    return out;
}

double cnn_loss_gradient(const CnnSpec& spec, const CnnParams& params,
                         std::span<const std::vector<double>> batch,
                         std::span<const ClassLabel> labels, CnnMode mode, CnnGradients* grads) {
    if (batch.size() != labels.size()) raise(ErrorKind::ShapeMismatch, "batch and label counts differ");
    if (batch.empty()) raise(ErrorKind::EmptyDataset, "empty batch");
    ForwardCache fc;
    forward(spec, params, batch, mode, fc);
    const double loss = batch_loss(fc, labels);
    if (grads) backward(spec, params, labels, fc, *grads);
    return loss;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        raise(ErrorKind::InvalidArgument, "learning rate must be >= 0");
    }
    if (epochs < 1) raise(ErrorKind::InvalidArgument, "epochs must be >= 1");
    if (batch_size < 2) raise(ErrorKind::InvalidArgument, "batch size must be >= 2");
    if (!(momentum >= 0.0 && momentum < 1.0)) raise(ErrorKind::InvalidArgument, "momentum must be in [0, 1)");
}

TrainResult cnn_train(const CnnSpec& spec, CnnParams params, std::span<const std::vector<double>> inputs,
                      std::span<const ClassLabel> labels, const TrainConfig& cfg,
                      const EpochCallback& on_epoch) {
    spec.validate();
    cfg.validate();
    if (inputs.empty()) raise(ErrorKind::EmptyTrainingSet, "CNN training set is empty");
    if (inputs.size() != labels.size()) raise(ErrorKind::ShapeMismatch, "input and label counts differ");

    TrainResult result;
    std::vector<std::vector<double>> velocity(params.blocks.size());
    for (std::size_t i = 0; i < params.blocks.size(); ++i) velocity[i].assign(params.blocks[i].data.size(), 0.0);

    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::vector<double>> batch;
    std::vector<ClassLabel> batch_labels;
    CnnGradients grads;
    ForwardCache fc;
    const double mom = spec.bn_momentum;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0, correct = 0, seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            if (end - start < 2) continue;
            batch.clear();
            batch_labels.clear();
            for (std::size_t j = start; j < end; ++j) {
                batch.push_back(inputs[order[j]]);
                batch_labels.push_back(labels[order[j]]);
            }
            forward(spec, params, batch, CnnMode::Train, fc);
            const double loss = batch_loss(fc, batch_labels);
            if (!std::isfinite(loss)) {
                raise(ErrorKind::DivergenceDetected, "loss became non-finite in epoch " + std::to_string(epoch));
            }
            backward(spec, params, batch_labels, fc, grads);

            for (std::size_t bi = 0; bi < params.blocks.size(); ++bi) {
                auto& blk = params.blocks[bi];
                if (!blk.learnable || params.is_frozen(blk.layer)) continue;
                auto& v = velocity[bi];
                const auto& gr = grads[bi];
                for (std::size_t q = 0; q < blk.data.size(); ++q) {
                    v[q] = cfg.momentum * v[q] - cfg.learning_rate * gr[q];
                    blk.data[q] += v[q];
                }
            }
            for (int li = 0; li < spec.n_convs; ++li) {
                const auto& cc = fc.convs[static_cast<std::size_t>(li)];
                if (!cc.batch_stats) continue;
                auto& rm = params.block(CnnParams::bn_mean(li)).data;
                auto& rv = params.block(CnnParams::bn_var(li)).data;
                for (std::size_t f = 0; f < rm.size(); ++f) {
                    rm[f] = mom * rm[f] + (1.0 - mom) * cc.mean[f];
                    rv[f] = mom * rv[f] + (1.0 - mom) * cc.var[f];
                }
            }

            loss_sum += loss;
            ++batches;
            for (Index b = 0; b < fc.batch; ++b) {
                Index arg;
                fc.probs.row(b).maxCoeff(&arg);
                if (label_from_index(static_cast<std::size_t>(arg)) == batch_labels[static_cast<std::size_t>(b)]) ++correct;
                ++seen;
            }
        }
        EpochStats st;
        st.epoch = epoch;
        st.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
        st.accuracy = seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;
        result.history.push_back(st);
        if (on_epoch && !on_epoch(st, params)) break;
    }
    result.params = std::move(params);
    return result;
}

TrainResult cnn_transfer(const CnnSpec& spec, CnnParams params, std::span<const std::vector<double>> inputs,
                         std::span<const ClassLabel> labels, const TrainConfig& cfg,
                         const EpochCallback& on_epoch) {
    for (int li = 0; li < spec.n_convs; ++li) params.frozen[static_cast<std::size_t>(li)] = 1;
    params.frozen[static_cast<std::size_t>(spec.n_convs)] = 0;
    params.frozen[static_cast<std::size_t>(spec.n_convs + 1)] = 0;
    return cnn_train(spec, std::move(params), inputs, labels, cfg, on_epoch);
}

ClassLabel argmax_label(std::span<const double> probabilities) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities.size() && i < kNumClasses; ++i) {
        if (probabilities[i] > probabilities[best]) best = i;
    }
    return label_from_index(best);
}

}  // namespace bci
