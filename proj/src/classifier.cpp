#include "bci/classifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>

#include "bci/binary_io.hpp"
#include "bci/error.hpp"
#include "bci/json_io.hpp"
#include "bci/rng.hpp"

namespace bci {

using nlohmann::json;

namespace {

constexpr char kModelMagic[4] = {'B', 'C', 'I', 'M'};

enum class DType : std::uint8_t { F32 = 0, F64 = 1, U8 = 2, U32 = 3 };

struct Block {
    std::string name;
    DType dtype = DType::F64;
    std::vector<std::uint32_t> dims;
    std::vector<double> f64;
    std::vector<std::uint8_t> u8;
    std::vector<std::uint32_t> u32;

    std::size_t count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

Block f64_block(std::string name, std::vector<std::uint32_t> dims, std::vector<double> data) {
    Block b;
    b.name = std::move(name);
    b.dims = std::move(dims);
    b.f64 = std::move(data);
    return b;
}

Block u8_block(std::string name, std::vector<std::uint8_t> data) {
    Block b;
    b.name = std::move(name);
    b.dtype = DType::U8;
    b.dims = {static_cast<std::uint32_t>(data.size())};
    b.u8 = std::move(data);
    return b;
}

Block u32_block(std::string name, std::vector<std::uint32_t> data) {
    Block b;
    b.name = std::move(name);
    b.dtype = DType::U32;
    b.dims = {static_cast<std::uint32_t>(data.size())};
    b.u32 = std::move(data);
    return b;
}

std::vector<double> to_vector(const Eigen::MatrixXd& m) {
    // row-major
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[i++] = m(r, c);
    }
    return out;
}

Eigen::MatrixXd to_matrix(const Block& b) {
    if (b.dims.size() != 2 || b.dtype != DType::F64) raise(ErrorKind::CorruptFile, "block " + b.name + " is not a matrix");
    Eigen::MatrixXd m(b.dims[0], b.dims[1]);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = b.f64[i++];
    }
    return m;
}

void write_block(io::ByteWriter& w, const Block& b) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(b.name.size()));
    w.put_bytes(b.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(b.dtype));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(b.dims.size()));
    for (auto d : b.dims) w.put<std::uint32_t>(d);
    switch (b.dtype) {
        case DType::F64: w.put_array<double>(b.f64); break;
        case DType::U8: w.put_array<std::uint8_t>(b.u8); break;
        case DType::U32: w.put_array<std::uint32_t>(b.u32); break;
        case DType::F32: {
            std::vector<float> tmp(b.f64.begin(), b.f64.end());
            w.put_array<float>(tmp);
            break;
        }
    }
}

Block read_block(io::ByteReader& r) {
    Block b;
    b.name = r.get_bytes(r.get<std::uint16_t>());
    const auto dt = r.get<std::uint8_t>();
    if (dt > 3) raise(ErrorKind::CorruptFile, "unknown dtype in block " + b.name);
    b.dtype = static_cast<DType>(dt);
    const auto rank = r.get<std::uint8_t>();
    for (int i = 0; i < rank; ++i) b.dims.push_back(r.get<std::uint32_t>());
    const std::size_t n = b.count();
    const std::size_t width = b.dtype == DType::F64 ? 8 : b.dtype == DType::U8 ? 1 : 4;
    if (n > r.remaining() / width) raise(ErrorKind::CorruptFile, "block " + b.name + " larger than file");
    switch (b.dtype) {
        case DType::F64:
            b.f64.resize(n);
            r.get_array<double>(b.f64);
            break;
        case DType::U8:
            b.u8.resize(n);
            r.get_array<std::uint8_t>(b.u8);
            break;
        case DType::U32:
            b.u32.resize(n);
            r.get_array<std::uint32_t>(b.u32);
            break;
        case DType::F32: {
            std::vector<float> tmp(n);
            r.get_array<float>(tmp);
            b.f64.assign(tmp.begin(), tmp.end());
            b.dtype = DType::F64;
            break;
        }
    }
    return b;
}

const Block& find(const std::vector<Block>& blocks, std::string_view name) {
    for (const auto& b : blocks) {
        if (b.name == name) return b;
    }
    raise(ErrorKind::CorruptFile, "model file lacks block " + std::string(name));
}

json cnn_spec_json(const CnnSpec& s) {
    return {{"in_channels", s.in_channels}, {"in_length", s.in_length}, {"n_convs", s.n_convs},
            {"filters", s.filters},         {"kernel", s.kernel},       {"pool", s.pool},
            {"dense_len", s.dense_len},     {"outputs", s.outputs},     {"bn_momentum", s.bn_momentum},
            {"bn_eps", s.bn_eps}};
}

CnnSpec cnn_spec_from(const json& j) {
    CnnSpec s;
    s.in_channels = j.at("in_channels");
    s.in_length = j.at("in_length");
    s.n_convs = j.at("n_convs");
    s.filters = j.at("filters");
    s.kernel = j.at("kernel");
    s.pool = j.at("pool");
    s.dense_len = j.at("dense_len");
    s.outputs = j.at("outputs");
    s.bn_momentum = j.at("bn_momentum");
    s.bn_eps = j.at("bn_eps");
    return s;
}

json hyper_json(const ModelHyper& h) {
    return {{"k", h.k},
            {"shrinkage", h.shrinkage},
            {"n_convs", h.n_convs},
            {"dense_len", h.dense_len},
            {"learning_rate", h.train.learning_rate},
            {"momentum", h.train.momentum},
            {"batch_size", h.train.batch_size},
            {"epochs", h.train.epochs},
            {"train_seed", h.train.seed}};
}

ModelHyper hyper_from(const json& j) {
    ModelHyper h;
    h.k = j.at("k");
    h.shrinkage = j.at("shrinkage");
    h.n_convs = j.at("n_convs");
    h.dense_len = j.at("dense_len");
    h.train.learning_rate = j.at("learning_rate");
    h.train.momentum = j.at("momentum");
    h.train.batch_size = j.at("batch_size");
    h.train.epochs = j.at("epochs");
    h.train.seed = j.at("train_seed");
    return h;
}

std::array<double, kNumClasses> one_hot(ClassLabel c) {
    std::array<double, kNumClasses> p{};
    p[index_of(c)] = 1.0;
    return p;
}

}  // namespace

std::string_view to_string(ModelKind k) noexcept {
    switch (k) {
        case ModelKind::Knn: return "knn";
        case ModelKind::Lda: return "lda";
        case ModelKind::Cnn: return "cnn";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view s) {
    if (s == "knn") return ModelKind::Knn;
    if (s == "lda") return ModelKind::Lda;
    if (s == "cnn") return ModelKind::Cnn;
    raise(ErrorKind::InvalidArgument, "unknown model kind '" + std::string(s) + "' (knn|lda|cnn)");
}

const KnnModel& Classifier::knn() const {
    if (const auto* m = std::get_if<KnnModel>(&model_)) return *m;
    raise(ErrorKind::NotTrained, "classifier holds no KNN model");
}

const LdaModel& Classifier::lda() const {
    if (const auto* m = std::get_if<LdaModel>(&model_)) return *m;
    raise(ErrorKind::NotTrained, "classifier holds no LDA model");
}

const CnnModel& Classifier::cnn() const {
    if (const auto* m = std::get_if<CnnModel>(&model_)) return *m;
    raise(ErrorKind::NotTrained, "classifier holds no CNN model");
}

std::array<double, kNumClasses> Classifier::predict_proba(const FeatureVector& fv) const {
    if (!trained()) raise(ErrorKind::NotTrained, "predict called on an untrained classifier");
    const auto x = normalized_values(fv, norm_);
    if (const auto* k = std::get_if<KnnModel>(&model_)) return one_hot(knn_predict(*k, x));
    if (const auto* l = std::get_if<LdaModel>(&model_)) {
        const auto s = lda_scores(*l, x);
        double mx = -std::numeric_limits<double>::infinity();
        for (double v : s) mx = std::max(mx, v);
        std::array<double, kNumClasses> p{};
        double z = 0.0;
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            p[c] = std::isinf(s[c]) ? 0.0 : std::exp(s[c] - mx);
            z += p[c];
        }
        for (auto& v : p) v /= z;
        return p;
    }
    const auto& c = std::get<CnnModel>(model_);
    const std::vector<std::vector<double>> batch{x};
    const auto out = cnn_forward(c.spec, c.params, batch, CnnMode::Infer);
    std::array<double, kNumClasses> p{};
    std::copy_n(out.front().begin(), kNumClasses, p.begin());
    return p;
}

ClassLabel Classifier::predict(const FeatureVector& fv) const {
    if (const auto* k = std::get_if<KnnModel>(&model_)) return knn_predict(*k, normalized_values(fv, norm_));
    if (const auto* l = std::get_if<LdaModel>(&model_)) return lda_predict(*l, normalized_values(fv, norm_));
    const auto p = predict_proba(fv);
    return argmax_label(p);
}

Classifier train_classifier(ModelKind kind, const ModelHyper& hyper,
                            std::span<const LabeledExample> train, std::uint64_t seed,
                            const Classifier* pretrained) {
    if (train.empty()) raise(ErrorKind::EmptyTrainingSet, "no training examples");
    const auto start = std::chrono::steady_clock::now();
    Classifier out;
    out.kind_ = kind;
    out.hyper_ = hyper;
    out.meta_.seed = seed;
    out.meta_.train_size = train.size();

    const bool transfer = pretrained != nullptr && kind == ModelKind::Cnn;
    if (transfer) {
        if (pretrained->kind() != ModelKind::Cnn || !pretrained->trained()) {
            raise(ErrorKind::InvalidArgument, "transfer needs a trained CNN");
        }
        out.norm_ = pretrained->norm();
        out.hyper_.n_convs = pretrained->cnn().spec.n_convs;
        out.hyper_.dense_len = pretrained->cnn().spec.dense_len;
    } else {
        std::vector<FeatureVector> fvs;
        fvs.reserve(train.size());
        for (const auto& e : train) fvs.push_back(e.features);
        out.norm_ = fit_norm(fvs);
    }

    std::vector<std::vector<double>> x;
    std::vector<ClassLabel> y;
    x.reserve(train.size());
    for (const auto& e : train) {
        x.push_back(normalized_values(e.features, out.norm_));
        y.push_back(e.label);
    }

    switch (kind) {
        case ModelKind::Knn: out.model_ = knn_train(x, y, hyper.k); break;
        case ModelKind::Lda: out.model_ = lda_fit(x, y, hyper.shrinkage); break;
        case ModelKind::Cnn: {
            TrainConfig cfg = hyper.train;
            cfg.seed = derive_seed(seed, 1);
            CnnModel m;
            TrainResult res;
            if (transfer) {
                m.spec = pretrained->cnn().spec;
                res = cnn_transfer(m.spec, pretrained->cnn().params, x, y, cfg);
            } else {
                auto built = cnn_build(hyper.n_convs, hyper.dense_len,
                                       {out.norm_.channels, out.norm_.bins}, seed);
                m.spec = built.first;
                res = cnn_train(m.spec, std::move(built.second), x, y, cfg);
            }
            m.params = std::move(res.params);
            out.meta_.epochs = static_cast<int>(res.history.size());
            out.model_ = std::move(m);
            break;
        }
    }
    out.meta_.transfer = transfer;
    out.meta_.training_accuracy = evaluate(out, train).accuracy;
    out.meta_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

Evaluation evaluate(const std::function<ClassLabel(const FeatureVector&)>& predictor,
                    std::span<const LabeledExample> test) {
    Evaluation ev;
    ev.count = test.size();
    std::size_t correct = 0;
    for (const auto& e : test) {
        const auto p = predictor(e.features);
        ++ev.confusion[index_of(e.label)][index_of(p)];
        if (p == e.label) ++correct;
    }
    ev.accuracy = test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
    return ev;
}

Evaluation evaluate(const Classifier& model, std::span<const LabeledExample> test) {
    if (model.kind() == ModelKind::Cnn && !test.empty()) {
        // batched forward pass
        const auto& c = model.cnn();
        Evaluation ev;
        ev.count = test.size();
        std::size_t correct = 0;
        constexpr std::size_t kChunk = 256;
        std::vector<std::vector<double>> batch;
        for (std::size_t s = 0; s < test.size(); s += kChunk) {
            const std::size_t e = std::min(test.size(), s + kChunk);
            batch.clear();
            for (std::size_t i = s; i < e; ++i) batch.push_back(normalized_values(test[i].features, model.norm()));
            const auto probs = cnn_forward(c.spec, c.params, batch, CnnMode::Infer);
            for (std::size_t i = s; i < e; ++i) {
                const auto p = argmax_label(probs[i - s]);
                ++ev.confusion[index_of(test[i].label)][index_of(p)];
                if (p == test[i].label) ++correct;
            }
        }
        ev.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
        return ev;
    }
    return evaluate([&](const FeatureVector& fv) { return model.predict(fv); }, test);
}

// ---------------------------------------------------------------------------
// Model files

std::vector<std::uint8_t> encode_model(const Classifier& m) {
    if (!m.trained()) raise(ErrorKind::NotTrained, "cannot save an untrained model");
    std::vector<Block> blocks;
    const auto& ns = m.norm();
    blocks.push_back(f64_block("norm.mean", {static_cast<std::uint32_t>(ns.size())}, ns.mean));
    blocks.push_back(f64_block("norm.stddev", {static_cast<std::uint32_t>(ns.size())}, ns.stddev));
    blocks.push_back(u32_block("norm.dropped", ns.dropped));

    json hyper = hyper_json(m.hyper());
    hyper["norm_channels"] = ns.channels;
    hyper["norm_bins"] = ns.bins;
    switch (m.kind()) {
        case ModelKind::Knn: {
            const auto& k = m.knn();
            blocks.push_back(f64_block("knn.points",
                                       {static_cast<std::uint32_t>(k.size()), static_cast<std::uint32_t>(k.dim)},
                                       k.points));
            std::vector<std::uint8_t> labels;
            for (auto c : k.labels) labels.push_back(static_cast<std::uint8_t>(c));
            blocks.push_back(u8_block("knn.labels", labels));
            break;
        }
        case ModelKind::Lda: {
            const auto& l = m.lda();
            hyper["dim"] = l.dim;
            blocks.push_back(u32_block("lda.active", l.active));
            std::vector<std::uint8_t> classes;
            for (auto c : l.classes) classes.push_back(static_cast<std::uint8_t>(c));
            blocks.push_back(u8_block("lda.classes", classes));
            auto dims = [](const Eigen::MatrixXd& x) {
                return std::vector<std::uint32_t>{static_cast<std::uint32_t>(x.rows()),
                                                  static_cast<std::uint32_t>(x.cols())};
            };
            blocks.push_back(f64_block("lda.means", dims(l.means), to_vector(l.means)));
            blocks.push_back(f64_block("lda.weights", dims(l.weights), to_vector(l.weights)));
            blocks.push_back(f64_block("lda.priors", {static_cast<std::uint32_t>(l.priors.size())},
                                       std::vector<double>(l.priors.data(), l.priors.data() + l.priors.size())));
            blocks.push_back(f64_block("lda.bias", {static_cast<std::uint32_t>(l.bias.size())},
                                       std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())));
            break;
        }
        case ModelKind::Cnn: {
            const auto& c = m.cnn();
            hyper["spec"] = cnn_spec_json(c.spec);
            for (const auto& pb : c.params.blocks) {
                std::vector<std::uint32_t> dims(pb.shape.begin(), pb.shape.end());
                blocks.push_back(f64_block("cnn." + pb.name, dims, pb.data));
            }
            blocks.push_back(u8_block("cnn.frozen", c.params.frozen));
            break;
        }
    }

    const auto& md = m.metadata();
    const json meta = {{"seed", md.seed},
                       {"train_size", md.train_size},
                       {"epochs", md.epochs},
                       {"training_accuracy", md.training_accuracy},
                       {"wall_seconds", md.wall_seconds},
                       {"transfer", md.transfer}};

    io::ByteWriter w;
    w.put_bytes({kModelMagic, 4});
    w.put<std::uint16_t>(kModelFormatVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(m.kind()));
    w.put_string32(hyper.dump());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(blocks.size()));
    for (const auto& b : blocks) write_block(w, b);
    w.put_string32(meta.dump());
    w.put<std::uint64_t>(io::crc64(w.bytes()));
    return std::move(w.bytes());
}

Classifier decode_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 + 2 + 1 + 8 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
        raise(ErrorKind::CorruptFile, "not a model file (bad magic)");
    }
    io::ByteReader r(bytes);
    r.get_bytes(4);
    const auto version = r.get<std::uint16_t>();
    if (version != kModelFormatVersion) {
        raise(ErrorKind::FormatVersionMismatch, "model format version " + std::to_string(version) +
                                                    ", expected " + std::to_string(kModelFormatVersion));
    }
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    if (io::crc64(bytes.first(bytes.size() - 8)) != stored) raise(ErrorKind::CorruptFile, "model checksum mismatch");

    Classifier out;
    const auto kind = r.get<std::uint8_t>();
    if (kind > 2) raise(ErrorKind::CorruptFile, "unknown model kind tag");
    out.kind_ = static_cast<ModelKind>(kind);
    try {
        const json hyper = json::parse(r.get_string32());
        out.hyper_ = hyper_from(hyper);
        std::vector<Block> blocks(r.get<std::uint32_t>());
        for (auto& b : blocks) b = read_block(r);
        const json meta = json::parse(r.get_string32());
        if (r.remaining() != 8) raise(ErrorKind::CorruptFile, "trailing bytes before checksum");

        out.norm_.channels = hyper.at("norm_channels");
        out.norm_.bins = hyper.at("norm_bins");
        out.norm_.mean = find(blocks, "norm.mean").f64;
        out.norm_.stddev = find(blocks, "norm.stddev").f64;
        out.norm_.dropped = find(blocks, "norm.dropped").u32;

        switch (out.kind_) {
            case ModelKind::Knn: {
                const auto& pts = find(blocks, "knn.points");
                KnnModel k;
                k.k = out.hyper_.k;
                k.dim = pts.dims.at(1);
                k.points = pts.f64;
                for (auto c : find(blocks, "knn.labels").u8) k.labels.push_back(static_cast<ClassLabel>(c & 3));
                out.model_ = std::move(k);
                break;
            }
            case ModelKind::Lda: {
                LdaModel l;
                l.dim = hyper.at("dim");
                l.shrinkage = out.hyper_.shrinkage;
                l.active = find(blocks, "lda.active").u32;
                for (auto c : find(blocks, "lda.classes").u8) l.classes.push_back(static_cast<ClassLabel>(c & 3));
                l.means = to_matrix(find(blocks, "lda.means"));
                l.weights = to_matrix(find(blocks, "lda.weights"));
                const auto& pr = find(blocks, "lda.priors").f64;
                const auto& bi = find(blocks, "lda.bias").f64;
                l.priors = Eigen::Map<const Eigen::VectorXd>(pr.data(), static_cast<Eigen::Index>(pr.size()));
                l.bias = Eigen::Map<const Eigen::VectorXd>(bi.data(), static_cast<Eigen::Index>(bi.size()));
                out.model_ = std::move(l);
                break;
            }
            case ModelKind::Cnn: {
                CnnModel c;
                c.spec = cnn_spec_from(hyper.at("spec"));
                c.params = cnn_init(c.spec, 0);
                for (auto& pb : c.params.blocks) {
                    const auto& b = find(blocks, "cnn." + pb.name);
                    if (b.f64.size() != pb.data.size()) raise(ErrorKind::CorruptFile, "block " + b.name + " has wrong size");
                    pb.data = b.f64;
                }
                c.params.frozen = find(blocks, "cnn.frozen").u8;
                if (c.params.frozen.size() != static_cast<std::size_t>(c.spec.layer_count())) {
                    raise(ErrorKind::CorruptFile, "frozen flags do not match layer count");
                }
                out.model_ = std::move(c);
                break;
            }
        }
        out.meta_.seed = meta.at("seed");
        out.meta_.train_size = meta.at("train_size");
        out.meta_.epochs = meta.at("epochs");
        out.meta_.training_accuracy = meta.at("training_accuracy");
        out.meta_.wall_seconds = meta.at("wall_seconds");
        out.meta_.transfer = meta.at("transfer");
    } catch (const json::exception& e) {
        raise(ErrorKind::CorruptFile, std::string("model metadata: ") + e.what());
    }
    return out;
}

void save_model(const Classifier& model, const std::string& path) {
    io::write_file_atomic(path, encode_model(model));
}

Classifier load_model(const std::string& path) { return decode_model(io::read_file(path)); }

}  // namespace bci
