#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bci/cnn.hpp"
#include "bci/dataset.hpp"
#include "bci/features.hpp"
#include "bci/knn.hpp"
#include "bci/lda.hpp"

namespace bci {

enum class ModelKind : std::uint8_t { Knn = 0, Lda = 1, Cnn = 2 };

std::string_view to_string(ModelKind k) noexcept;
ModelKind parse_model_kind(std::string_view s);

struct ModelHyper {
    int k = 5;
    double shrinkage = 1e-3;
    int n_convs = 2;
    int dense_len = 200;
    TrainConfig train;
};

struct TrainingMetadata {
    std::uint64_t seed = 0;
    std::size_t train_size = 0;
    int epochs = 0;
    double training_accuracy = 0.0;
    double wall_seconds = 0.0;
    bool transfer = false;
};

struct CnnModel {
    CnnSpec spec;
    CnnParams params;
};

// A trained model together with the normalization fitted on its training
// set. Immutable after training; prediction is const and thread-safe.
class Classifier {
public:
    Classifier() = default;

    ModelKind kind() const { return kind_; }
    const ModelHyper& hyper() const { return hyper_; }
    const NormStats& norm() const { return norm_; }
    const TrainingMetadata& metadata() const { return meta_; }
    bool trained() const { return !std::holds_alternative<std::monostate>(model_); }

    const KnnModel& knn() const;
    const LdaModel& lda() const;
    const CnnModel& cnn() const;

    // Raw (un-normalized) feature vector in. KNN gives a one-hot row, LDA
    // the softmax of its discriminant scores, CNN the network output.
    std::array<double, kNumClasses> predict_proba(const FeatureVector& fv) const;
    ClassLabel predict(const FeatureVector& fv) const;

private:
    friend Classifier train_classifier(ModelKind, const ModelHyper&, std::span<const LabeledExample>,
                                       std::uint64_t, const Classifier*);
    friend Classifier decode_model(std::span<const std::uint8_t>);

    ModelKind kind_ = ModelKind::Knn;
    ModelHyper hyper_;
    NormStats norm_;
    TrainingMetadata meta_;
    std::variant<std::monostate, KnnModel, LdaModel, CnnModel> model_;
};

// Fits normalization and the model on `train`. For CNN with `pretrained`
// set, the pretrained network and its normalization are reused and only
// the dense layers are retrained (transfer).
Classifier train_classifier(ModelKind kind, const ModelHyper& hyper,
                            std::span<const LabeledExample> train, std::uint64_t seed,
                            const Classifier* pretrained = nullptr);

struct Evaluation {
    std::size_t count = 0;
    double accuracy = 0.0;
    // confusion[true][predicted]
    std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};
};

Evaluation evaluate(const Classifier& model, std::span<const LabeledExample> test);
Evaluation evaluate(const std::function<ClassLabel(const FeatureVector&)>& predictor,
                    std::span<const LabeledExample> test);

inline constexpr std::uint16_t kModelFormatVersion = 1;

std::vector<std::uint8_t> encode_model(const Classifier& model);
Classifier decode_model(std::span<const std::uint8_t> bytes);
void save_model(const Classifier& model, const std::string& path);
Classifier load_model(const std::string& path);

}  // namespace bci
