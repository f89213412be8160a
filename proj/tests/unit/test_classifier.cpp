#include <cstring>

#include "bci/binary_io.hpp"
#include "bci/classifier.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace bci;

namespace {

struct Data {
    std::vector<LabeledExample> train, test;
};

const Data& data() {
    static const Data d = [] {
        const auto rec = synthetic_record(90.0, 5);
        auto bal = balance(rec.frames, 1);
        auto [tr, te] = split(bal, 0.7, SplitMode::Random, 2);
        return Data{tr, te};
    }();
    return d;
}

ModelHyper small_cnn() {
    ModelHyper h;
    h.n_convs = 2;
    h.dense_len = 100;
    h.train.epochs = 3;
    return h;
}

}  // namespace

TEST(ModelKind, Names) {
    for (auto k : {ModelKind::Knn, ModelKind::Lda, ModelKind::Cnn}) EXPECT_EQ(parse_model_kind(to_string(k)), k);
    EXPECT_BCI_ERROR(parse_model_kind("svm"), ErrorKind::InvalidArgument);
}

TEST(Classifier, KnnAndLdaLearnSyntheticSubject) {
    const auto& d = data();
    for (auto kind : {ModelKind::Knn, ModelKind::Lda}) {
        const auto m = train_classifier(kind, ModelHyper{}, d.train, 1);
        EXPECT_TRUE(m.trained());
        const auto ev = evaluate(m, d.test);
        EXPECT_GT(ev.accuracy, 0.6) << to_string(kind);
        std::size_t total = 0;
        for (const auto& row : ev.confusion) {
            for (auto v : row) total += v;
        }
        EXPECT_EQ(total, d.test.size());
        const auto p = m.predict_proba(d.test.front().features);
        double sum = 0.0;
        for (double v : p) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

TEST(Classifier, ConstantPredictorScoresQuarter) {
    std::vector<LabeledExample> ex(40);
    for (std::size_t i = 0; i < ex.size(); ++i) ex[i].label = label_from_index(i % 4);
    const auto ev = evaluate([](const FeatureVector&) { return ClassLabel::Right; }, ex);
    EXPECT_DOUBLE_EQ(ev.accuracy, 0.25);
    EXPECT_EQ(ev.confusion[index_of(ClassLabel::None)][index_of(ClassLabel::Right)], 10u);
}

TEST(Classifier, EmptyTrainingSet) {
    EXPECT_BCI_ERROR(train_classifier(ModelKind::Knn, ModelHyper{}, std::vector<LabeledExample>{}, 1),
                     ErrorKind::EmptyTrainingSet);
    EXPECT_BCI_ERROR(Classifier{}.predict(FeatureVector{}), ErrorKind::NotTrained);
}

TEST(ModelFile, RoundTripAllKinds) {
    TempDir dir("model");
    const auto& d = data();
    for (auto kind : {ModelKind::Knn, ModelKind::Lda, ModelKind::Cnn}) {
        const auto m = train_classifier(kind, small_cnn(), d.train, 3);
        const auto path = dir.file(std::string(to_string(kind)) + ".bcim");
        save_model(m, path);
        const auto back = load_model(path);
        EXPECT_EQ(back.kind(), kind);
        EXPECT_EQ(back.metadata().train_size, m.metadata().train_size);
        EXPECT_EQ(back.metadata().training_accuracy, m.metadata().training_accuracy);
        EXPECT_EQ(encode_model(back), encode_model(m));
        for (std::size_t i = 0; i < d.test.size(); i += 7) {
            EXPECT_EQ(back.predict_proba(d.test[i].features), m.predict_proba(d.test[i].features));
        }
    }
}

TEST(ModelFile, CorruptionAndVersion) {
    const auto m = train_classifier(ModelKind::Knn, ModelHyper{}, data().train, 3);
    auto bytes = encode_model(m);
    auto bad = bytes;
    bad[bad.size() / 3] ^= 1;
    EXPECT_BCI_ERROR(decode_model(bad), ErrorKind::CorruptFile);
    bad = bytes;
    bad[4] = 99;  // version field follows the magic
    EXPECT_BCI_ERROR(decode_model(bad), ErrorKind::FormatVersionMismatch);
}

TEST(Classifier, CnnTransferKeepsConvLayers) {
    const auto& d = data();
    const auto base = train_classifier(ModelKind::Cnn, small_cnn(), d.train, 4);
    std::vector<LabeledExample> fresh(d.test.begin(), d.test.end());
    const auto tuned = train_classifier(ModelKind::Cnn, small_cnn(), fresh, 5, &base);
    EXPECT_TRUE(tuned.metadata().transfer);
    const auto& a = base.cnn().params.blocks;
    const auto& b = tuned.cnn().params.blocks;
    ASSERT_EQ(a.size(), b.size());
    bool dense_changed = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool conv = a[i].name.rfind("conv", 0) == 0 || a[i].name.rfind("bn", 0) == 0;
        const bool same = a[i].data.size() == b[i].data.size() &&
                          std::memcmp(a[i].data.data(), b[i].data.data(), a[i].data.size() * sizeof(double)) == 0;
        if (conv) EXPECT_TRUE(same) << a[i].name;
        if (!conv && !same) dense_changed = true;
    }
    EXPECT_TRUE(dense_changed);
}
