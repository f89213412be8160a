#include <cmath>

#include "bci/lda.hpp"
#include "bci/rng.hpp"
#include "test_util.hpp"

using namespace bci;

TEST(Lda, MidpointBoundary1D) {
    Rng rng(2);
    std::vector<std::vector<double>> f;
    std::vector<ClassLabel> l;
    for (int i = 0; i < 2000; ++i) {
        const bool right = i % 2;
        f.push_back({(right ? 1.0 : -1.0) + std::sqrt(0.1) * rng.normal()});
        l.push_back(right ? ClassLabel::Right : ClassLabel::Left);
    }
    const auto m = lda_fit(f, l);
    // scan for the crossing of the two scores
    double boundary = NAN;
    for (double x = -1.0; x <= 1.0; x += 1e-4) {
        const auto s = lda_scores(m, std::vector<double>{x});
        if (s[index_of(ClassLabel::Right)] >= s[index_of(ClassLabel::Left)]) {
            boundary = x;
            break;
        }
    }
    EXPECT_NEAR(boundary, 0.0, 0.05);
    EXPECT_EQ(lda_predict(m, std::vector<double>{-0.5}), ClassLabel::Left);
    EXPECT_EQ(lda_predict(m, std::vector<double>{0.5}), ClassLabel::Right);
}

TEST(Lda, IdenticalMeansFollowPriors) {
    std::vector<std::vector<double>> f;
    std::vector<ClassLabel> l;
    for (int i = 0; i < 30; ++i) {
        const double v = (i % 3) - 1.0;
        f.push_back({v, -v});
        l.push_back(i < 20 ? ClassLabel::Both : ClassLabel::None);
    }
    // both classes have mean 0 (each sees -1, 0, 1 equally often)
    const auto m = lda_fit(f, l);
    EXPECT_EQ(lda_predict(m, std::vector<double>{0.3, 0.7}), ClassLabel::Both);
}

TEST(Lda, FourClasses10D) {
    Rng rng(3);
    auto draw = [&](std::size_t c) {
        std::vector<double> x(10);
        for (std::size_t j = 0; j < 10; ++j) x[j] = rng.normal() + (j == c * 2 ? 4.0 : 0.0);
        return x;
    };
    std::vector<std::vector<double>> f;
    std::vector<ClassLabel> l;
    for (int i = 0; i < 400; ++i) {
        const auto c = static_cast<std::size_t>(i % 4);
        f.push_back(draw(c));
        l.push_back(label_from_index(c));
    }
    const auto m = lda_fit(f, l);
    int ok = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto c = static_cast<std::size_t>(rng.below(4));
        ok += lda_predict(m, draw(c)) == label_from_index(c);
    }
    EXPECT_GE(ok / 1000.0, 0.95);
}

TEST(Lda, Errors) {
    std::vector<std::vector<double>> f = {{1.0}, {2.0}, {3.0}};
    std::vector<ClassLabel> l(3, ClassLabel::Left);
    EXPECT_BCI_ERROR(lda_fit(f, l), ErrorKind::TooFewClasses);
    std::vector<ClassLabel> l2 = {ClassLabel::Left, ClassLabel::Left, ClassLabel::Right};
    EXPECT_BCI_ERROR(lda_fit(f, l2), ErrorKind::TooFewClasses);  // one example of right
}

TEST(Lda, ConstantDimensionIgnored) {
    Rng rng(4);
    std::vector<std::vector<double>> f;
    std::vector<ClassLabel> l;
    for (int i = 0; i < 100; ++i) {
        const bool r = i % 2;
        f.push_back({(r ? 2.0 : -2.0) + rng.normal(), 5.0});
        l.push_back(r ? ClassLabel::Right : ClassLabel::None);
    }
    const auto m = lda_fit(f, l);
    EXPECT_EQ(m.active.size(), 1u);
    EXPECT_EQ(lda_predict(m, std::vector<double>{3.0, 5.0}), ClassLabel::Right);
}
