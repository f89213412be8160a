#include <algorithm>
#include <map>

#include "bci/knn.hpp"
#include "bci/rng.hpp"
#include "test_util.hpp"

using namespace bci;

namespace {

// Exhaustive scan: stable sort by (distance, index), vote, break ties by
// summed distance then class index.
ClassLabel oracle(const std::vector<std::vector<double>>& pts, const std::vector<ClassLabel>& labels,
                  const std::vector<double>& q, int k) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) s += (pts[i][j] - q[j]) * (pts[i][j] - q[j]);
        d.emplace_back(s, i);
    }
    std::stable_sort(d.begin(), d.end());
    std::map<int, std::pair<int, double>> tally;
    for (int j = 0; j < k; ++j) {
        auto& t = tally[static_cast<int>(labels[d[static_cast<std::size_t>(j)].second])];
        t.first += 1;
        t.second += d[static_cast<std::size_t>(j)].first;
    }
    int best = -1;
    for (const auto& [c, t] : tally) {
        if (best < 0) {
            best = c;
            continue;
        }
        const auto& b = tally[best];
        if (t.first > b.first || (t.first == b.first && t.second < b.second)) best = c;
    }
    return static_cast<ClassLabel>(best);
}

}  // namespace

TEST(Knn, SingleExample) {
    std::vector<std::vector<double>> f = {{1.0, 2.0}};
    std::vector<ClassLabel> l = {ClassLabel::Right};
    const auto m = knn_train(f, l, 1);
    EXPECT_EQ(knn_predict(m, std::vector<double>{100.0, -3.0}), ClassLabel::Right);
}

TEST(Knn, Errors) {
    std::vector<std::vector<double>> f = {{1.0}, {2.0}};
    std::vector<ClassLabel> l = {ClassLabel::Left, ClassLabel::Right};
    EXPECT_BCI_ERROR(knn_train(f, l, 3), ErrorKind::KTooLarge);
    EXPECT_BCI_ERROR(knn_train({}, {}, 1), ErrorKind::EmptyDataset);
}

TEST(Knn, SeparatedClusters) {
    Rng rng(1);
    std::vector<std::vector<double>> f;
    std::vector<ClassLabel> l;
    for (std::size_t c = 0; c < 4; ++c) {
        for (int i = 0; i < 25; ++i) {
            std::vector<double> x(4, 0.0);
            x[c] = 100.0;
            for (auto& v : x) v += rng.normal();
            f.push_back(x);
            l.push_back(label_from_index(c));
        }
    }
    const auto m = knn_train(f, l, 3);
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(knn_predict(m, f[i]), l[i]);
}

TEST(Knn, KEqualsSizeGivesMajority) {
    std::vector<std::vector<double>> f = {{0.0}, {1.0}, {2.0}, {50.0}, {51.0}};
    std::vector<ClassLabel> l = {ClassLabel::Both, ClassLabel::Both, ClassLabel::Both, ClassLabel::Left,
                                 ClassLabel::Left};
    const auto m = knn_train(f, l, 5);
    for (double q : {-10.0, 25.0, 50.5, 1000.0}) EXPECT_EQ(knn_predict(m, std::vector<double>{q}), ClassLabel::Both);
}

TEST(Knn, ExactMatchK1) {
    std::vector<std::vector<double>> f = {{0.0, 0.0}, {3.0, 3.0}, {6.0, 0.0}};
    std::vector<ClassLabel> l = {ClassLabel::None, ClassLabel::Left, ClassLabel::Right};
    const auto m = knn_train(f, l, 1);
    EXPECT_EQ(knn_predict(m, f[1]), ClassLabel::Left);
}

TEST(Knn, TieGoesToLowerIndex) {
    // 2-vs-2 vote with equal distance sums
    std::vector<std::vector<double>> f = {{1.0}, {-1.0}, {2.0}, {-2.0}};
    std::vector<ClassLabel> l = {ClassLabel::Right, ClassLabel::Left, ClassLabel::Right, ClassLabel::Left};
    const auto m = knn_train(f, l, 4);
    EXPECT_EQ(knn_predict(m, std::vector<double>{0.0}), ClassLabel::Left);
}

TEST(Knn, TieBrokenBySummedDistance) {
    std::vector<std::vector<double>> f = {{1.0}, {-1.5}, {2.0}, {-1.6}};
    std::vector<ClassLabel> l = {ClassLabel::Both, ClassLabel::Left, ClassLabel::Both, ClassLabel::Left};
    const auto m = knn_train(f, l, 4);
    // Both: 1 + 4 = 5; Left: 2.25 + 2.56 = 4.81
    EXPECT_EQ(knn_predict(m, std::vector<double>{0.0}), ClassLabel::Left);
}

TEST(Knn, MatchesExhaustiveOracle) {
    Rng rng(77);
    std::vector<std::vector<double>> f(500);
    std::vector<ClassLabel> l(500);
    for (std::size_t i = 0; i < 500; ++i) {
        f[i].resize(6);
        // integer grid coordinates so equal distances are common
        for (auto& v : f[i]) v = static_cast<double>(rng.below(4));
        l[i] = label_from_index(rng.below(4));
    }
    for (int k : {1, 3, 5, 8}) {
        const auto m = knn_train(f, l, k);
        for (int q = 0; q < 200; ++q) {
            std::vector<double> x(6);
            for (auto& v : x) v = q % 2 ? static_cast<double>(rng.below(4)) : rng.uniform(-1.0, 4.0);
            EXPECT_EQ(knn_predict(m, x), oracle(f, l, x, k)) << "k=" << k << " q=" << q;
        }
    }
}
