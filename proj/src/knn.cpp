#include "bci/knn.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <string>
#include <utility>

#include "bci/error.hpp"

namespace bci {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        d += diff * diff;
    }
    return d;
}

KnnModel knn_train(std::span<const std::vector<double>> features,
                   std::span<const ClassLabel> labels, int k) {
    if (features.empty()) raise(ErrorKind::EmptyDataset, "KNN needs at least one example");
    if (features.size() != labels.size()) {
        raise(ErrorKind::ShapeMismatch, "feature and label counts differ");
    }
    if (k < 1) raise(ErrorKind::InvalidArgument, "k must be >= 1");
    if (static_cast<std::size_t>(k) > features.size()) {
        raise(ErrorKind::KTooLarge, "k=" + std::to_string(k) + " exceeds " +
                                        std::to_string(features.size()) + " stored examples");
    }
    KnnModel m;
    m.k = k;
    m.dim = features.front().size();
    m.points.reserve(features.size() * m.dim);
    for (const auto& f : features) {
        if (f.size() != m.dim) raise(ErrorKind::ShapeMismatch, "feature dimensions differ");
        m.points.insert(m.points.end(), f.begin(), f.end());
    }
    m.labels.assign(labels.begin(), labels.end());
    return m;
}

ClassLabel knn_predict(const KnnModel& model, std::span<const double> query) {
    if (model.size() == 0) raise(ErrorKind::NotTrained, "empty KNN store");
    if (query.size() != model.dim) raise(ErrorKind::ShapeMismatch, "query dimension differs");

    std::vector<std::pair<double, std::size_t>> dist(model.size());
    for (std::size_t i = 0; i < model.size(); ++i) {
        dist[i] = {squared_distance(query, model.point(i)), i};
    }
    const auto k = static_cast<std::size_t>(model.k);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

    std::array<int, kNumClasses> votes{};
    std::array<double, kNumClasses> sums{};
    for (std::size_t j = 0; j < k; ++j) {
        const auto c = index_of(model.labels[dist[j].second]);
        ++votes[c];
        sums[c] += dist[j].first;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
        if (votes[c] > votes[best] || (votes[c] == votes[best] && votes[c] > 0 && sums[c] < sums[best])) {
            best = c;
        }
    }
    return label_from_index(best);
}

}  // namespace bci
