#pragma once

#include <span>
#include <vector>

#include "bci/labels.hpp"

namespace bci {

// Brute-force k-nearest-neighbour store over flattened feature vectors.
struct KnnModel {
    int k = 5;
    std::size_t dim = 0;
    std::vector<double> points;  // row-major, size() x dim
    std::vector<ClassLabel> labels;

    std::size_t size() const { return labels.size(); }
    std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }
};

// Throws EmptyDataset, KTooLarge (k > stored count) or InvalidArgument (k < 1).
KnnModel knn_train(std::span<const std::vector<double>> features,
                   std::span<const ClassLabel> labels, int k);

// Majority vote among the k smallest squared distances (distance ties at
// the k-th slot resolve to the lower stored index). Vote ties go to the
// class with the smallest summed distance, then the lowest class index.
ClassLabel knn_predict(const KnnModel& model, std::span<const double> query);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace bci
