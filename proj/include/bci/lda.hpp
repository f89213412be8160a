#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "bci/labels.hpp"

namespace bci {

// Shared-covariance linear discriminant:
//   score_c(x) = x' S^-1 mu_c - 0.5 mu_c' S^-1 mu_c + log prior_c
// with S the pooled within-class covariance shrunk towards its diagonal.
struct LdaModel {
    std::size_t dim = 0;
    double shrinkage = 1e-3;
    // Input dimensions that carry within-class variance; the rest are
    // constant across the fitting set and ignored.
    std::vector<std::uint32_t> active;
    std::vector<ClassLabel> classes;  // classes present at fit time
    Eigen::MatrixXd means;            // classes x active
    Eigen::VectorXd priors;           // classes
    Eigen::MatrixXd weights;          // classes x active
    Eigen::VectorXd bias;             // classes
};

// Throws TooFewClasses (< 2 classes, or a class with < 2 examples) and
// SingularCovariance (not positive definite after shrinkage, or classes
// separated only along a zero-variance dimension).
LdaModel lda_fit(std::span<const std::vector<double>> features, std::span<const ClassLabel> labels,
                 double shrinkage = 1e-3);

// Scores indexed by ClassLabel; classes absent at fit time get -inf.
std::array<double, kNumClasses> lda_scores(const LdaModel& model, std::span<const double> x);
// Argmax of the scores, ties to the lowest class index.
ClassLabel lda_predict(const LdaModel& model, std::span<const double> x);

}  // namespace bci
