#include "bci/lda.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bci/error.hpp"

namespace bci {

LdaModel lda_fit(std::span<const std::vector<double>> features, std::span<const ClassLabel> labels,
                 double shrinkage) {
    if (features.empty()) raise(ErrorKind::EmptyDataset, "LDA needs training data");
    if (features.size() != labels.size()) {
        raise(ErrorKind::ShapeMismatch, "feature and label counts differ");
    }
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) {
        raise(ErrorKind::InvalidArgument, "shrinkage must be in [0, 1]");
    }
    const std::size_t d = features.front().size();
    const std::size_t n = features.size();

    std::array<std::size_t, kNumClasses> counts{};
    for (auto c : labels) ++counts[index_of(c)];
    LdaModel m;
    m.dim = d;
    m.shrinkage = shrinkage;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (counts[c] == 0) continue;
        if (counts[c] < 2) {
            raise(ErrorKind::TooFewClasses, "class " + std::string(to_string(label_from_index(c))) +
                                                " has fewer than 2 examples");
        }
        m.classes.push_back(label_from_index(c));
    }
    if (m.classes.size() < 2) raise(ErrorKind::TooFewClasses, "LDA needs at least 2 classes");
    const auto n_cls = static_cast<Eigen::Index>(m.classes.size());

    std::array<Eigen::Index, kNumClasses> row_of{};
    for (Eigen::Index r = 0; r < n_cls; ++r) row_of[index_of(m.classes[static_cast<std::size_t>(r)])] = r;

    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        if (features[i].size() != d) raise(ErrorKind::ShapeMismatch, "feature dimensions differ");
        X.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXd>(features[i].data(), static_cast<Eigen::Index>(d));
    }

    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(n_cls, static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) means.row(row_of[index_of(labels[i])]) += X.row(static_cast<Eigen::Index>(i));
    for (Eigen::Index r = 0; r < n_cls; ++r) {
        means.row(r) /= static_cast<double>(counts[index_of(m.classes[static_cast<std::size_t>(r)])]);
    }
    for (std::size_t i = 0; i < n; ++i) X.row(static_cast<Eigen::Index>(i)) -= means.row(row_of[index_of(labels[i])]);

    Eigen::MatrixXd S(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    S.setZero();
    S.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    S = S.selfadjointView<Eigen::Lower>();
    S /= static_cast<double>(n - m.classes.size());

    // Drop dimensions with no within-class spread.
    const double max_diag = S.diagonal().maxCoeff();
    const double tol = 1e-12 * std::max(max_diag, 1e-300);
    for (std::size_t j = 0; j < d; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (S(jj, jj) > tol) {
            m.active.push_back(static_cast<std::uint32_t>(j));
            continue;
        }
        const double spread = means.col(jj).maxCoeff() - means.col(jj).minCoeff();
        if (spread > 1e-9 * (1.0 + means.col(jj).cwiseAbs().maxCoeff())) {
            raise(ErrorKind::SingularCovariance,
                  "dimension " + std::to_string(j) + " separates classes with zero variance");
        }
    }
    if (m.active.empty()) raise(ErrorKind::SingularCovariance, "all dimensions are constant");

    const auto k = static_cast<Eigen::Index>(m.active.size());
    Eigen::MatrixXd Sa(k, k);
    m.means.resize(n_cls, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        const auto ja = static_cast<Eigen::Index>(m.active[static_cast<std::size_t>(a)]);
        m.means.col(a) = means.col(ja);
        for (Eigen::Index b = 0; b < k; ++b) {
            Sa(a, b) = S(ja, static_cast<Eigen::Index>(m.active[static_cast<std::size_t>(b)]));
        }
    }
    const Eigen::VectorXd diag = Sa.diagonal();
    Sa *= (1.0 - shrinkage);
    Sa.diagonal() += shrinkage * diag;

    Eigen::LLT<Eigen::MatrixXd> llt(Sa);
    if (llt.info() != Eigen::Success) {
        raise(ErrorKind::SingularCovariance, "pooled covariance is not positive definite");
    }
    m.weights = llt.solve(m.means.transpose()).transpose();
    if (!m.weights.allFinite()) raise(ErrorKind::SingularCovariance, "non-finite discriminant weights");

    m.priors.resize(n_cls);
    m.bias.resize(n_cls);
    for (Eigen::Index r = 0; r < n_cls; ++r) {
        m.priors(r) = static_cast<double>(counts[index_of(m.classes[static_cast<std::size_t>(r)])]) /
                      static_cast<double>(n);
        m.bias(r) = -0.5 * m.weights.row(r).dot(m.means.row(r)) + std::log(m.priors(r));
    }
    return m;
}

std::array<double, kNumClasses> lda_scores(const LdaModel& m, std::span<const double> x) {
    if (x.size() != m.dim) raise(ErrorKind::ShapeMismatch, "LDA input dimension differs");
    Eigen::VectorXd xa(static_cast<Eigen::Index>(m.active.size()));
    for (std::size_t a = 0; a < m.active.size(); ++a) xa(static_cast<Eigen::Index>(a)) = x[m.active[a]];
    const Eigen::VectorXd s = m.weights * xa + m.bias;
    std::array<double, kNumClasses> out;
    out.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < m.classes.size(); ++r) out[index_of(m.classes[r])] = s(static_cast<Eigen::Index>(r));
    return out;
}

ClassLabel lda_predict(const LdaModel& m, std::span<const double> x) {
    const auto s = lda_scores(m, x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
        if (s[c] > s[best]) best = c;
    }
    return label_from_index(best);
}

}  // namespace bci
