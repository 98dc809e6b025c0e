#include "rmcov/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rmcov/error.hpp"

namespace rmcov {

namespace {

using LongVector = std::vector<long double>;

/// Upper-triangle accumulator of outer products in extended precision.
class OuterAccumulator {
public:
    explicit OuterAccumulator(Eigen::Index dim)
        : dim_(dim), sums_(static_cast<std::size_t>(dim * dim), 0.0L) {}

    void add(const LongVector& v, long double weight = 1.0L) {
        for (Eigen::Index k = 0; k < dim_; ++k) {
            const long double vk = weight * v[k];
            long double* row = &sums_[static_cast<std::size_t>(k * dim_)];
            for (Eigen::Index l = k; l < dim_; ++l) row[l] += vk * v[l];
        }
    }

    Eigen::MatrixXd scaled(long double factor) const {
        Eigen::MatrixXd out(dim_, dim_);
        for (Eigen::Index k = 0; k < dim_; ++k) {
            for (Eigen::Index l = k; l < dim_; ++l) {
                const double value = static_cast<double>(sums_[static_cast<std::size_t>(k * dim_ + l)] * factor);
                out(k, l) = value;
                out(l, k) = value;
            }
        }
        return out;
    }

private:
    Eigen::Index dim_;
    LongVector sums_;
};

LongVector subject_mean(const Eigen::MatrixXd& obs) {
    const Eigen::Index p = obs.cols();
    LongVector mean(static_cast<std::size_t>(p), 0.0L);
    for (Eigen::Index j = 0; j < obs.rows(); ++j) {
        for (Eigen::Index k = 0; k < p; ++k) mean[k] += obs(j, k);
    }
    for (auto& v : mean) v /= static_cast<long double>(obs.rows());
    return mean;
}

std::vector<LongVector> subject_means(const RepeatedData& data) {
    std::vector<LongVector> means;
    means.reserve(data.num_subjects());
    for (const auto& s : data.subjects()) means.push_back(subject_mean(s.observations));
    return means;
}

/// Unscaled pooled within-subject scatter.
OuterAccumulator within_scatter(const RepeatedData& data, const std::vector<LongVector>& means) {
    const Eigen::Index p = data.dim();
    OuterAccumulator acc(p);
    LongVector centered(static_cast<std::size_t>(p));
    for (std::size_t i = 0; i < data.num_subjects(); ++i) {
        const auto& obs = data.subjects()[i].observations;
        for (Eigen::Index j = 0; j < obs.rows(); ++j) {
            for (Eigen::Index k = 0; k < p; ++k) centered[k] = obs(j, k) - means[i][k];
            acc.add(centered);
        }
    }
    return acc;
}

void require_replication(const RepeatedData& data) {
    if (data.total_observations() <= data.num_subjects()) {
        throw Error(ErrorCode::DegenerateDesign,
                    "within-subject estimation needs N > m (some subject with >= 2 observations)");
    }
}

void require_two_subjects(const RepeatedData& data) {
    if (data.num_subjects() < 2) {
        throw Error(ErrorCode::DegenerateDesign, "between-subject estimation needs m >= 2 subjects");
    }
}

SymMatrix within_from_means(const RepeatedData& data, const std::vector<LongVector>& means) {
    const long double dof = static_cast<long double>(data.total_observations() - data.num_subjects());
    return SymMatrix(within_scatter(data, means).scaled(1.0L / dof));
}

SymMatrix aggregated_from_means(const RepeatedData& data, const std::vector<LongVector>& means) {
    const Eigen::Index p = data.dim();
    const auto m = static_cast<long double>(means.size());
    LongVector center(static_cast<std::size_t>(p), 0.0L);
    for (const auto& mu : means) {
        for (Eigen::Index k = 0; k < p; ++k) center[k] += mu[k];
    }
    for (auto& v : center) v /= m;

    OuterAccumulator acc(p);
    LongVector centered(static_cast<std::size_t>(p));
    for (const auto& mu : means) {
        for (Eigen::Index k = 0; k < p; ++k) centered[k] = mu[k] - center[k];
        acc.add(centered);
    }
    return SymMatrix(acc.scaled(1.0L / (m - 1.0L)));
}

} // namespace

RepeatedData::RepeatedData(std::vector<SubjectBlock> subjects, std::vector<std::string> variable_names)
    : subjects_(std::move(subjects)), names_(std::move(variable_names)) {
    if (subjects_.empty()) {
        throw Error(ErrorCode::EmptyInput, "repeated data needs at least one subject");
    }
    dim_ = subjects_.front().observations.cols();
    if (dim_ < 1) {
        throw Error(ErrorCode::InvalidArgument, "observations must have at least one variable");
    }
    for (const auto& s : subjects_) {
        if (s.observations.rows() < 1) {
            throw Error(ErrorCode::InvalidArgument, "subject '" + s.id + "' has no observations");
        }
        if (s.observations.cols() != dim_) {
            throw Error(ErrorCode::DimensionMismatch, "subject '" + s.id + "' has inconsistent dimension");
        }
        if (!s.observations.allFinite()) {
            throw Error(ErrorCode::NonFinite, "subject '" + s.id + "' has non-finite observations");
        }
        total_ += static_cast<std::size_t>(s.observations.rows());
    }
    if (names_.empty()) {
        names_.reserve(static_cast<std::size_t>(dim_));
        for (Eigen::Index k = 0; k < dim_; ++k) names_.push_back("v" + std::to_string(k + 1));
    } else if (names_.size() != static_cast<std::size_t>(dim_)) {
        throw Error(ErrorCode::DimensionMismatch, "variable name count does not match dimension");
    }
}

std::vector<std::size_t> RepeatedData::group_sizes() const {
    std::vector<std::size_t> sizes;
    sizes.reserve(subjects_.size());
    for (const auto& s : subjects_) sizes.push_back(static_cast<std::size_t>(s.observations.rows()));
    return sizes;
}

RepeatedData RepeatedData::subset(std::span<const std::size_t> subject_indices) const {
    std::vector<SubjectBlock> picked;
    picked.reserve(subject_indices.size());
    for (std::size_t idx : subject_indices) {
        if (idx >= subjects_.size()) {
            throw Error(ErrorCode::InvalidArgument, "subject index out of range");
        }
        picked.push_back(subjects_[idx]);
    }
    return RepeatedData(std::move(picked), names_);
}

DesignSummary design_summary(std::span<const std::size_t> group_sizes) {
    if (group_sizes.size() < 2) {
        throw Error(ErrorCode::DegenerateDesign, "design summary needs m >= 2 subjects");
    }
    DesignSummary d;
    d.m = group_sizes.size();
    long double inv_sum = 0.0L;
    long double sq_sum = 0.0L;
    std::size_t largest = 0;
    for (std::size_t n : group_sizes) {
        if (n == 0) throw Error(ErrorCode::InvalidArgument, "group sizes must be >= 1");
        d.N += n;
        inv_sum += 1.0L / static_cast<long double>(n);
        sq_sum += static_cast<long double>(n) * static_cast<long double>(n);
        largest = std::max(largest, n);
    }
    const auto N = static_cast<long double>(d.N);
    const auto m = static_cast<long double>(d.m);
    d.n_star = static_cast<double>(m / inv_sum);
    d.n_zero = static_cast<double>((N - sq_sum / N) / (m - 1.0L));
    d.imbalance = static_cast<double>(static_cast<long double>(largest) / ((N - sq_sum / N) / (m - 1.0L)));
    return d;
}

DesignSummary design_summary(const RepeatedData& data) {
    const auto sizes = data.group_sizes();
    return design_summary(std::span<const std::size_t>(sizes));
}

SymMatrix within_sample(const RepeatedData& data) {
    require_replication(data);
    return within_from_means(data, subject_means(data));
}

SymMatrix aggregated_sample(const RepeatedData& data) {
    require_two_subjects(data);
    return aggregated_from_means(data, subject_means(data));
}

SymMatrix between_sample(const RepeatedData& data) {
    require_two_subjects(data);
    require_replication(data);
    const auto means = subject_means(data);
    const SymMatrix within = within_from_means(data, means);
    const SymMatrix aggregated = aggregated_from_means(data, means);

    long double inv_sum = 0.0L;
    for (std::size_t n : data.group_sizes()) inv_sum += 1.0L / static_cast<long double>(n);
    const double inv_n_star = static_cast<double>(inv_sum / static_cast<long double>(data.num_subjects()));
    return SymMatrix(aggregated.matrix() - inv_n_star * within.matrix());
}

SymMatrix anova_sample(const RepeatedData& data) {
    require_two_subjects(data);
    require_replication(data);
    const DesignSummary design = design_summary(data);
    if (!(design.n_zero > 0.0)) {
        throw Error(ErrorCode::DegenerateDesign, "MANOVA weighting constant n0 must be positive");
    }
    const auto means = subject_means(data);
    const Eigen::Index p = data.dim();

    LongVector grand(static_cast<std::size_t>(p), 0.0L);
    for (const auto& s : data.subjects()) {
        for (Eigen::Index j = 0; j < s.observations.rows(); ++j) {
            for (Eigen::Index k = 0; k < p; ++k) grand[k] += s.observations(j, k);
        }
    }
    for (auto& v : grand) v /= static_cast<long double>(data.total_observations());

    OuterAccumulator acc(p);
    LongVector centered(static_cast<std::size_t>(p));
    for (std::size_t i = 0; i < means.size(); ++i) {
        for (Eigen::Index k = 0; k < p; ++k) centered[k] = means[i][k] - grand[k];
        acc.add(centered, static_cast<long double>(data.subjects()[i].observations.rows()));
    }
    const long double m = static_cast<long double>(data.num_subjects());
    const Eigen::MatrixXd between_ss = acc.scaled(1.0L / (m - 1.0L));
    const SymMatrix within = within_from_means(data, means);
    return SymMatrix((between_ss - within.matrix()) / design.n_zero);
}

SymMatrix to_correlation(const SymMatrix& cov) {
    const Eigen::Index p = cov.dim();
    std::vector<std::size_t> bad;
    for (Eigen::Index k = 0; k < p; ++k) {
        if (!(cov(k, k) > 0.0)) bad.push_back(static_cast<std::size_t>(k));
    }
    if (!bad.empty()) throw NonpositiveDiagonalError(std::move(bad));

    Eigen::MatrixXd cor(p, p);
    for (Eigen::Index k = 0; k < p; ++k) {
        cor(k, k) = 1.0;
        for (Eigen::Index l = k + 1; l < p; ++l) {
            const double value = cov(k, l) / std::sqrt(cov(k, k) * cov(l, l));
            cor(k, l) = value;
            cor(l, k) = value;
        }
    }
    return SymMatrix(cor);
}

SampleDiagnostics diagnose(const SymMatrix& estimate) {
    SampleDiagnostics out;
    out.min_eigenvalue = min_eigenvalue(estimate);
    out.indefinite = out.min_eigenvalue < 0.0;
    for (Eigen::Index k = 0; k < estimate.dim(); ++k) {
        if (estimate(k, k) < 0.0) out.negative_diagonal.push_back(static_cast<std::size_t>(k));
    }
    return out;
}

} // namespace rmcov
