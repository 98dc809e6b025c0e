#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rmcov/sym_matrix.hpp"

namespace rmcov {

/// Observations of one subject: one row per repeated measurement.
struct SubjectBlock {
    std::string id;
    Eigen::MatrixXd observations;
};

/// Repeated-measures data Y_ij = b_i + e_ij grouped by subject.
///
/// Every subject carries at least one finite row of the common dimension p.
/// A single subject is accepted so that the within-subject estimator can be
/// evaluated on it; estimators that need between-subject variation check
/// m >= 2 themselves.
class RepeatedData {
public:
    RepeatedData(std::vector<SubjectBlock> subjects, std::vector<std::string> variable_names = {});

    std::size_t num_subjects() const noexcept { return subjects_.size(); }
    std::size_t total_observations() const noexcept { return total_; }
    Eigen::Index dim() const noexcept { return dim_; }

    const std::vector<SubjectBlock>& subjects() const noexcept { return subjects_; }
    const std::vector<std::string>& variable_names() const noexcept { return names_; }
    std::vector<std::size_t> group_sizes() const;

    /// Data restricted to the listed subjects, in the listed order.
    RepeatedData subset(std::span<const std::size_t> subject_indices) const;

private:
    std::vector<SubjectBlock> subjects_;
    std::vector<std::string> names_;
    Eigen::Index dim_ = 0;
    std::size_t total_ = 0;
};

struct DesignSummary {
    std::size_t m = 0;
    std::size_t N = 0;
    double n_star = 0.0;    // harmonic mean group size, m / sum(1/n_i)
    double n_zero = 0.0;    // (N - sum(n_i^2)/N) / (m - 1)
    double imbalance = 0.0; // max(n_i) / n_zero
};

DesignSummary design_summary(std::span<const std::size_t> group_sizes);
DesignSummary design_summary(const RepeatedData& data);

/// Unbiased within-subject covariance, pooled around each subject mean with
/// divisor N - m.
SymMatrix within_sample(const RepeatedData& data);

/// Sample covariance of the subject means around their unweighted mean.
SymMatrix aggregated_sample(const RepeatedData& data);

/// Bias-corrected between-subject covariance: aggregated - within / n*.
/// The result can be indefinite and can have negative diagonal entries.
SymMatrix between_sample(const RepeatedData& data);

/// MANOVA-type between-subject covariance weighted by n_i around the
/// observation-weighted grand mean, scaled by 1/n0. Can be indefinite.
SymMatrix anova_sample(const RepeatedData& data);

/// D^{-1/2} A D^{-1/2} with an exact unit diagonal. Throws
/// NonpositiveDiagonalError when any diagonal entry is <= 0.
SymMatrix to_correlation(const SymMatrix& cov);

struct SampleDiagnostics {
    double min_eigenvalue = 0.0;
    std::vector<std::size_t> negative_diagonal;
    bool indefinite = false;
};

/// Flags indefiniteness of a sample estimate without altering it.
SampleDiagnostics diagnose(const SymMatrix& estimate);

} // namespace rmcov
