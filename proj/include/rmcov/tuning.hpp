#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rmcov/model.hpp"
#include "rmcov/solver.hpp"

namespace rmcov {

enum class SampleKind { Within, Between, Anova, Aggregated };
enum class Scale { Covariance, Correlation };

struct EstimatorKind {
    SampleKind sample = SampleKind::Between;
    Scale scale = Scale::Covariance;

    friend bool operator==(const EstimatorKind&, const EstimatorKind&) = default;
};

std::string_view to_string(SampleKind kind) noexcept;
std::string_view to_string(Scale scale) noexcept;
SampleKind parse_sample_kind(std::string_view name);
Scale parse_scale(std::string_view name);

/// The sample matrix an estimator regularizes (covariance, or its
/// diagonal-rescaled correlation).
SymMatrix sample_estimate(const RepeatedData& data, EstimatorKind kind);

struct CvConfig {
    std::size_t k_folds = 5;
    std::vector<double> lambda_grid; // strictly decreasing, >= 0
    std::uint64_t seed = 0;
    EstimatorKind estimator;

    void validate() const;
};

struct CvResult {
    std::vector<double> lambdas;
    std::vector<double> mean_error;               // E_l
    std::vector<double> standard_error;           // sd over folds / sqrt(K)
    std::vector<std::vector<double>> fold_errors; // [lambda][fold]
    std::size_t selected_min = 0;
    std::size_t selected_one_se = 0;

    double lambda_min() const { return lambdas.at(selected_min); }
    double lambda_one_se() const { return lambdas.at(selected_one_se); }
};

/// Subject indices of each fold. Depends only on (seed, m): a seeded shuffle
/// followed by contiguous folds whose sizes differ by at most one, with the
/// remainder on the earliest folds.
std::vector<std::vector<std::size_t>> fold_partition(std::size_t num_subjects, std::size_t k_folds,
                                                     std::uint64_t seed);

/// Applies the minimum and one-standard-error rules to per-fold errors.
CvResult summarize_cv(std::vector<double> lambdas, std::vector<std::vector<double>> fold_errors);

/// Group-level K-fold cross-validation over the lambda grid.
CvResult kfold_cv(const RepeatedData& data, const CvConfig& config, const AdmmSettings& settings);

/// Log-spaced decreasing grid from the largest off-diagonal magnitude down to
/// a hundredth of it.
std::vector<double> lambda_grid(const SymMatrix& sample, std::size_t length);

struct TheoryConstants {
    double c1 = 1.0;
    double c2 = 1.0;
    double m_b = 1.0;
    double m_eps = 1.0;

    void validate() const;
};

/// C1 sqrt(N log p) / (N - m)
double theory_lambda_eps(std::size_t m, std::size_t N, std::size_t p, const TheoryConstants& c);
/// C1 sqrt(log p / m) + C2 sqrt(N log p) / ((N - m) n*) + M_b / m + M_eps / (m n*)
double theory_lambda_b(const DesignSummary& d, std::size_t p, const TheoryConstants& c);
/// C1 sqrt(log p / m) + M_b / m + M_eps / n*
double theory_lambda_0(const DesignSummary& d, std::size_t p, const TheoryConstants& c);
/// C1 (max n_i / n0) sqrt(log p / m) + C2 sqrt(N log p) / (n0 (N - m))
///   + (2N - n0 m) M_b / (2 n0 m) + M_eps / (n0 m)
double theory_lambda_tilde_b(const DesignSummary& d, std::size_t p, const TheoryConstants& c);
/// C1 sqrt(log p / m) + M_b + (2 - n*) M_eps / (2 n*)
double theory_lambda_1(const DesignSummary& d, std::size_t p, const TheoryConstants& c);

} // namespace rmcov
