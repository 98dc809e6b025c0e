#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rmcov/metrics.hpp"
#include "rmcov/model.hpp"
#include "rmcov/solver.hpp"
#include "rmcov/tuning.hpp"

namespace rmcov {

/// Banded: scale * (1 - |j-k|/bandwidth)_+, times (-1)^|j-k| when alternating.
/// Ar1: scale * base^|j-k|.
struct CovTemplate {
    enum class Kind { Banded, Ar1 };

    Kind kind = Kind::Banded;
    Eigen::Index p = 0;
    double bandwidth = 10.0;
    bool alternating = false;
    double base = 0.0;
    double scale = 1.0;

    static CovTemplate banded(Eigen::Index p, double bandwidth, bool alternating = false, double scale = 1.0);
    static CovTemplate ar1(Eigen::Index p, double base, double scale = 1.0);
};

/// Throws NotPositiveDefinite when the smallest eigenvalue is <= 0.
SymMatrix build_template(const CovTemplate& t);

enum class ModelId { M1, M2, M3, M4 };

std::string_view to_string(ModelId id) noexcept;
ModelId parse_model_id(std::string_view name);

struct ModelTemplates {
    CovTemplate between;
    CovTemplate within;
};

/// M1: banded / alternating banded. M2: AR(1) 0.6 / -0.6.
/// M3: banded / a * banded. M4: banded / a * alternating banded.
ModelTemplates model_templates(ModelId id, Eigen::Index p, double snr_a = 1.0);

struct StudyConfig {
    std::string label;
    ModelId model = ModelId::M1;
    Eigen::Index p = 0;
    std::vector<std::size_t> group_sizes;
    double snr_a = 1.0;
    std::size_t replicates = 1;
    std::uint64_t seed = 0;

    std::size_t num_subjects() const noexcept { return group_sizes.size(); }
    void validate() const;

    /// n_i = a for the first m - 1 subjects and n_m = N - (m - 1) a.
    static std::vector<std::size_t> imbalance_design(std::size_t m, std::size_t a, std::size_t N);
    static std::vector<std::size_t> balanced_design(std::size_t m, std::size_t n);
};

/// Independent generator for (seed, replicate, stream); replicate r can be
/// regenerated without drawing replicates 0..r-1.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream);

/// Symmetric square root V diag(sqrt(w)) V^T; eigenvectors are normalized so
/// their first nonzero component is positive. Throws NotPositiveDefinite when
/// an eigenvalue is materially negative.
Eigen::MatrixXd symmetric_sqrt(const SymMatrix& cov);

/// Draws Y_ij = b_i + e_ij with b_i ~ N(0, between), e_ij ~ N(0, within)
/// from the replicate's data substream.
RepeatedData generate(const StudyConfig& config, const SymMatrix& between, const SymMatrix& within,
                      std::size_t replicate = 0);

struct StudyOptions {
    std::size_t k_folds = 5;
    std::size_t grid_length = 25;
    /// When nonempty, used for every replicate instead of a data-driven grid.
    std::vector<double> fixed_grid;
    bool one_se = false;
    bool unconstrained = true;
    bool roc = false;
    std::size_t roc_grid_length = 50;
    bool keep_cv_curves = false;
    std::size_t threads = 0; // 0: hardware concurrency
};

enum class Target { Between, Within };
std::string_view to_string(Target t) noexcept;

/// Per-replicate samples of each metric for one estimator scored against one target.
struct EstimatorOutcome {
    EstimatorKind kind;
    Target target = Target::Between;
    std::map<std::string, std::vector<double>> samples;
};

struct MetricSummary {
    double mean = 0.0;
    double se = 0.0;
    std::size_t count = 0;
};

MetricSummary summarize(const std::vector<double>& values);

struct CvCurveRecord {
    std::size_t replicate = 0;
    EstimatorKind kind;
    CvResult cv;
};

struct RocRecord {
    std::size_t replicate = 0;
    EstimatorKind kind;
    Target target = Target::Between;
    RocCurve curve;
};

struct StudyReport {
    StudyConfig config;
    DesignSummary design;
    std::size_t replicates_completed = 0;
    std::vector<std::string> failures;
    std::vector<EstimatorOutcome> outcomes;
    std::vector<CvCurveRecord> cv_curves;
    std::vector<RocRecord> roc;
    std::size_t roc_grid_length = 0;

    const EstimatorOutcome& outcome(SampleKind kind, Target target) const;
    MetricSummary metric(SampleKind kind, Target target, const std::string& name) const;
};

/// Targets an estimator is scored against: within -> Within, between and
/// anova -> Between, aggregated -> both.
std::vector<Target> targets_for(SampleKind kind);

/// Replicated generate -> cross-validate -> solve -> score pipeline.
/// Replicates that throw are recorded in `failures` and skipped.
StudyReport run_study(const StudyConfig& config, const std::vector<EstimatorKind>& estimators,
                      const StudyOptions& options, const AdmmSettings& settings);

/// Metric names recorded per replicate.
namespace metric {
inline constexpr const char* kFError = "f_error";
inline constexpr const char* kL2Error = "l2_error";
inline constexpr const char* kPdPct = "pd_pct";
inline constexpr const char* kRawFError = "raw_f_error";
inline constexpr const char* kRawL2Error = "raw_l2_error";
inline constexpr const char* kRawPdPct = "raw_pd_pct";
inline constexpr const char* kUncFError = "unc_f_error";
inline constexpr const char* kUncL2Error = "unc_l2_error";
inline constexpr const char* kUncPdPct = "unc_pd_pct";
inline constexpr const char* kTpr = "tpr";
inline constexpr const char* kFpr = "fpr";
inline constexpr const char* kLambda = "lambda";
inline constexpr const char* kFastPathPct = "fast_path_pct";
} // namespace metric

/// A study file expanded into one StudyConfig per design x snr setting.
struct StudyPlan {
    std::string name;
    std::vector<StudyConfig> settings;
    std::vector<EstimatorKind> estimators;
    StudyOptions options;
    AdmmSettings solver;
};

/// Parses the JSON study schema (see README). Throws ConfigError naming the
/// offending field path.
StudyPlan parse_study_plan(const std::string& json_text);
StudyPlan load_study_plan(const std::string& path);

/// Long-format CSV: one row per setting x estimator x target x metric.
void write_summary_csv(const std::vector<StudyReport>& reports, std::ostream& out);
/// Mean F-error per setting keyed by imbalance.
void write_imbalance_csv(const std::vector<StudyReport>& reports, std::ostream& out);
/// Raw and regularized F-error per setting keyed by snr_a.
void write_snr_csv(const std::vector<StudyReport>& reports, std::ostream& out);
/// Constrained vs soft-thresholded-only errors with PD percentages.
void write_comparison_csv(const std::vector<StudyReport>& reports, std::ostream& out);
void write_cv_curves_csv(const std::vector<StudyReport>& reports, std::ostream& out);
void write_roc_csv(const std::vector<StudyReport>& reports, std::ostream& out);

} // namespace rmcov
