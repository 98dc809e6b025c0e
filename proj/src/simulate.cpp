#include "rmcov/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <thread>

namespace rmcov {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

constexpr std::uint64_t kDataStream = 0;
constexpr std::uint64_t kFoldStream = 1;

} // namespace

CovTemplate CovTemplate::banded(Index p, double bandwidth, bool alternating, double scale) {
    CovTemplate t;
    t.kind = Kind::Banded;
    t.p = p;
    t.bandwidth = bandwidth;
    t.alternating = alternating;
    t.scale = scale;
    return t;
}

CovTemplate CovTemplate::ar1(Index p, double base, double scale) {
    CovTemplate t;
    t.kind = Kind::Ar1;
    t.p = p;
    t.base = base;
    t.scale = scale;
    return t;
}

SymMatrix build_template(const CovTemplate& t) {
    if (t.p < 1) throw Error(ErrorCode::InvalidArgument, "template dimension must be >= 1");
    if (!(t.scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "template scale must be > 0");
    if (t.kind == CovTemplate::Kind::Ar1 && !(std::abs(t.base) < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "AR(1) base must satisfy |base| < 1");
    }
    if (t.kind == CovTemplate::Kind::Banded && !(t.bandwidth > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "bandwidth must be > 0");
    }
    MatrixXd out(t.p, t.p);
    for (Index j = 0; j < t.p; ++j) {
        for (Index k = 0; k < t.p; ++k) {
            const Index lag = j > k ? j - k : k - j;
            double v = 0.0;
            if (t.kind == CovTemplate::Kind::Banded) {
                v = std::max(1.0 - static_cast<double>(lag) / t.bandwidth, 0.0);
                if (t.alternating && lag % 2 == 1) v = -v;
            } else {
                v = std::pow(t.base, static_cast<double>(lag));
            }
            out(j, k) = t.scale * v;
        }
    }
    SymMatrix result(out);
    const double floor = min_eigenvalue(result);
    if (!(floor > 0.0)) {
        throw Error(ErrorCode::NotPositiveDefinite,
                    "template has minimum eigenvalue " + std::to_string(floor));
    }
    return result;
}

std::string_view to_string(ModelId id) noexcept {
    switch (id) {
    case ModelId::M1: return "M1";
    case ModelId::M2: return "M2";
    case ModelId::M3: return "M3";
    case ModelId::M4: return "M4";
    }
    return "unknown";
}

ModelId parse_model_id(std::string_view name) {
    if (name == "M1") return ModelId::M1;
    if (name == "M2") return ModelId::M2;
    if (name == "M3") return ModelId::M3;
    if (name == "M4") return ModelId::M4;
    throw Error(ErrorCode::InvalidArgument, "unknown model '" + std::string(name) + "'");
}

ModelTemplates model_templates(ModelId id, Index p, double snr_a) {
    switch (id) {
    case ModelId::M1: return {CovTemplate::banded(p, 10.0), CovTemplate::banded(p, 10.0, true)};
    case ModelId::M2: return {CovTemplate::ar1(p, 0.6), CovTemplate::ar1(p, -0.6)};
    case ModelId::M3: return {CovTemplate::banded(p, 10.0), CovTemplate::banded(p, 10.0, false, snr_a)};
    case ModelId::M4: return {CovTemplate::banded(p, 10.0), CovTemplate::banded(p, 10.0, true, snr_a)};
    }
    throw Error(ErrorCode::InvalidArgument, "unknown model");
}

void StudyConfig::validate() const {
    if (p < 1) throw Error(ErrorCode::ConfigError, "p: must be >= 1");
    if (group_sizes.size() < 2) throw Error(ErrorCode::ConfigError, "group_sizes: need at least 2 subjects");
    for (std::size_t i = 0; i < group_sizes.size(); ++i) {
        if (group_sizes[i] < 1) {
            throw Error(ErrorCode::ConfigError, "group_sizes[" + std::to_string(i) + "]: must be >= 1");
        }
    }
    if (!(snr_a > 0.0)) throw Error(ErrorCode::ConfigError, "snr_a: must be > 0");
    if (replicates < 1) throw Error(ErrorCode::ConfigError, "replicates: must be >= 1");
}

std::vector<std::size_t> StudyConfig::imbalance_design(std::size_t m, std::size_t a, std::size_t N) {
    if (m < 2 || a < 1 || N < (m - 1) * a + 1) {
        throw Error(ErrorCode::ConfigError, "imbalance design needs m >= 2, a >= 1 and N > (m - 1) a");
    }
    std::vector<std::size_t> sizes(m, a);
    sizes.back() = N - (m - 1) * a;
    return sizes;
}

std::vector<std::size_t> StudyConfig::balanced_design(std::size_t m, std::size_t n) {
    if (m < 2 || n < 1) throw Error(ErrorCode::ConfigError, "balanced design needs m >= 2 and n >= 1");
    return std::vector<std::size_t>(m, n);
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

MatrixXd symmetric_sqrt(const SymMatrix& cov) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov.matrix());
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorCode::EigenFailure, "symmetric eigensolver did not converge");
    }
    Eigen::VectorXd w = eig.eigenvalues();
    MatrixXd v = eig.eigenvectors();
    const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
    for (Index j = 0; j < w.size(); ++j) {
        if (w(j) < -1e-10 * scale) {
            throw Error(ErrorCode::NotPositiveDefinite, "covariance has eigenvalue " + std::to_string(w(j)));
        }
        w(j) = std::sqrt(std::max(w(j), 0.0));
        for (Index k = 0; k < v.rows(); ++k) {
            if (std::abs(v(k, j)) > 1e-12) {
                if (v(k, j) < 0.0) v.col(j) = -v.col(j);
                break;
            }
        }
    }
    MatrixXd root = v * w.asDiagonal() * v.transpose();
    return 0.5 * (root + root.transpose());
}

RepeatedData generate(const StudyConfig& config, const SymMatrix& between, const SymMatrix& within,
                      std::size_t replicate) {
    config.validate();
    if (between.dim() != config.p || within.dim() != config.p) {
        throw Error(ErrorCode::DimensionMismatch, "template dimension does not match config.p");
    }
    const MatrixXd root_b = symmetric_sqrt(between);
    const MatrixXd root_e = symmetric_sqrt(within);
    auto rng = substream(config.seed, replicate, kDataStream);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index p = config.p;
    Eigen::VectorXd z(p);
    auto draw = [&]() {
        for (Index k = 0; k < p; ++k) z(k) = normal(rng);
    };

    std::vector<SubjectBlock> subjects;
    subjects.reserve(config.group_sizes.size());
    for (std::size_t i = 0; i < config.group_sizes.size(); ++i) {
        draw();
        const Eigen::VectorXd b = root_b * z;
        MatrixXd obs(static_cast<Index>(config.group_sizes[i]), p);
        for (Index j = 0; j < obs.rows(); ++j) {
            draw();
            obs.row(j) = (b + root_e * z).transpose();
        }
        subjects.push_back({"s" + std::to_string(i + 1), std::move(obs)});
    }
    return RepeatedData(std::move(subjects));
}

std::string_view to_string(Target t) noexcept {
    return t == Target::Between ? "between" : "within";
}

std::vector<Target> targets_for(SampleKind kind) {
    switch (kind) {
    case SampleKind::Within: return {Target::Within};
    case SampleKind::Between:
    case SampleKind::Anova: return {Target::Between};
    case SampleKind::Aggregated: return {Target::Between, Target::Within};
    }
    return {};
}

MetricSummary summarize(const std::vector<double>& values) {
    MetricSummary s;
    s.count = values.size();
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.se = std::sqrt(ss / static_cast<double>(values.size() - 1)) / std::sqrt(static_cast<double>(values.size()));
    }
    return s;
}

const EstimatorOutcome& StudyReport::outcome(SampleKind kind, Target target) const {
    for (const auto& o : outcomes) {
        if (o.kind.sample == kind && o.target == target) return o;
    }
    throw Error(ErrorCode::InvalidArgument, "report has no outcome for " + std::string(to_string(kind)) + "/" +
                                                std::string(to_string(target)));
}

MetricSummary StudyReport::metric(SampleKind kind, Target target, const std::string& name) const {
    const auto& o = outcome(kind, target);
    const auto it = o.samples.find(name);
    if (it == o.samples.end()) throw Error(ErrorCode::InvalidArgument, "report has no metric '" + name + "'");
    return summarize(it->second);
}

namespace {

struct TargetScores {
    std::vector<std::pair<std::string, double>> values;
};

struct EstimatorRun {
    std::vector<TargetScores> per_target;
    std::optional<CvResult> cv;
    std::vector<RocCurve> roc;
};

struct ReplicateRun {
    std::vector<EstimatorRun> estimators;
};

SymMatrix truth_for(Target t, EstimatorKind kind, const SymMatrix& between, const SymMatrix& within) {
    const SymMatrix& cov = t == Target::Between ? between : within;
    return kind.scale == Scale::Correlation ? to_correlation(cov) : cov;
}

double pd_pct(const SymMatrix& a) {
    return is_pd(a, 0.0).positive_definite ? 100.0 : 0.0;
}

ReplicateRun run_replicate(const StudyConfig& config, std::size_t replicate,
                           const std::vector<EstimatorKind>& estimators, const StudyOptions& options,
                           const AdmmSettings& settings, const SymMatrix& between, const SymMatrix& within) {
    const RepeatedData data = generate(config, between, within, replicate);
    const std::uint64_t fold_seed = substream(config.seed, replicate, kFoldStream)();

    ReplicateRun run;
    for (const auto& kind : estimators) {
        EstimatorRun er;
        const SymMatrix sample = sample_estimate(data, kind);

        CvConfig cv;
        cv.k_folds = options.k_folds;
        cv.lambda_grid = options.fixed_grid.empty() ? lambda_grid(sample, options.grid_length) : options.fixed_grid;
        cv.seed = fold_seed;
        cv.estimator = kind;
        const CvResult cv_result = kfold_cv(data, cv, settings);
        const double lambda = options.one_se ? cv_result.lambda_one_se() : cv_result.lambda_min();

        AdmmSettings s = settings;
        s.lambda = lambda;
        const AdmmResult fit = solve(sample, s);
        const SymMatrix unconstrained = soft_threshold_offdiag(sample, lambda);

        for (Target t : targets_for(kind.sample)) {
            const SymMatrix truth = truth_for(t, kind, between, within);
            TargetScores ts;
            ts.values.emplace_back(metric::kFError, frobenius_error(fit.solution, truth));
            ts.values.emplace_back(metric::kL2Error, spectral_error(fit.solution, truth));
            ts.values.emplace_back(metric::kPdPct, pd_pct(fit.solution));
            ts.values.emplace_back(metric::kRawFError, frobenius_error(sample, truth));
            ts.values.emplace_back(metric::kRawL2Error, spectral_error(sample, truth));
            ts.values.emplace_back(metric::kRawPdPct, pd_pct(sample));
            if (options.unconstrained) {
                ts.values.emplace_back(metric::kUncFError, frobenius_error(unconstrained, truth));
                ts.values.emplace_back(metric::kUncL2Error, spectral_error(unconstrained, truth));
                ts.values.emplace_back(metric::kUncPdPct, pd_pct(unconstrained));
            }
            const SupportScore support = support_score(fit.solution, truth);
            ts.values.emplace_back(metric::kTpr, support.tpr);
            ts.values.emplace_back(metric::kFpr, support.fpr);
            ts.values.emplace_back(metric::kLambda, lambda);
            ts.values.emplace_back(metric::kFastPathPct, fit.used_fast_path ? 100.0 : 0.0);
            er.per_target.push_back(std::move(ts));

            if (options.roc) {
                er.roc.push_back(roc_curve(sample, truth, lambda_grid(sample, options.roc_grid_length), settings, lambda));
            }
        }
        if (options.keep_cv_curves) er.cv = cv_result;
        run.estimators.push_back(std::move(er));
    }
    return run;
}

} // namespace

StudyReport run_study(const StudyConfig& config, const std::vector<EstimatorKind>& estimators,
                      const StudyOptions& options, const AdmmSettings& settings) {
    config.validate();
    settings.validate();
    if (estimators.empty()) throw Error(ErrorCode::ConfigError, "estimators: list is empty");

    const ModelTemplates templates = model_templates(config.model, config.p, config.snr_a);
    const SymMatrix between = build_template(templates.between);
    const SymMatrix within = build_template(templates.within);

    const std::size_t R = config.replicates;
    std::vector<std::optional<ReplicateRun>> runs(R);
    std::vector<std::string> errors(R);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t r = next++; r < R; r = next++) {
            try {
                runs[r] = run_replicate(config, r, estimators, options, settings, between, within);
            } catch (const std::exception& e) {
                errors[r] = e.what();
            }
        }
    };
    std::size_t threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, R);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    StudyReport report;
    report.config = config;
    report.design = design_summary(std::span<const std::size_t>(config.group_sizes));
    report.roc_grid_length = options.roc ? options.roc_grid_length : 0;
    for (const auto& kind : estimators) {
        for (Target t : targets_for(kind.sample)) report.outcomes.push_back({kind, t, {}});
    }
    for (std::size_t r = 0; r < R; ++r) {
        if (!runs[r]) {
            report.failures.push_back("replicate " + std::to_string(r) + ": " + errors[r]);
            continue;
        }
        ++report.replicates_completed;
        std::size_t slot = 0;
        for (std::size_t e = 0; e < estimators.size(); ++e) {
            const EstimatorRun& er = runs[r]->estimators[e];
            const auto targets = targets_for(estimators[e].sample);
            for (std::size_t t = 0; t < targets.size(); ++t, ++slot) {
                for (const auto& [name, value] : er.per_target[t].values) {
                    report.outcomes[slot].samples[name].push_back(value);
                }
                if (t < er.roc.size()) report.roc.push_back({r, estimators[e], targets[t], er.roc[t]});
            }
            if (er.cv) report.cv_curves.push_back({r, estimators[e], *er.cv});
        }
    }
    return report;
}

} // namespace rmcov
