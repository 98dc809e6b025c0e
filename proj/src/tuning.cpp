#include "rmcov/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace rmcov {

std::string_view to_string(SampleKind kind) noexcept {
    switch (kind) {
    case SampleKind::Within: return "within";
    case SampleKind::Between: return "between";
    case SampleKind::Anova: return "anova";
    case SampleKind::Aggregated: return "aggregated";
    }
    return "unknown";
}

std::string_view to_string(Scale scale) noexcept {
    return scale == Scale::Covariance ? "cov" : "cor";
}

SampleKind parse_sample_kind(std::string_view name) {
    if (name == "within") return SampleKind::Within;
    if (name == "between") return SampleKind::Between;
    if (name == "anova") return SampleKind::Anova;
    if (name == "aggregated") return SampleKind::Aggregated;
    throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + std::string(name) + "'");
}

Scale parse_scale(std::string_view name) {
    if (name == "cov") return Scale::Covariance;
    if (name == "cor") return Scale::Correlation;
    throw Error(ErrorCode::InvalidArgument, "unknown mode '" + std::string(name) + "'");
}

SymMatrix sample_estimate(const RepeatedData& data, EstimatorKind kind) {
    SymMatrix cov;
    switch (kind.sample) {
    case SampleKind::Within: cov = within_sample(data); break;
    case SampleKind::Between: cov = between_sample(data); break;
    case SampleKind::Anova: cov = anova_sample(data); break;
    case SampleKind::Aggregated: cov = aggregated_sample(data); break;
    }
    return kind.scale == Scale::Correlation ? to_correlation(cov) : cov;
}

void CvConfig::validate() const {
    if (k_folds < 2) throw Error(ErrorCode::InvalidArgument, "k_folds must be >= 2");
    if (lambda_grid.empty()) throw Error(ErrorCode::InvalidArgument, "lambda grid must be nonempty");
    for (std::size_t l = 0; l < lambda_grid.size(); ++l) {
        if (!(lambda_grid[l] >= 0.0) || !std::isfinite(lambda_grid[l])) {
            throw Error(ErrorCode::InvalidArgument, "lambda grid values must be finite and >= 0");
        }
        if (l > 0 && !(lambda_grid[l] < lambda_grid[l - 1])) {
            throw Error(ErrorCode::InvalidArgument, "lambda grid must be strictly decreasing");
        }
    }
}

std::vector<std::vector<std::size_t>> fold_partition(std::size_t num_subjects, std::size_t k_folds,
                                                     std::uint64_t seed) {
    if (k_folds < 2 || num_subjects < k_folds) {
        throw Error(ErrorCode::InfeasibleSplit, "need 2 <= k_folds <= m (m = " + std::to_string(num_subjects) +
                                                    ", k = " + std::to_string(k_folds) + ")");
    }
    std::vector<std::size_t> order(num_subjects);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::vector<std::size_t>> folds(k_folds);
    const std::size_t base = num_subjects / k_folds;
    const std::size_t extra = num_subjects % k_folds;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k_folds; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + size));
        std::sort(folds[f].begin(), folds[f].end());
        pos += size;
    }
    return folds;
}

CvResult summarize_cv(std::vector<double> lambdas, std::vector<std::vector<double>> fold_errors) {
    if (lambdas.empty() || lambdas.size() != fold_errors.size()) {
        throw Error(ErrorCode::InvalidArgument, "cross-validation errors do not match the grid");
    }
    CvResult out;
    out.lambdas = std::move(lambdas);
    out.fold_errors = std::move(fold_errors);
    const std::size_t L = out.lambdas.size();
    out.mean_error.resize(L);
    out.standard_error.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        const auto& errs = out.fold_errors[l];
        const double k = static_cast<double>(errs.size());
        const double mean = std::accumulate(errs.begin(), errs.end(), 0.0) / k;
        double ss = 0.0;
        for (double e : errs) ss += (e - mean) * (e - mean);
        const double sd = errs.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
        out.mean_error[l] = mean;
        out.standard_error[l] = sd / std::sqrt(k);
    }
    out.selected_min = static_cast<std::size_t>(
        std::min_element(out.mean_error.begin(), out.mean_error.end()) - out.mean_error.begin());
    const double bound = out.mean_error[out.selected_min] + out.standard_error[out.selected_min];
    out.selected_one_se = out.selected_min;
    for (std::size_t l = 0; l < out.selected_min; ++l) {
        if (out.mean_error[l] <= bound) {
            out.selected_one_se = l;
            break;
        }
    }
    return out;
}

CvResult kfold_cv(const RepeatedData& data, const CvConfig& config, const AdmmSettings& settings) {
    config.validate();
    settings.validate();
    const auto folds = fold_partition(data.num_subjects(), config.k_folds, config.seed);
    const std::size_t L = config.lambda_grid.size();
    std::vector<std::vector<double>> errors(L, std::vector<double>(config.k_folds, 0.0));

    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> train;
        train.reserve(data.num_subjects() - folds[f].size());
        for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
        }
        std::sort(train.begin(), train.end());

        SymMatrix train_sample;
        SymMatrix valid_sample;
        try {
            train_sample = sample_estimate(data.subset(train), config.estimator);
            valid_sample = sample_estimate(data.subset(folds[f]), config.estimator);
        } catch (const Error& e) {
            throw Error(ErrorCode::InfeasibleSplit, "fold " + std::to_string(f) + ": " + e.what());
        }

        WarmStart warm;
        bool have_warm = false;
        for (std::size_t l = 0; l < L; ++l) {
            AdmmSettings s = settings;
            s.lambda = config.lambda_grid[l];
            const AdmmResult fit = solve(train_sample, s, have_warm ? &warm : nullptr);
            if (!fit.used_fast_path) {
                warm = warm_start_from(fit);
                have_warm = true;
            }
            errors[l][f] = (fit.solution.matrix() - valid_sample.matrix()).squaredNorm();
        }
    }
    return summarize_cv(config.lambda_grid, std::move(errors));
}

std::vector<double> lambda_grid(const SymMatrix& sample, std::size_t length) {
    if (length < 2) throw Error(ErrorCode::InvalidArgument, "lambda grid length must be >= 2");
    double top = 0.0;
    const Eigen::Index p = sample.dim();
    for (Eigen::Index k = 0; k < p; ++k) {
        for (Eigen::Index l = k + 1; l < p; ++l) top = std::max(top, std::abs(sample(k, l)));
    }
    if (!(top > 0.0)) top = std::numeric_limits<double>::epsilon();
    std::vector<double> grid(length);
    const double steps = static_cast<double>(length - 1);
    for (std::size_t l = 0; l < length; ++l) {
        grid[l] = top * std::pow(10.0, -2.0 * static_cast<double>(l) / steps);
    }
    grid.front() = top;
    return grid;
}

void TheoryConstants::validate() const {
    if (!(c1 > 0.0) || !(c2 > 0.0) || !(m_b > 0.0) || !(m_eps > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "theory constants must be > 0");
    }
}

namespace {

void require_dims(std::size_t m, std::size_t N, std::size_t p) {
    if (p < 2) throw Error(ErrorCode::InvalidArgument, "p must be >= 2");
    if (m < 1 || N <= m) throw Error(ErrorCode::DegenerateDesign, "need N > m >= 1");
}

} // namespace

double theory_lambda_eps(std::size_t m, std::size_t N, std::size_t p, const TheoryConstants& c) {
    c.validate();
    require_dims(m, N, p);
    const double n = static_cast<double>(N);
    return c.c1 * std::sqrt(n * std::log(static_cast<double>(p))) / (n - static_cast<double>(m));
}

double theory_lambda_b(const DesignSummary& d, std::size_t p, const TheoryConstants& c) {
    c.validate();
    require_dims(d.m, d.N, p);
    const double m = static_cast<double>(d.m);
    const double n = static_cast<double>(d.N);
    const double logp = std::log(static_cast<double>(p));
    return c.c1 * std::sqrt(logp / m) + c.c2 * std::sqrt(n * logp) / ((n - m) * d.n_star) + c.m_b / m +
           c.m_eps / (m * d.n_star);
}

double theory_lambda_0(const DesignSummary& d, std::size_t p, const TheoryConstants& c) {
    c.validate();
    require_dims(d.m, d.N, p);
    const double m = static_cast<double>(d.m);
    const double logp = std::log(static_cast<double>(p));
    return c.c1 * std::sqrt(logp / m) + c.m_b / m + c.m_eps / d.n_star;
}

double theory_lambda_tilde_b(const DesignSummary& d, std::size_t p, const TheoryConstants& c) {
    c.validate();
    require_dims(d.m, d.N, p);
    const double m = static_cast<double>(d.m);
    const double n = static_cast<double>(d.N);
    const double n0 = d.n_zero;
    const double logp = std::log(static_cast<double>(p));
    return c.c1 * d.imbalance * std::sqrt(logp / m) + c.c2 * std::sqrt(n * logp) / (n0 * (n - m)) +
           (2.0 * n - n0 * m) * c.m_b / (2.0 * n0 * m) + c.m_eps / (n0 * m);
}

double theory_lambda_1(const DesignSummary& d, std::size_t p, const TheoryConstants& c) {
    c.validate();
    require_dims(d.m, d.N, p);
    const double m = static_cast<double>(d.m);
    const double logp = std::log(static_cast<double>(p));
    return c.c1 * std::sqrt(logp / m) + c.m_b + (2.0 - d.n_star) * c.m_eps / (2.0 * d.n_star);
}

} // namespace rmcov
