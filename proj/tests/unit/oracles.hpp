#pragma once
// Reference implementations used only by the tests. They deliberately avoid
// the library's numerics (and Eigen's eigensolvers) so that agreement means
// something.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rmcov/model.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Eigen::MatrixXd& a) {
    Mat out(static_cast<std::size_t>(a.rows()), std::vector<double>(static_cast<std::size_t>(a.cols())));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out[i][j] = a(i, j);
    return out;
}

inline Eigen::MatrixXd to_eigen(const Mat& a) {
    const auto n = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = a[i][j];
    return out;
}

struct EigenPairs {
    std::vector<double> values; // ascending
    Mat vectors;                // vectors[k] is the k-th eigenvector
};

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
inline EigenPairs jacobi(Mat a) {
    const std::size_t n = a.size();
    Mat v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0, total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                total += a[i][j] * a[i][j];
                if (i != j) off += a[i][j] * a[i][j];
            }
        if (off <= 1e-32 * std::max(total, 1e-300)) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a[x][x] < a[y][y]; });
    EigenPairs out;
    for (auto k : order) {
        out.values.push_back(a[k][k]);
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = v[i][k];
        out.vectors.push_back(std::move(col));
    }
    return out;
}

/// Eigenvalues clamped at `lo` (and optionally the positive part only).
inline Mat clamp_spectrum(const Mat& a, double lo) {
    const auto eig = jacobi(a);
    const std::size_t n = a.size();
    Mat out(n, std::vector<double>(n, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        const double w = std::max(eig.values[k], lo);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) out[i][j] += w * eig.vectors[k][i] * eig.vectors[k][j];
    }
    return out;
}

inline double min_eig(const Mat& a) { return jacobi(a).values.front(); }

inline double soft(double x, double t) {
    const double m = std::abs(x) - t;
    return m > 0 ? std::copysign(m, x) : 0.0;
}

inline double objective(const Mat& b, const Mat& s, double lambda) {
    double fit = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            fit += (s[i][j] - b[i][j]) * (s[i][j] - b[i][j]);
            if (i != j) l1 += std::abs(s[i][j]);
        }
    return 0.5 * fit + lambda * l1;
}

struct Bracket {
    double lower = 0.0; // dual value
    double upper = 0.0; // objective of a feasible primal point
};

/// Accelerated projected gradient on the dual of
///   min 1/2 ||S - B||^2 + lambda |S|_1,off  s.t.  S >= delta I.
/// For a multiplier Z >= 0 the inner minimizer is S(Z) = soft(B + Z, lambda)
/// and the dual gradient is delta I - S(Z), which is 1-Lipschitz.
inline Bracket dual_bracket(const Mat& b, double lambda, double delta, int iterations) {
    const std::size_t n = b.size();
    auto inner = [&](const Mat& z) {
        Mat s(n, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                s[i][j] = i == j ? b[i][j] + z[i][j] : soft(b[i][j] + z[i][j], lambda);
        return s;
    };
    auto dual_value = [&](const Mat& z) {
        const Mat s = inner(z);
        double v = objective(b, s, lambda);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) v -= z[i][j] * (s[i][j] - (i == j ? delta : 0.0));
        }
        return v;
    };
    Mat z(n, std::vector<double>(n, 0.0)), y = z;
    double t = 1.0;
    double best_lower = -1e300;
    for (int it = 0; it < iterations; ++it) {
        const Mat s = inner(y);
        Mat step(n, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) step[i][j] = y[i][j] - (s[i][j] - (i == j ? delta : 0.0));
        const Mat z_next = clamp_spectrum(step, 0.0);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) y[i][j] = z_next[i][j] + (t - 1.0) / t_next * (z_next[i][j] - z[i][j]);
        z = z_next;
        t = t_next;
        if (it % 50 == 49 || it + 1 == iterations) best_lower = std::max(best_lower, dual_value(z));
    }
    Bracket out;
    out.lower = best_lower;
    // Project the inner minimizer onto the feasible set for an upper bound.
    out.upper = objective(b, clamp_spectrum(inner(z), delta), lambda);
    return out;
}

// Naive double-loop versions of the sample estimators.

inline std::vector<double> subject_mean(const Eigen::MatrixXd& y) {
    std::vector<double> mean(static_cast<std::size_t>(y.cols()), 0.0);
    for (Eigen::Index j = 0; j < y.rows(); ++j)
        for (Eigen::Index k = 0; k < y.cols(); ++k) mean[k] += y(j, k);
    for (auto& v : mean) v /= static_cast<double>(y.rows());
    return mean;
}

inline Mat naive_within(const rmcov::RepeatedData& d) {
    const auto p = static_cast<std::size_t>(d.dim());
    Mat out(p, std::vector<double>(p, 0.0));
    for (const auto& s : d.subjects()) {
        const auto mean = subject_mean(s.observations);
        for (Eigen::Index j = 0; j < s.observations.rows(); ++j)
            for (std::size_t k = 0; k < p; ++k)
                for (std::size_t l = 0; l < p; ++l)
                    out[k][l] += (s.observations(j, k) - mean[k]) * (s.observations(j, l) - mean[l]);
    }
    const double denom = static_cast<double>(d.total_observations() - d.num_subjects());
    for (auto& row : out)
        for (auto& v : row) v /= denom;
    return out;
}

inline Mat naive_aggregated(const rmcov::RepeatedData& d) {
    const auto p = static_cast<std::size_t>(d.dim());
    const std::size_t m = d.num_subjects();
    std::vector<std::vector<double>> means;
    std::vector<double> grand(p, 0.0);
    for (const auto& s : d.subjects()) {
        means.push_back(subject_mean(s.observations));
        for (std::size_t k = 0; k < p; ++k) grand[k] += means.back()[k] / static_cast<double>(m);
    }
    Mat out(p, std::vector<double>(p, 0.0));
    for (const auto& mu : means)
        for (std::size_t k = 0; k < p; ++k)
            for (std::size_t l = 0; l < p; ++l) out[k][l] += (mu[k] - grand[k]) * (mu[l] - grand[l]) / (m - 1.0);
    return out;
}

inline Mat naive_between(const rmcov::RepeatedData& d) {
    const Mat bar = naive_aggregated(d);
    const Mat eps = naive_within(d);
    double inv = 0.0;
    for (const auto& s : d.subjects()) inv += 1.0 / static_cast<double>(s.observations.rows());
    const double m = static_cast<double>(d.num_subjects());
    Mat out = bar;
    for (std::size_t k = 0; k < out.size(); ++k)
        for (std::size_t l = 0; l < out.size(); ++l) out[k][l] -= inv / m * eps[k][l];
    return out;
}

inline Mat naive_anova(const rmcov::RepeatedData& d) {
    const auto p = static_cast<std::size_t>(d.dim());
    const double m = static_cast<double>(d.num_subjects());
    const double N = static_cast<double>(d.total_observations());
    std::vector<double> grand(p, 0.0);
    double sum_sq = 0.0;
    for (const auto& s : d.subjects()) {
        sum_sq += static_cast<double>(s.observations.rows() * s.observations.rows());
        for (Eigen::Index j = 0; j < s.observations.rows(); ++j)
            for (std::size_t k = 0; k < p; ++k) grand[k] += s.observations(j, k) / N;
    }
    const double n0 = (N - sum_sq / N) / (m - 1.0);
    Mat out(p, std::vector<double>(p, 0.0));
    for (const auto& s : d.subjects()) {
        const auto mu = subject_mean(s.observations);
        const double ni = static_cast<double>(s.observations.rows());
        for (std::size_t k = 0; k < p; ++k)
            for (std::size_t l = 0; l < p; ++l) out[k][l] += ni / (m - 1.0) * (mu[k] - grand[k]) * (mu[l] - grand[l]);
    }
    const Mat eps = naive_within(d);
    for (std::size_t k = 0; k < p; ++k)
        for (std::size_t l = 0; l < p; ++l) out[k][l] = (out[k][l] - eps[k][l]) / n0;
    return out;
}

inline double max_abs_diff(const Mat& a, const Eigen::MatrixXd& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(a[i][j] - b(i, j)));
    return worst;
}

/// Independent normal data with the requested group sizes.
inline rmcov::RepeatedData random_data(const std::vector<std::size_t>& sizes, Eigen::Index p, std::uint64_t seed,
                                       double subject_spread = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<rmcov::SubjectBlock> subjects;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        Eigen::VectorXd b(p);
        for (Eigen::Index k = 0; k < p; ++k) b(k) = subject_spread * normal(rng);
        Eigen::MatrixXd y(static_cast<Eigen::Index>(sizes[i]), p);
        for (Eigen::Index j = 0; j < y.rows(); ++j)
            for (Eigen::Index k = 0; k < p; ++k) y(j, k) = b(k) + normal(rng);
        subjects.push_back({"s" + std::to_string(i), y});
    }
    return rmcov::RepeatedData(std::move(subjects));
}

inline Eigen::MatrixXd random_symmetric(Eigen::Index p, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::MatrixXd a(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = normal(rng);
    return a;
}

} // namespace oracle
