#include "rmcov/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace rmcov {

namespace {

void require_same_dim(const SymMatrix& a, const SymMatrix& b) {
    if (a.dim() != b.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "matrices differ in dimension (" + std::to_string(a.dim()) +
                                                      " vs " + std::to_string(b.dim()) + ")");
    }
}

} // namespace

double frobenius_error(const SymMatrix& estimate, const SymMatrix& truth) {
    require_same_dim(estimate, truth);
    return (estimate.matrix() - truth.matrix()).norm();
}

double spectral_error(const SymMatrix& estimate, const SymMatrix& truth) {
    require_same_dim(estimate, truth);
    if (estimate.dim() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(estimate.matrix() - truth.matrix(), Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorCode::EigenFailure, "symmetric eigensolver did not converge");
    }
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

PdCheck is_pd(const SymMatrix& a, double tol) {
    PdCheck out;
    out.min_eigenvalue = min_eigenvalue(a);
    out.positive_definite = out.min_eigenvalue > tol;
    return out;
}

SupportScore support_score(const SymMatrix& estimate, const SymMatrix& truth, double zero_tol) {
    require_same_dim(estimate, truth);
    SupportScore s;
    std::size_t true_zeros = 0;
    const Eigen::Index p = truth.dim();
    for (Eigen::Index k = 0; k < p; ++k) {
        for (Eigen::Index l = k + 1; l < p; ++l) {
            const bool edge = std::abs(truth(k, l)) > zero_tol;
            const bool found = std::abs(estimate(k, l)) > zero_tol;
            if (edge) ++s.true_support_size; else ++true_zeros;
            if (found) ++s.est_support_size;
            if (edge && found) ++s.true_positives;
            if (!edge && found) ++s.false_positives;
        }
    }
    s.empty_truth = s.true_support_size == 0;
    s.tpr = s.empty_truth ? 1.0
                          : static_cast<double>(s.true_positives) / static_cast<double>(s.true_support_size);
    s.fpr = true_zeros == 0 ? 0.0 : static_cast<double>(s.false_positives) / static_cast<double>(true_zeros);
    return s;
}

RocCurve roc_curve(const SymMatrix& sample, const SymMatrix& truth, const std::vector<double>& grid,
                   const AdmmSettings& settings, std::optional<double> marker_lambda) {
    require_same_dim(sample, truth);
    RocCurve curve;
    curve.lambdas = grid;
    std::sort(curve.lambdas.begin(), curve.lambdas.end(), std::greater<>());
    curve.points.reserve(curve.lambdas.size());

    WarmStart warm;
    bool have_warm = false;
    for (double lambda : curve.lambdas) {
        AdmmSettings s = settings;
        s.lambda = lambda;
        const AdmmResult fit = solve(sample, s, have_warm ? &warm : nullptr);
        if (!fit.used_fast_path) {
            warm = warm_start_from(fit);
            have_warm = true;
        }
        curve.points.push_back(support_score(fit.solution, truth));
    }
    if (marker_lambda) {
        std::size_t best = 0;
        for (std::size_t l = 1; l < curve.lambdas.size(); ++l) {
            if (std::abs(curve.lambdas[l] - *marker_lambda) < std::abs(curve.lambdas[best] - *marker_lambda)) best = l;
        }
        if (!curve.lambdas.empty()) curve.marker = best;
    }
    return curve;
}

} // namespace rmcov
