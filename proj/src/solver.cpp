#include "rmcov/solver.hpp"

#include <algorithm>
#include <cmath>

namespace rmcov {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

constexpr double kZeroTol = 1e-12;
constexpr double kRhoMin = 1e-8;
constexpr double kRhoMax = 1e8;
constexpr double kMinTighten = 1e-6; // at most six tenfold tightenings

void soft_threshold_in_place(MatrixXd& a, double threshold) {
    const Index p = a.rows();
    for (Index l = 0; l < p; ++l) {
        for (Index k = 0; k < p; ++k) {
            if (k == l) continue;
            const double v = a(k, l);
            const double mag = std::abs(v) - threshold;
            a(k, l) = mag > 0.0 ? std::copysign(mag, v) : 0.0;
        }
    }
}

/// True when a - floor I admits a Cholesky factorization.
bool above_floor(const MatrixXd& a, double floor) {
    MatrixXd shifted = a;
    shifted.diagonal().array() -= floor;
    Eigen::LLT<MatrixXd> llt(shifted);
    return llt.info() == Eigen::Success;
}

/// Writes (a, delta)_+ into out. Only the clamped eigenpairs are touched:
/// out = a + sum_{w_j < delta} (delta - w_j) v_j v_j^T.
void project_floor(const MatrixXd& a, double delta,
                   Eigen::SelfAdjointEigenSolver<MatrixXd>& eig, MatrixXd& out) {
    eig.compute(a, Eigen::ComputeEigenvectors);
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorCode::EigenFailure, "symmetric eigensolver did not converge");
    }
    const auto& w = eig.eigenvalues();
    Index clamped = 0;
    while (clamped < w.size() && w(clamped) < delta) ++clamped;
    out = a;
    if (clamped > 0) {
        const auto vecs = eig.eigenvectors().leftCols(clamped);
        const Eigen::VectorXd lift = (delta - w.head(clamped).array()).matrix();
        out.noalias() += vecs * lift.asDiagonal() * vecs.transpose();
        out = 0.5 * (out + out.transpose()).eval();
    }
}

double eigen_floor(const MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorCode::EigenFailure, "symmetric eigensolver did not converge");
    }
    return eig.eigenvalues()(0);
}

} // namespace

void AdmmSettings::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorCode::InvalidArgument, "lambda must be finite and >= 0");
    }
    if (delta && (!(*delta > 0.0) || !std::isfinite(*delta))) {
        throw Error(ErrorCode::InvalidArgument, "delta must be finite and > 0");
    }
    if (!(rho0 > 0.0) || !(eps_abs > 0.0) || !(eps_rel > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "rho0, eps_abs and eps_rel must be > 0");
    }
    if (!(relaxation > 0.0 && relaxation < 2.0)) {
        throw Error(ErrorCode::InvalidArgument, "relaxation must lie in (0, 2)");
    }
    if (max_iters < 1) {
        throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
    }
    if (kkt_tol && !(*kkt_tol > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "kkt_tol must be > 0");
    }
}

double default_delta(const SymMatrix& input) {
    const double top = input.dim() > 0 ? input.matrix().diagonal().maxCoeff() : 1.0;
    return 1e-4 * std::max(top, 1.0);
}

WarmStart warm_start_from(const AdmmResult& result) {
    WarmStart warm;
    warm.theta = result.solution.matrix();
    warm.dual = result.dual.size() ? result.dual : MatrixXd::Zero(result.solution.dim(), result.solution.dim());
    warm.rho = result.rho;
    return warm;
}

MaxItersExceeded::MaxItersExceeded(AdmmResult last)
    : Error(ErrorCode::MaxItersExceeded,
            "ADMM stopped after " + std::to_string(last.iterations) + " iterations (primal residual " +
                std::to_string(last.primal_residual) + ", dual residual " +
                std::to_string(last.dual_residual) + ")"),
      last_(std::move(last)) {}

SymMatrix soft_threshold_offdiag(const SymMatrix& a, double threshold) {
    if (!(threshold >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "threshold must be >= 0");
    }
    MatrixXd out = a.matrix();
    soft_threshold_in_place(out, threshold);
    return SymMatrix(out);
}

SymMatrix psd_floor_projection(const SymMatrix& a, double delta) {
    if (!(delta >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "delta must be >= 0");
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a.dim());
    MatrixXd out;
    project_floor(a.matrix(), delta, eig, out);
    return SymMatrix(out);
}

double objective(const SymMatrix& input, const SymMatrix& estimate, double lambda) {
    if (input.dim() != estimate.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "objective arguments differ in dimension");
    }
    const MatrixXd& s = estimate.matrix();
    const double l1 = s.cwiseAbs().sum() - s.diagonal().cwiseAbs().sum();
    return 0.5 * (s - input.matrix()).squaredNorm() + lambda * l1;
}

AdmmResult solve(const SymMatrix& input, const AdmmSettings& settings, const WarmStart* warm) {
    settings.validate();
    const Index p = input.dim();
    const double lambda = settings.lambda;
    const double delta = settings.delta.value_or(default_delta(input));
    const MatrixXd& b = input.matrix();

    MatrixXd theta = b;
    soft_threshold_in_place(theta, lambda);

    AdmmResult result;
    result.delta = delta;

    if (settings.fast_path && above_floor(theta, delta)) {
        result.solution = SymMatrix(theta);
        result.used_fast_path = true;
        result.min_eigenvalue = eigen_floor(theta);
        result.rho = settings.rho0;
        result.dual = MatrixXd::Zero(p, p);
        return result;
    }

    MatrixXd dual = MatrixXd::Zero(p, p);
    double rho = settings.rho0;
    if (warm != nullptr && warm->theta.rows() == p && warm->dual.rows() == p) {
        theta = warm->theta;
        dual = warm->dual;
        rho = warm->rho;
    }

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(p);
    MatrixXd sigma(p, p);
    MatrixXd work(p, p);
    MatrixXd theta_prev(p, p);
    const double scale_abs = static_cast<double>(p) * settings.eps_abs;
    const double alpha = settings.relaxation;

    bool converged = false;
    std::size_t iter = 0;
    double r_norm = 0.0;
    double s_norm = 0.0;
    double tighten = 1.0;
    double floor_eig = 0.0;
    MatrixXd candidate;
    while (iter < settings.max_iters) {
        ++iter;
        work = (b + rho * theta - dual) / (1.0 + rho);
        project_floor(work, delta, eig, sigma);

        theta_prev = theta;
        if (alpha != 1.0) work = alpha * sigma + (1.0 - alpha) * theta_prev;
        const MatrixXd& relaxed = alpha != 1.0 ? work : sigma;
        theta = relaxed + dual / rho;
        soft_threshold_in_place(theta, lambda / rho);
        dual += rho * (relaxed - theta);

        r_norm = (sigma - theta).norm();
        s_norm = rho * (theta - theta_prev).norm();
        const double eps_pri = tighten * (scale_abs + settings.eps_rel * std::max(sigma.norm(), theta.norm()));
        const double eps_dual = tighten * (scale_abs + settings.eps_rel * dual.norm());

        if (r_norm <= eps_pri && s_norm <= eps_dual) {
            // Sigma sits on or above the floor, so theta is at most
            // ||Sigma - Theta|| below it. A diagonal shift of that size
            // restores the floor without touching the off-diagonal support.
            candidate = theta;
            floor_eig = eigen_floor(candidate);
            if (floor_eig < delta) {
                candidate.diagonal().array() += delta - floor_eig;
                floor_eig = eigen_floor(candidate);
            }
            if (!settings.kkt_tol || tighten <= kMinTighten ||
                kkt_residual(input, SymMatrix(candidate), lambda, delta) <= *settings.kkt_tol) {
                converged = true;
                break;
            }
            tighten *= 0.1;
            continue;
        }

        // Residual balancing with mu = 10, tau = 2. The dual is kept unscaled,
        // so it needs no rescaling when rho changes.
        if (r_norm > 10.0 * s_norm) {
            rho = std::min(rho * 2.0, kRhoMax);
        } else if (s_norm > 10.0 * r_norm) {
            rho = std::max(rho / 2.0, kRhoMin);
        }
    }
    if (converged) {
        theta = std::move(candidate);
    } else {
        floor_eig = eigen_floor(theta);
    }

    result.solution = SymMatrix(theta);
    result.iterations = iter;
    result.primal_residual = r_norm;
    result.dual_residual = s_norm;
    result.rho = rho;
    result.dual = dual;
    result.min_eigenvalue = floor_eig;
    if (!converged) throw MaxItersExceeded(std::move(result));
    return result;
}

double kkt_residual(const SymMatrix& input, const SymMatrix& solution, double lambda, double delta) {
    if (input.dim() != solution.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "kkt_residual arguments differ in dimension");
    }
    const Index p = solution.dim();
    const MatrixXd& s = solution.matrix();
    const MatrixXd grad = s - input.matrix();

    // Entries where the l1 subgradient is free to move inside [-1, 1].
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> free(p, p);
    MatrixXd fixed = MatrixXd::Zero(p, p);
    for (Index l = 0; l < p; ++l) {
        for (Index k = 0; k < p; ++k) {
            free(k, l) = false;
            if (k == l) continue;
            if (std::abs(s(k, l)) <= kZeroTol) {
                free(k, l) = true;
            } else {
                fixed(k, l) = lambda * (s(k, l) > 0.0 ? 1.0 : -1.0);
            }
        }
    }

    auto best_subgradient = [&](const MatrixXd& multiplier) {
        MatrixXd residual = grad + fixed - multiplier;
        for (Index l = 0; l < p; ++l) {
            for (Index k = 0; k < p; ++k) {
                if (!free(k, l)) continue;
                // choose lambda * g in [-lambda, lambda] closest to cancelling the rest
                const double target = -(grad(k, l) - multiplier(k, l));
                const double g = std::clamp(target, -lambda, lambda);
                residual(k, l) = grad(k, l) + g - multiplier(k, l);
            }
        }
        return residual;
    };

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorCode::EigenFailure, "symmetric eigensolver did not converge");
    }
    const auto& w = eig.eigenvalues();
    const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
    const double active_tol = 1e-6 * scale;
    Index active = 0;
    while (active < p && w(active) <= delta + active_tol) ++active;

    MatrixXd multiplier = MatrixXd::Zero(p, p);
    MatrixXd residual = best_subgradient(multiplier);
    if (active == 0) return residual.norm();

    // Alternate between the optimal subgradient and the optimal PSD
    // multiplier on the active eigenspace; each step cannot increase the norm.
    const MatrixXd basis = eig.eigenvectors().leftCols(active);
    double best = residual.norm();
    for (int round = 0; round < 2000; ++round) {
        const MatrixXd target = residual + multiplier; // = grad + lambda G
        MatrixXd reduced = basis.transpose() * target * basis;
        reduced = 0.5 * (reduced + reduced.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<MatrixXd> small(reduced);
        const Eigen::VectorXd clipped = small.eigenvalues().cwiseMax(0.0);
        const MatrixXd psd = small.eigenvectors() * clipped.asDiagonal() * small.eigenvectors().transpose();
        multiplier = basis * psd * basis.transpose();
        residual = best_subgradient(multiplier);
        const double norm = residual.norm();
        if (best - norm <= 1e-14 * (1.0 + best)) {
            best = std::min(best, norm);
            break;
        }
        best = norm;
    }
    return best;
}

} // namespace rmcov
