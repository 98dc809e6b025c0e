#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Dense>

#include "rmcov/error.hpp"
#include "rmcov/sym_matrix.hpp"

namespace rmcov {

/// Settings for min 1/2 ||S - B||_F^2 + lambda |S|_1 (off-diagonal) s.t. S >= delta I.
struct AdmmSettings {
    double lambda = 0.0;
    /// Eigenvalue floor; when unset, default_delta(B) is used at solve time.
    std::optional<double> delta;
    double rho0 = 0.1;
    double eps_abs = 1e-8;
    double eps_rel = 1e-8;
    std::size_t max_iters = 10000;
    /// When false, ADMM runs even if the soft-thresholded input is feasible.
    bool fast_path = true;
    /// Over-relaxation factor in (0, 2); 1 is plain ADMM.
    double relaxation = 1.0;
    /// When set, a converged iterate whose kkt_residual exceeds this is not
    /// accepted; the tolerances are tightened tenfold (at most six times) and
    /// the iterations continue.
    std::optional<double> kkt_tol;

    void validate() const;
};

/// 1e-4 * max(max diagonal of B, 1).
double default_delta(const SymMatrix& input);

struct AdmmResult {
    /// The sparse iterate: off-diagonal zeros are exact, min eigenvalue is
    /// at least delta - 1e-8.
    SymMatrix solution;
    std::size_t iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    bool used_fast_path = false;
    double min_eigenvalue = 0.0;
    double delta = 0.0;
    double rho = 0.0;
    /// Final dual variable; with rho and solution it warm-starts a nearby solve.
    Eigen::MatrixXd dual;
};

/// Iterate state handed to a subsequent solve, e.g. along a lambda path.
struct WarmStart {
    Eigen::MatrixXd theta;
    Eigen::MatrixXd dual;
    double rho = 0.1;
};

WarmStart warm_start_from(const AdmmResult& result);

class MaxItersExceeded : public Error {
public:
    explicit MaxItersExceeded(AdmmResult last);

    const AdmmResult& last() const noexcept { return last_; }

private:
    AdmmResult last_;
};

/// Off-diagonal soft-thresholding; the diagonal is left untouched.
SymMatrix soft_threshold_offdiag(const SymMatrix& a, double threshold);

/// Eigenvalues of `a` clamped from below at delta.
SymMatrix psd_floor_projection(const SymMatrix& a, double delta);

/// Objective 1/2 ||S - B||_F^2 + lambda * sum_{k != l} |S_kl|.
double objective(const SymMatrix& input, const SymMatrix& estimate, double lambda);

/// Solves the constrained problem with ADMM. When the soft-thresholded input
/// is already >= delta I it is returned directly (used_fast_path).
/// Throws MaxItersExceeded with the last iterate when not converged.
AdmmResult solve(const SymMatrix& input, const AdmmSettings& settings,
                 const WarmStart* warm = nullptr);

/// Frobenius norm of the smallest stationarity residual
/// S - B + lambda G - Z over subgradients G of the off-diagonal l1 norm and
/// PSD multipliers Z supported on the eigenspace of S at the floor delta.
/// Zero certifies optimality.
double kkt_residual(const SymMatrix& input, const SymMatrix& solution, double lambda, double delta);

} // namespace rmcov
