#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "rmcov/solver.hpp"
#include "rmcov/sym_matrix.hpp"

namespace rmcov {

double frobenius_error(const SymMatrix& estimate, const SymMatrix& truth);

/// Largest singular value of estimate - truth.
double spectral_error(const SymMatrix& estimate, const SymMatrix& truth);

struct PdCheck {
    bool positive_definite = false;
    double min_eigenvalue = 0.0;
};

/// positive_definite iff the smallest eigenvalue exceeds tol.
PdCheck is_pd(const SymMatrix& a, double tol = 0.0);

/// Edge recovery over upper-triangle off-diagonal pairs.
struct SupportScore {
    double tpr = 0.0;
    double fpr = 0.0;
    std::size_t true_support_size = 0;
    std::size_t est_support_size = 0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    /// Set when the truth has no edges; tpr is then reported as 1.
    bool empty_truth = false;
};

inline constexpr double kDefaultZeroTol = 1e-12;

SupportScore support_score(const SymMatrix& estimate, const SymMatrix& truth,
                           double zero_tol = kDefaultZeroTol);

struct RocCurve {
    std::vector<double> lambdas;      // descending
    std::vector<SupportScore> points; // one per lambda
    std::optional<std::size_t> marker;
};

/// One solve per lambda, warm-started along the descending grid.
/// `marker_lambda`, when given, is located in the grid and reported as marker.
RocCurve roc_curve(const SymMatrix& sample, const SymMatrix& truth, const std::vector<double>& grid,
                   const AdmmSettings& settings, std::optional<double> marker_lambda = std::nullopt);

} // namespace rmcov
