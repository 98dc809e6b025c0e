#pragma once

#include <Eigen/Dense>

namespace rmcov {

/// Dense symmetric matrix. Symmetry is exact: the constructor averages the
/// input with its transpose, which leaves an already-symmetric input
/// bit-for-bit unchanged. All entries are finite.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(Eigen::Index dim);
    explicit SymMatrix(const Eigen::MatrixXd& values);

    static SymMatrix identity(Eigen::Index dim);
    static SymMatrix diagonal(const Eigen::VectorXd& diag);

    Eigen::Index dim() const noexcept { return values_.rows(); }
    double operator()(Eigen::Index row, Eigen::Index col) const { return values_(row, col); }
    const Eigen::MatrixXd& matrix() const noexcept { return values_; }

    friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
        return a.values_.rows() == b.values_.rows() && a.values_ == b.values_;
    }

private:
    Eigen::MatrixXd values_;
};

/// Smallest eigenvalue; throws EigenFailure when the eigensolver fails.
double min_eigenvalue(const SymMatrix& a);

} // namespace rmcov
