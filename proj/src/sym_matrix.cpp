#include "rmcov/sym_matrix.hpp"

#include "rmcov/error.hpp"

namespace rmcov {

SymMatrix::SymMatrix(Eigen::Index dim) : values_(Eigen::MatrixXd::Zero(dim, dim)) {}

SymMatrix::SymMatrix(const Eigen::MatrixXd& values) {
    if (values.rows() != values.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "symmetric matrix must be square");
    }
    if (!values.allFinite()) {
        throw Error(ErrorCode::NonFinite, "symmetric matrix has non-finite entries");
    }
    values_ = 0.5 * (values + values.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index dim) {
    return SymMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

SymMatrix SymMatrix::diagonal(const Eigen::VectorXd& diag) {
    return SymMatrix(Eigen::MatrixXd(diag.asDiagonal()));
}

double min_eigenvalue(const SymMatrix& a) {
    if (a.dim() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.matrix(), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::EigenFailure, "symmetric eigensolver did not converge");
    }
    return solver.eigenvalues()(0);
}

} // namespace rmcov
