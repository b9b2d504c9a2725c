#pragma once

#include <Eigen/Dense>

#include "ifair/data.hpp"

namespace ifair {

// Truncated singular value decomposition used as a comparison representation.
// Z = left factors scaled by singular values serves as the reduced data.
struct SVDRepresentation {
    int rank = 0;
    RowMatrix Z;                 // M x K, U_K * diag(sigma_K)
    Eigen::MatrixXd right;       // N x K, orthonormal columns
    Eigen::VectorXd singular_values;
    RowMatrix reconstruction;    // M x N, Z * right^T

    double reconstruction_error(const RowMatrix& X) const {
        return (X - reconstruction).norm();
    }

    // Project new rows into the learned subspace.
    RowMatrix project(const RowMatrix& X) const;
};

// Best rank-K approximation in Frobenius norm.
SVDRepresentation svd_reduce(const RowMatrix& X, int k);
SVDRepresentation svd_reduce(const DataTable& table, int k);

}  // namespace ifair
