#include "ifair/svd.hpp"

#include <Eigen/SVD>

#include "ifair/errors.hpp"

namespace ifair {

RowMatrix SVDRepresentation::project(const RowMatrix& X) const {
    if (X.cols() != right.rows())
        throw ShapeError("row width does not match the decomposed data");
    return X * right;
}

SVDRepresentation svd_reduce(const RowMatrix& X, int k) {
    const Eigen::Index maxrank = std::min(X.rows(), X.cols());
    if (k < 1 || k > maxrank)
        throw ParameterError("rank must lie in [1, min(rows, cols)]");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SVDRepresentation rep;
    rep.rank = k;
    rep.singular_values = svd.singularValues().head(k);
    rep.right = svd.matrixV().leftCols(k);
    rep.Z = svd.matrixU().leftCols(k) * rep.singular_values.asDiagonal();
    rep.reconstruction = rep.Z * rep.right.transpose();
    return rep;
}

SVDRepresentation svd_reduce(const DataTable& table, int k) {
    return svd_reduce(table.X, k);
}

}  // namespace ifair
