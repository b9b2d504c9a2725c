#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ifair/errors.hpp"
#include "ifair/rng.hpp"
#include "ifair/svd.hpp"

using namespace ifair;

namespace {

RowMatrix random_matrix(Rng& rng, int m, int n) {
    RowMatrix X(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) X(i, j) = rng.normal();
    return X;
}

}  // namespace

TEST_CASE("rank-1 data is reconstructed exactly at rank 1") {
    Eigen::VectorXd u(4), v(3);
    u << 1, -2, 0.5, 3;
    v << 2, 1, -1;
    RowMatrix X = u * v.transpose();
    const auto rep = svd_reduce(X, 1);
    CHECK((X - rep.reconstruction).norm() < 1e-8);
}

TEST_CASE("full rank reconstructs exactly") {
    Rng rng(5);
    const RowMatrix X = random_matrix(rng, 7, 4);
    const auto rep = svd_reduce(X, 4);
    CHECK((X - rep.reconstruction).norm() < 1e-8);
}

TEST_CASE("truncation error matches a full-decomposition oracle") {
    Rng rng(9);
    const RowMatrix X = random_matrix(rng, 8, 5);
    const auto rep = svd_reduce(X, 3);

    Eigen::JacobiSVD<Eigen::MatrixXd> full(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::VectorXd sv = full.singularValues();
    for (int i = 3; i < sv.size(); ++i) sv[i] = 0.0;
    const Eigen::MatrixXd best =
        full.matrixU().leftCols(5) * sv.asDiagonal() * full.matrixV().transpose();
    CHECK(rep.reconstruction_error(X) ==
          doctest::Approx((X - best).norm()).epsilon(1e-8));
}

TEST_CASE("right factors are orthonormal") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 4 + static_cast<int>(rng.below(10));
        const int n = 2 + static_cast<int>(rng.below(8));
        const int k = 1 + static_cast<int>(rng.below(std::min(m, n)));
        const auto rep = svd_reduce(random_matrix(rng, m, n), k);
        const Eigen::MatrixXd gram = rep.right.transpose() * rep.right;
        CHECK((gram - Eigen::MatrixXd::Identity(k, k)).norm() < 1e-8);
    }
}

TEST_CASE("reconstruction error never increases with rank") {
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        const RowMatrix X = random_matrix(rng, 9, 6);
        double last = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= 6; ++k) {
            const double err = svd_reduce(X, k).reconstruction_error(X);
            CHECK(err <= last + 1e-10);
            last = err;
        }
    }
}

TEST_CASE("rank bounds are enforced") {
    Rng rng(21);
    const RowMatrix X = random_matrix(rng, 5, 3);
    CHECK_THROWS_AS(svd_reduce(X, 0), ParameterError);
    CHECK_THROWS_AS(svd_reduce(X, 4), ParameterError);
    CHECK_NOTHROW(svd_reduce(X, 3));
}

TEST_CASE("projection reproduces the training representation") {
    Rng rng(25);
    const RowMatrix X = random_matrix(rng, 10, 4);
    const auto rep = svd_reduce(X, 2);
    CHECK((rep.project(X) - rep.Z).norm() < 1e-8);
    CHECK_THROWS_AS(rep.project(random_matrix(rng, 3, 5)), ShapeError);
}

TEST_CASE("table overload decomposes the feature matrix") {
    Rng rng(29);
    DataTable t;
    t.X = random_matrix(rng, 6, 3);
    const auto rep = svd_reduce(t, 2);
    const auto direct = svd_reduce(t.X, 2);
    CHECK(rep.Z == direct.Z);
}
