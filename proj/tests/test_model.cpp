#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "ifair/model.hpp"
#include "ifair/rng.hpp"
#include "oracles.hpp"

using namespace ifair;

namespace {

RowMatrix random_matrix(Rng& rng, int m, int n, double lo = 0.0, double hi = 1.0) {
    RowMatrix X(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) X(i, j) = rng.uniform(lo, hi);
    return X;
}

IFairModel random_model(Rng& rng, int k, int n, const std::vector<int>& prot = {}) {
    IFairModel model;
    model.V = random_matrix(rng, k, n);
    model.alpha.resize(n);
    for (int j = 0; j < n; ++j) model.alpha[j] = rng.uniform();
    model.protected_idx = prot;
    return model;
}

Eigen::VectorXd random_params(Rng& rng, const HyperParams& hp, int n,
                              bool near_zero_protected, const std::vector<int>& prot) {
    Eigen::VectorXd params(hp.k * n + n);
    for (Eigen::Index i = 0; i < params.size(); ++i) params[i] = rng.uniform();
    if (near_zero_protected)
        for (int idx : prot) params[hp.k * n + idx] = 1e-6;
    return params;
}

}  // namespace

TEST_CASE("weighted distance matches hand values") {
    Eigen::VectorXd a(2), b(2), w(2);
    a << 1, 0;
    b << 0, 0;
    w << 1, 1;
    CHECK(minkowski_distance(a, a, w, 2.0) == doctest::Approx(0.0).epsilon(1e-9));
    // the root guard offsets non-zero distances by up to 1e-6
    CHECK(std::abs(minkowski_distance(a, b, w, 2.0) - 1.0) < 2e-6);

    Eigen::VectorXd c(2), d(2), w2(2);
    c << 1, 3;
    d << 2, 1;
    w2 << 0.5, 2;
    CHECK(std::abs(minkowski_distance(c, d, w2, 2.0) - std::sqrt(8.5)) < 2e-6);

    std::vector<int> mask{0};
    CHECK(std::abs(minkowski_distance(c, d, w2, 2.0, &mask) - std::sqrt(0.5)) < 2e-6);
}

// Triangle triples are drawn in >= 2 dimensions: on collinear triples the
// root-guard correction shifts each side by eps^(1/p), which breaks the
// otherwise tight equality case by ~1e-6 by construction.
TEST_CASE("distance symmetry, nonnegativity and triangle inequality") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(5));
        Eigen::VectorXd a(n), b(n), c(n), w(n);
        for (int j = 0; j < n; ++j) {
            a[j] = rng.uniform(-3, 3);
            b[j] = rng.uniform(-3, 3);
            c[j] = rng.uniform(-3, 3);
            w[j] = rng.uniform();
        }
        const double p = (trial % 2 == 0) ? 2.0 : 3.0;
        const double dab = minkowski_distance(a, b, w, p);
        CHECK(dab >= 0.0);
        CHECK(dab == minkowski_distance(b, a, w, p));
        const double dac = minkowski_distance(a, c, w, p);
        const double dcb = minkowski_distance(c, b, w, p);
        CHECK(dab <= dac + dcb + 1e-9);
    }
}

TEST_CASE("distance rejects non-finite input") {
    Eigen::VectorXd a(2), w(2);
    a << 1, 2;
    w << 1, 1;
    Eigen::VectorXd bad = a;
    bad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(minkowski_distance(a, bad, w, 2.0), NumericError);
}

TEST_CASE("assignment probabilities form a distribution with known values") {
    Rng rng(3);
    SUBCASE("single prototype") {
        auto model = random_model(rng, 1, 3);
        Eigen::VectorXd x(3);
        x << 0.2, 0.8, 0.5;
        auto u = model.assignment(x);
        REQUIRE(u.size() == 1);
        CHECK(u[0] == doctest::Approx(1.0));
        CHECK(model.transform(x).isApprox(model.V.row(0).transpose(), 1e-12));
    }
    SUBCASE("equidistant prototypes split evenly") {
        IFairModel model;
        model.V.resize(2, 1);
        model.V << 0.0, 2.0;
        model.alpha = Eigen::VectorXd::Ones(1);
        Eigen::VectorXd x(1);
        x << 1.0;
        auto u = model.assignment(x);
        CHECK(u[0] == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(u[1] == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(model.transform(x)[0] == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("distance gap of ln 2 gives a 2:1 split") {
        IFairModel model;
        model.V.resize(2, 1);
        model.V << 1.0, 1.0 + std::log(2.0);
        model.alpha = Eigen::VectorXd::Ones(1);
        Eigen::VectorXd x(1);
        x << 1.0;
        auto u = model.assignment(x);
        CHECK(u[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-5));
        CHECK(u[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
    }
    SUBCASE("random models stay row-stochastic") {
        for (int trial = 0; trial < 50; ++trial) {
            const int k = 1 + static_cast<int>(rng.below(5));
            const int n = 1 + static_cast<int>(rng.below(5));
            auto model = random_model(rng, k, n);
            auto X = random_matrix(rng, 7, n, -2, 2);
            auto rep = model.represent(X);
            for (int i = 0; i < 7; ++i) {
                CHECK(rep.U.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
                CHECK(rep.U.row(i).minCoeff() >= 0.0);
                CHECK(rep.U.row(i).maxCoeff() <= 1.0);
            }
            CHECK((rep.Xt - rep.U * model.V).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
}

TEST_CASE("transform ignores protected coordinates bitwise when their weight is zero") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 3 + static_cast<int>(rng.below(4));
        const int k = 2 + static_cast<int>(rng.below(3));
        std::vector<int> prot{0, n - 1};
        auto model = random_model(rng, k, n, prot);
        for (int idx : prot) model.alpha[idx] = 0.0;
        Eigen::VectorXd x(n);
        for (int j = 0; j < n; ++j) x[j] = rng.uniform(-4, 4);
        Eigen::VectorXd x2 = x;
        for (int idx : prot) x2[idx] = rng.uniform(-50, 50);
        const Eigen::VectorXd t1 = model.transform(x);
        const Eigen::VectorXd t2 = model.transform(x2);
        CHECK(std::memcmp(t1.data(), t2.data(), sizeof(double) * n) == 0);

        RowMatrix X1(1, n), X2(1, n);
        X1.row(0) = x.transpose();
        X2.row(0) = x2.transpose();
        const RowMatrix b1 = model.transform_all(X1);
        const RowMatrix b2 = model.transform_all(X2);
        CHECK(std::memcmp(b1.data(), b2.data(), sizeof(double) * n) == 0);
    }
}

TEST_CASE("utility loss matches hand values") {
    RowMatrix X(2, 2), Xt(2, 2);
    X << 0, 0, 1, 1;
    Xt = X;
    CHECK(utility_loss(X, Xt) == 0.0);
    Xt(0, 1) += 2.0;
    CHECK(utility_loss(X, Xt) == 4.0);
    Xt << 0, 1, 1, 0;
    CHECK(utility_loss(X, Xt) == 2.0);
}

TEST_CASE("pairwise loss matches the brute-force oracle") {
    Rng rng(9);
    for (int trial = 0; trial < 40; ++trial) {
        const int m = 2 + static_cast<int>(rng.below(8));
        const int n = 2 + static_cast<int>(rng.below(5));
        auto X = random_matrix(rng, m, n);
        auto Xt = random_matrix(rng, m, n);
        const double p = (trial % 3 == 0) ? 3.0 : 2.0;
        IFairModel model = random_model(rng, 2, n, {0});
        model.p = p;
        const auto pairs = PairSet::all_pairs(m);
        const double got = fairness_loss(X, Xt, model, pairs);
        const double want =
            oracle::fairness_loss_all_pairs(X, Xt, model.alpha, model.protected_idx, p);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("empty and single-row pair sets give zero fairness loss") {
    RowMatrix X = RowMatrix::Zero(1, 3);
    IFairModel model;
    model.V = RowMatrix::Zero(1, 3);
    model.alpha = Eigen::VectorXd::Ones(3);
    CHECK(fairness_loss(X, X, model, PairSet::all_pairs(1)) == 0.0);
}

TEST_CASE("pair sets enumerate and sample deterministically") {
    const auto full = PairSet::all_pairs(5);
    CHECK(full.count() == 10);
    int seen = 0;
    full.for_each([&](int i, int j) {
        CHECK(i < j);
        ++seen;
    });
    CHECK(seen == 10);

    const auto s1 = PairSet::sampled(50, 200, 123);
    const auto s2 = PairSet::sampled(50, 200, 123);
    CHECK(s1.count() == 200);
    std::vector<std::pair<int, int>> l1, l2;
    s1.for_each([&](int i, int j) {
        CHECK(i < j);
        CHECK(j < 50);
        l1.emplace_back(i, j);
    });
    s2.for_each([&](int i, int j) { l2.emplace_back(i, j); });
    CHECK(l1 == l2);
}

TEST_CASE("objective with zero weights is identically zero") {
    Rng rng(17);
    HyperParams hp;
    hp.lambda = 0.0;
    hp.mu = 0.0;
    hp.k = 3;
    auto X = random_matrix(rng, 8, 4);
    Objective obj(X, {0}, hp);
    auto params = random_params(rng, hp, 4, false, {0});
    Eigen::VectorXd g;
    CHECK(obj.value_and_grad(params, g) == 0.0);
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("objective equals its two loss terms recombined") {
    Rng rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 4 + static_cast<int>(rng.below(22));
        const int n = 2 + static_cast<int>(rng.below(5));
        HyperParams hp;
        hp.k = 2 + static_cast<int>(rng.below(3));
        hp.lambda = rng.uniform(0.0, 2.0);
        hp.mu = rng.uniform(0.0, 2.0);
        hp.p = (trial % 4 == 0) ? 3.0 : 2.0;
        std::vector<int> prot{1};
        auto X = random_matrix(rng, m, n);
        Objective obj(X, prot, hp);
        auto params = random_params(rng, hp, n, false, prot);

        IFairModel model;
        model.V = Eigen::Map<const RowMatrix>(params.data(), hp.k, n);
        model.alpha = params.tail(n);
        model.p = hp.p;
        model.protected_idx = prot;
        const auto rep = model.represent(X);
        const double direct = hp.lambda * utility_loss(X, rep.Xt) +
                              hp.mu * fairness_loss(X, rep.Xt, model, obj.pairs());
        CHECK(obj.value(params) == doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("objective loss is invariant under prototype permutation") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 5 + static_cast<int>(rng.below(10));
        const int n = 2 + static_cast<int>(rng.below(4));
        HyperParams hp;
        hp.k = 2 + static_cast<int>(rng.below(4));
        hp.lambda = 1.0;
        hp.mu = 0.7;
        auto X = random_matrix(rng, m, n);
        Objective obj(X, {0}, hp);
        auto params = random_params(rng, hp, n, false, {0});

        Eigen::VectorXd shuffled = params;
        std::vector<int> perm(hp.k);
        for (int k = 0; k < hp.k; ++k) perm[k] = k;
        for (int k = hp.k - 1; k > 0; --k)
            std::swap(perm[k], perm[rng.below(static_cast<std::uint64_t>(k + 1))]);
        for (int k = 0; k < hp.k; ++k)
            shuffled.segment(static_cast<Eigen::Index>(k) * n, n) =
                params.segment(static_cast<Eigen::Index>(perm[k]) * n, n);
        CHECK(obj.value(shuffled) == doctest::Approx(obj.value(params)).epsilon(1e-9));
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(41);
    for (int trial = 0; trial < 8; ++trial) {
        const int m = 4 + static_cast<int>(rng.below(10));
        const int n = 2 + static_cast<int>(rng.below(5));
        HyperParams hp;
        hp.k = 1 + static_cast<int>(rng.below(4));
        hp.lambda = (trial % 3 == 0) ? 0.1 : 1.0;
        hp.mu = (trial % 2 == 0) ? 1.0 : 10.0;
        hp.p = (trial == 5) ? 3.0 : 2.0;
        hp.seed = 1000 + trial;
        if (trial == 7) hp.max_full_pair_rows = 2;  // exercise the sampled-pair path
        std::vector<int> prot{0};
        auto X = random_matrix(rng, m, n);
        Objective obj(X, prot, hp);
        auto params = random_params(rng, hp, n, trial % 2 == 1, prot);

        CHECK(oracle::fd_agreement_error(obj, params) < 1e-5);
    }
}

TEST_CASE("objective rejects malformed input") {
    Rng rng(55);
    HyperParams hp;
    hp.k = 2;
    auto X = random_matrix(rng, 5, 3);
    Objective obj(X, {}, hp);
    Eigen::VectorXd wrong(5);
    wrong.setZero();
    CHECK_THROWS_AS(obj.value(wrong), ShapeError);
    Eigen::VectorXd bad(obj.size());
    bad.setZero();
    bad[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(obj.value(bad), NumericError);

    HyperParams negative;
    negative.lambda = -1.0;
    CHECK_THROWS_AS(negative.validate(), ParameterError);
}

TEST_CASE("models round-trip through their file format") {
    Rng rng(61);
    auto model = random_model(rng, 3, 4, {1, 3});
    model.p = 2.0;
    auto path = (std::filesystem::temp_directory_path() / "ifair_model.json").string();
    model.save(path);
    auto back = IFairModel::load(path);
    CHECK(back.V == model.V);
    CHECK(back.alpha == model.alpha);
    CHECK(back.p == model.p);
    CHECK(back.protected_idx == model.protected_idx);
}

TEST_CASE("model validation rejects bad states") {
    IFairModel model;
    model.V = RowMatrix::Ones(2, 3);
    model.alpha = Eigen::VectorXd::Ones(3);
    model.alpha[1] = -0.5;
    CHECK_THROWS_AS(model.validate(), ParameterError);
    model.alpha[1] = 0.5;
    model.protected_idx = {7};
    CHECK_THROWS_AS(model.validate(), ParameterError);
    model.protected_idx = {};
    model.p = 0.5;
    CHECK_THROWS_AS(model.validate(), ParameterError);
}
