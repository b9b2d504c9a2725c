#include <doctest.h>

#include <Eigen/Dense>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ifair/data.hpp"
#include "ifair/errors.hpp"
#include "ifair/experiment.hpp"
#include "ifair/rng.hpp"
#include "oracles.hpp"

using namespace ifair;
namespace fs = std::filesystem;

namespace {

DataTable tiny_classification(int n, std::uint64_t seed) {
    DataTable t;
    Rng rng(seed);
    t.X.resize(n, 3);
    t.outcome.resize(n);
    for (int i = 0; i < n; ++i) {
        const double a = rng.uniform() < 0.4 ? 1.0 : 0.0;
        t.X(i, 0) = rng.normal();
        t.X(i, 1) = rng.normal() + 0.8 * t.X(i, 0);
        t.X(i, 2) = a;
        t.outcome[i] = (t.X(i, 0) + 0.5 * rng.normal() > 0.0) ? 1.0 : 0.0;
        t.protected_flag.push_back(static_cast<unsigned char>(a));
        t.row_ids.push_back(std::to_string(i));
    }
    t.columns = {{"f0", 0, "", false}, {"f1", 1, "", false}, {"grp", 2, "", true}};
    t.protected_idx = {2};
    t.task = TaskKind::classification;
    return t;
}

DataTable tiny_ranking(int n, std::uint64_t seed) {
    DataTable t = tiny_classification(n, seed);
    t.task = TaskKind::ranking;
    Rng rng(seed + 1);
    for (int i = 0; i < n; ++i) {
        t.query_ids.push_back("q" + std::to_string(i % 3));
        t.outcome[i] = std::floor(3.0 * rng.uniform());  // graded relevance
    }
    return t;
}

Split split_of(const DataTable& t, std::uint64_t seed) {
    SplitSpec sp;
    sp.seed = seed;
    return split(t, sp);
}

ExperimentRecord rec(int cell, double auc, double ynn) {
    ExperimentRecord r;
    r.cell_index = cell;
    r.method_id = "ifair-b";
    r.validation.auc = auc;
    r.validation.ynn = ynn;
    return r;
}

bool same_ignoring_wall(const ExperimentRecord& a, const ExperimentRecord& b) {
    return a.dataset_id == b.dataset_id && a.method_id == b.method_id &&
           a.cell_index == b.cell_index && a.lambda == b.lambda && a.mu == b.mu &&
           a.k == b.k && a.seed == b.seed && a.iterations == b.iterations &&
           a.final_loss == b.final_loss && a.failed == b.failed && a.failure == b.failure &&
           a.validation.acc == b.validation.acc && a.validation.auc == b.validation.auc &&
           a.validation.ynn == b.validation.ynn && a.test.acc == b.test.acc &&
           a.test.auc == b.test.auc && a.test.eqopp == b.test.eqopp &&
           a.test.parity == b.test.parity && a.test.ynn == b.test.ynn &&
           a.test.map == b.test.map && a.test.kt == b.test.kt &&
           a.test.pct_protected == b.test.pct_protected;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GridSpec fast_grid() {
    GridSpec g;
    g.restarts = 1;
    g.max_iterations = 3;
    return g;
}

}  // namespace

TEST_CASE("grid shapes: joint sweep, one-at-a-time, svd ranks, single-cell baselines") {
    const auto parts = split_of(tiny_classification(36, 5), 1);
    GridSpec g = fast_grid();

    auto records = run_grid(parts, Method::ifair_b, g, 9, "tiny");
    CHECK(records.size() == 6 * 6 * 3);
    for (std::size_t i = 0; i < records.size(); ++i)
        CHECK(records[i].cell_index == static_cast<int>(i));

    g.one_at_a_time = true;
    records = run_grid(parts, Method::ifair_a, g, 9, "tiny");
    // (lambda, 1) and (1, mu) sweeps share the (1, 1) cell.
    CHECK(records.size() == (6 + 6 - 1) * 3);

    g.one_at_a_time = false;
    records = run_grid(parts, Method::svd, g, 9, "tiny");
    CHECK(records.size() == 3);  // one per k, lambda/mu ignored

    records = run_grid(parts, Method::full, g, 9, "tiny");
    CHECK(records.size() == 1);
    CHECK(records[0].method_id == "full");
    CHECK(records[0].validation.auc.has_value());
    CHECK(records[0].validation.ynn.has_value());
    CHECK(records[0].test.acc.has_value());
    CHECK_FALSE(records[0].test.map.has_value());
}

TEST_CASE("per-cell seeds depend on the master seed and differ across cells") {
    const auto parts = split_of(tiny_classification(36, 2), 1);
    GridSpec g = fast_grid();
    g.ks = {2, 3};
    g.lambdas = {1.0};
    g.mus = {1.0};
    const auto a = run_grid(parts, Method::ifair_b, g, 1, "tiny");
    const auto b = run_grid(parts, Method::ifair_b, g, 2, "tiny");
    REQUIRE(a.size() == 2);
    CHECK(a[0].seed != a[1].seed);
    CHECK(a[0].seed != b[0].seed);
}

TEST_CASE("rerunning a grid reproduces every record except wall time") {
    const auto parts = split_of(tiny_classification(33, 7), 3);
    GridSpec g = fast_grid();
    g.lambdas = {0.1, 1.0};
    g.mus = {1.0};
    g.ks = {2, 4};
    const auto a = run_grid(parts, Method::ifair_b, g, 17, "tiny");
    const auto b = run_grid(parts, Method::ifair_b, g, 17, "tiny");
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(same_ignoring_wall(a[i], b[i]));
}

TEST_CASE("a thread pool yields the same records as a single thread") {
    const auto parts = split_of(tiny_classification(33, 7), 3);
    GridSpec g = fast_grid();
    g.lambdas = {0.1, 1.0};
    g.mus = {0.1, 1.0};
    g.ks = {2};
    const auto solo = run_grid(parts, Method::ifair_b, g, 21, "tiny");
    setenv("IFAIR_THREADS", "3", 1);
    const auto pooled = run_grid(parts, Method::ifair_b, g, 21, "tiny");
    unsetenv("IFAIR_THREADS");
    REQUIRE(solo.size() == pooled.size());
    for (std::size_t i = 0; i < solo.size(); ++i) CHECK(same_ignoring_wall(solo[i], pooled[i]));
}

TEST_CASE("a bad thread count is rejected") {
    const auto parts = split_of(tiny_classification(36, 2), 1);
    GridSpec g = fast_grid();
    setenv("IFAIR_THREADS", "zero", 1);
    CHECK_THROWS_AS(run_grid(parts, Method::full, g, 1, "tiny"), ConfigError);
    setenv("IFAIR_THREADS", "0", 1);
    CHECK_THROWS_AS(run_grid(parts, Method::full, g, 1, "tiny"), ConfigError);
    unsetenv("IFAIR_THREADS");
}

TEST_CASE("a cell that cannot run becomes a failed record, not an exception") {
    const auto parts = split_of(tiny_classification(60, 4), 1);
    GridSpec g = fast_grid();
    g.ks = {2, 50};  // rank 50 exceeds the 3 columns
    const auto records = run_grid(parts, Method::svd, g, 5, "tiny");
    REQUIRE(records.size() == 2);
    CHECK_FALSE(records[0].failed);
    CHECK(records[1].failed);
    CHECK_FALSE(records[1].failure.empty());
    CHECK_FALSE(records[1].validation.auc.has_value());

    const auto chosen = select(records, SelectionCriterion::harmonic_mean);
    REQUIRE(chosen.size() == 1);
    CHECK(chosen[0].k == 2);
}

TEST_CASE("selection criteria pick by validation metrics") {
    std::vector<ExperimentRecord> records{rec(0, 0.7, 0.7), rec(1, 0.9, 0.5),
                                          rec(2, 0.5, 0.9), rec(3, 0.8, 0.8)};

    auto u = select(records, SelectionCriterion::max_utility);
    REQUIRE(u.size() == 1);
    CHECK(u[0].cell_index == 1);

    auto f = select(records, SelectionCriterion::max_fairness);
    REQUIRE(f.size() == 1);
    CHECK(f[0].cell_index == 2);

    auto h = select(records, SelectionCriterion::harmonic_mean);
    REQUIRE(h.size() == 1);
    CHECK(h[0].cell_index == 3);  // 2*.8*.8/1.6 = .8 beats .646, .643

    auto p = select(records, SelectionCriterion::pareto_front);
    // (.7,.7) is dominated by (.8,.8); the other three are incomparable.
    REQUIRE(p.size() == 3);
    CHECK(p[0].cell_index == 1);
    CHECK(p[1].cell_index == 2);
    CHECK(p[2].cell_index == 3);
}

TEST_CASE("selection ties resolve to the lowest cell index") {
    std::vector<ExperimentRecord> records{rec(0, 0.8, 0.6), rec(1, 0.8, 0.6)};
    for (auto c : {SelectionCriterion::max_utility, SelectionCriterion::max_fairness,
                   SelectionCriterion::harmonic_mean}) {
        auto out = select(records, c);
        REQUIRE(out.size() == 1);
        CHECK(out[0].cell_index == 0);
    }
}

TEST_CASE("a single usable record is selected under every criterion") {
    std::vector<ExperimentRecord> records{rec(4, 0.6, 0.6)};
    for (auto c : {SelectionCriterion::max_utility, SelectionCriterion::max_fairness,
                   SelectionCriterion::harmonic_mean, SelectionCriterion::pareto_front}) {
        auto out = select(records, c);
        REQUIRE(out.size() == 1);
        CHECK(out[0].cell_index == 4);
    }
}

TEST_CASE("selection rejects empty or fully failed inputs") {
    CHECK_THROWS_AS(select({}, SelectionCriterion::harmonic_mean), ParameterError);
    std::vector<ExperimentRecord> records{rec(0, 0.8, 0.8)};
    records[0].failed = true;
    CHECK_THROWS_AS(select(records, SelectionCriterion::harmonic_mean), ParameterError);
}

TEST_CASE("the pareto front matches a brute-force oracle on random points") {
    Rng rng(99);
    std::vector<ExperimentRecord> records;
    std::vector<std::pair<double, double>> points;
    for (int i = 0; i < 60; ++i) {
        const double u = 0.5 + 0.5 * rng.uniform();
        const double f = 0.5 + 0.5 * rng.uniform();
        records.push_back(rec(i, u, f));
        points.emplace_back(u, f);
    }
    const auto front = select(records, SelectionCriterion::pareto_front);
    const auto expected = oracle::pareto_brute(points);
    REQUIRE(front.size() == expected.size());
    for (std::size_t i = 0; i < front.size(); ++i)
        CHECK(front[i].cell_index == expected[i]);
}

TEST_CASE("max-utility tolerates records with no fairness metric") {
    std::vector<ExperimentRecord> records{rec(0, 0.9, 0.5)};
    records[0].validation.ynn.reset();
    auto out = select(records, SelectionCriterion::max_utility);
    REQUIRE(out.size() == 1);
    CHECK_THROWS_AS(select(records, SelectionCriterion::harmonic_mean), ParameterError);
}

TEST_CASE("ranking grids report ranking metrics and select on MAP") {
    const auto parts = split_of(tiny_ranking(45, 12), 2);
    GridSpec g = fast_grid();
    const auto records = run_grid(parts, Method::full, g, 4, "tinyrank");
    REQUIRE(records.size() == 1);
    CHECK(records[0].validation.map.has_value());
    CHECK(records[0].test.kt.has_value());
    CHECK(records[0].test.pct_protected.has_value());
    CHECK(records[0].test.ynn.has_value());
    CHECK_FALSE(records[0].test.acc.has_value());
    const auto chosen = select(records, SelectionCriterion::max_utility);
    CHECK(chosen.size() == 1);
}

TEST_CASE("an adversary cannot beat the base rate on a group-blind representation") {
    Rng rng(31);
    const int n = 900;
    RowMatrix Z(n, 2);
    std::vector<unsigned char> flags;
    for (int i = 0; i < n; ++i) {
        Z(i, 0) = rng.normal();
        Z(i, 1) = rng.normal();
        flags.push_back(rng.uniform() < 0.3 ? 1 : 0);
    }
    const auto acc = obfuscation_probe(Z, flags);
    REQUIRE(acc.has_value());
    double rate = 0.0;
    for (auto f : flags) rate += f;
    rate /= n;
    const double base = std::max(rate, 1.0 - rate);
    CHECK(*acc == doctest::Approx(base).epsilon(0.07));
}

TEST_CASE("an adversary reads the group perfectly when the representation is the flag") {
    Rng rng(32);
    const int n = 300;
    RowMatrix Z(n, 1);
    std::vector<unsigned char> flags;
    for (int i = 0; i < n; ++i) {
        const auto f = static_cast<unsigned char>(rng.uniform() < 0.5);
        Z(i, 0) = f;
        flags.push_back(f);
    }
    const auto acc = obfuscation_probe(Z, flags);
    REQUIRE(acc.has_value());
    CHECK(*acc == doctest::Approx(1.0));
}

TEST_CASE("the probe is absent for single-class flags and rejects length mismatches") {
    RowMatrix Z = RowMatrix::Zero(40, 2);
    std::vector<unsigned char> ones(40, 1);
    CHECK_FALSE(obfuscation_probe(Z, ones).has_value());
    std::vector<unsigned char> short_flags(10, 0);
    CHECK_THROWS_AS(obfuscation_probe(Z, short_flags), ShapeError);
}

TEST_CASE("report files are byte-identical across reruns, except timings") {
    const auto parts = split_of(tiny_classification(33, 8), 5);
    GridSpec g = fast_grid();
    g.lambdas = {1.0};
    g.mus = {0.1, 1.0};
    g.ks = {2};
    const fs::path d1 = fs::temp_directory_path() / "ifair_rep1";
    const fs::path d2 = fs::temp_directory_path() / "ifair_rep2";
    for (const auto& d : {d1, d2}) {
        const auto records = run_grid(parts, Method::ifair_b, g, 13, "tiny");
        emit_report(records, select(records, g.criterion), TaskKind::classification,
                    d.string());
    }
    for (const char* name : {"records.csv", "records.json", "summary.csv", "selected.json"}) {
        CAPTURE(name);
        const auto a = slurp(d1 / name);
        CHECK(!a.empty());
        CHECK(a == slurp(d2 / name));
    }
    CHECK(fs::exists(d1 / "timings.csv"));

    const auto first_line = [](const std::string& s) { return s.substr(0, s.find('\n')); };
    CHECK(first_line(slurp(d1 / "records.csv")) ==
          "dataset,method,cell,lambda,mu,k,seed,iterations,final_loss,failed,failure,"
          "val_acc,val_auc,val_eqopp,val_parity,val_ynn,val_map,val_kt,val_pct_protected,"
          "test_acc,test_auc,test_eqopp,test_parity,test_ynn,test_map,test_kt,"
          "test_pct_protected");
    CHECK(first_line(slurp(d1 / "summary.csv")) == "method,lambda,mu,k,acc,auc,eqopp,parity,ynn");
}

TEST_CASE("grid spec validation rejects nonsense") {
    GridSpec g;
    g.lambdas = {-1.0};
    CHECK_THROWS_AS(g.validate(), ParameterError);
    g = GridSpec{};
    g.ks = {0};
    CHECK_THROWS_AS(g.validate(), ParameterError);
    g = GridSpec{};
    g.restarts = 0;
    CHECK_THROWS_AS(g.validate(), ParameterError);
    g = GridSpec{};
    g.lambdas.clear();
    CHECK_THROWS_AS(g.validate(), ParameterError);
    g = GridSpec{};
    g.max_iterations = 0;
    CHECK_THROWS_AS(g.validate(), ParameterError);
}

TEST_CASE("method and criterion names round-trip through their parsers") {
    for (auto m : {Method::full, Method::masked, Method::svd, Method::svd_masked,
                   Method::ifair_a, Method::ifair_b})
        CHECK(parse_method(method_name(m)) == m);
    for (auto c : {SelectionCriterion::max_utility, SelectionCriterion::max_fairness,
                   SelectionCriterion::harmonic_mean, SelectionCriterion::pareto_front})
        CHECK(parse_criterion(criterion_name(c)) == c);
    CHECK_THROWS_AS(parse_method("pca"), ConfigError);
    CHECK_THROWS_AS(parse_criterion("best"), ConfigError);
}
