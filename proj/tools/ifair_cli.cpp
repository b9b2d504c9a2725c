#include <CLI11.hpp>
#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ifair/credit_demo.hpp"
#include "ifair/data.hpp"
#include "ifair/errors.hpp"
#include "ifair/experiment.hpp"
#include "ifair/linear.hpp"
#include "ifair/metrics.hpp"
#include "ifair/optimizer.hpp"
#include "ifair/rerank.hpp"
#include "ifair/svd.hpp"
#include "ifair/synthetic.hpp"
#include "ifair/textio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string config;
    std::string out = "out";
    std::uint64_t seed = 0;
    std::string method = "ifair-b";
    std::string criterion = "harmonic";
    bool full_table_stats = false;

    double lambda = 1.0;
    double mu = 1.0;
    int k = 10;
    double p = 2.0;
    int restarts = 3;
    int max_iter = 200;

    std::vector<double> lambdas;
    std::vector<double> mus;
    std::vector<int> ks;
    bool one_at_a_time = false;

    std::string model_path;
    std::string in_path;
    std::string records_path;
    double rerank_p = 0.5;
    double rerank_alpha = 0.1;
    int synth_n = 100;
};

struct LoadedDataset {
    std::string id;
    ifair::DataTable table;  // raw encoded rows, original order
    ifair::Split parts;      // normalized per the chosen statistics policy
    ifair::ScalingParams scaling;
};

// Dataset configs carry the feature schema plus "csv" (path relative to the
// config file) and an optional "id". The IFAIR_CREDIT_CSV environment
// variable replaces the csv path when the id is "german_credit".
LoadedDataset load_dataset(const Options& opt) {
    if (opt.config.empty()) throw ifair::ConfigError("this subcommand needs --config");
    std::ifstream in(opt.config);
    if (!in) throw ifair::IoError("cannot open config file: " + opt.config);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ifair::ConfigError("invalid config JSON in " + opt.config + ": " + e.what());
    }

    LoadedDataset data;
    data.id = j.value("id", fs::path(opt.config).stem().string());
    std::string csv = j.value("csv", std::string());
    if (csv.empty()) throw ifair::ConfigError("config must declare a 'csv' path");
    fs::path csv_path(csv);
    if (csv_path.is_relative()) csv_path = fs::path(opt.config).parent_path() / csv_path;
    std::string resolved = csv_path.string();
    if (data.id == "german_credit") resolved = ifair::resolve_credit_csv(resolved);

    const auto schema = ifair::load_schema(opt.config);
    data.table = ifair::load_csv(resolved, schema);

    ifair::SplitSpec sp;
    sp.seed = opt.seed;
    if (opt.full_table_stats) {
        data.scaling = ifair::compute_unit_variance(data.table);
        data.parts = ifair::split(ifair::apply_scaling(data.table, data.scaling), sp);
    } else {
        data.parts = ifair::split(data.table, sp);
        data.scaling = ifair::compute_unit_variance(data.parts.train);
        data.parts.train = ifair::apply_scaling(data.parts.train, data.scaling);
        data.parts.validation = ifair::apply_scaling(data.parts.validation, data.scaling);
        data.parts.test = ifair::apply_scaling(data.parts.test, data.scaling);
    }
    return data;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ifair::IoError("cannot create output directory: " + dir);
}

void write_table_csv(const ifair::DataTable& t, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ifair::IoError("cannot open for writing: " + path.string());
    out << "row_id";
    for (const auto& c : t.columns) out << ',' << ifair::csv_escape(c.name);
    out << ",outcome,protected\n";
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
        out << ifair::csv_escape(t.row_ids[i]);
        for (Eigen::Index c = 0; c < t.cols(); ++c) out << ',' << ifair::format_double(t.X(i, c));
        out << ',' << ifair::format_double(t.outcome[i]) << ','
            << static_cast<int>(t.protected_flag[i]) << '\n';
    }
    if (!out) throw ifair::IoError("write failed: " + path.string());
}

void write_matrix_csv(const ifair::RowMatrix& X, const std::vector<std::string>& row_ids,
                      const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ifair::IoError("cannot open for writing: " + path.string());
    out << "row_id";
    for (Eigen::Index c = 0; c < X.cols(); ++c) out << ",z" << c;
    out << '\n';
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        out << ifair::csv_escape(row_ids[i]);
        for (Eigen::Index c = 0; c < X.cols(); ++c) out << ',' << ifair::format_double(X(i, c));
        out << '\n';
    }
    if (!out) throw ifair::IoError("write failed: " + path.string());
}

ifair::GridSpec grid_from(const Options& opt) {
    ifair::GridSpec grid;
    if (!opt.lambdas.empty()) grid.lambdas = opt.lambdas;
    if (!opt.mus.empty()) grid.mus = opt.mus;
    if (!opt.ks.empty()) grid.ks = opt.ks;
    grid.restarts = opt.restarts;
    grid.criterion = ifair::parse_criterion(opt.criterion);
    grid.one_at_a_time = opt.one_at_a_time;
    grid.max_iterations = opt.max_iter;
    return grid;
}

int cmd_prep(const Options& opt) {
    const auto data = load_dataset(opt);
    ensure_dir(opt.out);
    const fs::path dir(opt.out);
    write_table_csv(data.parts.train, dir / "train.csv");
    write_table_csv(data.parts.validation, dir / "validation.csv");
    write_table_csv(data.parts.test, dir / "test.csv");

    json stats;
    stats["dataset"] = data.id;
    stats["rows_read"] = data.table.stats.rows_read;
    stats["rows_dropped_missing_outcome"] = data.table.stats.rows_dropped_missing_outcome;
    json imputed = json::object();
    for (const auto& [col, n] : data.table.stats.imputed_cells) imputed[col] = n;
    stats["imputed_cells"] = imputed;
    json scale = json::object();
    for (std::size_t c = 0; c < data.parts.train.columns.size(); ++c)
        scale[data.parts.train.columns[c].name] = data.scaling.column_std[c];
    stats["column_std"] = scale;
    stats["split"] = {{"train", data.parts.indices.train.size()},
                      {"validation", data.parts.indices.validation.size()},
                      {"test", data.parts.indices.test.size()}};
    std::ofstream out(dir / "stats.json");
    out << stats.dump(2) << '\n';

    json idx;
    idx["train"] = data.parts.indices.train;
    idx["validation"] = data.parts.indices.validation;
    idx["test"] = data.parts.indices.test;
    std::ofstream iout(dir / "split_indices.json");
    iout << idx.dump(2) << '\n';
    std::cout << "prep: " << data.table.rows() << " rows -> " << opt.out << "\n";
    return 0;
}

int cmd_fit(const Options& opt) {
    const auto data = load_dataset(opt);
    const auto method = ifair::parse_method(opt.method);
    if (method != ifair::Method::ifair_a && method != ifair::Method::ifair_b)
        throw ifair::ConfigError("fit trains iFair models; use --method ifair-a or ifair-b");

    ifair::HyperParams hp;
    hp.lambda = opt.lambda;
    hp.mu = opt.mu;
    hp.k = opt.k;
    hp.p = opt.p;
    hp.init = method == ifair::Method::ifair_b ? ifair::InitScheme::ifair_b
                                               : ifair::InitScheme::ifair_a;
    hp.restarts = opt.restarts;
    hp.seed = opt.seed;
    hp.opt.max_iterations = opt.max_iter;
    hp.opt.trace = true;

    const auto result = ifair::fit(data.parts.train, hp);
    ensure_dir(opt.out);
    const fs::path dir(opt.out);
    result.model.save((dir / "model.json").string());
    ifair::write_trace_csv(result, (dir / "trace.csv").string());

    json j;
    j["dataset"] = data.id;
    j["method"] = opt.method;
    j["lambda"] = hp.lambda;
    j["mu"] = hp.mu;
    j["k"] = hp.k;
    j["seed"] = hp.seed;
    j["final_loss"] = result.final_loss;
    j["iterations"] = result.iterations;
    j["best_restart"] = result.best_restart;
    json restarts = json::array();
    for (const auto& r : result.history)
        restarts.push_back({{"seed", r.seed},
                            {"final_loss", r.final_loss},
                            {"grad_norm", r.grad_norm},
                            {"iterations", r.iterations},
                            {"aborted", r.aborted},
                            {"note", r.note}});
    j["restarts"] = restarts;
    std::ofstream out(dir / "fit.json");
    out << j.dump(2) << '\n';
    std::cout << "fit: loss " << result.final_loss << " after " << result.iterations
              << " iterations -> " << opt.out << "\n";
    return 0;
}

int cmd_transform(const Options& opt) {
    if (opt.model_path.empty()) throw ifair::ConfigError("transform needs --model");
    const auto data = load_dataset(opt);
    const auto model = ifair::IFairModel::load(opt.model_path);
    ensure_dir(opt.out);
    const fs::path dir(opt.out);
    write_matrix_csv(model.transform_all(data.parts.train.X), data.parts.train.row_ids,
                     dir / "transformed_train.csv");
    write_matrix_csv(model.transform_all(data.parts.validation.X),
                     data.parts.validation.row_ids, dir / "transformed_validation.csv");
    write_matrix_csv(model.transform_all(data.parts.test.X), data.parts.test.row_ids,
                     dir / "transformed_test.csv");
    std::cout << "transform -> " << opt.out << "\n";
    return 0;
}

int cmd_grid(const Options& opt) {
    const auto data = load_dataset(opt);
    const auto method = ifair::parse_method(opt.method);
    const auto grid = grid_from(opt);
    const auto records = ifair::run_grid(data.parts, method, grid, opt.seed, data.id);
    const auto chosen = ifair::select(records, grid.criterion);
    ifair::emit_report(records, chosen, data.table.task, opt.out);
    std::cout << "grid: " << records.size() << " cells, " << chosen.size()
              << " selected -> " << opt.out << "\n";
    return 0;
}

int cmd_eval(const Options& opt) {
    const auto data = load_dataset(opt);
    const auto method = ifair::parse_method(opt.method);
    ifair::GridSpec grid = grid_from(opt);
    grid.lambdas = {opt.lambda};
    grid.mus = {opt.mu};
    grid.ks = {opt.k};
    const auto records = ifair::run_grid(data.parts, method, grid, opt.seed, data.id);
    ifair::emit_report(records, records, data.table.task, opt.out);
    std::cout << "eval: " << opt.method << " -> " << opt.out << "\n";
    return 0;
}

int cmd_rerank(const Options& opt) {
    if (opt.in_path.empty()) throw ifair::ConfigError("rerank needs --in with ranked lists");
    const auto lists = ifair::read_ranked_csv(opt.in_path);
    std::vector<ifair::RankedList> output;
    ensure_dir(opt.out);
    json summary = json::array();
    for (const auto& list : lists) {
        auto fixed = ifair::fair_rerank(list, opt.rerank_p, opt.rerank_alpha);
        std::vector<unsigned char> before(list.protected_flag.begin(),
                                          list.protected_flag.end());
        std::vector<unsigned char> after(fixed.protected_flag.begin(),
                                         fixed.protected_flag.end());
        summary.push_back({{"query", list.query},
                           {"length", list.ids.size()},
                           {"pct_protected_top10_in", ifair::pct_protected_top(before, 10)},
                           {"pct_protected_top10_out", ifair::pct_protected_top(after, 10)}});
        output.push_back(std::move(fixed));
    }
    const fs::path dir(opt.out);
    ifair::write_ranked_csv(output, (dir / "reranked.csv").string());
    std::ofstream sout(dir / "rerank_summary.json");
    sout << summary.dump(2) << '\n';
    std::cout << "rerank: " << output.size() << " lists at p=" << opt.rerank_p << " -> "
              << opt.out << "\n";
    return 0;
}

// The three-scheme study: shared mixture draws, per-scheme membership,
// unit-variance scaling, iFair-b training at the study defaults, invariance
// report against a rank-matched SVD baseline.
int cmd_synth(const Options& opt) {
    ensure_dir(opt.out);
    const fs::path dir(opt.out);

    ifair::HyperParams hp;
    hp.lambda = 1.0;
    hp.mu = 0.1;
    hp.k = 2;
    hp.init = ifair::InitScheme::ifair_b;
    hp.restarts = opt.restarts;
    hp.seed = opt.seed == 0 ? 11 : opt.seed;
    hp.opt.max_iterations = 500;

    const std::uint64_t data_seed = 42;
    std::vector<ifair::SchemeRun> runs;
    std::vector<ifair::RowMatrix> svd_recons;
    static const char* names[] = {"random", "x1_threshold", "x2_threshold"};
    int i = 0;
    for (auto scheme : {ifair::MembershipScheme::random, ifair::MembershipScheme::x1_threshold,
                        ifair::MembershipScheme::x2_threshold}) {
        ifair::SynthConfig cfg;
        cfg.scheme = scheme;
        cfg.seed = data_seed;
        cfg.n = opt.synth_n;
        const auto raw = ifair::generate_synthetic(cfg);
        write_table_csv(raw, dir / (std::string("points_") + names[i] + ".csv"));

        ifair::SchemeRun run;
        run.scheme = scheme;
        run.data = ifair::normalize_unit_variance(raw);
        run.model = ifair::fit(run.data, hp).model;
        write_matrix_csv(run.model.transform_all(run.data.X), run.data.row_ids,
                         dir / (std::string("transformed_") + names[i] + ".csv"));
        svd_recons.push_back(ifair::svd_reduce(run.data.X, hp.k).reconstruction);
        runs.push_back(std::move(run));
        ++i;
    }

    const auto report = ifair::invariance_report(runs);
    const double svd_drift = ifair::cross_scheme_displacement(svd_recons);

    json j;
    j["cross_scheme_mean_displacement"] = report.cross_scheme_mean_displacement;
    j["svd_cross_scheme_mean_displacement"] = svd_drift;
    j["flip_shift_mean"] = report.flip_shift_mean;
    j["flip_shift_max"] = report.flip_shift_max;
    j["lambda"] = hp.lambda;
    j["mu"] = hp.mu;
    j["k"] = hp.k;
    j["seed"] = hp.seed;
    j["data_seed"] = data_seed;
    json per = json::array();
    for (std::size_t s = 0; s < runs.size(); ++s) {
        json m;
        m["scheme"] = names[s];
        const auto& rep = report.per_scheme[s];
        if (rep.acc) m["acc"] = *rep.acc;
        if (rep.auc) m["auc"] = *rep.auc;
        if (rep.ynn) m["ynn"] = *rep.ynn;
        if (rep.parity) m["parity"] = *rep.parity;
        if (rep.eqopp) m["eqopp"] = *rep.eqopp;
        per.push_back(m);
    }
    j["per_scheme"] = per;
    std::ofstream out(dir / "invariance.json");
    out << j.dump(2) << '\n';
    std::cout << "synth: displacement " << report.cross_scheme_mean_displacement
              << " vs svd " << svd_drift << " -> " << opt.out << "\n";
    return 0;
}

int cmd_probe(const Options& opt) {
    const auto data = load_dataset(opt);
    const auto method = ifair::parse_method(opt.method);

    // Representations are built over all rows in original order with the
    // train-derived scaling, then re-split inside the probe.
    const ifair::DataTable scaled = opt.full_table_stats
                                        ? ifair::apply_scaling(
                                              data.table,
                                              ifair::compute_unit_variance(data.table))
                                        : ifair::apply_scaling(data.table, data.scaling);

    ifair::RowMatrix Z;
    switch (method) {
        case ifair::Method::full: Z = scaled.X; break;
        case ifair::Method::masked: Z = scaled.masked_matrix(); break;
        case ifair::Method::svd:
            Z = ifair::svd_reduce(data.parts.train.X, opt.k).project(scaled.X);
            break;
        case ifair::Method::svd_masked:
            Z = ifair::svd_reduce(data.parts.train.masked_matrix(), opt.k)
                    .project(scaled.masked_matrix());
            break;
        case ifair::Method::ifair_a:
        case ifair::Method::ifair_b: {
            ifair::HyperParams hp;
            hp.lambda = opt.lambda;
            hp.mu = opt.mu;
            hp.k = opt.k;
            hp.init = method == ifair::Method::ifair_b ? ifair::InitScheme::ifair_b
                                                       : ifair::InitScheme::ifair_a;
            hp.restarts = opt.restarts;
            hp.seed = opt.seed;
            hp.opt.max_iterations = opt.max_iter;
            Z = ifair::fit(data.parts.train, hp).model.transform_all(scaled.X);
            break;
        }
    }

    ifair::SplitSpec sp;
    sp.seed = opt.seed;
    const auto acc = ifair::obfuscation_probe(Z, scaled.protected_flag, sp);
    const auto masked_acc =
        ifair::obfuscation_probe(scaled.masked_matrix(), scaled.protected_flag, sp);

    double prot = 0.0;
    for (auto f : scaled.protected_flag) prot += f;
    const double rate = prot / static_cast<double>(scaled.protected_flag.size());

    ensure_dir(opt.out);
    json j;
    j["dataset"] = data.id;
    j["method"] = opt.method;
    j["seed"] = opt.seed;
    j["base_rate"] = std::max(rate, 1.0 - rate);
    if (acc) j["adversarial_accuracy"] = *acc;
    if (masked_acc) j["masked_adversarial_accuracy"] = *masked_acc;
    std::ofstream out(fs::path(opt.out) / "probe.json");
    out << j.dump(2) << '\n';
    std::cout << "probe: " << opt.method << " adversary "
              << (acc ? ifair::format_double(*acc) : std::string("absent")) << " (masked "
              << (masked_acc ? ifair::format_double(*masked_acc) : std::string("absent"))
              << ", majority " << std::max(rate, 1.0 - rate) << ") -> " << opt.out << "\n";
    return 0;
}

ifair::MetricReport metrics_from_json(const json& j) {
    ifair::MetricReport m;
    const auto get = [&](const char* name, std::optional<double>& slot) {
        if (j.contains(name)) slot = j.at(name).get<double>();
    };
    get("acc", m.acc);
    get("auc", m.auc);
    get("eqopp", m.eqopp);
    get("parity", m.parity);
    get("ynn", m.ynn);
    get("map", m.map);
    get("kt", m.kt);
    get("pct_protected", m.pct_protected);
    return m;
}

int cmd_report(const Options& opt) {
    if (opt.records_path.empty()) throw ifair::ConfigError("report needs --records");
    std::ifstream in(opt.records_path);
    if (!in) throw ifair::IoError("cannot open records file: " + opt.records_path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ifair::ConfigError("invalid records JSON: " + std::string(e.what()));
    }
    std::vector<ifair::ExperimentRecord> records;
    bool ranking = false;
    for (const auto& rj : j) {
        ifair::ExperimentRecord r;
        r.dataset_id = rj.value("dataset", std::string());
        r.method_id = rj.value("method", std::string());
        r.cell_index = rj.value("cell", 0);
        r.lambda = rj.value("lambda", 0.0);
        r.mu = rj.value("mu", 0.0);
        r.k = rj.value("k", 0);
        r.seed = rj.value("seed", std::uint64_t{0});
        r.iterations = rj.value("iterations", 0);
        r.final_loss = rj.value("final_loss", 0.0);
        r.failed = rj.value("failed", false);
        r.failure = rj.value("failure", std::string());
        if (rj.contains("validation")) r.validation = metrics_from_json(rj.at("validation"));
        if (rj.contains("test")) r.test = metrics_from_json(rj.at("test"));
        ranking = ranking || r.test.map.has_value() || r.validation.map.has_value();
        records.push_back(std::move(r));
    }
    const auto chosen = ifair::select(records, ifair::parse_criterion(opt.criterion));
    ifair::emit_report(records, chosen,
                       ranking ? ifair::TaskKind::ranking : ifair::TaskKind::classification,
                       opt.out);
    std::cout << "report: " << records.size() << " records, " << chosen.size()
              << " selected -> " << opt.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"individually fair representations: training, baselines, and experiments"};
    app.require_subcommand(1);
    Options opt;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "dataset config JSON");
        sub->add_option("--seed", opt.seed, "master seed");
        sub->add_option("--out", opt.out, "output directory");
        sub->add_flag("--full-table-stats", opt.full_table_stats,
                      "normalize with full-table statistics instead of train-only");
    };
    const auto add_hyper = [&](CLI::App* sub) {
        sub->add_option("--lambda", opt.lambda, "reconstruction weight");
        sub->add_option("--mu", opt.mu, "pairwise fairness weight");
        sub->add_option("--k", opt.k, "number of prototypes / rank");
        sub->add_option("--restarts", opt.restarts, "optimizer restarts");
        sub->add_option("--max-iter", opt.max_iter, "iteration budget per restart");
    };

    auto* prep = app.add_subcommand("prep", "load, encode, normalize, and split a dataset");
    add_common(prep);

    auto* fit = app.add_subcommand("fit", "train an iFair model on the train split");
    add_common(fit);
    add_hyper(fit);
    fit->add_option("--method", opt.method, "ifair-a or ifair-b");
    fit->add_option("--p", opt.p, "Minkowski distance exponent");

    auto* transform = app.add_subcommand("transform", "apply a saved model to every split");
    add_common(transform);
    transform->add_option("--model", opt.model_path, "model JSON from fit")->required();

    auto* grid = app.add_subcommand("grid", "hyperparameter sweep with model selection");
    add_common(grid);
    grid->add_option("--method", opt.method, "representation method");
    grid->add_option("--criterion", opt.criterion, "utility|fairness|harmonic|pareto");
    grid->add_option("--restarts", opt.restarts, "optimizer restarts per cell");
    grid->add_option("--max-iter", opt.max_iter, "iteration budget per restart");
    grid->add_option("--lambdas", opt.lambdas, "lambda sweep values")->delimiter(',');
    grid->add_option("--mus", opt.mus, "mu sweep values")->delimiter(',');
    grid->add_option("--ks", opt.ks, "dimensionality sweep values")->delimiter(',');
    grid->add_flag("--one-at-a-time", opt.one_at_a_time,
                   "sweep lambda and mu separately with the other pinned at 1");

    auto* eval = app.add_subcommand("eval", "evaluate one method/configuration");
    add_common(eval);
    add_hyper(eval);
    eval->add_option("--method", opt.method, "representation method");

    auto* rerank = app.add_subcommand("rerank", "re-rank candidate lists with the fairness "
                                                "constraint");
    add_common(rerank);
    rerank->add_option("--in", opt.in_path, "ranked lists CSV")->required();
    rerank->add_option("--p", opt.rerank_p, "target protected proportion");
    rerank->add_option("--alpha", opt.rerank_alpha, "significance level");

    auto* synth = app.add_subcommand("synth", "run the three-scheme synthetic study");
    add_common(synth);
    synth->add_option("--n", opt.synth_n, "points per scheme");
    synth->add_option("--restarts", opt.restarts, "optimizer restarts");

    auto* probe = app.add_subcommand("probe", "adversarial protected-attribute probe");
    add_common(probe);
    add_hyper(probe);
    probe->add_option("--method", opt.method, "representation method");

    auto* report = app.add_subcommand("report", "re-select and re-emit from records.json");
    add_common(report);
    report->add_option("--records", opt.records_path, "records.json from grid")->required();
    report->add_option("--criterion", opt.criterion, "utility|fairness|harmonic|pareto");

    CLI11_PARSE(app, argc, argv);

    try {
        if (prep->parsed()) return cmd_prep(opt);
        if (fit->parsed()) return cmd_fit(opt);
        if (transform->parsed()) return cmd_transform(opt);
        if (grid->parsed()) return cmd_grid(opt);
        if (eval->parsed()) return cmd_eval(opt);
        if (rerank->parsed()) return cmd_rerank(opt);
        if (synth->parsed()) return cmd_synth(opt);
        if (probe->parsed()) return cmd_probe(opt);
        if (report->parsed()) return cmd_report(opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
