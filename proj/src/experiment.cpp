#include "ifair/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <thread>
#include <utility>

#include "ifair/errors.hpp"
#include "ifair/linear.hpp"
#include "ifair/optimizer.hpp"
#include "ifair/rng.hpp"
#include "ifair/svd.hpp"
#include "ifair/textio.hpp"

namespace ifair {

namespace {

struct Cell {
    double lambda = 0.0;
    double mu = 0.0;
    int k = 0;
};

bool is_ifair(Method m) { return m == Method::ifair_a || m == Method::ifair_b; }
bool is_svd(Method m) { return m == Method::svd || m == Method::svd_masked; }

std::vector<Cell> build_cells(Method method, const GridSpec& grid) {
    std::vector<Cell> cells;
    if (is_ifair(method)) {
        std::vector<std::pair<double, double>> weights;
        if (grid.one_at_a_time) {
            for (double l : grid.lambdas) weights.emplace_back(l, 1.0);
            for (double m : grid.mus)
                if (std::find(weights.begin(), weights.end(), std::make_pair(1.0, m)) ==
                    weights.end())
                    weights.emplace_back(1.0, m);
        } else {
            for (double l : grid.lambdas)
                for (double m : grid.mus) weights.emplace_back(l, m);
        }
        for (const auto& [l, m] : weights)
            for (int k : grid.ks) cells.push_back({l, m, k});
    } else if (is_svd(method)) {
        for (int k : grid.ks) cells.push_back({0.0, 0.0, k});
    } else {
        cells.push_back({});
    }
    return cells;
}

// Ranking metrics over one split: queries grouped by id in order of first
// appearance (the whole split is one query when ids are absent). Scores are
// min-max rescaled for the consistency metric so it stays within [0,1];
// rank-based metrics see the raw scores.
MetricReport evaluate_ranking(const Eigen::VectorXd& scores, const DataTable& d) {
    MetricReport r;
    r.task = TaskKind::ranking;

    const double lo = scores.minCoeff(), hi = scores.maxCoeff();
    const Eigen::VectorXd unit =
        hi > lo ? Eigen::VectorXd(((scores.array() - lo) / (hi - lo)).matrix())
                : Eigen::VectorXd::Constant(scores.size(), 0.5);
    const auto preds = make_predictions(unit, d.outcome, d.protected_flag, d.masked_matrix());
    r.ynn = consistency_ynn(preds);

    std::vector<std::vector<int>> groups;
    if (d.query_ids.empty()) {
        groups.emplace_back(d.rows());
        for (Eigen::Index i = 0; i < d.rows(); ++i) groups[0][i] = static_cast<int>(i);
    } else {
        std::map<std::string, int> slot;
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            auto [it, fresh] = slot.emplace(d.query_ids[i], static_cast<int>(groups.size()));
            if (fresh) groups.emplace_back();
            groups[it->second].push_back(static_cast<int>(i));
        }
    }

    std::vector<QueryRanking> queries;
    double kt_sum = 0.0, pct_sum = 0.0;
    int kt_n = 0;
    for (const auto& rows : groups) {
        QueryRanking q;
        q.predicted.resize(rows.size());
        q.truth.resize(rows.size());
        std::vector<unsigned char> flags(rows.size());
        for (std::size_t j = 0; j < rows.size(); ++j) {
            q.predicted[j] = scores[rows[j]];
            q.truth[j] = d.outcome[rows[j]];
            flags[j] = d.protected_flag[rows[j]];
        }
        if (const auto kt = kendall_tau(q.predicted, q.truth)) {
            kt_sum += *kt;
            ++kt_n;
        }
        std::vector<unsigned char> in_order(rows.size());
        const auto order = ranking_order(q.predicted);
        for (std::size_t j = 0; j < order.size(); ++j) in_order[j] = flags[order[j]];
        pct_sum += pct_protected_top(in_order, 10);
        queries.push_back(std::move(q));
    }
    r.map = map_at_cutoff(queries);
    if (kt_n > 0) r.kt = kt_sum / kt_n;
    r.pct_protected = pct_sum / static_cast<double>(groups.size());
    return r;
}

MetricReport evaluate_split(TaskKind task, const Eigen::VectorXd& scores, const DataTable& d) {
    if (task == TaskKind::ranking) return evaluate_ranking(scores, d);
    const auto preds = make_predictions(scores, d.outcome, d.protected_flag, d.masked_matrix());
    return evaluate_classification(preds);
}

ExperimentRecord run_cell(const Split& parts, Method method, const GridSpec& grid,
                          std::uint64_t master_seed, const std::string& dataset_id,
                          int cell_index, const Cell& cell) {
    ExperimentRecord rec;
    rec.dataset_id = dataset_id;
    rec.method_id = method_name(method);
    rec.cell_index = cell_index;
    rec.lambda = cell.lambda;
    rec.mu = cell.mu;
    rec.k = cell.k;
    rec.seed = mix_seed(master_seed, static_cast<std::uint64_t>(cell_index));

    const auto start = std::chrono::steady_clock::now();
    try {
        RowMatrix Ztr, Zva, Zte;
        switch (method) {
            case Method::full:
                Ztr = parts.train.X;
                Zva = parts.validation.X;
                Zte = parts.test.X;
                break;
            case Method::masked:
                Ztr = parts.train.masked_matrix();
                Zva = parts.validation.masked_matrix();
                Zte = parts.test.masked_matrix();
                break;
            case Method::svd: {
                const auto rep = svd_reduce(parts.train.X, cell.k);
                Ztr = rep.project(parts.train.X);
                Zva = rep.project(parts.validation.X);
                Zte = rep.project(parts.test.X);
                break;
            }
            case Method::svd_masked: {
                const auto rep = svd_reduce(parts.train.masked_matrix(), cell.k);
                Ztr = rep.project(parts.train.masked_matrix());
                Zva = rep.project(parts.validation.masked_matrix());
                Zte = rep.project(parts.test.masked_matrix());
                break;
            }
            case Method::ifair_a:
            case Method::ifair_b: {
                HyperParams hp;
                hp.lambda = cell.lambda;
                hp.mu = cell.mu;
                hp.k = cell.k;
                hp.init =
                    method == Method::ifair_b ? InitScheme::ifair_b : InitScheme::ifair_a;
                hp.restarts = grid.restarts;
                hp.seed = rec.seed;
                hp.opt.max_iterations = grid.max_iterations;
                const auto fitted = fit(parts.train, hp);
                rec.iterations = fitted.iterations;
                rec.final_loss = fitted.final_loss;
                Ztr = fitted.model.transform_all(parts.train.X);
                Zva = fitted.model.transform_all(parts.validation.X);
                Zte = fitted.model.transform_all(parts.test.X);
                break;
            }
        }

        Eigen::VectorXd val_scores, test_scores;
        if (parts.train.task == TaskKind::ranking) {
            const auto ranker = train_ranker(Ztr, parts.train.outcome);
            val_scores = predict(ranker, Zva);
            test_scores = predict(ranker, Zte);
        } else {
            const auto clf = train_logistic(Ztr, parts.train.outcome);
            val_scores = predict(clf, Zva);
            test_scores = predict(clf, Zte);
        }
        rec.validation = evaluate_split(parts.train.task, val_scores, parts.validation);
        rec.test = evaluate_split(parts.train.task, test_scores, parts.test);
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.failure = e.what();
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

int thread_count(std::size_t cells) {
    int n = 1;
    if (const char* env = std::getenv("IFAIR_THREADS"); env != nullptr && env[0] != '\0') {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end == nullptr || *end != '\0' || parsed < 1)
            throw ConfigError("IFAIR_THREADS must be a positive integer");
        n = static_cast<int>(parsed);
    }
    return std::min<int>(n, static_cast<int>(cells) > 0 ? static_cast<int>(cells) : 1);
}

// The utility scalar: AUC for classification records, MAP for ranking ones.
std::optional<double> utility_of(const ExperimentRecord& r) {
    if (r.validation.auc) return r.validation.auc;
    return r.validation.map;
}

std::optional<double> fairness_of(const ExperimentRecord& r) { return r.validation.ynn; }

void append_metrics(std::string& line, const MetricReport& m) {
    const auto cell = [&](const std::optional<double>& v) {
        line += ',';
        if (v) line += format_double(*v);
    };
    cell(m.acc);
    cell(m.auc);
    cell(m.eqopp);
    cell(m.parity);
    cell(m.ynn);
    cell(m.map);
    cell(m.kt);
    cell(m.pct_protected);
}

nlohmann::json metrics_json(const MetricReport& m) {
    nlohmann::json j = nlohmann::json::object();
    const auto put = [&](const char* name, const std::optional<double>& v) {
        if (v) j[name] = *v;
    };
    put("acc", m.acc);
    put("auc", m.auc);
    put("eqopp", m.eqopp);
    put("parity", m.parity);
    put("ynn", m.ynn);
    put("map", m.map);
    put("kt", m.kt);
    put("pct_protected", m.pct_protected);
    return j;
}

nlohmann::json record_json(const ExperimentRecord& r) {
    nlohmann::json j;
    j["dataset"] = r.dataset_id;
    j["method"] = r.method_id;
    j["cell"] = r.cell_index;
    j["lambda"] = r.lambda;
    j["mu"] = r.mu;
    j["k"] = r.k;
    j["seed"] = r.seed;
    j["iterations"] = r.iterations;
    j["final_loss"] = r.final_loss;
    j["failed"] = r.failed;
    if (r.failed) j["failure"] = r.failure;
    j["validation"] = metrics_json(r.validation);
    j["test"] = metrics_json(r.test);
    return j;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

}  // namespace

Method parse_method(const std::string& name) {
    if (name == "full") return Method::full;
    if (name == "masked") return Method::masked;
    if (name == "svd") return Method::svd;
    if (name == "svd-masked") return Method::svd_masked;
    if (name == "ifair-a") return Method::ifair_a;
    if (name == "ifair-b") return Method::ifair_b;
    throw ConfigError("unknown method: " + name);
}

std::string method_name(Method method) {
    switch (method) {
        case Method::full: return "full";
        case Method::masked: return "masked";
        case Method::svd: return "svd";
        case Method::svd_masked: return "svd-masked";
        case Method::ifair_a: return "ifair-a";
        case Method::ifair_b: return "ifair-b";
    }
    throw ParameterError("invalid method value");
}

SelectionCriterion parse_criterion(const std::string& name) {
    if (name == "utility") return SelectionCriterion::max_utility;
    if (name == "fairness") return SelectionCriterion::max_fairness;
    if (name == "harmonic") return SelectionCriterion::harmonic_mean;
    if (name == "pareto") return SelectionCriterion::pareto_front;
    throw ConfigError("unknown selection criterion: " + name);
}

std::string criterion_name(SelectionCriterion criterion) {
    switch (criterion) {
        case SelectionCriterion::max_utility: return "utility";
        case SelectionCriterion::max_fairness: return "fairness";
        case SelectionCriterion::harmonic_mean: return "harmonic";
        case SelectionCriterion::pareto_front: return "pareto";
    }
    throw ParameterError("invalid criterion value");
}

void GridSpec::validate() const {
    if (lambdas.empty() || mus.empty() || ks.empty())
        throw ParameterError("grid sets must be non-empty");
    if (restarts < 1) throw ParameterError("grid needs at least one restart");
    if (max_iterations < 1) throw ParameterError("grid needs a positive iteration budget");
    for (int k : ks)
        if (k < 1) throw ParameterError("grid dimensionalities must be positive");
    for (double v : lambdas)
        if (!(v >= 0.0)) throw ParameterError("lambda values must be nonnegative");
    for (double v : mus)
        if (!(v >= 0.0)) throw ParameterError("mu values must be nonnegative");
}

std::vector<ExperimentRecord> run_grid(const Split& parts, Method method, const GridSpec& grid,
                                       std::uint64_t master_seed,
                                       const std::string& dataset_id) {
    grid.validate();
    const auto cells = build_cells(method, grid);
    std::vector<ExperimentRecord> records(cells.size());

    const int workers = thread_count(cells.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1))
            records[i] = run_cell(parts, method, grid, master_seed, dataset_id,
                                  static_cast<int>(i), cells[i]);
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return records;
}

std::vector<ExperimentRecord> select(const std::vector<ExperimentRecord>& records,
                                     SelectionCriterion criterion) {
    if (records.empty()) throw ParameterError("selection needs at least one record");

    std::vector<const ExperimentRecord*> usable;
    for (const auto& r : records) {
        if (r.failed) continue;
        const bool needs_utility = criterion != SelectionCriterion::max_fairness;
        const bool needs_fairness = criterion != SelectionCriterion::max_utility;
        if (needs_utility && !utility_of(r)) continue;
        if (needs_fairness && !fairness_of(r)) continue;
        usable.push_back(&r);
    }
    if (usable.empty())
        throw ParameterError("no usable record: every cell failed or lacks the needed metric");

    if (criterion == SelectionCriterion::pareto_front) {
        std::vector<ExperimentRecord> front;
        for (const auto* a : usable) {
            bool dominated = false;
            for (const auto* b : usable) {
                if (a == b) continue;
                const double au = *utility_of(*a), af = *fairness_of(*a);
                const double bu = *utility_of(*b), bf = *fairness_of(*b);
                if (bu >= au && bf >= af && (bu > au || bf > af)) {
                    dominated = true;
                    break;
                }
            }
            if (!dominated) front.push_back(*a);
        }
        return front;
    }

    const auto score = [&](const ExperimentRecord& r) {
        switch (criterion) {
            case SelectionCriterion::max_utility: return *utility_of(r);
            case SelectionCriterion::max_fairness: return *fairness_of(r);
            default: {
                const double u = *utility_of(r), f = *fairness_of(r);
                return u + f > 0.0 ? 2.0 * u * f / (u + f) : 0.0;
            }
        }
    };
    const ExperimentRecord* best = usable.front();
    for (const auto* r : usable)
        if (score(*r) > score(*best)) best = r;
    return {*best};
}

std::optional<double> obfuscation_probe(const RowMatrix& Z,
                                        const std::vector<unsigned char>& flags,
                                        const SplitSpec& spec) {
    if (static_cast<std::size_t>(Z.rows()) != flags.size())
        throw ShapeError("representation rows and protected flags differ in length");
    const auto idx = make_split_indices(Z.rows(), spec);

    RowMatrix Ztr(idx.train.size(), Z.cols());
    Eigen::VectorXd ytr(idx.train.size());
    for (std::size_t i = 0; i < idx.train.size(); ++i) {
        Ztr.row(i) = Z.row(idx.train[i]);
        ytr[i] = flags[idx.train[i]];
    }
    if (ytr.minCoeff() == ytr.maxCoeff()) return std::nullopt;

    const auto adversary = train_logistic(Ztr, ytr);
    double correct = 0.0;
    for (int row : idx.test) {
        const Eigen::VectorXd z = Z.row(row);
        const double guess = predict(adversary, z.transpose())[0] >= 0.5 ? 1.0 : 0.0;
        correct += guess == static_cast<double>(flags[row]);
    }
    return correct / static_cast<double>(idx.test.size());
}

void emit_report(const std::vector<ExperimentRecord>& records,
                 const std::vector<ExperimentRecord>& selected, TaskKind task,
                 const std::string& out_dir) {
    if (records.empty()) throw ParameterError("report needs at least one record");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);
    const std::filesystem::path dir(out_dir);

    {
        auto out = open_out(dir / "records.csv");
        out << "dataset,method,cell,lambda,mu,k,seed,iterations,final_loss,failed,failure";
        for (const char* split : {"val", "test"})
            for (const char* m :
                 {"acc", "auc", "eqopp", "parity", "ynn", "map", "kt", "pct_protected"})
                out << ',' << split << '_' << m;
        out << '\n';
        for (const auto& r : records) {
            std::string line = csv_escape(r.dataset_id);
            line += ',' + r.method_id;
            line += ',' + std::to_string(r.cell_index);
            line += ',' + format_double(r.lambda);
            line += ',' + format_double(r.mu);
            line += ',' + std::to_string(r.k);
            line += ',' + std::to_string(r.seed);
            line += ',' + std::to_string(r.iterations);
            line += ',' + format_double(r.final_loss);
            line += r.failed ? ",1," : ",0,";
            line += csv_escape(r.failure);
            append_metrics(line, r.validation);
            append_metrics(line, r.test);
            out << line << '\n';
        }
        if (!out) throw IoError("write failed in " + out_dir);
    }

    {
        auto out = open_out(dir / "records.json");
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : records) j.push_back(record_json(r));
        out << j.dump(2) << '\n';
    }

    {
        auto out = open_out(dir / "summary.csv");
        if (task == TaskKind::ranking)
            out << "method,lambda,mu,k,map,kt,ynn,pct_protected_top10\n";
        else
            out << "method,lambda,mu,k,acc,auc,eqopp,parity,ynn\n";
        for (const auto& r : selected) {
            std::string line = r.method_id;
            line += ',' + format_double(r.lambda);
            line += ',' + format_double(r.mu);
            line += ',' + std::to_string(r.k);
            const auto cell = [&](const std::optional<double>& v) {
                line += ',';
                if (v) line += format_double(*v);
            };
            if (task == TaskKind::ranking) {
                cell(r.test.map);
                cell(r.test.kt);
                cell(r.test.ynn);
                cell(r.test.pct_protected);
            } else {
                cell(r.test.acc);
                cell(r.test.auc);
                cell(r.test.eqopp);
                cell(r.test.parity);
                cell(r.test.ynn);
            }
            out << line << '\n';
        }
    }

    {
        auto out = open_out(dir / "selected.json");
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : selected) j.push_back(record_json(r));
        out << j.dump(2) << '\n';
    }

    {
        auto out = open_out(dir / "timings.csv");
        out << "cell,method,lambda,mu,k,wall_seconds\n";
        for (const auto& r : records)
            out << r.cell_index << ',' << r.method_id << ',' << format_double(r.lambda) << ','
                << format_double(r.mu) << ',' << r.k << ',' << format_double(r.wall_seconds)
                << '\n';
    }
}

}  // namespace ifair
