#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ifair/data.hpp"
#include "ifair/metrics.hpp"
#include "ifair/model.hpp"

namespace ifair {

// Representation fed to the downstream model.
enum class Method { full, masked, svd, svd_masked, ifair_a, ifair_b };

enum class SelectionCriterion { max_utility, max_fairness, harmonic_mean, pareto_front };

Method parse_method(const std::string& name);
std::string method_name(Method method);
SelectionCriterion parse_criterion(const std::string& name);
std::string criterion_name(SelectionCriterion criterion);

// Hyperparameter sweep definition. iFair methods span lambdas x mus x ks
// jointly by default, or each weight alone with the other pinned at 1 when
// one_at_a_time is set; SVD methods span ks; full/masked have a single cell.
struct GridSpec {
    std::vector<double> lambdas{0.0, 0.05, 0.1, 1.0, 10.0, 100.0};
    std::vector<double> mus{0.0, 0.05, 0.1, 1.0, 10.0, 100.0};
    std::vector<int> ks{10, 20, 30};
    int restarts = 3;
    SelectionCriterion criterion = SelectionCriterion::harmonic_mean;
    bool one_at_a_time = false;
    int max_iterations = 200;

    void validate() const;
};

// One grid cell's outcome. Wall time is the only field excluded from the
// deterministic report files; it lands in timings.csv instead.
struct ExperimentRecord {
    std::string dataset_id;
    std::string method_id;
    int cell_index = 0;
    double lambda = 0.0;
    double mu = 0.0;
    int k = 0;
    std::uint64_t seed = 0;
    int iterations = 0;
    double final_loss = 0.0;
    MetricReport validation;
    MetricReport test;
    bool failed = false;
    std::string failure;
    double wall_seconds = 0.0;
};

// Train and evaluate every cell of the grid on an already-split dataset.
// Per-cell seeds derive from the master seed and the cell index, so results
// are independent of evaluation order; IFAIR_THREADS > 1 runs cells in a
// thread pool with identical output. Cell failures are recorded, not thrown.
std::vector<ExperimentRecord> run_grid(const Split& parts, Method method, const GridSpec& grid,
                                       std::uint64_t master_seed,
                                       const std::string& dataset_id);

// Validation-metric selection. The three scalar criteria return one record
// (max validation AUC / yNN / harmonic mean of the two); pareto_front returns
// every record not dominated in (validation AUC, validation yNN). Failed
// records and records missing a needed metric never win.
std::vector<ExperimentRecord> select(const std::vector<ExperimentRecord>& records,
                                     SelectionCriterion criterion);

// Adversarial accuracy: split the representation rows, train the downstream
// logistic model to predict group membership, return its test accuracy.
// Absent when the training rows hold a single class.
std::optional<double> obfuscation_probe(const RowMatrix& Z,
                                        const std::vector<unsigned char>& flags,
                                        const SplitSpec& spec = {});

// Write records.csv, records.json, summary.csv (test metrics of the selected
// records, Table-style columns per task), selected.json, and timings.csv
// under out_dir. Every file except timings.csv is byte-deterministic for a
// fixed master seed.
void emit_report(const std::vector<ExperimentRecord>& records,
                 const std::vector<ExperimentRecord>& selected, TaskKind task,
                 const std::string& out_dir);

}  // namespace ifair
