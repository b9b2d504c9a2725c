#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ifair/model.hpp"

namespace ifair {

// Callable evaluating f(x) and writing its gradient.
using GradFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct MinimizeResult {
    Eigen::VectorXd x;
    double f = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
    // one (loss, gradient norm) entry per accepted iteration, starting at x0
    std::vector<std::pair<double, double>> trace;
};

// Limited-memory quasi-Newton minimization (two-loop recursion) with a strong
// Wolfe line search. Deterministic; evaluation failures surface as a
// best-effort stop at the last accepted point.
MinimizeResult minimize(const GradFn& f, const Eigen::VectorXd& x0,
                        const OptimizerSettings& settings);

// Flatten model parameters as [V row-major, alpha]; inverse of unpack.
Eigen::VectorXd pack(const IFairModel& model);
IFairModel unpack(const Eigen::VectorXd& params, int k, int n);

// Starting points: scheme a draws every parameter uniform in (0,1); scheme b
// additionally pins the protected attribute weights to 1e-6.
IFairModel init_model(InitScheme scheme, int k, int n, const std::vector<int>& protected_idx,
                      std::uint64_t seed, double p = 2.0);

struct RestartInfo {
    std::uint64_t seed = 0;
    double final_loss = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool aborted = false;
    std::string note;
    std::vector<std::pair<double, double>> trace;
};

struct FitResult {
    IFairModel model;
    double final_loss = 0.0;
    int iterations = 0;
    int best_restart = 0;
    std::vector<RestartInfo> history;
};

// Train an iFair model: hp.restarts independent runs seeded hp.seed + r, best
// final loss wins. Weights stay nonnegative by optimizing their square roots.
FitResult fit(const RowMatrix& X, const std::vector<int>& protected_idx, const HyperParams& hp);
FitResult fit(const DataTable& table, const HyperParams& hp);

// Per-iteration loss traces of every restart as CSV (restart, seed,
// iteration, loss, grad_norm).
void write_trace_csv(const FitResult& result, const std::string& path);

}  // namespace ifair
