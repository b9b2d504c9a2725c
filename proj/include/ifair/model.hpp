#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ifair/data.hpp"

namespace ifair {

// Additive guard under the 1/p root so the distance gradient stays defined at
// coincident points; the matching correction term keeps d(a,a) = 0.
inline constexpr double kDistanceGuard = 1e-12;

// Weighted Minkowski distance d(a,b) = (sum_n w_n |a_n - b_n|^p + g)^(1/p) -
// g^(1/p). If mask is given the sum runs over the masked indices only.
double minkowski_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& weights, double p,
                          const std::vector<int>* mask = nullptr);

struct Representation {
    RowMatrix U;   // M x K, row-stochastic assignment probabilities
    RowMatrix Xt;  // M x N, U * V
};

// Learned map: soft-assign a record to K prototypes by softmax over negated
// weighted distances, then replace it with the convex combination of
// prototypes.
struct IFairModel {
    RowMatrix V;            // K x N, one prototype per row
    Eigen::VectorXd alpha;  // N nonnegative attribute weights
    double p = 2.0;
    std::vector<int> protected_idx;

    Eigen::Index prototype_count() const { return V.rows(); }
    Eigen::Index dim() const { return V.cols(); }

    void validate() const;

    Eigen::VectorXd assignment(const Eigen::VectorXd& x) const;
    Eigen::VectorXd transform(const Eigen::VectorXd& x) const;
    Representation represent(const RowMatrix& X) const;
    RowMatrix transform_all(const RowMatrix& X) const;

    void save(const std::string& path) const;
    static IFairModel load(const std::string& path);
};

struct OptimizerSettings {
    int max_iterations = 500;
    double grad_tolerance = 1e-5;
    double rel_decrease_tolerance = 1e-9;
    int history = 10;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    bool trace = false;
};

enum class InitScheme { ifair_a, ifair_b };

struct HyperParams {
    double lambda = 1.0;  // reconstruction weight
    double mu = 1.0;      // pairwise fairness weight
    int k = 10;           // number of prototypes
    double p = 2.0;
    InitScheme init = InitScheme::ifair_b;
    int restarts = 3;
    std::uint64_t seed = 0;
    OptimizerSettings opt;
    // Pairwise term scaling: all i<j pairs up to this many rows, then a
    // seeded sample of sampled_pairs_per_row * M pairs.
    int max_full_pair_rows = 2000;
    int sampled_pairs_per_row = 200;

    void validate() const;
};

// Unordered record pairs feeding the pairwise fairness term. Either the full
// i<j enumeration or a fixed seeded sample; fixed per instance so repeated
// loss evaluations see the same pairs.
class PairSet {
  public:
    static PairSet all_pairs(int rows);
    static PairSet sampled(int rows, std::int64_t count, std::uint64_t seed);
    static PairSet standard(int rows, const HyperParams& hp, std::uint64_t seed);

    bool is_full() const { return full_; }
    int rows() const { return rows_; }
    std::int64_t count() const;
    // Calls f(i, j) for every pair in a fixed order.
    template <class F>
    void for_each(F&& f) const {
        if (full_) {
            for (int i = 0; i < rows_; ++i)
                for (int j = i + 1; j < rows_; ++j) f(i, j);
        } else {
            for (const auto& [i, j] : list_) f(i, j);
        }
    }

  private:
    int rows_ = 0;
    bool full_ = false;
    std::vector<std::pair<int, int>> list_;
};

// Sum of squared reconstruction errors over all entries.
double utility_loss(const RowMatrix& X, const RowMatrix& Xt);

// Distance targets for the pairwise term: uniform weights, non-protected
// coordinates only. Returned in PairSet iteration order.
Eigen::VectorXd target_distances(const RowMatrix& X, const std::vector<int>& protected_idx,
                                 double p, const PairSet& pairs);

// Sum over pairs of squared differences between the transformed-space
// distance (learned weights, all coordinates) and the fixed input-space
// target distance.
double fairness_loss(const RowMatrix& Xt, const Eigen::VectorXd& alpha, double p,
                     const PairSet& pairs, const Eigen::VectorXd& targets);
double fairness_loss(const RowMatrix& X, const RowMatrix& Xt, const IFairModel& model,
                     const PairSet& pairs);

// Training objective lambda * L_util + mu * L_fair over the flattened
// parameter vector [V row-major, alpha], with its analytic gradient. Pair
// sampling and distance targets are fixed at construction.
class Objective {
  public:
    Objective(RowMatrix X, std::vector<int> protected_idx, HyperParams hp);

    Eigen::Index size() const { return static_cast<Eigen::Index>(hp_.k) * X_.cols() + X_.cols(); }
    Eigen::Index data_rows() const { return X_.rows(); }
    const PairSet& pairs() const { return pairs_; }
    const HyperParams& hyper() const { return hp_; }

    double value(const Eigen::VectorXd& params) const;
    double value_and_grad(const Eigen::VectorXd& params, Eigen::VectorXd& grad) const;

  private:
    double eval(const Eigen::VectorXd& params, Eigen::VectorXd* grad) const;

    RowMatrix X_;
    std::vector<int> protected_idx_;
    HyperParams hp_;
    PairSet pairs_;
    Eigen::VectorXd pair_targets_;  // loop path, PairSet order
    RowMatrix target_matrix_;       // full-pair p=2 path, M x M
};

}  // namespace ifair
