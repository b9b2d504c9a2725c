#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ifair/data.hpp"

namespace ifair {

// Model outputs lined up with ground truth and group membership. Xstar holds
// the original non-protected attributes used for neighbor search.
struct PredictionSet {
    Eigen::VectorXd scores;
    Eigen::VectorXd labels;  // thresholded scores for classification metrics
    Eigen::VectorXd truth;
    std::vector<unsigned char> protected_flag;
    RowMatrix Xstar;

    Eigen::Index size() const { return scores.size(); }
    void validate() const;
};

// Build a prediction set from scores (labels thresholded at 0.5).
PredictionSet make_predictions(const Eigen::VectorXd& scores, const Eigen::VectorXd& truth,
                               const std::vector<unsigned char>& protected_flag,
                               const RowMatrix& Xstar);

// Consistency: 1 - mean absolute prediction gap over each point's k nearest
// neighbors (Euclidean on Xstar, distance ties broken by row index). Uses
// scores unless hard_labels is set.
double consistency_ynn(const PredictionSet& preds, int k = 10, bool hard_labels = false);

// 1 - |difference of group mean scores|; absent when a group is empty.
std::optional<double> parity(const PredictionSet& preds);

// 1 - |difference of group true-positive rates| on hard labels; absent when
// a group has no positives.
std::optional<double> equal_opportunity(const PredictionSet& preds);

double accuracy(const PredictionSet& preds);

// Rank-statistic AUC with ties counted half; absent when only one class is
// present.
std::optional<double> auc(const PredictionSet& preds);
std::optional<double> auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& truth);

// Tie-corrected (tau-b) rank correlation between two score vectors; absent
// below 2 items.
std::optional<double> kendall_tau(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// One query's predicted scores and deserved ground-truth scores, aligned by
// item index.
struct QueryRanking {
    Eigen::VectorXd predicted;
    Eigen::VectorXd truth;
};

// Item order by descending score, score ties broken by item index.
std::vector<int> ranking_order(const Eigen::VectorXd& scores);

// Mean average precision at the cutoff; an item is relevant iff it belongs to
// the ground-truth top-cutoff of its query.
double map_at_cutoff(const std::vector<QueryRanking>& queries, int cutoff = 10);

// Percentage (0..100) of protected items among the top k of the ranking
// order.
double pct_protected_top(const std::vector<unsigned char>& flags_in_rank_order, int k);

// One reporting row; absent metrics stay empty.
struct MetricReport {
    TaskKind task = TaskKind::classification;
    std::optional<double> acc, auc, eqopp, parity, ynn;
    std::optional<double> map, kt, pct_protected;
};

MetricReport evaluate_classification(const PredictionSet& preds, int knn = 10);

}  // namespace ifair
