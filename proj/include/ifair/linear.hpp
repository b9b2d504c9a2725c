#pragma once

#include <Eigen/Dense>
#include <string>

#include "ifair/data.hpp"

namespace ifair {

enum class ModelKind { logistic, least_squares };

// Linear downstream model trained on any representation (original, masked,
// low-rank, or learned).
struct LinearModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
    ModelKind kind = ModelKind::logistic;
    double l2 = 0.0;

    void validate() const;
    void save(const std::string& path) const;
    static LinearModel load(const std::string& path);
};

// L2-regularized logistic regression (mean negative log-likelihood), trained
// from zero init to gradient norm below 1e-6. The penalty covers weights
// only, never the bias. Requires both classes in y.
LinearModel train_logistic(const RowMatrix& Z, const Eigen::VectorXd& y, double l2 = 1e-4);

// Ridge regression on real-valued scores via the normal equations (bias
// unpenalized). Requires at least two rows.
LinearModel train_ranker(const RowMatrix& Z, const Eigen::VectorXd& scores, double l2 = 1e-4);

// Scores for each row of Z: sigmoid probabilities for logistic models, raw
// linear outputs for least-squares models.
Eigen::VectorXd predict(const LinearModel& model, const RowMatrix& Z);

// Deserved score for ranked-profile data: each input column is min-max
// normalized to [0, 1] over the population, then combined as a weighted sum.
// Constant columns contribute zero. Weights must be nonnegative; the default
// weighs the three components uniformly.
Eigen::VectorXd xing_style_scores(const Eigen::VectorXd& work, const Eigen::VectorXd& edu,
                                  const Eigen::VectorXd& views,
                                  const Eigen::Vector3d& weights = Eigen::Vector3d::Ones());

}  // namespace ifair
