#include "ifair/linear.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ifair/errors.hpp"
#include "ifair/optimizer.hpp"

namespace ifair {

namespace {

// log(1 + e^z) without overflow
double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

void LinearModel::validate() const {
    if (!weights.allFinite() || !std::isfinite(bias))
        throw NumericError("linear model parameters are not finite");
    if (l2 < 0.0) throw ParameterError("l2 strength must be nonnegative");
}

void LinearModel::save(const std::string& path) const {
    validate();
    nlohmann::json doc;
    doc["format"] = "ifair-linear";
    doc["version"] = 1;
    doc["kind"] = kind == ModelKind::logistic ? "logistic" : "least-squares";
    doc["l2"] = l2;
    doc["bias"] = bias;
    doc["weights"] = std::vector<double>(weights.data(), weights.data() + weights.size());
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << doc.dump(2) << "\n";
}

LinearModel LinearModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid model file: ") + e.what());
    }
    try {
        if (doc.at("format") != "ifair-linear") throw ConfigError("not a linear model file");
        LinearModel m;
        const std::string kind = doc.at("kind");
        if (kind == "logistic")
            m.kind = ModelKind::logistic;
        else if (kind == "least-squares")
            m.kind = ModelKind::least_squares;
        else
            throw ConfigError("unknown model kind " + kind);
        m.l2 = doc.at("l2");
        m.bias = doc.at("bias");
        const std::vector<double> w = doc.at("weights");
        m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid model file: ") + e.what());
    }
}

LinearModel train_logistic(const RowMatrix& Z, const Eigen::VectorXd& y, double l2) {
    const Eigen::Index m = Z.rows();
    const Eigen::Index n = Z.cols();
    if (y.size() != m) throw ShapeError("label count does not match row count");
    if (l2 < 0.0) throw ParameterError("l2 strength must be nonnegative");
    bool pos = false, neg = false;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (y[i] == 1.0)
            pos = true;
        else if (y[i] == 0.0)
            neg = true;
        else
            throw DataError("labels must be 0 or 1");
    }
    if (!pos || !neg) throw OptimizationError("logistic training needs both classes");

    // params = [weights, bias]; mean per-row loss keeps the objective scale
    // independent of the row count, so the gradient tolerance means the same
    // thing at any size; penalty on weights only
    const double inv_m = 1.0 / static_cast<double>(m);
    auto nll = [&](const Eigen::VectorXd& params, Eigen::VectorXd& grad) {
        const auto w = params.head(n);
        const double b = params[n];
        const Eigen::VectorXd z = (Z * w).array() + b;
        double loss = 0.5 * l2 * w.squaredNorm();
        for (Eigen::Index i = 0; i < m; ++i) loss += inv_m * (softplus(z[i]) - y[i] * z[i]);
        Eigen::VectorXd resid(m);
        for (Eigen::Index i = 0; i < m; ++i) resid[i] = inv_m * (sigmoid(z[i]) - y[i]);
        grad.resize(n + 1);
        grad.head(n) = Z.transpose() * resid + l2 * w;
        grad[n] = resid.sum();
        return loss;
    };

    OptimizerSettings settings;
    settings.max_iterations = 2000;
    settings.grad_tolerance = 1e-6;
    settings.rel_decrease_tolerance = 0.0;
    const auto result = minimize(nll, Eigen::VectorXd::Zero(n + 1), settings);
    if (result.grad_norm >= 1e-6)
        throw OptimizationError("logistic training stalled at gradient norm " +
                                std::to_string(result.grad_norm));

    LinearModel model;
    model.weights = result.x.head(n);
    model.bias = result.x[n];
    model.kind = ModelKind::logistic;
    model.l2 = l2;
    model.validate();
    return model;
}

LinearModel train_ranker(const RowMatrix& Z, const Eigen::VectorXd& scores, double l2) {
    const Eigen::Index m = Z.rows();
    const Eigen::Index n = Z.cols();
    if (scores.size() != m) throw ShapeError("score count does not match row count");
    if (m < 2) throw ParameterError("ridge training needs at least two rows");
    if (l2 < 0.0) throw ParameterError("l2 strength must be nonnegative");

    Eigen::MatrixXd A(m, n + 1);
    A.leftCols(n) = Z;
    A.col(n).setOnes();
    Eigen::MatrixXd gram = A.transpose() * A;
    gram.topLeftCorner(n, n).diagonal().array() += l2;
    const Eigen::VectorXd beta = gram.ldlt().solve(A.transpose() * scores);

    LinearModel model;
    model.weights = beta.head(n);
    model.bias = beta[n];
    model.kind = ModelKind::least_squares;
    model.l2 = l2;
    model.validate();
    return model;
}

Eigen::VectorXd predict(const LinearModel& model, const RowMatrix& Z) {
    model.validate();
    if (Z.cols() != model.weights.size())
        throw ShapeError("representation width does not match model weights");
    Eigen::VectorXd out = (Z * model.weights).array() + model.bias;
    if (model.kind == ModelKind::logistic)
        for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = sigmoid(out[i]);
    return out;
}

Eigen::VectorXd xing_style_scores(const Eigen::VectorXd& work, const Eigen::VectorXd& edu,
                                  const Eigen::VectorXd& views, const Eigen::Vector3d& weights) {
    const Eigen::Index m = work.size();
    if (edu.size() != m || views.size() != m)
        throw ShapeError("score components have mismatched lengths");
    if ((weights.array() < 0.0).any())
        throw ParameterError("score weights must be nonnegative");

    Eigen::VectorXd total = Eigen::VectorXd::Zero(m);
    const Eigen::VectorXd* cols[3] = {&work, &edu, &views};
    for (int c = 0; c < 3; ++c) {
        const double lo = cols[c]->minCoeff();
        const double hi = cols[c]->maxCoeff();
        if (hi > lo) total += weights[c] / (hi - lo) * (cols[c]->array() - lo).matrix();
    }
    return total;
}

}  // namespace ifair
