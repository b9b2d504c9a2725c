#include "ifair/synthetic.hpp"

#include <cmath>
#include <string>

#include "ifair/errors.hpp"
#include "ifair/linear.hpp"
#include "ifair/rng.hpp"

namespace ifair {

void SynthConfig::validate() const {
    if (n < 1) throw ParameterError("synthetic study needs at least one point");
    if (!(std::abs(correlation) < 1.0))
        throw ParameterError("component correlation must lie in (-1,1) to keep the "
                             "covariance positive definite");
    if (!(mix_weight >= 0.0 && mix_weight <= 1.0))
        throw ParameterError("mixture weight must lie in [0,1]");
    if (!(membership_rate >= 0.0 && membership_rate <= 1.0))
        throw ParameterError("membership rate must lie in [0,1]");
}

DataTable generate_synthetic(const SynthConfig& config) {
    config.validate();
    Rng mixture(mix_seed(config.seed, 0x73796e7468ULL));
    Rng membership(mix_seed(config.seed, 0x6d656d62ULL));

    DataTable t;
    t.X.resize(config.n, 3);
    t.outcome.resize(config.n);
    t.task = TaskKind::classification;
    const double tail = std::sqrt(1.0 - config.correlation * config.correlation);

    for (int i = 0; i < config.n; ++i) {
        const bool correlated = mixture.uniform() < config.mix_weight;
        const double z1 = mixture.normal();
        const double z2 = mixture.normal();
        double x1, x2;
        if (correlated) {
            x1 = config.mean_correlated[0] + z1;
            x2 = config.mean_correlated[1] + config.correlation * z1 + tail * z2;
        } else {
            x1 = config.mean_isotropic[0] + z1;
            x2 = config.mean_isotropic[1] + z2;
        }
        bool a = false;
        switch (config.scheme) {
            case MembershipScheme::random:
                a = membership.uniform() < config.membership_rate;
                break;
            case MembershipScheme::x1_threshold:
                a = x1 <= config.threshold;
                break;
            case MembershipScheme::x2_threshold:
                a = x2 <= config.threshold;
                break;
        }
        t.X(i, 0) = x1;
        t.X(i, 1) = x2;
        t.X(i, 2) = a ? 1.0 : 0.0;
        t.outcome[i] = correlated ? 1.0 : 0.0;
        t.row_ids.push_back(std::to_string(i + 1));
        t.protected_flag.push_back(a ? 1 : 0);
    }
    t.columns = {{"X1", 0, "", false}, {"X2", 1, "", false}, {"A", 2, "", true}};
    t.protected_idx = {2};
    t.stats.rows_read = config.n;
    return t;
}

double cross_scheme_displacement(const std::vector<RowMatrix>& representations) {
    if (representations.size() < 2)
        throw ParameterError("displacement needs at least two representations");
    for (const auto& rep : representations)
        if (rep.rows() != representations[0].rows() || rep.cols() != representations[0].cols())
            throw ShapeError("representations have mismatched shapes");

    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < representations.size(); ++a) {
        for (std::size_t b = a + 1; b < representations.size(); ++b) {
            for (Eigen::Index i = 0; i < representations[a].rows(); ++i)
                total += (representations[a].row(i) - representations[b].row(i)).norm();
            pairs += representations[a].rows();
        }
    }
    return total / static_cast<double>(pairs);
}

InvarianceReport invariance_report(const std::vector<SchemeRun>& runs) {
    if (runs.empty()) throw ParameterError("invariance report needs at least one run");
    const Eigen::Index rows = runs[0].data.rows();
    for (const auto& run : runs) {
        run.model.validate();
        if (run.data.rows() != rows || run.data.cols() != runs[0].data.cols())
            throw ShapeError("scheme runs have mismatched data shapes");
        if (run.model.dim() != run.data.cols())
            throw ShapeError("model width does not match the data");
        // schemes must share everything except the protected column
        for (Eigen::Index i = 0; i < rows; ++i)
            for (int c : run.data.nonprotected_idx())
                if (run.data.X(i, c) != runs[0].data.X(i, c))
                    throw ParameterError("scheme runs do not share their mixture draws");
    }

    InvarianceReport report;
    std::vector<RowMatrix> transformed;
    double shift_total = 0.0;
    std::size_t shift_count = 0;
    for (const auto& run : runs) {
        const RowMatrix Xt = run.model.transform_all(run.data.X);
        transformed.push_back(Xt);

        // Flip toggles the binary membership coding in whatever affine scale the
        // column carries (0/1 raw, 0/(1/std) after normalization).
        std::vector<std::pair<int, double>> flip_sum;
        for (int c : run.data.protected_idx)
            flip_sum.emplace_back(c, run.data.X.col(c).minCoeff() + run.data.X.col(c).maxCoeff());

        for (Eigen::Index i = 0; i < rows; ++i) {
            Eigen::VectorXd flipped = run.data.X.row(i);
            for (const auto& [c, sum] : flip_sum) flipped[c] = sum - flipped[c];
            const double shift =
                (run.model.transform(flipped) - run.model.transform(run.data.X.row(i))).norm();
            shift_total += shift;
            report.flip_shift_max = std::max(report.flip_shift_max, shift);
            ++shift_count;
        }

        const auto clf = train_logistic(Xt, run.data.outcome);
        const auto preds = make_predictions(predict(clf, Xt), run.data.outcome,
                                            run.data.protected_flag, run.data.masked_matrix());
        report.per_scheme.push_back(evaluate_classification(preds));
    }
    report.flip_shift_mean = shift_total / static_cast<double>(shift_count);
    if (runs.size() > 1)
        report.cross_scheme_mean_displacement = cross_scheme_displacement(transformed);
    return report;
}

}  // namespace ifair
