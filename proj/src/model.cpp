#include "ifair/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "ifair/errors.hpp"
#include "ifair/rng.hpp"

namespace ifair {

namespace {

inline double pow_abs(double x, double p) {
    return p == 2.0 ? x * x : std::pow(std::abs(x), p);
}

// x |x|^(p-2); the inner derivative of |x|^p up to the factor p
inline double sgn_pow(double x, double p) {
    if (p == 2.0) return x;
    if (x == 0.0) return 0.0;
    return (x > 0.0 ? 1.0 : -1.0) * std::pow(std::abs(x), p - 1.0);
}

inline double guarded_root(double s, double p) {
    if (p == 2.0) return std::sqrt(s + kDistanceGuard) - std::sqrt(kDistanceGuard);
    return std::pow(s + kDistanceGuard, 1.0 / p) - std::pow(kDistanceGuard, 1.0 / p);
}

// d(root)/d(s) times p
inline double root_slope(double s, double p) {
    if (p == 2.0) return 1.0 / std::sqrt(s + kDistanceGuard);
    return std::pow(s + kDistanceGuard, 1.0 / p - 1.0);
}

struct ForwardState {
    RowMatrix S;   // M x K, weighted p-th power sums to each prototype
    RowMatrix D;   // M x K, guarded distances
    RowMatrix U;   // M x K, assignment probabilities
    RowMatrix Xt;  // M x N
};

ForwardState forward_pass(const RowMatrix& X, const Eigen::Ref<const RowMatrix>& V,
                          const Eigen::Ref<const Eigen::VectorXd>& alpha, double p) {
    const auto M = X.rows();
    const auto K = V.rows();
    ForwardState f;
    f.S.resize(M, K);
    Eigen::ArrayXXd diff(M, X.cols());
    for (Eigen::Index k = 0; k < K; ++k) {
        diff = X.array().rowwise() - V.row(k).array();
        if (p == 2.0)
            f.S.col(k) = (diff.square().rowwise() * alpha.transpose().array()).rowwise().sum();
        else
            f.S.col(k) =
                (diff.abs().pow(p).rowwise() * alpha.transpose().array()).rowwise().sum();
    }
    f.S = f.S.cwiseMax(0.0);
    if (p == 2.0)
        f.D = ((f.S.array() + kDistanceGuard).sqrt() - std::sqrt(kDistanceGuard)).matrix();
    else
        f.D = ((f.S.array() + kDistanceGuard).pow(1.0 / p) -
               std::pow(kDistanceGuard, 1.0 / p))
                  .matrix();
    const Eigen::VectorXd dmin = f.D.rowwise().minCoeff();
    f.U = (-(f.D.colwise() - dmin)).array().exp().matrix();
    const Eigen::VectorXd z = f.U.rowwise().sum();
    f.U.array().colwise() /= z.array();
    f.Xt.noalias() = f.U * V;
    return f;
}

}  // namespace

double minkowski_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& weights, double p,
                          const std::vector<int>* mask) {
    if (a.size() != b.size() || a.size() != weights.size())
        throw ShapeError("distance operands have mismatched dimensions");
    if (!a.allFinite() || !b.allFinite() || !weights.allFinite())
        throw NumericError("non-finite input to distance");
    double s = 0.0;
    if (mask) {
        for (int n : *mask) s += weights[n] * pow_abs(a[n] - b[n], p);
    } else {
        for (Eigen::Index n = 0; n < a.size(); ++n) s += weights[n] * pow_abs(a[n] - b[n], p);
    }
    if (s < 0.0) s = 0.0;
    return guarded_root(s, p);
}

void IFairModel::validate() const {
    if (V.rows() < 1 || V.cols() < 1) throw ParameterError("model needs K >= 1 and N >= 1");
    if (alpha.size() != V.cols()) throw ShapeError("weight vector width does not match prototypes");
    if (!V.allFinite() || !alpha.allFinite()) throw ParameterError("model has non-finite entries");
    if ((alpha.array() < 0.0).any()) throw ParameterError("attribute weights must be nonnegative");
    if (p < 1.0) throw ParameterError("exponent p must be >= 1");
    for (int idx : protected_idx)
        if (idx < 0 || idx >= V.cols()) throw ParameterError("protected index out of range");
}

Eigen::VectorXd IFairModel::assignment(const Eigen::VectorXd& x) const {
    if (x.size() != V.cols()) throw ShapeError("input width does not match model");
    const auto K = V.rows();
    Eigen::VectorXd d(K);
    for (Eigen::Index k = 0; k < K; ++k)
        d[k] = minkowski_distance(x, V.row(k).transpose(), alpha, p);
    const double dmin = d.minCoeff();
    Eigen::VectorXd u = (-(d.array() - dmin)).exp();
    return u / u.sum();
}

Eigen::VectorXd IFairModel::transform(const Eigen::VectorXd& x) const {
    return V.transpose() * assignment(x);
}

Representation IFairModel::represent(const RowMatrix& X) const {
    if (X.cols() != V.cols()) throw ShapeError("input width does not match model");
    auto f = forward_pass(X, V, alpha, p);
    return {std::move(f.U), std::move(f.Xt)};
}

RowMatrix IFairModel::transform_all(const RowMatrix& X) const { return represent(X).Xt; }

void IFairModel::save(const std::string& path) const {
    validate();
    nlohmann::json j;
    j["format"] = "ifair-model";
    j["version"] = 1;
    j["k"] = V.rows();
    j["n"] = V.cols();
    j["p"] = p;
    j["v"] = std::vector<double>(V.data(), V.data() + V.size());
    j["alpha"] = std::vector<double>(alpha.data(), alpha.data() + alpha.size());
    j["protected"] = protected_idx;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path);
    out << j.dump(2) << "\n";
}

IFairModel IFairModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("invalid model JSON in " + path + ": " + e.what());
    }
    if (j.value("format", std::string()) != "ifair-model")
        throw ConfigError("not a model file: " + path);
    const auto K = j.at("k").get<Eigen::Index>();
    const auto N = j.at("n").get<Eigen::Index>();
    const auto v = j.at("v").get<std::vector<double>>();
    const auto a = j.at("alpha").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != K * N ||
        static_cast<Eigen::Index>(a.size()) != N)
        throw ShapeError("model file has inconsistent shapes: " + path);
    IFairModel model;
    model.V = Eigen::Map<const RowMatrix>(v.data(), K, N);
    model.alpha = Eigen::Map<const Eigen::VectorXd>(a.data(), N);
    model.p = j.at("p").get<double>();
    model.protected_idx = j.value("protected", std::vector<int>{});
    model.validate();
    return model;
}

void HyperParams::validate() const {
    if (lambda < 0.0 || mu < 0.0) throw ParameterError("loss weights must be nonnegative");
    if (k < 1) throw ParameterError("prototype count must be >= 1");
    if (p < 1.0) throw ParameterError("exponent p must be >= 1");
    if (restarts < 1) throw ParameterError("restarts must be >= 1");
    if (opt.max_iterations < 1 || opt.history < 1)
        throw ParameterError("optimizer settings out of range");
    if (opt.grad_tolerance <= 0.0 || opt.rel_decrease_tolerance <= 0.0)
        throw ParameterError("optimizer tolerances must be positive");
    if (max_full_pair_rows < 0 || sampled_pairs_per_row < 1)
        throw ParameterError("pair sampling settings out of range");
}

PairSet PairSet::all_pairs(int rows) {
    PairSet ps;
    ps.rows_ = rows;
    ps.full_ = true;
    return ps;
}

PairSet PairSet::sampled(int rows, std::int64_t count, std::uint64_t seed) {
    if (rows < 2) return all_pairs(rows);
    PairSet ps;
    ps.rows_ = rows;
    ps.list_.reserve(static_cast<std::size_t>(count));
    Rng rng(seed);
    for (std::int64_t q = 0; q < count; ++q) {
        int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(rows)));
        int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(rows - 1)));
        if (j >= i) ++j;
        ps.list_.emplace_back(std::min(i, j), std::max(i, j));
    }
    return ps;
}

PairSet PairSet::standard(int rows, const HyperParams& hp, std::uint64_t seed) {
    if (rows <= hp.max_full_pair_rows) return all_pairs(rows);
    return sampled(rows, static_cast<std::int64_t>(hp.sampled_pairs_per_row) * rows, seed);
}

std::int64_t PairSet::count() const {
    if (full_)
        return static_cast<std::int64_t>(rows_) * (rows_ - 1) / 2;
    return static_cast<std::int64_t>(list_.size());
}

double utility_loss(const RowMatrix& X, const RowMatrix& Xt) {
    if (X.rows() != Xt.rows() || X.cols() != Xt.cols())
        throw ShapeError("utility loss operands have mismatched shapes");
    return (X - Xt).squaredNorm();
}

Eigen::VectorXd target_distances(const RowMatrix& X, const std::vector<int>& protected_idx,
                                 double p, const PairSet& pairs) {
    std::vector<int> mask;
    {
        std::vector<char> is_prot(X.cols(), 0);
        for (int idx : protected_idx) is_prot[idx] = 1;
        for (int n = 0; n < X.cols(); ++n)
            if (!is_prot[n]) mask.push_back(n);
    }
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(X.cols());
    Eigen::VectorXd out(pairs.count());
    Eigen::Index q = 0;
    pairs.for_each([&](int i, int j) {
        out[q++] =
            minkowski_distance(X.row(i).transpose(), X.row(j).transpose(), ones, p, &mask);
    });
    return out;
}

double fairness_loss(const RowMatrix& Xt, const Eigen::VectorXd& alpha, double p,
                     const PairSet& pairs, const Eigen::VectorXd& targets) {
    if (targets.size() != pairs.count())
        throw ShapeError("target distances do not match the pair set");
    double loss = 0.0;
    Eigen::Index q = 0;
    pairs.for_each([&](int i, int j) {
        const double dt =
            minkowski_distance(Xt.row(i).transpose(), Xt.row(j).transpose(), alpha, p);
        const double r = dt - targets[q++];
        loss += r * r;
    });
    return loss;
}

double fairness_loss(const RowMatrix& X, const RowMatrix& Xt, const IFairModel& model,
                     const PairSet& pairs) {
    return fairness_loss(Xt, model.alpha, model.p, pairs,
                         target_distances(X, model.protected_idx, model.p, pairs));
}

Objective::Objective(RowMatrix X, std::vector<int> protected_idx, HyperParams hp)
    : X_(std::move(X)), protected_idx_(std::move(protected_idx)), hp_(std::move(hp)) {
    hp_.validate();
    const int M = static_cast<int>(X_.rows());
    pairs_ = PairSet::standard(M, hp_, mix_seed(hp_.seed, 0x7061697273ULL));
    if (hp_.mu == 0.0 || pairs_.count() == 0) return;
    if (pairs_.is_full() && hp_.p == 2.0) {
        target_matrix_.setZero(M, M);
        std::vector<int> mask;
        std::vector<char> is_prot(X_.cols(), 0);
        for (int idx : protected_idx_) is_prot[idx] = 1;
        for (int n = 0; n < X_.cols(); ++n)
            if (!is_prot[n]) mask.push_back(n);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(X_.cols());
        for (int i = 0; i < M; ++i)
            for (int j = i + 1; j < M; ++j) {
                const double d = minkowski_distance(X_.row(i).transpose(),
                                                    X_.row(j).transpose(), ones, hp_.p, &mask);
                target_matrix_(i, j) = d;
                target_matrix_(j, i) = d;
            }
    } else {
        pair_targets_ = target_distances(X_, protected_idx_, hp_.p, pairs_);
    }
}

double Objective::value(const Eigen::VectorXd& params) const { return eval(params, nullptr); }

double Objective::value_and_grad(const Eigen::VectorXd& params, Eigen::VectorXd& grad) const {
    grad.resize(size());
    return eval(params, &grad);
}

double Objective::eval(const Eigen::VectorXd& params, Eigen::VectorXd* grad) const {
    const Eigen::Index K = hp_.k;
    const Eigen::Index N = X_.cols();
    const Eigen::Index M = X_.rows();
    const double p = hp_.p;
    if (params.size() != size()) throw ShapeError("parameter vector has wrong length");
    if (!params.allFinite()) throw NumericError("non-finite parameter vector");

    Eigen::Map<const RowMatrix> V(params.data(), K, N);
    Eigen::Map<const Eigen::VectorXd> alpha(params.data() + K * N, N);

    const auto f = forward_pass(X_, V, alpha, p);

    const double l_util = (X_ - f.Xt).squaredNorm();

    // dL/dXt and the direct (pairwise) part of dL/dalpha
    RowMatrix G;
    Eigen::VectorXd agrad;
    if (grad) {
        G.setZero(M, N);
        agrad.setZero(N);
        G = 2.0 * hp_.lambda * (f.Xt - X_);
    }

    double l_fair = 0.0;
    if (hp_.mu != 0.0 && pairs_.count() > 0) {
        if (pairs_.is_full() && p == 2.0) {
            // all-pairs form via the weighted Gram matrix
            RowMatrix WXt = f.Xt.array().rowwise() * alpha.transpose().array();
            Eigen::VectorXd a = (WXt.array() * f.Xt.array()).rowwise().sum();
            RowMatrix St(M, M);
            St.noalias() = WXt * f.Xt.transpose();
            St = ((-2.0 * St).colwise() + a).rowwise() + a.transpose();
            St = St.cwiseMax(0.0);
            RowMatrix R =
                ((St.array() + kDistanceGuard).sqrt() - std::sqrt(kDistanceGuard)).matrix() -
                target_matrix_;
            R.diagonal().setZero();
            l_fair = 0.5 * R.squaredNorm();
            if (grad) {
                RowMatrix E =
                    (2.0 * R.array() * (St.array() + kDistanceGuard).rsqrt()).matrix();
                const Eigen::VectorXd rho = E.rowwise().sum();
                RowMatrix EXt(M, N);
                EXt.noalias() = E * f.Xt;
                G.noalias() += hp_.mu *
                               ((rho.asDiagonal() * f.Xt - EXt).array().rowwise() *
                                alpha.transpose().array())
                                   .matrix();
                agrad += (hp_.mu / 2.0) *
                         (f.Xt.array().square().matrix().transpose() * rho -
                          (EXt.array() * f.Xt.array()).colwise().sum().matrix().transpose());
            }
        } else {
            Eigen::Index q = 0;
            Eigen::VectorXd delta(N), spow(N), apow(N);
            pairs_.for_each([&](int i, int j) {
                delta = (f.Xt.row(i) - f.Xt.row(j)).transpose();
                double st = 0.0;
                for (Eigen::Index n = 0; n < N; ++n) st += alpha[n] * pow_abs(delta[n], p);
                if (st < 0.0) st = 0.0;
                const double dt = guarded_root(st, p);
                const double r = dt - pair_targets_[q++];
                l_fair += r * r;
                if (grad) {
                    const double w = root_slope(st, p);
                    const double coef = 2.0 * hp_.mu * r * w;
                    for (Eigen::Index n = 0; n < N; ++n) {
                        spow[n] = sgn_pow(delta[n], p);
                        apow[n] = pow_abs(delta[n], p);
                    }
                    G.row(i).array() +=
                        coef * alpha.transpose().array() * spow.transpose().array();
                    G.row(j).array() -=
                        coef * alpha.transpose().array() * spow.transpose().array();
                    agrad += (coef / p) * apow;
                }
            });
        }
    }

    if (!std::isfinite(l_util)) throw NumericError("utility term became non-finite");
    if (!std::isfinite(l_fair)) throw NumericError("fairness term became non-finite");
    const double loss = hp_.lambda * l_util + hp_.mu * l_fair;

    if (grad) {
        // back through Xt = U V, then the softmax and the distances
        RowMatrix Vgrad(K, N);
        Vgrad.noalias() = f.U.transpose() * G;
        RowMatrix H(M, K);
        H.noalias() = G * V.transpose();
        const Eigen::VectorXd hbar = (f.U.array() * H.array()).rowwise().sum();
        Eigen::ArrayXXd slope(M, K);
        if (p == 2.0)
            slope = (f.S.array() + kDistanceGuard).rsqrt();
        else
            slope = (f.S.array() + kDistanceGuard).pow(1.0 / p - 1.0);
        RowMatrix T = (f.U.array() * ((-H).colwise() + hbar).array() * slope).matrix();
        Eigen::ArrayXXd diff(M, N);
        for (Eigen::Index k = 0; k < K; ++k) {
            diff = X_.array().rowwise() - V.row(k).array();
            if (p == 2.0) {
                Vgrad.row(k).array() -=
                    alpha.transpose().array() *
                    (diff.matrix().transpose() * T.col(k)).transpose().array();
                agrad += 0.5 * (diff.square().matrix().transpose() * T.col(k));
            } else {
                Eigen::ArrayXXd sp = diff.unaryExpr([p](double x) { return sgn_pow(x, p); });
                Vgrad.row(k).array() -=
                    alpha.transpose().array() *
                    (sp.matrix().transpose() * T.col(k)).transpose().array();
                agrad += (1.0 / p) * (diff.abs().pow(p).matrix().transpose() * T.col(k));
            }
        }
        Eigen::Map<RowMatrix>(grad->data(), K, N) = Vgrad;
        grad->tail(N) = agrad;
        if (!grad->allFinite()) throw NumericError("gradient became non-finite");
    }
    return loss;
}

}  // namespace ifair
