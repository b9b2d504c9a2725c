#include "ifair/optimizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>

#include "ifair/errors.hpp"
#include "ifair/rng.hpp"

namespace ifair {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Probe {
    double f = kInf;
    double slope = 0.0;  // directional derivative
    Eigen::VectorXd x, g;
    bool ok = false;
};

// Evaluate along x + t d; an exception or non-finite value reads as +inf so
// the line search backs away from it.
Probe probe(const GradFn& fn, const Eigen::VectorXd& x, const Eigen::VectorXd& d, double t) {
    Probe out;
    out.x = x + t * d;
    try {
        out.f = fn(out.x, out.g);
    } catch (const NumericError&) {
        out.f = kInf;
        return out;
    }
    if (!std::isfinite(out.f) || !out.g.allFinite()) {
        out.f = kInf;
        return out;
    }
    out.slope = out.g.dot(d);
    out.ok = true;
    return out;
}

struct LineSearchResult {
    Probe point;
    bool ok = false;
};

// Strong Wolfe conditions via bracket and zoom.
LineSearchResult wolfe_search(const GradFn& fn, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& d, double f0, double slope0, double c1,
                              double c2) {
    LineSearchResult res;
    const int kMaxBracket = 30;
    const int kMaxZoom = 40;

    auto zoom = [&](double lo, double flo, double slo, double hi, double fhi) {
        for (int z = 0; z < kMaxZoom; ++z) {
            // quadratic interpolation, guarded toward bisection
            double t = lo + 0.5 * (hi - lo);
            if (std::isfinite(fhi) && std::abs(hi - lo) > 0) {
                const double denom = 2.0 * (fhi - flo - slo * (hi - lo));
                if (denom != 0.0) {
                    const double cand = lo - slo * (hi - lo) * (hi - lo) / denom;
                    const double margin = 0.1 * std::abs(hi - lo);
                    if (std::isfinite(cand) && cand > std::min(lo, hi) + margin &&
                        cand < std::max(lo, hi) - margin)
                        t = cand;
                }
            }
            auto pt = probe(fn, x, d, t);
            if (!pt.ok || pt.f > f0 + c1 * t * slope0 || pt.f >= flo) {
                hi = t;
                fhi = pt.f;
            } else {
                if (std::abs(pt.slope) <= -c2 * slope0) {
                    res.point = std::move(pt);
                    res.ok = true;
                    return;
                }
                if (pt.slope * (hi - lo) >= 0.0) {
                    hi = lo;
                    fhi = flo;
                }
                lo = t;
                flo = pt.f;
                slo = pt.slope;
            }
            if (std::abs(hi - lo) < 1e-14 * std::max(1.0, std::abs(lo))) break;
        }
        // fall back to the lower endpoint when curvature can't be met
        if (flo < f0 + c1 * lo * slope0 && lo > 0.0) {
            auto pt = probe(fn, x, d, lo);
            if (pt.ok && pt.f <= flo + 1e-12 * std::abs(flo)) {
                res.point = std::move(pt);
                res.ok = true;
            }
        }
    };

    double t_prev = 0.0, f_prev = f0, slope_prev = slope0;
    double t = 1.0;
    for (int i = 0; i < kMaxBracket; ++i) {
        auto pt = probe(fn, x, d, t);
        if (!pt.ok || pt.f > f0 + c1 * t * slope0 || (i > 0 && pt.f >= f_prev)) {
            zoom(t_prev, f_prev, slope_prev, t, pt.f);
            return res;
        }
        if (std::abs(pt.slope) <= -c2 * slope0) {
            res.point = std::move(pt);
            res.ok = true;
            return res;
        }
        if (pt.slope >= 0.0) {
            zoom(t, pt.f, pt.slope, t_prev, f_prev);
            return res;
        }
        t_prev = t;
        f_prev = pt.f;
        slope_prev = pt.slope;
        t *= 2.0;
    }
    return res;
}

}  // namespace

MinimizeResult minimize(const GradFn& fn, const Eigen::VectorXd& x0,
                        const OptimizerSettings& settings) {
    MinimizeResult res;
    res.x = x0;
    Eigen::VectorXd g(x0.size());
    double f = fn(res.x, g);
    if (!std::isfinite(f) || !g.allFinite())
        throw NumericError("objective is non-finite at the starting point");

    std::deque<Eigen::VectorXd> S, Y;
    std::deque<double> rho;
    Eigen::VectorXd d(x0.size()), q(x0.size());
    std::vector<double> a;

    res.trace.emplace_back(f, g.norm());
    for (int iter = 0; iter < settings.max_iterations; ++iter) {
        const double gnorm = g.norm();
        if (gnorm < settings.grad_tolerance) {
            res.converged = true;
            res.stop_reason = "gradient tolerance";
            break;
        }

        // two-loop recursion
        q = g;
        a.assign(S.size(), 0.0);
        for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
            a[i] = rho[i] * S[i].dot(q);
            q -= a[i] * Y[i];
        }
        if (!S.empty()) {
            const double gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
            q *= gamma;
        }
        for (std::size_t i = 0; i < S.size(); ++i) {
            const double b = rho[i] * Y[i].dot(q);
            q += (a[i] - b) * S[i];
        }
        d = -q;

        double slope = d.dot(g);
        if (slope >= 0.0) {
            S.clear();
            Y.clear();
            rho.clear();
            d = -g;
            slope = d.dot(g);
        }

        auto ls = wolfe_search(fn, res.x, d, f, slope, settings.wolfe_c1, settings.wolfe_c2);
        if (!ls.ok && !S.empty()) {
            S.clear();
            Y.clear();
            rho.clear();
            d = -g;
            slope = d.dot(g);
            ls = wolfe_search(fn, res.x, d, f, slope, settings.wolfe_c1, settings.wolfe_c2);
        }
        if (!ls.ok) {
            res.stop_reason = "line search failed";
            break;
        }

        const Eigen::VectorXd step = ls.point.x - res.x;
        const Eigen::VectorXd ygrad = ls.point.g - g;
        const double sy = step.dot(ygrad);
        if (sy > 1e-10 * step.norm() * ygrad.norm()) {
            S.push_back(step);
            Y.push_back(ygrad);
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > settings.history) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }

        const double decrease = f - ls.point.f;
        res.x = std::move(ls.point.x);
        g = std::move(ls.point.g);
        f = ls.point.f;
        res.iterations = iter + 1;
        res.trace.emplace_back(f, g.norm());
        if (decrease >= 0.0 &&
            decrease <= settings.rel_decrease_tolerance * std::max(1.0, std::abs(f))) {
            res.converged = true;
            res.stop_reason = "function decrease tolerance";
            break;
        }
    }
    if (res.stop_reason.empty())
        res.stop_reason = res.converged ? "gradient tolerance" : "iteration limit";
    res.f = f;
    res.grad_norm = g.norm();
    return res;
}

Eigen::VectorXd pack(const IFairModel& model) {
    const auto K = model.V.rows();
    const auto N = model.V.cols();
    Eigen::VectorXd params(K * N + N);
    Eigen::Map<RowMatrix>(params.data(), K, N) = model.V;
    params.tail(N) = model.alpha;
    return params;
}

IFairModel unpack(const Eigen::VectorXd& params, int k, int n) {
    if (params.size() != static_cast<Eigen::Index>(k) * n + n)
        throw ShapeError("parameter vector length does not match (k, n)");
    IFairModel model;
    model.V = Eigen::Map<const RowMatrix>(params.data(), k, n);
    model.alpha = params.tail(n);
    return model;
}

IFairModel init_model(InitScheme scheme, int k, int n, const std::vector<int>& protected_idx,
                      std::uint64_t seed, double p) {
    Rng rng(mix_seed(seed, 0x696e6974ULL));
    IFairModel model;
    model.V.resize(k, n);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) model.V(i, j) = rng.uniform();
    model.alpha.resize(n);
    for (int j = 0; j < n; ++j) model.alpha[j] = rng.uniform();
    if (scheme == InitScheme::ifair_b)
        for (int idx : protected_idx) model.alpha[idx] = 1e-6;
    model.p = p;
    model.protected_idx = protected_idx;
    return model;
}

FitResult fit(const RowMatrix& X, const std::vector<int>& protected_idx, const HyperParams& hp) {
    hp.validate();
    const int n = static_cast<int>(X.cols());
    const Objective obj(X, protected_idx, hp);
    const Eigen::Index vlen = static_cast<Eigen::Index>(hp.k) * n;

    // Optimize beta with alpha = beta^2, keeping weights nonnegative without
    // constraints; prototype coordinates pass through unchanged.
    GradFn wrapped = [&](const Eigen::VectorXd& params, Eigen::VectorXd& grad) {
        Eigen::VectorXd raw(params.size());
        raw.head(vlen) = params.head(vlen);
        raw.tail(n) = params.tail(n).array().square();
        Eigen::VectorXd raw_grad;
        const double f = obj.value_and_grad(raw, raw_grad);
        grad.resize(params.size());
        grad.head(vlen) = raw_grad.head(vlen);
        grad.tail(n) = 2.0 * params.tail(n).array() * raw_grad.tail(n).array();
        return f;
    };

    FitResult result;
    result.history.resize(hp.restarts);
    int best = -1;
    Eigen::VectorXd best_x;
    for (int r = 0; r < hp.restarts; ++r) {
        auto& info = result.history[r];
        info.seed = hp.seed + static_cast<std::uint64_t>(r);
        IFairModel start = init_model(hp.init, hp.k, n, protected_idx, info.seed, hp.p);
        Eigen::VectorXd x0 = pack(start);
        x0.tail(n) = x0.tail(n).cwiseMax(0.0).cwiseSqrt();
        try {
            MinimizeResult run = minimize(wrapped, x0, hp.opt);
            info.final_loss = run.f;
            info.grad_norm = run.grad_norm;
            info.iterations = run.iterations;
            info.note = run.stop_reason;
            if (hp.opt.trace) info.trace = std::move(run.trace);
            if (best < 0 || run.f < result.history[best].final_loss) {
                best = r;
                best_x = std::move(run.x);
            }
        } catch (const NumericError& e) {
            info.aborted = true;
            info.final_loss = kInf;
            info.note = e.what();
        }
    }
    if (best < 0) {
        std::string detail = "all restarts diverged:";
        for (const auto& info : result.history)
            detail += " [seed " + std::to_string(info.seed) + ": " + info.note + "]";
        throw OptimizationError(detail);
    }

    IFairModel model = unpack(best_x, hp.k, n);
    model.alpha = model.alpha.array().square();
    model.p = hp.p;
    model.protected_idx = protected_idx;
    result.model = std::move(model);
    result.final_loss = result.history[best].final_loss;
    result.iterations = result.history[best].iterations;
    result.best_restart = best;
    return result;
}

FitResult fit(const DataTable& table, const HyperParams& hp) {
    return fit(table.X, table.protected_idx, hp);
}

void write_trace_csv(const FitResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "restart,seed,iteration,loss,grad_norm\n";
    char buf[32];
    auto fmt = [&buf](double v) {
        auto r = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, r.ptr);
    };
    for (std::size_t r = 0; r < result.history.size(); ++r) {
        const auto& info = result.history[r];
        for (std::size_t it = 0; it < info.trace.size(); ++it)
            out << r << "," << info.seed << "," << it << "," << fmt(info.trace[it].first)
                << "," << fmt(info.trace[it].second) << "\n";
    }
}

}  // namespace ifair
