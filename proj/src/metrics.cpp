#include "ifair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "ifair/errors.hpp"

namespace ifair {

namespace {

// inversion count of v by mergesort; strict inversions only
std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& tmp,
                              std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::int64_t count = count_inversions(v, tmp, lo, mid) + count_inversions(v, tmp, mid, hi);
    std::size_t a = lo, b = mid, out = lo;
    while (a < mid && b < hi) {
        if (v[b] < v[a]) {
            count += static_cast<std::int64_t>(mid - a);
            tmp[out++] = v[b++];
        } else {
            tmp[out++] = v[a++];
        }
    }
    while (a < mid) tmp[out++] = v[a++];
    while (b < hi) tmp[out++] = v[b++];
    std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo),
              tmp.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return count;
}

std::int64_t tie_pair_count(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::int64_t total = 0;
    std::size_t i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j < v.size() && v[j] == v[i]) ++j;
        const std::int64_t g = static_cast<std::int64_t>(j - i);
        total += g * (g - 1) / 2;
        i = j;
    }
    return total;
}

}  // namespace

void PredictionSet::validate() const {
    const auto m = scores.size();
    if (labels.size() != m || truth.size() != m ||
        static_cast<Eigen::Index>(protected_flag.size()) != m || Xstar.rows() != m)
        throw ShapeError("prediction set fields have mismatched lengths");
}

PredictionSet make_predictions(const Eigen::VectorXd& scores, const Eigen::VectorXd& truth,
                               const std::vector<unsigned char>& protected_flag,
                               const RowMatrix& Xstar) {
    PredictionSet p;
    p.scores = scores;
    p.labels = (scores.array() >= 0.5).cast<double>();
    p.truth = truth;
    p.protected_flag = protected_flag;
    p.Xstar = Xstar;
    p.validate();
    return p;
}

double consistency_ynn(const PredictionSet& preds, int k, bool hard_labels) {
    preds.validate();
    const Eigen::Index m = preds.size();
    if (m <= k) throw ParameterError("consistency needs more points than neighbors");
    const Eigen::VectorXd& yhat = hard_labels ? preds.labels : preds.scores;

    const Eigen::VectorXd sq = preds.Xstar.rowwise().squaredNorm();
    double total = 0.0;
    std::vector<std::pair<double, Eigen::Index>> order(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            double d2 = sq[i] + sq[j] - 2.0 * preds.Xstar.row(i).dot(preds.Xstar.row(j));
            order[j] = {j == i ? std::numeric_limits<double>::infinity() : std::max(d2, 0.0),
                        j};
        }
        std::partial_sort(order.begin(), order.begin() + k, order.end());
        for (int t = 0; t < k; ++t) total += std::abs(yhat[i] - yhat[order[t].second]);
    }
    return 1.0 - total / (static_cast<double>(m) * k);
}

std::optional<double> parity(const PredictionSet& preds) {
    preds.validate();
    double sum[2] = {0.0, 0.0};
    Eigen::Index count[2] = {0, 0};
    for (Eigen::Index i = 0; i < preds.size(); ++i) {
        const int g = preds.protected_flag[i] ? 1 : 0;
        sum[g] += preds.scores[i];
        ++count[g];
    }
    if (count[0] == 0 || count[1] == 0) return std::nullopt;
    return 1.0 - std::abs(sum[1] / count[1] - sum[0] / count[0]);
}

std::optional<double> equal_opportunity(const PredictionSet& preds) {
    preds.validate();
    double tp[2] = {0.0, 0.0};
    Eigen::Index pos[2] = {0, 0};
    for (Eigen::Index i = 0; i < preds.size(); ++i) {
        if (preds.truth[i] != 1.0) continue;
        const int g = preds.protected_flag[i] ? 1 : 0;
        ++pos[g];
        if (preds.labels[i] == 1.0) tp[g] += 1.0;
    }
    if (pos[0] == 0 || pos[1] == 0) return std::nullopt;
    return 1.0 - std::abs(tp[1] / pos[1] - tp[0] / pos[0]);
}

double accuracy(const PredictionSet& preds) {
    preds.validate();
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < preds.size(); ++i)
        if (preds.labels[i] == preds.truth[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::optional<double> auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& truth) {
    const Eigen::Index m = scores.size();
    Eigen::Index npos = 0;
    for (Eigen::Index i = 0; i < m; ++i)
        if (truth[i] == 1.0) ++npos;
    const Eigen::Index nneg = m - npos;
    if (npos == 0 || nneg == 0) return std::nullopt;

    // rank-sum with midranks for ties
    std::vector<Eigen::Index> idx(m);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::sort(idx.begin(), idx.end(),
              [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    Eigen::Index i = 0;
    while (i < m) {
        Eigen::Index j = i;
        while (j < m && scores[idx[j]] == scores[idx[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j + 1);  // 1-based
        for (Eigen::Index t = i; t < j; ++t)
            if (truth[idx[t]] == 1.0) rank_sum_pos += midrank;
        i = j;
    }
    const double npos_d = static_cast<double>(npos);
    return (rank_sum_pos - npos_d * (npos_d + 1.0) / 2.0) /
           (npos_d * static_cast<double>(nneg));
}

std::optional<double> auc(const PredictionSet& preds) {
    preds.validate();
    return auc(preds.scores, preds.truth);
}

std::optional<double> kendall_tau(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::Index m = a.size();
    if (b.size() != m) throw ShapeError("rank correlation needs equal-length inputs");
    if (m < 2) return std::nullopt;

    std::vector<std::pair<double, double>> pairs(m);
    for (Eigen::Index i = 0; i < m; ++i) pairs[i] = {a[i], b[i]};
    std::sort(pairs.begin(), pairs.end());

    std::int64_t n1 = 0, n3 = 0;
    {
        std::size_t i = 0;
        while (i < pairs.size()) {
            std::size_t j = i;
            while (j < pairs.size() && pairs[j].first == pairs[i].first) ++j;
            const std::int64_t g = static_cast<std::int64_t>(j - i);
            n1 += g * (g - 1) / 2;
            std::size_t u = i;
            while (u < j) {
                std::size_t v = u;
                while (v < j && pairs[v].second == pairs[u].second) ++v;
                const std::int64_t h = static_cast<std::int64_t>(v - u);
                n3 += h * (h - 1) / 2;
                u = v;
            }
            i = j;
        }
    }
    std::vector<double> bseq(pairs.size()), tmp(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) bseq[i] = pairs[i].second;
    std::int64_t n2 = tie_pair_count(bseq);
    const std::int64_t swaps = count_inversions(bseq, tmp, 0, bseq.size());

    const std::int64_t n0 = static_cast<std::int64_t>(m) * (m - 1) / 2;
    const double concordant_minus_discordant =
        static_cast<double>(n0 - n1 - n2 + n3 - 2 * swaps);
    const double da = static_cast<double>(n0 - n1);
    const double db = static_cast<double>(n0 - n2);
    if (da == 0.0 || db == 0.0) return std::nullopt;
    return concordant_minus_discordant / (std::sqrt(da) * std::sqrt(db));
}

std::vector<int> ranking_order(const Eigen::VectorXd& scores) {
    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    return idx;
}

double map_at_cutoff(const std::vector<QueryRanking>& queries, int cutoff) {
    if (queries.empty()) throw ParameterError("mean average precision needs queries");
    double total = 0.0;
    for (const auto& q : queries) {
        if (q.predicted.size() != q.truth.size())
            throw ShapeError("query ranking fields have mismatched lengths");
        const auto pred_order = ranking_order(q.predicted);
        const auto true_order = ranking_order(q.truth);
        std::vector<char> relevant(q.predicted.size(), 0);
        const int nrel = std::min<int>(cutoff, static_cast<int>(true_order.size()));
        for (int t = 0; t < nrel; ++t) relevant[true_order[t]] = 1;

        double hits = 0.0, ap = 0.0;
        const int upto = std::min<int>(cutoff, static_cast<int>(pred_order.size()));
        for (int t = 0; t < upto; ++t) {
            if (relevant[pred_order[t]]) {
                hits += 1.0;
                ap += hits / (t + 1);
            }
        }
        total += nrel > 0 ? ap / nrel : 0.0;
    }
    return total / static_cast<double>(queries.size());
}

double pct_protected_top(const std::vector<unsigned char>& flags_in_rank_order, int k) {
    const int upto = std::min<int>(k, static_cast<int>(flags_in_rank_order.size()));
    if (upto == 0) throw ParameterError("ranking prefix is empty");
    int prot = 0;
    for (int t = 0; t < upto; ++t)
        if (flags_in_rank_order[t]) ++prot;
    return 100.0 * prot / upto;
}

MetricReport evaluate_classification(const PredictionSet& preds, int knn) {
    MetricReport r;
    r.task = TaskKind::classification;
    r.acc = accuracy(preds);
    r.auc = auc(preds);
    r.eqopp = equal_opportunity(preds);
    r.parity = parity(preds);
    r.ynn = consistency_ynn(preds, knn);
    return r;
}

}  // namespace ifair
