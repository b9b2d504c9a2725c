#include "ifair/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "ifair/errors.hpp"
#include "ifair/textio.hpp"

namespace ifair {

void RankedList::validate() const {
    if (scores.size() != ids.size() || protected_flag.size() != ids.size())
        throw DataError("ranked list fields have mismatched lengths");
    std::set<int> seen(ids.begin(), ids.end());
    if (seen.size() != ids.size()) throw DataError("ranked list has duplicate candidate ids");
    for (std::size_t i = 0; i + 1 < scores.size(); ++i)
        if (scores[i] < scores[i + 1])
            throw DataError("ranked list scores must be non-increasing");
}

int min_protected_at(int k, double p, double alpha) {
    if (k < 1) throw ParameterError("prefix length must be at least 1");
    if (!(p > 0.0 && p < 1.0)) throw ParameterError("protected proportion must lie in (0,1)");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ParameterError("significance level must lie in (0,1)");

    // walk the binomial pmf in log space so large k cannot underflow the
    // recurrence
    int best = 0;
    double log_pmf = k * std::log1p(-p);
    const double log_odds = std::log(p) - std::log1p(-p);
    double cdf = 0.0;
    for (int m = 1; m <= k; ++m) {
        cdf += std::exp(log_pmf);
        if (cdf > alpha) break;
        best = m;
        log_pmf += std::log(static_cast<double>(k - m + 1)) -
                   std::log(static_cast<double>(m)) + log_odds;
    }
    return best;
}

RankedList fair_rerank(const RankedList& ranked, double p, double alpha) {
    ranked.validate();
    const int L = static_cast<int>(ranked.size());
    if (L == 0) return ranked;
    min_protected_at(1, p, alpha);  // surface parameter errors up front

    // input positions per group, already in score order
    std::vector<int> prot, nonprot;
    for (int i = 0; i < L; ++i)
        (ranked.protected_flag[i] ? prot : nonprot).push_back(i);

    RankedList out;
    out.query = ranked.query;
    out.ids.reserve(L);
    out.scores.reserve(L);
    out.protected_flag.reserve(L);
    std::vector<char> promoted(L, 0);

    std::size_t ip = 0, in = 0;
    int prot_count = 0;
    for (int rank = 1; rank <= L; ++rank) {
        const int required = min_protected_at(rank, p, alpha);
        const bool have_p = ip < prot.size();
        const bool have_n = in < nonprot.size();
        int pick;
        if (prot_count < required) {
            if (!have_p)
                throw InfeasibleError("not enough protected candidates to fill rank " +
                                          std::to_string(rank),
                                      rank);
            // promoted past a better-scored candidate: score becomes a
            // placeholder to interpolate later
            promoted[rank - 1] = have_n && nonprot[in] < prot[ip];
            pick = prot[ip++];
            ++prot_count;
        } else if (have_p && (!have_n || prot[ip] < nonprot[in])) {
            pick = prot[ip++];
            ++prot_count;
        } else {
            pick = nonprot[in++];
        }
        out.ids.push_back(ranked.ids[pick]);
        out.scores.push_back(ranked.scores[pick]);
        out.protected_flag.push_back(ranked.protected_flag[pick]);
    }

    // interpolate placeholder runs between naturally placed scores; runs
    // touching an end of the list take the nearest assigned score
    int prev = -1;
    for (int i = 0; i <= L; ++i) {
        if (i < L && promoted[i]) continue;
        if (i - prev > 1 && !(prev < 0 && i >= L)) {
            for (int t = prev + 1; t < i; ++t) {
                if (prev < 0)
                    out.scores[t] = out.scores[i];
                else if (i >= L)
                    out.scores[t] = out.scores[prev];
                else
                    out.scores[t] = out.scores[prev] +
                                    (out.scores[i] - out.scores[prev]) *
                                        static_cast<double>(t - prev) /
                                        static_cast<double>(i - prev);
            }
        }
        prev = i;
    }
    return out;
}

void write_ranked_csv(const std::vector<RankedList>& lists, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "query,candidate,score,protected,rank\n";
    for (const auto& list : lists) {
        list.validate();
        for (std::size_t i = 0; i < list.size(); ++i) {
            out << csv_escape(list.query) << ',' << list.ids[i] << ','
                << format_double(list.scores[i]) << ',' << int(list.protected_flag[i] ? 1 : 0)
                << ',' << (i + 1) << '\n';
        }
    }
    if (!out) throw IoError("failed writing " + path);
}

std::vector<RankedList> read_ranked_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + " is empty");
    const auto header = split_csv_line(line);
    const std::vector<std::string> expected = {"query", "candidate", "score", "protected",
                                               "rank"};
    if (std::vector<std::string>(header.begin(), header.end()) != expected)
        throw DataError(path + " does not look like a ranked-list file");

    std::vector<RankedList> lists;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 5)
            throw DataError(path + ":" + std::to_string(row) + ": expected 5 fields");
        double score = 0.0, cand = 0.0, rank = 0.0;
        if (!parse_double(fields[1], cand) || !parse_double(fields[2], score) ||
            !parse_double(fields[4], rank))
            throw DataError(path + ":" + std::to_string(row) + ": unparseable number");
        if (fields[3] != "0" && fields[3] != "1")
            throw DataError(path + ":" + std::to_string(row) + ": protected flag must be 0/1");

        if (lists.empty() || lists.back().query != fields[0]) {
            lists.emplace_back();
            lists.back().query = fields[0];
        }
        auto& list = lists.back();
        if (static_cast<std::size_t>(rank) != list.size() + 1)
            throw DataError(path + ":" + std::to_string(row) + ": ranks must run 1..n");
        list.ids.push_back(static_cast<int>(cand));
        list.scores.push_back(score);
        list.protected_flag.push_back(fields[3] == "1");
    }
    for (const auto& list : lists) list.validate();
    return lists;
}

}  // namespace ifair
