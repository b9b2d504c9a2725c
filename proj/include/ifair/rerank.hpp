#pragma once

#include <string>
#include <vector>

namespace ifair {

// One query's candidates ordered by non-increasing score.
struct RankedList {
    std::string query = "q";
    std::vector<int> ids;
    std::vector<double> scores;
    std::vector<unsigned char> protected_flag;

    std::size_t size() const { return ids.size(); }
    void validate() const;  // equal lengths, unique ids, non-increasing scores
};

// Smallest protected count whose absence in a size-k prefix would be
// statistically significant: the largest m with BinomCDF(m-1; k, p) <= alpha.
int min_protected_at(int k, double p, double alpha = 0.1);

// Group-fair re-ranking: greedy merge of the protected and non-protected
// score queues such that every prefix of length k holds at least
// min_protected_at(k, p, alpha) protected candidates. Within-group order is
// preserved. A candidate promoted past better-scored ones takes an
// interpolated placeholder score between the nearest surrounding naturally
// placed scores (clamped at the list ends), keeping output scores
// non-increasing. Throws InfeasibleError naming the first rank whose
// constraint cannot be met.
RankedList fair_rerank(const RankedList& ranked, double p, double alpha = 0.1);

// CSV exchange format: query id, candidate id, score, protected flag, rank.
void write_ranked_csv(const std::vector<RankedList>& lists, const std::string& path);
std::vector<RankedList> read_ranked_csv(const std::string& path);

}  // namespace ifair
