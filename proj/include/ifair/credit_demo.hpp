#pragma once

#include <cstdint>
#include <string>

namespace ifair {

// Generator for the bundled credit-scoring demo dataset. The real German
// bank data is not redistributed here; this produces a stand-in with the
// same shape (1000 applicants, mixed categorical/numeric attributes, a
// binary age-group flag as the protected attribute, good/bad outcome) and
// the same qualitative structure: financial stability drives most columns,
// age group correlates with employment, housing and property, and the
// outcome carries a direct age penalty on top of the stability signal.
struct CreditDemoConfig {
    int n = 1000;
    std::uint64_t seed = 19;
    double young_rate = 0.25;

    void validate() const;
};

// Write the demo table as CSV (header row, values quoted only when needed).
void write_credit_demo_csv(const std::string& path, const CreditDemoConfig& config = {});

// The CSV to load for credit experiments: the IFAIR_CREDIT_CSV environment
// variable when set (pointing at a real export with the same header), else
// fallback_path.
std::string resolve_credit_csv(const std::string& fallback_path);

}  // namespace ifair
