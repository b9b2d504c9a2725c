#include "ifair/credit_demo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <vector>

#include "ifair/errors.hpp"
#include "ifair/rng.hpp"

namespace ifair {

namespace {

int clamp_round(double v, int lo, int hi) {
    const int r = static_cast<int>(std::lround(v));
    return std::clamp(r, lo, hi);
}

// Index of the first cut strictly above z; cuts ascending.
template <std::size_t N>
std::size_t bin_of(double z, const double (&cuts)[N]) {
    std::size_t i = 0;
    while (i < N && z >= cuts[i]) ++i;
    return i;
}

const char* pick(double u, std::initializer_list<std::pair<const char*, double>> weighted) {
    double acc = 0.0;
    for (const auto& [name, w] : weighted) {
        acc += w;
        if (u < acc) return name;
    }
    return (weighted.end() - 1)->first;
}

}  // namespace

void CreditDemoConfig::validate() const {
    if (n < 1) throw ParameterError("credit demo needs at least one row");
    if (!(young_rate > 0.0 && young_rate < 1.0))
        throw ParameterError("young rate must lie strictly inside (0,1)");
}

void write_credit_demo_csv(const std::string& path, const CreditDemoConfig& config) {
    config.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);

    out << "checking_status,duration_months,credit_history,purpose,amount,savings,"
           "employment_years,installment_rate,personal_status,other_debtors,"
           "residence_years,property,age_group,other_plans,housing,existing_credits,"
           "job,dependents,telephone,foreign_worker,credit_risk\n";

    Rng rng(mix_seed(config.seed, 0x6372656469746dULL));
    static const char* kChecking[] = {"overdrawn", "none", "low", "high"};
    static const char* kHistory[] = {"critical", "delayed", "clean"};
    static const char* kSavings[] = {"none", "low", "medium", "high"};
    static const char* kEmployment[] = {"unemployed", "lt1", "y1to4", "y4to7", "ge7"};
    static const char* kProperty[] = {"unknown", "car_other", "savings_contract", "real_estate"};
    static const char* kHousing[] = {"rent", "own", "free"};
    static const char* kJob[] = {"unskilled", "skilled", "management"};

    for (int i = 0; i < config.n; ++i) {
        const bool young = rng.uniform() < config.young_rate;
        const double c = rng.normal();                  // latent creditworthiness
        const double s = c + (young ? -0.5 : 0.25);     // observable stability shift

        const double checking_cuts[] = {-0.8, 0.1, 1.0};
        const char* checking = kChecking[bin_of(s + rng.normal(), checking_cuts)];

        const int duration = clamp_round(18.0 - 4.0 * s + 8.0 * std::abs(rng.normal()), 4, 72);

        const double history_cuts[] = {-0.7, 0.2};
        const char* history = kHistory[bin_of(s + rng.normal(), history_cuts)];

        const char* purpose = pick(rng.uniform(), {{"car", 0.28},
                                                   {"radio_tv", 0.28},
                                                   {"furniture", 0.18},
                                                   {"business", 0.10},
                                                   {"education", 0.08},
                                                   {"repairs", 0.08}});

        const int amount =
            clamp_round(std::exp(7.6 - 0.25 * s + 0.55 * rng.normal()), 250, 20000);

        const double savings_cuts[] = {-0.4, 0.5, 1.2};
        const char* savings = kSavings[bin_of(s + rng.normal(), savings_cuts)];

        const double employment_cuts[] = {-1.6, -0.7, 0.3, 1.1};
        const char* employment = kEmployment[bin_of(
            0.7 * s + (young ? -1.0 : 0.6) + rng.normal(), employment_cuts)];

        const int installment = clamp_round(2.5 - 0.3 * s + 0.9 * rng.normal(), 1, 4);

        const double u_status = rng.uniform();
        const char* status = u_status < (young ? 0.70 : 0.45)            ? "single"
                             : u_status < (young ? 0.88 : 0.82)          ? "married"
                                                                         : "divorced";

        const char* debtors =
            pick(rng.uniform(), {{"none", 0.90}, {"co_applicant", 0.05}, {"guarantor", 0.05}});

        const int residence =
            clamp_round(1.8 + (young ? -0.5 : 0.8) + rng.normal(), 1, 4);

        const double property_cuts[] = {-0.9, 0.1, 0.9};
        const char* property =
            kProperty[bin_of(s + (young ? 0.0 : 0.3) + rng.normal(), property_cuts)];

        const char* plans =
            pick(rng.uniform(), {{"none", 0.82}, {"bank", 0.12}, {"stores", 0.06}});

        const double housing_cuts[] = {-0.3, 1.4};
        const char* housing =
            kHousing[bin_of(0.5 * s + (young ? -0.9 : 0.5) + rng.normal(), housing_cuts)];

        const int credits = clamp_round(1.4 + (young ? 0.0 : 0.2) + 0.6 * rng.normal(), 1, 4);

        const double job_cuts[] = {-0.8, 0.9};
        const char* job = kJob[bin_of(0.6 * s + rng.normal(), job_cuts)];

        const int dependents = rng.uniform() < (young ? 0.12 : 0.22) ? 2 : 1;
        const int telephone = s + (young ? -0.3 : 0.3) + rng.normal() > 0.5 ? 1 : 0;
        const int foreign = rng.uniform() < 0.04 ? 1 : 0;

        const double logit = 1.4 * c - 0.7 * (young ? 1.0 : 0.0) + 1.0;
        const bool good = rng.uniform() < 1.0 / (1.0 + std::exp(-logit));

        out << checking << ',' << duration << ',' << history << ',' << purpose << ','
            << amount << ',' << savings << ',' << employment << ',' << installment << ','
            << status << ',' << debtors << ',' << residence << ',' << property << ','
            << (young ? 1 : 0) << ',' << plans << ',' << housing << ',' << credits << ','
            << job << ',' << dependents << ',' << telephone << ',' << foreign << ','
            << (good ? "good" : "bad") << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

std::string resolve_credit_csv(const std::string& fallback_path) {
    const char* env = std::getenv("IFAIR_CREDIT_CSV");
    if (env != nullptr && env[0] != '\0') return env;
    return fallback_path;
}

}  // namespace ifair
