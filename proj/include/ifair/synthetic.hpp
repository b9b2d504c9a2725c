#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ifair/data.hpp"
#include "ifair/metrics.hpp"
#include "ifair/model.hpp"

namespace ifair {

// How group membership is assigned on top of the shared mixture draws.
enum class MembershipScheme { random, x1_threshold, x2_threshold };

// Two-component Gaussian mixture over (X1, X2) with the protected attribute A
// as a third column. Component 0 is isotropic with unit variance; component 1
// is correlated. The component means are a modeling choice, placed so the
// coordinate threshold splits the population meaningfully; they are echoed in
// study outputs.
struct SynthConfig {
    int n = 100;
    Eigen::Vector2d mean_isotropic{2.0, 2.0};
    Eigen::Vector2d mean_correlated{4.0, 4.0};
    double correlation = 0.95;     // component 1 off-diagonal covariance
    double mix_weight = 0.5;       // probability of the correlated component
    double membership_rate = 0.3;  // scheme random
    double threshold = 3.0;        // schemes x1/x2
    MembershipScheme scheme = MembershipScheme::random;
    std::uint64_t seed = 0;

    void validate() const;
};

// Draw a table with features (X1, X2, A), outcome Y = component membership,
// and per-row protected flags. The mixture stream depends only on the seed,
// so configs differing in scheme share (X1, X2, Y) exactly and differ only
// in A.
DataTable generate_synthetic(const SynthConfig& config);

// One scheme's data together with the model trained on it.
struct SchemeRun {
    MembershipScheme scheme = MembershipScheme::random;
    DataTable data;
    IFairModel model;
};

struct InvarianceReport {
    // mean over scheme pairs and rows of the distance between the two
    // transformed versions of the same point
    double cross_scheme_mean_displacement = 0.0;
    // distance moved by a point's transform when its A value is flipped
    double flip_shift_mean = 0.0;
    double flip_shift_max = 0.0;
    std::vector<MetricReport> per_scheme;  // in-sample classifier metrics
};

// Mean over representation pairs and rows of the row-wise distance. All
// representations must share their shape.
double cross_scheme_displacement(const std::vector<RowMatrix>& representations);

// Quantifies how far the learned representations drift when only group
// membership changes. Runs must share the mixture draws (same seed).
InvarianceReport invariance_report(const std::vector<SchemeRun>& runs);

}  // namespace ifair
