#pragma once

#include "udil/common.hpp"
#include "udil/trajstore.hpp"

#include <string>
#include <vector>

namespace udil {

struct DimMi {
    int dim_index = 0;
    double mi_nats = 0.0;
};

// Per-dimension mutual information between a transition in that dimension
// and the expert / pseudo-random label.
struct MiReport {
    std::vector<DimMi> per_dim_mi;
    std::size_t sample_count = 0;
    int k_neighbors = 3;
};

struct CumulativeCurve {
    std::vector<int> sorted_dims;   // descending MI, ties -> smaller index first
    std::vector<double> cumulative;  // cumulative[j] = sum of the top j+1 MI values
};

struct Elbow {
    std::size_t index = 0;
    bool degenerate = false;
};

struct EmbeddingSpec {
    std::vector<int> selected_dims;
    MiReport source_report;
    int elbow_index = 0;
    bool degenerate = false;
    // Provenance, serialized alongside the selection.
    int frameskip = 15;
    std::uint64_t rng_seed = 0;

    int embed_dim() const { return static_cast<int>(selected_dims.size()); }
};

constexpr int kDefaultFrameskip = 15;
constexpr int kDefaultKNeighbors = 3;
constexpr double kMiJitter = 1e-10;

// Both endpoints drawn uniformly with replacement from all states in `demos`.
std::vector<LabeledTransition> generate_pseudo_random_transitions(const DemoSet& demos, std::size_t count,
                                                                  std::uint64_t rng_seed);

// kNN estimate (Chebyshev metric) of I((s_d, s'_d); Y) in nats, clamped at 0.
double estimate_dim_mi(const std::vector<LabeledTransition>& samples, int dim, int k_neighbors);

MiReport build_mi_report(const DemoSet& demos, int frameskip = kDefaultFrameskip,
                         int k_neighbors = kDefaultKNeighbors, std::uint64_t rng_seed = 0);

CumulativeCurve cumulative_mi_curve(const MiReport& report);

// Normalized-difference elbow: argmax_j (y_j - x_j) after min-max scaling of
// positions and values to [0, 1]. Flags a degenerate result when the
// difference curve never rises above zero.
Elbow find_elbow(const std::vector<double>& curve);
Elbow find_elbow(const CumulativeCurve& curve);

// Keeps the dimensions up to and including the elbow of the cumulative curve,
// with the curve anchored at zero dimensions (0 nats).
EmbeddingSpec select_embedding(const MiReport& report);
// Explicit selection, bypassing the elbow.
EmbeddingSpec explicit_embedding(std::vector<int> dims, const MiReport& report);
EmbeddingSpec identity_embedding(int dim);

StateVector apply_embedding(const EmbeddingSpec& spec, const StateVector& s);

std::string embedding_to_json(const EmbeddingSpec& spec);
EmbeddingSpec embedding_from_json(const std::string& text);

}  // namespace udil
