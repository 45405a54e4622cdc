#pragma once

#include "udil/common.hpp"
#include "udil/diffcore.hpp"
#include "udil/envsuite.hpp"
#include "udil/miembed.hpp"
#include "udil/policy.hpp"
#include "udil/trajstore.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace udil {

// --- objective ----------------------------------------------------------------
//
// Discriminator convention: D -> 1 on learner pairs, D -> 0 on expert pairs.
// The discriminator minimizes discriminator_loss; the encoder minimizes
// encoder_loss (the learner term, the only one that depends on g); the policy
// maximizes synthesize_reward = -log D.

double discriminator_loss(const DiscriminatorState& d, std::span<const EmbeddedPair> learner_pairs,
                          std::span<const EmbeddedPair> expert_pairs);
double encoder_loss(const DiscriminatorState& d, const EncoderState& enc, std::span<const Transition> learner);
double synthesize_reward(const DiscriminatorState& d, const EncoderState& enc, const Transition& t);
Vec synthesize_rewards(const DiscriminatorState& d, const EncoderState& enc, std::span<const Transition> ts);

// Mean of f(last state) over all trajectories.
StateVector compute_goal_state(const DemoSet& demos, const EmbeddingSpec& f);
double goal_distance_reward(const StateVector& goal, const EncoderState& enc, const StateVector& s);

// Plug-in Jensen-Shannon divergence (nats) between histograms of the flattened
// pairs [z, z'] with `bins` cells per axis. The bounding box is shared by both
// sample sets, and each embedded dimension uses one range for z and z'.
double js_estimate(std::span<const EmbeddedPair> p, std::span<const EmbeddedPair> q, int bins);

// --- training -----------------------------------------------------------------

enum class RewardMode { Adversarial, GoalDistance };
RewardMode parse_reward_mode(const std::string& s);
std::string to_string(RewardMode m);

struct TrainConfig {
    double lr_encoder = 0.001;
    double lr_discriminator = 0.001;
    // Chance of an encoder step after each discriminator step.
    double encoder_update_prob = 0.01;
    bool use_bias = false;
    bool encoder_diagonal = false;
    int batch_size = 64;
    int disc_updates_per_iter = 4;
    std::vector<int> disc_hidden{64, 64};
    // false: the discriminator sees only z (single-state ablation).
    bool pair_input = true;
    CemConfig cem;
    int rollout_episodes = 8;
    int horizon = 100;
    int frameskip = 15;
    int total_iters = 200;
    std::uint64_t rng_seed = 0;
    RewardMode reward_mode = RewardMode::Adversarial;
    // Keep only the top-d dimensions of the embedding's MI ranking.
    std::optional<int> embedding_dim_override;
    // Start from this encoder instead of a random one.
    std::optional<EncoderState> initial_encoder;
    int js_bins = 10;
    int eval_episodes = 2;

    void validate() const;
};

struct MetricsRow {
    int iter = 0;
    double disc_loss = 0.0;
    double encoder_loss = 0.0;
    double mean_synth_reward = 0.0;
    double eval_true_reward = 0.0;
    double js_estimate = 0.0;
};

struct TrainedArtifacts {
    PolicyParams policy;
    EncoderState encoder;
    DiscriminatorState discriminator;
    std::vector<MetricsRow> metrics;
    EmbeddingSpec embedding;
};

// The embedding actually used for training after applying the override.
EmbeddingSpec effective_embedding(const EmbeddingSpec& f, const TrainConfig& cfg);

// Expert pairs (f(s), f(s')) at the given frameskip.
std::vector<EmbeddedPair> expert_embedded_pairs(const DemoSet& demos, const EmbeddingSpec& f, int frameskip);

// Jointly trains policy, encoder and discriminator. Deterministic given cfg.rng_seed.
TrainedArtifacts udil_train(const Env& learner_env, const DemoSet& demos, const EmbeddingSpec& f,
                            const TrainConfig& cfg);

// Canonical forward progress of the deterministic policy, averaged over episodes.
struct ProgressStats {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::vector<double> per_episode;
};
ProgressStats evaluate_progress(const Env& env, const PolicyParams& p, int horizon, int episodes,
                                std::uint64_t seed);
// Same measure for the scripted expert in `env`.
ProgressStats scripted_expert_progress(const Env& env, int horizon, int episodes, std::uint64_t seed);

// --- encoder/discriminator fitting without a policy -----------------------------

struct AdversarialFitConfig {
    int steps = 2000;
    int batch_size = 64;
    double lr_discriminator = 0.001;
    double lr_encoder = 0.001;
    double encoder_update_prob = 1.0;
    std::uint64_t seed = 0;
};

// Alternates discriminator steps and (with probability encoder_update_prob)
// encoder steps on fixed learner transitions / expert pairs.
void fit_adversarially(DiscriminatorState& d, EncoderState& enc, std::span<const Transition> learner,
                       std::span<const EmbeddedPair> expert, const AdversarialFitConfig& cfg);

// Discriminator-only training on fixed pair sets.
void fit_discriminator(DiscriminatorState& d, std::span<const EmbeddedPair> learner,
                       std::span<const EmbeddedPair> expert, int steps, int batch_size, double lr, std::uint64_t seed);

// Fraction of pairs classified correctly (learner: logit > 0, expert: logit <= 0).
double discriminator_accuracy(const DiscriminatorState& d, std::span<const EmbeddedPair> learner,
                              std::span<const EmbeddedPair> expert);

// --- affine pair mappings on 1-d transitions --------------------------------------

// (s, s') -> (a s + b, c s' + d). Time-invariant when a == c and b == d.
struct PairAffine {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    bool time_invariant() const { return a == c && b == d; }
};

std::vector<EmbeddedPair> apply_pair_affine(const PairAffine& g, std::span<const EmbeddedPair> pairs);

// JS divergence (nats) between the distributions of the transition direction
// 1[z' < z] under p and q.
double direction_js(std::span<const EmbeddedPair> p, std::span<const EmbeddedPair> q);

struct PairGridResult {
    PairAffine best;
    double best_score = 0.0;
    std::size_t evaluated = 0;
};

enum class PairFamily { TimeVariant, TimeInvariant };

// Exhaustive search over a uniform grid on [-5, 5] per parameter.
// constant_only restricts to input-ignoring maps (a = c = 0).
PairGridResult pair_affine_grid_search(std::span<const EmbeddedPair> learner, std::span<const EmbeddedPair> expert,
                                       PairFamily family, bool constant_only, int grid_points,
                                       const std::function<double(std::span<const EmbeddedPair>,
                                                                  std::span<const EmbeddedPair>)>& score);

}  // namespace udil
