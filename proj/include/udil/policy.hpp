#pragma once

#include "udil/common.hpp"
#include "udil/envsuite.hpp"

#include <functional>
#include <span>
#include <vector>

namespace udil {

// Linear-Gaussian controller squashed by tanh:
//   a = tanh(gain s + bias + eps),  eps ~ N(0, exp(log_std)^2)
// log_std at or below kMinLogStd means no noise.
struct PolicyParams {
    Mat gain;
    Vec bias;
    Vec log_std;

    int state_dim() const { return static_cast<int>(gain.cols()); }
    int action_dim() const { return static_cast<int>(gain.rows()); }
    void validate() const;

    // Mean parameters (gain column-major, then bias); log_std is not included.
    Vec flat_mean() const;
    void set_flat_mean(const Vec& p);
};

constexpr double kMinLogStd = -10.0;
constexpr double kInitialLogStd = -1.0;

PolicyParams make_zero_policy(int state_dim, int action_dim, double log_std = kInitialLogStd);

Vec policy_act(const PolicyParams& p, const StateVector& s, Rng& rng);
Vec policy_mean_action(const PolicyParams& p, const StateVector& s);

struct Episode {
    std::vector<StateVector> states;  // horizon + 1
    std::vector<Vec> actions;         // horizon
    std::vector<double> rewards;      // horizon, zero until relabeled
};

struct RolloutBatch {
    std::vector<Episode> episodes;
    int horizon = 0;
};

// Exactly `horizon` steps from env.reset(episode_seed).
Episode rollout(Env& env, const PolicyParams& p, int horizon, std::uint64_t episode_seed, Rng& rng,
                bool deterministic = false);
// Draws the episode seed from `rng`.
Episode rollout(Env& env, const PolicyParams& p, int horizon, Rng& rng);

// Pairs (s_t, s_{t+k}) of one episode.
std::vector<Transition> episode_transitions(const Episode& ep, int frameskip);

// Reward over a batch of transitions; one value per transition.
using RewardFn = std::function<Vec(std::span<const Transition>)>;
RewardFn per_transition(std::function<double(const Transition&)> fn);

// Writes r(s_t, s_{t+k}) into rewards[t] (0 for the last k steps) and
// returns the episode total.
double relabel(Episode& ep, const RewardFn& reward, int frameskip);

struct CemConfig {
    int population = 64;
    double elite_frac = 0.125;
    double noise_std = 0.2;
    int episodes_per_candidate = 2;
    int horizon = 100;
    int frameskip = 1;

    void validate() const;
};

struct CemResult {
    PolicyParams params;
    double population_mean_score = 0.0;
    double elite_mean_score = 0.0;
    std::vector<double> scores;  // per candidate, candidate order
};

// One cross-entropy-method update of the policy mean. Candidates share
// episode seeds (common random numbers); elites are the top
// ceil(elite_frac * population) scores, ties broken by candidate index.
// log_std is capped by the elite parameter spread.
CemResult cem_update(Env& env, const RewardFn& reward, const PolicyParams& p, const CemConfig& cfg, Rng& rng);

}  // namespace udil
