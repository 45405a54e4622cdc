#pragma once

#include "udil/common.hpp"
#include "udil/trajstore.hpp"

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace udil {

struct EnvSpec {
    int state_dim = 0;
    int action_dim = 0;
    int horizon = 0;
    std::string domain_name;
};

// Episodic continuous-control environment. Episodes have a fixed length;
// there is no terminal state.
class Env {
public:
    virtual ~Env() = default;
    virtual EnvSpec spec() const = 0;
    virtual StateVector reset(std::uint64_t episode_seed) = 0;
    virtual StateVector step(const Vec& action) = 0;
    // Progress along the task axis in the expert's units (forward distance x).
    virtual double canonical_progress(const StateVector& s) const = 0;
    virtual std::unique_ptr<Env> clone() const = 0;
};

// Point mass on a line with a barrier at x = 0 behind the start, plus
// action-independent nuisance dimensions.
//
// canonical state: [x, v, n_1 .. n_k]
//   x' = max(0, x + 0.1 v)
//   v' = clamp(v + gain * a, -1, 1)
//   n' = reflect(n + U(-step, step)) into [-1, 1]
// The observed state applies progress_scale to x and then the permutation.
struct LineConfig {
    std::string name = "expert-line";
    int nuisance_dims = 3;
    double action_gain = 0.5;
    double progress_scale = 1.0;
    double nuisance_step = 1.0;
    // observed[i] = canonical[permutation[i]]; empty means identity
    std::vector<int> permutation;
    int horizon = 100;
    std::uint64_t seed = 0;
};

class LineEnv final : public Env {
public:
    explicit LineEnv(LineConfig cfg);

    EnvSpec spec() const override;
    StateVector reset(std::uint64_t episode_seed) override;
    StateVector step(const Vec& action) override;
    double canonical_progress(const StateVector& s) const override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<LineEnv>(*this); }

    const LineConfig& config() const { return cfg_; }
    StateVector observe() const;
    const Vec& canonical_state() const { return canon_; }
    // Index of the observed dimension holding canonical dimension `d`.
    int observed_index(int canonical_dim) const;

private:
    LineConfig cfg_;
    Vec canon_;
    Rng nuisance_rng_;
};

enum class LearnerVariant { Permuted, NegatedScaled, ExtraNuisance };

std::unique_ptr<LineEnv> make_expert_line(int nuisance_dims, std::uint64_t seed, int horizon = 100);
std::unique_ptr<LineEnv> make_learner_line(LearnerVariant variant, std::uint64_t seed, int horizon = 100);
LearnerVariant parse_learner_variant(const std::string& name);
std::string to_string(LearnerVariant v);

// Affine map (weights, bias) taking the learner's observed state to the
// expert's canonical (x, v). Exists for every variant by construction.
std::pair<Mat, Vec> ground_truth_mapping(const LineEnv& learner);

// One-step bandit: state [0] -> [a]. Used to check policy optimizers.
class BanditEnv final : public Env {
public:
    EnvSpec spec() const override { return {1, 1, 1, "bandit"}; }
    StateVector reset(std::uint64_t) override;
    StateVector step(const Vec& action) override;
    double canonical_progress(const StateVector& s) const override { return s[0]; }
    std::unique_ptr<Env> clone() const override { return std::make_unique<BanditEnv>(*this); }
};

// Scripted expert: maximum forward action on every step.
Vec scripted_expert_action(const Env& env, const StateVector& observed);

DemoSet gen_expert_demos(Env& env, int n_traj, int horizon, std::uint64_t seed);

enum class PairSide { Expert, Learner };

// Uniform pairs in [0,1]^2 with z' < z (expert side) or z' > z (learner side).
struct OrderedPairsSet {
    std::vector<EmbeddedPair> pairs;
    PairSide side = PairSide::Expert;
    std::size_t draws = 0;
};

OrderedPairsSet make_ordered_pairs(int n, PairSide side, std::uint64_t seed);

// Finite MDP with per-action transition matrices P[a](s, s').
struct FiniteMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Mat> transition;
    Vec initial;

    void validate() const;
};

// Chain positions 0..n-1 with a nuisance tag that resamples uniformly every
// step regardless of action. Actions: 0 = left, 1 = right. State index is
// position * nuisance_levels + tag.
struct GridChain {
    FiniteMdp mdp;
    int n_positions = 0;
    int nuisance_levels = 0;
    double gamma = 0.9;

    int index(int position, int tag) const { return position * nuisance_levels + tag; }
    int position(int s) const { return s / nuisance_levels; }
    int tag(int s) const { return s % nuisance_levels; }
};

GridChain make_grid_chain(int n_states, int nuisance_levels, double gamma = 0.9);

// Discounted visitation v = sum_t gamma^t P(s_t = s) and the pair occupancy
// rho(s, s') = v(s) sum_a pi(a|s) P(s'|s,a). Unnormalized mass is 1/(1-gamma).
struct Occupancy {
    Vec visitation;
    Mat pairs;

    Mat normalized_pairs() const { return pairs / pairs.sum(); }
};

// policy(s, a) = pi(a|s); rows must sum to 1.
Occupancy exact_occupancy(const FiniteMdp& mdp, const Mat& policy, double gamma);

struct RewardEquivalence {
    double full = 0.0;
    double embedded = 0.0;
    bool consistent = false;
};

using StateReward = std::function<double(int s, int s_next)>;
// Reward defined on chain positions only (c, c').
struct PositionReward {
    std::function<double(int c, int c_next)> fn;
};

// Expected reward computed from the full-state occupancy and from the
// occupancy marginalized over the nuisance tag. The embedded side evaluates
// the reward at nuisance tag 0, which is only valid when the reward ignores
// the tag; `consistent` reports whether both agree to 1e-12 (relative).
RewardEquivalence expected_reward_equivalence_check(const GridChain& chain, const Mat& policy, double gamma,
                                                    const StateReward& reward);
RewardEquivalence expected_reward_equivalence_check(const GridChain& chain, const Mat& policy, double gamma,
                                                    const PositionReward& reward);

}  // namespace udil
