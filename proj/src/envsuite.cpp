#include "udil/envsuite.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace udil {

namespace {

constexpr double kDt = 0.1;

double reflect_unit(double n) {
    // Steps never exceed the interval width, so one reflection suffices.
    if (n > 1.0) return 2.0 - n;
    if (n < -1.0) return -2.0 - n;
    return n;
}

}  // namespace

LineEnv::LineEnv(LineConfig cfg) : cfg_(std::move(cfg)) {
    const int dim = 2 + cfg_.nuisance_dims;
    if (cfg_.nuisance_dims < 0) throw ValidationError("nuisance_dims must be >= 0");
    if (cfg_.horizon <= 0) throw ValidationError("horizon must be positive");
    if (cfg_.nuisance_step < 0.0 || cfg_.nuisance_step > 2.0)
        throw ValidationError("nuisance_step must lie in [0, 2]");
    if (cfg_.progress_scale == 0.0) throw ValidationError("progress_scale must be nonzero");
    if (!cfg_.permutation.empty()) {
        if (static_cast<int>(cfg_.permutation.size()) != dim) throw ValidationError("permutation has wrong length");
        std::vector<int> sorted = cfg_.permutation;
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < dim; ++i)
            if (sorted[i] != i) throw ValidationError("permutation is not a permutation of 0..dim-1");
    }
    canon_ = Vec::Zero(dim);
}

EnvSpec LineEnv::spec() const { return {2 + cfg_.nuisance_dims, 1, cfg_.horizon, cfg_.name}; }

StateVector LineEnv::reset(std::uint64_t episode_seed) {
    nuisance_rng_.seed(derive_seed(cfg_.seed, episode_seed));
    canon_.setZero();
    std::uniform_real_distribution<double> init(-1.0, 1.0);
    for (int k = 0; k < cfg_.nuisance_dims; ++k) canon_[2 + k] = init(nuisance_rng_);
    return observe();
}

StateVector LineEnv::step(const Vec& action) {
    if (action.size() != 1) throw ValidationError("line env expects a 1-d action");
    const double a = std::clamp(action[0], -1.0, 1.0);
    const double x = canon_[0];
    const double v = canon_[1];
    canon_[0] = std::max(0.0, x + kDt * v);
    canon_[1] = std::clamp(v + cfg_.action_gain * a, -1.0, 1.0);
    std::uniform_real_distribution<double> noise(-cfg_.nuisance_step, cfg_.nuisance_step);
    for (int k = 0; k < cfg_.nuisance_dims; ++k) canon_[2 + k] = reflect_unit(canon_[2 + k] + noise(nuisance_rng_));
    return observe();
}

StateVector LineEnv::observe() const {
    Vec scaled = canon_;
    scaled[0] *= cfg_.progress_scale;
    if (cfg_.permutation.empty()) return scaled;
    Vec out(scaled.size());
    for (int i = 0; i < out.size(); ++i) out[i] = scaled[cfg_.permutation[i]];
    return out;
}

int LineEnv::observed_index(int canonical_dim) const {
    if (cfg_.permutation.empty()) return canonical_dim;
    auto it = std::find(cfg_.permutation.begin(), cfg_.permutation.end(), canonical_dim);
    return static_cast<int>(it - cfg_.permutation.begin());
}

double LineEnv::canonical_progress(const StateVector& s) const {
    return s[observed_index(0)] / cfg_.progress_scale;
}

std::unique_ptr<LineEnv> make_expert_line(int nuisance_dims, std::uint64_t seed, int horizon) {
    LineConfig cfg;
    cfg.name = "expert-line";
    cfg.nuisance_dims = nuisance_dims;
    cfg.seed = seed;
    cfg.horizon = horizon;
    return std::make_unique<LineEnv>(cfg);
}

std::unique_ptr<LineEnv> make_learner_line(LearnerVariant variant, std::uint64_t seed, int horizon) {
    LineConfig cfg;
    cfg.seed = seed;
    cfg.horizon = horizon;
    cfg.name = "learner-line-" + to_string(variant);
    switch (variant) {
    case LearnerVariant::Permuted: {
        std::vector<int> perm(2 + cfg.nuisance_dims);
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(derive_seed(seed, 0x7065726d));
        std::shuffle(perm.begin(), perm.end(), rng);
        if (std::is_sorted(perm.begin(), perm.end())) std::rotate(perm.begin(), perm.begin() + 1, perm.end());
        cfg.permutation = perm;
        break;
    }
    case LearnerVariant::NegatedScaled:
        cfg.progress_scale = -2.5;
        break;
    case LearnerVariant::ExtraNuisance:
        cfg.nuisance_dims = 5;
        cfg.action_gain = 0.25;
        break;
    }
    return std::make_unique<LineEnv>(cfg);
}

LearnerVariant parse_learner_variant(const std::string& name) {
    if (name == "permuted") return LearnerVariant::Permuted;
    if (name == "negated-scaled") return LearnerVariant::NegatedScaled;
    if (name == "extra-nuisance") return LearnerVariant::ExtraNuisance;
    throw ValidationError("unknown learner variant '" + name + "'");
}

std::string to_string(LearnerVariant v) {
    switch (v) {
    case LearnerVariant::Permuted: return "permuted";
    case LearnerVariant::NegatedScaled: return "negated-scaled";
    case LearnerVariant::ExtraNuisance: return "extra-nuisance";
    }
    return "?";
}

std::pair<Mat, Vec> ground_truth_mapping(const LineEnv& learner) {
    const int n = learner.spec().state_dim;
    Mat w = Mat::Zero(2, n);
    w(0, learner.observed_index(0)) = 1.0 / learner.config().progress_scale;
    w(1, learner.observed_index(1)) = 1.0;
    return {w, Vec::Zero(2)};
}

StateVector BanditEnv::reset(std::uint64_t) { return Vec::Zero(1); }

StateVector BanditEnv::step(const Vec& action) {
    if (action.size() != 1) throw ValidationError("bandit expects a 1-d action");
    return action;
}

Vec scripted_expert_action(const Env& env, const StateVector&) { return Vec::Ones(env.spec().action_dim); }

DemoSet gen_expert_demos(Env& env, int n_traj, int horizon, std::uint64_t seed) {
    if (n_traj < 1) throw ValidationError("n_traj must be >= 1");
    if (horizon < 1) throw ValidationError("horizon must be >= 1");
    DemoSet demos;
    demos.domain_name = env.spec().domain_name;
    demos.dim = env.spec().state_dim;
    demos.generator_seed = static_cast<std::int64_t>(seed);
    for (int i = 0; i < n_traj; ++i) {
        Trajectory tr;
        tr.states.reserve(horizon + 1);
        StateVector s = env.reset(derive_seed(seed, static_cast<std::uint64_t>(i)));
        tr.states.push_back(s);
        for (int t = 0; t < horizon; ++t) {
            s = env.step(scripted_expert_action(env, s));
            tr.states.push_back(s);
        }
        demos.trajectories.push_back(std::move(tr));
    }
    return demos;
}

OrderedPairsSet make_ordered_pairs(int n, PairSide side, std::uint64_t seed) {
    if (n < 1) throw ValidationError("n must be >= 1");
    OrderedPairsSet out;
    out.side = side;
    out.pairs.reserve(n);
    Rng rng(seed);
    while (static_cast<int>(out.pairs.size()) < n) {
        const double z = uniform01(rng);
        const double z_next = uniform01(rng);
        ++out.draws;
        const bool accept = side == PairSide::Expert ? z_next < z : z_next > z;
        if (!accept) continue;
        out.pairs.push_back({Vec::Constant(1, z), Vec::Constant(1, z_next)});
    }
    return out;
}

void FiniteMdp::validate() const {
    if (n_states < 1 || n_actions < 1) throw ValidationError("mdp needs states and actions");
    if (static_cast<int>(transition.size()) != n_actions) throw ValidationError("one transition matrix per action");
    for (const auto& p : transition) {
        if (p.rows() != n_states || p.cols() != n_states) throw ValidationError("transition matrix has wrong shape");
        if (((p.rowwise().sum().array() - 1.0).abs() > 1e-12).any())
            throw ValidationError("transition rows must sum to 1");
    }
    if (initial.size() != n_states || std::abs(initial.sum() - 1.0) > 1e-12)
        throw ValidationError("initial distribution must sum to 1");
}

GridChain make_grid_chain(int n_states, int nuisance_levels, double gamma) {
    if (n_states < 2) throw ValidationError("grid chain needs at least 2 positions");
    if (nuisance_levels < 1) throw ValidationError("nuisance_levels must be >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in [0, 1)");
    GridChain g;
    g.n_positions = n_states;
    g.nuisance_levels = nuisance_levels;
    g.gamma = gamma;
    const int total = n_states * nuisance_levels;
    g.mdp.n_states = total;
    g.mdp.n_actions = 2;
    g.mdp.initial = Vec::Constant(total, 1.0 / total);
    for (int a = 0; a < 2; ++a) {
        Mat p = Mat::Zero(total, total);
        for (int c = 0; c < n_states; ++c) {
            const int next_c = std::clamp(c + (a == 1 ? 1 : -1), 0, n_states - 1);
            for (int u = 0; u < nuisance_levels; ++u)
                for (int u2 = 0; u2 < nuisance_levels; ++u2) p(g.index(c, u), g.index(next_c, u2)) = 1.0 / nuisance_levels;
        }
        g.mdp.transition.push_back(std::move(p));
    }
    return g;
}

Occupancy exact_occupancy(const FiniteMdp& mdp, const Mat& policy, double gamma) {
    mdp.validate();
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in [0, 1)");
    if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions)
        throw ValidationError("policy table has wrong shape");
    if ((policy.array() < 0.0).any() || ((policy.rowwise().sum().array() - 1.0).abs() > 1e-12).any())
        throw ValidationError("policy rows must be probability distributions");

    Mat p_pi = Mat::Zero(mdp.n_states, mdp.n_states);
    for (int a = 0; a < mdp.n_actions; ++a) p_pi += policy.col(a).asDiagonal() * mdp.transition[a];

    // v = zeta + gamma P_pi^T v
    const Mat lhs = Mat::Identity(mdp.n_states, mdp.n_states) - gamma * p_pi.transpose();
    Occupancy occ;
    occ.visitation = lhs.fullPivLu().solve(mdp.initial);
    occ.pairs = occ.visitation.asDiagonal() * p_pi;
    return occ;
}

namespace {

bool agrees(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace

RewardEquivalence expected_reward_equivalence_check(const GridChain& chain, const Mat& policy, double gamma,
                                                    const StateReward& reward) {
    const Occupancy occ = exact_occupancy(chain.mdp, policy, gamma);
    const int n = chain.mdp.n_states;
    RewardEquivalence out;
    for (int s = 0; s < n; ++s)
        for (int s2 = 0; s2 < n; ++s2) out.full += occ.pairs(s, s2) * reward(s, s2);

    Mat marginal = Mat::Zero(chain.n_positions, chain.n_positions);
    for (int s = 0; s < n; ++s)
        for (int s2 = 0; s2 < n; ++s2) marginal(chain.position(s), chain.position(s2)) += occ.pairs(s, s2);
    for (int c = 0; c < chain.n_positions; ++c)
        for (int c2 = 0; c2 < chain.n_positions; ++c2)
            out.embedded += marginal(c, c2) * reward(chain.index(c, 0), chain.index(c2, 0));
    out.consistent = agrees(out.full, out.embedded);
    return out;
}

RewardEquivalence expected_reward_equivalence_check(const GridChain& chain, const Mat& policy, double gamma,
                                                    const PositionReward& reward) {
    return expected_reward_equivalence_check(
        chain, policy, gamma, StateReward([&](int s, int s2) { return reward.fn(chain.position(s), chain.position(s2)); }));
}

}  // namespace udil
