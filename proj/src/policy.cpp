#include "udil/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace udil {

void PolicyParams::validate() const {
    if (gain.rows() < 1 || gain.cols() < 1) throw ValidationError("policy gain must be non-empty");
    if (bias.size() != gain.rows() || log_std.size() != gain.rows())
        throw ValidationError("policy bias/log_std size must equal action dim");
    if (!gain.allFinite() || !bias.allFinite() || !log_std.allFinite())
        throw ValidationError("policy parameters must be finite");
}

Vec PolicyParams::flat_mean() const {
    Vec p(gain.size() + bias.size());
    p.head(gain.size()) = gain.reshaped();
    p.tail(bias.size()) = bias;
    return p;
}

void PolicyParams::set_flat_mean(const Vec& p) {
    if (p.size() != gain.size() + bias.size()) throw ValidationError("policy parameter vector has wrong size");
    gain.reshaped() = p.head(gain.size());
    bias = p.tail(bias.size());
}

PolicyParams make_zero_policy(int state_dim, int action_dim, double log_std) {
    if (state_dim < 1 || action_dim < 1) throw ValidationError("policy dims must be positive");
    return {Mat::Zero(action_dim, state_dim), Vec::Zero(action_dim), Vec::Constant(action_dim, log_std)};
}

Vec policy_mean_action(const PolicyParams& p, const StateVector& s) {
    if (s.size() != p.state_dim())
        throw ValidationError("policy expects state dim " + std::to_string(p.state_dim()) + ", got " +
                              std::to_string(s.size()));
    return (p.gain * s + p.bias).array().tanh().matrix();
}

Vec policy_act(const PolicyParams& p, const StateVector& s, Rng& rng) {
    if (s.size() != p.state_dim())
        throw ValidationError("policy expects state dim " + std::to_string(p.state_dim()) + ", got " +
                              std::to_string(s.size()));
    Vec pre = p.gain * s + p.bias;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < pre.size(); ++i)
        if (p.log_std[i] > kMinLogStd) pre[i] += std::exp(p.log_std[i]) * normal(rng);
    return pre.array().tanh().matrix();
}

Episode rollout(Env& env, const PolicyParams& p, int horizon, std::uint64_t episode_seed, Rng& rng,
                bool deterministic) {
    if (horizon < 1) throw ValidationError("horizon must be positive");
    const EnvSpec spec = env.spec();
    if (spec.state_dim != p.state_dim() || spec.action_dim != p.action_dim())
        throw ValidationError("policy dims do not match env " + spec.domain_name);
    Episode ep;
    ep.states.reserve(horizon + 1);
    ep.actions.reserve(horizon);
    ep.states.push_back(env.reset(episode_seed));
    for (int t = 0; t < horizon; ++t) {
        Vec a = deterministic ? policy_mean_action(p, ep.states.back()) : policy_act(p, ep.states.back(), rng);
        ep.states.push_back(env.step(a));
        ep.actions.push_back(std::move(a));
    }
    ep.rewards.assign(horizon, 0.0);
    return ep;
}

Episode rollout(Env& env, const PolicyParams& p, int horizon, Rng& rng) {
    const std::uint64_t seed = rng();
    return rollout(env, p, horizon, seed, rng);
}

std::vector<Transition> episode_transitions(const Episode& ep, int frameskip) {
    if (frameskip < 1) throw ValidationError("frameskip must be positive");
    std::vector<Transition> out;
    for (std::size_t t = 0; t + frameskip < ep.states.size(); ++t) out.push_back({ep.states[t], ep.states[t + frameskip]});
    return out;
}

RewardFn per_transition(std::function<double(const Transition&)> fn) {
    return [fn = std::move(fn)](std::span<const Transition> ts) {
        Vec r(static_cast<Index>(ts.size()));
        for (std::size_t i = 0; i < ts.size(); ++i) r[static_cast<Index>(i)] = fn(ts[i]);
        return r;
    };
}

double relabel(Episode& ep, const RewardFn& reward, int frameskip) {
    const auto ts = episode_transitions(ep, frameskip);
    std::fill(ep.rewards.begin(), ep.rewards.end(), 0.0);
    if (ts.empty()) return 0.0;
    const Vec r = reward(ts);
    if (r.size() != static_cast<Index>(ts.size())) throw ValidationError("reward function returned wrong length");
    double total = 0.0;
    for (std::size_t t = 0; t < ts.size(); ++t) {
        ep.rewards[t] = r[static_cast<Index>(t)];
        total += ep.rewards[t];
    }
    return total;
}

void CemConfig::validate() const {
    if (population < 2) throw ValidationError("CEM population must be >= 2");
    if (!(elite_frac > 0.0 && elite_frac <= 1.0)) throw ValidationError("elite_frac must lie in (0, 1]");
    if (noise_std < 0.0) throw ValidationError("noise_std must be >= 0");
    if (episodes_per_candidate < 1) throw ValidationError("episodes_per_candidate must be >= 1");
    if (horizon < 1 || frameskip < 1) throw ValidationError("horizon and frameskip must be positive");
}

CemResult cem_update(Env& env, const RewardFn& reward, const PolicyParams& p, const CemConfig& cfg, Rng& rng) {
    cfg.validate();
    p.validate();
    const Vec mean = p.flat_mean();
    const Index n_params = mean.size();

    std::vector<std::uint64_t> episode_seeds(cfg.episodes_per_candidate);
    std::vector<std::uint64_t> noise_seeds(cfg.episodes_per_candidate);
    for (int e = 0; e < cfg.episodes_per_candidate; ++e) {
        episode_seeds[e] = rng();
        noise_seeds[e] = rng();
    }

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vec> candidates(cfg.population);
    for (auto& c : candidates) {
        c = mean;
        for (Index i = 0; i < n_params; ++i) c[i] += cfg.noise_std * normal(rng);
    }

    CemResult out;
    out.scores.resize(cfg.population);
    PolicyParams cand = p;
    for (int c = 0; c < cfg.population; ++c) {
        cand.set_flat_mean(candidates[c]);
        double total = 0.0;
        for (int e = 0; e < cfg.episodes_per_candidate; ++e) {
            Rng noise(noise_seeds[e]);
            Episode ep = rollout(env, cand, cfg.horizon, episode_seeds[e], noise);
            total += relabel(ep, reward, cfg.frameskip);
        }
        out.scores[c] = total / cfg.episodes_per_candidate;
    }

    std::vector<int> order(cfg.population);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return out.scores[a] > out.scores[b]; });
    const int n_elite = std::clamp(static_cast<int>(std::ceil(cfg.elite_frac * cfg.population - 1e-9)), 1,
                                   cfg.population);

    Vec elite_mean = Vec::Zero(n_params);
    double elite_score = 0.0;
    for (int r = 0; r < n_elite; ++r) {
        elite_mean += candidates[order[r]];
        elite_score += out.scores[order[r]];
    }
    elite_mean /= n_elite;
    out.elite_mean_score = elite_score / n_elite;
    out.population_mean_score =
        std::accumulate(out.scores.begin(), out.scores.end(), 0.0) / static_cast<double>(cfg.population);

    out.params = p;
    out.params.set_flat_mean(elite_mean);
    if (cfg.noise_std > 0.0 && n_elite > 1) {
        double var = 0.0;
        for (int r = 0; r < n_elite; ++r) var += (candidates[order[r]] - elite_mean).squaredNorm();
        var /= static_cast<double>(n_elite - 1) * static_cast<double>(n_params);
        const double spread_log = std::log(std::max(std::sqrt(var), std::exp(kMinLogStd)));
        out.params.log_std = out.params.log_std.cwiseMin(spread_log);
    }
    return out;
}

}  // namespace udil
