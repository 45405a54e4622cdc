#include "udil/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace udil {

double discriminator_loss(const DiscriminatorState& d, std::span<const EmbeddedPair> learner_pairs,
                          std::span<const EmbeddedPair> expert_pairs) {
    return discriminator_loss_grad(d, learner_pairs, expert_pairs).loss;
}

double encoder_loss(const DiscriminatorState& d, const EncoderState& enc, std::span<const Transition> learner) {
    return encoder_loss_grad(d, enc, learner).loss;
}

Vec synthesize_rewards(const DiscriminatorState& d, const EncoderState& enc, std::span<const Transition> ts) {
    std::vector<EmbeddedPair> pairs;
    pairs.reserve(ts.size());
    for (const auto& t : ts) pairs.push_back(encoder_apply_pair(enc, t));
    const Vec logits = disc_forward_batch(d, disc_inputs(d.config, pairs));
    return logits.unaryExpr([](double l) { return -std::log(clamp_prob(sigmoid(l))); });
}

double synthesize_reward(const DiscriminatorState& d, const EncoderState& enc, const Transition& t) {
    return synthesize_rewards(d, enc, std::span<const Transition>(&t, 1))[0];
}

StateVector compute_goal_state(const DemoSet& demos, const EmbeddingSpec& f) {
    if (demos.trajectories.empty()) throw ValidationError("goal state needs at least one trajectory");
    StateVector goal = StateVector::Zero(f.embed_dim());
    for (const auto& tr : demos.trajectories) goal += apply_embedding(f, tr.states.back());
    return goal / static_cast<double>(demos.trajectories.size());
}

double goal_distance_reward(const StateVector& goal, const EncoderState& enc, const StateVector& s) {
    const Vec z = encoder_apply(enc, s);
    if (z.size() != goal.size()) throw ValidationError("goal dim does not match encoder output");
    return -(z - goal).norm();
}

double js_estimate(std::span<const EmbeddedPair> p, std::span<const EmbeddedPair> q, int bins) {
    if (p.empty() || q.empty()) throw ValidationError("js_estimate needs nonempty sample sets");
    if (bins < 2) throw ValidationError("js_estimate needs at least 2 bins");
    const Index m = p.front().z.size();
    if (m > 3) throw ValidationError("js_estimate supports embedded dim <= 3");
    const Index width = 2 * m;
    auto coords = [m](const EmbeddedPair& e, Index k) { return k < m ? e.z[k] : e.z_next[k - m]; };

    // z and z' live in the same space and share one range per embedded dim.
    Vec lo = Vec::Constant(m, std::numeric_limits<double>::infinity());
    Vec hi = Vec::Constant(m, -std::numeric_limits<double>::infinity());
    for (auto set : {p, q})
        for (const auto& e : set) {
            if (e.z.size() != m || e.z_next.size() != m) throw ValidationError("js_estimate: mixed embedded dims");
            for (Index k = 0; k < width; ++k) {
                lo[k % m] = std::min(lo[k % m], coords(e, k));
                hi[k % m] = std::max(hi[k % m], coords(e, k));
            }
        }

    auto cell = [&](const EmbeddedPair& e) {
        std::uint64_t key = 0;
        for (Index k = 0; k < width; ++k) {
            std::uint64_t b = 0;
            const Index axis = k % m;
            if (hi[axis] > lo[axis]) {
                const double u = (coords(e, k) - lo[axis]) / (hi[axis] - lo[axis]);
                b = static_cast<std::uint64_t>(std::min<double>(bins - 1, std::floor(u * bins)));
            }
            key = key * static_cast<std::uint64_t>(bins) + b;
        }
        return key;
    };

    std::map<std::uint64_t, std::pair<double, double>> hist;
    for (const auto& e : p) hist[cell(e)].first += 1.0;
    for (const auto& e : q) hist[cell(e)].second += 1.0;

    const double np = static_cast<double>(p.size());
    const double nq = static_cast<double>(q.size());
    double js = 0.0;
    for (const auto& [key, counts] : hist) {
        const double pp = counts.first / np;
        const double qq = counts.second / nq;
        const double mid = 0.5 * (pp + qq);
        if (pp > 0.0) js += 0.5 * pp * std::log(pp / mid);
        if (qq > 0.0) js += 0.5 * qq * std::log(qq / mid);
    }
    return std::max(0.0, js);
}

RewardMode parse_reward_mode(const std::string& s) {
    if (s == "adversarial") return RewardMode::Adversarial;
    if (s == "goal-distance") return RewardMode::GoalDistance;
    throw ValidationError("unknown reward mode '" + s + "'");
}

std::string to_string(RewardMode m) { return m == RewardMode::Adversarial ? "adversarial" : "goal-distance"; }

void TrainConfig::validate() const {
    if (!(lr_encoder > 0.0) || !(lr_discriminator > 0.0)) throw ValidationError("learning rates must be positive");
    if (!(encoder_update_prob >= 0.0 && encoder_update_prob <= 1.0))
        throw ValidationError("encoder_update_prob must lie in [0, 1]");
    if (batch_size < 1 || disc_updates_per_iter < 0 || rollout_episodes < 1 || total_iters < 0)
        throw ValidationError("batch sizes and counts must be positive");
    if (horizon < 1 || frameskip < 1 || frameskip >= horizon + 1)
        throw ValidationError("frameskip must be in [1, horizon]");
    if (js_bins < 2 || eval_episodes < 1) throw ValidationError("js_bins >= 2 and eval_episodes >= 1 required");
    if (embedding_dim_override && *embedding_dim_override < 1)
        throw ValidationError("embedding_dim_override must be positive");
    cem.validate();
}

EmbeddingSpec effective_embedding(const EmbeddingSpec& f, const TrainConfig& cfg) {
    if (!cfg.embedding_dim_override) return f;
    const auto& report = f.source_report;
    if (report.per_dim_mi.empty()) throw ValidationError("embedding override needs the MI report");
    const auto curve = cumulative_mi_curve(report);
    const std::size_t d = std::min<std::size_t>(*cfg.embedding_dim_override, curve.sorted_dims.size());
    EmbeddingSpec out = explicit_embedding({curve.sorted_dims.begin(), curve.sorted_dims.begin() + d}, report);
    out.frameskip = f.frameskip;
    out.rng_seed = f.rng_seed;
    return out;
}

std::vector<EmbeddedPair> expert_embedded_pairs(const DemoSet& demos, const EmbeddingSpec& f, int frameskip) {
    std::vector<EmbeddedPair> out;
    for (const auto& t : extract_transitions(demos, frameskip))
        out.push_back({apply_embedding(f, t.from), apply_embedding(f, t.to)});
    return out;
}

ProgressStats evaluate_progress(const Env& env, const PolicyParams& p, int horizon, int episodes,
                                std::uint64_t seed) {
    auto e = env.clone();
    ProgressStats st;
    Rng unused(0);
    for (int i = 0; i < episodes; ++i) {
        const Episode ep = rollout(*e, p, horizon, derive_seed(seed, static_cast<std::uint64_t>(i)), unused, true);
        st.per_episode.push_back(e->canonical_progress(ep.states.back()) - e->canonical_progress(ep.states.front()));
    }
    double sum = 0.0;
    for (double v : st.per_episode) sum += v;
    st.mean = sum / episodes;
    if (episodes > 1) {
        double ss = 0.0;
        for (double v : st.per_episode) ss += (v - st.mean) * (v - st.mean);
        st.stderr_ = std::sqrt(ss / (episodes - 1)) / std::sqrt(static_cast<double>(episodes));
    }
    return st;
}

ProgressStats scripted_expert_progress(const Env& env, int horizon, int episodes, std::uint64_t seed) {
    auto e = env.clone();
    ProgressStats st;
    for (int i = 0; i < episodes; ++i) {
        StateVector s = e->reset(derive_seed(seed, static_cast<std::uint64_t>(i)));
        const double start = e->canonical_progress(s);
        for (int t = 0; t < horizon; ++t) s = e->step(scripted_expert_action(*e, s));
        st.per_episode.push_back(e->canonical_progress(s) - start);
    }
    double sum = 0.0;
    for (double v : st.per_episode) sum += v;
    st.mean = sum / episodes;
    if (episodes > 1) {
        double ss = 0.0;
        for (double v : st.per_episode) ss += (v - st.mean) * (v - st.mean);
        st.stderr_ = std::sqrt(ss / (episodes - 1)) / std::sqrt(static_cast<double>(episodes));
    }
    return st;
}

namespace {

template <class T>
std::vector<T> sample_batch(std::span<const T> pool, int n, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<T> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.push_back(pool[pick(rng)]);
    return out;
}

std::vector<EmbeddedPair> encode_all(const EncoderState& enc, std::span<const Transition> ts) {
    std::vector<EmbeddedPair> out;
    out.reserve(ts.size());
    for (const auto& t : ts) out.push_back(encoder_apply_pair(enc, t));
    return out;
}

void check_finite(double v, const char* what, int iter) {
    if (!std::isfinite(v)) throw RuntimeAbort(std::string("non-finite ") + what + " at iteration " + std::to_string(iter));
}

}  // namespace

TrainedArtifacts udil_train(const Env& learner_env, const DemoSet& demos, const EmbeddingSpec& f,
                            const TrainConfig& cfg) {
    cfg.validate();
    demos.validate();
    const EmbeddingSpec embed = effective_embedding(f, cfg);
    const int m = embed.embed_dim();
    auto env = learner_env.clone();
    const EnvSpec spec = env->spec();

    const std::vector<EmbeddedPair> expert = expert_embedded_pairs(demos, embed, cfg.frameskip);
    const std::uint64_t seed = cfg.rng_seed;
    Rng rollout_rng(derive_seed(seed, 1));
    Rng batch_rng(derive_seed(seed, 2));
    Rng encoder_rng(derive_seed(seed, 3));
    Rng cem_rng(derive_seed(seed, 4));

    TrainedArtifacts out;
    out.embedding = embed;
    if (cfg.initial_encoder) {
        out.encoder = *cfg.initial_encoder;
    } else {
        EncoderConfig ec;
        ec.n_in = spec.state_dim;
        ec.m_out = m;
        ec.use_bias = cfg.use_bias;
        ec.diagonal = cfg.encoder_diagonal;
        ec.seed = derive_seed(seed, 5);
        out.encoder = make_encoder(ec);
    }
    if (out.encoder.config.n_in != spec.state_dim)
        throw ValidationError("encoder input dim " + std::to_string(out.encoder.config.n_in) +
                              " does not match learner state dim " + std::to_string(spec.state_dim));
    if (out.encoder.config.m_out != m)
        throw ValidationError("encoder output dim " + std::to_string(out.encoder.config.m_out) +
                              " does not match embedding dim " + std::to_string(m));

    DiscriminatorConfig dc;
    dc.embed_dim = m;
    dc.hidden = cfg.disc_hidden;
    dc.pair_input = cfg.pair_input;
    dc.seed = derive_seed(seed, 6);
    out.discriminator = make_discriminator(dc);
    out.policy = make_zero_policy(spec.state_dim, spec.action_dim);

    std::optional<StateVector> goal;
    if (cfg.reward_mode == RewardMode::GoalDistance) goal = compute_goal_state(demos, embed);

    CemConfig cem = cfg.cem;
    cem.horizon = cfg.horizon;
    cem.frameskip = cfg.frameskip;

    auto& enc = out.encoder;
    auto& disc = out.discriminator;
    const std::span<const EmbeddedPair> expert_span(expert);

    for (int iter = 0; iter < cfg.total_iters; ++iter) try {
        std::vector<Transition> learner;
        for (int e = 0; e < cfg.rollout_episodes; ++e) {
            const Episode ep = rollout(*env, out.policy, cfg.horizon, rollout_rng);
            const auto ts = episode_transitions(ep, cfg.frameskip);
            learner.insert(learner.end(), ts.begin(), ts.end());
        }
        const std::span<const Transition> learner_span(learner);

        MetricsRow row;
        row.iter = iter;
        row.disc_loss = std::numeric_limits<double>::quiet_NaN();
        for (int k = 0; k < cfg.disc_updates_per_iter; ++k) {
            const auto lb = sample_batch(learner_span, cfg.batch_size, batch_rng);
            const auto eb = sample_batch(expert_span, cfg.batch_size, batch_rng);
            const auto dl = discriminator_loss_grad(disc, encode_all(enc, lb), eb);
            check_finite(dl.loss, "discriminator loss", iter);
            adam_step(disc, dl.grad, cfg.lr_discriminator);
            row.disc_loss = dl.loss;
            if (uniform01(encoder_rng) < cfg.encoder_update_prob) {
                const auto el = encoder_loss_grad(disc, enc, lb);
                check_finite(el.loss, "encoder loss", iter);
                adam_step(enc, el.grad, cfg.lr_encoder);
            }
        }
        row.encoder_loss = encoder_loss(disc, enc, learner_span);
        check_finite(row.encoder_loss, "encoder loss", iter);
        row.mean_synth_reward = synthesize_rewards(disc, enc, learner_span).mean();

        RewardFn reward;
        if (goal) {
            reward = [&](std::span<const Transition> ts) {
                Vec r(static_cast<Index>(ts.size()));
                for (std::size_t i = 0; i < ts.size(); ++i)
                    r[static_cast<Index>(i)] = goal_distance_reward(*goal, enc, ts[i].to);
                return r;
            };
        } else {
            reward = [&](std::span<const Transition> ts) { return synthesize_rewards(disc, enc, ts); };
        }
        out.policy = cem_update(*env, reward, out.policy, cem, cem_rng).params;

        row.eval_true_reward =
            evaluate_progress(*env, out.policy, cfg.horizon, cfg.eval_episodes, derive_seed(seed, 7)).mean;
        row.js_estimate = m <= 3 ? js_estimate(encode_all(enc, learner_span), expert_span, cfg.js_bins)
                                 : std::numeric_limits<double>::quiet_NaN();
        check_finite(row.mean_synth_reward, "synthesized reward", iter);
        out.metrics.push_back(row);
    } catch (const RuntimeAbort& e) {
        const std::string msg = e.what();
        if (msg.find("at iteration") != std::string::npos) throw;
        throw RuntimeAbort(msg + " at iteration " + std::to_string(iter));
    }
    return out;
}

void fit_discriminator(DiscriminatorState& d, std::span<const EmbeddedPair> learner,
                       std::span<const EmbeddedPair> expert, int steps, int batch_size, double lr, std::uint64_t seed) {
    if (learner.empty() || expert.empty()) throw ValidationError("fit_discriminator needs nonempty sets");
    Rng rng(seed);
    for (int s = 0; s < steps; ++s) {
        const auto lb = sample_batch(learner, batch_size, rng);
        const auto eb = sample_batch(expert, batch_size, rng);
        adam_step(d, discriminator_loss_grad(d, lb, eb).grad, lr);
    }
}

void fit_adversarially(DiscriminatorState& d, EncoderState& enc, std::span<const Transition> learner,
                       std::span<const EmbeddedPair> expert, const AdversarialFitConfig& cfg) {
    if (learner.empty() || expert.empty()) throw ValidationError("fit_adversarially needs nonempty sets");
    Rng rng(derive_seed(cfg.seed, 1));
    Rng coin(derive_seed(cfg.seed, 2));
    for (int s = 0; s < cfg.steps; ++s) {
        const auto lb = sample_batch(learner, cfg.batch_size, rng);
        const auto eb = sample_batch(expert, cfg.batch_size, rng);
        adam_step(d, discriminator_loss_grad(d, encode_all(enc, lb), eb).grad, cfg.lr_discriminator);
        if (uniform01(coin) < cfg.encoder_update_prob) adam_step(enc, encoder_loss_grad(d, enc, lb).grad, cfg.lr_encoder);
    }
}

double discriminator_accuracy(const DiscriminatorState& d, std::span<const EmbeddedPair> learner,
                              std::span<const EmbeddedPair> expert) {
    const Vec ll = disc_forward_batch(d, disc_inputs(d.config, learner));
    const Vec le = disc_forward_batch(d, disc_inputs(d.config, expert));
    const double correct = static_cast<double>((ll.array() > 0.0).count() + (le.array() <= 0.0).count());
    return correct / static_cast<double>(learner.size() + expert.size());
}

std::vector<EmbeddedPair> apply_pair_affine(const PairAffine& g, std::span<const EmbeddedPair> pairs) {
    std::vector<EmbeddedPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back({(g.a * p.z.array() + g.b).matrix(), (g.c * p.z_next.array() + g.d).matrix()});
    return out;
}

double direction_js(std::span<const EmbeddedPair> p, std::span<const EmbeddedPair> q) {
    if (p.empty() || q.empty()) throw ValidationError("direction_js needs nonempty sets");
    auto frac_down = [](std::span<const EmbeddedPair> s) {
        std::size_t down = 0;
        for (const auto& e : s)
            if (e.z_next[0] < e.z[0]) ++down;
        return static_cast<double>(down) / static_cast<double>(s.size());
    };
    const double pd = frac_down(p);
    const double qd = frac_down(q);
    double js = 0.0;
    for (auto [a, b] : {std::pair{pd, qd}, std::pair{1.0 - pd, 1.0 - qd}}) {
        const double mid = 0.5 * (a + b);
        if (a > 0.0) js += 0.5 * a * std::log(a / mid);
        if (b > 0.0) js += 0.5 * b * std::log(b / mid);
    }
    return std::max(0.0, js);
}

PairGridResult pair_affine_grid_search(std::span<const EmbeddedPair> learner, std::span<const EmbeddedPair> expert,
                                       PairFamily family, bool constant_only, int grid_points,
                                       const std::function<double(std::span<const EmbeddedPair>,
                                                                  std::span<const EmbeddedPair>)>& score) {
    if (grid_points < 2) throw ValidationError("grid needs at least 2 points");
    std::vector<double> grid(grid_points);
    for (int i = 0; i < grid_points; ++i) grid[i] = -5.0 + 10.0 * i / (grid_points - 1);
    const std::vector<double> zero{0.0};
    const auto& slopes = constant_only ? zero : grid;

    PairGridResult best;
    best.best_score = std::numeric_limits<double>::infinity();
    auto consider = [&](const PairAffine& g) {
        const double s = score(apply_pair_affine(g, learner), expert);
        ++best.evaluated;
        if (s < best.best_score) {
            best.best_score = s;
            best.best = g;
        }
    };
    for (double a : slopes)
        for (double b : grid) {
            if (family == PairFamily::TimeInvariant) {
                consider({a, b, a, b});
                continue;
            }
            for (double c : slopes)
                for (double d : grid) consider({a, b, c, d});
        }
    return best;
}

}  // namespace udil
