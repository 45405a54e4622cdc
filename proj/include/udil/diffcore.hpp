#pragma once

#include "udil/common.hpp"

#include <functional>
#include <span>
#include <vector>

namespace udil {

// Adam moment accumulators for a flat parameter vector.
struct AdamMoments {
    Vec first;
    Vec second;
    std::int64_t step_count = 0;
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// One bias-corrected Adam update of `params` in place.
void adam_update(Vec& params, AdamMoments& moments, const Vec& grad, double lr);

// ---------------------------------------------------------------------------
// Bounded affine encoder  z = W_eff s + b_eff,  W_eff = 10 (sigmoid(raw) - 0.5)

constexpr double kEncoderBound = 5.0;

struct EncoderConfig {
    int n_in = 1;
    int m_out = 1;
    bool use_bias = false;
    // Only the main diagonal of W is trainable; the rest is fixed at 0.
    bool diagonal = false;
    std::uint64_t seed = 0;
};

struct EncoderState {
    EncoderConfig config;
    Mat raw_weights;
    Vec raw_bias;
    AdamMoments moments;

    Mat effective_weights() const;
    Vec effective_bias() const;

    // Layout: raw weights (column-major), then raw bias when use_bias.
    Index param_count() const;
    Vec flat() const;
    void set_flat(const Vec& p);
};

double bounded_from_raw(double raw);
double raw_from_bounded(double effective);

// raw parameters ~ U(-0.1, 0.1), seeded by config.seed.
EncoderState make_encoder(const EncoderConfig& config);
// Encoder whose effective parameters equal (weights, bias); entries must lie in (-5, 5).
EncoderState make_encoder_from_effective(const Mat& weights, const Vec& bias, bool use_bias);

Vec encoder_apply(const EncoderState& enc, const StateVector& s);
// The same map applied independently at both time steps.
EmbeddedPair encoder_apply_pair(const EncoderState& enc, const Transition& t);

// ---------------------------------------------------------------------------
// MLP discriminator over embedded transitions. Hidden layers use tanh; the
// output is a raw logit.

struct DiscriminatorConfig {
    int embed_dim = 1;
    std::vector<int> hidden{64, 64};
    // false: the network sees only z (the single-state ablation).
    bool pair_input = true;
    std::uint64_t seed = 0;

    int input_width() const { return pair_input ? 2 * embed_dim : embed_dim; }
};

struct DiscriminatorState {
    DiscriminatorConfig config;
    std::vector<Mat> weights;  // (out x in) per layer, last layer has 1 row
    std::vector<Vec> biases;
    AdamMoments moments;

    Index param_count() const;
    Vec flat() const;
    void set_flat(const Vec& p);
};

// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), seeded.
DiscriminatorState make_discriminator(const DiscriminatorConfig& config);

// Rows of the result are discriminator inputs [z, z'] (or [z] without pair input).
Mat disc_inputs(const DiscriminatorConfig& config, std::span<const EmbeddedPair> pairs);
double disc_forward(const DiscriminatorState& d, const Vec& z, const Vec& z_next);
Vec disc_forward_batch(const DiscriminatorState& d, const Mat& inputs);

// ---------------------------------------------------------------------------
// Losses and exact gradients.
//
// Convention: D = sigmoid(logit) -> 1 on learner pairs, -> 0 on expert pairs.
// Probabilities are clamped to [1e-6, 1 - 1e-6]; the clamp has zero slope.

constexpr double kProbClamp = 1e-6;

double clamp_prob(double p);

enum class LossKind { Discriminator, Encoder };

struct LossBatch {
    std::vector<EmbeddedPair> learner_pairs;       // discriminator loss
    std::vector<EmbeddedPair> expert_pairs;        // discriminator loss
    std::vector<Transition> learner_transitions;  // encoder loss
};

struct LossAndGrad {
    double loss = 0.0;
    Vec grad;
};

// -(mean_learner log D + mean_expert log(1 - D)); gradient w.r.t. discriminator parameters.
LossAndGrad discriminator_loss_grad(const DiscriminatorState& d, std::span<const EmbeddedPair> learner,
                                    std::span<const EmbeddedPair> expert);
// mean_learner log D(g(s), g(s')); gradient w.r.t. encoder parameters, D held fixed.
LossAndGrad encoder_loss_grad(const DiscriminatorState& d, const EncoderState& enc,
                              std::span<const Transition> learner);

// Gradient of the chosen loss: discriminator parameters for LossKind::Discriminator,
// encoder parameters for LossKind::Encoder.
Vec grad(LossKind kind, const DiscriminatorState& d, const EncoderState& enc, const LossBatch& batch);
double loss_value(LossKind kind, const DiscriminatorState& d, const EncoderState& enc, const LossBatch& batch);

// Max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
// with central differences of step eps.
double finite_diff_check(const std::function<double(const Vec&)>& loss, const Vec& at, const Vec& analytic,
                         double eps);
double finite_diff_check(LossKind kind, const DiscriminatorState& d, const EncoderState& enc, const LossBatch& batch,
                         double eps);

void adam_step(EncoderState& enc, const Vec& g, double lr);
void adam_step(DiscriminatorState& d, const Vec& g, double lr);

}  // namespace udil
