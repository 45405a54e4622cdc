#include "udil/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace udil {

void adam_update(Vec& params, AdamMoments& moments, const Vec& grad, double lr) {
    if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
    if (grad.size() != params.size()) throw ValidationError("gradient size does not match parameters");
    if (!grad.allFinite()) throw RuntimeAbort("non-finite gradient in optimizer step");
    if (moments.first.size() != params.size()) {
        moments.first = Vec::Zero(params.size());
        moments.second = Vec::Zero(params.size());
    }
    ++moments.step_count;
    moments.first = kAdamBeta1 * moments.first + (1.0 - kAdamBeta1) * grad;
    moments.second = kAdamBeta2 * moments.second + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(moments.step_count));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(moments.step_count));
    for (Index i = 0; i < params.size(); ++i) {
        const double m_hat = moments.first[i] / c1;
        const double v_hat = moments.second[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
    }
}

// --- encoder ----------------------------------------------------------------

double bounded_from_raw(double raw) { return 2.0 * kEncoderBound * (sigmoid(raw) - 0.5); }

double raw_from_bounded(double effective) {
    if (!(std::abs(effective) < kEncoderBound)) throw ValidationError("effective encoder parameter must lie in (-5, 5)");
    const double p = effective / (2.0 * kEncoderBound) + 0.5;
    return std::log(p / (1.0 - p));
}

namespace {

double bound_slope(double raw) {
    const double s = sigmoid(raw);
    return 2.0 * kEncoderBound * s * (1.0 - s);
}

}  // namespace

Mat EncoderState::effective_weights() const {
    Mat w = raw_weights.unaryExpr([](double r) { return bounded_from_raw(r); });
    if (config.diagonal) {
        for (Index i = 0; i < w.rows(); ++i)
            for (Index j = 0; j < w.cols(); ++j)
                if (i != j) w(i, j) = 0.0;
    }
    return w;
}

Vec EncoderState::effective_bias() const {
    if (!config.use_bias) return Vec::Zero(config.m_out);
    return raw_bias.unaryExpr([](double r) { return bounded_from_raw(r); });
}

Index EncoderState::param_count() const { return raw_weights.size() + (config.use_bias ? raw_bias.size() : 0); }

Vec EncoderState::flat() const {
    Vec p(param_count());
    p.head(raw_weights.size()) = raw_weights.reshaped();
    if (config.use_bias) p.tail(raw_bias.size()) = raw_bias;
    return p;
}

void EncoderState::set_flat(const Vec& p) {
    if (p.size() != param_count()) throw ValidationError("encoder parameter vector has wrong size");
    raw_weights.reshaped() = p.head(raw_weights.size());
    if (config.use_bias) raw_bias = p.tail(raw_bias.size());
}

EncoderState make_encoder(const EncoderConfig& config) {
    if (config.n_in < 1 || config.m_out < 1) throw ValidationError("encoder dims must be positive");
    EncoderState enc;
    enc.config = config;
    Rng rng(config.seed);
    std::uniform_real_distribution<double> init(-0.1, 0.1);
    enc.raw_weights = Mat(config.m_out, config.n_in);
    for (Index j = 0; j < enc.raw_weights.cols(); ++j)
        for (Index i = 0; i < enc.raw_weights.rows(); ++i) enc.raw_weights(i, j) = init(rng);
    enc.raw_bias = Vec::Zero(config.m_out);
    if (config.use_bias)
        for (Index i = 0; i < enc.raw_bias.size(); ++i) enc.raw_bias[i] = init(rng);
    return enc;
}

EncoderState make_encoder_from_effective(const Mat& weights, const Vec& bias, bool use_bias) {
    EncoderState enc;
    enc.config.n_in = static_cast<int>(weights.cols());
    enc.config.m_out = static_cast<int>(weights.rows());
    enc.config.use_bias = use_bias;
    enc.raw_weights = weights.unaryExpr([](double w) { return raw_from_bounded(w); });
    enc.raw_bias = Vec::Zero(weights.rows());
    if (use_bias) {
        if (bias.size() != weights.rows()) throw ValidationError("bias size does not match encoder output");
        enc.raw_bias = bias.unaryExpr([](double b) { return raw_from_bounded(b); });
    }
    return enc;
}

Vec encoder_apply(const EncoderState& enc, const StateVector& s) {
    if (s.size() != enc.config.n_in)
        throw ValidationError("encoder expects input of dim " + std::to_string(enc.config.n_in) + ", got " +
                              std::to_string(s.size()));
    Vec z = enc.effective_weights() * s;
    if (enc.config.use_bias) z += enc.effective_bias();
    return z;
}

EmbeddedPair encoder_apply_pair(const EncoderState& enc, const Transition& t) {
    return {encoder_apply(enc, t.from), encoder_apply(enc, t.to)};
}

// --- discriminator -------------------------------------------------------------

Index DiscriminatorState::param_count() const {
    Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

Vec DiscriminatorState::flat() const {
    Vec p(param_count());
    Index off = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        p.segment(off, weights[l].size()) = weights[l].reshaped();
        off += weights[l].size();
        p.segment(off, biases[l].size()) = biases[l];
        off += biases[l].size();
    }
    return p;
}

void DiscriminatorState::set_flat(const Vec& p) {
    if (p.size() != param_count()) throw ValidationError("discriminator parameter vector has wrong size");
    Index off = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l].reshaped() = p.segment(off, weights[l].size());
        off += weights[l].size();
        biases[l] = p.segment(off, biases[l].size());
        off += biases[l].size();
    }
}

DiscriminatorState make_discriminator(const DiscriminatorConfig& config) {
    if (config.embed_dim < 1) throw ValidationError("discriminator embed_dim must be positive");
    DiscriminatorState d;
    d.config = config;
    Rng rng(config.seed);
    std::vector<int> widths{config.input_width()};
    for (int h : config.hidden) {
        if (h < 1) throw ValidationError("hidden widths must be positive");
        widths.push_back(h);
    }
    widths.push_back(1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
        std::uniform_real_distribution<double> init(-bound, bound);
        Mat w(widths[l + 1], widths[l]);
        for (Index j = 0; j < w.cols(); ++j)
            for (Index i = 0; i < w.rows(); ++i) w(i, j) = init(rng);
        Vec b(widths[l + 1]);
        for (Index i = 0; i < b.size(); ++i) b[i] = init(rng);
        d.weights.push_back(std::move(w));
        d.biases.push_back(std::move(b));
    }
    return d;
}

Mat disc_inputs(const DiscriminatorConfig& config, std::span<const EmbeddedPair> pairs) {
    const int m = config.embed_dim;
    Mat x(static_cast<Index>(pairs.size()), config.input_width());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        if (p.z.size() != m || p.z_next.size() != m)
            throw ValidationError("discriminator expects embedded dim " + std::to_string(m));
        x.row(static_cast<Index>(i)).head(m) = p.z.transpose();
        if (config.pair_input) x.row(static_cast<Index>(i)).tail(m) = p.z_next.transpose();
    }
    return x;
}

namespace {

struct ForwardTrace {
    std::vector<Mat> activations;  // activations[0] = input, then each hidden layer
    Vec logits;
};

ForwardTrace forward_trace(const DiscriminatorState& d, const Mat& inputs) {
    if (inputs.cols() != d.config.input_width())
        throw ValidationError("discriminator input width " + std::to_string(inputs.cols()) + ", expected " +
                              std::to_string(d.config.input_width()));
    ForwardTrace tr;
    tr.activations.push_back(inputs);
    const std::size_t n_layers = d.weights.size();
    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
        Mat pre = tr.activations.back() * d.weights[l].transpose();
        pre.rowwise() += d.biases[l].transpose();
        tr.activations.push_back(pre.array().tanh().matrix());
    }
    Mat out = tr.activations.back() * d.weights.back().transpose();
    out.rowwise() += d.biases.back().transpose();
    tr.logits = out.col(0);
    for (Index i = 0; i < tr.logits.size(); ++i)
        if (!std::isfinite(tr.logits[i])) throw RuntimeAbort("non-finite discriminator logit at output layer");
    return tr;
}

// Backpropagates dLoss/dlogit; fills the parameter gradient and returns dLoss/dinput.
Mat backward(const DiscriminatorState& d, const ForwardTrace& tr, const Vec& dlogit, Vec* param_grad) {
    const std::size_t n_layers = d.weights.size();
    std::vector<Mat> dw(n_layers);
    std::vector<Vec> db(n_layers);
    Mat delta = dlogit;  // (B x 1)
    for (std::size_t l = n_layers; l-- > 0;) {
        const Mat& in = tr.activations[l];
        dw[l] = delta.transpose() * in;
        db[l] = delta.colwise().sum().transpose();
        Mat din = delta * d.weights[l];
        if (l > 0) din.array() *= (1.0 - in.array().square());
        delta = std::move(din);
    }
    if (param_grad) {
        Vec g(d.param_count());
        Index off = 0;
        for (std::size_t l = 0; l < n_layers; ++l) {
            g.segment(off, dw[l].size()) = dw[l].reshaped();
            off += dw[l].size();
            g.segment(off, db[l].size()) = db[l];
            off += db[l].size();
        }
        for (Index i = 0; i < g.size(); ++i)
            if (!std::isfinite(g[i])) throw RuntimeAbort("non-finite discriminator gradient");
        *param_grad = std::move(g);
    }
    return delta;
}

bool clamped(double p) { return p < kProbClamp || p > 1.0 - kProbClamp; }

}  // namespace

Vec disc_forward_batch(const DiscriminatorState& d, const Mat& inputs) { return forward_trace(d, inputs).logits; }

double disc_forward(const DiscriminatorState& d, const Vec& z, const Vec& z_next) {
    const EmbeddedPair p{z, z_next};
    return disc_forward_batch(d, disc_inputs(d.config, std::span<const EmbeddedPair>(&p, 1)))[0];
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

LossAndGrad discriminator_loss_grad(const DiscriminatorState& d, std::span<const EmbeddedPair> learner,
                                    std::span<const EmbeddedPair> expert) {
    if (learner.empty() || expert.empty()) throw ValidationError("discriminator loss needs nonempty batches");
    const Index nl = static_cast<Index>(learner.size());
    const Index ne = static_cast<Index>(expert.size());
    Mat x(nl + ne, d.config.input_width());
    x.topRows(nl) = disc_inputs(d.config, learner);
    x.bottomRows(ne) = disc_inputs(d.config, expert);
    const ForwardTrace tr = forward_trace(d, x);

    double sum_learner = 0.0;
    double sum_expert = 0.0;
    Vec dlogit(nl + ne);
    for (Index i = 0; i < nl; ++i) {
        const double p = sigmoid(tr.logits[i]);
        sum_learner += std::log(clamp_prob(p));
        dlogit[i] = clamped(p) ? 0.0 : -(1.0 - p) / static_cast<double>(nl);
    }
    for (Index j = 0; j < ne; ++j) {
        const double p = sigmoid(tr.logits[nl + j]);
        sum_expert += std::log(1.0 - clamp_prob(p));
        dlogit[nl + j] = clamped(p) ? 0.0 : p / static_cast<double>(ne);
    }
    LossAndGrad out;
    out.loss = -(sum_learner / static_cast<double>(nl) + sum_expert / static_cast<double>(ne));
    if (!std::isfinite(out.loss)) throw RuntimeAbort("non-finite discriminator loss");
    backward(d, tr, dlogit, &out.grad);
    return out;
}

LossAndGrad encoder_loss_grad(const DiscriminatorState& d, const EncoderState& enc,
                              std::span<const Transition> learner) {
    if (learner.empty()) throw ValidationError("encoder loss needs a nonempty batch");
    const Index n = static_cast<Index>(learner.size());
    const int m = enc.config.m_out;
    if (m != d.config.embed_dim) throw ValidationError("encoder output dim does not match discriminator");

    std::vector<EmbeddedPair> pairs;
    pairs.reserve(learner.size());
    for (const auto& t : learner) pairs.push_back(encoder_apply_pair(enc, t));
    const ForwardTrace tr = forward_trace(d, disc_inputs(d.config, pairs));

    double sum = 0.0;
    Vec dlogit(n);
    for (Index i = 0; i < n; ++i) {
        const double p = sigmoid(tr.logits[i]);
        sum += std::log(clamp_prob(p));
        dlogit[i] = clamped(p) ? 0.0 : (1.0 - p) / static_cast<double>(n);
    }
    const Mat dinput = backward(d, tr, dlogit, nullptr);

    // z = W s + b at both time steps; accumulate through the shared map.
    Mat dw = Mat::Zero(m, enc.config.n_in);
    Vec db = Vec::Zero(m);
    for (Index i = 0; i < n; ++i) {
        const Vec dz = dinput.row(i).head(m).transpose();
        dw += dz * learner[i].from.transpose();
        db += dz;
        if (d.config.pair_input) {
            const Vec dz_next = dinput.row(i).tail(m).transpose();
            dw += dz_next * learner[i].to.transpose();
            db += dz_next;
        }
    }
    Mat dw_raw = dw.cwiseProduct(enc.raw_weights.unaryExpr([](double r) { return bound_slope(r); }));
    if (enc.config.diagonal) {
        for (Index i = 0; i < dw_raw.rows(); ++i)
            for (Index j = 0; j < dw_raw.cols(); ++j)
                if (i != j) dw_raw(i, j) = 0.0;
    }

    LossAndGrad out;
    out.loss = sum / static_cast<double>(n);
    if (!std::isfinite(out.loss)) throw RuntimeAbort("non-finite encoder loss");
    out.grad = Vec(enc.param_count());
    out.grad.head(dw_raw.size()) = dw_raw.reshaped();
    if (enc.config.use_bias)
        out.grad.tail(m) = db.cwiseProduct(enc.raw_bias.unaryExpr([](double r) { return bound_slope(r); }));
    if (!out.grad.allFinite()) throw RuntimeAbort("non-finite encoder gradient");
    return out;
}

Vec grad(LossKind kind, const DiscriminatorState& d, const EncoderState& enc, const LossBatch& batch) {
    if (kind == LossKind::Discriminator) return discriminator_loss_grad(d, batch.learner_pairs, batch.expert_pairs).grad;
    return encoder_loss_grad(d, enc, batch.learner_transitions).grad;
}

double loss_value(LossKind kind, const DiscriminatorState& d, const EncoderState& enc, const LossBatch& batch) {
    if (kind == LossKind::Discriminator) return discriminator_loss_grad(d, batch.learner_pairs, batch.expert_pairs).loss;
    return encoder_loss_grad(d, enc, batch.learner_transitions).loss;
}

double finite_diff_check(const std::function<double(const Vec&)>& loss, const Vec& at, const Vec& analytic,
                         double eps) {
    if (!(eps > 0.0)) throw ValidationError("finite-difference step must be positive");
    if (analytic.size() != at.size()) throw ValidationError("gradient size does not match parameters");
    double worst = 0.0;
    Vec x = at;
    for (Index i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + eps;
        const double up = loss(x);
        x[i] = orig - eps;
        const double down = loss(x);
        x[i] = orig;
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

double finite_diff_check(LossKind kind, const DiscriminatorState& d, const EncoderState& enc, const LossBatch& batch,
                         double eps) {
    const Vec analytic = grad(kind, d, enc, batch);
    if (kind == LossKind::Discriminator) {
        DiscriminatorState probe = d;
        return finite_diff_check(
            [&](const Vec& p) {
                probe.set_flat(p);
                return loss_value(kind, probe, enc, batch);
            },
            d.flat(), analytic, eps);
    }
    EncoderState probe = enc;
    return finite_diff_check(
        [&](const Vec& p) {
            probe.set_flat(p);
            return loss_value(kind, d, probe, batch);
        },
        enc.flat(), analytic, eps);
}

void adam_step(EncoderState& enc, const Vec& g, double lr) {
    Vec p = enc.flat();
    adam_update(p, enc.moments, g, lr);
    enc.set_flat(p);
}

void adam_step(DiscriminatorState& d, const Vec& g, double lr) {
    Vec p = d.flat();
    adam_update(p, d.moments, g, lr);
    d.set_flat(p);
}

}  // namespace udil
