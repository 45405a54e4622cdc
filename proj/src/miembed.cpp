#include "udil/miembed.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <json.hpp>

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>

namespace udil {

using nlohmann::json;

std::vector<LabeledTransition> generate_pseudo_random_transitions(const DemoSet& demos, std::size_t count,
                                                                  std::uint64_t rng_seed) {
    if (demos.trajectories.empty()) throw ValidationError("cannot sample pseudo-random transitions from empty demos");
    if (count < 1) throw ValidationError("count must be >= 1");
    std::vector<const StateVector*> pool;
    pool.reserve(demos.total_states());
    for (const auto& tr : demos.trajectories)
        for (const auto& s : tr.states) pool.push_back(&s);
    if (pool.empty()) throw ValidationError("demos contain no states");

    Rng rng(rng_seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<LabeledTransition> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t a = pick(rng);
        const std::size_t b = pick(rng);
        out.push_back({{*pool[a], *pool[b]}, Label::PseudoRandom});
    }
    return out;
}

namespace {

struct Point {
    double a;
    double b;
    int label;  // 0 = expert, 1 = pseudo-random
};

double digamma(double x) { return boost::math::digamma(x); }

double jitter_offset(std::uint64_t a_bits, std::uint64_t b_bits, std::uint64_t ordinal, std::uint64_t coord) {
    std::uint64_t h = mix_seed(a_bits ^ 0x6a09e667f3bcc909ULL);
    h = mix_seed(h ^ b_bits);
    h = mix_seed(h ^ (ordinal * 2 + coord));
    const double unit = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
    return kMiJitter * (2.0 * unit - 1.0);
}

// Adds a deterministic offset to every point. Offsets depend on the point's
// value and its rank among identical values; identical values are ranked
// label `first_label` first, so the jittered set depends only on the multiset
// of (value, label) and on `first_label`.
std::vector<Point> jittered(const std::vector<Point>& pts, int first_label) {
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    auto key = [&](std::size_t i) {
        return std::make_tuple(std::bit_cast<std::uint64_t>(pts[i].a), std::bit_cast<std::uint64_t>(pts[i].b),
                               pts[i].label == first_label ? 0 : 1);
    };
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return key(x) < key(y); });

    std::vector<Point> out(pts.size());
    std::uint64_t ordinal = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        const auto& p = pts[order[r]];
        const bool same_value = r > 0 && std::get<0>(key(order[r - 1])) == std::get<0>(key(order[r])) &&
                                std::get<1>(key(order[r - 1])) == std::get<1>(key(order[r]));
        ordinal = same_value ? ordinal + 1 : 0;
        const auto a_bits = std::bit_cast<std::uint64_t>(p.a);
        const auto b_bits = std::bit_cast<std::uint64_t>(p.b);
        out[r] = {p.a + jitter_offset(a_bits, b_bits, ordinal, 0), p.b + jitter_offset(a_bits, b_bits, ordinal, 1),
                  p.label};
    }
    return out;
}

double knn_mi(const std::vector<Point>& pts, int k) {
    const std::size_t n = pts.size();
    std::size_t n_label[2] = {0, 0};
    for (const auto& p : pts) ++n_label[p.label];

    std::map<std::size_t, std::size_t> m_hist;
    std::vector<double> all(n);
    std::vector<double> same;
    same.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        same.clear();
        for (std::size_t j = 0; j < n; ++j) {
            const double d = std::max(std::abs(pts[i].a - pts[j].a), std::abs(pts[i].b - pts[j].b));
            all[j] = d;
            if (j != i && pts[j].label == pts[i].label) same.push_back(d);
        }
        std::nth_element(same.begin(), same.begin() + (k - 1), same.end());
        const double radius = same[k - 1];
        // Points strictly inside the radius, counting i itself.
        std::size_t m = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (all[j] < radius) ++m;
        ++m_hist[std::max<std::size_t>(m, 1)];
    }

    const double nd = static_cast<double>(n);
    double mean_label = 0.0;
    for (int y = 0; y < 2; ++y)
        if (n_label[y] > 0) mean_label += static_cast<double>(n_label[y]) * digamma(static_cast<double>(n_label[y]));
    mean_label /= nd;
    double mean_m = 0.0;
    for (const auto& [m, count] : m_hist) mean_m += static_cast<double>(count) * digamma(static_cast<double>(m));
    mean_m /= nd;
    return digamma(nd) - mean_label + digamma(static_cast<double>(k)) - mean_m;
}

}  // namespace

double estimate_dim_mi(const std::vector<LabeledTransition>& samples, int dim, int k_neighbors) {
    if (k_neighbors < 1) throw ValidationError("k_neighbors must be >= 1");
    std::vector<Point> pts;
    pts.reserve(samples.size());
    std::size_t counts[2] = {0, 0};
    for (const auto& s : samples) {
        const auto& t = s.transition;
        if (dim < 0 || dim >= t.from.size() || dim >= t.to.size())
            throw ValidationError("dimension " + std::to_string(dim) + " out of range");
        const int label = s.label == Label::Expert ? 0 : 1;
        ++counts[label];
        pts.push_back({t.from[dim], t.to[dim], label});
    }
    const auto needed = static_cast<std::size_t>(2 * k_neighbors);
    if (counts[0] < needed || counts[1] < needed)
        throw ValidationError("MI estimate needs at least " + std::to_string(needed) + " samples per label");

    // Averaging both tie orders keeps the estimate symmetric under label swap.
    const double est = 0.5 * (knn_mi(jittered(pts, 0), k_neighbors) + knn_mi(jittered(pts, 1), k_neighbors));
    return std::max(0.0, est);
}

MiReport build_mi_report(const DemoSet& demos, int frameskip, int k_neighbors, std::uint64_t rng_seed) {
    demos.validate();
    const auto expert = extract_transitions(demos, frameskip);
    auto samples = generate_pseudo_random_transitions(demos, expert.size(), rng_seed);
    samples.reserve(2 * expert.size());
    for (const auto& t : expert) samples.push_back({t, Label::Expert});

    MiReport report;
    report.sample_count = samples.size();
    report.k_neighbors = k_neighbors;
    for (int d = 0; d < demos.dim; ++d) report.per_dim_mi.push_back({d, estimate_dim_mi(samples, d, k_neighbors)});
    return report;
}

CumulativeCurve cumulative_mi_curve(const MiReport& report) {
    std::vector<DimMi> sorted = report.per_dim_mi;
    std::stable_sort(sorted.begin(), sorted.end(), [](const DimMi& a, const DimMi& b) {
        if (a.mi_nats != b.mi_nats) return a.mi_nats > b.mi_nats;
        return a.dim_index < b.dim_index;
    });
    CumulativeCurve c;
    double acc = 0.0;
    for (const auto& e : sorted) {
        acc += e.mi_nats;
        c.sorted_dims.push_back(e.dim_index);
        c.cumulative.push_back(acc);
    }
    return c;
}

Elbow find_elbow(const std::vector<double>& curve) {
    if (curve.size() < 3) throw ValidationError("elbow detection needs at least 3 points");
    const auto [lo_it, hi_it] = std::minmax_element(curve.begin(), curve.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    if (!(range > 0.0)) return {0, true};
    const double last = static_cast<double>(curve.size() - 1);
    Elbow best{0, false};
    double best_gain = -1.0;
    for (std::size_t j = 0; j < curve.size(); ++j) {
        const double gain = (curve[j] - lo) / range - static_cast<double>(j) / last;
        if (gain > best_gain) {
            best_gain = gain;
            best.index = j;
        }
    }
    best.degenerate = best_gain <= 1e-12;
    if (best.degenerate) best.index = 0;
    return best;
}

Elbow find_elbow(const CumulativeCurve& curve) { return find_elbow(curve.cumulative); }

EmbeddingSpec select_embedding(const MiReport& report) {
    if (report.per_dim_mi.empty()) throw ValidationError("empty MI report");
    const CumulativeCurve curve = cumulative_mi_curve(report);
    std::vector<double> anchored{0.0};
    anchored.insert(anchored.end(), curve.cumulative.begin(), curve.cumulative.end());

    EmbeddingSpec spec;
    spec.source_report = report;
    if (anchored.size() < 3) {
        spec.elbow_index = 0;
    } else {
        const Elbow e = find_elbow(anchored);
        spec.degenerate = e.degenerate;
        // Anchored position p keeps p dimensions; keep at least one.
        spec.elbow_index = e.degenerate ? 0 : static_cast<int>(std::max<std::size_t>(e.index, 1)) - 1;
    }
    spec.selected_dims.assign(curve.sorted_dims.begin(), curve.sorted_dims.begin() + spec.elbow_index + 1);
    return spec;
}

EmbeddingSpec explicit_embedding(std::vector<int> dims, const MiReport& report) {
    if (dims.empty()) throw ValidationError("explicit embedding needs at least one dimension");
    for (int d : dims)
        if (d < 0) throw ValidationError("embedding dims must be non-negative");
    EmbeddingSpec spec;
    spec.selected_dims = std::move(dims);
    spec.source_report = report;
    spec.elbow_index = static_cast<int>(spec.selected_dims.size()) - 1;
    return spec;
}

EmbeddingSpec identity_embedding(int dim) {
    std::vector<int> dims(dim);
    std::iota(dims.begin(), dims.end(), 0);
    return explicit_embedding(std::move(dims), {});
}

StateVector apply_embedding(const EmbeddingSpec& spec, const StateVector& s) {
    StateVector z(spec.embed_dim());
    for (int i = 0; i < spec.embed_dim(); ++i) {
        const int d = spec.selected_dims[i];
        if (d >= s.size())
            throw ValidationError("embedding selects dim " + std::to_string(d) + " but state has dim " +
                                  std::to_string(s.size()));
        z[i] = s[d];
    }
    return z;
}

std::string embedding_to_json(const EmbeddingSpec& spec) {
    json per_dim = json::array();
    for (const auto& e : spec.source_report.per_dim_mi) per_dim.push_back({e.dim_index, e.mi_nats});
    json j = {{"version", 1},
              {"selected_dims", spec.selected_dims},
              {"elbow_index", spec.elbow_index},
              {"degenerate", spec.degenerate},
              {"per_dim_mi", per_dim},
              {"sample_count", spec.source_report.sample_count},
              {"frameskip", spec.frameskip},
              {"k_neighbors", spec.source_report.k_neighbors},
              {"rng_seed", spec.rng_seed}};
    return j.dump(2) + "\n";
}

EmbeddingSpec embedding_from_json(const std::string& text) {
    EmbeddingSpec spec;
    try {
        const json j = json::parse(text);
        if (j.at("version").get<int>() != 1) throw ValidationError("unsupported embedding version");
        spec.selected_dims = j.at("selected_dims").get<std::vector<int>>();
        spec.elbow_index = j.at("elbow_index").get<int>();
        spec.degenerate = j.value("degenerate", false);
        for (const auto& e : j.at("per_dim_mi")) spec.source_report.per_dim_mi.push_back({e.at(0), e.at(1)});
        spec.source_report.sample_count = j.value("sample_count", std::size_t{0});
        spec.frameskip = j.at("frameskip").get<int>();
        spec.source_report.k_neighbors = j.at("k_neighbors").get<int>();
        spec.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed embedding file: ") + e.what());
    }
    if (spec.selected_dims.empty()) throw ValidationError("embedding selects no dimensions");
    return spec;
}

}  // namespace udil
