#include <doctest.h>

#include "udil/envsuite.hpp"
#include "udil/miembed.hpp"

#include <algorithm>
#include <cmath>
#include <map>

using namespace udil;

namespace {

StateVector sv1(double x) {
    StateVector s(1);
    s[0] = x;
    return s;
}

LabeledTransition lt(double a, double b, int y) {
    return {{sv1(a), sv1(b)}, y == 1 ? Label::Expert : Label::PseudoRandom};
}

// Plug-in MI between the binned 2-d feature (32 bins per axis over the
// sample bounding box) and the label.
double histogram_mi(const std::vector<LabeledTransition>& v, int dim, int bins = 32) {
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (const auto& s : v) {
        const double c[2] = {s.transition.from[dim], s.transition.to[dim]};
        for (int a = 0; a < 2; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
        }
    }
    auto bin = [&](double x, int a) {
        if (hi[a] <= lo[a]) return 0;
        return std::min(bins - 1, static_cast<int>((x - lo[a]) / (hi[a] - lo[a]) * bins));
    };
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> cell;
    double label[2] = {0, 0};
    for (const auto& s : v) {
        const int c = bin(s.transition.from[dim], 0) * bins + bin(s.transition.to[dim], 1);
        const int y = s.label == Label::Expert;
        joint[{c, y}] += 1;
        cell[c] += 1;
        label[y] += 1;
    }
    const double n = static_cast<double>(v.size());
    double mi = 0.0;
    for (const auto& [k, cnt] : joint) mi += cnt / n * std::log(cnt * n / (cell[k.first] * label[k.second]));
    return mi;
}

MiReport report_from(std::vector<double> mi) {
    MiReport r;
    for (std::size_t i = 0; i < mi.size(); ++i) r.per_dim_mi.push_back({static_cast<int>(i), mi[i]});
    return r;
}

}  // namespace

TEST_CASE("pseudo-random transitions: size, determinism, membership") {
    auto env = make_expert_line(2, 0);
    const DemoSet demos = gen_expert_demos(*env, 3, 30, 1);
    const auto expert = extract_transitions(demos, 15);
    const auto a = generate_pseudo_random_transitions(demos, expert.size(), 9);
    const auto b = generate_pseudo_random_transitions(demos, expert.size(), 9);
    REQUIRE(a.size() == expert.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].label == Label::PseudoRandom);
        CHECK(same_values(a[i].transition.from, b[i].transition.from));
        CHECK(same_values(a[i].transition.to, b[i].transition.to));
    }
    bool found_all = true;
    for (const auto& s : a) {
        bool found = false;
        for (const auto& tr : demos.trajectories)
            for (const auto& st : tr.states) found = found || same_values(st, s.transition.from);
        found_all = found_all && found;
    }
    CHECK(found_all);
    CHECK_THROWS_AS(generate_pseudo_random_transitions(DemoSet{}, 5, 0), ValidationError);
}

TEST_CASE("MI of an independent feature is near zero") {
    Rng rng(11);
    std::vector<LabeledTransition> v;
    for (int i = 0; i < 2000; ++i) v.push_back(lt(uniform01(rng), uniform01(rng), i % 2));
    const double mi = estimate_dim_mi(v, 0, 3);
    CHECK(mi >= 0.0);
    CHECK(mi <= 0.05);
}

TEST_CASE("MI of a label-copy feature matches ln 2 and the histogram oracle") {
    Rng rng(12);
    std::normal_distribution<double> eps(0.0, 0.01);
    std::vector<LabeledTransition> v;
    for (int i = 0; i < 2000; ++i) {
        const int y = i % 2;
        v.push_back(lt(y + eps(rng), y + eps(rng), y));
    }
    const double mi = estimate_dim_mi(v, 0, 3);
    CHECK(std::abs(mi - std::log(2.0)) < 0.1);
    CHECK(std::abs(mi - histogram_mi(v, 0)) < 0.1);
}

TEST_CASE("MI estimate is invariant to sample order and label naming") {
    Rng rng(13);
    std::vector<LabeledTransition> v;
    for (int i = 0; i < 400; ++i) {
        const int y = static_cast<int>(rng() % 2);
        v.push_back(lt(std::floor(uniform01(rng) * 3) + y, std::floor(uniform01(rng) * 2), y));
    }
    const double base = estimate_dim_mi(v, 0, 3);
    auto shuffled = v;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(estimate_dim_mi(shuffled, 0, 3) == base);
    auto swapped = v;
    for (auto& s : swapped) s.label = s.label == Label::Expert ? Label::PseudoRandom : Label::Expert;
    CHECK(estimate_dim_mi(swapped, 0, 3) == base);
}

TEST_CASE("MI estimator preconditions") {
    std::vector<LabeledTransition> v;
    for (int i = 0; i < 5; ++i) v.push_back(lt(i, i, 1));
    for (int i = 0; i < 10; ++i) v.push_back(lt(i, i, 0));
    CHECK_THROWS_AS(estimate_dim_mi(v, 0, 3), ValidationError);
    v.push_back(lt(9, 9, 1));
    CHECK_NOTHROW(estimate_dim_mi(v, 0, 3));
    CHECK_THROWS_AS(estimate_dim_mi(v, 1, 3), ValidationError);
    CHECK_THROWS_AS(estimate_dim_mi(v, 0, 0), ValidationError);
}

TEST_CASE("expert-line report ranks the position above every nuisance dim") {
    auto env = make_expert_line(3, 0);
    const DemoSet demos = gen_expert_demos(*env, 20, 100, 0);
    const MiReport report = build_mi_report(demos, 15, 3, 0);
    REQUIRE(report.per_dim_mi.size() == 5);
    CHECK(report.sample_count == 2 * 20 * (101 - 15));
    const double x = report.per_dim_mi[0].mi_nats;
    for (int d = 2; d < 5; ++d) CHECK(report.per_dim_mi[d].mi_nats < x);

    // Histogram oracle on the same samples agrees on which dim is most informative.
    const auto expert = extract_transitions(demos, 15);
    auto samples = generate_pseudo_random_transitions(demos, expert.size(), 0);
    for (const auto& t : expert) samples.push_back({t, Label::Expert});
    int best_hist = 0;
    for (int d = 1; d < 5; ++d)
        if (histogram_mi(samples, d) > histogram_mi(samples, best_hist)) best_hist = d;
    CHECK(best_hist == 0);
}

TEST_CASE("cumulative curve sorting and sums") {
    const auto c = cumulative_mi_curve(report_from({0.5, 0.1, 0.9}));
    CHECK(c.sorted_dims == std::vector<int>{2, 0, 1});
    REQUIRE(c.cumulative.size() == 3);
    CHECK(c.cumulative[0] == doctest::Approx(0.9));
    CHECK(c.cumulative[1] == doctest::Approx(1.4));
    CHECK(c.cumulative[2] == doctest::Approx(1.5));

    const auto z = cumulative_mi_curve(report_from({0, 0, 0, 0}));
    CHECK(z.sorted_dims == std::vector<int>{0, 1, 2, 3});
    for (double v : z.cumulative) CHECK(v == 0.0);

    const auto ties = cumulative_mi_curve(report_from({0.2, 0.3, 0.2}));
    CHECK(ties.sorted_dims == std::vector<int>{1, 0, 2});
}

TEST_CASE("elbow matches a brute-force normalized difference") {
    const std::vector<double> curve{0.9, 0.99, 1.0, 1.005, 1.01};
    const Elbow e = find_elbow(curve);
    CHECK(e.index == 1);
    CHECK_FALSE(e.degenerate);

    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> mi(3 + rng() % 6);
        for (auto& v : mi) v = uniform01(rng);
        const auto c = cumulative_mi_curve(report_from(mi));
        const auto& y = c.cumulative;
        const double lo = *std::min_element(y.begin(), y.end());
        const double hi = *std::max_element(y.begin(), y.end());
        std::size_t best = 0;
        double best_gain = -1e300;
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double gain = (y[j] - lo) / (hi - lo) - static_cast<double>(j) / (y.size() - 1);
            if (gain > best_gain + 1e-15) {
                best_gain = gain;
                best = j;
            }
        }
        CHECK(find_elbow(c).index == best);
    }
}

TEST_CASE("elbow degenerate cases") {
    const Elbow lin = find_elbow(std::vector<double>{1.0, 2.0, 3.0, 4.0});
    CHECK(lin.index == 0);
    CHECK(lin.degenerate);
    const Elbow flat = find_elbow(std::vector<double>{2.0, 2.0, 2.0});
    CHECK(flat.index == 0);
    CHECK(flat.degenerate);
    CHECK_THROWS_AS(find_elbow(std::vector<double>{1.0, 2.0}), ValidationError);
}

TEST_CASE("select_embedding keeps the dims up to the anchored elbow") {
    // Cumulative 0.9, 0.99, 1.0, 1.005, 1.01 with a zero anchor: the largest gain is the first dim.
    const EmbeddingSpec one = select_embedding(report_from({0.9, 0.09, 0.01, 0.005, 0.005}));
    CHECK(one.selected_dims == std::vector<int>{0});
    CHECK_FALSE(one.degenerate);

    const EmbeddingSpec two = select_embedding(report_from({0.02, 0.5, 0.01, 0.5, 0.01}));
    CHECK(two.selected_dims == std::vector<int>{1, 3});

    const EmbeddingSpec flat = select_embedding(report_from({0, 0, 0}));
    CHECK(flat.selected_dims.size() == 1);
    CHECK(flat.degenerate);
}

TEST_CASE("expert-line selection excludes nuisance dims for seeds 0-5") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto env = make_expert_line(3, seed);
        const DemoSet demos = gen_expert_demos(*env, 20, 100, seed);
        const EmbeddingSpec f = select_embedding(build_mi_report(demos, 15, 3, seed));
        CAPTURE(seed);
        CHECK(std::find(f.selected_dims.begin(), f.selected_dims.end(), 0) != f.selected_dims.end());
        for (int d : f.selected_dims) CHECK(d < 2);
    }
}

TEST_CASE("apply_embedding projects") {
    const EmbeddingSpec f = explicit_embedding({0, 2}, {});
    StateVector s(3);
    s << 1, 2, 3;
    const StateVector z = apply_embedding(f, s);
    REQUIRE(z.size() == 2);
    CHECK(z[0] == 1.0);
    CHECK(z[1] == 3.0);
    CHECK(same_values(apply_embedding(identity_embedding(3), s), s));
    CHECK_THROWS_AS(apply_embedding(explicit_embedding({5}, {}), s), ValidationError);
    CHECK_THROWS_AS(explicit_embedding({}, {}), ValidationError);
}

TEST_CASE("embedding json round-trip") {
    EmbeddingSpec f = select_embedding(report_from({0.3, 0.01, 0.25}));
    f.frameskip = 7;
    f.rng_seed = 99;
    const std::string text = embedding_to_json(f);
    const EmbeddingSpec g = embedding_from_json(text);
    CHECK(g.selected_dims == f.selected_dims);
    CHECK(g.elbow_index == f.elbow_index);
    CHECK(g.frameskip == 7);
    CHECK(g.rng_seed == 99);
    REQUIRE(g.source_report.per_dim_mi.size() == 3);
    CHECK(g.source_report.per_dim_mi[2].mi_nats == 0.25);
    CHECK(embedding_to_json(g) == text);
    CHECK_THROWS_AS(embedding_from_json("{"), ValidationError);
    CHECK_THROWS_AS(embedding_from_json("{\"version\":1}"), ValidationError);
}
