#include "udil/cli.hpp"

#include "udil/miembed.hpp"
#include "udil/trajstore.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace udil {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw ValidationError("write failed for '" + path.string() + "'");
}

json vec_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vec vec_from(const json& j) {
    const auto values = j.get<std::vector<double>>();
    Vec v(static_cast<Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Index>(i)] = values[i];
    return v;
}

json mat_json(const Mat& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
    return rows;
}

Mat mat_from(const json& j, Index cols) {
    Mat m(static_cast<Index>(j.size()), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        const Vec row = vec_from(j[r]);
        if (row.size() != cols) throw ValidationError("checkpoint matrix row has wrong length");
        m.row(static_cast<Index>(r)) = row.transpose();
    }
    return m;
}

json moments_json(const AdamMoments& m) {
    return {{"first", vec_json(m.first)}, {"second", vec_json(m.second)}, {"step_count", m.step_count}};
}

AdamMoments moments_from(const json& j) {
    return {vec_from(j.at("first")), vec_from(j.at("second")), j.at("step_count").get<std::int64_t>()};
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(what + ": " + e.what());
    }
}

template <class F>
auto checked(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ValidationError(what + ": " + e.what());
    }
}

}  // namespace

std::unique_ptr<LineEnv> make_env_by_name(const std::string& name, std::uint64_t seed, int horizon,
                                          int nuisance_dims) {
    if (name == "expert-line") {
        if (nuisance_dims < 0) throw ValidationError("nuisance dims must be >= 0");
        return make_expert_line(nuisance_dims, seed, horizon);
    }
    return make_learner_line(parse_learner_variant(name), seed, horizon);
}

std::string encoder_to_json(const EncoderState& enc) {
    const auto& c = enc.config;
    json j = {{"kind", "encoder"},
              {"n_in", c.n_in},
              {"m_out", c.m_out},
              {"use_bias", c.use_bias},
              {"diagonal", c.diagonal},
              {"seed", c.seed},
              {"raw_weights", mat_json(enc.raw_weights)},
              {"raw_bias", vec_json(enc.raw_bias)},
              {"moments", moments_json(enc.moments)}};
    return j.dump(1) + "\n";
}

EncoderState encoder_from_json(const std::string& text) {
    const json j = parse_json(text, "encoder checkpoint");
    return checked("encoder checkpoint", [&] {
        if (j.at("kind") != "encoder") throw ValidationError("encoder checkpoint: wrong kind");
        EncoderState enc;
        enc.config.n_in = j.at("n_in").get<int>();
        enc.config.m_out = j.at("m_out").get<int>();
        enc.config.use_bias = j.at("use_bias").get<bool>();
        enc.config.diagonal = j.at("diagonal").get<bool>();
        enc.config.seed = j.at("seed").get<std::uint64_t>();
        enc.raw_weights = mat_from(j.at("raw_weights"), enc.config.n_in);
        enc.raw_bias = vec_from(j.at("raw_bias"));
        enc.moments = moments_from(j.at("moments"));
        if (enc.raw_weights.rows() != enc.config.m_out) throw ValidationError("encoder checkpoint: bad weight shape");
        return enc;
    });
}

std::string discriminator_to_json(const DiscriminatorState& d) {
    json layers = json::array();
    for (std::size_t l = 0; l < d.weights.size(); ++l)
        layers.push_back({{"weights", mat_json(d.weights[l])}, {"biases", vec_json(d.biases[l])}});
    json j = {{"kind", "discriminator"},
              {"embed_dim", d.config.embed_dim},
              {"hidden", d.config.hidden},
              {"pair_input", d.config.pair_input},
              {"seed", d.config.seed},
              {"layers", layers},
              {"moments", moments_json(d.moments)}};
    return j.dump(1) + "\n";
}

DiscriminatorState discriminator_from_json(const std::string& text) {
    const json j = parse_json(text, "discriminator checkpoint");
    return checked("discriminator checkpoint", [&] {
        if (j.at("kind") != "discriminator") throw ValidationError("discriminator checkpoint: wrong kind");
        DiscriminatorState d;
        d.config.embed_dim = j.at("embed_dim").get<int>();
        d.config.hidden = j.at("hidden").get<std::vector<int>>();
        d.config.pair_input = j.at("pair_input").get<bool>();
        d.config.seed = j.at("seed").get<std::uint64_t>();
        Index fan_in = d.config.input_width();
        for (const auto& layer : j.at("layers")) {
            d.weights.push_back(mat_from(layer.at("weights"), fan_in));
            d.biases.push_back(vec_from(layer.at("biases")));
            if (d.biases.back().size() != d.weights.back().rows())
                throw ValidationError("discriminator checkpoint: bias length mismatch");
            fan_in = d.weights.back().rows();
        }
        if (d.weights.size() != d.config.hidden.size() + 1 || fan_in != 1)
            throw ValidationError("discriminator checkpoint: layer shapes do not match config");
        d.moments = moments_from(j.at("moments"));
        return d;
    });
}

std::string policy_to_json(const PolicyParams& p) {
    json j = {{"kind", "policy"},
              {"state_dim", p.state_dim()},
              {"gain", mat_json(p.gain)},
              {"bias", vec_json(p.bias)},
              {"log_std", vec_json(p.log_std)}};
    return j.dump(1) + "\n";
}

PolicyParams policy_from_json(const std::string& text) {
    const json j = parse_json(text, "policy checkpoint");
    return checked("policy checkpoint", [&] {
        if (j.at("kind") != "policy") throw ValidationError("policy checkpoint: wrong kind");
        PolicyParams p;
        p.gain = mat_from(j.at("gain"), j.at("state_dim").get<int>());
        p.bias = vec_from(j.at("bias"));
        p.log_std = vec_from(j.at("log_std"));
        p.validate();
        return p;
    });
}

namespace {

const char* kMetricsHeader = "iter,disc_loss,encoder_loss,mean_synth_reward,eval_true_reward,js_estimate";

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, int line) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ParseError("bad number '" + s + "'", line);
    return v;
}

}  // namespace

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out = std::string(kMetricsHeader) + "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.iter) + "," + fmt_double(r.disc_loss) + "," + fmt_double(r.encoder_loss) + "," +
               fmt_double(r.mean_synth_reward) + "," + fmt_double(r.eval_true_reward) + "," +
               fmt_double(r.js_estimate) + "\n";
    }
    return out;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line) || line != kMetricsHeader) throw ParseError("missing metrics header", 1);
    ++line_no;
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 6) throw ParseError("expected 6 fields, got " + std::to_string(f.size()), line_no);
        MetricsRow r;
        r.iter = static_cast<int>(parse_double(f[0], line_no));
        r.disc_loss = parse_double(f[1], line_no);
        r.encoder_loss = parse_double(f[2], line_no);
        r.mean_synth_reward = parse_double(f[3], line_no);
        r.eval_true_reward = parse_double(f[4], line_no);
        r.js_estimate = parse_double(f[5], line_no);
        rows.push_back(r);
    }
    return rows;
}

namespace {

std::pair<double, double> mean_stderr(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double n = static_cast<double>(v.size());
    return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

}  // namespace

std::string aggregate_metrics_csv(const std::vector<std::vector<MetricsRow>>& runs) {
    if (runs.empty()) throw ValidationError("no runs to aggregate");
    for (const auto& r : runs)
        if (r.size() != runs.front().size()) throw ValidationError("runs have different iteration counts");
    const char* names[] = {"disc_loss", "encoder_loss", "mean_synth_reward", "eval_true_reward", "js_estimate"};
    std::string out = "iter,n_runs";
    for (const char* n : names) out += std::string(",") + n + "_mean," + n + "_stderr";
    out += "\n";
    for (std::size_t i = 0; i < runs.front().size(); ++i) {
        const int iter = runs.front()[i].iter;
        std::vector<std::vector<double>> cols(5);
        for (const auto& r : runs) {
            if (r[i].iter != iter) throw ValidationError("runs disagree on iteration numbering");
            cols[0].push_back(r[i].disc_loss);
            cols[1].push_back(r[i].encoder_loss);
            cols[2].push_back(r[i].mean_synth_reward);
            cols[3].push_back(r[i].eval_true_reward);
            cols[4].push_back(r[i].js_estimate);
        }
        out += std::to_string(iter) + "," + std::to_string(runs.size());
        for (const auto& c : cols) {
            const auto [m, se] = mean_stderr(c);
            out += "," + fmt_double(m) + "," + fmt_double(se);
        }
        out += "\n";
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (const auto& item : split(text, ',')) {
        if (item.empty()) throw ValidationError("empty entry in list '" + text + "'");
        try {
            std::size_t pos = 0;
            const auto dash = item.find('-', 1);
            if (dash == std::string::npos) {
                out.push_back(std::stoi(item, &pos));
                if (pos != item.size()) throw std::invalid_argument(item);
            } else {
                const int lo = std::stoi(item.substr(0, dash), &pos);
                if (pos != dash) throw std::invalid_argument(item);
                const std::string rest = item.substr(dash + 1);
                const int hi = std::stoi(rest, &pos);
                if (pos != rest.size() || hi < lo) throw std::invalid_argument(item);
                for (int v = lo; v <= hi; ++v) out.push_back(v);
            }
        } catch (const std::logic_error&) {
            throw ValidationError("bad integer list entry '" + item + "'");
        }
    }
    if (out.empty()) throw ValidationError("integer list is empty");
    return out;
}

fs::path default_output_root() {
    const char* env = std::getenv("UDIL_OUTPUT_DIR");
    return env && *env ? fs::path(env) : fs::path("udil_out");
}

namespace {

struct GenDemosArgs {
    std::string env = "expert-line";
    int nuisance = 3;
    int n = 20;
    int horizon = 100;
    std::uint64_t seed = 0;
    std::string out;
};

struct SelectArgs {
    std::string demos;
    std::string out;
    int frameskip = kDefaultFrameskip;
    int k = kDefaultKNeighbors;
    std::uint64_t seed = 0;
    std::string override_dims;
};

struct TrainArgs {
    std::string demos;
    std::string embedding;
    std::string env = "negated-scaled";
    int nuisance = 3;
    std::string seeds = "0-5";
    std::string out_dir;
    std::string reward_mode = "adversarial";
    std::string ablation = "none";
    int embedding_dim = 0;
    TrainConfig cfg;
};

struct EvalArgs {
    std::string run_dir;
    std::string env;
    int nuisance = -1;
    int horizon = 0;
    std::string seeds;
    int episodes = 10;
    std::uint64_t eval_seed = 0;
    std::string policy = "trained";
    std::string out;
};

struct ReportArgs {
    std::string run_dir;
    std::string seeds;
    std::string out;
};

fs::path or_default(const std::string& flag, const fs::path& fallback) {
    return flag.empty() ? fallback : fs::path(flag);
}

fs::path seed_dir(const fs::path& run_dir, int seed) { return run_dir / ("seed_" + std::to_string(seed)); }

void cmd_gen_demos(const GenDemosArgs& a, std::ostream& out) {
    auto env = make_env_by_name(a.env, a.seed, a.horizon, a.nuisance);
    const DemoSet demos = gen_expert_demos(*env, a.n, a.horizon, a.seed);
    const fs::path path = or_default(a.out, default_output_root() / "demos.jsonl");
    write_text(path, format_demo_set(demos));

    std::vector<double> progress;
    for (const auto& tr : demos.trajectories)
        progress.push_back(env->canonical_progress(tr.states.back()) - env->canonical_progress(tr.states.front()));
    const auto [m, se] = mean_stderr(progress);
    out << "wrote " << path.string() << "\n"
        << "trajectories " << demos.trajectories.size() << ", horizon " << a.horizon << ", state dim " << demos.dim
        << "\n"
        << "final progress mean " << fmt_short(m) << " stderr " << fmt_short(se) << "\n";
}

void cmd_select_dims(const SelectArgs& a, std::ostream& out) {
    const DemoSet demos = read_demo_set(a.demos);
    const MiReport report = build_mi_report(demos, a.frameskip, a.k, a.seed);
    EmbeddingSpec spec;
    if (a.override_dims.empty()) {
        spec = select_embedding(report);
    } else if (a.override_dims == "all") {
        std::vector<int> all(demos.dim);
        for (int i = 0; i < demos.dim; ++i) all[i] = i;
        spec = explicit_embedding(all, report);
    } else {
        spec = explicit_embedding(parse_int_list(a.override_dims), report);
    }
    spec.frameskip = a.frameskip;
    spec.rng_seed = a.seed;
    const fs::path path = or_default(a.out, default_output_root() / "embedding.json");
    write_text(path, embedding_to_json(spec));

    out << "dim,mi_nats\n";
    for (const auto& d : report.per_dim_mi) out << d.dim_index << "," << fmt_short(d.mi_nats) << "\n";
    out << "elbow index " << spec.elbow_index << (spec.degenerate ? " (degenerate)" : "") << "\n";
    out << "selected dims";
    for (int d : spec.selected_dims) out << " " << d;
    out << "\nwrote " << path.string() << "\n";
}

void cmd_train(TrainArgs a, std::ostream& out) {
    const DemoSet demos = read_demo_set(a.demos);
    const EmbeddingSpec f = embedding_from_json(read_text(a.embedding));
    TrainConfig cfg = a.cfg;
    cfg.reward_mode = parse_reward_mode(a.reward_mode);
    if (a.ablation == "no-pair") {
        cfg.pair_input = false;
    } else if (a.ablation != "none") {
        throw ValidationError("unknown ablation '" + a.ablation + "'");
    }
    if (a.embedding_dim > 0) cfg.embedding_dim_override = a.embedding_dim;
    const std::vector<int> seeds = parse_int_list(a.seeds);
    cfg.validate();

    const fs::path run_dir = or_default(a.out_dir, default_output_root() / "run");
    json run = {{"env", a.env}, {"nuisance", a.nuisance}, {"horizon", cfg.horizon}, {"seeds", seeds}};
    write_text(run_dir / "run.json", run.dump(1) + "\n");

    for (int seed : seeds) {
        auto env = make_env_by_name(a.env, static_cast<std::uint64_t>(seed), cfg.horizon, a.nuisance);
        cfg.rng_seed = static_cast<std::uint64_t>(seed);
        const TrainedArtifacts art = udil_train(*env, demos, f, cfg);
        const fs::path dir = seed_dir(run_dir, seed);
        write_text(dir / "metrics.csv", format_metrics_csv(art.metrics));
        write_text(dir / "encoder.json", encoder_to_json(art.encoder));
        write_text(dir / "discriminator.json", discriminator_to_json(art.discriminator));
        write_text(dir / "policy.json", policy_to_json(art.policy));
        out << "seed " << seed << ": " << art.metrics.size() << " iterations";
        if (!art.metrics.empty()) out << ", final eval progress " << fmt_short(art.metrics.back().eval_true_reward);
        out << "\n";
    }
    out << "wrote " << run_dir.string() << "\n";
}

json read_run_info(const fs::path& run_dir) {
    const fs::path p = run_dir / "run.json";
    if (!fs::exists(p)) return json::object();
    return parse_json(read_text(p), p.string());
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
    const fs::path run_dir = or_default(a.run_dir, default_output_root() / "run");
    const json info = read_run_info(run_dir);
    const std::string env_name = !a.env.empty() ? a.env : info.value("env", std::string());
    if (env_name.empty()) throw ValidationError("no --env given and no run.json in " + run_dir.string());
    const int nuisance = a.nuisance >= 0 ? a.nuisance : info.value("nuisance", 3);
    const int horizon = a.horizon > 0 ? a.horizon : info.value("horizon", 100);
    std::vector<int> seeds;
    if (!a.seeds.empty()) {
        seeds = parse_int_list(a.seeds);
    } else if (info.contains("seeds")) {
        seeds = info.at("seeds").get<std::vector<int>>();
    } else {
        seeds = parse_int_list("0-5");
    }
    if (a.policy != "trained" && a.policy != "scripted" && a.policy != "zero")
        throw ValidationError("unknown policy kind '" + a.policy + "'");

    std::string csv = "seed,mean_progress,stderr_progress,expert_progress,ratio\n";
    std::vector<double> ratios;
    for (int seed : seeds) {
        auto env = make_env_by_name(env_name, static_cast<std::uint64_t>(seed), horizon, nuisance);
        const ProgressStats expert = scripted_expert_progress(*env, horizon, a.episodes, a.eval_seed);
        ProgressStats st;
        if (a.policy == "scripted") {
            st = expert;
        } else {
            PolicyParams p = make_zero_policy(env->spec().state_dim, env->spec().action_dim);
            if (a.policy == "trained") {
                const fs::path ck = seed_dir(run_dir, seed) / "policy.json";
                if (!fs::exists(ck)) throw ValidationError("missing checkpoint '" + ck.string() + "'");
                p = policy_from_json(read_text(ck));
            }
            st = evaluate_progress(*env, p, horizon, a.episodes, a.eval_seed);
        }
        const double ratio = expert.mean != 0.0 ? st.mean / expert.mean : 0.0;
        ratios.push_back(ratio);
        csv += std::to_string(seed) + "," + fmt_double(st.mean) + "," + fmt_double(st.stderr_) + "," +
               fmt_double(expert.mean) + "," + fmt_double(ratio) + "\n";
        out << "seed " << seed << ": progress " << fmt_short(st.mean) << " +- " << fmt_short(st.stderr_)
            << ", ratio " << fmt_short(ratio) << "\n";
    }
    const auto [m, se] = mean_stderr(ratios);
    const fs::path path = or_default(a.out, run_dir / "eval.csv");
    write_text(path, csv);
    out << "ratio mean " << fmt_short(m) << " stderr " << fmt_short(se) << "\nwrote " << path.string() << "\n";
}

void cmd_report(const ReportArgs& a, std::ostream& out) {
    const fs::path run_dir = or_default(a.run_dir, default_output_root() / "run");
    const json info = read_run_info(run_dir);
    std::vector<int> seeds;
    if (!a.seeds.empty()) {
        seeds = parse_int_list(a.seeds);
    } else if (info.contains("seeds")) {
        seeds = info.at("seeds").get<std::vector<int>>();
    } else {
        throw ValidationError("no --seeds given and no run.json in " + run_dir.string());
    }
    std::vector<std::vector<MetricsRow>> runs;
    for (int seed : seeds) {
        const fs::path p = seed_dir(run_dir, seed) / "metrics.csv";
        if (!fs::exists(p)) throw ValidationError("missing metrics '" + p.string() + "'");
        try {
            runs.push_back(parse_metrics_csv(read_text(p)));
        } catch (const ParseError& e) {
            throw ParseError(e.detail(), e.line(), p.string());
        }
    }
    const fs::path path = or_default(a.out, run_dir / "report.csv");
    write_text(path, aggregate_metrics_csv(runs));
    out << "aggregated " << runs.size() << " seeds\nwrote " << path.string() << "\n";

    const fs::path eval = run_dir / "eval.csv";
    if (fs::exists(eval)) {
        std::istringstream in(read_text(eval));
        std::string line;
        std::getline(in, line);
        std::vector<double> ratios;
        int line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto f = split(line, ',');
            if (f.size() != 5) throw ParseError("expected 5 fields", line_no, eval.string());
            ratios.push_back(parse_double(f[4], line_no));
        }
        if (!ratios.empty()) {
            const auto [m, se] = mean_stderr(ratios);
            write_text(run_dir / "summary.csv", "n_seeds,ratio_mean,ratio_stderr\n" + std::to_string(ratios.size()) +
                                                    "," + fmt_double(m) + "," + fmt_double(se) + "\n");
            out << "eval ratio " << fmt_short(m) << " +- " << fmt_short(se) << "\n";
        }
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cross-domain imitation learning experiment driver"};
    app.set_config("--config", "", "Config file (key = value, one [section] per subcommand)");
    app.require_subcommand(1);

    GenDemosArgs g;
    auto* gen = app.add_subcommand("gen-demos", "Generate scripted expert demonstrations");
    gen->add_option("--env", g.env, "Environment name")->capture_default_str();
    gen->add_option("--nuisance", g.nuisance, "Nuisance dims of expert-line")->capture_default_str();
    gen->add_option("--n", g.n, "Number of trajectories")->capture_default_str();
    gen->add_option("--horizon", g.horizon, "Steps per trajectory")->capture_default_str();
    gen->add_option("--seed", g.seed, "Generator seed")->capture_default_str();
    gen->add_option("--out", g.out, "Output demo file");

    SelectArgs s;
    auto* sel = app.add_subcommand("select-dims", "Rank dimensions by MI and select the embedding");
    sel->add_option("--demos", s.demos, "Demo file")->required();
    sel->add_option("--out", s.out, "Output embedding file");
    sel->add_option("--frameskip", s.frameskip, "Transition gap")->capture_default_str();
    sel->add_option("--k", s.k, "Nearest neighbors")->capture_default_str();
    sel->add_option("--seed", s.seed, "Pseudo-random transition seed")->capture_default_str();
    sel->add_option("--override-dims", s.override_dims, "Comma list of dims, or 'all'");

    TrainArgs t;
    auto* tr = app.add_subcommand("train", "Train policy, encoder and discriminator per seed");
    tr->add_option("--demos", t.demos, "Demo file")->required();
    tr->add_option("--embedding", t.embedding, "Embedding file")->required();
    tr->add_option("--env", t.env, "Learner environment name")->capture_default_str();
    tr->add_option("--nuisance", t.nuisance, "Nuisance dims when the learner is expert-line")->capture_default_str();
    tr->add_option("--seeds", t.seeds, "Seeds, e.g. 0-5 or 0,2")->capture_default_str();
    tr->add_option("--out-dir", t.out_dir, "Run directory");
    tr->add_option("--reward-mode", t.reward_mode, "adversarial or goal-distance")->capture_default_str();
    tr->add_option("--ablation", t.ablation, "none or no-pair")->capture_default_str();
    tr->add_option("--embedding-dim", t.embedding_dim, "Keep the top d MI dims (0 = as selected)");
    tr->add_option("--iters", t.cfg.total_iters, "Training iterations")->capture_default_str();
    tr->add_option("--lr-encoder", t.cfg.lr_encoder)->capture_default_str();
    tr->add_option("--lr-discriminator", t.cfg.lr_discriminator)->capture_default_str();
    tr->add_option("--encoder-update-prob", t.cfg.encoder_update_prob)->capture_default_str();
    tr->add_flag("--use-bias", t.cfg.use_bias, "Trainable encoder bias");
    tr->add_flag("--encoder-diagonal", t.cfg.encoder_diagonal, "Diagonal encoder weights");
    tr->add_option("--batch-size", t.cfg.batch_size)->capture_default_str();
    tr->add_option("--disc-updates", t.cfg.disc_updates_per_iter, "Discriminator steps per iteration")
        ->capture_default_str();
    tr->add_option("--rollout-episodes", t.cfg.rollout_episodes)->capture_default_str();
    tr->add_option("--horizon", t.cfg.horizon)->capture_default_str();
    tr->add_option("--frameskip", t.cfg.frameskip)->capture_default_str();
    tr->add_option("--cem-population", t.cfg.cem.population)->capture_default_str();
    tr->add_option("--cem-elite-frac", t.cfg.cem.elite_frac)->capture_default_str();
    tr->add_option("--cem-noise", t.cfg.cem.noise_std)->capture_default_str();
    tr->add_option("--cem-episodes", t.cfg.cem.episodes_per_candidate)->capture_default_str();
    tr->add_option("--js-bins", t.cfg.js_bins)->capture_default_str();
    tr->add_option("--eval-episodes", t.cfg.eval_episodes)->capture_default_str();

    EvalArgs e;
    auto* ev = app.add_subcommand("eval", "Evaluate trained policies deterministically");
    ev->add_option("--run-dir", e.run_dir, "Run directory");
    ev->add_option("--env", e.env, "Environment (default from run.json)");
    ev->add_option("--nuisance", e.nuisance, "Nuisance dims of expert-line");
    ev->add_option("--horizon", e.horizon, "Episode length (default from run.json)");
    ev->add_option("--seeds", e.seeds, "Seeds (default from run.json)");
    ev->add_option("--episodes", e.episodes)->capture_default_str();
    ev->add_option("--eval-seed", e.eval_seed)->capture_default_str();
    ev->add_option("--policy", e.policy, "trained, scripted or zero")->capture_default_str();
    ev->add_option("--out", e.out, "Output CSV (default run-dir/eval.csv)");

    ReportArgs r;
    auto* rep = app.add_subcommand("report", "Aggregate per-seed metrics into mean and stderr curves");
    rep->add_option("--run-dir", r.run_dir, "Run directory");
    rep->add_option("--seeds", r.seeds, "Seeds (default from run.json)");
    rep->add_option("--out", r.out, "Output CSV (default run-dir/report.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*gen) cmd_gen_demos(g, out);
        if (*sel) cmd_select_dims(s, out);
        if (*tr) cmd_train(t, out);
        if (*ev) cmd_eval(e, out);
        if (*rep) cmd_report(r, out);
    } catch (const ValidationError& ex) {
        err << "error: " << ex.what() << "\n";
        return kExitValidation;
    } catch (const RuntimeAbort& ex) {
        err << "aborted: " << ex.what() << "\n";
        return kExitAbort;
    } catch (const std::exception& ex) {
        err << "aborted: " << ex.what() << "\n";
        return kExitAbort;
    }
    return kExitOk;
}

}  // namespace udil
