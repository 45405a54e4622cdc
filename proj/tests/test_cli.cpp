#include <doctest.h>

#include "udil/cli.hpp"
#include "udil/miembed.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace udil;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("udil_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "udil");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// Runs the installed binary through the shell; returns its exit status.
int spawn(const std::string& args) {
    const char* bin = std::getenv("UDIL_CLI");
    REQUIRE(bin != nullptr);
    const int status = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> small_train(const fs::path& dir, const std::string& seeds) {
    return {"train", "--demos", (dir / "demos.jsonl").string(), "--embedding", (dir / "embedding.json").string(),
            "--env", "negated-scaled", "--seeds", seeds, "--out-dir", (dir / "run").string(), "--iters", "3",
            "--horizon", "40", "--frameskip", "5", "--rollout-episodes", "2", "--cem-population", "8"};
}

}  // namespace

TEST_CASE("integer lists") {
    CHECK(parse_int_list("0-5") == std::vector<int>{0, 1, 2, 3, 4, 5});
    CHECK(parse_int_list("3,1,7-8") == std::vector<int>{3, 1, 7, 8});
    CHECK_THROWS_AS(parse_int_list(""), ValidationError);
    CHECK_THROWS_AS(parse_int_list("1,,2"), ValidationError);
    CHECK_THROWS_AS(parse_int_list("5-2"), ValidationError);
    CHECK_THROWS_AS(parse_int_list("a"), ValidationError);
}

TEST_CASE("environment names") {
    CHECK(make_env_by_name("expert-line", 0, 100, 2)->spec().state_dim == 4);
    CHECK(make_env_by_name("extra-nuisance", 0, 100)->spec().state_dim == 7);
    CHECK_THROWS_AS(make_env_by_name("walker", 0, 100), ValidationError);
}

TEST_CASE("checkpoint round-trips are exact") {
    EncoderConfig ec;
    ec.n_in = 5;
    ec.m_out = 2;
    ec.use_bias = true;
    ec.seed = 12;
    EncoderState enc = make_encoder(ec);
    adam_step(enc, Vec::LinSpaced(enc.param_count(), -1.0, 1.0), 0.01);
    const EncoderState enc2 = encoder_from_json(encoder_to_json(enc));
    CHECK(same_values(enc2.flat(), enc.flat()));
    CHECK(same_values(enc2.moments.second, enc.moments.second));
    CHECK(enc2.moments.step_count == 1);
    CHECK(encoder_to_json(enc2) == encoder_to_json(enc));

    DiscriminatorConfig dc;
    dc.embed_dim = 2;
    dc.hidden = {6, 3};
    dc.pair_input = false;
    const DiscriminatorState d = make_discriminator(dc);
    const DiscriminatorState d2 = discriminator_from_json(discriminator_to_json(d));
    CHECK(same_values(d2.flat(), d.flat()));
    CHECK(d2.config.pair_input == false);
    CHECK(discriminator_to_json(d2) == discriminator_to_json(d));

    PolicyParams p = make_zero_policy(3, 1);
    p.gain << 1.0 / 3.0, -2.0, 1e-17;
    const PolicyParams p2 = policy_from_json(policy_to_json(p));
    CHECK(same_values(p2.flat_mean(), p.flat_mean()));
    CHECK(same_values(p2.log_std, p.log_std));

    CHECK_THROWS_AS(policy_from_json("{"), ValidationError);
    CHECK_THROWS_AS(policy_from_json(encoder_to_json(enc)), ValidationError);
    CHECK_THROWS_AS(encoder_from_json("{\"kind\":\"encoder\"}"), ValidationError);
}

TEST_CASE("metrics csv and aggregation") {
    std::vector<std::vector<MetricsRow>> runs;
    const double evals[6] = {1.0, 2.0, 4.0, 4.0, 5.0, 8.0};
    for (double e : evals) {
        MetricsRow r;
        r.iter = 0;
        r.disc_loss = 1.0 / 3.0;
        r.eval_true_reward = e;
        runs.push_back({r});
    }
    CHECK(parse_metrics_csv(format_metrics_csv(runs[0])).front().disc_loss == 1.0 / 3.0);

    const std::string agg = aggregate_metrics_csv(runs);
    std::istringstream in(agg);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header.rfind("iter,n_runs,disc_loss_mean,disc_loss_stderr", 0) == 0);
    std::vector<double> f;
    std::stringstream rs(row);
    for (std::string cell; std::getline(rs, cell, ',');) f.push_back(std::stod(cell));
    REQUIRE(f.size() == 12);
    CHECK(f[1] == 6);
    // eval_true_reward: mean 4, sample variance (9+4+0+0+1+16)/5 = 6.
    CHECK(f[8] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(f[9] == doctest::Approx(std::sqrt(6.0) / std::sqrt(6.0)).epsilon(1e-12));
    CHECK(f[3] == 0.0);

    const std::string single = aggregate_metrics_csv({runs[0]});
    CHECK(single.find(",0,") != std::string::npos);
    CHECK(aggregate_metrics_csv(runs) == agg);
    CHECK_THROWS_AS(aggregate_metrics_csv({}), ValidationError);
    CHECK_THROWS_AS(parse_metrics_csv("iter\n"), ParseError);
}

TEST_CASE("end-to-end pipeline with byte-identical reruns") {
    const fs::path dir = fresh_dir("pipeline");
    const std::string demos = (dir / "demos.jsonl").string();
    const std::string embed = (dir / "embedding.json").string();

    Run r = cli({"gen-demos", "--env", "expert-line", "--n", "20", "--horizon", "100", "--seed", "0", "--out", demos});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("trajectories 20") != std::string::npos);
    const std::string demo_bytes = slurp(demos);
    REQUIRE(cli({"gen-demos", "--n", "20", "--seed", "0", "--out", demos}).code == 0);
    CHECK(slurp(demos) == demo_bytes);
    CHECK(read_demo_set(demos).trajectories.size() == 20);

    r = cli({"select-dims", "--demos", demos, "--out", embed});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("elbow index") != std::string::npos);
    const EmbeddingSpec f = embedding_from_json(slurp(embed));
    for (int d : f.selected_dims) CHECK(d < 2);

    REQUIRE(cli(small_train(dir, "0,1")).code == 0);
    const std::string metrics = slurp(dir / "run" / "seed_1" / "metrics.csv");
    const std::string policy = slurp(dir / "run" / "seed_1" / "policy.json");
    CHECK(parse_metrics_csv(metrics).size() == 3);
    REQUIRE(cli(small_train(dir, "0,1")).code == 0);
    CHECK(slurp(dir / "run" / "seed_1" / "metrics.csv") == metrics);
    CHECK(slurp(dir / "run" / "seed_1" / "policy.json") == policy);
    CHECK(fs::exists(dir / "run" / "seed_0" / "encoder.json"));
    CHECK(fs::exists(dir / "run" / "seed_0" / "discriminator.json"));

    r = cli({"eval", "--run-dir", (dir / "run").string()});
    REQUIRE(r.code == 0);
    const std::string eval_bytes = slurp(dir / "run" / "eval.csv");
    CHECK(eval_bytes.rfind("seed,mean_progress,stderr_progress,expert_progress,ratio\n", 0) == 0);
    REQUIRE(cli({"eval", "--run-dir", (dir / "run").string()}).code == 0);
    CHECK(slurp(dir / "run" / "eval.csv") == eval_bytes);

    r = cli({"report", "--run-dir", (dir / "run").string()});
    REQUIRE(r.code == 0);
    const std::string report = slurp(dir / "run" / "report.csv");
    CHECK(std::count(report.begin(), report.end(), '\n') == 4);
    CHECK(fs::exists(dir / "run" / "summary.csv"));
    REQUIRE(cli({"report", "--run-dir", (dir / "run").string()}).code == 0);
    CHECK(slurp(dir / "run" / "report.csv") == report);
}

TEST_CASE("select-dims overrides") {
    const fs::path dir = fresh_dir("override");
    const std::string demos = (dir / "demos.jsonl").string();
    REQUIRE(cli({"gen-demos", "--n", "4", "--out", demos}).code == 0);
    REQUIRE(cli({"select-dims", "--demos", demos, "--override-dims", "0,1,2", "--out", (dir / "d3.json").string()})
                .code == 0);
    CHECK(embedding_from_json(slurp(dir / "d3.json")).selected_dims == std::vector<int>{0, 1, 2});
    REQUIRE(cli({"select-dims", "--demos", demos, "--override-dims", "all", "--out", (dir / "all.json").string()})
                .code == 0);
    CHECK(embedding_from_json(slurp(dir / "all.json")).selected_dims == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("eval normalization with scripted and zero policies") {
    const fs::path dir = fresh_dir("eval");
    Run r = cli({"eval", "--run-dir", dir.string(), "--env", "negated-scaled", "--seeds", "0,1", "--policy",
                 "scripted", "--out", (dir / "scripted.csv").string()});
    REQUIRE(r.code == 0);
    const std::string s = slurp(dir / "scripted.csv");
    CHECK(s.find(",1\n") != std::string::npos);
    r = cli({"eval", "--run-dir", dir.string(), "--env", "permuted", "--seeds", "0", "--policy", "zero", "--out",
             (dir / "zero.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(slurp(dir / "zero.csv").find(",0\n") != std::string::npos);
    CHECK(cli({"eval", "--run-dir", dir.string(), "--env", "permuted", "--seeds", "0"}).code == kExitValidation);
}

TEST_CASE("error reporting and exit codes") {
    const fs::path dir = fresh_dir("errors");
    CHECK(cli({"gen-demos", "--env", "walker", "--out", (dir / "x.jsonl").string()}).code == kExitValidation);
    CHECK(cli({}).code == kExitValidation);
    CHECK(cli({"--help"}).code == kExitOk);
    CHECK(cli({"train", "--demos", "x"}).code == kExitValidation);

    {
        std::ofstream bad(dir / "bad.jsonl");
        bad << "{\"dim\":2,\"domain_name\":\"x\",\"generator_seed\":0,\"version\":1}\n[[1,2],[3]]\n";
    }
    const Run r = cli({"select-dims", "--demos", (dir / "bad.jsonl").string()});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("line 2") != std::string::npos);
    CHECK(r.err.find("bad.jsonl") != std::string::npos);

    CHECK(cli({"report", "--run-dir", (dir / "nothing").string(), "--seeds", "0"}).code == kExitValidation);
}

TEST_CASE("non-finite training aborts with exit code 2 and the iteration") {
    const fs::path dir = fresh_dir("abort");
    REQUIRE(cli({"gen-demos", "--n", "3", "--horizon", "40", "--out", (dir / "demos.jsonl").string()}).code == 0);
    REQUIRE(cli({"select-dims", "--demos", (dir / "demos.jsonl").string(), "--frameskip", "5", "--out",
                 (dir / "embedding.json").string()})
                .code == 0);
    auto args = small_train(dir, "0");
    args.insert(args.end(), {"--lr-discriminator", "1e308"});
    const Run r = cli(args);
    CHECK(r.code == kExitAbort);
    CHECK(r.err.find("iteration") != std::string::npos);
}

TEST_CASE("binary: exit codes, config file and output root") {
    const fs::path dir = fresh_dir("binary");
    CHECK(spawn("gen-demos --env walker") == 1);
    CHECK(spawn("") == 1);
    {
        std::ofstream cfg(dir / "udil.toml");
        cfg << "[gen-demos]\nn = 2\nhorizon = 30\n";
    }
    CHECK(spawn("--config " + (dir / "udil.toml").string() + " gen-demos --out " + (dir / "c.jsonl").string() +
                " --horizon 40") == 0);
    const DemoSet d = read_demo_set(dir / "c.jsonl");
    CHECK(d.trajectories.size() == 2);
    CHECK(d.trajectories[0].states.size() == 41);

    CHECK(spawn("--config " + (dir / "missing.toml").string() + " gen-demos") == 1);
    CHECK(std::system(("UDIL_OUTPUT_DIR=" + (dir / "root").string() + " " + std::getenv("UDIL_CLI") +
                       " gen-demos --n 1 >/dev/null")
                          .c_str()) == 0);
    CHECK(fs::exists(dir / "root" / "demos.jsonl"));
}
