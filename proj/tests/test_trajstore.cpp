#include <doctest.h>

#include "udil/envsuite.hpp"
#include "udil/trajstore.hpp"

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace udil;

namespace {

StateVector sv(std::initializer_list<double> v) {
    StateVector s(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) s[i++] = x;
    return s;
}

DemoSet linear_demos(std::vector<int> lengths, int dim = 2) {
    DemoSet d;
    d.domain_name = "toy";
    d.dim = dim;
    d.generator_seed = 7;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        Trajectory tr;
        for (int t = 0; t < lengths[i]; ++t) tr.states.push_back(StateVector::Constant(dim, 100.0 * i + t));
        d.trajectories.push_back(tr);
    }
    return d;
}

std::filesystem::path tmp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("udil_trajstore_" + name);
}

}  // namespace

TEST_CASE("write then read a one-trajectory set round-trips exactly") {
    DemoSet d;
    d.domain_name = "toy";
    d.dim = 3;
    d.generator_seed = 42;
    d.trajectories.push_back({{sv({0.1, -2.0 / 3.0, 1e-300}), sv({1.0 / 7.0, 5.5, -0.0}), sv({3.0, 4.0, 5.0})}});
    const auto path = tmp_path("roundtrip.jsonl");
    write_demo_set(path, d);
    const DemoSet back = read_demo_set(path);
    CHECK(back == d);
    CHECK(back.trajectories[0].states[0][1] == -2.0 / 3.0);
    std::filesystem::remove(path);
}

TEST_CASE("twenty expert trajectories give a header plus twenty lines") {
    auto env = make_expert_line(3, 0);
    const DemoSet d = gen_expert_demos(*env, 20, 100, 0);
    const std::string text = format_demo_set(d);
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n';
    CHECK(lines == 21);
    CHECK(parse_demo_set(text) == d);
}

TEST_CASE("mismatched trajectory dims are rejected on write") {
    DemoSet d = linear_demos({3, 3});
    d.trajectories[1].states[2] = sv({1.0});
    CHECK_THROWS_AS(format_demo_set(d), ValidationError);
    CHECK_THROWS_AS(write_demo_set(tmp_path("bad.jsonl"), d), ValidationError);
}

TEST_CASE("non-finite values are rejected") {
    DemoSet d = linear_demos({3});
    d.trajectories[0].states[1][0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(d.validate(), ValidationError);
    d.trajectories[0].states[1][0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(format_demo_set(d), ValidationError);
}

TEST_CASE("empty input is a parse error") {
    CHECK_THROWS_AS(parse_demo_set(""), ParseError);
    const auto path = tmp_path("empty.jsonl");
    std::ofstream(path).close();
    CHECK_THROWS_AS(read_demo_set(path), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("a state shorter than the header dim fails at its line") {
    const std::string text =
        "{\"dim\":5,\"domain_name\":\"x\",\"generator_seed\":0,\"version\":1}\n"
        "[[1,2,3,4,5],[1,2,3,4,5]]\n"
        "[[1,2,3,4,5],[1,2,3,4]]\n";
    try {
        parse_demo_set(text);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("malformed json names the line and the file") {
    const auto path = tmp_path("malformed.jsonl");
    {
        std::ofstream os(path);
        os << "{\"dim\":1,\"domain_name\":\"x\",\"generator_seed\":0,\"version\":1}\n[[1],[2]]\n[[1],\n";
    }
    try {
        read_demo_set(path);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("missing file is a validation error") {
    CHECK_THROWS_AS(read_demo_set(tmp_path("does_not_exist.jsonl")), ValidationError);
}

TEST_CASE("extract_transitions counts and ordering") {
    SUBCASE("5 states, k = 1") {
        const auto ts = extract_transitions(linear_demos({5}), 1);
        REQUIRE(ts.size() == 4);
        for (std::size_t t = 0; t < 4; ++t) {
            CHECK(ts[t].from[0] == static_cast<double>(t));
            CHECK(ts[t].to[0] == static_cast<double>(t + 1));
        }
    }
    SUBCASE("31 states, k = 15") {
        const auto ts = extract_transitions(linear_demos({31}), 15);
        REQUIRE(ts.size() == 16);
        CHECK(ts[0].from[0] == 0.0);
        CHECK(ts[0].to[0] == 15.0);
        CHECK(ts.back().to[0] == 30.0);
    }
    SUBCASE("lengths 20 and 25, k = 15") {
        const auto ts = extract_transitions(linear_demos({20, 25}), 15);
        CHECK(ts.size() == 15);
        CHECK(ts[5].from[0] == 100.0);
    }
    SUBCASE("trajectory not longer than k") {
        CHECK_THROWS_AS(extract_transitions(linear_demos({20, 15}), 15), ValidationError);
        CHECK_THROWS_AS(extract_transitions(linear_demos({5}), 0), ValidationError);
    }
}

TEST_CASE("serialization is deterministic") {
    auto env = make_expert_line(2, 3);
    const DemoSet a = gen_expert_demos(*env, 3, 20, 5);
    const DemoSet b = gen_expert_demos(*env, 3, 20, 5);
    CHECK(format_demo_set(a) == format_demo_set(b));
}
