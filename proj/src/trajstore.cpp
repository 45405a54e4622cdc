#include "udil/trajstore.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace udil {

using nlohmann::json;

void DemoSet::validate() const {
    if (dim <= 0) throw ValidationError("demo set dim must be positive");
    if (trajectories.empty()) throw ValidationError("demo set has no trajectories");
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const auto& states = trajectories[i].states;
        if (states.size() < 2)
            throw ValidationError("trajectory " + std::to_string(i) + " has fewer than 2 states");
        for (std::size_t t = 0; t < states.size(); ++t) {
            if (states[t].size() != dim)
                throw ValidationError("trajectory " + std::to_string(i) + " state " + std::to_string(t) +
                                      " has length " + std::to_string(states[t].size()) + ", expected " +
                                      std::to_string(dim));
            if (!states[t].allFinite())
                throw ValidationError("trajectory " + std::to_string(i) + " state " + std::to_string(t) +
                                      " contains a non-finite value");
        }
    }
}

std::size_t DemoSet::total_states() const {
    std::size_t n = 0;
    for (const auto& tr : trajectories) n += tr.states.size();
    return n;
}

bool operator==(const DemoSet& a, const DemoSet& b) {
    if (a.domain_name != b.domain_name || a.dim != b.dim || a.generator_seed != b.generator_seed ||
        a.trajectories.size() != b.trajectories.size())
        return false;
    for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
        const auto& sa = a.trajectories[i].states;
        const auto& sb = b.trajectories[i].states;
        if (sa.size() != sb.size()) return false;
        for (std::size_t t = 0; t < sa.size(); ++t)
            if (!same_values(sa[t], sb[t])) return false;
    }
    return true;
}

std::string format_demo_set(const DemoSet& demos) {
    demos.validate();
    std::string out;
    json header = {{"version", kDemoFormatVersion},
                   {"domain_name", demos.domain_name},
                   {"dim", demos.dim},
                   {"generator_seed", demos.generator_seed}};
    out += header.dump();
    out += '\n';
    for (const auto& tr : demos.trajectories) {
        json line = json::array();
        for (const auto& s : tr.states) line.push_back(std::vector<double>(s.data(), s.data() + s.size()));
        out += line.dump();
        out += '\n';
    }
    return out;
}

void write_demo_set(const std::filesystem::path& path, const DemoSet& demos) {
    const std::string text = format_demo_set(demos);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw ValidationError("write failed: " + path.string());
}

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

}  // namespace

DemoSet parse_demo_set(const std::string& text) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw ParseError("empty demonstration file", 1);

    DemoSet demos;
    json header;
    try {
        header = json::parse(lines[0]);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed header: ") + e.what(), 1);
    }
    if (!header.is_object()) throw ParseError("header is not an object", 1);
    try {
        if (header.at("version").get<int>() != kDemoFormatVersion)
            throw ParseError("unsupported version " + header.at("version").dump(), 1);
        demos.domain_name = header.at("domain_name").get<std::string>();
        demos.dim = header.at("dim").get<int>();
        demos.generator_seed = header.at("generator_seed").get<std::int64_t>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad header field: ") + e.what(), 1);
    }
    if (demos.dim <= 0) throw ParseError("dim must be positive", 1);

    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        json row;
        try {
            row = json::parse(lines[i]);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed trajectory: ") + e.what(), lineno);
        }
        if (!row.is_array()) throw ParseError("trajectory is not an array", lineno);
        Trajectory tr;
        tr.states.reserve(row.size());
        for (const auto& st : row) {
            if (!st.is_array()) throw ParseError("state is not an array", lineno);
            if (static_cast<int>(st.size()) != demos.dim)
                throw ParseError("state of length " + std::to_string(st.size()) + " but header dim is " +
                                     std::to_string(demos.dim),
                                 lineno);
            StateVector s(demos.dim);
            for (int d = 0; d < demos.dim; ++d) {
                if (!st[d].is_number()) throw ParseError("non-numeric state value", lineno);
                s[d] = st[d].get<double>();
            }
            tr.states.push_back(std::move(s));
        }
        if (tr.states.size() < 2) throw ParseError("trajectory has fewer than 2 states", lineno);
        demos.trajectories.push_back(std::move(tr));
    }
    if (demos.trajectories.empty()) throw ParseError("no trajectories after header", 1);
    demos.validate();
    return demos;
}

DemoSet read_demo_set(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    try {
        return parse_demo_set(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(e.detail(), e.line(), path.string());
    }
}

std::vector<Transition> extract_transitions(const DemoSet& demos, int frameskip) {
    if (frameskip < 1) throw ValidationError("frameskip must be positive");
    std::vector<Transition> out;
    for (std::size_t i = 0; i < demos.trajectories.size(); ++i) {
        const auto& states = demos.trajectories[i].states;
        if (static_cast<int>(states.size()) <= frameskip)
            throw ValidationError("trajectory " + std::to_string(i) + " has " + std::to_string(states.size()) +
                                  " states, not more than frameskip " + std::to_string(frameskip));
        for (std::size_t t = 0; t + frameskip < states.size(); ++t) out.push_back({states[t], states[t + frameskip]});
    }
    return out;
}

}  // namespace udil
