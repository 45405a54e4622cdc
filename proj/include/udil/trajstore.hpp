#pragma once

#include "udil/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace udil {

struct Trajectory {
    std::vector<StateVector> states;
};

// A set of state-only expert trajectories sharing one state dimension.
struct DemoSet {
    std::vector<Trajectory> trajectories;
    std::string domain_name;
    int dim = 0;
    std::int64_t generator_seed = 0;

    // Throws ValidationError when an invariant is broken.
    void validate() const;
    std::size_t total_states() const;
};

bool operator==(const DemoSet& a, const DemoSet& b);

constexpr int kDemoFormatVersion = 1;

// JSON Lines: a header object, then one trajectory (array of state arrays) per line.
void write_demo_set(const std::filesystem::path& path, const DemoSet& demos);
std::string format_demo_set(const DemoSet& demos);

DemoSet read_demo_set(const std::filesystem::path& path);
DemoSet parse_demo_set(const std::string& text);

// Pairs (s_t, s_{t+k}) for every t with a sliding window of stride 1.
std::vector<Transition> extract_transitions(const DemoSet& demos, int frameskip);

}  // namespace udil
