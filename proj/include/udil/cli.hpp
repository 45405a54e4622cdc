#pragma once

#include "udil/adversary.hpp"
#include "udil/diffcore.hpp"
#include "udil/envsuite.hpp"
#include "udil/policy.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace udil {

// Exit codes of the command-line driver.
constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitAbort = 2;

// Environments by name: "expert-line" or a learner variant
// ("permuted", "negated-scaled", "extra-nuisance").
std::unique_ptr<LineEnv> make_env_by_name(const std::string& name, std::uint64_t seed, int horizon,
                                          int nuisance_dims = 3);

// Checkpoints as JSON text. Doubles round-trip exactly.
std::string encoder_to_json(const EncoderState& enc);
EncoderState encoder_from_json(const std::string& text);
std::string discriminator_to_json(const DiscriminatorState& d);
DiscriminatorState discriminator_from_json(const std::string& text);
std::string policy_to_json(const PolicyParams& p);
PolicyParams policy_from_json(const std::string& text);

std::string format_metrics_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

// Per-iteration mean and standard error (stdev / sqrt(n), 0 for one run)
// of every metric across runs. Runs must cover the same iterations.
std::string aggregate_metrics_csv(const std::vector<std::vector<MetricsRow>>& runs);

// "0,1,2" or "0-5" (inclusive range); both forms may be mixed.
std::vector<int> parse_int_list(const std::string& text);

// Default output root: $UDIL_OUTPUT_DIR, or "udil_out".
std::filesystem::path default_output_root();

// Runs the driver. Returns an exit code; never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace udil
