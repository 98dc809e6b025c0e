#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "rmcov/error.hpp"
#include "rmcov/tuning.hpp"

namespace rmcov::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitConfig = 4;

int exit_code_for(ErrorCode code) noexcept;

struct EstimateArgs {
    std::string input;
    std::string format = "csv";
    EstimatorKind estimator;
    std::optional<double> lambda; // unset: cross-validate
    std::optional<double> delta;
    std::size_t k_folds = 5;
    bool one_se = false;
    std::size_t grid_length = 25;
    std::uint64_t seed = 0;
    std::string out_dir;
};

/// Writes solution.csv, edges.csv and manifest.json into out_dir.
int cmd_estimate(const EstimateArgs& args, std::ostream& log);

/// Runs every setting of the plan and writes the report tables into out_dir.
int cmd_simulate(const std::string& config_path, const std::string& out_dir, std::ostream& log);

/// Full command line: `rmcov estimate ...` or `rmcov simulate ...`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace rmcov::cli
