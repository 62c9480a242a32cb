#pragma once

#include <filesystem>
#include <iostream>
#include <span>

#include "opicl/pdegen/instance.hpp"

namespace opicl::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kIo = 3,
    kSchema = 4,
    kInvalidData = 5,
    kNumeric = 6,
};

/// Entry point of the `opicl` tool. Errors are reported as one line on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

/// Plot-ready CSV of one in-context prediction. The first line is a `#`
/// comment naming the family, direction, coefficients and prompt size; the
/// header row is x, prompt_param_1..m, prompt_sol_1..m, query_param,
/// prediction, exact.
void emit_plot_data(const pdegen::OperatorInstance& instance, std::span<const double> prediction,
                    std::span<const double> exact, const std::filesystem::path& path);

} // namespace opicl::cli
