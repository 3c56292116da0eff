#pragma once

#include <iosfwd>

namespace rct::cli {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
    kOk = 0,
    kOther = 1,
    kParse = 2,
    kScenarioAbort = 3,
    kEstimatorFailure = 4,
    kInfeasible = 5,
};

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rct::cli
