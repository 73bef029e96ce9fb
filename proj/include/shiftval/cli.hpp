#pragma once

#include <ostream>

namespace shiftval::cli {

// Runs one subcommand (simulate, estimate, calibrate, montecarlo).
// Returns 0 on success, 2 for usage errors and 1 for data or validation
// errors; failures print a JSON object {"error": {"code", "message"}} to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shiftval::cli
