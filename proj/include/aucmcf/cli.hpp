#pragma once
// Command-line front end: `analyze` (user data) and `simulate` (Monte Carlo
// studies).  Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical/degeneracy error.  Errors are single lines on stderr; stdout
// carries only results.

namespace aucmcf {

int run_cli(int argc, const char* const* argv);

}  // namespace aucmcf
