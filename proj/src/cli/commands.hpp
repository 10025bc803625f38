#pragma once

namespace rotortrap::cli {

// Parses argv, dispatches to the subcommand, and returns the process exit
// code: 0 ok, 2 configuration/usage error, 3 numerical failure, 4 fit
// non-convergence.
int run(int argc, char** argv);

} // namespace rotortrap::cli
