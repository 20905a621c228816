#pragma once

#include <string>
#include <vector>

namespace tendon {

// Entry point behind the tendonscan binary, callable in-process for tests.
// Subcommands: phantom generate, segment, train classify, train regress,
// score exam, pca fit, evaluate cv, report. Exit codes: 0 success, 1 flag
// or precondition problem, 2 failure while doing the work (I/O, corrupt
// files). All randomness flows from --seed flags.
int cli_main(int argc, const char* const* argv);

// Convenience overload; args excludes the program name.
int cli_main(const std::vector<std::string>& args);

}  // namespace tendon
