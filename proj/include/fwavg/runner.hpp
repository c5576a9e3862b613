#pragma once

// Command-line entry point: subcommand dispatch, artifact output, manifest.

namespace fwavg {

// Exit codes: 0 success (inconclusive verdicts warn on stderr), 1 failed
// verdict or runtime error, 2 configuration error.
int run_cli(int argc, const char* const* argv);

}  // namespace fwavg
