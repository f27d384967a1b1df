#pragma once

namespace kbse {

// Entry point behind the kbse binary; exposed so tests can drive the CLI
// in-process. Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
int cli_main(int argc, const char* const* argv);

}  // namespace kbse
