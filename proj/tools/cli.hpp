#pragma once

// Entry point of the dynoid tool, split out so tests can drive the CLI
// in-process and assert on exit codes. Returns 0 on success, 2 for usage
// errors, 3 for I/O and format errors, 4 for numeric or training failures.
int run_cli(int argc, const char* const* argv);
