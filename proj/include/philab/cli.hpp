#pragma once

namespace philab {

/// philab analyze | simulate | impedance | bench. Exit codes: 0 success,
/// 1 error, 2 Unstable verdict from `analyze`.
int run_cli(int argc, char** argv);

} // namespace philab
