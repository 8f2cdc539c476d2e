#pragma once

namespace smallnoise::cli {

/// Full command-line front end. Returns the process exit code:
/// 0 success, 1 validation/usage error, 2 numerical failure (a
/// diagnostic JSON is still written in that case).
int run(int argc, const char* const* argv);

}  // namespace smallnoise::cli
