#ifndef TPPLAB_CLI_HPP
#define TPPLAB_CLI_HPP

#include <string>
#include <vector>

namespace tpp::cli {

// Exit codes: 0 success, 2 input error, 3 model/explosion error,
// 4 diagnostic threshold breached under --strict.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitModel = 3;
inline constexpr int kExitDiagnostics = 4;

int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without the program name

}  // namespace tpp::cli

#endif
