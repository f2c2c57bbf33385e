#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace groundal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

struct CommandOptions {
  std::optional<unsigned> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

// Each command reports to `out`/`err` and returns an exit code.
int cmd_generate(const std::string& config_path, const CommandOptions& options, std::ostream& out,
                 std::ostream& err);
int cmd_run(const std::string& config_path, const CommandOptions& options, std::ostream& out,
            std::ostream& err);
int cmd_report(const std::string& results_dir, const CommandOptions& options, std::ostream& out,
               std::ostream& err);

std::string sha256_hex(const std::string& path);

int run_cli(int argc, char** argv);

}  // namespace groundal::cli
