#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace watch {

struct RunOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;  // overrides the plan/scenario seed
  int threads = 0;                    // 0 keeps the library default
};

/// Exit codes: 0 success, 2 configuration error, 3 data error.
int run_ida(const RunOptions& opt);
int run_analyze(const RunOptions& opt);
int run_simulate(const RunOptions& opt);

}  // namespace watch
