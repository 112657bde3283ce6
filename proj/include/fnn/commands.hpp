#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fnn {

/// Process exit codes of the fnn tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // unexpected internal error
  kExitConfig = 2,   // bad flags, config, network spec or empty dataset
  kExitData = 3,     // unreadable or malformed dataset / checkpoint
  kExitNumeric = 4,  // NaN/Inf or failed gradient check
};

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
};

inline constexpr const char* kMetricsHeader = "epoch,train_loss,train_top1,test_top1,test_top5";
inline constexpr const char* kEntropyHeader = "epoch,layer,filter_entropy,bias_entropy,input_entropy";

/// Each command prints results to `out` and diagnostics to `err`, and maps
/// library exceptions onto ExitCode.
int cmd_train(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_entropy(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_selftest(const CommandOptions& opts, std::ostream& out, std::ostream& err);

/// Full command line, argv[0] included.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fnn
