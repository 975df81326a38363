#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "dcal/serialize.hpp"

namespace dcal::cli {

enum class Command { Calibrate, Audit, Synth, Experiment, Report };

std::string_view to_string(Command c);

enum ExitCode : int { Ok = 0, GateFailed = 1, ConfigFailure = 2, RuntimeFailure = 3 };

struct RunConfig {
  Command command = Command::Calibrate;
  std::string experiment;  // experiment name for Command::Experiment
  std::filesystem::path config_path;
  std::filesystem::path out_dir = "dcal_out";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool quiet = false;
};

/// Strict resolution of a flat config document: unknown keys, type mismatches
/// and out-of-range values throw ConfigError naming the key. The result holds
/// every key the command understands, with defaults filled in (absent
/// optional paths are null).
Json resolve_config(const Json& doc, Command command, const std::string& experiment = {});

/// Runs the command and writes all artifacts plus manifest.json under the
/// output directory. Returns an ExitCode; never throws.
int dispatch(const RunConfig& rc);

}  // namespace dcal::cli
