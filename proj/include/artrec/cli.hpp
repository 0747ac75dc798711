#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "artrec/mae_model.hpp"

namespace artrec {

/// Everything a run needs besides its inputs. Echoed into every output
/// directory as config.txt.
struct RunConfig {
    ModelConfig model;
    std::size_t hop = kFrameLength / 2;
    /// Tasks that form the test split, for every speaker.
    std::vector<std::string> test_tasks;
    /// Optional JSON file of (speaker, task) -> replacement task.
    std::string substitutions;
    double holdout_fraction = 0.1;
    /// Early-stop on the test split instead of a carved holdout.
    bool early_stop_on_test = false;
};

/// Applies one `key=value` assignment. Throws Error on unknown keys or bad values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// Plain text, one `key = value` per line, `#` starts a comment.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
std::string run_config_to_text(const RunConfig& config);

/// Entry point of the command line tool. Returns the process exit code:
/// 0 on success, 1 on a runtime failure, 2 on a usage error.
int run_cli(int argc, char** argv);
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace artrec
