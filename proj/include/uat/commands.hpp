#pragma once

#include <vector>

#include "uat/run_config.hpp"
#include "uat/trigger_search.hpp"

namespace uat {

// Command bodies behind the CLI. All throw on failure; main maps exceptions
// to exit codes. `directions` empty means all six.
void cmd_train(const RunConfig& cfg);
void cmd_attack(const RunConfig& cfg, const std::vector<AttackDirection>& directions,
                ObjectiveMode mode);
void cmd_generate(const RunConfig& cfg, const std::vector<AttackDirection>& directions,
                  ObjectiveMode mode);
void cmd_evaluate(const RunConfig& cfg, const std::vector<AttackDirection>& directions,
                  ObjectiveMode mode);
void cmd_oracle_check(const RunConfig& cfg);

} // namespace uat
