#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "motr/data.hpp"
#include "motr/sampler.hpp"

namespace motr {

// Everything needed to reproduce a `train` run.
struct RunConfig {
  std::string data;
  std::string target = "y";
  Task task = Task::Regression;
  Hyperparams hp;
  std::string out = "run";
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// Entry point shared by the `motr` binary and the tests. args excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace motr
