//
// Copyright 2026 The dpicl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DPICL_CLI_HPP_
#define DPICL_CLI_HPP_

#include <iostream>
#include <string>
#include <vector>

#include "dpicl/pipeline.hpp"

namespace dpicl {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitTransport = 3;
inline constexpr int kExitInvariant = 4;

// Experiment file: RunConfig plus file paths and backend selection.
// Unknown keys are rejected.
struct ExperimentFile {
  RunConfig run;
  std::string mock;       // "majority" | "keyword-echo" | "fixed" | ""
  std::string mock_text;  // kFixedText payload
  std::string base_url;
  std::string model;
  int timeout_seconds = 60;
  int max_attempts = 5;
  int base_delay_ms = 1000;
  std::string trace_path;
  std::string corpus_path;
  std::string queries_path;
  std::string output_path;
};

ExperimentFile load_experiment_file(const std::string& path);

// Runs the CLI (`index-build`, `account`, `run`) against `args` (without the
// program name). Output goes to `out`, diagnostics to stderr.
int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout);

}  // namespace dpicl

#endif  // DPICL_CLI_HPP_
