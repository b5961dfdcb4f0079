// Copyright 2026 The madc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(MADC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("cli exit codes") {
  const auto dir = fs::temp_directory_path() / "madc_cli_test";
  fs::remove_all(dir);
  const std::string out = " --out " + dir.string();
  CHECK(run("--help") == 0);
  CHECK(run("no-such-command") == 2);
  CHECK(run("synth --domain blue --n 2" + out) == 2);
  CHECK(run("synth --domain fluor --n 2 --split test" + out) == 0);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(run("eval --gt " + dir.string() + " --pred " + (dir / "missing").string() + out + "/e") == 2);
  {
    std::ofstream bad(dir / "bad.csv");
    bad << "not,a,results\nfile\n";
  }
  CHECK(run("report --results " + (dir / "bad.csv").string() + out + "/r") == 1);
  CHECK(run("eval --gt " + dir.string() + " --pred " + dir.string() + out + "/e") == 0);
  CHECK(fs::exists(dir / "e"));
}
