#pragma once

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace qdot::test {

inline std::string cli() { return QDOT_CLI_PATH; }

/// Runs the CLI with `args` inside `dir`; stdout and stderr go to dir/log.txt.
inline int run_cli(const std::filesystem::path& dir, const std::string& args) {
  std::filesystem::create_directories(dir);
  const std::string cmd = "cd '" + dir.string() + "' && '" + cli() + "' " + args + " > log.txt 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream o;
  o << in.rdbuf();
  return o.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("qdot_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

} // namespace qdot::test
