#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "kpp/io.hpp"

namespace kpp::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kUsage = 2, kNumerical = 3, kIo = 4 };

inline constexpr const char* kOutDirEnv = "KPPWAVE_OUT_DIR";
inline constexpr const char* kVersion = "1.0.0";

// A run finished but a solver did not deliver: maps to exit code 3.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Options every subcommand carries.
struct Common {
  std::string out_dir;
  std::string config;
  std::string stem;
  int precision = io::kDefaultPrecision;
  int jobs = 1;
  bool quiet = false;
};
void add_common(CLI::App* app, Common& c, const std::string& default_stem);
// --out-dir, else $KPPWAVE_OUT_DIR, else the working directory.
fs::path output_dir(const Common& c);

// Reads a flat "key = value" document (blank lines and '#' comments
// ignored) into "--key=value" tokens; underscores in keys become dashes.
std::vector<std::string> config_tokens(const fs::path& path);
// Inserts the tokens of a --config file right after the subcommand name, so
// explicit flags (parsed later, last value wins) override the file.
std::vector<std::string> splice_config(const std::vector<std::string>& args,
                                       const std::vector<std::string>& subcommands);

std::vector<double> parse_list(const std::string& text);
std::pair<double, double> parse_window(const std::string& text);
// "n:lambda" pairs separated by commas.
std::vector<std::pair<double, double>> parse_pairs(const std::string& text);
// Accepts "inf"/"infinity" as well as numbers.
double parse_exponent(const std::string& text);
std::string tag(double v);

// Runs fn(0..count-1) on up to `jobs` threads; rethrows the first error.
void parallel_for(int count, int jobs, const std::function<void(int)>& fn);

class RunManifest {
 public:
  RunManifest(std::string command, const CLI::App* app);
  void add_input(const fs::path& p);
  void add_output(const fs::path& p);
  void add_seed(unsigned long long s);
  void note(const std::string& key, io::Json value);
  // Name of the manifest file, referenced from every output.
  std::string file_name(const std::string& stem) const;
  // Writes <stem>.manifest.json and <stem>.config (rerunnable with --config).
  void write(const fs::path& dir, const std::string& stem, int exit_code);

 private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> params_;
  std::vector<std::string> inputs_, outputs_;
  std::vector<unsigned long long> seeds_;
  io::Json notes_ = io::Json::object();
  std::chrono::system_clock::time_point start_wall_;
  std::chrono::steady_clock::time_point start_;
};

int run(int argc, char** argv);

}  // namespace kpp::cli
