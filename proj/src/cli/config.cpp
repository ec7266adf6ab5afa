#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "cli/cli.hpp"

namespace kpp::cli {

void add_common(CLI::App* app, Common& c, const std::string& default_stem) {
  c.stem = default_stem;
  app->add_option("--out-dir", c.out_dir, std::string("Output directory (default: $") + kOutDirEnv + " or .)");
  app->add_option("--config", c.config, "Flat key = value file; explicit flags win over it");
  app->add_option("--stem", c.stem, "Base name of the output files")->capture_default_str();
  app->add_option("--precision", c.precision, "Significant digits in CSV output")
      ->capture_default_str()
      ->check(CLI::Range(1, 17));
  app->add_option("--jobs,-j", c.jobs, "Worker threads for sweeps")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_flag("--quiet,-q", c.quiet, "Suppress the console summary");
}

fs::path output_dir(const Common& c) {
  if (!c.out_dir.empty()) return c.out_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return ".";
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::vector<std::string> config_tokens(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw io::IoError("cannot open config file " + path.string());
  std::vector<std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';' || t[0] == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") continue;
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

std::vector<std::string> splice_config(const std::vector<std::string>& args,
                                       const std::vector<std::string>& subcommands) {
  std::size_t sub = args.size();
  for (std::size_t i = 1; i < args.size(); ++i)
    if (std::find(subcommands.begin(), subcommands.end(), args[i]) != subcommands.end()) {
      sub = i;
      break;
    }
  if (sub == args.size()) return args;
  std::string file;
  for (std::size_t i = sub + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) file = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) file = args[i].substr(9);
  }
  if (file.empty()) return args;
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<long>(sub) + 1);
  for (auto& t : config_tokens(file)) out.push_back(std::move(t));
  out.insert(out.end(), args.begin() + static_cast<long>(sub) + 1, args.end());
  return out;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_exponent(item));
  }
  if (out.empty()) throw std::invalid_argument("empty list: '" + text + "'");
  return out;
}

std::pair<double, double> parse_window(const std::string& text) {
  const auto c = text.find(':');
  if (c == std::string::npos) throw std::invalid_argument("expected a:b, got '" + text + "'");
  try {
    return {std::stod(text.substr(0, c)), std::stod(text.substr(c + 1))};
  } catch (const std::exception&) {
    throw std::invalid_argument("expected a:b, got '" + text + "'");
  }
}

std::vector<std::pair<double, double>> parse_pairs(const std::string& text) {
  std::vector<std::pair<double, double>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_window(item));
  }
  return out;
}

double parse_exponent(const std::string& text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "inf" || t == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  if (used != t.size()) throw std::invalid_argument("not a number: '" + text + "'");
  return v;
}

std::string tag(double v) {
  if (std::isinf(v)) return "inf";
  std::string s = io::format_double(v, 10);
  std::replace(s.begin(), s.end(), '-', 'm');
  return s;
}

void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(jobs, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace kpp::cli
