#include <ctime>
#include <iomanip>
#include <sstream>

#include "cli/cli.hpp"

namespace kpp::cli {

namespace {

std::string iso_utc(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string option_value(const CLI::Option* opt) {
  if (opt->count() == 0) return opt->get_default_str();
  std::string v;
  for (const auto& r : opt->results()) v += (v.empty() ? "" : ",") + r;
  return v;
}

}  // namespace

RunManifest::RunManifest(std::string command, const CLI::App* app)
    : command_(std::move(command)), start_wall_(std::chrono::system_clock::now()), start_(std::chrono::steady_clock::now()) {
  for (const CLI::Option* opt : app->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config" || opt->get_lnames().empty()) continue;
    const std::string value = option_value(opt);
    if (opt->get_type_size() == 0) {
      // Flags: record only when set.
      if (opt->count() > 0) params_.emplace_back(name, "true");
      continue;
    }
    if (value.empty()) continue;
    params_.emplace_back(name, value);
  }
}

void RunManifest::add_input(const fs::path& p) { inputs_.push_back(p.string()); }
void RunManifest::add_output(const fs::path& p) { outputs_.push_back(p.filename().string()); }
void RunManifest::add_seed(unsigned long long s) { seeds_.push_back(s); }
void RunManifest::note(const std::string& key, io::Json value) { notes_[key] = std::move(value); }

std::string RunManifest::file_name(const std::string& stem) const { return stem + ".manifest.json"; }

void RunManifest::write(const fs::path& dir, const std::string& stem, int exit_code) {
  io::Json params = io::Json::object();
  std::string config;
  for (const auto& [k, v] : params_) {
    params[k] = v;
    std::string key = k;
    for (char& c : key)
      if (c == '-') c = '_';
    config += key + " = " + v + "\n";
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  io::Json j{{"command", command_},
             {"version", std::string("kppwave ") + kVersion},
             {"modules",
              {{"models", kVersion},
               {"tw_bvp", kVersion},
               {"local_analysis", kVersion},
               {"osc_tail", kVersion},
               {"explicit_solutions", kVersion},
               {"front_sim", kVersion},
               {"centre_subspace", kVersion},
               {"cli", kVersion}}},
             {"parameters", params},
             {"rerun", "kppwave " + command_ + " --config " + stem + ".config"},
             {"started_utc", iso_utc(start_wall_)},
             {"wall_clock_seconds", elapsed},
             {"inputs", inputs_},
             {"outputs", outputs_},
             {"seeds", seeds_},
             {"exit_code", exit_code}};
  if (!notes_.empty()) j["notes"] = notes_;
  io::write_text_file(dir / (stem + ".config"), "# " + command_ + " parameters\n" + config);
  io::write_json_file(dir / file_name(stem), j);
}

}  // namespace kpp::cli
