#include "kpp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace kpp::io {

namespace fs = std::filesystem;

const std::vector<double>& Table::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return columns.at(k);
  throw std::out_of_range("table has no column '" + name + "'");
}

std::string format_double(double v, int precision) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, precision);
  return std::string(buf, res.ptr);
}

void write_table(std::ostream& os, const Table& t, int precision) {
  for (const auto& c : t.comments) os << "# " << c << "\n";
  for (std::size_t k = 0; k < t.header.size(); ++k) os << (k ? "," : "") << t.header[k];
  os << "\n";
  const std::size_t n = t.rows();
  for (const auto& c : t.columns)
    if (c.size() != n) throw std::invalid_argument("write_table: ragged columns");
  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    line.clear();
    for (std::size_t k = 0; k < t.columns.size(); ++k) {
      if (k) line += ',';
      line += format_double(t.columns[k][i], precision);
    }
    os << line << "\n";
  }
}

namespace {

double parse_cell(const std::string& s) {
  std::string t = s;
  while (!t.empty() && (t.back() == '\r' || t.back() == ' ')) t.pop_back();
  while (!t.empty() && t.front() == ' ') t.erase(t.begin());
  if (t == "nan" || t == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (t == "inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw IoError("not a number: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

Table read_table(std::istream& is) {
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(line.size() > 2 ? line.substr(2) : "");
      continue;
    }
    const auto cells = split(line);
    if (!have_header) {
      t.header = cells;
      t.columns.assign(cells.size(), {});
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) throw IoError("row with " + std::to_string(cells.size()) + " cells, expected " + std::to_string(t.header.size()));
    for (std::size_t k = 0; k < cells.size(); ++k) t.columns[k].push_back(parse_cell(cells[k]));
  }
  if (!have_header) throw IoError("table has no header row");
  return t;
}

namespace {

void ensure_parent(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

}  // namespace

void write_table_file(const fs::path& path, const Table& t, int precision) {
  auto os = open_out(path);
  write_table(os, t, precision);
  if (!os) throw IoError("write failed: " + path.string());
}

Table read_table_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return read_table(is);
}

void write_json_file(const fs::path& path, const Json& j) {
  auto os = open_out(path);
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + path.string());
}

Json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  auto os = open_out(path);
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

namespace {

Json number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? Json("nan") : Json(v > 0 ? "inf" : "-inf");
}

std::string guess_name(InitialGuess g) {
  switch (g) {
    case InitialGuess::HEAVISIDE: return "heaviside";
    case InitialGuess::PRIOR_SOLUTION: return "prior";
    case InitialGuess::TANH: return "tanh";
  }
  return "?";
}

}  // namespace

Json to_json(const ModelSpec& s) {
  return Json{{"family", family_name(s.family)}, {"n", s.n}, {"lambda", s.lambda}, {"epsilon", s.epsilon}};
}

Json to_json(const Grid& g) {
  return Json{{"left", g.left()}, {"right", g.right()}, {"nodes", g.size()}, {"uniform", g.is_uniform()}};
}

Json to_json(const BvpConfig& c) {
  Json steps = Json::array();
  for (const auto& [n, l] : c.continuation_steps) steps.push_back(Json::array({n, l}));
  return Json{{"grid", to_json(c.grid)},
              {"max_newton_iters", c.max_newton_iters},
              {"newton_tol", c.newton_tol},
              {"damping",
               {{"max_halvings", c.damping.max_halvings},
                {"sufficient_decrease", c.damping.sufficient_decrease},
                {"natural_monotonicity", c.damping.natural_monotonicity}}},
              {"continuation_steps", steps},
              {"initial_guess", guess_name(c.initial_guess)},
              {"tanh_width", c.tanh_width},
              {"try_free_first", c.try_free_first},
              {"allow_pin", c.allow_pin},
              {"allow_projection", c.allow_projection},
              {"max_tail_defect", c.max_tail_defect},
              {"allow_homotopy", c.allow_homotopy},
              {"release_iters", c.release_iters},
              {"pin_search_evals", c.pin_search_evals},
              {"pin_search_step", c.pin_search_step},
              {"homotopy_step", c.homotopy_step}};
}

Json to_json(const BvpResult& r) {
  Json j{{"spec", to_json(r.profile.spec)},
         {"converged", r.converged},
         {"iterations", r.iterations},
         {"strategy", r.strategy},
         {"residual_norm", number(r.profile.residual_norm)},
         {"fd_residual", number(r.fd_residual)},
         {"slack", number(r.slack)},
         {"bc_defect", number(r.bc_defect)},
         {"shift", number(r.shift)},
         {"grid", to_json(r.profile.grid)}};
  j["failure_kind"] = r.failure_kind ? Json(failure_name(*r.failure_kind)) : Json(nullptr);
  j["failed_waypoint"] =
      r.failed_waypoint ? Json::array({r.failed_waypoint->first, r.failed_waypoint->second}) : Json(nullptr);
  return j;
}

Json to_json(const Certificate& c) {
  return Json{{"lhs", number(c.lhs)},
              {"rhs", number(c.rhs)},
              {"difference", number(std::abs(c.lhs - c.rhs))},
              {"bound", number(c.bound)},
              {"mass_balance", c.mass_balance},
              {"holds", c.holds()}};
}

Json to_json(const SimConfig& c) {
  Json snaps = c.snapshot_times;
  Json j{{"spec", to_json(c.spec)},
         {"grid", to_json(c.grid)},
         {"t_end", c.t_end},
         {"dt_initial", c.dt_initial},
         {"dt_min", c.dt_min},
         {"stepper", stepper_name(c.stepper)},
         {"initial",
          {{"kind", data_kind_name(c.initial.kind)},
           {"width", c.initial.width},
           {"tail_amplitude", c.initial.tail_amplitude},
           {"tail_rate", c.initial.tail_rate},
           {"value", c.initial.value},
           {"offset", c.initial.offset},
           {"profile_points", c.initial.profile_y.size()}}},
         {"stencil_order", c.stencil_order},
         {"explicit_safety", c.explicit_safety},
         {"newton_tol", c.newton_tol},
         {"max_newton_iters", c.max_newton_iters},
         {"snapshot_times", snaps},
         {"front_margin", c.front_margin},
         {"support_level", c.support_level},
         {"boundary", "left end held at its initial value with even reflection; right end held at its initial value "
                      "with constant extension"}};
  j["lambda0"] = c.lambda0 ? Json(*c.lambda0) : Json(nullptr);
  j["fit_window"] = c.fit_window ? Json::array({c.fit_window->first, c.fit_window->second}) : Json(nullptr);
  return j;
}

Json to_json(const SimStats& s) {
  return Json{{"steps", s.steps},
              {"rejected", s.rejected},
              {"newton_iterations", s.newton_iterations},
              {"dt_smallest", s.dt_smallest},
              {"dt_largest", s.dt_largest}};
}

Json to_json(const FrontTrace& t) {
  Json j{{"points", t.times.size()}, {"fitted", t.fitted}};
  if (!t.times.empty()) {
    j["t_last"] = t.times.back();
    j["x_front_last"] = t.x_front.back();
    if (t.times.back() > 0) j["mean_speed"] = t.x_front.back() / t.times.back();
  }
  if (t.fitted) {
    j["lambda_fit"] = t.lambda_fit;
    j["k_fit"] = t.k_fit;
    j["fit_window"] = Json::array({t.fit_window.first, t.fit_window.second});
    j["fit_residual"] = t.fit_residual;
  }
  return j;
}

Json to_json(const ConstrainedSolve& s) {
  return Json{{"residual", number(s.residual)},
              {"constraint_residual", number(s.constraint_residual)},
              {"condition", number(s.condition)},
              {"multiplier", number(s.multiplier)}};
}

Json to_json(const NullCheck& c) {
  return Json{{"relative", number(c.relative)},
              {"h_squared", c.h_squared},
              {"profile_residual", number(c.profile_residual)},
              {"boundary_truncation", number(c.boundary_truncation)}};
}

Table profile_table(const BvpResult& r) {
  const auto& p = r.profile;
  Table t;
  t.header = {"y", "F", "f", "residual"};
  t.columns = {p.grid.nodes, p.F, p.f, std::vector<double>(p.grid.size())};
  for (int i = 0; i < p.grid.size(); ++i) {
    try {
      t.columns[3][i] = tw_residual(p.spec, p, i);
    } catch (const std::out_of_range&) {
      t.columns[3][i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return t;
}

TWProfile profile_from_table(const Table& t, const ModelSpec& spec) {
  TWProfile p;
  p.spec = spec;
  p.grid.nodes = t.column("y");
  if (p.grid.size() < 2) throw IoError("profile table has fewer than two rows");
  const bool has_F = std::find(t.header.begin(), t.header.end(), "F") != t.header.end();
  if (has_F && !solved_in_f(spec.family)) {
    p.F = t.column("F");
    p.sync_from_F();
  } else {
    p.f = t.column("f");
    p.sync_from_f();
  }
  p.normalized = true;
  return p;
}

Table trace_table(const FrontTrace& tr) {
  Table t;
  t.header = {"t", "x_front", "support_right", "min_ahead"};
  t.columns = {tr.times, tr.x_front, tr.support_right, tr.min_ahead};
  return t;
}

FrontTrace trace_from_table(const Table& t) {
  FrontTrace tr;
  tr.times = t.column("t");
  tr.x_front = t.column("x_front");
  return tr;
}

}  // namespace kpp::io
