#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "kpp/centre_subspace.hpp"
#include "kpp/front_sim.hpp"
#include "kpp/models.hpp"
#include "kpp/tw_bvp.hpp"

namespace kpp::io {

using Json = nlohmann::ordered_json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Column-oriented numeric table with leading "# " comment lines.
struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  // Throws std::out_of_range for an unknown column.
  const std::vector<double>& column(const std::string& name) const;
};

inline constexpr int kDefaultPrecision = 17;

std::string format_double(double v, int precision = kDefaultPrecision);
void write_table(std::ostream& os, const Table& t, int precision = kDefaultPrecision);
Table read_table(std::istream& is);
// File variants throw IoError (and create the parent directory on write).
void write_table_file(const std::filesystem::path& path, const Table& t, int precision = kDefaultPrecision);
Table read_table_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

Json to_json(const ModelSpec& s);
Json to_json(const Grid& g);
Json to_json(const BvpConfig& c);
Json to_json(const BvpResult& r);
Json to_json(const Certificate& c);
Json to_json(const SimConfig& c);
Json to_json(const SimStats& s);
Json to_json(const FrontTrace& t);
Json to_json(const ConstrainedSolve& s);
Json to_json(const NullCheck& c);

// Profile tables carry columns y, F, f (as written for solve-tw).
Table profile_table(const BvpResult& r);
TWProfile profile_from_table(const Table& t, const ModelSpec& spec);
Table trace_table(const FrontTrace& t);
FrontTrace trace_from_table(const Table& t);

}  // namespace kpp::io
