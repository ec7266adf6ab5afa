#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "kpp/io.hpp"

using namespace kpp;
namespace fs = std::filesystem;

TEST_CASE("tables round-trip at full precision") {
  io::Table t;
  t.comments = {"a comment"};
  t.header = {"x", "y"};
  t.columns = {{0.1, 1.0 / 3.0, -2e-300}, {std::nan(""), 1e300, -0.0}};
  std::stringstream ss;
  io::write_table(ss, t);
  const auto back = io::read_table(ss);
  CHECK(back.comments == t.comments);
  CHECK(back.header == t.header);
  REQUIRE(back.rows() == 3);
  CHECK(back.column("x")[1] == 1.0 / 3.0);
  CHECK(back.column("x")[2] == -2e-300);
  CHECK(std::isnan(back.column("y")[0]));
  CHECK_THROWS_AS(back.column("z"), std::out_of_range);
}

TEST_CASE("number formatting") {
  CHECK(io::format_double(0.1) == "0.10000000000000001");
  CHECK(io::format_double(0.1, 6) == "0.1");
  CHECK(io::format_double(INFINITY) == "inf");
}

TEST_CASE("malformed tables raise I/O errors") {
  std::stringstream ragged("a,b\n1,2\n3\n");
  CHECK_THROWS_AS(io::read_table(ragged), io::IoError);
  std::stringstream text("a\nfoo\n");
  CHECK_THROWS_AS(io::read_table(text), io::IoError);
  CHECK_THROWS_AS(io::read_table_file("/nonexistent/x.csv"), io::IoError);
}

TEST_CASE("files are written into fresh directories") {
  const fs::path dir = fs::temp_directory_path() / "kppwave_io_test" / "nested";
  fs::remove_all(dir.parent_path());
  io::Table t;
  t.header = {"v"};
  t.columns = {{1, 2}};
  io::write_table_file(dir / "t.csv", t);
  io::write_json_file(dir / "t.json", io::Json{{"k", 1}});
  CHECK(io::read_table_file(dir / "t.csv").rows() == 2);
  CHECK(io::read_json_file(dir / "t.json")["k"] == 1);
  fs::remove_all(dir.parent_path());
}

TEST_CASE("trace tables round-trip") {
  FrontTrace tr;
  tr.times = {1, 2};
  tr.x_front = {3, 5};
  tr.support_right = {4, 6};
  tr.min_ahead = {0, -1e-3};
  const auto back = io::trace_from_table(io::trace_table(tr));
  CHECK(back.times == tr.times);
  CHECK(back.x_front == tr.x_front);
}
