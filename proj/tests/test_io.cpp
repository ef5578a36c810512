#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sflex/io.hpp"

using namespace sflex;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sflex_io_test";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<PolymerConfig> rows() {
  std::vector<PolymerConfig> v;
  for (int i = 0; i < 3; ++i) {
    PolymerConfig phi{Eigen::VectorXd::LinSpaced(6, 0.0, 1.0 / 3.0 + i)};
    phi.heights[2] = -1e-300;
    v.push_back(phi);
  }
  return v;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("doubles print round-trip") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23})
      CHECK(std::stod(format_double(x)) == x);
    CHECK(provenance_line(0xabc, 7) == "# config_hash=0000000000000abc seed=7");
  }

  TEST_CASE("configuration and increment CSV") {
    const PolymerConfig phi{(Eigen::VectorXd(5) << 0, 0.1, 0.25, 1.0 / 7, -3).finished()};
    std::stringstream s;
    write_config_csv(s, phi);
    CHECK(read_config_csv(s).heights == phi.heights);
    IncrementPath path;
    path.xi1 = 0.3;
    path.etas = Eigen::VectorXd::LinSpaced(4, -1.0, 2.0 / 3.0);
    std::stringstream t;
    write_increments_csv(t, path);
    const IncrementPath back = read_increments_csv(t);
    CHECK(back.xi1 == path.xi1);
    CHECK(back.etas == path.etas);
    std::stringstream bad("phi\n1\nx\n");
    CHECK_THROWS_AS(read_config_csv(bad), Error);
  }

  TEST_CASE("sample files in both formats") {
    const auto v = rows();
    for (const char* name : {"s.csv", "s.bin"}) {
      const fs::path path = scratch(name);
      {
        SampleWriter w(path, 4, 42, 9);
        w.write(v);
        CHECK(w.rows() == 3);
      }
      const Eigen::MatrixXd m = read_samples(path);
      REQUIRE(m.rows() == 3);
      REQUIRE(m.cols() == 6);
      for (int i = 0; i < 3; ++i) CHECK(m.row(i).transpose() == v[static_cast<std::size_t>(i)].heights);
    }
    std::ifstream csv(scratch("s.csv"));
    std::string first;
    std::getline(csv, first);
    CHECK(first == provenance_line(42, 9));
    std::ifstream bin(scratch("s.bin"), std::ios::binary);
    char magic[5];
    bin.read(magic, 5);
    CHECK(std::string(magic, 5) == "SFLX1");
    CHECK(fs::file_size(scratch("s.bin")) == 5 + 16 + 3 * 6 * 8);
  }

  TEST_CASE("writer rejects mismatched widths") {
    SampleWriter w(scratch("w.csv"), 3, 0, 0);
    const auto v = rows();
    CHECK_THROWS_AS(w.write(v), Error);
  }
}
