#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sflex/model.hpp"

namespace sflex {

// %.17g
std::string format_double(double v);

// "# config_hash=<16 hex digits> seed=<u64>"
std::string provenance_line(std::uint64_t config_hash, std::uint64_t seed);

// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes);

void write_config_csv(std::ostream& os, const PolymerConfig& phi);
PolymerConfig read_config_csv(std::istream& is);

void write_increments_csv(std::ostream& os, const IncrementPath& path);
IncrementPath read_increments_csv(std::istream& is);

// Row-major with a header row of labels.
void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& labels);

// One row per sample, columns phi_0..phi_{N+1}. ".bin" selects the binary
// frame: "SFLX1", uint64 rows, uint64 cols, then little-endian doubles.
class SampleWriter {
 public:
  SampleWriter(const std::filesystem::path& path, int n_sites, std::uint64_t config_hash,
               std::uint64_t seed);
  ~SampleWriter();
  SampleWriter(const SampleWriter&) = delete;
  SampleWriter& operator=(const SampleWriter&) = delete;

  void write(std::span<const PolymerConfig> batch);
  void close();
  std::uint64_t rows() const noexcept { return rows_; }
  bool binary() const noexcept { return binary_; }

 private:
  std::ofstream out_;
  bool binary_;
  bool closed_ = false;
  std::uint64_t rows_ = 0;
  std::uint64_t cols_;
};

bool is_binary_sample_path(const std::filesystem::path& path);

// Reads either format back into a rows x cols matrix.
Eigen::MatrixXd read_samples(const std::filesystem::path& path);

}  // namespace sflex
