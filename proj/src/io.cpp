#include "sflex/io.hpp"

#include <array>
#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

namespace sflex {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string provenance_line(std::uint64_t config_hash, std::uint64_t seed) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "# config_hash=%016" PRIx64 " seed=%" PRIu64, config_hash, seed);
  return buf;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

// Next line that is neither empty nor a comment.
bool data_line(std::istream& is, std::string& line) {
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    return true;
  }
  return false;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw Error(ErrorKind::invalid_input, "not a number: '" + s + "'");
  }
  require(used == s.size(), ErrorKind::invalid_input, "trailing characters in '" + s + "'");
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

void write_config_csv(std::ostream& os, const PolymerConfig& phi) {
  os << "phi\n";
  for (Eigen::Index k = 0; k < phi.size(); ++k) os << format_double(phi[k]) << '\n';
}

PolymerConfig read_config_csv(std::istream& is) {
  std::string line;
  require(data_line(is, line) && line == "phi", ErrorKind::invalid_input, "expected header 'phi'");
  std::vector<double> v;
  while (data_line(is, line)) v.push_back(parse_double(line));
  require(v.size() >= 3, ErrorKind::invalid_input, "configuration needs at least three heights");
  return {Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))};
}

void write_increments_csv(std::ostream& os, const IncrementPath& path) {
  os << "index,eta\n";
  os << "xi1," << format_double(path.xi1) << '\n';
  for (Eigen::Index j = 0; j < path.etas.size(); ++j)
    os << (j + 1) << ',' << format_double(path.etas[j]) << '\n';
}

IncrementPath read_increments_csv(std::istream& is) {
  std::string line;
  require(data_line(is, line) && line == "index,eta", ErrorKind::invalid_input,
          "expected header 'index,eta'");
  require(data_line(is, line), ErrorKind::invalid_input, "missing xi1 row");
  auto cells = split(line);
  require(cells.size() == 2 && cells[0] == "xi1", ErrorKind::invalid_input, "expected 'xi1,<value>'");
  IncrementPath path;
  path.xi1 = parse_double(cells[1]);
  std::vector<double> etas;
  while (data_line(is, line)) {
    cells = split(line);
    require(cells.size() == 2, ErrorKind::invalid_input, "expected two columns");
    require(std::stol(cells[0]) == static_cast<long>(etas.size()) + 1, ErrorKind::invalid_input,
            "increment indices must run 1..N");
    etas.push_back(parse_double(cells[1]));
  }
  path.etas = Eigen::Map<Eigen::VectorXd>(etas.data(), static_cast<Eigen::Index>(etas.size()));
  return path;
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& labels) {
  require(labels.size() == static_cast<std::size_t>(m.cols()), ErrorKind::invalid_input,
          "one label per column");
  for (std::size_t j = 0; j < labels.size(); ++j) os << (j ? "," : "") << labels[j];
  os << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_double(m(i, j));
    os << '\n';
  }
}

bool is_binary_sample_path(const std::filesystem::path& path) {
  return path.extension() == ".bin";
}

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  is.read(reinterpret_cast<char*>(b.data()), 8);
  require(is.good(), ErrorKind::invalid_input, "truncated binary sample file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

constexpr char kMagic[5] = {'S', 'F', 'L', 'X', '1'};

}  // namespace

SampleWriter::SampleWriter(const std::filesystem::path& path, int n_sites,
                           std::uint64_t config_hash, std::uint64_t seed)
    : binary_(is_binary_sample_path(path)), cols_(static_cast<std::uint64_t>(n_sites) + 2) {
  out_.open(path, std::ios::binary | std::ios::trunc);
  require(out_.good(), ErrorKind::invalid_input, "cannot open " + path.string());
  if (binary_) {
    out_.write(kMagic, 5);
    put_u64(out_, 0);  // patched on close
    put_u64(out_, cols_);
    return;
  }
  out_ << provenance_line(config_hash, seed) << '\n';
  for (std::uint64_t k = 0; k < cols_; ++k) out_ << (k ? "," : "") << "phi_" << k;
  out_ << '\n';
}

SampleWriter::~SampleWriter() {
  try {
    close();
  } catch (...) {
  }
}

void SampleWriter::write(std::span<const PolymerConfig> batch) {
  require(!closed_, ErrorKind::invalid_input, "writer already closed");
  std::string text;
  for (const auto& phi : batch) {
    require(static_cast<std::uint64_t>(phi.size()) == cols_, ErrorKind::invalid_input,
            "sample width does not match the writer");
    if (binary_) {
      for (Eigen::Index k = 0; k < phi.size(); ++k) {
        const auto bits = std::bit_cast<std::uint64_t>(phi[k]);
        for (int i = 0; i < 8; ++i) text += static_cast<char>((bits >> (8 * i)) & 0xff);
      }
    } else {
      for (Eigen::Index k = 0; k < phi.size(); ++k) {
        if (k) text += ',';
        text += format_double(phi[k]);
      }
      text += '\n';
    }
    ++rows_;
  }
  out_.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void SampleWriter::close() {
  if (closed_) return;
  closed_ = true;
  if (binary_) {
    out_.seekp(5);
    put_u64(out_, rows_);
  }
  out_.close();
}

Eigen::MatrixXd read_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::invalid_input, "cannot open " + path.string());
  if (is_binary_sample_path(path)) {
    char magic[5];
    in.read(magic, 5);
    require(in.good() && std::memcmp(magic, kMagic, 5) == 0, ErrorKind::invalid_input,
            "missing SFLX1 magic");
    const std::uint64_t rows = get_u64(in), cols = get_u64(in);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t i = 0; i < rows; ++i)
      for (std::uint64_t j = 0; j < cols; ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::bit_cast<double>(get_u64(in));
    return m;
  }
  std::string line;
  require(data_line(in, line), ErrorKind::invalid_input, "missing header");
  const std::size_t cols = split(line).size();
  std::vector<double> values;
  std::size_t rows = 0;
  while (data_line(in, line)) {
    const auto cells = split(line);
    require(cells.size() == cols, ErrorKind::invalid_input, "ragged sample row");
    for (const auto& c : cells) values.push_back(parse_double(c));
    ++rows;
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * cols + j];
  return m;
}

}  // namespace sflex
