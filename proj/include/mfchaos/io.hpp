#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mfchaos/correlation.hpp"
#include "mfchaos/fields.hpp"

namespace mfchaos {

// Flat binary snapshots, little-endian:
//   char[4] "MFCB", u32 format version, u32 kind (1 field, 2 tensor)
//   field:  i32 dim, i32 mx, i32 mv, f64 lv, f64 time
//   tensor: i32 order, i32 sites, f64 cell_volume
//   u64 count, then count f64 values in storage order (slot 0 / axis 0 slowest).
inline constexpr std::uint32_t kBinaryFormatVersion = 1;

void write_field(const std::filesystem::path& path, const DensityField& f);
DensityField read_field(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const NTensor& t);
NTensor read_tensor(const std::filesystem::path& path, std::size_t cap = kDefaultTensorCap);

// Shortest round-trip decimal form, so identical runs give identical bytes.
std::string format_number(double v);

// Comma-separated output with a fixed header. Text cells must not contain
// commas or newlines; they are rejected rather than quoted.
class CsvWriter {
 public:
  using Cell = std::variant<long long, double, std::string>;

  CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns);

  void row(const std::vector<Cell>& cells);
  void flush() { os_.flush(); }
  [[nodiscard]] const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::ofstream os_;
  std::vector<std::string> columns_;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  // Throws FormatError when the column is missing.
  [[nodiscard]] std::size_t column(const std::string& name) const;
  [[nodiscard]] double number(std::size_t row, const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

inline constexpr int kSchemaVersion = 1;

struct Manifest {
  int schema_version = kSchemaVersion;
  std::string kind;
  std::string status = "complete";  // "partial" while a run is still writing
  std::string run_hash;
  nlohmann::json config;
  std::vector<std::string> files;  // relative to the run directory
  double wall_time_s = 0.0;
  nlohmann::json incidents = nlohmann::json::object();
};

// SHA-1 of the compact dump of `config`, hex encoded.
std::string run_hash(const nlohmann::json& config);

void write_manifest(const std::filesystem::path& dir, const Manifest& m);
// Throws FormatError on an unsupported schema_version or a listed file that is missing.
Manifest read_manifest(const std::filesystem::path& dir);

}  // namespace mfchaos
