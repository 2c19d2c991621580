#include "mfchaos/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "mfchaos/errors.hpp"
#include "mfchaos/numeric.hpp"

namespace mfchaos {

static_assert(std::endian::native == std::endian::little, "binary snapshots assume a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'F', 'C', 'B'};
constexpr std::uint32_t kFieldKind = 1;
constexpr std::uint32_t kTensorKind = 2;

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("truncated " + path.string());
  return v;
}

std::ofstream open_out(const std::filesystem::path& path, std::uint32_t kind) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string());
  os.write(kMagic, 4);
  put(os, kBinaryFormatVersion);
  put(os, kind);
  return os;
}

std::ifstream open_in(const std::filesystem::path& path, std::uint32_t kind) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic in " + path.string());
  }
  if (get<std::uint32_t>(is, path) != kBinaryFormatVersion) {
    throw FormatError("unsupported format version in " + path.string());
  }
  if (get<std::uint32_t>(is, path) != kind) throw FormatError("wrong snapshot kind in " + path.string());
  return is;
}

void put_values(std::ofstream& os, std::span<const double> v) {
  put<std::uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
  if (!os) throw FormatError("write failed");
}

std::vector<double> get_values(std::ifstream& is, const std::filesystem::path& path,
                               std::size_t expected) {
  const auto count = get<std::uint64_t>(is, path);
  if (count != expected) throw FormatError("value count does not match header in " + path.string());
  std::vector<double> v(count);
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)))) {
    throw FormatError("truncated " + path.string());
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in " + path.string());
  return v;
}

}  // namespace

void write_field(const std::filesystem::path& path, const DensityField& f) {
  std::ofstream os = open_out(path, kFieldKind);
  const PhaseGrid& g = f.grid();
  put<std::int32_t>(os, g.dim);
  put<std::int32_t>(os, g.mx);
  put<std::int32_t>(os, g.mv);
  put<double>(os, g.lv);
  put<double>(os, f.time());
  put_values(os, f.values());
}

DensityField read_field(const std::filesystem::path& path) {
  std::ifstream is = open_in(path, kFieldKind);
  PhaseGrid g;
  g.dim = get<std::int32_t>(is, path);
  g.mx = get<std::int32_t>(is, path);
  g.mv = get<std::int32_t>(is, path);
  g.lv = get<double>(is, path);
  const double time = get<double>(is, path);
  try {
    g.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("bad grid header: ") + e.what());
  }
  return DensityField(g, get_values(is, path, g.size()), time);
}

void write_tensor(const std::filesystem::path& path, const NTensor& t) {
  std::ofstream os = open_out(path, kTensorKind);
  put<std::int32_t>(os, t.order());
  put<std::int32_t>(os, t.sites());
  put<double>(os, t.space().cell_volume);
  put_values(os, t.values());
}

NTensor read_tensor(const std::filesystem::path& path, std::size_t cap) {
  std::ifstream is = open_in(path, kTensorKind);
  const int order = get<std::int32_t>(is, path);
  const int sites = get<std::int32_t>(is, path);
  const double volume = get<double>(is, path);
  if (order < 0 || sites < 1 || !(volume > 0.0)) throw FormatError("bad tensor header in " + path.string());
  const auto size = checked_pow(static_cast<std::size_t>(sites), order, cap);
  if (!size) throw MemoryCap("tensor in " + path.string() + " exceeds the cap");
  return NTensor(order, StateSpace{sites, volume}, get_values(is, path, *size), cap);
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns)
    : os_(path), columns_(std::move(columns)) {
  if (!os_) throw FormatError("cannot open " + path.string());
  for (std::size_t i = 0; i < columns_.size(); ++i) os_ << (i ? "," : "") << columns_[i];
  os_ << '\n';
}

void CsvWriter::row(const std::vector<Cell>& cells) {
  if (cells.size() != columns_.size()) throw FormatError("row width does not match the header");
  for (const Cell& c : cells) {
    const auto* s = std::get_if<std::string>(&c);
    if (s && s->find_first_of(",\n") != std::string::npos) throw FormatError("text cell contains a separator");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os_ << ',';
    if (const auto* n = std::get_if<long long>(&cells[i])) {
      os_ << *n;
    } else if (const auto* d = std::get_if<double>(&cells[i])) {
      os_ << format_number(*d);
    } else {
      os_ << std::get<std::string>(cells[i]);
    }
  }
  os_ << '\n';
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw FormatError("missing column " + name);
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  const std::string& s = rows.at(row).at(column(name));
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw FormatError("not a number in column " + name + ": " + s);
  }
  return v;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  const auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty csv " + path.string());
  t.columns = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.columns.size()) throw FormatError("ragged row in " + path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string run_hash(const nlohmann::json& config) {
  const std::string text = config.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
  nlohmann::json j;
  j["schema_version"] = m.schema_version;
  j["kind"] = m.kind;
  j["status"] = m.status;
  j["run_hash"] = m.run_hash;
  j["config"] = m.config;
  j["files"] = m.files;
  j["wall_time_s"] = m.wall_time_s;
  j["incidents"] = m.incidents;
  j["versions"] = {{"mfchaos", "1.0.0"}, {"binary_format", kBinaryFormatVersion}};
  std::ofstream os(dir / "manifest.json");
  if (!os) throw FormatError("cannot write manifest in " + dir.string());
  os << j.dump(2) << '\n';
}

Manifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw FormatError("missing manifest in " + dir.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  Manifest m;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    m.kind = j.at("kind").get<std::string>();
    m.status = j.value("status", std::string("complete"));
    m.run_hash = j.at("run_hash").get<std::string>();
    m.config = j.at("config");
    m.files = j.at("files").get<std::vector<std::string>>();
    m.wall_time_s = j.at("wall_time_s").get<double>();
    m.incidents = j.value("incidents", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest field: ") + e.what());
  }
  if (m.schema_version != kSchemaVersion) throw FormatError("unsupported schema_version");
  for (const std::string& f : m.files) {
    if (!std::filesystem::exists(dir / f)) throw FormatError("manifest lists missing file " + f);
  }
  return m;
}

}  // namespace mfchaos
