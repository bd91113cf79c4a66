#pragma once

#include <charconv>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cvdist/errors.hpp"
#include "cvdist/montecarlo.hpp"

namespace cvdist {

// ---------------------------------------------------------------------------
// Numeric formatting. Record files use shortest-round-trip doubles (exact
// value recovery on re-read); CSV tables use 17 significant digits.
// ---------------------------------------------------------------------------

inline std::string format_shortest(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

inline std::string format_g17(double x) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
  double value = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw FormatError("malformed number '" + std::string(s) + "'");
  }
  return value;
}

// ---------------------------------------------------------------------------
// Record files: newline-delimited text with a fenced header.
//
//   #cvdist-records v1
//   #units shot-noise
//   #columns x_A p_A x_B p_B x_t p_t component
//   #source <one line of free-form metadata, may be empty>
//   #end-header
//   <rows: six shortest-round-trip reals and one integer, space separated>
// ---------------------------------------------------------------------------

struct RecordFileHeader {
  std::string version = "v1";
  std::string units = "shot-noise";
  std::string columns = "x_A p_A x_B p_B x_t p_t component";
  std::string source;

  bool compatible_with(const RecordFileHeader& other) const {
    return version == other.version && units == other.units && columns == other.columns;
  }
};

namespace detail {

inline std::string_view expect_prefix(std::string_view line, std::string_view prefix,
                                      const char* what) {
  if (!line.starts_with(prefix)) {
    throw FormatError(std::string("record file: expected ") + what);
  }
  return line.substr(prefix.size());
}

}  // namespace detail

/// Writes records from any source with `bool next(QuadratureRecord&)`.
template <class Source>
  requires requires(Source s, QuadratureRecord r) {
    { s.next(r) } -> std::convertible_to<bool>;
  }
void write_records(const std::filesystem::path& path, Source&& source,
                   const std::string& source_metadata = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FormatError("cannot open record file for writing: " + path.string());
  }
  RecordFileHeader hdr;
  out << "#cvdist-records " << hdr.version << '\n'
      << "#units " << hdr.units << '\n'
      << "#columns " << hdr.columns << '\n'
      << "#source " << source_metadata << '\n'
      << "#end-header\n";
  std::string buf;
  buf.reserve(1 << 20);
  QuadratureRecord rec;
  while (source.next(rec)) {
    buf += format_shortest(rec.x_a);
    buf += ' ';
    buf += format_shortest(rec.p_a);
    buf += ' ';
    buf += format_shortest(rec.x_b);
    buf += ' ';
    buf += format_shortest(rec.p_b);
    buf += ' ';
    buf += format_shortest(rec.x_t);
    buf += ' ';
    buf += format_shortest(rec.p_t);
    buf += ' ';
    buf += std::to_string(rec.component);
    buf += '\n';
    if (buf.size() > (1 << 20) - 256) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) {
    throw FormatError("write failed: " + path.string());
  }
}

inline void write_records(const std::filesystem::path& path,
                          const std::vector<QuadratureRecord>& records,
                          const std::string& source_metadata = {}) {
  write_records(path, VectorRecordSource{&records}, source_metadata);
}

/// Streams records back from a file; models the record-source concept.
class FileRecordReader {
 public:
  explicit FileRecordReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) {
      throw FormatError("cannot open record file: " + path.string());
    }
    std::string line;
    auto read_line = [&]() {
      if (!std::getline(in_, line)) {
        throw FormatError("record file: truncated header in " + path.string());
      }
      return std::string_view(line);
    };
    const auto version = detail::expect_prefix(read_line(), "#cvdist-records ", "version line");
    if (version != "v1") {
      throw FormatError("record file: unsupported version '" + std::string(version) + "'");
    }
    header_.version = version;
    header_.units = detail::expect_prefix(read_line(), "#units ", "units line");
    header_.columns = detail::expect_prefix(read_line(), "#columns ", "columns line");
    header_.source = detail::expect_prefix(read_line(), "#source ", "source line");
    detail::expect_prefix(read_line(), "#end-header", "header fence");
    RecordFileHeader expected;
    if (header_.units != expected.units || header_.columns != expected.columns) {
      throw UnitsMismatch("record file declares incompatible units or columns");
    }
  }

  const RecordFileHeader& header() const { return header_; }

  bool next(QuadratureRecord& rec) {
    std::string line;
    if (!std::getline(in_, line)) return false;
    parse_row(line, rec);
    return true;
  }

  static void parse_row(std::string_view line, QuadratureRecord& rec) {
    double* fields[6] = {&rec.x_a, &rec.p_a, &rec.x_b, &rec.p_b, &rec.x_t, &rec.p_t};
    std::size_t pos = 0;
    auto next_token = [&]() {
      while (pos < line.size() && line[pos] == ' ') ++pos;
      const std::size_t start = pos;
      while (pos < line.size() && line[pos] != ' ') ++pos;
      if (start == pos) {
        throw FormatError("record file: short row");
      }
      return line.substr(start, pos - start);
    };
    for (auto* f : fields) {
      *f = parse_double(next_token());
      if (!std::isfinite(*f)) {
        throw FormatError("record file: non-finite value");
      }
    }
    const auto tok = next_token();
    int component = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), component);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw FormatError("record file: malformed component index");
    }
    rec.component = component;
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos != line.size()) {
      throw FormatError("record file: too many columns");
    }
  }

 private:
  std::ifstream in_;
  RecordFileHeader header_;
};

/// Loads a whole record file into memory.
inline std::vector<QuadratureRecord> read_records(const std::filesystem::path& path) {
  FileRecordReader reader(path);
  std::vector<QuadratureRecord> out;
  QuadratureRecord rec;
  while (reader.next(rec)) out.push_back(rec);
  return out;
}

}  // namespace cvdist
