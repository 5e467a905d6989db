#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rws/error.hpp"
#include "rws/wavelet.hpp"

namespace rws::io {

/// 12 significant digits, "." decimal separator regardless of locale.
inline std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

inline std::string format_optional(const std::optional<double>& value) {
  return value ? format_number(*value) : std::string{};
}

namespace detail {

template <class T>
T to_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    return std::bit_cast<T>(bytes);
  } else {
    return value;
  }
}

template <class T>
void put(std::string& out, T value) {
  value = to_little_endian(value);
  char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.append(raw, sizeof(T));
}

template <class T>
T get(const std::string& in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return to_little_endian(value);
}

}  // namespace detail

inline constexpr char signal_magic[4] = {'R', 'W', 'S', '1'};
inline constexpr std::uint32_t signal_version = 1;
inline constexpr std::size_t signal_header_bytes = 16;

/// Encodes a signal as "rws-sig v1": magic, version, J, reserved, then
/// 2^J little-endian doubles.
inline std::string encode_signal(const Signal& signal) {
  const int J = checked_log2_length(signal.samples.size());
  std::string out(signal_magic, 4);
  detail::put<std::uint32_t>(out, signal_version);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(J));
  detail::put<std::uint32_t>(out, 0);
  out.reserve(signal_header_bytes + 8 * signal.samples.size());
  for (double x : signal.samples) detail::put<double>(out, x);
  return out;
}

inline Signal decode_signal(const std::string& bytes) {
  if (bytes.size() < signal_header_bytes || std::memcmp(bytes.data(), signal_magic, 4) != 0) {
    throw Error(ErrorKind::parse, "missing RWS1 header");
  }
  const auto version = detail::get<std::uint32_t>(bytes, 4);
  const auto J = detail::get<std::uint32_t>(bytes, 8);
  const auto reserved = detail::get<std::uint32_t>(bytes, 12);
  if (version != signal_version) {
    throw Error(ErrorKind::parse, "unsupported rws-sig version " + std::to_string(version));
  }
  if (reserved != 0) throw Error(ErrorKind::parse, "reserved header field must be 0");
  if (J < 1 || J > 40) throw Error(ErrorKind::parse, "J out of range: " + std::to_string(J));
  const std::size_t n = std::size_t{1} << J;
  if (bytes.size() != signal_header_bytes + 8 * n) {
    throw Error(ErrorKind::parse, "expected " + std::to_string(n) + " samples for J=" +
                                      std::to_string(J) + ", file size mismatch");
  }
  Signal signal;
  signal.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    signal.samples[i] = detail::get<double>(bytes, signal_header_bytes + 8 * i);
  }
  return signal;
}

/// One sample per line, no header.
inline Signal parse_signal_csv(const std::string& text) {
  Signal signal;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(line, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || line.find_first_not_of(" \t", used) != std::string::npos) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": not a number");
    }
    signal.samples.push_back(value);
  }
  checked_log2_length(signal.samples.size());
  return signal;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::io, "write failed for '" + path + "'");
}

/// Reads either format; binary is recognized by its magic.
inline Signal read_signal(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), signal_magic, 4) == 0) {
    return decode_signal(bytes);
  }
  return parse_signal_csv(bytes);
}

inline std::string signal_csv(const Signal& signal) {
  std::string out;
  for (double x : signal.samples) {
    out += format_number(x);
    out += '\n';
  }
  return out;
}

/// Splits a CSV line on commas, keeping empty fields.
inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

inline std::optional<double> parse_optional(const std::string& field) {
  const auto first = field.find_first_not_of(" \t");
  if (first == std::string::npos) return std::nullopt;
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(field.substr(first), &used);
  } catch (const std::exception&) {
    throw Error(ErrorKind::parse, "not a number: '" + field + "'");
  }
  if (field.find_first_not_of(" \t", first + used) != std::string::npos) {
    throw Error(ErrorKind::parse, "not a number: '" + field + "'");
  }
  return value;
}

}  // namespace rws::io
