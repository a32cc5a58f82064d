#include "pfbench/trace.hpp"

#include <bit>
#include <charconv>
#include <cstring>

#include <fmt/format.h>

#include "pfbench/error.hpp"

namespace pfbench {
namespace {

void store_le64(std::uint64_t value, char* out) {
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
}

std::uint64_t load_le64(const char* in) {
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) {
    value |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i]))
             << (8 * i);
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

std::optional<std::uint64_t> parse_hex(std::string_view s) {
  s = trim(s);
  if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X')) {
    return std::nullopt;
  }
  s.remove_prefix(2);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value,
                                         16);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

TraceFormat parse_trace_format(const std::string& name) {
  if (name == "binary") return TraceFormat::kBinary;
  if (name == "text") return TraceFormat::kText;
  throw ConfigError(fmt::format("unknown trace format '{}'", name));
}

std::string to_string(TraceFormat format) {
  return format == TraceFormat::kBinary ? "binary" : "text";
}

std::optional<TraceRecord> parse_text_record(std::string_view line,
                                             std::uint64_t line_number) {
  const std::size_t hash = line.find('#');
  if (hash != std::string_view::npos) line = line.substr(0, hash);
  line = trim(line);
  if (line.empty()) return std::nullopt;
  const std::size_t comma = line.find(',');
  if (comma == std::string_view::npos) {
    throw ParseError("expected 'pc,addr'", line_number,
                     ParseError::OffsetKind::kLine);
  }
  const auto pc = parse_hex(line.substr(0, comma));
  const auto addr = parse_hex(line.substr(comma + 1));
  if (!pc || !addr) {
    throw ParseError("malformed hex field", line_number,
                     ParseError::OffsetKind::kLine);
  }
  return TraceRecord{*pc, *addr};
}

TraceReader::TraceReader(const std::string& path, TraceFormat format)
    : path_(path), format_(format), in_(path, std::ios::binary) {
  if (!in_) throw IoError(fmt::format("cannot open trace '{}'", path));
  if (format_ == TraceFormat::kBinary) {
    char magic[kBinaryTraceHeaderSize];
    in_.read(magic, sizeof(magic));
    if (in_.gcount() != static_cast<std::streamsize>(sizeof(magic)) ||
        std::memcmp(magic, kBinaryTraceMagic, sizeof(magic)) != 0) {
      throw FormatError(
          fmt::format("'{}' is not a binary trace (bad magic header)", path));
    }
    byte_offset_ = kBinaryTraceHeaderSize;
  }
}

std::optional<TraceRecord> TraceReader::next() {
  return format_ == TraceFormat::kBinary ? next_binary() : next_text();
}

std::optional<TraceRecord> TraceReader::next_binary() {
  char buf[kBinaryTraceRecordSize];
  in_.read(buf, sizeof(buf));
  const auto got = in_.gcount();
  if (got == 0) return std::nullopt;
  if (got != static_cast<std::streamsize>(sizeof(buf))) {
    throw ParseError(fmt::format("truncated record in '{}'", path_),
                     byte_offset_, ParseError::OffsetKind::kByte);
  }
  byte_offset_ += sizeof(buf);
  return TraceRecord{load_le64(buf), load_le64(buf + 8)};
}

std::optional<TraceRecord> TraceReader::next_text() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_number_;
    if (auto record = parse_text_record(line, line_number_)) return record;
  }
  return std::nullopt;
}

std::vector<TraceRecord> TraceReader::read_chunk(std::size_t max_records) {
  std::vector<TraceRecord> out;
  out.reserve(max_records);
  while (out.size() < max_records) {
    auto record = next();
    if (!record) break;
    out.push_back(*record);
  }
  return out;
}

TraceWriter::TraceWriter(const std::string& path, TraceFormat format)
    : path_(path), format_(format), out_(path, std::ios::binary) {
  if (!out_) throw IoError(fmt::format("cannot create trace '{}'", path));
  if (format_ == TraceFormat::kBinary) {
    out_.write(kBinaryTraceMagic, sizeof(kBinaryTraceMagic));
  } else {
    out_ << kTextTraceHeader << '\n';
  }
}

void TraceWriter::write(const TraceRecord& record) {
  if (format_ == TraceFormat::kBinary) {
    char buf[kBinaryTraceRecordSize];
    store_le64(record.pc, buf);
    store_le64(record.addr, buf + 8);
    out_.write(buf, sizeof(buf));
  } else {
    out_ << fmt::format("{:#x},{:#x}\n", record.pc, record.addr);
  }
  if (!out_) throw IoError(fmt::format("write failed on '{}'", path_));
}

void TraceWriter::close() {
  out_.close();
  if (!out_) throw IoError(fmt::format("close failed on '{}'", path_));
}

std::vector<TraceRecord> read_trace(const std::string& path,
                                    TraceFormat format) {
  TraceReader reader(path, format);
  std::vector<TraceRecord> records;
  while (auto record = reader.next()) records.push_back(*record);
  return records;
}

void write_trace(std::span<const TraceRecord> records, const std::string& path,
                 TraceFormat format) {
  TraceWriter writer(path, format);
  for (const auto& record : records) writer.write(record);
  writer.close();
}

int log2_exact(std::uint64_t power_of_two) {
  if (!std::has_single_bit(power_of_two)) {
    throw ConfigError(
        fmt::format("{} is not a power of two", power_of_two));
  }
  return std::countr_zero(power_of_two);
}

std::vector<MissRecord> to_miss_stream(std::span<const TraceRecord> records,
                                       std::uint64_t line_size) {
  const int shift = log2_exact(line_size);
  std::vector<MissRecord> misses;
  misses.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    misses.push_back({i, records[i].pc, records[i].addr,
                      records[i].addr >> shift});
  }
  return misses;
}

std::vector<TraceRecord> to_trace_records(std::span<const MissRecord> misses) {
  std::vector<TraceRecord> records;
  records.reserve(misses.size());
  for (const auto& m : misses) records.push_back({m.pc, m.addr});
  return records;
}

void write_misses(std::span<const MissRecord> misses, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path));
  out.write(kMissFileMagic, 8);
  char buf[32];
  for (const auto& m : misses) {
    store_le64(m.timestep, buf);
    store_le64(m.pc, buf + 8);
    store_le64(m.addr, buf + 16);
    store_le64(m.line_addr, buf + 24);
    out.write(buf, 32);
  }
  if (!out) throw IoError(fmt::format("write to {} failed", path));
}

std::vector<MissRecord> read_misses(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path));
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMissFileMagic)) {
    throw FormatError(fmt::format("{} is not a miss file", path));
  }
  std::vector<MissRecord> out;
  char buf[32];
  std::uint64_t offset = 8;
  while (true) {
    in.read(buf, 32);
    const auto got = in.gcount();
    if (got == 0) break;
    if (got != 32) throw ParseError("truncated miss record", offset,
                                    ParseError::OffsetKind::kByte);
    out.push_back({load_le64(buf), load_le64(buf + 8), load_le64(buf + 16),
                   load_le64(buf + 24)});
    offset += 32;
  }
  return out;
}

}  // namespace pfbench
