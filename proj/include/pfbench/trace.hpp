#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pfbench {

// One dynamic memory access: the issuing instruction and the virtual byte
// address it touched.
struct TraceRecord {
  std::uint64_t pc = 0;
  std::uint64_t addr = 0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

// One cache miss. Timesteps are dense and 0-based within a stream.
struct MissRecord {
  std::uint64_t timestep = 0;
  std::uint64_t pc = 0;
  std::uint64_t addr = 0;
  std::uint64_t line_addr = 0;

  friend bool operator==(const MissRecord&, const MissRecord&) = default;
};

enum class TraceFormat { kBinary, kText };

TraceFormat parse_trace_format(const std::string& name);
std::string to_string(TraceFormat format);

// Binary layout: 8-byte magic, then little-endian (pc, addr) pairs.
inline constexpr char kBinaryTraceMagic[8] = {'P', 'F', 'T', 'R',
                                              'A', 'C', 'E', '1'};
inline constexpr std::size_t kBinaryTraceHeaderSize = 8;
inline constexpr std::size_t kBinaryTraceRecordSize = 16;
inline constexpr const char* kTextTraceHeader = "# pftrace text v1";

// Streaming reader; memory use is independent of trace length.
class TraceReader {
 public:
  TraceReader(const std::string& path, TraceFormat format);

  std::optional<TraceRecord> next();

  // Up to `max_records` records; empty once the trace is exhausted.
  std::vector<TraceRecord> read_chunk(std::size_t max_records);

 private:
  std::optional<TraceRecord> next_binary();
  std::optional<TraceRecord> next_text();

  std::string path_;
  TraceFormat format_;
  std::ifstream in_;
  std::uint64_t byte_offset_ = 0;
  std::uint64_t line_number_ = 0;
};

class TraceWriter {
 public:
  TraceWriter(const std::string& path, TraceFormat format);
  void write(const TraceRecord& record);
  void close();

 private:
  std::string path_;
  TraceFormat format_;
  std::ofstream out_;
};

std::vector<TraceRecord> read_trace(const std::string& path,
                                    TraceFormat format);

void write_trace(std::span<const TraceRecord> records, const std::string& path,
                 TraceFormat format);

// Parses one text-format line. Returns nullopt for blank and comment lines.
std::optional<TraceRecord> parse_text_record(std::string_view line,
                                             std::uint64_t line_number);

int log2_exact(std::uint64_t power_of_two);

// Treats every access as a miss, e.g. for traces that are already miss
// streams. `line_size` must be a power of two.
std::vector<MissRecord> to_miss_stream(std::span<const TraceRecord> records,
                                       std::uint64_t line_size);

std::vector<TraceRecord> to_trace_records(std::span<const MissRecord> misses);

// Miss-stream file: magic "PFMISS01", then little-endian (timestep, pc,
// addr, line_addr) records.
inline constexpr char kMissFileMagic[8] = {'P', 'F', 'M', 'I',
                                           'S', 'S', '0', '1'};
void write_misses(std::span<const MissRecord> misses, const std::string& path);
std::vector<MissRecord> read_misses(const std::string& path);

}  // namespace pfbench
