#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pfbench/trace.hpp"

namespace pfbench {

using Delta = std::int64_t;
using ClassId = std::int32_t;

// Pairs the PC of miss N with the line delta leading to miss N+1.
struct DeltaRecord {
  std::uint64_t timestep = 0;
  std::uint64_t pc = 0;
  Delta delta = 0;

  friend bool operator==(const DeltaRecord&, const DeltaRecord&) = default;
};

// Throws DataError for fewer than two misses.
std::vector<DeltaRecord> compute_deltas(std::span<const MissRecord> misses);

std::vector<Delta> delta_values(std::span<const DeltaRecord> records);

enum class VocabSide { kInput, kOutput };

// Input and output delta vocabularies built from one corpus.
//
// Output classes are the `max_output` most frequent deltas, ordered by
// descending count then ascending delta. Input classes are the output
// classes (same IDs) followed by every other delta seen at least
// `min_input_count` times, in the same order. Unknown inputs map to
// oov_input(), which has its own embedding slot; unknown output labels map to
// kOovOutput and can never be predicted.
class DeltaVocab {
 public:
  static constexpr ClassId kOovOutput = -1;

  DeltaVocab() = default;

  static DeltaVocab build(std::span<const Delta> deltas,
                          std::size_t max_output = 50000,
                          std::uint64_t min_input_count = 10);

  std::size_t num_output_classes() const { return num_output_; }
  std::size_t num_input_classes() const { return input_deltas_.size(); }
  // Input embedding table size, including the OOV slot.
  std::size_t input_table_size() const { return input_deltas_.size() + 1; }
  ClassId oov_input() const { return static_cast<ClassId>(input_deltas_.size()); }

  ClassId encode_input(Delta delta) const;
  ClassId encode_output(Delta delta) const;
  ClassId encode(Delta delta, VocabSide side) const {
    return side == VocabSide::kInput ? encode_input(delta)
                                     : encode_output(delta);
  }
  std::vector<ClassId> encode(std::span<const Delta> deltas,
                              VocabSide side) const;

  // Delta value of an input class (output classes share the prefix).
  Delta decode(ClassId id) const;

  const std::map<Delta, std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total_count() const { return total_; }
  std::size_t max_output() const { return max_output_; }
  std::uint64_t min_input_count() const { return min_input_count_; }

  // Fraction of corpus mass covered by the top-`top` output classes.
  double output_coverage(std::size_t top) const;
  double output_coverage() const { return output_coverage(num_output_); }

  // Versioned text file: header, then "delta count class_id" triples where
  // class_id is the input class ID (-1 when outside both vocabularies).
  void save(const std::string& path) const;
  static DeltaVocab load(const std::string& path);
  void export_csv(const std::string& path) const;

  friend bool operator==(const DeltaVocab& a, const DeltaVocab& b) {
    return a.counts_ == b.counts_ && a.input_deltas_ == b.input_deltas_ &&
           a.num_output_ == b.num_output_ && a.max_output_ == b.max_output_ &&
           a.min_input_count_ == b.min_input_count_;
  }

 private:
  void index();

  std::map<Delta, std::uint64_t> counts_;
  std::vector<Delta> input_deltas_;  // class ID -> delta
  std::unordered_map<Delta, ClassId> input_ids_;
  std::size_t num_output_ = 0;
  std::uint64_t total_ = 0;
  std::size_t max_output_ = 0;
  std::uint64_t min_input_count_ = 0;
};

// Frequency-ordered PC vocabulary with a trailing OOV slot.
class PcVocab {
 public:
  PcVocab() = default;
  static PcVocab build(std::span<const std::uint64_t> pcs,
                       std::uint64_t min_count = 1);
  ClassId encode(std::uint64_t pc) const;
  std::uint64_t decode(ClassId id) const { return pcs_.at(id); }
  std::size_t size() const { return pcs_.size(); }
  std::size_t table_size() const { return pcs_.size() + 1; }
  ClassId oov() const { return static_cast<ClassId>(pcs_.size()); }

  void save(const std::string& path) const;
  static PcVocab load(const std::string& path);

  friend bool operator==(const PcVocab& a, const PcVocab& b) {
    return a.pcs_ == b.pcs_;
  }

 private:
  std::vector<std::uint64_t> pcs_;
  std::unordered_map<std::uint64_t, ClassId> ids_;
};

struct CoverageStats {
  std::uint64_t num_misses = 0;
  std::uint64_t num_unique_pcs = 0;
  std::uint64_t num_unique_addrs = 0;
  std::uint64_t num_unique_deltas = 0;
  std::uint64_t addrs_for_50pct_mass = 0;
  std::uint64_t deltas_for_50pct_mass = 0;

  friend bool operator==(const CoverageStats&, const CoverageStats&) = default;
};

// Shortest prefix of the descending-sorted counts whose sum reaches
// `fraction` of the total.
std::uint64_t mass_prefix_length(std::vector<std::uint64_t> counts,
                                 double fraction = 0.5);

// Addresses are counted at line granularity.
CoverageStats coverage_stats(std::span<const MissRecord> misses,
                             std::span<const DeltaRecord> deltas);

}  // namespace pfbench
