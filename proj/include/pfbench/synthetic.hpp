#pragma once

// Synthetic access-trace generators with known ground-truth delta structure.
//
// All generators are pure functions of their spec (including the seed). PCs
// are `pc_base + 4 * i` for the i-th static instruction. Deltas below are in
// bytes unless stated otherwise.
//
//   stride          One PC. addr_n = start + n * strides[0]. Every delta
//                   equals strides[0].
//   multi-stride    One stream per entry of `strides`, stream s rooted at
//                   start + s * stream_spacing with PC i = s. Each access
//                   picks a stream uniformly at random. Per-PC deltas are
//                   exactly that stream's stride.
//   pc-correlated   One PC per entry of `pc_delta_cycles`. `schedule` picks
//                   the issuing PC (iid uniform, round-robin, or round-robin
//                   bursts of `burst_length`). With layout=chained a single
//                   cursor is shared and the delta from an access to the
//                   next one is the issuing PC's next cycle element. With
//                   layout=per_pc every PC owns a cursor rooted at
//                   start + p * stream_spacing and the deltas between that
//                   PC's consecutive accesses walk its cycle.
//   region-hopping  One PC and cursor per region. Before each access the
//                   generator moves to a uniformly chosen other region with
//                   probability `hop_probability`, then advances that
//                   region's cursor by a uniform draw from its delta set and
//                   emits it. Intra-region deltas are therefore exactly the
//                   region's configured set.
//   linked-list     One PC. `node_count` nodes placed on distinct random
//                   slots of a heap of `heap_slots` slots of `node_size`
//                   bytes, visited in one fixed random order, repeatedly. The
//                   delta sequence is periodic with period node_count.
//   pc-markov       `num_deltas` distinct nonzero line deltas drawn from
//                   [-max_delta_lines, max_delta_lines] and `num_pcs` PCs,
//                   each owning a random permutation of the delta set. The
//                   PC is drawn iid uniform per access, and the delta that
//                   follows an access is perm[pc](previous delta). The next
//                   delta is thus a deterministic function of (PC, last
//                   delta); every delta has at most num_pcs successors.
//                   `start` must be at least length * max_delta_lines *
//                   line_size away from both ends of the address space.

#include <cstdint>
#include <string>
#include <vector>

#include "pfbench/trace.hpp"

namespace pfbench {

enum class SyntheticKind {
  kStride,
  kMultiStride,
  kPcCorrelated,
  kRegionHopping,
  kLinkedList,
  kPcMarkov,
};

enum class PcLayout { kChained, kPerPc };
enum class PcSchedule { kRandom, kRoundRobin, kBurst };

struct RegionSpec {
  std::uint64_t base = 0;
  std::vector<std::int64_t> deltas;
};

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kStride;
  std::uint64_t length = 0;
  std::uint64_t seed = 0;
  std::uint64_t pc_base = 0x400000;
  std::uint64_t start = 0;

  // stride, multi-stride
  std::vector<std::int64_t> strides;
  std::uint64_t stream_spacing = std::uint64_t{1} << 32;

  // pc-correlated
  std::vector<std::vector<std::int64_t>> pc_delta_cycles;
  PcLayout layout = PcLayout::kChained;
  PcSchedule schedule = PcSchedule::kRandom;
  std::uint64_t burst_length = 32;

  // region-hopping
  std::vector<RegionSpec> regions;
  double hop_probability = 0.1;

  // linked-list
  std::uint64_t node_count = 1024;
  std::uint64_t node_size = 64;
  std::uint64_t heap_slots = 1 << 20;
  std::uint64_t heap_base = std::uint64_t{1} << 36;

  // pc-markov
  std::uint64_t num_deltas = 1000;
  std::uint64_t num_pcs = 4;
  std::int64_t max_delta_lines = 4096;
  std::uint64_t line_size = 64;
};

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string to_string(SyntheticKind kind);

// Throws ConfigError on invalid kind-specific parameters.
void validate(const SyntheticSpec& spec);

std::vector<TraceRecord> generate_synthetic(const SyntheticSpec& spec);

// The delta set of a pc-markov spec, in line units, indexed as the
// generator's permutations index it.
std::vector<std::int64_t> pc_markov_delta_values(const SyntheticSpec& spec);

}  // namespace pfbench
