#include "pfbench/synthetic.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "pfbench/error.hpp"
#include "pfbench/random.hpp"

namespace pfbench {
namespace {

constexpr std::uint64_t kPcStride = 4;

std::uint64_t advance(std::uint64_t addr, std::int64_t delta) {
  return addr + static_cast<std::uint64_t>(delta);
}

std::int64_t max_abs(const std::vector<std::int64_t>& v) {
  std::int64_t m = 0;
  for (auto d : v) m = std::max(m, d < 0 ? -d : d);
  return m;
}

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(fmt::format("synthetic spec: {}", what));
}

std::vector<TraceRecord> gen_stride(const SyntheticSpec& s) {
  std::vector<TraceRecord> out;
  out.reserve(s.length);
  std::uint64_t addr = s.start;
  for (std::uint64_t n = 0; n < s.length; ++n) {
    out.push_back({s.pc_base, addr});
    addr = advance(addr, s.strides[0]);
  }
  return out;
}

std::vector<TraceRecord> gen_multi_stride(const SyntheticSpec& s) {
  Rng rng(s.seed);
  std::vector<std::uint64_t> cursor(s.strides.size());
  for (std::size_t i = 0; i < cursor.size(); ++i) {
    cursor[i] = s.start + i * s.stream_spacing;
  }
  std::vector<TraceRecord> out;
  out.reserve(s.length);
  for (std::uint64_t n = 0; n < s.length; ++n) {
    const auto i = rng.uniform(cursor.size());
    out.push_back({s.pc_base + kPcStride * i, cursor[i]});
    cursor[i] = advance(cursor[i], s.strides[i]);
  }
  return out;
}

std::vector<TraceRecord> gen_pc_correlated(const SyntheticSpec& s) {
  Rng rng(s.seed);
  const std::size_t num_pcs = s.pc_delta_cycles.size();
  std::vector<std::size_t> phase(num_pcs, 0);
  std::vector<std::uint64_t> cursor(num_pcs);
  for (std::size_t p = 0; p < num_pcs; ++p) {
    cursor[p] = s.layout == PcLayout::kChained ? s.start
                                               : s.start + p * s.stream_spacing;
  }
  std::uint64_t shared = s.start;
  std::vector<TraceRecord> out;
  out.reserve(s.length);
  for (std::uint64_t n = 0; n < s.length; ++n) {
    std::size_t p = 0;
    switch (s.schedule) {
      case PcSchedule::kRandom:
        p = rng.uniform(num_pcs);
        break;
      case PcSchedule::kRoundRobin:
        p = n % num_pcs;
        break;
      case PcSchedule::kBurst:
        p = (n / s.burst_length) % num_pcs;
        break;
    }
    const auto& cycle = s.pc_delta_cycles[p];
    const std::int64_t delta = cycle[phase[p]];
    phase[p] = (phase[p] + 1) % cycle.size();
    const std::uint64_t pc = s.pc_base + kPcStride * p;
    if (s.layout == PcLayout::kChained) {
      out.push_back({pc, shared});
      shared = advance(shared, delta);
    } else {
      out.push_back({pc, cursor[p]});
      cursor[p] = advance(cursor[p], delta);
    }
  }
  return out;
}

std::vector<TraceRecord> gen_region_hopping(const SyntheticSpec& s) {
  Rng rng(s.seed);
  const std::size_t num_regions = s.regions.size();
  std::vector<std::uint64_t> cursor(num_regions);
  for (std::size_t r = 0; r < num_regions; ++r) cursor[r] = s.regions[r].base;
  std::size_t region = 0;
  std::vector<TraceRecord> out;
  out.reserve(s.length);
  for (std::uint64_t n = 0; n < s.length; ++n) {
    if (num_regions > 1 && rng.bernoulli(s.hop_probability)) {
      const auto other = rng.uniform(num_regions - 1);
      region = other >= region ? other + 1 : other;
    }
    const auto& deltas = s.regions[region].deltas;
    cursor[region] = advance(cursor[region], deltas[rng.uniform(deltas.size())]);
    out.push_back({s.pc_base + kPcStride * region, cursor[region]});
  }
  return out;
}

std::vector<TraceRecord> gen_linked_list(const SyntheticSpec& s) {
  Rng rng(s.seed);
  // Partial Fisher-Yates picks node_count distinct slots in random order.
  std::vector<std::uint64_t> slots;
  std::unordered_map<std::uint64_t, std::uint64_t> swapped;
  slots.reserve(s.node_count);
  for (std::uint64_t i = 0; i < s.node_count; ++i) {
    const std::uint64_t j = i + rng.uniform(s.heap_slots - i);
    const auto at = [&](std::uint64_t k) {
      auto it = swapped.find(k);
      return it == swapped.end() ? k : it->second;
    };
    const std::uint64_t vi = at(i);
    const std::uint64_t vj = at(j);
    swapped[j] = vi;
    slots.push_back(vj);
  }
  std::vector<TraceRecord> out;
  out.reserve(s.length);
  for (std::uint64_t n = 0; n < s.length; ++n) {
    out.push_back({s.pc_base, s.heap_base + slots[n % s.node_count] * s.node_size});
  }
  return out;
}

std::vector<std::int64_t> draw_markov_deltas(const SyntheticSpec& s, Rng& rng) {
  std::vector<std::int64_t> values;
  std::unordered_set<std::int64_t> seen;
  const std::uint64_t span = 2 * static_cast<std::uint64_t>(s.max_delta_lines);
  while (values.size() < s.num_deltas) {
    // Map [0, span) onto [-max, -1] U [1, max].
    std::int64_t v = static_cast<std::int64_t>(rng.uniform(span)) -
                     s.max_delta_lines;
    if (v >= 0) ++v;
    if (seen.insert(v).second) values.push_back(v);
  }
  return values;
}

std::vector<TraceRecord> gen_pc_markov(const SyntheticSpec& s) {
  Rng rng(s.seed);
  const auto values = draw_markov_deltas(s, rng);
  std::vector<std::vector<std::uint32_t>> successor(s.num_pcs);
  for (auto& perm : successor) {
    perm.resize(s.num_deltas);
    std::iota(perm.begin(), perm.end(), 0u);
    rng.shuffle(std::span<std::uint32_t>(perm));
  }
  std::vector<TraceRecord> out;
  out.reserve(s.length);
  std::uint64_t addr = s.start;
  std::uint32_t last = 0;
  for (std::uint64_t n = 0; n < s.length; ++n) {
    const auto p = rng.uniform(s.num_pcs);
    last = successor[p][last];
    out.push_back({s.pc_base + kPcStride * p, addr});
    addr = advance(addr, values[last] * static_cast<std::int64_t>(s.line_size));
  }
  return out;
}

}  // namespace

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "stride") return SyntheticKind::kStride;
  if (name == "multi-stride") return SyntheticKind::kMultiStride;
  if (name == "pc-correlated") return SyntheticKind::kPcCorrelated;
  if (name == "region-hopping") return SyntheticKind::kRegionHopping;
  if (name == "linked-list") return SyntheticKind::kLinkedList;
  if (name == "pc-markov") return SyntheticKind::kPcMarkov;
  throw ConfigError(fmt::format("unknown synthetic kind '{}'", name));
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::kStride: return "stride";
    case SyntheticKind::kMultiStride: return "multi-stride";
    case SyntheticKind::kPcCorrelated: return "pc-correlated";
    case SyntheticKind::kRegionHopping: return "region-hopping";
    case SyntheticKind::kLinkedList: return "linked-list";
    case SyntheticKind::kPcMarkov: return "pc-markov";
  }
  return "?";
}

void validate(const SyntheticSpec& s) {
  switch (s.kind) {
    case SyntheticKind::kStride:
      require(s.strides.size() == 1, "stride needs exactly one stride");
      require(s.strides[0] != 0, "stride must be nonzero");
      break;
    case SyntheticKind::kMultiStride:
      require(!s.strides.empty(), "multi-stride needs at least one stride");
      require(s.stream_spacing > 0, "stream_spacing must be positive");
      break;
    case SyntheticKind::kPcCorrelated:
      require(!s.pc_delta_cycles.empty(), "pc-correlated needs delta cycles");
      for (const auto& cycle : s.pc_delta_cycles) {
        require(!cycle.empty(), "empty delta cycle");
      }
      require(s.schedule != PcSchedule::kBurst || s.burst_length > 0,
              "burst_length must be positive");
      break;
    case SyntheticKind::kRegionHopping: {
      require(!s.regions.empty(), "region-hopping needs regions");
      require(s.hop_probability >= 0.0 && s.hop_probability <= 1.0,
              "hop_probability must be in [0, 1]");
      for (const auto& r : s.regions) {
        require(!r.deltas.empty(), "region with empty delta set");
      }
      // Each cursor drifts at most length * max|delta|; keep regions apart.
      for (std::size_t i = 0; i < s.regions.size(); ++i) {
        for (std::size_t j = i + 1; j < s.regions.size(); ++j) {
          const auto& a = s.regions[i];
          const auto& b = s.regions[j];
          const unsigned __int128 gap =
              a.base > b.base ? a.base - b.base : b.base - a.base;
          const unsigned __int128 reach =
              static_cast<unsigned __int128>(max_abs(a.deltas) +
                                             max_abs(b.deltas)) *
              s.length;
          require(gap > reach, "region bases too close for disjoint regions");
        }
      }
      break;
    }
    case SyntheticKind::kLinkedList:
      require(s.node_count > 0, "node_count must be positive");
      require(s.heap_slots >= s.node_count, "heap_slots < node_count");
      require(s.node_size > 0, "node_size must be positive");
      break;
    case SyntheticKind::kPcMarkov:
      require(s.num_deltas > 0 && s.num_pcs > 0, "num_deltas/num_pcs > 0");
      require(s.max_delta_lines > 0 &&
                  2 * static_cast<std::uint64_t>(s.max_delta_lines) >=
                      s.num_deltas,
              "max_delta_lines too small for num_deltas distinct deltas");
      log2_exact(s.line_size);
      {
        // The walk must not wrap around the address space.
        const unsigned __int128 reach =
            static_cast<unsigned __int128>(s.length) *
            static_cast<std::uint64_t>(s.max_delta_lines) * s.line_size;
        require(s.start >= reach &&
                    static_cast<unsigned __int128>(s.start) + reach <=
                        std::numeric_limits<std::uint64_t>::max(),
                "pc-markov start must lie at least length * max_delta_lines * "
                "line_size from both ends of the address space");
      }
      break;
  }
}

std::vector<TraceRecord> generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  switch (spec.kind) {
    case SyntheticKind::kStride: return gen_stride(spec);
    case SyntheticKind::kMultiStride: return gen_multi_stride(spec);
    case SyntheticKind::kPcCorrelated: return gen_pc_correlated(spec);
    case SyntheticKind::kRegionHopping: return gen_region_hopping(spec);
    case SyntheticKind::kLinkedList: return gen_linked_list(spec);
    case SyntheticKind::kPcMarkov: return gen_pc_markov(spec);
  }
  return {};
}

std::vector<std::int64_t> pc_markov_delta_values(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  return draw_markov_deltas(spec, rng);
}

}  // namespace pfbench
