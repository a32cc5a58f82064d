#include "pfbench/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "pfbench/error.hpp"

namespace pfbench {
namespace {

constexpr const char* kVocabMagic = "pfvocab";
constexpr int kVocabVersion = 1;
constexpr const char* kPcVocabMagic = "pfpcvocab";

// Descending count, ascending key.
template <typename Key>
std::vector<Key> frequency_order(
    const std::vector<std::pair<Key, std::uint64_t>>& items) {
  auto sorted = items;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<Key> keys;
  keys.reserve(sorted.size());
  for (const auto& [key, count] : sorted) keys.push_back(key);
  return keys;
}

}  // namespace

std::vector<DeltaRecord> compute_deltas(std::span<const MissRecord> misses) {
  if (misses.size() < 2) {
    throw DataError(fmt::format(
        "delta stream needs at least 2 misses, got {}", misses.size()));
  }
  std::vector<DeltaRecord> out;
  out.reserve(misses.size() - 1);
  for (std::size_t i = 0; i + 1 < misses.size(); ++i) {
    out.push_back({misses[i].timestep, misses[i].pc,
                   static_cast<Delta>(misses[i + 1].line_addr -
                                      misses[i].line_addr)});
  }
  return out;
}

std::vector<Delta> delta_values(std::span<const DeltaRecord> records) {
  std::vector<Delta> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.delta);
  return out;
}

DeltaVocab DeltaVocab::build(std::span<const Delta> deltas,
                             std::size_t max_output,
                             std::uint64_t min_input_count) {
  if (deltas.empty()) throw DataError("cannot build a vocabulary from nothing");
  if (max_output < 1 || min_input_count < 1) {
    throw ConfigError("max_output and min_input_count must be >= 1");
  }
  DeltaVocab vocab;
  vocab.max_output_ = max_output;
  vocab.min_input_count_ = min_input_count;
  for (Delta d : deltas) ++vocab.counts_[d];
  vocab.total_ = deltas.size();

  std::vector<std::pair<Delta, std::uint64_t>> items(vocab.counts_.begin(),
                                                     vocab.counts_.end());
  const auto order = frequency_order(items);
  vocab.num_output_ = std::min(max_output, order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < vocab.num_output_ ||
        vocab.counts_.at(order[i]) >= min_input_count) {
      vocab.input_deltas_.push_back(order[i]);
    }
  }
  vocab.index();
  return vocab;
}

void DeltaVocab::index() {
  input_ids_.clear();
  for (std::size_t i = 0; i < input_deltas_.size(); ++i) {
    input_ids_.emplace(input_deltas_[i], static_cast<ClassId>(i));
  }
}

ClassId DeltaVocab::encode_input(Delta delta) const {
  auto it = input_ids_.find(delta);
  return it == input_ids_.end() ? oov_input() : it->second;
}

ClassId DeltaVocab::encode_output(Delta delta) const {
  auto it = input_ids_.find(delta);
  if (it == input_ids_.end() ||
      static_cast<std::size_t>(it->second) >= num_output_) {
    return kOovOutput;
  }
  return it->second;
}

std::vector<ClassId> DeltaVocab::encode(std::span<const Delta> deltas,
                                        VocabSide side) const {
  std::vector<ClassId> out;
  out.reserve(deltas.size());
  for (Delta d : deltas) out.push_back(encode(d, side));
  return out;
}

Delta DeltaVocab::decode(ClassId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= input_deltas_.size()) {
    throw DataError(fmt::format("class id {} outside vocabulary", id));
  }
  return input_deltas_[id];
}

double DeltaVocab::output_coverage(std::size_t top) const {
  if (total_ == 0) return 0.0;
  std::uint64_t covered = 0;
  for (std::size_t i = 0; i < std::min(top, num_output_); ++i) {
    covered += counts_.at(input_deltas_[i]);
  }
  return static_cast<double>(covered) / static_cast<double>(total_);
}

void DeltaVocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write vocabulary '{}'", path));
  out << fmt::format("{} {}\n", kVocabMagic, kVocabVersion);
  out << fmt::format("max_output {} min_input_count {} num_output {} "
                     "num_input {} total {}\n",
                     max_output_, min_input_count_, num_output_,
                     input_deltas_.size(), total_);
  // Vocabulary entries first in class order, then the remaining counts.
  for (std::size_t i = 0; i < input_deltas_.size(); ++i) {
    out << fmt::format("{} {} {}\n", input_deltas_[i],
                       counts_.at(input_deltas_[i]), i);
  }
  for (const auto& [delta, count] : counts_) {
    if (!input_ids_.contains(delta)) {
      out << fmt::format("{} {} -1\n", delta, count);
    }
  }
  if (!out) throw IoError(fmt::format("write failed on '{}'", path));
}

DeltaVocab DeltaVocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open vocabulary '{}'", path));
  std::string magic, key;
  int version = 0;
  in >> magic >> version;
  if (magic != kVocabMagic || version != kVocabVersion) {
    throw FormatError(fmt::format("'{}' is not a v{} vocabulary", path,
                                  kVocabVersion));
  }
  DeltaVocab vocab;
  std::size_t num_input = 0;
  in >> key >> vocab.max_output_ >> key >> vocab.min_input_count_ >> key >>
      vocab.num_output_ >> key >> num_input >> key >> vocab.total_;
  if (!in) throw FormatError(fmt::format("bad vocabulary header in '{}'", path));
  vocab.input_deltas_.resize(num_input);
  Delta delta;
  std::uint64_t count;
  long long id;
  std::uint64_t line = 2;
  while (in >> delta >> count >> id) {
    ++line;
    vocab.counts_[delta] = count;
    if (id >= 0) {
      if (static_cast<std::size_t>(id) >= num_input) {
        throw ParseError("class id out of range", line,
                         ParseError::OffsetKind::kLine);
      }
      vocab.input_deltas_[id] = delta;
    }
  }
  if (!in.eof()) {
    throw ParseError(fmt::format("malformed vocabulary entry in '{}'", path),
                     line + 1, ParseError::OffsetKind::kLine);
  }
  vocab.index();
  return vocab;
}

void DeltaVocab::export_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  out << "delta,count,input_class,output_class\n";
  for (std::size_t i = 0; i < input_deltas_.size(); ++i) {
    const Delta d = input_deltas_[i];
    out << fmt::format("{},{},{},{}\n", d, counts_.at(d), i,
                       i < num_output_ ? static_cast<long long>(i) : -1LL);
  }
  for (const auto& [delta, count] : counts_) {
    if (!input_ids_.contains(delta)) {
      out << fmt::format("{},{},-1,-1\n", delta, count);
    }
  }
}

PcVocab PcVocab::build(std::span<const std::uint64_t> pcs,
                       std::uint64_t min_count) {
  std::unordered_map<std::uint64_t, std::uint64_t> counts;
  for (auto pc : pcs) ++counts[pc];
  std::vector<std::pair<std::uint64_t, std::uint64_t>> items;
  for (const auto& [pc, count] : counts) {
    if (count >= min_count) items.emplace_back(pc, count);
  }
  PcVocab vocab;
  vocab.pcs_ = frequency_order(items);
  for (std::size_t i = 0; i < vocab.pcs_.size(); ++i) {
    vocab.ids_.emplace(vocab.pcs_[i], static_cast<ClassId>(i));
  }
  return vocab;
}

ClassId PcVocab::encode(std::uint64_t pc) const {
  auto it = ids_.find(pc);
  return it == ids_.end() ? oov() : it->second;
}

void PcVocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  out << fmt::format("{} 1\n{}\n", kPcVocabMagic, pcs_.size());
  for (auto pc : pcs_) out << fmt::format("{:#x}\n", pc);
}

PcVocab PcVocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  std::string magic;
  int version = 0;
  std::size_t n = 0;
  in >> magic >> version >> n;
  if (magic != kPcVocabMagic || version != 1) {
    throw FormatError(fmt::format("'{}' is not a PC vocabulary", path));
  }
  PcVocab vocab;
  for (std::size_t i = 0; i < n; ++i) {
    std::string token;
    if (!(in >> token)) {
      throw ParseError("truncated PC vocabulary", i + 3,
                       ParseError::OffsetKind::kLine);
    }
    vocab.pcs_.push_back(std::stoull(token, nullptr, 16));
    vocab.ids_.emplace(vocab.pcs_.back(), static_cast<ClassId>(i));
  }
  return vocab;
}

std::uint64_t mass_prefix_length(std::vector<std::uint64_t> counts,
                                 double fraction) {
  std::sort(counts.begin(), counts.end(), std::greater<>());
  long double total = 0;
  for (auto c : counts) total += c;
  const long double target = total * fraction;
  long double running = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    running += counts[i];
    if (running >= target) return i + 1;
  }
  return counts.size();
}

CoverageStats coverage_stats(std::span<const MissRecord> misses,
                             std::span<const DeltaRecord> deltas) {
  CoverageStats stats;
  stats.num_misses = misses.size();
  std::unordered_set<std::uint64_t> pcs;
  std::unordered_map<std::uint64_t, std::uint64_t> addr_counts;
  for (const auto& m : misses) {
    pcs.insert(m.pc);
    ++addr_counts[m.line_addr];
  }
  std::unordered_map<Delta, std::uint64_t> delta_counts;
  for (const auto& d : deltas) ++delta_counts[d.delta];
  stats.num_unique_pcs = pcs.size();
  stats.num_unique_addrs = addr_counts.size();
  stats.num_unique_deltas = delta_counts.size();
  const auto values = [](const auto& map) {
    std::vector<std::uint64_t> v;
    v.reserve(map.size());
    for (const auto& [k, c] : map) v.push_back(c);
    return v;
  };
  stats.addrs_for_50pct_mass =
      addr_counts.empty() ? 0 : mass_prefix_length(values(addr_counts));
  stats.deltas_for_50pct_mass =
      delta_counts.empty() ? 0 : mass_prefix_length(values(delta_counts));
  return stats;
}

}  // namespace pfbench
