#include "pfbench/error.hpp"

#include <fmt/format.h>

namespace pfbench {

ParseError::ParseError(const std::string& what, std::uint64_t offset,
                       OffsetKind kind)
    : Error(fmt::format("{} (at {} {})", what,
                        kind == OffsetKind::kByte ? "byte" : "line", offset)),
      offset_(offset),
      kind_(kind) {}

}  // namespace pfbench
