#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vgw {

enum class Errc {
  InvalidArgument,
  IllegalTransition,
  FrameError,
  UnknownSensorCode,
  EmptyInput,
  MixedSensorIds,
  BadUrl,
  DropWithError,
  ChainUnavailable,
  DuplicateVersion,
  DuplicateContent,
  NotFound,
  IntegrityError,
  NotVwsnDomain,
  InsufficientCapacity,
  UnknownAllocation,
  ImageNotCached,
  NoAllocation,
  ImageNotFound,
  CoreCapacityExhausted,
  NoFeasibleNode,
  TransferFault,
  InvalidConfig,
  ScenarioFailed,
};

std::string_view to_string(Errc code) noexcept;
std::optional<Errc> errc_from_string(std::string_view name) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace vgw
