#pragma once

// Shared domain vocabulary: domains, sensors, VNF descriptors and instances,
// service chains, and the VNF lifecycle transition table.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vgw/error.hpp"

namespace vgw {

/// Milliseconds, either since the Unix epoch or on the scenario clock.
using Millis = std::int64_t;

/// Ids travel in URL paths: non-empty, unreserved characters only.
bool is_url_safe_id(std::string_view id) noexcept;

enum class Domain { GatewayProvider, VWSN1, VWSN2, Application };

inline constexpr std::array kAllDomains{Domain::GatewayProvider, Domain::VWSN1, Domain::VWSN2,
                                        Domain::Application};

std::string_view to_string(Domain d) noexcept;
Domain domain_from_string(std::string_view s);
/// True for the two sensor-provider domains.
bool is_vwsn(Domain d) noexcept;
/// VNF instances may live only in the gateway provider or a VWSN domain.
bool may_host_vnfs(Domain d) noexcept;

enum class SensorBrand { BrandA, BrandB };

std::string_view to_string(SensorBrand b) noexcept;
SensorBrand brand_from_string(std::string_view s);
/// BrandA sensors belong to VWSN1, BrandB sensors to VWSN2.
Domain home_domain(SensorBrand b) noexcept;

enum class Quantity { Temperature, Humidity, WindSpeed, CO2, Rainfall };

inline constexpr std::array kAllQuantities{Quantity::Temperature, Quantity::Humidity, Quantity::WindSpeed,
                                           Quantity::CO2, Quantity::Rainfall};

/// Lowercase name, also used as the SenML record name.
std::string_view to_string(Quantity q) noexcept;
Quantity quantity_from_string(std::string_view s);
/// SenML unit: Cel, %RH, m/s, ppm, mm.
std::string_view senml_unit(Quantity q) noexcept;

struct SensorReading {
  std::string sensor_id;
  SensorBrand brand = SensorBrand::BrandA;
  Quantity quantity = Quantity::Temperature;
  double value = 0.0;
  Millis timestamp = 0;

  friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

enum class VnfType { ProtocolConverter1, InfoModelProcessor1, ProtocolConverter2, InfoModelProcessor2 };

inline constexpr std::array kAllVnfTypes{VnfType::ProtocolConverter1, VnfType::InfoModelProcessor1,
                                         VnfType::ProtocolConverter2, VnfType::InfoModelProcessor2};

std::string_view to_string(VnfType t) noexcept;
VnfType vnf_type_from_string(std::string_view s);
/// Stage tag recorded in message traces: IMP1, PC1, IMP2, PC2.
std::string_view stage_tag(VnfType t) noexcept;
bool is_info_model_processor(VnfType t) noexcept;
bool is_protocol_converter(VnfType t) noexcept;
/// The VWSN domain a VNF type serves (suffix 1 -> VWSN1, suffix 2 -> VWSN2).
Domain served_domain(VnfType t) noexcept;
VnfType info_model_processor_for(Domain vwsn);
VnfType protocol_converter_for(Domain vwsn);

struct VnfDescriptor {
  VnfType vnf_type = VnfType::InfoModelProcessor1;
  std::string image_id;
  int version = 1;
  int cpu_units = 1;
  int mem_units = 1;
  std::int64_t image_size_bytes = 1;
  double per_instance_capacity = 1.0;  // messages per second

  /// Throws InvalidArgument when a resource or capacity field is not strictly positive.
  void validate() const;

  friend bool operator==(const VnfDescriptor&, const VnfDescriptor&) = default;
};

enum class LifecycleState { Requested, Instantiated, Migrating, Running, Terminated, Failed };
enum class LifecycleEvent { InstantiateDone, MigrateCmd, MigrateDone, UpdateCmd, TerminateCmd, Fault };

inline constexpr std::array kAllLifecycleStates{LifecycleState::Requested,  LifecycleState::Instantiated,
                                                LifecycleState::Migrating,  LifecycleState::Running,
                                                LifecycleState::Terminated, LifecycleState::Failed};
inline constexpr std::array kAllLifecycleEvents{LifecycleEvent::InstantiateDone, LifecycleEvent::MigrateCmd,
                                                LifecycleEvent::MigrateDone,     LifecycleEvent::UpdateCmd,
                                                LifecycleEvent::TerminateCmd,    LifecycleEvent::Fault};

std::string_view to_string(LifecycleState s) noexcept;
std::string_view to_string(LifecycleEvent e) noexcept;
LifecycleState lifecycle_state_from_string(std::string_view s);
LifecycleEvent lifecycle_event_from_string(std::string_view s);
bool is_absorbing(LifecycleState s) noexcept;

/// The single source of lifecycle transition legality.
/// Throws Error(IllegalTransition) for every pair outside the table.
LifecycleState lifecycle_next(LifecycleState state, LifecycleEvent event);

struct Location {
  Domain domain = Domain::GatewayProvider;
  std::string node_id;

  friend bool operator==(const Location&, const Location&) = default;
};

struct VnfInstance {
  std::string instance_id;
  VnfDescriptor descriptor;
  LifecycleState state = LifecycleState::Requested;
  std::optional<Location> location;
  std::optional<std::string> chain_id;
  double observed_load = 0.0;

  friend bool operator==(const VnfInstance&, const VnfInstance&) = default;
};

struct ServiceChain {
  std::string chain_id;
  Domain domain = Domain::VWSN1;
  std::vector<VnfInstance> stages;
};

enum class ChainViolation { StageCount, StageOrder, DomainSuffixMismatch, ChainDomain, StageNotRunning };

/// Human readable violation name, e.g. "stage order".
std::string_view to_string(ChainViolation v) noexcept;

/// Empty result means the chain is valid; otherwise every violated invariant is listed once.
std::vector<ChainViolation> validate_chain(const ServiceChain& chain);

struct CollectionPattern {
  enum class Kind { Once, Periodic };
  Kind kind = Kind::Once;
  Millis interval_ms = 0;

  static CollectionPattern once() { return {}; }
  static CollectionPattern periodic(Millis interval) { return {Kind::Periodic, interval}; }

  friend bool operator==(const CollectionPattern&, const CollectionPattern&) = default;
};

inline constexpr Millis kMinPeriodicIntervalMs = 100;

struct ServiceRequest {
  std::string request_id;
  std::string app_callback_url;
  std::set<Quantity> quantities;
  CollectionPattern pattern;

  /// Names each violated invariant; empty when the request is well formed.
  std::vector<std::string> violations() const;

  friend bool operator==(const ServiceRequest&, const ServiceRequest&) = default;
};

}  // namespace vgw
