#include "vgw/model.hpp"

#include <algorithm>
#include <cmath>

namespace vgw {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IllegalTransition: return "IllegalTransition";
    case Errc::FrameError: return "FrameError";
    case Errc::UnknownSensorCode: return "UnknownSensorCode";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::MixedSensorIds: return "MixedSensorIds";
    case Errc::BadUrl: return "BadUrl";
    case Errc::DropWithError: return "DropWithError";
    case Errc::ChainUnavailable: return "ChainUnavailable";
    case Errc::DuplicateVersion: return "DuplicateVersion";
    case Errc::DuplicateContent: return "DuplicateContent";
    case Errc::NotFound: return "NotFound";
    case Errc::IntegrityError: return "IntegrityError";
    case Errc::NotVwsnDomain: return "NotVwsnDomain";
    case Errc::InsufficientCapacity: return "InsufficientCapacity";
    case Errc::UnknownAllocation: return "UnknownAllocation";
    case Errc::ImageNotCached: return "ImageNotCached";
    case Errc::NoAllocation: return "NoAllocation";
    case Errc::ImageNotFound: return "ImageNotFound";
    case Errc::CoreCapacityExhausted: return "CoreCapacityExhausted";
    case Errc::NoFeasibleNode: return "NoFeasibleNode";
    case Errc::TransferFault: return "TransferFault";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ScenarioFailed: return "ScenarioFailed";
  }
  return "Unknown";
}

std::optional<Errc> errc_from_string(std::string_view name) noexcept {
  for (int i = 0; i <= static_cast<int>(Errc::ScenarioFailed); ++i) {
    if (to_string(static_cast<Errc>(i)) == name) return static_cast<Errc>(i);
  }
  return std::nullopt;
}

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<Enum, N>& all, std::string_view what) {
  for (Enum e : all) {
    if (to_string(e) == s) return e;
  }
  throw Error(Errc::InvalidArgument, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace

bool is_url_safe_id(std::string_view id) noexcept {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
           c == '.' || c == '~';
  });
}

std::string_view to_string(Domain d) noexcept {
  switch (d) {
    case Domain::GatewayProvider: return "GatewayProvider";
    case Domain::VWSN1: return "VWSN1";
    case Domain::VWSN2: return "VWSN2";
    case Domain::Application: return "Application";
  }
  return "?";
}

Domain domain_from_string(std::string_view s) { return parse_enum(s, kAllDomains, "domain"); }

bool is_vwsn(Domain d) noexcept { return d == Domain::VWSN1 || d == Domain::VWSN2; }

bool may_host_vnfs(Domain d) noexcept { return d != Domain::Application; }

std::string_view to_string(SensorBrand b) noexcept { return b == SensorBrand::BrandA ? "BrandA" : "BrandB"; }

SensorBrand brand_from_string(std::string_view s) {
  return parse_enum(s, std::array{SensorBrand::BrandA, SensorBrand::BrandB}, "sensor brand");
}

Domain home_domain(SensorBrand b) noexcept { return b == SensorBrand::BrandA ? Domain::VWSN1 : Domain::VWSN2; }

std::string_view to_string(Quantity q) noexcept {
  switch (q) {
    case Quantity::Temperature: return "temperature";
    case Quantity::Humidity: return "humidity";
    case Quantity::WindSpeed: return "windspeed";
    case Quantity::CO2: return "co2";
    case Quantity::Rainfall: return "rainfall";
  }
  return "?";
}

Quantity quantity_from_string(std::string_view s) { return parse_enum(s, kAllQuantities, "quantity"); }

std::string_view senml_unit(Quantity q) noexcept {
  switch (q) {
    case Quantity::Temperature: return "Cel";
    case Quantity::Humidity: return "%RH";
    case Quantity::WindSpeed: return "m/s";
    case Quantity::CO2: return "ppm";
    case Quantity::Rainfall: return "mm";
  }
  return "?";
}

std::string_view to_string(VnfType t) noexcept {
  switch (t) {
    case VnfType::ProtocolConverter1: return "ProtocolConverter1";
    case VnfType::InfoModelProcessor1: return "InfoModelProcessor1";
    case VnfType::ProtocolConverter2: return "ProtocolConverter2";
    case VnfType::InfoModelProcessor2: return "InfoModelProcessor2";
  }
  return "?";
}

VnfType vnf_type_from_string(std::string_view s) { return parse_enum(s, kAllVnfTypes, "VNF type"); }

std::string_view stage_tag(VnfType t) noexcept {
  switch (t) {
    case VnfType::ProtocolConverter1: return "PC1";
    case VnfType::InfoModelProcessor1: return "IMP1";
    case VnfType::ProtocolConverter2: return "PC2";
    case VnfType::InfoModelProcessor2: return "IMP2";
  }
  return "?";
}

bool is_info_model_processor(VnfType t) noexcept {
  return t == VnfType::InfoModelProcessor1 || t == VnfType::InfoModelProcessor2;
}

bool is_protocol_converter(VnfType t) noexcept { return !is_info_model_processor(t); }

Domain served_domain(VnfType t) noexcept {
  return (t == VnfType::ProtocolConverter1 || t == VnfType::InfoModelProcessor1) ? Domain::VWSN1 : Domain::VWSN2;
}

VnfType info_model_processor_for(Domain vwsn) {
  if (vwsn == Domain::VWSN1) return VnfType::InfoModelProcessor1;
  if (vwsn == Domain::VWSN2) return VnfType::InfoModelProcessor2;
  throw Error(Errc::NotVwsnDomain, std::string(to_string(vwsn)));
}

VnfType protocol_converter_for(Domain vwsn) {
  if (vwsn == Domain::VWSN1) return VnfType::ProtocolConverter1;
  if (vwsn == Domain::VWSN2) return VnfType::ProtocolConverter2;
  throw Error(Errc::NotVwsnDomain, std::string(to_string(vwsn)));
}

void VnfDescriptor::validate() const {
  if (cpu_units < 1 || mem_units < 1) throw Error(Errc::InvalidArgument, "cpu_units and mem_units must be >= 1");
  if (image_size_bytes <= 0) throw Error(Errc::InvalidArgument, "image_size_bytes must be > 0");
  if (!(per_instance_capacity > 0.0) || !std::isfinite(per_instance_capacity))
    throw Error(Errc::InvalidArgument, "per_instance_capacity must be > 0");
  if (version < 0) throw Error(Errc::InvalidArgument, "version must be >= 0");
}

std::string_view to_string(LifecycleState s) noexcept {
  switch (s) {
    case LifecycleState::Requested: return "Requested";
    case LifecycleState::Instantiated: return "Instantiated";
    case LifecycleState::Migrating: return "Migrating";
    case LifecycleState::Running: return "Running";
    case LifecycleState::Terminated: return "Terminated";
    case LifecycleState::Failed: return "Failed";
  }
  return "?";
}

std::string_view to_string(LifecycleEvent e) noexcept {
  switch (e) {
    case LifecycleEvent::InstantiateDone: return "InstantiateDone";
    case LifecycleEvent::MigrateCmd: return "MigrateCmd";
    case LifecycleEvent::MigrateDone: return "MigrateDone";
    case LifecycleEvent::UpdateCmd: return "UpdateCmd";
    case LifecycleEvent::TerminateCmd: return "TerminateCmd";
    case LifecycleEvent::Fault: return "Fault";
  }
  return "?";
}

LifecycleState lifecycle_state_from_string(std::string_view s) {
  return parse_enum(s, kAllLifecycleStates, "lifecycle state");
}

LifecycleEvent lifecycle_event_from_string(std::string_view s) {
  return parse_enum(s, kAllLifecycleEvents, "lifecycle event");
}

bool is_absorbing(LifecycleState s) noexcept {
  return s == LifecycleState::Terminated || s == LifecycleState::Failed;
}

LifecycleState lifecycle_next(LifecycleState state, LifecycleEvent event) {
  using S = LifecycleState;
  using E = LifecycleEvent;
  if (!is_absorbing(state)) {
    if (event == E::TerminateCmd) return S::Terminated;
    if (event == E::Fault) return S::Failed;
    if (state == S::Requested && event == E::InstantiateDone) return S::Instantiated;
    if (state == S::Instantiated && event == E::MigrateCmd) return S::Migrating;
    if (state == S::Migrating && event == E::MigrateDone) return S::Running;
    if (state == S::Running && event == E::UpdateCmd) return S::Running;
  }
  throw Error(Errc::IllegalTransition, std::string(to_string(state)) + " + " + std::string(to_string(event)));
}

std::string_view to_string(ChainViolation v) noexcept {
  switch (v) {
    case ChainViolation::StageCount: return "stage count";
    case ChainViolation::StageOrder: return "stage order";
    case ChainViolation::DomainSuffixMismatch: return "domain suffix mismatch";
    case ChainViolation::ChainDomain: return "chain domain";
    case ChainViolation::StageNotRunning: return "stage not running";
  }
  return "?";
}

std::vector<ChainViolation> validate_chain(const ServiceChain& chain) {
  std::vector<ChainViolation> out;
  auto add = [&out](ChainViolation v) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  };
  if (!is_vwsn(chain.domain)) add(ChainViolation::ChainDomain);
  if (chain.stages.size() != 2) add(ChainViolation::StageCount);
  if (chain.stages.size() >= 2) {
    if (!is_info_model_processor(chain.stages[0].descriptor.vnf_type) ||
        !is_protocol_converter(chain.stages[1].descriptor.vnf_type))
      add(ChainViolation::StageOrder);
  }
  for (const auto& stage : chain.stages) {
    if (is_vwsn(chain.domain) && served_domain(stage.descriptor.vnf_type) != chain.domain)
      add(ChainViolation::DomainSuffixMismatch);
    if (stage.state != LifecycleState::Running) add(ChainViolation::StageNotRunning);
  }
  return out;
}

std::vector<std::string> ServiceRequest::violations() const {
  std::vector<std::string> out;
  if (!is_url_safe_id(request_id)) out.emplace_back("request_id is not a URL-safe id");
  if (app_callback_url.empty()) out.emplace_back("app_callback_url is empty");
  if (quantities.empty()) out.emplace_back("quantities is empty");
  if (pattern.kind == CollectionPattern::Kind::Periodic && pattern.interval_ms < kMinPeriodicIntervalMs)
    out.emplace_back("periodic interval below " + std::to_string(kMinPeriodicIntervalMs) + " ms");
  return out;
}

}  // namespace vgw
