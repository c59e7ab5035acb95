#pragma once

// Scenario harness: configuration, sensor emulators, load generation, fault
// injection, the wiring of all domains, metrics and trace verification.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vgw/control.hpp"
#include "vgw/image_store.hpp"
#include "vgw/mano.hpp"
#include "vgw/model.hpp"
#include "vgw/nfvi.hpp"
#include "vgw/runtime.hpp"
#include "vgw/trace.hpp"

namespace vgw {

enum class ClockMode { Virtual, Real };
enum class ProcessMode { Single, Split };

std::string_view to_string(ClockMode m) noexcept;
std::string_view to_string(ProcessMode m) noexcept;
ClockMode clock_mode_from_string(std::string_view s);
ProcessMode process_mode_from_string(std::string_view s);

struct SensorSpec {
  SensorBrand brand = SensorBrand::BrandA;
  std::string sensor_id;
  std::vector<Quantity> quantities{Quantity::Temperature};
  CollectionPattern pattern = CollectionPattern::periodic(1000);
};

struct LoadStep {
  Millis at_ms = 0;
  double rate = 0.0;  // messages per second
};

/// Synthetic load on one provider, from `sensors` generated sensor ids.
/// Step times are absolute scenario times.
struct LoadSpec {
  Domain provider = Domain::VWSN1;
  int sensors = 20;
  std::vector<LoadStep> steps;
  Millis end_ms = 0;
};

struct FaultSpec {
  enum class Kind { TransferFault, HostDown, HostUp, KillStage };
  Millis at_ms = 0;
  Kind kind = Kind::TransferFault;
  Domain domain = Domain::VWSN1;  // TransferFault, KillStage
  std::string host;               // HostDown, HostUp
  VnfType vnf_type = VnfType::InfoModelProcessor1;  // KillStage
  int count = 1;                                    // TransferFault
};

struct VnfSpec {
  VnfType vnf_type = VnfType::InfoModelProcessor1;
  int version = 1;
  int cpu_units = 1;
  int mem_units = 1;
  std::int64_t image_size_bytes = 100'000'000;
  double per_instance_capacity = 50.0;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  Millis duration_ms = 60'000;
  Millis base_epoch_ms = 1'700'000'000'000;
  ClockMode clock = ClockMode::Virtual;
  ProcessMode processes = ProcessMode::Single;
  std::vector<SensorSpec> sensors;
  /// Providers the application requests service from. Empty means every
  /// provider that has sensors or load, or both when there is neither.
  std::vector<Domain> providers;
  std::map<Domain, std::vector<NodeDescriptor>> nodes;
  MigrationCostModel cost;
  ScalingPolicy scaling;
  std::map<VnfType, VnfSpec> vnfs;
  LinkLatency latency;
  Millis stage_service_ms = 1;
  std::vector<FaultSpec> faults;
  std::optional<LoadSpec> load;
  Millis leg_timeout_ms = 10'000;
  Millis drain_ms = 2'000;
  /// Hard stop; 0 derives one from the other settings.
  Millis max_ms = 0;
  /// Record per-message emit/deliver events in the trace.
  bool trace_data = true;
  /// Image store directory; empty uses a fresh temporary directory.
  std::string image_root;

  ScenarioConfig();

  /// Throws InvalidConfig.
  void validate() const;
  std::vector<Domain> effective_providers() const;

  /// Keys missing from `j` keep their defaults. Throws InvalidConfig.
  static ScenarioConfig from_json(const Json& j);
  Json to_json() const;

  /// 6 BrandA + 2 BrandB sensors at 1 msg/s for 60 s.
  static ScenarioConfig prototype();
  /// 10 -> 200 -> 10 msg/s load steps on VWSN1.
  static ScenarioConfig elasticity();
};

// ---- sensors

struct Frame {
  Millis t = 0;
  std::uint64_t seq = 0;
  Quantity quantity = Quantity::Temperature;
  Bytes bytes;
};

/// Stateful emulator: a seeded random walk per quantity, cycling through the
/// sensor's quantities. BrandB walks in raw ADC space.
class SensorEmulator {
 public:
  SensorEmulator(SensorSpec spec, std::uint64_t seed, Millis base_epoch_ms);

  const SensorSpec& spec() const { return spec_; }
  Domain domain() const { return home_domain(spec_.brand); }
  /// Next wire frame stamped at scenario time `now`.
  Frame next(Millis now);
  std::uint64_t emitted() const { return seq_; }

 private:
  SensorSpec spec_;
  Millis base_epoch_ms_;
  std::mt19937_64 rng_;
  std::map<Quantity, double> state_;
  std::uint64_t seq_ = 0;
};

/// Frames a sensor emits when streaming starts at `start` and must stop
/// before `end`: Once gives exactly one, Periodic one per interval.
std::vector<Frame> emulate_sensor(const SensorSpec& spec, std::uint64_t seed, Millis base_epoch_ms, Millis start,
                                  Millis end);

/// Seed of one sensor's stream, derived from the scenario seed and its id.
std::uint64_t sensor_seed(std::uint64_t scenario_seed, const std::string& sensor_id);

// ---- metrics

struct StageBreakdown {
  double ingress_ms = 0.0;
  double imp_ms = 0.0;
  double pc_ms = 0.0;
  double egress_ms = 0.0;
};

struct InstanceCountSample {
  Millis t = 0;
  std::string domain;
  std::string service;
  std::string vnf_type;
  int running = 0;
};

struct SequenceStatus {
  /// "complete", "rejected" or "failed".
  std::string status;
  /// Last leg seen for the provider: "none", "rq-s", "rq-g", "g-i", "ack".
  std::string last_leg = "none";
  std::string reason;
};

struct MetricsReport {
  std::uint64_t emitted = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;
  std::uint64_t dropped = 0;
  std::uint64_t refused = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t invalid_deliveries = 0;
  std::uint64_t duplicate_deliveries = 0;
  std::map<std::string, std::uint64_t> delivered_by_domain;
  std::map<std::string, std::uint64_t> emitted_by_domain;
  std::optional<double> latency_p50_ms;
  std::optional<double> latency_p95_ms;
  std::optional<double> latency_max_ms;
  double throughput_msgs_per_s = 0.0;
  std::optional<double> overhead;
  std::uint64_t control_messages = 0;
  std::uint64_t data_messages = 0;
  StageBreakdown breakdown;
  std::vector<InstanceCountSample> instance_counts;
  std::map<std::string, SequenceStatus> sequences;
  Millis first_emit = 0;
  Millis last_delivery = 0;
  Millis scenario_end = 0;
  double wall_seconds = 0.0;

  /// The instance count of (domain, vnf_type) summed over services at `t`.
  int running_at(const std::string& domain, const std::string& vnf_type, Millis t) const;

  Json to_json() const;
};

/// Nearest-rank percentile of unsorted samples; nullopt when empty.
std::optional<double> percentile(std::vector<double> samples, double p);

// ---- verification

/// Checks causal order of control legs per provider, [IMP, PC] stage order
/// of every delivery, lifecycle replay through lifecycle_next and capacity
/// conservation. Each violation starts with the name of the check.
std::vector<std::string> verify_trace(const std::vector<Json>& events);

// ---- scenario

/// Externally observable control-plane state, used to show that duplicate
/// control messages change nothing.
struct Snapshot {
  Json state;
  friend bool operator==(const Snapshot& a, const Snapshot& b) { return a.state == b.state; }
};

class Scenario {
 public:
  explicit Scenario(ScenarioConfig config);
  ~Scenario();
  Scenario(const Scenario&) = delete;
  Scenario& operator=(const Scenario&) = delete;

  /// Builds all domains, publishes images and starts the services.
  void boot();
  /// Runs initiation, streaming, faults and drain. Calls boot() if needed.
  void run();
  /// Re-delivers every control message recorded so far, then drains.
  void replay_control();
  /// Stops loops and servers; idempotent.
  void stop();

  Snapshot snapshot() const;
  MetricsReport report() const;
  const Trace& trace() const { return trace_; }
  const TrafficLog& traffic() const { return traffic_; }
  const ScenarioConfig& config() const { return config_; }

  // Component access for tests.
  CoreMano& core_mano();
  DomainMano& domain_mano(Domain d);
  VwsnProviderService& provider(Domain d);
  ApplicationService& app();
  const ImageStore& image_store() const;
  EventLoop& loop(const std::string& host);
  /// The transport used by `host` to reach the other services.
  Transport& transport(const std::string& host);
  /// Runs the (virtual or single real) loop until scenario time `t`.
  void advance_to(Millis t);
  Millis now() const;

 private:
  struct Impl;
  ScenarioConfig config_;
  Trace trace_;
  TrafficLog traffic_;
  std::unique_ptr<Impl> impl_;
};

struct ScenarioResult {
  MetricsReport report;
  std::string trace_jsonl;
  std::vector<std::string> violations;

  /// Throws ScenarioFailed naming the first failed check.
  void require_pass() const;
};

ScenarioResult run_scenario(const ScenarioConfig& config);

struct InitiationResult {
  std::vector<Json> trace;
  std::map<std::string, SequenceStatus> sequences;
};

/// Runs only the service initiation (no sensor data) for `providers`.
InitiationResult initiation_sequence(ScenarioConfig config, std::vector<Domain> providers);

}  // namespace vgw
