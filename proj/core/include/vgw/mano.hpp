#pragma once

// Management and orchestration: the gateway provider's core MANO
// (instantiate, place, migrate) and the per-VWSN domain MANO (adopt,
// terminate, update, elastic scaling).

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vgw/image_store.hpp"
#include "vgw/model.hpp"
#include "vgw/nfvi.hpp"
#include "vgw/runtime.hpp"
#include "vgw/trace.hpp"

namespace vgw {

struct MigrationCostModel {
  std::int64_t bandwidth_bytes_per_s = 100'000'000;
  Millis boot_time_ms = 2000;
  Millis state_transfer_ms = 0;

  /// image_size / bandwidth (as ms) + boot time.
  double cold_cost_ms(std::int64_t image_size_bytes) const;
  /// state transfer + boot time.
  double warm_cost_ms() const;
  /// Simulated migration delay, rounded to whole milliseconds.
  Millis delay_ms(std::int64_t image_size_bytes, CacheResult cache) const;

  /// Throws InvalidConfig for non-positive bandwidth or negative times.
  void validate() const;
  /// Throws InvalidConfig unless warm < cold for an image of this size.
  void validate_image(std::int64_t image_size_bytes) const;
};

struct ScalingPolicy {
  double util_target = 0.8;
  double scale_down_threshold = 0.3;
  int up_window_s = 10;
  int down_window_s = 30;
  int min_instances = 1;
  int max_instances = 10;
  Millis reconcile_period_ms = 1000;

  /// Throws InvalidConfig.
  void validate() const;
};

/// clamp(ceil(rate / (util_target * capacity)), min, max)
int desired_instances(double arrival_rate, const ScalingPolicy& policy, const VnfDescriptor& descriptor);

struct NodeFree {
  std::string node_id;
  Resources free;
};

/// First node in ascending node_id order whose free resources cover `need`.
/// Throws NoFeasibleNode.
std::string first_fit(const Resources& need, std::vector<NodeFree> nodes);
std::string place(const VnfDescriptor& descriptor, const std::vector<NfviNode*>& nodes);

inline Resources requirements(const VnfDescriptor& d) { return {d.cpu_units, d.mem_units}; }

/// Per (service, VNF type) scaling state. Each observe() call is one
/// reconcile period.
class ScalingDecider {
 public:
  struct Decision {
    int scale_up = 0;
    int scale_down = 0;
    friend bool operator==(const Decision&, const Decision&) = default;
  };

  ScalingDecider(ScalingPolicy policy, VnfDescriptor descriptor);

  /// `sample_rate` is the arrival rate of the last complete 1 s bucket,
  /// `window_rate` the windowed rate used for sizing.
  Decision observe(double sample_rate, double window_rate, int running, int pending);

  const ScalingPolicy& policy() const { return policy_; }
  const VnfDescriptor& descriptor() const { return descriptor_; }

 private:
  ScalingPolicy policy_;
  VnfDescriptor descriptor_;
  std::deque<double> history_;
};

/// One replayable lifecycle step.
struct AuditEntry {
  std::string instance_id;
  Domain domain = Domain::GatewayProvider;
  LifecycleState from = LifecycleState::Requested;
  LifecycleEvent event = LifecycleEvent::InstantiateDone;
  LifecycleState to = LifecycleState::Requested;
};

/// Replays entries through lifecycle_next; returns the number of divergences.
std::size_t audit_divergences(const std::vector<AuditEntry>& log);

/// Async call interface from the core MANO to a VWSN domain MANO
/// (reserve / release / adopt). Results arrive on the caller's loop.
class DomainPort {
 public:
  using Reply = std::function<void(const Json& result, const std::optional<Error>& error)>;
  virtual ~DomainPort() = default;
  virtual void call(Domain domain, const std::string& method, Json params, Reply reply) = 0;
};

struct MigrationOutcome {
  std::string instance_id;
  VnfType vnf_type = VnfType::InfoModelProcessor1;
  bool ready = false;
  std::string reason;
  std::optional<Location> location;
};

/// Gateway provider MANO. Every instance starts here; after a successful
/// migration management passes to the target domain's MANO.
class CoreMano {
 public:
  CoreMano(EventLoop& loop, const ImageStore& store, std::vector<NfviNode*> core_nodes, MigrationCostModel cost,
           DomainPort& port, Trace* trace = nullptr);

  /// Throws ImageNotFound, CoreCapacityExhausted.
  VnfInstance instantiate(const VnfDescriptor& descriptor);

  /// Starts a migration of an Instantiated instance. Throws IllegalTransition
  /// synchronously; every other outcome is reported through `done`.
  /// `request_id` is forwarded to the target domain with the instance.
  void migrate(const std::string& instance_id, Domain target, const std::string& request_id,
               std::function<void(MigrationOutcome)> done);

  /// Instantiates (or reuses a parked Instantiated instance) and migrates
  /// one instance per descriptor; `done` fires once with every outcome, in
  /// descriptor order. Throws ImageNotFound before touching anything.
  void provision(const std::string& request_id, Domain target, const std::vector<VnfDescriptor>& descriptors,
                 std::function<void(std::vector<MigrationOutcome>)> done);

  /// The next `count` transfers into `domain` fail.
  void inject_transfer_faults(Domain domain, int count);

  std::optional<VnfInstance> instance(const std::string& instance_id) const;
  std::vector<VnfInstance> instances() const;
  std::vector<AuditEntry> audit() const;
  const MigrationCostModel& cost_model() const { return cost_; }

 private:
  struct Record {
    VnfInstance instance;
    std::string core_allocation;
    std::string core_node;
    bool in_flight = false;
    bool handed_over = false;
  };
  void transition(Record& r, LifecycleEvent event);
  void release_core(Record& r);
  void fail(const std::string& instance_id, const std::string& reason, std::function<void(MigrationOutcome)>& done);
  NfviNode* core_node(const std::string& node_id) const;

  EventLoop& loop_;
  const ImageStore& store_;
  std::vector<NfviNode*> core_nodes_;
  MigrationCostModel cost_;
  DomainPort& port_;
  Trace* trace_;
  mutable std::mutex mu_;
  std::map<std::string, Record> records_;
  std::vector<AuditEntry> audit_;
  std::map<Domain, int> pending_faults_;
  std::uint64_t next_instance_ = 1;
};

/// A scaling action produced by DomainMano::reconcile.
struct ScaleAction {
  enum class Kind { ScaleUp, Terminate };
  Kind kind = Kind::ScaleUp;
  std::string service_id;
  VnfType vnf_type = VnfType::InfoModelProcessor1;
  int count = 0;                 // ScaleUp
  std::string instance_id;       // Terminate

  friend bool operator==(const ScaleAction&, const ScaleAction&) = default;
};

/// MANO of one VWSN domain.
class DomainMano {
 public:
  /// Resolves the handler config of an adopted instance from the request
  /// that brought it.
  using ConfigResolver = std::function<VnfConfig(const std::string& request_id, VnfType type)>;
  using ScaleUpRequester = std::function<void(const std::string& service_id, VnfType type, int count)>;

  DomainMano(Domain domain, EventLoop& loop, std::vector<NfviNode*> nodes, DomainImageCaches& caches,
             ScalingPolicy policy, Trace* trace = nullptr);
  ~DomainMano();

  Domain domain() const { return domain_; }
  void set_config_resolver(ConfigResolver resolver) { resolver_ = std::move(resolver); }
  void set_scale_up_requester(ScaleUpRequester requester) { requester_ = std::move(requester); }

  /// Ve-Vnfm / Nf-Vi calls from the core MANO: "reserve", "release",
  /// "adopt", "report_state". Throws Error.
  Json handle_rpc(const std::string& method, const Json& params);

  /// Throws IllegalTransition or NotFound.
  void terminate(const std::string& instance_id);
  void update(const std::string& instance_id, VnfConfig config);
  /// Applies Fault to a live instance.
  void fail(const std::string& instance_id, const std::string& reason);

  std::optional<VnfInstance> instance(const std::string& instance_id) const;
  std::vector<VnfInstance> instances() const;
  std::shared_ptr<VnfHandle> handle(const std::string& instance_id) const;
  std::vector<NodeReport> report_state() const;
  std::vector<AuditEntry> audit() const;

  // ---- service pools and elasticity

  /// `descriptors` are the scaling templates per VNF type of the service.
  void register_service(const std::string& service_id, std::vector<VnfDescriptor> descriptors);
  bool has_service(const std::string& service_id) const;
  void add_to_pool(const std::string& service_id, const std::string& instance_id);
  /// Running instances of a stage, oldest first.
  std::vector<std::string> pool(const std::string& service_id, VnfType type) const;
  int pending(const std::string& service_id, VnfType type) const;
  /// Scale-up requests that completed or failed.
  void settle_pending(const std::string& service_id, VnfType type, int count);

  /// One reconcile period: computes and applies actions (terminations run
  /// here, scale-ups go to the requester).
  std::vector<ScaleAction> reconcile();
  /// Reconciles every policy period, aligned to whole periods.
  void start_reconcile();
  void stop_reconcile();

 private:
  struct Record {
    VnfInstance instance;
    std::string allocation_id;
    std::string node_id;
    std::string image_id;
    std::uint64_t order = 0;
  };
  struct Service {
    std::map<VnfType, VnfDescriptor> descriptors;
    std::map<VnfType, std::vector<std::string>> pools;
    std::map<VnfType, int> pending;
    std::map<VnfType, ScalingDecider> deciders;
    std::map<VnfType, int> last_reported;
  };
  void transition(Record& r, LifecycleEvent event);
  void remove_from_pools(const std::string& instance_id);
  NfviNode* node(const std::string& node_id) const;
  void retire(Record& r);
  void schedule_tick();

  Domain domain_;
  EventLoop& loop_;
  std::vector<NfviNode*> nodes_;
  DomainImageCaches& caches_;
  ScalingPolicy policy_;
  Trace* trace_;
  ConfigResolver resolver_;
  ScaleUpRequester requester_;
  mutable std::recursive_mutex mu_;
  std::map<std::string, Record> records_;
  std::map<std::string, Service> services_;
  std::vector<AuditEntry> audit_;
  std::uint64_t next_order_ = 1;
  std::optional<TimerId> tick_;
  bool reconciling_ = false;
};

/// DomainPort that calls DomainMano objects directly through the loop, with
/// a fixed one-way latency. Used in tests and benchmarks.
class LocalDomainPort final : public DomainPort {
 public:
  LocalDomainPort(EventLoop& loop, Millis latency_ms = 0) : loop_(loop), latency_(latency_ms) {}
  void attach(DomainMano& mano) { manos_[mano.domain()] = &mano; }
  void call(Domain domain, const std::string& method, Json params, Reply reply) override;

 private:
  EventLoop& loop_;
  Millis latency_;
  std::map<Domain, DomainMano*> manos_;
};

Json to_json(const VnfDescriptor& d);
VnfDescriptor descriptor_from_json(const Json& j);
Json to_json(const Location& l);
Json to_json(const NodeReport& r);

}  // namespace vgw
