#pragma once

// Simulated NFVI compute node: resource accounting, load metering and the
// execution environment that hosts running VNF instances.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "vgw/image_store.hpp"
#include "vgw/model.hpp"
#include "vgw/runtime.hpp"
#include "vgw/vnf.hpp"

namespace vgw {

struct Resources {
  int cpu_units = 0;
  int mem_units = 0;

  bool covers(const Resources& need) const { return cpu_units >= need.cpu_units && mem_units >= need.mem_units; }
  friend bool operator==(const Resources&, const Resources&) = default;
};

struct NodeDescriptor {
  std::string node_id;
  Domain domain = Domain::GatewayProvider;
  int cpu_capacity = 1;
  int mem_capacity = 1;

  Resources capacity() const { return {cpu_capacity, mem_capacity}; }
  /// Throws InvalidConfig.
  void validate() const;
};

struct Allocation {
  std::string allocation_id;
  std::string node_id;
  std::string instance_id;
  int cpu_units = 0;
  int mem_units = 0;

  friend bool operator==(const Allocation&, const Allocation&) = default;
};

/// Arrival counter with 1 s buckets. Rates are computed over complete
/// buckets only.
class LoadMeter {
 public:
  static constexpr Millis kBucketMs = 1000;
  static constexpr int kWindowBuckets = 5;

  explicit LoadMeter(Millis start = 0) : start_(start) {}

  void record(Millis now, std::uint64_t n = 1);
  /// Mean rate (msg/s) over the last kWindowBuckets complete buckets, or
  /// fewer if the meter is younger than the window.
  double window_rate(Millis now) const;
  /// Count of the most recent complete bucket (msg/s).
  double last_bucket_rate(Millis now) const;

 private:
  Millis start_;
  std::map<std::int64_t, std::uint64_t> buckets_;
};

/// A live VNF instance: a single-consumer FIFO inbox served by the VNF
/// function with a fixed per-message service time.
class VnfHandle : public std::enable_shared_from_this<VnfHandle> {
 public:
  using OnOutput = std::function<void(std::vector<VnfMessage>)>;
  using OnDrop = std::function<void(VnfMessage, const Error&)>;

  VnfHandle(EventLoop& loop, std::string instance_id, VnfType type, VnfConfig config, Millis service_ms);

  const std::string& instance_id() const { return instance_id_; }
  VnfType vnf_type() const { return type_; }
  bool stopped() const;

  /// Enqueues a message. Throws ChainUnavailable once stopped. The stage
  /// entry time is stamped on arrival.
  void submit(VnfMessage msg, OnOutput on_output, OnDrop on_drop);
  /// New submissions are refused; messages already queued still complete.
  void stop();
  /// Takes effect for the next message that starts service.
  void update_config(VnfConfig config);
  VnfConfig config() const;

  std::size_t queued() const;
  double window_rate(Millis now) const;
  double last_bucket_rate(Millis now) const;

 private:
  struct Job {
    VnfMessage msg;
    OnOutput on_output;
    OnDrop on_drop;
  };
  void start_next();

  EventLoop& loop_;
  std::string instance_id_;
  VnfType type_;
  VnfFunction function_;
  Millis service_ms_;
  mutable std::mutex mu_;
  VnfConfig config_;
  bool stopped_ = false;
  bool busy_ = false;
  std::deque<Job> inbox_;
  LoadMeter meter_;
};

struct InstanceReport {
  std::string instance_id;
  VnfType vnf_type = VnfType::InfoModelProcessor1;
  std::string image_id;
  std::string allocation_id;
  bool running = false;
  double observed_load = 0.0;
  double last_bucket_rate = 0.0;
};

struct NodeReport {
  std::string node_id;
  Domain domain = Domain::GatewayProvider;
  Resources capacity;
  Resources free;
  std::vector<Allocation> allocations;
  std::vector<InstanceReport> instances;
};

class NfviNode {
 public:
  /// Invoked after every allocate/release with the node's used resources.
  using CapacityObserver = std::function<void(const NodeDescriptor&, const Resources& used)>;

  /// `caches` may be null for nodes that never run instances (the core layer).
  NfviNode(NodeDescriptor descriptor, EventLoop& loop, const DomainImageCaches* caches, Millis service_ms = 1);

  const NodeDescriptor& descriptor() const { return descriptor_; }
  const std::string& node_id() const { return descriptor_.node_id; }
  void set_capacity_observer(CapacityObserver observer) { observer_ = std::move(observer); }

  /// Throws InvalidArgument for non-positive requirements and
  /// InsufficientCapacity (node unchanged) when the request does not fit.
  Allocation allocate(const std::string& instance_id, Resources need);
  /// Throws UnknownAllocation.
  void release(const std::string& allocation_id);

  /// Throws NoAllocation when the instance holds no allocation here, and
  /// ImageNotCached when the domain cache lacks the image.
  std::shared_ptr<VnfHandle> run_instance(const std::string& instance_id, const std::string& image_id,
                                          VnfType type, VnfConfig config);
  std::shared_ptr<VnfHandle> handle(const std::string& instance_id) const;

  Resources free() const;
  NodeReport report_state() const;

 private:
  struct Hosted {
    std::string image_id;
    std::shared_ptr<VnfHandle> handle;
  };
  Resources used_locked() const;

  NodeDescriptor descriptor_;
  EventLoop& loop_;
  const DomainImageCaches* caches_;
  Millis service_ms_;
  CapacityObserver observer_;
  mutable std::mutex mu_;
  std::map<std::string, Allocation> allocations_;
  std::map<std::string, Hosted> hosted_;
  std::uint64_t next_allocation_ = 1;
};

}  // namespace vgw
