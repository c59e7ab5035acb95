#include "vgw/nfvi.hpp"

#include <algorithm>

namespace vgw {

void NodeDescriptor::validate() const {
  if (!is_url_safe_id(node_id)) throw Error(Errc::InvalidConfig, "node id '" + node_id + "' is not URL safe");
  if (!may_host_vnfs(domain)) throw Error(Errc::InvalidConfig, "node " + node_id + " in a domain without NFVI");
  if (cpu_capacity <= 0 || mem_capacity <= 0)
    throw Error(Errc::InvalidConfig, "node " + node_id + " capacities must be positive");
}

// ---- LoadMeter

void LoadMeter::record(Millis now, std::uint64_t n) { buckets_[now / kBucketMs] += n; }

double LoadMeter::window_rate(Millis now) const {
  const std::int64_t current = now / kBucketMs;
  const std::int64_t first = start_ / kBucketMs;
  const std::int64_t n = std::min<std::int64_t>(kWindowBuckets, current - first);
  if (n <= 0) return 0.0;
  std::uint64_t sum = 0;
  for (auto it = buckets_.lower_bound(current - n); it != buckets_.end() && it->first < current; ++it)
    sum += it->second;
  return static_cast<double>(sum) / static_cast<double>(n);
}

double LoadMeter::last_bucket_rate(Millis now) const {
  const std::int64_t current = now / kBucketMs;
  if (current - 1 < start_ / kBucketMs) return 0.0;
  auto it = buckets_.find(current - 1);
  return it == buckets_.end() ? 0.0 : static_cast<double>(it->second);
}

// ---- VnfHandle

VnfHandle::VnfHandle(EventLoop& loop, std::string instance_id, VnfType type, VnfConfig config, Millis service_ms)
    : loop_(loop),
      instance_id_(std::move(instance_id)),
      type_(type),
      function_(make_vnf_function(type)),
      service_ms_(std::max<Millis>(0, service_ms)),
      config_(std::move(config)),
      meter_(loop.now()) {}

bool VnfHandle::stopped() const {
  std::lock_guard lock(mu_);
  return stopped_;
}

void VnfHandle::submit(VnfMessage msg, OnOutput on_output, OnDrop on_drop) {
  bool start = false;
  {
    std::lock_guard lock(mu_);
    if (stopped_) throw Error(Errc::ChainUnavailable, "instance " + instance_id_ + " is stopped");
    const Millis now = loop_.now();
    meter_.record(now);
    stamp_stage_entry(msg, type_, now);
    inbox_.push_back({std::move(msg), std::move(on_output), std::move(on_drop)});
    if (!busy_) {
      busy_ = true;
      start = true;
    }
  }
  if (start) start_next();
}

void VnfHandle::start_next() {
  Job job;
  VnfConfig config;
  {
    std::lock_guard lock(mu_);
    if (inbox_.empty()) {
      busy_ = false;
      return;
    }
    job = std::move(inbox_.front());
    inbox_.pop_front();
    config = config_;
  }
  std::vector<VnfMessage> out;
  std::optional<Error> failure;
  VnfMessage original = job.msg;
  try {
    out = function_.handler(std::move(job.msg), config);
  } catch (const Error& e) {
    failure = e;
  }
  loop_.schedule_after(service_ms_, [self = shared_from_this(), job = std::move(job), out = std::move(out),
                                     failure = std::move(failure), original = std::move(original)]() mutable {
    if (failure) {
      if (job.on_drop) job.on_drop(std::move(original), *failure);
    } else if (job.on_output) {
      job.on_output(std::move(out));
    }
    self->start_next();
  });
}

void VnfHandle::stop() {
  std::lock_guard lock(mu_);
  stopped_ = true;
}

void VnfHandle::update_config(VnfConfig config) {
  std::lock_guard lock(mu_);
  config_ = std::move(config);
}

VnfConfig VnfHandle::config() const {
  std::lock_guard lock(mu_);
  return config_;
}

std::size_t VnfHandle::queued() const {
  std::lock_guard lock(mu_);
  return inbox_.size() + (busy_ ? 1 : 0);
}

double VnfHandle::window_rate(Millis now) const {
  std::lock_guard lock(mu_);
  return meter_.window_rate(now);
}

double VnfHandle::last_bucket_rate(Millis now) const {
  std::lock_guard lock(mu_);
  return meter_.last_bucket_rate(now);
}

// ---- NfviNode

NfviNode::NfviNode(NodeDescriptor descriptor, EventLoop& loop, const DomainImageCaches* caches, Millis service_ms)
    : descriptor_(std::move(descriptor)), loop_(loop), caches_(caches), service_ms_(service_ms) {
  descriptor_.validate();
}

Resources NfviNode::used_locked() const {
  Resources used;
  for (const auto& [id, a] : allocations_) {
    used.cpu_units += a.cpu_units;
    used.mem_units += a.mem_units;
  }
  return used;
}

Allocation NfviNode::allocate(const std::string& instance_id, Resources need) {
  if (need.cpu_units <= 0 || need.mem_units <= 0)
    throw Error(Errc::InvalidArgument, "resource requirements must be positive");
  Allocation a;
  Resources used;
  {
    std::lock_guard lock(mu_);
    used = used_locked();
    const Resources free{descriptor_.cpu_capacity - used.cpu_units, descriptor_.mem_capacity - used.mem_units};
    if (!free.covers(need))
      throw Error(Errc::InsufficientCapacity, "node " + descriptor_.node_id + " cannot fit (" +
                                                  std::to_string(need.cpu_units) + "," +
                                                  std::to_string(need.mem_units) + ")");
    a.allocation_id = descriptor_.node_id + "-a" + std::to_string(next_allocation_++);
    a.node_id = descriptor_.node_id;
    a.instance_id = instance_id;
    a.cpu_units = need.cpu_units;
    a.mem_units = need.mem_units;
    allocations_.emplace(a.allocation_id, a);
    used.cpu_units += need.cpu_units;
    used.mem_units += need.mem_units;
  }
  if (observer_) observer_(descriptor_, used);
  return a;
}

void NfviNode::release(const std::string& allocation_id) {
  Resources used;
  {
    std::lock_guard lock(mu_);
    auto it = allocations_.find(allocation_id);
    if (it == allocations_.end()) throw Error(Errc::UnknownAllocation, allocation_id);
    auto hosted = hosted_.find(it->second.instance_id);
    if (hosted != hosted_.end()) {
      hosted->second.handle->stop();
      hosted_.erase(hosted);
    }
    allocations_.erase(it);
    used = used_locked();
  }
  if (observer_) observer_(descriptor_, used);
}

std::shared_ptr<VnfHandle> NfviNode::run_instance(const std::string& instance_id, const std::string& image_id,
                                                  VnfType type, VnfConfig config) {
  std::lock_guard lock(mu_);
  const bool allocated = std::any_of(allocations_.begin(), allocations_.end(),
                                     [&](const auto& kv) { return kv.second.instance_id == instance_id; });
  if (!allocated) throw Error(Errc::NoAllocation, "instance " + instance_id + " has no allocation on " + node_id());
  if (caches_ == nullptr || !is_vwsn(descriptor_.domain) ||
      caches_->check(descriptor_.domain, image_id) != CacheResult::Hit)
    throw Error(Errc::ImageNotCached, "image " + image_id + " not cached in " + std::string(to_string(descriptor_.domain)));
  if (hosted_.count(instance_id)) throw Error(Errc::InvalidArgument, "instance " + instance_id + " already running");
  auto handle = std::make_shared<VnfHandle>(loop_, instance_id, type, std::move(config), service_ms_);
  hosted_.emplace(instance_id, Hosted{image_id, handle});
  return handle;
}

std::shared_ptr<VnfHandle> NfviNode::handle(const std::string& instance_id) const {
  std::lock_guard lock(mu_);
  auto it = hosted_.find(instance_id);
  return it == hosted_.end() ? nullptr : it->second.handle;
}

Resources NfviNode::free() const {
  std::lock_guard lock(mu_);
  const auto used = used_locked();
  return {descriptor_.cpu_capacity - used.cpu_units, descriptor_.mem_capacity - used.mem_units};
}

NodeReport NfviNode::report_state() const {
  const Millis now = loop_.now();
  std::lock_guard lock(mu_);
  NodeReport r;
  r.node_id = descriptor_.node_id;
  r.domain = descriptor_.domain;
  r.capacity = descriptor_.capacity();
  const auto used = used_locked();
  r.free = {descriptor_.cpu_capacity - used.cpu_units, descriptor_.mem_capacity - used.mem_units};
  for (const auto& [id, a] : allocations_) r.allocations.push_back(a);
  for (const auto& [id, h] : hosted_) {
    InstanceReport ir;
    ir.instance_id = id;
    ir.vnf_type = h.handle->vnf_type();
    ir.image_id = h.image_id;
    for (const auto& [aid, a] : allocations_) {
      if (a.instance_id == id) ir.allocation_id = aid;
    }
    ir.running = !h.handle->stopped();
    ir.observed_load = ir.running ? h.handle->window_rate(now) : 0.0;
    ir.last_bucket_rate = ir.running ? h.handle->last_bucket_rate(now) : 0.0;
    r.instances.push_back(std::move(ir));
  }
  return r;
}

}  // namespace vgw
