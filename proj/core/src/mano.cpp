#include "vgw/mano.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace vgw {

// ---- cost model and policy

double MigrationCostModel::cold_cost_ms(std::int64_t image_size_bytes) const {
  return static_cast<double>(image_size_bytes) * 1000.0 / static_cast<double>(bandwidth_bytes_per_s) +
         static_cast<double>(boot_time_ms);
}

double MigrationCostModel::warm_cost_ms() const { return static_cast<double>(state_transfer_ms + boot_time_ms); }

Millis MigrationCostModel::delay_ms(std::int64_t image_size_bytes, CacheResult cache) const {
  const double cost = cache == CacheResult::Hit ? warm_cost_ms() : cold_cost_ms(image_size_bytes);
  return static_cast<Millis>(std::llround(cost));
}

void MigrationCostModel::validate() const {
  if (bandwidth_bytes_per_s <= 0) throw Error(Errc::InvalidConfig, "bandwidth must be positive");
  if (boot_time_ms < 0 || state_transfer_ms < 0) throw Error(Errc::InvalidConfig, "negative migration time");
}

void MigrationCostModel::validate_image(std::int64_t image_size_bytes) const {
  validate();
  if (!(warm_cost_ms() < cold_cost_ms(image_size_bytes)))
    throw Error(Errc::InvalidConfig, "warm migration (" + std::to_string(warm_cost_ms()) +
                                         " ms) is not cheaper than cold migration of a " +
                                         std::to_string(image_size_bytes) + " byte image");
}

void ScalingPolicy::validate() const {
  if (!(util_target > 0.0 && util_target <= 1.0)) throw Error(Errc::InvalidConfig, "util_target must be in (0,1]");
  if (!(scale_down_threshold >= 0.0 && scale_down_threshold < util_target))
    throw Error(Errc::InvalidConfig, "scale_down_threshold must be below util_target");
  if (up_window_s < 1 || down_window_s < 1) throw Error(Errc::InvalidConfig, "scaling windows must be >= 1 s");
  if (min_instances < 1 || min_instances > max_instances)
    throw Error(Errc::InvalidConfig, "need 1 <= min_instances <= max_instances");
  if (reconcile_period_ms <= 0) throw Error(Errc::InvalidConfig, "reconcile period must be positive");
}

int desired_instances(double arrival_rate, const ScalingPolicy& policy, const VnfDescriptor& descriptor) {
  if (arrival_rate < 0.0 || !std::isfinite(arrival_rate))
    throw Error(Errc::InvalidArgument, "arrival rate must be finite and >= 0");
  const double per_instance = policy.util_target * descriptor.per_instance_capacity;
  const double raw = std::ceil(arrival_rate / per_instance - 1e-9);
  const double clamped = std::clamp(raw, static_cast<double>(policy.min_instances),
                                    static_cast<double>(policy.max_instances));
  return static_cast<int>(clamped);
}

std::string first_fit(const Resources& need, std::vector<NodeFree> nodes) {
  std::sort(nodes.begin(), nodes.end(), [](const NodeFree& a, const NodeFree& b) { return a.node_id < b.node_id; });
  for (const auto& n : nodes) {
    if (n.free.covers(need)) return n.node_id;
  }
  throw Error(Errc::NoFeasibleNode, "no node fits (" + std::to_string(need.cpu_units) + "," +
                                        std::to_string(need.mem_units) + ")");
}

std::string place(const VnfDescriptor& descriptor, const std::vector<NfviNode*>& nodes) {
  std::vector<NodeFree> free;
  for (const auto* n : nodes) free.push_back({n->node_id(), n->free()});
  return first_fit(requirements(descriptor), std::move(free));
}

ScalingDecider::ScalingDecider(ScalingPolicy policy, VnfDescriptor descriptor)
    : policy_(policy), descriptor_(std::move(descriptor)) {}

ScalingDecider::Decision ScalingDecider::observe(double sample_rate, double window_rate, int running, int pending) {
  history_.push_back(sample_rate);
  const auto keep = static_cast<std::size_t>(std::max(policy_.up_window_s, policy_.down_window_s));
  while (history_.size() > keep) history_.pop_front();

  Decision d;
  const auto up_n = static_cast<std::size_t>(policy_.up_window_s);
  if (history_.size() >= up_n) {
    const bool sustained_high =
        std::all_of(history_.end() - static_cast<std::ptrdiff_t>(up_n), history_.end(),
                    [&](double r) { return desired_instances(r, policy_, descriptor_) > running + pending; });
    if (sustained_high) {
      const int target = desired_instances(window_rate, policy_, descriptor_);
      if (target > running + pending) {
        d.scale_up = target - running - pending;
        history_.clear();
        return d;
      }
    }
  }
  const auto down_n = static_cast<std::size_t>(policy_.down_window_s);
  if (pending == 0 && running > policy_.min_instances && history_.size() >= down_n) {
    const double floor_rate = policy_.scale_down_threshold * descriptor_.per_instance_capacity * running;
    const bool sustained_low = std::all_of(history_.end() - static_cast<std::ptrdiff_t>(down_n), history_.end(),
                                           [&](double r) { return r < floor_rate; });
    if (sustained_low) {
      const int target = std::max(desired_instances(window_rate, policy_, descriptor_), policy_.min_instances);
      if (target < running) {
        d.scale_down = running - target;
        history_.clear();
      }
    }
  }
  return d;
}

std::size_t audit_divergences(const std::vector<AuditEntry>& log) {
  std::size_t bad = 0;
  std::map<std::string, LifecycleState> last;
  for (const auto& e : log) {
    auto it = last.find(e.instance_id);
    const LifecycleState expected_from = it == last.end() ? LifecycleState::Requested : it->second;
    if (e.from != expected_from) ++bad;
    try {
      if (lifecycle_next(e.from, e.event) != e.to) ++bad;
    } catch (const Error&) {
      ++bad;
    }
    last[e.instance_id] = e.to;
  }
  return bad;
}

// ---- JSON helpers

Json to_json(const VnfDescriptor& d) {
  return Json{{"vnf_type", std::string(to_string(d.vnf_type))},
              {"image_id", d.image_id},
              {"version", d.version},
              {"cpu_units", d.cpu_units},
              {"mem_units", d.mem_units},
              {"image_size_bytes", d.image_size_bytes},
              {"per_instance_capacity", d.per_instance_capacity}};
}

VnfDescriptor descriptor_from_json(const Json& j) {
  try {
    VnfDescriptor d;
    d.vnf_type = vnf_type_from_string(j.at("vnf_type").get<std::string>());
    d.image_id = j.at("image_id").get<std::string>();
    d.version = j.at("version").get<int>();
    d.cpu_units = j.at("cpu_units").get<int>();
    d.mem_units = j.at("mem_units").get<int>();
    d.image_size_bytes = j.at("image_size_bytes").get<std::int64_t>();
    d.per_instance_capacity = j.at("per_instance_capacity").get<double>();
    d.validate();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad VNF descriptor: ") + e.what());
  }
}

Json to_json(const Location& l) { return Json{{"domain", std::string(to_string(l.domain))}, {"node_id", l.node_id}}; }

Json to_json(const NodeReport& r) {
  Json j{{"node_id", r.node_id},
         {"domain", std::string(to_string(r.domain))},
         {"capacity", {{"cpu", r.capacity.cpu_units}, {"mem", r.capacity.mem_units}}},
         {"free", {{"cpu", r.free.cpu_units}, {"mem", r.free.mem_units}}},
         {"allocations", Json::array()},
         {"instances", Json::array()}};
  for (const auto& a : r.allocations) {
    j["allocations"].push_back({{"allocation_id", a.allocation_id},
                                {"instance_id", a.instance_id},
                                {"cpu_units", a.cpu_units},
                                {"mem_units", a.mem_units}});
  }
  for (const auto& i : r.instances) {
    j["instances"].push_back({{"instance_id", i.instance_id},
                              {"vnf_type", std::string(to_string(i.vnf_type))},
                              {"image_id", i.image_id},
                              {"allocation_id", i.allocation_id},
                              {"running", i.running},
                              {"observed_load", i.observed_load}});
  }
  return j;
}

namespace {

void trace_lifecycle(Trace* trace, Millis t, const AuditEntry& e) {
  if (!trace) return;
  trace->record(t, "lifecycle",
                {{"instance", e.instance_id},
                 {"domain", std::string(to_string(e.domain))},
                 {"from", std::string(to_string(e.from))},
                 {"event", std::string(to_string(e.event))},
                 {"to", std::string(to_string(e.to))}});
}

std::string error_reason(const Error& e) { return std::string(to_string(e.code())); }

}  // namespace

// ---- CoreMano

CoreMano::CoreMano(EventLoop& loop, const ImageStore& store, std::vector<NfviNode*> core_nodes,
                   MigrationCostModel cost, DomainPort& port, Trace* trace)
    : loop_(loop), store_(store), core_nodes_(std::move(core_nodes)), cost_(cost), port_(port), trace_(trace) {
  cost_.validate();
}

void CoreMano::transition(Record& r, LifecycleEvent event) {
  AuditEntry e{r.instance.instance_id, Domain::GatewayProvider, r.instance.state, event,
               lifecycle_next(r.instance.state, event)};
  r.instance.state = e.to;
  audit_.push_back(e);
  trace_lifecycle(trace_, loop_.now(), e);
}

NfviNode* CoreMano::core_node(const std::string& node_id) const {
  for (auto* n : core_nodes_) {
    if (n->node_id() == node_id) return n;
  }
  return nullptr;
}

void CoreMano::release_core(Record& r) {
  if (r.core_allocation.empty()) return;
  if (auto* n = core_node(r.core_node)) n->release(r.core_allocation);
  r.core_allocation.clear();
}

VnfInstance CoreMano::instantiate(const VnfDescriptor& descriptor) {
  descriptor.validate();
  if (!store_.find(descriptor.image_id)) throw Error(Errc::ImageNotFound, descriptor.image_id);
  std::lock_guard lock(mu_);
  char id[32];
  std::snprintf(id, sizeof id, "inst-%06llu", static_cast<unsigned long long>(next_instance_));
  std::string node_id;
  try {
    node_id = place(descriptor, core_nodes_);
  } catch (const Error&) {
    throw Error(Errc::CoreCapacityExhausted, "core layer cannot host " + std::string(to_string(descriptor.vnf_type)));
  }
  ++next_instance_;
  Record r;
  r.instance.instance_id = id;
  r.instance.descriptor = descriptor;
  r.instance.state = LifecycleState::Requested;
  r.core_node = node_id;
  r.core_allocation = core_node(node_id)->allocate(id, requirements(descriptor)).allocation_id;
  r.instance.location = Location{Domain::GatewayProvider, node_id};
  transition(r, LifecycleEvent::InstantiateDone);
  records_.emplace(id, r);
  return r.instance;
}

void CoreMano::fail(const std::string& instance_id, const std::string& reason,
                    std::function<void(MigrationOutcome)>& done) {
  MigrationOutcome out;
  {
    std::lock_guard lock(mu_);
    auto& r = records_.at(instance_id);
    if (!is_absorbing(r.instance.state)) transition(r, LifecycleEvent::Fault);
    release_core(r);
    r.in_flight = false;
    out = {instance_id, r.instance.descriptor.vnf_type, false, reason, std::nullopt};
  }
  if (trace_) trace_->record(loop_.now(), "fault", {{"instance", instance_id}, {"reason", reason}});
  if (done) done(out);
}

void CoreMano::migrate(const std::string& instance_id, Domain target, const std::string& request_id,
                       std::function<void(MigrationOutcome)> done) {
  if (!is_vwsn(target)) throw Error(Errc::NotVwsnDomain, std::string(to_string(target)));
  VnfDescriptor desc;
  {
    std::lock_guard lock(mu_);
    auto it = records_.find(instance_id);
    if (it == records_.end()) throw Error(Errc::NotFound, "instance " + instance_id);
    auto& r = it->second;
    lifecycle_next(r.instance.state, LifecycleEvent::MigrateCmd);
    if (r.in_flight) throw Error(Errc::IllegalTransition, instance_id + " is already being migrated");
    r.in_flight = true;
    desc = r.instance.descriptor;
  }
  Json params{{"instance_id", instance_id}, {"descriptor", to_json(desc)}};
  port_.call(target, "reserve", params,
             [this, instance_id, target, request_id, desc, done = std::move(done)](
                 const Json& res, const std::optional<Error>& err) mutable {
               if (err) {
                 MigrationOutcome out{instance_id, desc.vnf_type, false, error_reason(*err), std::nullopt};
                 {
                   std::lock_guard lock(mu_);
                   records_.at(instance_id).in_flight = false;
                 }
                 if (done) done(out);
                 return;
               }
               const std::string node_id = res.value("node_id", "");
               const std::string allocation_id = res.value("allocation_id", "");
               const CacheResult cache = res.value("cache", "miss") == "hit" ? CacheResult::Hit : CacheResult::Miss;
               {
                 std::lock_guard lock(mu_);
                 transition(records_.at(instance_id), LifecycleEvent::MigrateCmd);
               }
               const Millis delay = cost_.delay_ms(desc.image_size_bytes, cache);
               const Millis started = loop_.now();
               loop_.schedule_after(delay, [this, instance_id, target, request_id, desc, node_id, allocation_id,
                                            cache, delay, started, done = std::move(done)]() mutable {
                 bool fault = false;
                 {
                   std::lock_guard lock(mu_);
                   auto& pending = pending_faults_[target];
                   if (pending > 0) {
                     --pending;
                     fault = true;
                   }
                 }
                 if (trace_) {
                   trace_->record(loop_.now(), "migration",
                                  {{"instance", instance_id},
                                   {"domain", std::string(to_string(target))},
                                   {"image_id", desc.image_id},
                                   {"cache", cache == CacheResult::Hit ? "hit" : "miss"},
                                   {"expected_ms", delay},
                                   {"delay_ms", loop_.now() - started},
                                   {"outcome", fault ? "fault" : "transferred"}});
                 }
                 if (fault) {
                   port_.call(target, "release", Json{{"allocation_id", allocation_id}}, nullptr);
                   fail(instance_id, "TransferFault", done);
                   return;
                 }
                 Json adopt{{"instance_id", instance_id}, {"descriptor", to_json(desc)}, {"node_id", node_id},
                            {"allocation_id", allocation_id}, {"request_id", request_id}};
                 port_.call(target, "adopt", adopt,
                            [this, instance_id, target, node_id, allocation_id, desc, done = std::move(done)](
                                const Json&, const std::optional<Error>& err) mutable {
                              if (err) {
                                port_.call(target, "release", Json{{"allocation_id", allocation_id}}, nullptr);
                                fail(instance_id, error_reason(*err), done);
                                return;
                              }
                              MigrationOutcome out;
                              {
                                std::lock_guard lock(mu_);
                                auto& r = records_.at(instance_id);
                                r.handed_over = true;
                                r.in_flight = false;
                                r.instance.state = LifecycleState::Running;
                                r.instance.location = Location{target, node_id};
                                release_core(r);
                                out = {instance_id, desc.vnf_type, true, "", r.instance.location};
                              }
                              if (done) done(out);
                            });
               });
             });
}

void CoreMano::provision(const std::string& request_id, Domain target, const std::vector<VnfDescriptor>& descriptors,
                         std::function<void(std::vector<MigrationOutcome>)> done) {
  for (const auto& d : descriptors) {
    if (!store_.find(d.image_id)) throw Error(Errc::ImageNotFound, d.image_id);
  }
  struct Gather {
    std::vector<MigrationOutcome> outcomes;
    std::size_t remaining = 0;
    std::function<void(std::vector<MigrationOutcome>)> done;
  };
  auto gather = std::make_shared<Gather>();
  gather->outcomes.resize(descriptors.size());
  gather->remaining = descriptors.size();
  gather->done = std::move(done);
  auto finish = [gather](std::size_t i, MigrationOutcome out) {
    gather->outcomes[i] = std::move(out);
    if (--gather->remaining == 0 && gather->done) gather->done(gather->outcomes);
  };
  if (descriptors.empty()) {
    if (gather->done) gather->done({});
    return;
  }
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const auto& d = descriptors[i];
    std::string instance_id;
    {
      std::lock_guard lock(mu_);
      for (auto& [id, r] : records_) {
        if (r.instance.state == LifecycleState::Instantiated && !r.in_flight && !r.handed_over &&
            r.instance.descriptor.vnf_type == d.vnf_type && r.instance.descriptor.image_id == d.image_id) {
          instance_id = id;
          break;
        }
      }
    }
    if (instance_id.empty()) {
      try {
        instance_id = instantiate(d).instance_id;
      } catch (const Error& e) {
        finish(i, {"", d.vnf_type, false, error_reason(e), std::nullopt});
        continue;
      }
    }
    migrate(instance_id, target, request_id, [finish, i](MigrationOutcome out) { finish(i, std::move(out)); });
  }
}

void CoreMano::inject_transfer_faults(Domain domain, int count) {
  std::lock_guard lock(mu_);
  pending_faults_[domain] += count;
}

std::optional<VnfInstance> CoreMano::instance(const std::string& instance_id) const {
  std::lock_guard lock(mu_);
  auto it = records_.find(instance_id);
  if (it == records_.end()) return std::nullopt;
  return it->second.instance;
}

std::vector<VnfInstance> CoreMano::instances() const {
  std::lock_guard lock(mu_);
  std::vector<VnfInstance> out;
  for (const auto& [id, r] : records_) out.push_back(r.instance);
  return out;
}

std::vector<AuditEntry> CoreMano::audit() const {
  std::lock_guard lock(mu_);
  return audit_;
}

// ---- DomainMano

DomainMano::DomainMano(Domain domain, EventLoop& loop, std::vector<NfviNode*> nodes, DomainImageCaches& caches,
                       ScalingPolicy policy, Trace* trace)
    : domain_(domain), loop_(loop), nodes_(std::move(nodes)), caches_(caches), policy_(policy), trace_(trace) {
  if (!is_vwsn(domain_)) throw Error(Errc::NotVwsnDomain, std::string(to_string(domain_)));
  policy_.validate();
}

DomainMano::~DomainMano() { stop_reconcile(); }

void DomainMano::transition(Record& r, LifecycleEvent event) {
  AuditEntry e{r.instance.instance_id, domain_, r.instance.state, event, lifecycle_next(r.instance.state, event)};
  r.instance.state = e.to;
  if (e.to != LifecycleState::Running) r.instance.observed_load = 0.0;
  audit_.push_back(e);
  trace_lifecycle(trace_, loop_.now(), e);
}

NfviNode* DomainMano::node(const std::string& node_id) const {
  for (auto* n : nodes_) {
    if (n->node_id() == node_id) return n;
  }
  return nullptr;
}

Json DomainMano::handle_rpc(const std::string& method, const Json& params) {
  std::lock_guard lock(mu_);
  if (method == "reserve") {
    const auto desc = descriptor_from_json(params.at("descriptor"));
    const auto instance_id = params.at("instance_id").get<std::string>();
    const auto node_id = place(desc, nodes_);
    const auto alloc = node(node_id)->allocate(instance_id, requirements(desc));
    const auto cache = caches_.check(domain_, desc.image_id);
    return Json{{"node_id", node_id},
                {"allocation_id", alloc.allocation_id},
                {"cache", cache == CacheResult::Hit ? "hit" : "miss"}};
  }
  if (method == "release") {
    const auto allocation_id = params.at("allocation_id").get<std::string>();
    for (auto* n : nodes_) {
      for (const auto& a : n->report_state().allocations) {
        if (a.allocation_id == allocation_id) {
          n->release(allocation_id);
          return Json{{"released", allocation_id}};
        }
      }
    }
    throw Error(Errc::UnknownAllocation, allocation_id);
  }
  if (method == "adopt") {
    const auto desc = descriptor_from_json(params.at("descriptor"));
    const auto instance_id = params.at("instance_id").get<std::string>();
    const auto node_id = params.at("node_id").get<std::string>();
    const auto request_id = params.value("request_id", "");
    if (records_.count(instance_id)) throw Error(Errc::IllegalTransition, instance_id + " already adopted");
    auto* n = node(node_id);
    if (!n) throw Error(Errc::NotFound, "node " + node_id);
    caches_.insert(domain_, desc.image_id);
    VnfConfig config = resolver_ ? resolver_(request_id, desc.vnf_type) : VnfConfig{};
    n->run_instance(instance_id, desc.image_id, desc.vnf_type, std::move(config));
    Record r;
    r.instance.instance_id = instance_id;
    r.instance.descriptor = desc;
    r.instance.state = LifecycleState::Migrating;
    r.instance.location = Location{domain_, node_id};
    r.allocation_id = params.at("allocation_id").get<std::string>();
    r.node_id = node_id;
    r.image_id = desc.image_id;
    r.order = next_order_++;
    transition(r, LifecycleEvent::MigrateDone);
    records_.emplace(instance_id, r);
    return Json{{"instance_id", instance_id}, {"state", "Running"}, {"location", to_json(*r.instance.location)}};
  }
  if (method == "report_state") {
    Json out = Json::array();
    for (const auto& rep : report_state()) out.push_back(to_json(rep));
    return out;
  }
  throw Error(Errc::NotFound, "unknown method " + method);
}

void DomainMano::retire(Record& r) {
  if (auto* n = node(r.node_id)) {
    try {
      n->release(r.allocation_id);
    } catch (const Error&) {
    }
  }
}

void DomainMano::terminate(const std::string& instance_id) {
  std::lock_guard lock(mu_);
  auto it = records_.find(instance_id);
  if (it == records_.end()) throw Error(Errc::NotFound, "instance " + instance_id);
  lifecycle_next(it->second.instance.state, LifecycleEvent::TerminateCmd);
  remove_from_pools(instance_id);
  transition(it->second, LifecycleEvent::TerminateCmd);
  retire(it->second);
}

void DomainMano::update(const std::string& instance_id, VnfConfig config) {
  std::lock_guard lock(mu_);
  auto it = records_.find(instance_id);
  if (it == records_.end()) throw Error(Errc::NotFound, "instance " + instance_id);
  transition(it->second, LifecycleEvent::UpdateCmd);
  if (auto h = handle(instance_id)) h->update_config(std::move(config));
}

void DomainMano::fail(const std::string& instance_id, const std::string& reason) {
  std::lock_guard lock(mu_);
  auto it = records_.find(instance_id);
  if (it == records_.end()) throw Error(Errc::NotFound, "instance " + instance_id);
  remove_from_pools(instance_id);
  transition(it->second, LifecycleEvent::Fault);
  retire(it->second);
  if (trace_) trace_->record(loop_.now(), "fault", {{"instance", instance_id}, {"reason", reason}});
}

std::optional<VnfInstance> DomainMano::instance(const std::string& instance_id) const {
  std::lock_guard lock(mu_);
  auto it = records_.find(instance_id);
  if (it == records_.end()) return std::nullopt;
  auto inst = it->second.instance;
  if (inst.state == LifecycleState::Running) {
    if (auto h = handle(instance_id)) inst.observed_load = h->window_rate(loop_.now());
  }
  return inst;
}

std::vector<VnfInstance> DomainMano::instances() const {
  std::lock_guard lock(mu_);
  std::vector<VnfInstance> out;
  for (const auto& [id, r] : records_) out.push_back(*instance(id));
  return out;
}

std::shared_ptr<VnfHandle> DomainMano::handle(const std::string& instance_id) const {
  std::lock_guard lock(mu_);
  auto it = records_.find(instance_id);
  if (it == records_.end()) return nullptr;
  if (auto* n = node(it->second.node_id)) return n->handle(instance_id);
  return nullptr;
}

std::vector<NodeReport> DomainMano::report_state() const {
  std::vector<NodeReport> out;
  for (const auto* n : nodes_) out.push_back(n->report_state());
  return out;
}

std::vector<AuditEntry> DomainMano::audit() const {
  std::lock_guard lock(mu_);
  return audit_;
}

void DomainMano::register_service(const std::string& service_id, std::vector<VnfDescriptor> descriptors) {
  std::lock_guard lock(mu_);
  auto& s = services_[service_id];
  for (auto& d : descriptors) {
    s.deciders.erase(d.vnf_type);
    s.deciders.emplace(d.vnf_type, ScalingDecider(policy_, d));
    s.pools[d.vnf_type];
    s.descriptors[d.vnf_type] = std::move(d);
  }
}

bool DomainMano::has_service(const std::string& service_id) const {
  std::lock_guard lock(mu_);
  return services_.count(service_id) > 0;
}

void DomainMano::add_to_pool(const std::string& service_id, const std::string& instance_id) {
  std::lock_guard lock(mu_);
  auto sit = services_.find(service_id);
  if (sit == services_.end()) throw Error(Errc::NotFound, "service " + service_id);
  auto rit = records_.find(instance_id);
  if (rit == records_.end()) throw Error(Errc::NotFound, "instance " + instance_id);
  if (rit->second.instance.state != LifecycleState::Running)
    throw Error(Errc::ChainUnavailable, instance_id + " is not Running");
  const auto type = rit->second.instance.descriptor.vnf_type;
  auto& pool = sit->second.pools[type];
  if (std::find(pool.begin(), pool.end(), instance_id) != pool.end()) return;
  pool.push_back(instance_id);
  rit->second.instance.chain_id = service_id;
  if (trace_) {
    trace_->record(loop_.now(), "instances",
                   {{"domain", std::string(to_string(domain_))},
                    {"service", service_id},
                    {"vnf_type", std::string(to_string(type))},
                    {"running", pool.size()}});
  }
}

void DomainMano::remove_from_pools(const std::string& instance_id) {
  for (auto& [sid, s] : services_) {
    for (auto& [type, pool] : s.pools) {
      auto it = std::find(pool.begin(), pool.end(), instance_id);
      if (it == pool.end()) continue;
      pool.erase(it);
      if (trace_) {
        trace_->record(loop_.now(), "instances",
                       {{"domain", std::string(to_string(domain_))},
                        {"service", sid},
                        {"vnf_type", std::string(to_string(type))},
                        {"running", pool.size()}});
      }
    }
  }
}

std::vector<std::string> DomainMano::pool(const std::string& service_id, VnfType type) const {
  std::lock_guard lock(mu_);
  auto sit = services_.find(service_id);
  if (sit == services_.end()) return {};
  auto pit = sit->second.pools.find(type);
  return pit == sit->second.pools.end() ? std::vector<std::string>{} : pit->second;
}

int DomainMano::pending(const std::string& service_id, VnfType type) const {
  std::lock_guard lock(mu_);
  auto sit = services_.find(service_id);
  if (sit == services_.end()) return 0;
  auto pit = sit->second.pending.find(type);
  return pit == sit->second.pending.end() ? 0 : pit->second;
}

void DomainMano::settle_pending(const std::string& service_id, VnfType type, int count) {
  std::lock_guard lock(mu_);
  auto sit = services_.find(service_id);
  if (sit == services_.end()) return;
  auto& p = sit->second.pending[type];
  p = std::max(0, p - count);
}

std::vector<ScaleAction> DomainMano::reconcile() {
  std::vector<ScaleAction> actions;
  {
    std::lock_guard lock(mu_);
    const Millis now = loop_.now();
    for (auto& [sid, s] : services_) {
      for (auto& [type, decider] : s.deciders) {
        auto& pool = s.pools[type];
        double sample = 0.0;
        double window = 0.0;
        for (const auto& id : pool) {
          if (auto h = handle(id)) {
            sample += h->last_bucket_rate(now);
            window += h->window_rate(now);
          }
        }
        const int running = static_cast<int>(pool.size());
        int& pending = s.pending[type];
        const auto d = decider.observe(sample, window, running, pending);
        if (d.scale_up > 0) {
          pending += d.scale_up;
          actions.push_back({ScaleAction::Kind::ScaleUp, sid, type, d.scale_up, ""});
        }
        for (int k = 0; k < d.scale_down && k < running; ++k) {
          actions.push_back({ScaleAction::Kind::Terminate, sid, type, 0, pool[pool.size() - 1 - k]});
        }
        if (trace_ && (d.scale_up > 0 || d.scale_down > 0)) {
          trace_->record(now, "scale",
                         {{"domain", std::string(to_string(domain_))},
                          {"service", sid},
                          {"vnf_type", std::string(to_string(type))},
                          {"action", d.scale_up > 0 ? "up" : "down"},
                          {"count", d.scale_up > 0 ? d.scale_up : d.scale_down},
                          {"running", running},
                          {"sample_rate", sample},
                          {"window_rate", window}});
        }
      }
    }
    for (const auto& a : actions) {
      if (a.kind == ScaleAction::Kind::Terminate) terminate(a.instance_id);
    }
  }
  for (const auto& a : actions) {
    if (a.kind == ScaleAction::Kind::ScaleUp && requester_) requester_(a.service_id, a.vnf_type, a.count);
  }
  return actions;
}

void DomainMano::schedule_tick() {
  const Millis period = policy_.reconcile_period_ms;
  const Millis next = (loop_.now() / period + 1) * period;
  tick_ = loop_.schedule_at(next, [this] {
    {
      std::lock_guard lock(mu_);
      if (!reconciling_) return;
    }
    reconcile();
    schedule_tick();
  });
}

void DomainMano::start_reconcile() {
  {
    std::lock_guard lock(mu_);
    if (reconciling_) return;
    reconciling_ = true;
  }
  schedule_tick();
}

void DomainMano::stop_reconcile() {
  std::lock_guard lock(mu_);
  reconciling_ = false;
  if (tick_) loop_.cancel(*tick_);
  tick_.reset();
}

// ---- LocalDomainPort

void LocalDomainPort::call(Domain domain, const std::string& method, Json params, Reply reply) {
  loop_.schedule_after(latency_, [this, domain, method, params = std::move(params), reply = std::move(reply)] {
    Json result;
    std::optional<Error> error;
    auto it = manos_.find(domain);
    if (it == manos_.end()) {
      error = Error(Errc::NotFound, "no MANO for " + std::string(to_string(domain)));
    } else {
      try {
        result = it->second->handle_rpc(method, params);
      } catch (const Error& e) {
        error = e;
      }
    }
    if (!reply) return;
    loop_.schedule_after(latency_, [reply, result = std::move(result), error = std::move(error)] { reply(result, error); });
  });
}

}  // namespace vgw
