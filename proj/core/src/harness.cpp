#include "vgw/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include <unistd.h>

namespace vgw {

std::string_view to_string(ClockMode m) noexcept { return m == ClockMode::Virtual ? "virtual" : "real"; }
std::string_view to_string(ProcessMode m) noexcept { return m == ProcessMode::Single ? "single" : "split"; }

ClockMode clock_mode_from_string(std::string_view s) {
  if (s == "virtual") return ClockMode::Virtual;
  if (s == "real") return ClockMode::Real;
  throw Error(Errc::InvalidConfig, "unknown clock mode '" + std::string(s) + "'");
}

ProcessMode process_mode_from_string(std::string_view s) {
  if (s == "single") return ProcessMode::Single;
  if (s == "split") return ProcessMode::Split;
  throw Error(Errc::InvalidConfig, "unknown process mode '" + std::string(s) + "'");
}

namespace {

const char* fault_kind_name(FaultSpec::Kind k) {
  switch (k) {
    case FaultSpec::Kind::TransferFault: return "transfer_fault";
    case FaultSpec::Kind::HostDown: return "host_down";
    case FaultSpec::Kind::HostUp: return "host_up";
    case FaultSpec::Kind::KillStage: return "kill_stage";
  }
  return "?";
}

FaultSpec::Kind fault_kind_from(std::string_view s) {
  for (auto k : {FaultSpec::Kind::TransferFault, FaultSpec::Kind::HostDown, FaultSpec::Kind::HostUp,
                 FaultSpec::Kind::KillStage}) {
    if (s == fault_kind_name(k)) return k;
  }
  throw Error(Errc::InvalidConfig, "unknown fault kind '" + std::string(s) + "'");
}

std::string str(std::string_view s) { return std::string(s); }

bool valid_host(const std::string& h) { return h == "gateway" || h == "vwsn1" || h == "vwsn2" || h == "app"; }

Json pattern_json(const CollectionPattern& p) {
  if (p.kind == CollectionPattern::Kind::Once) return {{"kind", "once"}};
  return {{"kind", "periodic"}, {"interval_ms", p.interval_ms}};
}

CollectionPattern pattern_from(const Json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "once") return CollectionPattern::once();
  if (kind == "periodic") return CollectionPattern::periodic(j.at("interval_ms").get<Millis>());
  throw Error(Errc::InvalidConfig, "unknown pattern kind '" + kind + "'");
}

}  // namespace

// ---- ScenarioConfig

ScenarioConfig::ScenarioConfig() {
  nodes[Domain::GatewayProvider] = {{"core-0", Domain::GatewayProvider, 32, 32}};
  nodes[Domain::VWSN1] = {{"v1-n0", Domain::VWSN1, 8, 8}, {"v1-n1", Domain::VWSN1, 8, 8}};
  nodes[Domain::VWSN2] = {{"v2-n0", Domain::VWSN2, 8, 8}, {"v2-n1", Domain::VWSN2, 8, 8}};
  for (auto t : kAllVnfTypes) {
    VnfSpec s;
    s.vnf_type = t;
    vnfs[t] = s;
  }
}

std::vector<Domain> ScenarioConfig::effective_providers() const {
  if (!providers.empty()) return providers;
  std::set<Domain> out;
  for (const auto& s : sensors) out.insert(home_domain(s.brand));
  if (load) out.insert(load->provider);
  if (out.empty()) return {Domain::VWSN1, Domain::VWSN2};
  return {out.begin(), out.end()};
}

void ScenarioConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
  if (duration_ms < 0) bad("duration_ms must be >= 0");
  if (base_epoch_ms <= 0) bad("base_epoch_ms must be > 0");
  if (leg_timeout_ms <= 0) bad("leg_timeout_ms must be > 0");
  if (drain_ms < 0) bad("drain_ms must be >= 0");
  if (max_ms < 0) bad("max_ms must be >= 0");
  if (stage_service_ms < 0) bad("stage_service_ms must be >= 0");
  if (latency.control_ms < 0 || latency.data_ms < 0) bad("latency must be >= 0");
  if (processes == ProcessMode::Split && clock != ClockMode::Real) bad("split processes need the real clock");
  cost.validate();
  scaling.validate();

  std::set<std::string> node_ids;
  for (const auto& [domain, list] : nodes) {
    if (!may_host_vnfs(domain)) bad("nodes given for " + str(to_string(domain)));
    for (const auto& n : list) {
      n.validate();
      if (n.domain != domain) bad("node " + n.node_id + " listed under the wrong domain");
      if (!node_ids.insert(n.node_id).second) bad("duplicate node id " + n.node_id);
    }
  }
  for (auto t : kAllVnfTypes) {
    auto it = vnfs.find(t);
    if (it == vnfs.end()) bad("missing vnf spec for " + str(to_string(t)));
    const auto& s = it->second;
    if (s.vnf_type != t) bad("vnf spec keyed under the wrong type");
    if (s.version <= 0 || s.cpu_units <= 0 || s.mem_units <= 0 || s.image_size_bytes <= 0 ||
        !(s.per_instance_capacity > 0))
      bad("vnf spec for " + str(to_string(t)) + " needs positive fields");
    cost.validate_image(s.image_size_bytes);
  }

  std::set<std::string> ids;
  for (const auto& s : sensors) {
    if (!is_url_safe_id(s.sensor_id)) bad("sensor id '" + s.sensor_id + "' is not URL safe");
    if (!ids.insert(s.sensor_id).second) bad("duplicate sensor id " + s.sensor_id);
    if (s.quantities.empty()) bad("sensor " + s.sensor_id + " has no quantities");
    if (s.pattern.kind == CollectionPattern::Kind::Periodic && s.pattern.interval_ms < kMinPeriodicIntervalMs)
      bad("sensor " + s.sensor_id + " interval below " + std::to_string(kMinPeriodicIntervalMs) + " ms");
    if (s.brand == SensorBrand::BrandB) {
      if (s.sensor_id.size() > 5 || !std::all_of(s.sensor_id.begin(), s.sensor_id.end(),
                                                 [](char c) { return c >= '0' && c <= '9'; }) ||
          std::stoul(s.sensor_id) > 65535)
        bad("BrandB sensor id '" + s.sensor_id + "' must be a number in 0..65535");
      for (auto q : s.quantities) {
        if (q != Quantity::Temperature && q != Quantity::Humidity)
          bad("BrandB sensor " + s.sensor_id + " cannot report " + str(to_string(q)));
      }
      if (s.pattern.kind == CollectionPattern::Kind::Periodic && s.pattern.interval_ms % 1000 != 0)
        bad("BrandB sensor " + s.sensor_id + " interval must be whole seconds");
    }
  }
  for (auto p : providers) {
    if (!is_vwsn(p)) bad("provider " + str(to_string(p)) + " is not a VWSN domain");
  }
  if (load) {
    if (!is_vwsn(load->provider)) bad("load provider must be a VWSN domain");
    if (load->sensors <= 0 || load->sensors > 999) bad("load sensors must be in 1..999");
    if (load->end_ms < 0) bad("load end_ms must be >= 0");
    Millis prev = -1;
    for (const auto& st : load->steps) {
      if (st.at_ms <= prev) bad("load steps must be strictly ascending");
      if (!(st.rate >= 0) || st.rate > 10'000) bad("load rate must be in 0..10000");
      prev = st.at_ms;
    }
  }
  for (const auto& f : faults) {
    if (f.at_ms < 0) bad("fault at_ms must be >= 0");
    switch (f.kind) {
      case FaultSpec::Kind::TransferFault:
        if (!is_vwsn(f.domain)) bad("transfer fault domain must be a VWSN domain");
        if (f.count <= 0) bad("transfer fault count must be > 0");
        break;
      case FaultSpec::Kind::HostDown:
      case FaultSpec::Kind::HostUp:
        if (!valid_host(f.host)) bad("unknown host '" + f.host + "'");
        if (processes != ProcessMode::Single) bad("host faults need single-process mode");
        break;
      case FaultSpec::Kind::KillStage:
        if (!is_vwsn(f.domain) || served_domain(f.vnf_type) != f.domain)
          bad("kill_stage type does not belong to the domain");
        break;
    }
  }
}

Json ScenarioConfig::to_json() const {
  Json j;
  j["seed"] = seed;
  j["duration_ms"] = duration_ms;
  j["base_epoch_ms"] = base_epoch_ms;
  j["clock"] = str(vgw::to_string(clock));
  j["processes"] = str(vgw::to_string(processes));
  j["sensors"] = Json::array();
  for (const auto& s : sensors) {
    Json q = Json::array();
    for (auto x : s.quantities) q.push_back(str(vgw::to_string(x)));
    j["sensors"].push_back({{"brand", str(vgw::to_string(s.brand))},
                            {"sensor_id", s.sensor_id},
                            {"quantities", q},
                            {"pattern", pattern_json(s.pattern)}});
  }
  j["providers"] = Json::array();
  for (auto p : providers) j["providers"].push_back(str(vgw::to_string(p)));
  j["nodes"] = Json::array();
  for (const auto& [d, list] : nodes) {
    for (const auto& n : list) {
      j["nodes"].push_back({{"node_id", n.node_id},
                            {"domain", str(vgw::to_string(n.domain))},
                            {"cpu_capacity", n.cpu_capacity},
                            {"mem_capacity", n.mem_capacity}});
    }
  }
  j["cost"] = {{"bandwidth_bytes_per_s", cost.bandwidth_bytes_per_s},
               {"boot_time_ms", cost.boot_time_ms},
               {"state_transfer_ms", cost.state_transfer_ms}};
  j["scaling"] = {{"util_target", scaling.util_target},
                  {"scale_down_threshold", scaling.scale_down_threshold},
                  {"up_window_s", scaling.up_window_s},
                  {"down_window_s", scaling.down_window_s},
                  {"min_instances", scaling.min_instances},
                  {"max_instances", scaling.max_instances},
                  {"reconcile_period_ms", scaling.reconcile_period_ms}};
  j["vnfs"] = Json::array();
  for (const auto& [t, s] : vnfs) {
    j["vnfs"].push_back({{"vnf_type", str(vgw::to_string(t))},
                         {"version", s.version},
                         {"cpu_units", s.cpu_units},
                         {"mem_units", s.mem_units},
                         {"image_size_bytes", s.image_size_bytes},
                         {"per_instance_capacity", s.per_instance_capacity}});
  }
  j["latency"] = {{"control_ms", latency.control_ms}, {"data_ms", latency.data_ms}};
  j["stage_service_ms"] = stage_service_ms;
  j["faults"] = Json::array();
  for (const auto& f : faults) {
    Json fj{{"at_ms", f.at_ms}, {"kind", fault_kind_name(f.kind)}};
    switch (f.kind) {
      case FaultSpec::Kind::TransferFault:
        fj["domain"] = str(vgw::to_string(f.domain));
        fj["count"] = f.count;
        break;
      case FaultSpec::Kind::HostDown:
      case FaultSpec::Kind::HostUp: fj["host"] = f.host; break;
      case FaultSpec::Kind::KillStage:
        fj["domain"] = str(vgw::to_string(f.domain));
        fj["vnf_type"] = str(vgw::to_string(f.vnf_type));
        break;
    }
    j["faults"].push_back(fj);
  }
  if (load) {
    Json steps = Json::array();
    for (const auto& st : load->steps) steps.push_back({{"at_ms", st.at_ms}, {"rate", st.rate}});
    j["load"] = {{"provider", str(vgw::to_string(load->provider))},
                 {"sensors", load->sensors},
                 {"steps", steps},
                 {"end_ms", load->end_ms}};
  } else {
    j["load"] = nullptr;
  }
  j["leg_timeout_ms"] = leg_timeout_ms;
  j["drain_ms"] = drain_ms;
  j["max_ms"] = max_ms;
  j["trace_data"] = trace_data;
  j["image_root"] = image_root;
  return j;
}

ScenarioConfig ScenarioConfig::from_json(const Json& j) {
  ScenarioConfig c;
  try {
    if (!j.is_object()) throw Error(Errc::InvalidConfig, "config must be a JSON object");
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("seed", c.seed);
    get("duration_ms", c.duration_ms);
    get("base_epoch_ms", c.base_epoch_ms);
    if (j.contains("clock")) c.clock = clock_mode_from_string(j.at("clock").get<std::string>());
    if (j.contains("processes")) c.processes = process_mode_from_string(j.at("processes").get<std::string>());
    if (j.contains("sensors")) {
      for (const auto& s : j.at("sensors")) {
        SensorSpec spec;
        spec.brand = brand_from_string(s.at("brand").get<std::string>());
        spec.sensor_id = s.at("sensor_id").get<std::string>();
        if (s.contains("quantities")) {
          spec.quantities.clear();
          for (const auto& q : s.at("quantities")) spec.quantities.push_back(quantity_from_string(q.get<std::string>()));
        }
        if (s.contains("pattern")) spec.pattern = pattern_from(s.at("pattern"));
        c.sensors.push_back(std::move(spec));
      }
    }
    if (j.contains("providers")) {
      for (const auto& p : j.at("providers")) c.providers.push_back(domain_from_string(p.get<std::string>()));
    }
    if (j.contains("nodes")) {
      c.nodes.clear();
      for (const auto& n : j.at("nodes")) {
        NodeDescriptor d;
        d.node_id = n.at("node_id").get<std::string>();
        d.domain = domain_from_string(n.at("domain").get<std::string>());
        d.cpu_capacity = n.at("cpu_capacity").get<int>();
        d.mem_capacity = n.at("mem_capacity").get<int>();
        c.nodes[d.domain].push_back(d);
      }
    }
    if (j.contains("cost")) {
      const auto& k = j.at("cost");
      c.cost.bandwidth_bytes_per_s = k.value("bandwidth_bytes_per_s", c.cost.bandwidth_bytes_per_s);
      c.cost.boot_time_ms = k.value("boot_time_ms", c.cost.boot_time_ms);
      c.cost.state_transfer_ms = k.value("state_transfer_ms", c.cost.state_transfer_ms);
    }
    if (j.contains("scaling")) {
      const auto& k = j.at("scaling");
      auto& s = c.scaling;
      s.util_target = k.value("util_target", s.util_target);
      s.scale_down_threshold = k.value("scale_down_threshold", s.scale_down_threshold);
      s.up_window_s = k.value("up_window_s", s.up_window_s);
      s.down_window_s = k.value("down_window_s", s.down_window_s);
      s.min_instances = k.value("min_instances", s.min_instances);
      s.max_instances = k.value("max_instances", s.max_instances);
      s.reconcile_period_ms = k.value("reconcile_period_ms", s.reconcile_period_ms);
    }
    if (j.contains("vnfs")) {
      for (const auto& v : j.at("vnfs")) {
        const auto t = vnf_type_from_string(v.at("vnf_type").get<std::string>());
        auto& s = c.vnfs[t];
        s.vnf_type = t;
        s.version = v.value("version", s.version);
        s.cpu_units = v.value("cpu_units", s.cpu_units);
        s.mem_units = v.value("mem_units", s.mem_units);
        s.image_size_bytes = v.value("image_size_bytes", s.image_size_bytes);
        s.per_instance_capacity = v.value("per_instance_capacity", s.per_instance_capacity);
      }
    }
    if (j.contains("latency")) {
      c.latency.control_ms = j.at("latency").value("control_ms", c.latency.control_ms);
      c.latency.data_ms = j.at("latency").value("data_ms", c.latency.data_ms);
    }
    get("stage_service_ms", c.stage_service_ms);
    if (j.contains("faults")) {
      for (const auto& f : j.at("faults")) {
        FaultSpec s;
        s.at_ms = f.at("at_ms").get<Millis>();
        s.kind = fault_kind_from(f.at("kind").get<std::string>());
        if (f.contains("domain")) s.domain = domain_from_string(f.at("domain").get<std::string>());
        if (f.contains("host")) s.host = f.at("host").get<std::string>();
        if (f.contains("vnf_type")) s.vnf_type = vnf_type_from_string(f.at("vnf_type").get<std::string>());
        s.count = f.value("count", s.count);
        c.faults.push_back(s);
      }
    }
    if (j.contains("load") && !j.at("load").is_null()) {
      const auto& l = j.at("load");
      LoadSpec spec;
      if (l.contains("provider")) spec.provider = domain_from_string(l.at("provider").get<std::string>());
      spec.sensors = l.value("sensors", spec.sensors);
      spec.end_ms = l.value("end_ms", spec.end_ms);
      for (const auto& st : l.value("steps", Json::array()))
        spec.steps.push_back({st.at("at_ms").get<Millis>(), st.at("rate").get<double>()});
      c.load = spec;
    }
    get("leg_timeout_ms", c.leg_timeout_ms);
    get("drain_ms", c.drain_ms);
    get("max_ms", c.max_ms);
    get("trace_data", c.trace_data);
    get("image_root", c.image_root);
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidConfig) throw;
    throw Error(Errc::InvalidConfig, e.what());
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::prototype() {
  ScenarioConfig c;
  const std::vector<std::vector<Quantity>> qa{{Quantity::Temperature}, {Quantity::Humidity},
                                              {Quantity::WindSpeed},   {Quantity::CO2},
                                              {Quantity::Rainfall},    {Quantity::Temperature, Quantity::Humidity}};
  for (std::size_t i = 0; i < qa.size(); ++i)
    c.sensors.push_back({SensorBrand::BrandA, "A" + std::to_string(i + 1), qa[i], CollectionPattern::periodic(1000)});
  c.sensors.push_back({SensorBrand::BrandB, "7", {Quantity::Temperature}, CollectionPattern::periodic(1000)});
  c.sensors.push_back({SensorBrand::BrandB, "8", {Quantity::Humidity}, CollectionPattern::periodic(1000)});
  return c;
}

ScenarioConfig ScenarioConfig::elasticity() {
  ScenarioConfig c;
  c.duration_ms = 0;
  c.providers = {Domain::VWSN1};
  c.cost.boot_time_ms = 1000;
  c.cost.state_transfer_ms = 100;
  for (auto& [t, s] : c.vnfs) s.image_size_bytes = 50'000'000;
  c.nodes[Domain::GatewayProvider] = {{"core-0", Domain::GatewayProvider, 16, 16}};
  LoadSpec l;
  l.provider = Domain::VWSN1;
  l.sensors = 20;
  l.steps = {{0, 10.0}, {30'000, 200.0}, {70'000, 10.0}};
  l.end_ms = 130'000;
  c.load = l;
  return c;
}

// ---- sensors

namespace {

struct QuantityRange {
  double lo, hi, step;
};

QuantityRange range_of(Quantity q) {
  switch (q) {
    case Quantity::Temperature: return {15.0, 45.0, 0.5};
    case Quantity::Humidity: return {20.0, 95.0, 1.0};
    case Quantity::WindSpeed: return {0.0, 30.0, 0.5};
    case Quantity::CO2: return {350.0, 1000.0, 5.0};
    case Quantity::Rainfall: return {0.0, 50.0, 0.5};
  }
  return {0.0, 1.0, 0.1};
}

// Raw ADC ranges for BrandB: 15..45 Cel and about 19..92 %RH.
QuantityRange raw_range_of(Quantity q) {
  if (q == Quantity::Temperature) return {5460.0, 8460.0, 20.0};
  return {600.0, 3000.0, 20.0};
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t sensor_seed(std::uint64_t scenario_seed, const std::string& sensor_id) {
  return splitmix(scenario_seed ^ fnv1a(sensor_id));
}

SensorEmulator::SensorEmulator(SensorSpec spec, std::uint64_t seed, Millis base_epoch_ms)
    : spec_(std::move(spec)), base_epoch_ms_(base_epoch_ms), rng_(seed) {
  if (spec_.quantities.empty()) throw Error(Errc::InvalidArgument, "sensor without quantities");
  for (auto q : spec_.quantities) {
    const auto r = spec_.brand == SensorBrand::BrandA ? range_of(q) : raw_range_of(q);
    std::uniform_real_distribution<double> init(r.lo, r.hi);
    state_[q] = init(rng_);
  }
}

Frame SensorEmulator::next(Millis now) {
  const auto q = spec_.quantities[seq_ % spec_.quantities.size()];
  const bool brand_a = spec_.brand == SensorBrand::BrandA;
  const auto r = brand_a ? range_of(q) : raw_range_of(q);
  std::uniform_real_distribution<double> step(-r.step, r.step);
  auto& v = state_[q];
  v = std::clamp(v + step(rng_), r.lo, r.hi);
  Frame f;
  f.t = now;
  f.seq = ++seq_;
  f.quantity = q;
  if (brand_a) {
    SensorReading reading{spec_.sensor_id, SensorBrand::BrandA, q, std::round(v * 100.0) / 100.0,
                          base_epoch_ms_ + now};
    f.bytes = encode_brand_a(reading);
  } else {
    BrandBRecord rec;
    rec.sensor_id = static_cast<std::uint16_t>(std::stoul(spec_.sensor_id));
    rec.sensor_code = brand_b_code(q);
    rec.raw_adc = static_cast<std::uint16_t>(std::lround(v));
    rec.epoch_s = static_cast<std::uint32_t>((base_epoch_ms_ + now) / 1000);
    f.bytes = encode_brand_b(rec);
  }
  return f;
}

std::vector<Frame> emulate_sensor(const SensorSpec& spec, std::uint64_t seed, Millis base_epoch_ms, Millis start,
                                  Millis end) {
  SensorEmulator em(spec, seed, base_epoch_ms);
  std::vector<Frame> out;
  if (spec.pattern.kind == CollectionPattern::Kind::Once) {
    out.push_back(em.next(start));
    return out;
  }
  for (Millis t = start; t < end; t += spec.pattern.interval_ms) out.push_back(em.next(t));
  return out;
}

// ---- metrics

std::optional<double> percentile(std::vector<double> samples, double p) {
  if (samples.empty()) return std::nullopt;
  std::sort(samples.begin(), samples.end());
  const auto n = samples.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return samples[rank - 1];
}

int MetricsReport::running_at(const std::string& domain, const std::string& vnf_type, Millis t) const {
  std::map<std::string, int> by_service;
  for (const auto& s : instance_counts) {
    if (s.t > t) break;
    if (s.domain == domain && s.vnf_type == vnf_type) by_service[s.service] = s.running;
  }
  int total = 0;
  for (const auto& [sid, n] : by_service) total += n;
  return total;
}

Json MetricsReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json j;
  j["emitted"] = emitted;
  j["delivered"] = delivered;
  j["lost"] = lost;
  j["dropped"] = dropped;
  j["refused"] = refused;
  j["in_flight"] = in_flight;
  j["invalid_deliveries"] = invalid_deliveries;
  j["duplicate_deliveries"] = duplicate_deliveries;
  j["delivered_by_domain"] = delivered_by_domain;
  j["emitted_by_domain"] = emitted_by_domain;
  j["latency_ms"] = {{"p50", opt(latency_p50_ms)}, {"p95", opt(latency_p95_ms)}, {"max", opt(latency_max_ms)}};
  j["throughput_msgs_per_s"] = throughput_msgs_per_s;
  j["overhead"] = opt(overhead);
  j["control_messages"] = control_messages;
  j["data_messages"] = data_messages;
  j["breakdown_ms"] = {{"ingress", breakdown.ingress_ms},
                       {"imp", breakdown.imp_ms},
                       {"pc", breakdown.pc_ms},
                       {"egress", breakdown.egress_ms}};
  j["instance_counts"] = Json::array();
  for (const auto& s : instance_counts) {
    j["instance_counts"].push_back(
        {{"t", s.t}, {"domain", s.domain}, {"service", s.service}, {"vnf_type", s.vnf_type}, {"running", s.running}});
  }
  j["sequences"] = Json::object();
  for (const auto& [p, s] : sequences)
    j["sequences"][p] = {{"status", s.status}, {"last_leg", s.last_leg}, {"reason", s.reason}};
  j["first_emit"] = first_emit;
  j["last_delivery"] = last_delivery;
  j["scenario_end"] = scenario_end;
  j["wall_seconds"] = wall_seconds;
  return j;
}

// ---- verification

namespace {

int leg_rank(const std::string& kind) {
  if (kind == "rq-s") return 0;
  if (kind == "rq-g") return 1;
  if (kind == "g-i") return 2;
  if (kind == "ack") return 3;
  return -1;
}

bool is_service_leg(const Json& e) {
  return e.value("type", "") == "control" && !e.value("dup", false) && e.value("purpose", "") == "service";
}

}  // namespace

std::vector<std::string> verify_trace(const std::vector<Json>& events) {
  std::vector<std::string> out;

  // Causal order: each provider's legs appear as rq-s, rq-g, g-i, ack, and
  // no emission to a provider precedes its ack.
  std::map<std::string, int> next_leg;
  for (const auto& e : events) {
    const auto type = e.value("type", "");
    if (is_service_leg(e)) {
      const auto provider = e.value("provider", "");
      const auto kind = e.value("kind", "");
      const int rank = leg_rank(kind);
      int& expected = next_leg[provider];
      if (rank != expected) {
        out.push_back("causal order: " + provider + " saw " + kind + " at t=" + std::to_string(e.value("t", 0LL)) +
                      " out of order");
        expected = std::max(expected, rank + 1);
      } else {
        ++expected;
      }
    } else if (type == "emit") {
      const auto provider = e.value("domain", "");
      if (next_leg[provider] < 4)
        out.push_back("causal order: emission for " + provider + " before its ack");
    }
  }

  // Stage order: [IMP, PC] of the delivering domain.
  for (const auto& e : events) {
    if (e.value("type", "") != "deliver") continue;
    const auto domain = e.value("domain", "");
    std::string expected;
    if (domain == "VWSN1") expected = "IMP1,PC1";
    if (domain == "VWSN2") expected = "IMP2,PC2";
    if (expected.empty() || e.value("stages", "") != expected)
      out.push_back("stage order: " + e.value("trace_id", "?") + " visited [" + e.value("stages", "") + "]");
  }

  // Lifecycle replay: every step is legal and continues the previous one.
  std::map<std::string, LifecycleState> state;
  for (const auto& e : events) {
    if (e.value("type", "") != "lifecycle") continue;
    const auto id = e.value("instance", "");
    try {
      const auto from = lifecycle_state_from_string(e.value("from", ""));
      const auto ev = lifecycle_event_from_string(e.value("event", ""));
      const auto to = lifecycle_state_from_string(e.value("to", ""));
      auto it = state.find(id);
      const auto prior = it == state.end() ? LifecycleState::Requested : it->second;
      if (from != prior) {
        out.push_back("lifecycle replay: " + id + " continues from " + str(to_string(from)) + " but was " +
                      str(to_string(prior)));
      }
      const auto next = lifecycle_next(from, ev);
      if (next != to) {
        out.push_back("lifecycle replay: " + id + " " + str(to_string(from)) + " --" + str(to_string(ev)) +
                      "--> " + str(to_string(to)) + " diverges");
      }
      state[id] = to;
    } catch (const Error& err) {
      out.push_back("lifecycle replay: " + id + " " + err.what());
    }
  }

  // Capacity conservation: usage stays within [0, capacity] on every node.
  for (const auto& e : events) {
    if (e.value("type", "") != "capacity") continue;
    const int cpu = e.value("cpu_used", 0), mem = e.value("mem_used", 0);
    if (cpu < 0 || mem < 0 || cpu > e.value("cpu_cap", 0) || mem > e.value("mem_cap", 0))
      out.push_back("capacity conservation: node " + e.value("node", "?") + " at t=" +
                    std::to_string(e.value("t", 0LL)) + " uses " + std::to_string(cpu) + "/" + std::to_string(mem));
  }
  return out;
}

// ---- Scenario

namespace {

std::string service_request_id(Domain provider) { return "svc-" + host_of(provider); }

const std::vector<std::string>& all_hosts() {
  static const std::vector<std::string> hosts{"gateway", "vwsn1", "vwsn2", "app"};
  return hosts;
}

std::vector<SensorSpec> load_sensors(const LoadSpec& l) {
  std::vector<SensorSpec> out;
  for (int i = 0; i < l.sensors; ++i) {
    SensorSpec s;
    s.quantities = {Quantity::Temperature};
    if (l.provider == Domain::VWSN1) {
      s.brand = SensorBrand::BrandA;
      char buf[16];
      std::snprintf(buf, sizeof buf, "L%02d", i + 1);
      s.sensor_id = buf;
    } else {
      s.brand = SensorBrand::BrandB;
      s.sensor_id = std::to_string(1001 + i);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::filesystem::path fresh_store_dir() {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("vgw-store-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

struct Scenario::Impl {
  struct ProviderRun {
    bool acked = false;
    bool ready = false;
    std::string reason;
    std::string endpoint;
    int streams = 0;
    Millis last_progress = 0;
    std::string last_leg = "none";
  };
  struct Stream {
    Domain provider;
    std::unique_ptr<SensorEmulator> emulator;
  };

  ScenarioConfig& cfg;
  Trace& trace;
  TrafficLog& traffic;

  std::filesystem::path store_dir;
  bool own_store = false;

  std::unique_ptr<VirtualLoop> vloop;
  std::unique_ptr<RealLoop> rloop;
  std::map<std::string, std::unique_ptr<RealLoop>> host_loops;

  std::unique_ptr<InProcessTransport> inproc;
  std::map<std::string, std::unique_ptr<TcpTransport>> tcp;

  std::unique_ptr<ImageStore> store;
  std::unique_ptr<DomainImageCaches> caches;
  std::map<Domain, std::vector<std::unique_ptr<NfviNode>>> nodes;
  std::shared_ptr<std::atomic<bool>> rpc_alive = std::make_shared<std::atomic<bool>>(true);
  std::unique_ptr<RpcDomainPort> port;
  std::unique_ptr<CoreMano> core;
  std::map<Domain, std::unique_ptr<DomainMano>> manos;
  std::unique_ptr<GatewayProviderService> gateway;
  std::map<Domain, std::unique_ptr<VwsnProviderService>> providers;
  std::unique_ptr<ApplicationService> app;
  std::map<std::string, std::unique_ptr<TcpServer>> servers;

  // Streaming state, touched on the app loop and read by the driver.
  mutable std::mutex mu;
  std::map<Domain, ProviderRun> runs;
  std::vector<Stream> sensor_streams;
  std::vector<Stream> load_streams;
  std::uint64_t emitted = 0;
  std::uint64_t refused = 0;
  std::map<std::string, std::uint64_t> emitted_by_domain;
  std::optional<Millis> first_emit;
  std::size_t trace_cursor = 0;

  bool booted = false;
  bool started = false;
  bool stopped = false;
  double wall_seconds = 0.0;

  Impl(ScenarioConfig& c, Trace& t, TrafficLog& l) : cfg(c), trace(t), traffic(l) {}

  ~Impl() {
    servers.clear();
    app.reset();
    providers.clear();
    gateway.reset();
    manos.clear();
    core.reset();
    port.reset();
    nodes.clear();
    tcp.clear();
    if (own_store) {
      std::error_code ec;
      std::filesystem::remove_all(store_dir, ec);
    }
  }

  bool split() const { return cfg.processes == ProcessMode::Split; }

  EventLoop& loop_for(const std::string& host) {
    if (split()) return *host_loops.at(host);
    if (vloop) return *vloop;
    return *rloop;
  }

  Transport& transport_for(const std::string& host) {
    if (split()) return *tcp.at(host);
    return *inproc;
  }

  Millis now() const {
    if (split()) return host_loops.at("app")->now();
    if (vloop) return vloop->now();
    return rloop->now();
  }

  void advance_to(Millis t) {
    if (split()) {
      while (now() < t) std::this_thread::sleep_for(std::chrono::milliseconds(std::min<Millis>(t - now(), 20)));
      return;
    }
    if (vloop) {
      vloop->run_until(t);
    } else {
      rloop->run_until(t);
    }
  }

  void boot() {
    cfg.validate();
    if (cfg.image_root.empty()) {
      store_dir = fresh_store_dir();
      own_store = true;
    } else {
      store_dir = cfg.image_root;
    }

    if (split()) {
      const auto epoch = RealLoop::Clock::now();
      for (const auto& h : all_hosts()) host_loops[h] = std::make_unique<RealLoop>(epoch);
    } else if (cfg.clock == ClockMode::Virtual) {
      vloop = std::make_unique<VirtualLoop>(0);
    } else {
      rloop = std::make_unique<RealLoop>();
    }

    store = std::make_unique<ImageStore>(store_dir);
    std::map<VnfType, VnfDescriptor> descriptors;
    for (const auto& [type, spec] : cfg.vnfs) {
      std::string id;
      if (auto existing = store->find(type, spec.version)) {
        id = existing->image_id;
      } else {
        id = store->publish(type, spec.version, to_bytes(vnf_manifest(type, spec.version)));
      }
      descriptors[type] = {type, id, spec.version, spec.cpu_units, spec.mem_units, spec.image_size_bytes,
                           spec.per_instance_capacity};
    }
    caches = std::make_unique<DomainImageCaches>(*store);

    for (const auto& [domain, list] : cfg.nodes) {
      for (const auto& d : list) {
        auto& loop = loop_for(host_of(domain));
        auto node = std::make_unique<NfviNode>(d, loop, domain == Domain::GatewayProvider ? nullptr : caches.get(),
                                               cfg.stage_service_ms);
        node->set_capacity_observer([this, &loop](const NodeDescriptor& nd, const Resources& used) {
          trace.record(loop.now(), "capacity",
                       {{"node", nd.node_id},
                        {"domain", str(to_string(nd.domain))},
                        {"cpu_used", used.cpu_units},
                        {"mem_used", used.mem_units},
                        {"cpu_cap", nd.cpu_capacity},
                        {"mem_cap", nd.mem_capacity}});
        });
        nodes[domain].push_back(std::move(node));
      }
    }
    auto node_ptrs = [this](Domain d) {
      std::vector<NfviNode*> out;
      for (auto& n : nodes[d]) out.push_back(n.get());
      return out;
    };

    if (split()) {
      for (const auto& h : all_hosts())
        tcp[h] = std::make_unique<TcpTransport>(loop_for(h), std::map<std::string, int>{}, &traffic);
    } else {
      inproc = std::make_unique<InProcessTransport>(loop_for("app"), cfg.latency, &traffic);
    }

    auto& gw_loop = loop_for("gateway");
    port = std::make_unique<RpcDomainPort>(gw_loop, transport_for("gateway"), RetryPolicy{}, rpc_alive);
    core = std::make_unique<CoreMano>(gw_loop, *store, node_ptrs(Domain::GatewayProvider), cfg.cost, *port, &trace);
    for (auto d : {Domain::VWSN1, Domain::VWSN2}) {
      manos[d] = std::make_unique<DomainMano>(d, loop_for(host_of(d)), node_ptrs(d), *caches, cfg.scaling, &trace);
    }
    gateway = std::make_unique<GatewayProviderService>(gw_loop, transport_for("gateway"), *store, *core, &trace);
    for (auto d : {Domain::VWSN1, Domain::VWSN2}) {
      std::map<VnfType, VnfDescriptor> catalogue;
      for (auto t : {info_model_processor_for(d), protocol_converter_for(d)}) catalogue[t] = descriptors.at(t);
      providers[d] = std::make_unique<VwsnProviderService>(d, loop_for(host_of(d)), transport_for(host_of(d)),
                                                           *manos[d], std::move(catalogue), &trace);
    }
    app = std::make_unique<ApplicationService>(loop_for("app"), transport_for("app"), &trace, RetryPolicy{},
                                               cfg.trace_data);
    app->set_on_ack([this](const ServiceAck& ack) { on_ack(ack); });

    std::map<std::string, Endpoint*> endpoints{{"gateway", gateway.get()},
                                               {"vwsn1", providers[Domain::VWSN1].get()},
                                               {"vwsn2", providers[Domain::VWSN2].get()},
                                               {"app", app.get()}};
    if (split()) {
      for (const auto& [h, ep] : endpoints) {
        servers[h] = std::make_unique<TcpServer>(*ep, loop_for(h));
        const int p = servers[h]->start();
        for (auto& [_, t] : tcp) t->set_port(h, p);
      }
      for (auto& [_, l] : host_loops) l->start();
    } else {
      for (const auto& [h, ep] : endpoints) inproc->attach(h, ep);
    }
    for (auto& [_, m] : manos) m->start_reconcile();
    booted = true;
  }

  // ---- streaming (app loop)

  void send_frame(Domain provider, const std::string& endpoint, const SensorSpec& spec, const Frame& f) {
    auto& loop = loop_for("app");
    auto req = make_post(endpoint, std::string(f.bytes.begin(), f.bytes.end()), "application/octet-stream");
    req.headers["x-emit-time"] = std::to_string(loop.now());
    {
      std::lock_guard lock(mu);
      ++emitted;
      ++emitted_by_domain[str(to_string(provider))];
      if (!first_emit) first_emit = loop.now();
    }
    if (cfg.trace_data) {
      trace.record(loop.now(), "emit",
                   {{"sensor_id", spec.sensor_id},
                    {"domain", str(to_string(provider))},
                    {"seq", f.seq},
                    {"quantity", str(to_string(f.quantity))}});
    }
    transport_for("app").send(std::move(req), [this](const HttpResponse& r) {
      if (!r.ok()) {
        std::lock_guard lock(mu);
        ++refused;
      }
    });
  }

  void finish_stream(Domain provider) {
    std::lock_guard lock(mu);
    --runs[provider].streams;
  }

  void sensor_step(std::size_t index, Millis start, std::int64_t k) {
    auto& loop = loop_for("app");
    auto& s = sensor_streams[index];
    const auto& spec = s.emulator->spec();
    std::string endpoint;
    {
      std::lock_guard lock(mu);
      endpoint = runs[s.provider].endpoint;
    }
    send_frame(s.provider, endpoint, spec, s.emulator->next(loop.now()));
    const bool once = spec.pattern.kind == CollectionPattern::Kind::Once;
    const Millis next = (k + 1) * spec.pattern.interval_ms;
    if (once || next >= cfg.duration_ms) {
      finish_stream(s.provider);
      return;
    }
    loop.schedule_at(start + next, [this, index, start, k] { sensor_step(index, start, k + 1); });
  }

  double load_rate_at(Millis t) const {
    double rate = 0.0;
    for (const auto& st : cfg.load->steps) {
      if (st.at_ms <= t) rate = st.rate;
    }
    return rate;
  }

  Millis next_load_boundary(Millis t) const {
    for (const auto& st : cfg.load->steps) {
      if (st.at_ms > t) return std::min(st.at_ms, cfg.load->end_ms);
    }
    return cfg.load->end_ms;
  }

  void load_tick(double cursor, std::uint64_t n) {
    auto& loop = loop_for("app");
    const auto& l = *cfg.load;
    const Millis t = static_cast<Millis>(std::llround(cursor));
    if (t >= l.end_ms || load_streams.empty()) {
      finish_stream(l.provider);
      return;
    }
    const double rate = load_rate_at(t);
    const Millis boundary = next_load_boundary(t);
    if (rate <= 0.0) {
      loop.schedule_at(boundary, [this, boundary, n] { load_tick(static_cast<double>(boundary), n); });
      return;
    }
    auto& s = load_streams[n % load_streams.size()];
    std::string endpoint;
    {
      std::lock_guard lock(mu);
      endpoint = runs[l.provider].endpoint;
    }
    send_frame(l.provider, endpoint, s.emulator->spec(), s.emulator->next(loop.now()));
    double next = cursor + 1000.0 / rate;
    if (next >= static_cast<double>(boundary)) next = static_cast<double>(boundary);
    loop.schedule_at(static_cast<Millis>(std::llround(next)), [this, next, n] { load_tick(next, n + 1); });
  }

  void on_ack(const ServiceAck& ack) {
    auto& loop = loop_for("app");
    const Millis t = loop.now();
    std::vector<std::size_t> to_start;
    bool start_load = false;
    {
      std::lock_guard lock(mu);
      auto& run = runs[ack.provider];
      run.acked = true;
      run.ready = ack.ready;
      run.reason = ack.reason;
      run.endpoint = ack.service_endpoint;
      if (!ack.ready) return;
      for (std::size_t i = 0; i < sensor_streams.size(); ++i) {
        if (sensor_streams[i].provider != ack.provider) continue;
        if (sensor_streams[i].emulator->spec().pattern.kind == CollectionPattern::Kind::Periodic &&
            cfg.duration_ms <= 0)
          continue;
        ++run.streams;
        to_start.push_back(i);
      }
      if (cfg.load && cfg.load->provider == ack.provider) {
        ++run.streams;
        start_load = true;
      }
    }
    for (auto i : to_start) loop.schedule_at(t, [this, i, t] { sensor_step(i, t, 0); });
    if (start_load) {
      const Millis first = cfg.load->steps.empty() ? t : std::max(t, cfg.load->steps.front().at_ms);
      loop.schedule_at(first, [this, first] { load_tick(static_cast<double>(first), 0); });
    }
  }

  ServiceRequest request_for(Domain provider) const {
    ServiceRequest r;
    r.request_id = service_request_id(provider);
    r.app_callback_url = base_url(Domain::Application);
    std::optional<Millis> interval;
    bool any = false;
    for (const auto& s : cfg.sensors) {
      if (home_domain(s.brand) != provider) continue;
      any = true;
      r.quantities.insert(s.quantities.begin(), s.quantities.end());
      if (s.pattern.kind == CollectionPattern::Kind::Periodic)
        interval = std::min(interval.value_or(s.pattern.interval_ms), s.pattern.interval_ms);
    }
    if (r.quantities.empty()) r.quantities.insert(Quantity::Temperature);
    if (interval) {
      r.pattern = CollectionPattern::periodic(*interval);
    } else if (any) {
      r.pattern = CollectionPattern::once();
    } else {
      r.pattern = CollectionPattern::periodic(1000);
    }
    return r;
  }

  void schedule_fault(const FaultSpec& f) {
    switch (f.kind) {
      case FaultSpec::Kind::TransferFault:
        loop_for("gateway").schedule_at(f.at_ms, [this, f] { core->inject_transfer_faults(f.domain, f.count); });
        break;
      case FaultSpec::Kind::HostDown:
      case FaultSpec::Kind::HostUp:
        loop_for(f.host).schedule_at(f.at_ms, [this, f] {
          inproc->set_reachable(f.host, f.kind == FaultSpec::Kind::HostUp);
          trace.record(loop_for(f.host).now(), "fault",
                       {{"host", f.host}, {"reason", f.kind == FaultSpec::Kind::HostUp ? "host up" : "host down"}});
        });
        break;
      case FaultSpec::Kind::KillStage:
        loop_for(host_of(f.domain)).schedule_at(f.at_ms, [this, f] {
          auto& mano = *manos.at(f.domain);
          for (const auto& s : providers.at(f.domain)->services()) {
            auto it = s.pools.find(f.vnf_type);
            if (it == s.pools.end()) continue;
            for (const auto& id : it->second) mano.fail(id, "injected fault");
          }
        });
        break;
    }
  }

  // ---- driver

  void poll_progress() {
    auto fresh = trace.events_since(trace_cursor);
    trace_cursor += fresh.size();
    std::lock_guard lock(mu);
    for (const auto& e : fresh) {
      if (!is_service_leg(e)) continue;
      auto& run = runs[domain_from_string(e.value("provider", ""))];
      run.last_progress = e.value("t", Millis{0});
      run.last_leg = e.value("kind", "");
    }
  }

  bool finished() {
    poll_progress();
    const Millis t = now();
    for (const auto& f : cfg.faults) {
      if (f.at_ms > t) return false;
    }
    std::lock_guard lock(mu);
    for (auto p : cfg.effective_providers()) {
      const auto& run = runs[p];
      if (run.acked) {
        if (run.ready && run.streams > 0) return false;
        continue;
      }
      if (t - run.last_progress <= cfg.leg_timeout_ms) return false;
    }
    return true;
  }

  Millis horizon() const {
    if (cfg.max_ms > 0) return cfg.max_ms;
    Millis h = 4 * cfg.leg_timeout_ms + cfg.duration_ms + 60'000;
    if (cfg.load) h += cfg.load->end_ms;
    for (const auto& f : cfg.faults) h = std::max(h, f.at_ms + 4 * cfg.leg_timeout_ms);
    return h;
  }

  void run() {
    const auto wall_start = std::chrono::steady_clock::now();
    started = true;
    for (const auto& f : cfg.faults) schedule_fault(f);
    for (const auto& s : cfg.sensors) {
      sensor_streams.push_back({home_domain(s.brand),
                                std::make_unique<SensorEmulator>(s, sensor_seed(cfg.seed, s.sensor_id),
                                                                 cfg.base_epoch_ms)});
    }
    if (cfg.load) {
      for (const auto& s : load_sensors(*cfg.load)) {
        load_streams.push_back({cfg.load->provider, std::make_unique<SensorEmulator>(
                                                        s, sensor_seed(cfg.seed, s.sensor_id), cfg.base_epoch_ms)});
      }
    }
    const auto providers_list = cfg.effective_providers();
    loop_for("app").post([this, providers_list] {
      for (auto p : providers_list) app->request_service(p, request_for(p));
    });
    const Millis cap = horizon();
    const Millis slice = 100;
    while (now() < cap) {
      advance_to(std::min(now() + slice, cap));
      if (finished()) break;
    }
    advance_to(now() + cfg.drain_ms);
    wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  }

  void stop() {
    if (stopped || !booted) {
      stopped = true;
      return;
    }
    stopped = true;
    for (auto& [_, p] : providers) p->shutdown();
    gateway->shutdown();
    app->shutdown();
    rpc_alive->store(false);
    for (auto& [_, m] : manos) m->stop_reconcile();
    if (split()) {
      for (auto& [_, s] : servers) s->stop();
      for (auto& [_, t] : tcp) t->drain();
      for (auto& [_, l] : host_loops) l->stop();
    }
  }
};

Scenario::Scenario(ScenarioConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>(config_, trace_, traffic_)) {
  config_.validate();
}

Scenario::~Scenario() { stop(); }

void Scenario::boot() {
  if (!impl_->booted) impl_->boot();
}

void Scenario::run() {
  boot();
  if (impl_->stopped) throw Error(Errc::ScenarioFailed, "scenario already stopped");
  if (impl_->started) throw Error(Errc::ScenarioFailed, "scenario already ran");
  impl_->run();
}

void Scenario::replay_control() {
  if (!impl_->booted || impl_->stopped) throw Error(Errc::ScenarioFailed, "replay needs a running scenario");
  const auto entries = traffic_.control_entries();
  std::vector<HttpRequest> requests;
  for (const auto& e : entries) requests.push_back(parse_http_request(e.wire));
  impl_->loop_for("app").post([this, requests = std::move(requests)]() mutable {
    for (auto& r : requests) impl_->transport_for("app").send(std::move(r), nullptr);
  });
  impl_->advance_to(impl_->now() + std::max<Millis>(config_.drain_ms, 1000));
}

void Scenario::stop() { impl_->stop(); }

Snapshot Scenario::snapshot() const {
  auto& im = *impl_;
  Json s;
  if (!im.booted) return {s};
  Json core = Json::array();
  for (const auto& i : im.core->instances()) {
    core.push_back({{"id", i.instance_id},
                    {"state", str(to_string(i.state))},
                    {"domain", i.location ? str(to_string(i.location->domain)) : std::string()}});
  }
  s["core"] = core;
  for (const auto& [d, mano] : im.manos) {
    Json dj;
    dj["instances"] = Json::array();
    for (const auto& i : mano->instances()) {
      dj["instances"].push_back({{"id", i.instance_id},
                                 {"state", str(to_string(i.state))},
                                 {"node", i.location ? i.location->node_id : std::string()}});
    }
    dj["nodes"] = Json::array();
    for (const auto& r : mano->report_state()) {
      dj["nodes"].push_back({{"node", r.node_id},
                             {"cpu_free", r.free.cpu_units},
                             {"mem_free", r.free.mem_units},
                             {"allocations", r.allocations.size()}});
    }
    const auto& p = *im.providers.at(d);
    dj["services"] = Json::array();
    for (const auto& v : p.services()) {
      Json pools = Json::object();
      for (const auto& [t, ids] : v.pools) pools[str(to_string(t))] = ids;
      dj["services"].push_back({{"id", v.service_id},
                                {"status", static_cast<int>(v.status)},
                                {"reason", v.reason},
                                {"pools", pools}});
    }
    const auto c = p.counters();
    dj["acks_sent"] = c.acks_sent;
    dj["rq_g_sent"] = c.rq_g_sent;
    s[str(to_string(d))] = dj;
  }
  s["core_nodes"] = Json::array();
  for (const auto& n : im.nodes[Domain::GatewayProvider]) {
    const auto f = n->free();
    s["core_nodes"].push_back({{"node", n->node_id()}, {"cpu_free", f.cpu_units}, {"mem_free", f.mem_units}});
  }
  s["gateway"] = {{"requests", im.gateway->requests_seen()}, {"gi_sent", im.gateway->notifications_sent()}};
  Json acks = Json::object();
  for (const auto& [id, a] : im.app->acks()) acks[id] = {{"ready", a.ready}, {"endpoint", a.service_endpoint}};
  s["app"] = {{"acks", acks}, {"deliveries", im.app->deliveries().size()}};
  return {s};
}

MetricsReport Scenario::report() const {
  auto& im = *impl_;
  MetricsReport r;
  if (!im.booted) return r;
  const auto events = trace_.events();
  {
    std::lock_guard lock(im.mu);
    r.emitted = im.emitted;
    r.refused = im.refused;
    r.emitted_by_domain = im.emitted_by_domain;
    r.first_emit = im.first_emit.value_or(0);
  }
  const auto& deliveries = im.app->deliveries();
  r.delivered = deliveries.size();
  r.invalid_deliveries = im.app->invalid_deliveries();
  r.duplicate_deliveries = im.app->duplicate_deliveries();
  for (const auto& [_, p] : im.providers) r.dropped += p->counters().dropped;
  r.lost = r.emitted > r.delivered ? r.emitted - r.delivered : 0;
  const auto settled = r.delivered + r.dropped + r.refused;
  r.in_flight = r.emitted > settled ? r.emitted - settled : 0;

  std::vector<double> latencies;
  StageBreakdown sum;
  std::size_t with_breakdown = 0;
  auto num = [](const std::map<std::string, std::string>& m, const std::string& k) -> std::optional<double> {
    auto it = m.find(k);
    if (it == m.end()) return std::nullopt;
    try {
      return std::stod(it->second);
    } catch (...) {
      return std::nullopt;
    }
  };
  for (const auto& d : deliveries) {
    auto dit = d.meta.find(meta::kDomain);
    if (dit != d.meta.end()) ++r.delivered_by_domain[dit->second];
    r.last_delivery = std::max(r.last_delivery, d.arrival);
    const auto emit = num(d.meta, meta::kEmitTime);
    if (!emit) continue;
    latencies.push_back(static_cast<double>(d.arrival) - *emit);
    if (dit == d.meta.end()) continue;
    Domain dom;
    try {
      dom = domain_from_string(dit->second);
    } catch (const Error&) {
      continue;
    }
    if (!is_vwsn(dom)) continue;
    const auto imp = num(d.meta, std::string(meta::kStageTimePrefix) + str(stage_tag(info_model_processor_for(dom))));
    const auto pc = num(d.meta, std::string(meta::kStageTimePrefix) + str(stage_tag(protocol_converter_for(dom))));
    const auto eg = num(d.meta, meta::kEgressTime);
    if (!imp || !pc || !eg) continue;
    sum.ingress_ms += *imp - *emit;
    sum.imp_ms += *pc - *imp;
    sum.pc_ms += *eg - *pc;
    sum.egress_ms += static_cast<double>(d.arrival) - *eg;
    ++with_breakdown;
  }
  if (with_breakdown > 0) {
    const double n = static_cast<double>(with_breakdown);
    r.breakdown = {sum.ingress_ms / n, sum.imp_ms / n, sum.pc_ms / n, sum.egress_ms / n};
  }
  r.latency_p50_ms = percentile(latencies, 50);
  r.latency_p95_ms = percentile(latencies, 95);
  r.latency_max_ms = percentile(latencies, 100);
  if (r.delivered > 0 && r.last_delivery > r.first_emit) {
    r.throughput_msgs_per_s =
        static_cast<double>(r.delivered) / (static_cast<double>(r.last_delivery - r.first_emit) / 1000.0);
  }
  r.control_messages = traffic_.control_messages();
  r.data_messages = traffic_.data_messages();
  if (r.delivered > 0) r.overhead = static_cast<double>(r.control_messages) / static_cast<double>(r.delivered);

  std::map<std::string, SequenceStatus> seq;
  for (auto p : config_.effective_providers()) seq[str(to_string(p))] = {};
  for (const auto& e : events) {
    const auto type = e.value("type", "");
    if (type == "instances") {
      r.instance_counts.push_back({e.value("t", Millis{0}), e.value("domain", ""), e.value("service", ""),
                                   e.value("vnf_type", ""), e.value("running", 0)});
    } else if (is_service_leg(e)) {
      auto it = seq.find(e.value("provider", ""));
      if (it != seq.end()) it->second.last_leg = e.value("kind", "");
    }
  }
  for (auto& [p, s] : seq) {
    const auto& acks = im.app->acks();
    auto it = acks.find(service_request_id(domain_from_string(p)));
    if (it != acks.end()) {
      s.status = it->second.ready ? "complete" : "rejected";
      s.reason = it->second.reason;
    } else {
      s.status = "failed";
      s.reason = "no ack within the leg timeout after " + s.last_leg;
    }
  }
  r.sequences = std::move(seq);
  r.scenario_end = im.now();
  r.wall_seconds = im.wall_seconds;
  return r;
}

CoreMano& Scenario::core_mano() {
  boot();
  return *impl_->core;
}

DomainMano& Scenario::domain_mano(Domain d) {
  boot();
  auto it = impl_->manos.find(d);
  if (it == impl_->manos.end()) throw Error(Errc::NotVwsnDomain, str(to_string(d)));
  return *it->second;
}

VwsnProviderService& Scenario::provider(Domain d) {
  boot();
  auto it = impl_->providers.find(d);
  if (it == impl_->providers.end()) throw Error(Errc::NotVwsnDomain, str(to_string(d)));
  return *it->second;
}

ApplicationService& Scenario::app() {
  boot();
  return *impl_->app;
}

const ImageStore& Scenario::image_store() const {
  if (!impl_->store) throw Error(Errc::ScenarioFailed, "scenario not booted");
  return *impl_->store;
}

EventLoop& Scenario::loop(const std::string& host) {
  boot();
  if (!valid_host(host)) throw Error(Errc::InvalidArgument, "unknown host '" + host + "'");
  return impl_->loop_for(host);
}

Transport& Scenario::transport(const std::string& host) {
  boot();
  if (!valid_host(host)) throw Error(Errc::InvalidArgument, "unknown host '" + host + "'");
  return impl_->transport_for(host);
}

void Scenario::advance_to(Millis t) {
  boot();
  impl_->advance_to(t);
}

Millis Scenario::now() const { return impl_->booted ? impl_->now() : 0; }

// ---- entry points

void ScenarioResult::require_pass() const {
  if (!violations.empty()) throw Error(Errc::ScenarioFailed, "verify_trace: " + violations.front());
  if (report.invalid_deliveries > 0)
    throw Error(Errc::ScenarioFailed, "app_stub: " + std::to_string(report.invalid_deliveries) + " invalid deliveries");
  if (report.duplicate_deliveries > 0)
    throw Error(Errc::ScenarioFailed,
                "app_stub: " + std::to_string(report.duplicate_deliveries) + " duplicate deliveries");
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
  Scenario s(config);
  s.run();
  s.stop();
  ScenarioResult r;
  r.report = s.report();
  r.trace_jsonl = s.trace().to_jsonl();
  r.violations = verify_trace(s.trace().events());
  return r;
}

InitiationResult initiation_sequence(ScenarioConfig config, std::vector<Domain> providers) {
  config.sensors.clear();
  config.load.reset();
  config.faults.clear();
  config.duration_ms = 0;
  config.providers = std::move(providers);
  Scenario s(config);
  s.run();
  s.stop();
  return {s.trace().events(), s.report().sequences};
}

}  // namespace vgw
