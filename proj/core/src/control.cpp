#include "vgw/control.hpp"

#include <algorithm>
#include <cstdio>

namespace vgw {

std::string host_of(Domain d) {
  switch (d) {
    case Domain::GatewayProvider: return "gateway";
    case Domain::VWSN1: return "vwsn1";
    case Domain::VWSN2: return "vwsn2";
    case Domain::Application: return "app";
  }
  return "unknown";
}

std::string base_url(Domain d) { return "http://" + host_of(d); }

std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string numbered(std::string_view prefix, std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06llu", static_cast<unsigned long long>(n));
  return std::string(prefix) + buf;
}

Json parse_body(const HttpRequest& req) {
  auto j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::InvalidArgument, "body is not a JSON object");
  return j;
}

template <typename F>
auto json_guard(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, e.what());
  }
}

int status_for(Errc code) {
  switch (code) {
    case Errc::NotFound: return 404;
    case Errc::ChainUnavailable: return 503;
    default: return 400;
  }
}

}  // namespace

// ---- messages

Json to_json(const ServiceRequest& r) {
  Json q = Json::array();
  for (auto quantity : r.quantities) q.push_back(std::string(to_string(quantity)));
  Json pattern = r.pattern.kind == CollectionPattern::Kind::Once
                     ? Json{{"kind", "once"}}
                     : Json{{"kind", "periodic"}, {"interval_ms", r.pattern.interval_ms}};
  return Json{{"request_id", r.request_id},
              {"app_callback_url", r.app_callback_url},
              {"quantities", q},
              {"pattern", pattern}};
}

ServiceRequest service_request_from_json(const Json& j) {
  return json_guard([&] {
    ServiceRequest r;
    r.request_id = j.at("request_id").get<std::string>();
    r.app_callback_url = j.at("app_callback_url").get<std::string>();
    for (const auto& q : j.at("quantities")) r.quantities.insert(quantity_from_string(q.get<std::string>()));
    const auto& p = j.at("pattern");
    const auto kind = p.at("kind").get<std::string>();
    if (kind == "once") {
      r.pattern = CollectionPattern::once();
    } else if (kind == "periodic") {
      r.pattern = CollectionPattern::periodic(p.at("interval_ms").get<Millis>());
    } else {
      throw Error(Errc::InvalidArgument, "unknown collection pattern '" + kind + "'");
    }
    return r;
  });
}

std::vector<std::string> VnfRequirementRequest::violations() const {
  std::vector<std::string> out;
  if (!is_url_safe_id(request_id)) out.emplace_back("request_id is not URL safe");
  if (!is_vwsn(domain)) out.emplace_back("domain is not a VWSN domain");
  if (vnf_descriptors.empty()) out.emplace_back("no VNF descriptors");
  for (const auto& d : vnf_descriptors) {
    if (served_domain(d.vnf_type) != domain) {
      out.push_back(std::string(to_string(d.vnf_type)) + " does not serve " + std::string(to_string(domain)));
    }
  }
  try {
    parse_url(reply_url);
  } catch (const Error&) {
    out.emplace_back("reply_url is not an http URL");
  }
  if (purpose != "service" && purpose != "scale") out.emplace_back("unknown purpose '" + purpose + "'");
  return out;
}

Json to_json(const VnfRequirementRequest& r) {
  Json descs = Json::array();
  for (const auto& d : r.vnf_descriptors) descs.push_back(to_json(d));
  return Json{{"request_id", r.request_id},
              {"domain", std::string(to_string(r.domain))},
              {"vnf_descriptors", descs},
              {"reply_url", r.reply_url},
              {"purpose", r.purpose},
              {"service_id", r.service_id}};
}

VnfRequirementRequest requirement_request_from_json(const Json& j) {
  return json_guard([&] {
    VnfRequirementRequest r;
    r.request_id = j.at("request_id").get<std::string>();
    r.domain = domain_from_string(j.at("domain").get<std::string>());
    for (const auto& d : j.at("vnf_descriptors")) r.vnf_descriptors.push_back(descriptor_from_json(d));
    r.reply_url = j.at("reply_url").get<std::string>();
    r.purpose = j.value("purpose", "service");
    r.service_id = j.value("service_id", "");
    return r;
  });
}

Json to_json(const GatewayInstanceNotification& n) {
  Json instances = Json::array();
  for (const auto& i : n.instances) {
    Json ij{{"instance_id", i.instance_id},
            {"vnf_type", std::string(to_string(i.vnf_type))},
            {"status", i.ready ? "Ready" : "Failed"}};
    if (!i.reason.empty()) ij["reason"] = i.reason;
    if (i.location) ij["location"] = to_json(*i.location);
    instances.push_back(ij);
  }
  return Json{{"request_id", n.request_id}, {"domain", std::string(to_string(n.domain))}, {"instances", instances}};
}

GatewayInstanceNotification notification_from_json(const Json& j) {
  return json_guard([&] {
    GatewayInstanceNotification n;
    n.request_id = j.at("request_id").get<std::string>();
    n.domain = domain_from_string(j.at("domain").get<std::string>());
    for (const auto& ij : j.at("instances")) {
      DispatchedInstance i;
      i.instance_id = ij.value("instance_id", "");
      i.vnf_type = vnf_type_from_string(ij.at("vnf_type").get<std::string>());
      i.ready = ij.at("status").get<std::string>() == "Ready";
      i.reason = ij.value("reason", "");
      if (ij.contains("location")) {
        i.location = Location{domain_from_string(ij["location"].at("domain").get<std::string>()),
                              ij["location"].at("node_id").get<std::string>()};
      }
      n.instances.push_back(std::move(i));
    }
    return n;
  });
}

Json to_json(const ServiceAck& a) {
  Json j{{"request_id", a.request_id},
         {"provider", std::string(to_string(a.provider))},
         {"status", a.ready ? "Ready" : "Rejected"}};
  if (!a.reason.empty()) j["reason"] = a.reason;
  if (a.ready) j["service_endpoint"] = a.service_endpoint;
  return j;
}

ServiceAck service_ack_from_json(const Json& j) {
  return json_guard([&] {
    ServiceAck a;
    a.request_id = j.at("request_id").get<std::string>();
    a.provider = domain_from_string(j.at("provider").get<std::string>());
    const auto status = j.at("status").get<std::string>();
    if (status != "Ready" && status != "Rejected") throw Error(Errc::InvalidArgument, "bad ACK status " + status);
    a.ready = status == "Ready";
    a.reason = j.value("reason", "");
    a.service_endpoint = j.value("service_endpoint", "");
    return a;
  });
}

// ---- delivery helpers

void send_reliably(EventLoop& loop, Transport& transport, HttpRequest req, RetryPolicy policy,
                   std::function<void(const HttpResponse&)> done, std::shared_ptr<std::atomic<bool>> alive) {
  struct Attempt : std::enable_shared_from_this<Attempt> {
    EventLoop& loop;
    Transport& transport;
    HttpRequest req;
    RetryPolicy policy;
    std::function<void(const HttpResponse&)> done;
    std::shared_ptr<std::atomic<bool>> alive;
    Millis backoff;

    Attempt(EventLoop& l, Transport& t, HttpRequest r, RetryPolicy p, std::function<void(const HttpResponse&)> d,
            std::shared_ptr<std::atomic<bool>> a)
        : loop(l), transport(t), req(std::move(r)), policy(p), done(std::move(d)), alive(std::move(a)),
          backoff(p.initial_ms) {}

    void go() {
      if (alive && !alive->load()) return;
      transport.send(req, [self = shared_from_this()](const HttpResponse& resp) {
        if (resp.status == kUnreachable || resp.status >= 500) {
          if (self->alive && !self->alive->load()) return;
          const Millis wait = self->backoff;
          self->backoff = std::min(self->backoff * 2, self->policy.max_ms);
          self->loop.schedule_after(wait, [self] { self->go(); });
          return;
        }
        if (self->done) self->done(resp);
      });
    }
  };
  std::make_shared<Attempt>(loop, transport, std::move(req), policy, std::move(done), std::move(alive))->go();
}

HttpResponse json_response(int status, const Json& body) { return {status, "application/json", body.dump()}; }

HttpResponse error_response(int status, const Error& e) {
  return {status, "application/json", error_body(to_string(e.code()), e.detail())};
}

RpcDomainPort::RpcDomainPort(EventLoop& loop, Transport& transport, RetryPolicy retry,
                             std::shared_ptr<std::atomic<bool>> alive)
    : loop_(loop), transport_(transport), retry_(retry), alive_(std::move(alive)) {}

void RpcDomainPort::call(Domain domain, const std::string& method, Json params, Reply reply) {
  const auto id = numbered("rpc-", next_id_++);
  Json body{{"method", method}, {"params", std::move(params)}, {"id", id}};
  auto req = make_post(base_url(domain) + "/rpc", body.dump());
  send_reliably(loop_, transport_, std::move(req), retry_,
                [reply = std::move(reply)](const HttpResponse& resp) {
                  if (!reply) return;
                  auto j = Json::parse(resp.body, nullptr, false);
                  if (j.is_discarded() || !j.is_object()) {
                    reply(Json(), Error(Errc::InvalidArgument, "malformed RPC response"));
                    return;
                  }
                  const Json* err = nullptr;
                  if (j.contains("error") && j["error"].is_object()) err = &j["error"];
                  if (err || !resp.ok()) {
                    const Json& e = err ? *err : j;
                    const auto code = errc_from_string(e.value("code", e.value("error", "")));
                    reply(Json(), Error(code.value_or(Errc::InvalidArgument), e.value("detail", "")));
                    return;
                  }
                  reply(j.value("result", Json()), std::nullopt);
                },
                alive_);
}

void trace_control(Trace* trace, Millis t, std::string_view kind, Domain provider, const std::string& request_id,
                   const std::string& service_id, std::string_view purpose, bool duplicate) {
  if (!trace) return;
  trace->record(t, "control",
                {{"kind", std::string(kind)},
                 {"provider", std::string(to_string(provider))},
                 {"request_id", request_id},
                 {"service", service_id},
                 {"purpose", std::string(purpose)},
                 {"dup", duplicate}});
}

// ---- GatewayProviderService

GatewayProviderService::GatewayProviderService(EventLoop& loop, Transport& transport, const ImageStore& store,
                                               CoreMano& mano, Trace* trace, RetryPolicy retry)
    : loop_(loop), transport_(transport), store_(store), mano_(mano), trace_(trace), retry_(retry) {}

HttpResponse GatewayProviderService::handle(const HttpRequest& req) {
  if (req.method == "GET" && req.path == "/health") return json_response(200, {{"status", "ok"}, {"service", "gateway"}});
  if (req.method == "POST" && req.path == "/rq-g") return handle_rq_g(req);
  return error_response(404, Error(Errc::NotFound, req.method + " " + req.path));
}

HttpResponse GatewayProviderService::handle_rq_g(const HttpRequest& req) {
  VnfRequirementRequest r;
  try {
    r = requirement_request_from_json(parse_body(req));
  } catch (const Error& e) {
    return error_response(400, e);
  }
  if (auto it = results_.find(r.request_id); it != results_.end()) {
    trace_control(trace_, loop_.now(), "rq-g", r.domain, r.request_id, r.service_id, r.purpose, true);
    return it->second;
  }
  if (auto v = r.violations(); !v.empty()) {
    std::string detail;
    for (const auto& s : v) detail += (detail.empty() ? "" : "; ") + s;
    return results_[r.request_id] = error_response(400, Error(Errc::InvalidArgument, detail));
  }
  for (const auto& d : r.vnf_descriptors) {
    if (!store_.contains(d.image_id))
      return results_[r.request_id] = error_response(400, Error(Errc::ImageNotFound, d.image_id));
  }
  trace_control(trace_, loop_.now(), "rq-g", r.domain, r.request_id, r.service_id, r.purpose, false);
  auto accepted = json_response(202, {{"request_id", r.request_id}, {"status", "accepted"}});
  results_[r.request_id] = accepted;
  try {
    mano_.provision(r.request_id, r.domain, r.vnf_descriptors,
                    [this, r](const std::vector<MigrationOutcome>& outcomes) { dispatch(r, outcomes); });
  } catch (const Error& e) {
    return results_[r.request_id] = error_response(400, e);
  }
  return accepted;
}

void GatewayProviderService::dispatch(const VnfRequirementRequest& r, const std::vector<MigrationOutcome>& outcomes) {
  GatewayInstanceNotification n;
  n.request_id = r.request_id;
  n.domain = r.domain;
  for (const auto& o : outcomes) n.instances.push_back({o.instance_id, o.vnf_type, o.ready, o.reason, o.location});
  ++gi_sent_;
  send_reliably(loop_, transport_, make_post(r.reply_url, to_json(n).dump()), retry_, nullptr, alive_);
}

// ---- VwsnProviderService

VwsnProviderService::VwsnProviderService(Domain domain, EventLoop& loop, Transport& transport, DomainMano& mano,
                                         std::map<VnfType, VnfDescriptor> catalogue, Trace* trace,
                                         RetryPolicy retry)
    : domain_(domain),
      loop_(loop),
      transport_(transport),
      mano_(mano),
      catalogue_(std::move(catalogue)),
      trace_(trace),
      retry_(retry) {
  if (!is_vwsn(domain_)) throw Error(Errc::NotVwsnDomain, std::string(to_string(domain_)));
  for (auto type : {info_model_processor_for(domain_), protocol_converter_for(domain_)}) {
    if (!catalogue_.count(type))
      throw Error(Errc::InvalidConfig, "no descriptor for " + std::string(to_string(type)));
  }
  mano_.set_config_resolver([this](const std::string& request_id, VnfType) {
    VnfConfig config;
    auto pit = pending_.find(request_id);
    if (pit == pending_.end()) return config;
    auto sit = services_.find(pit->second.service_id);
    if (sit != services_.end()) config.target_url = sit->second.request.app_callback_url + "/measurements";
    return config;
  });
  mano_.set_scale_up_requester(
      [this](const std::string& service_id, VnfType type, int count) { request_scale_up(service_id, type, count); });
}

HttpResponse VwsnProviderService::handle(const HttpRequest& req) {
  if (req.method == "GET" && req.path == "/health")
    return json_response(200, {{"status", "ok"}, {"service", host_of(domain_)}});
  if (req.method == "POST") {
    if (req.path == "/rq-s") return handle_rq_s(req);
    if (req.path == "/g-i") return handle_g_i(req);
    if (req.path == "/rpc") return handle_rpc(req);
    static const std::string ingest = "/ingest/";
    if (req.path.rfind(ingest, 0) == 0) return handle_ingest(req.path.substr(ingest.size()), req);
  }
  return error_response(404, Error(Errc::NotFound, req.method + " " + req.path));
}

HttpResponse VwsnProviderService::handle_rq_s(const HttpRequest& req) {
  ServiceRequest r;
  try {
    r = service_request_from_json(parse_body(req));
  } catch (const Error& e) {
    return error_response(400, e);
  }
  if (services_.count(r.request_id)) {
    trace_control(trace_, loop_.now(), "rq-s", domain_, r.request_id, r.request_id, "service", true);
    return error_response(409, Error(Errc::InvalidArgument, "duplicate request_id " + r.request_id));
  }
  auto v = r.violations();
  if (!is_url_safe_id(r.request_id)) v.emplace_back("request_id is not URL safe");
  try {
    parse_url(r.app_callback_url);
  } catch (const Error&) {
    v.emplace_back("app_callback_url is not an http URL");
  }
  if (!v.empty()) {
    std::string detail;
    for (const auto& s : v) detail += (detail.empty() ? "" : "; ") + s;
    return error_response(400, Error(Errc::InvalidArgument, detail));
  }
  Service s;
  s.request = r;
  s.rq_g_id = "rqg-" + r.request_id;
  services_.emplace(r.request_id, std::move(s));
  trace_control(trace_, loop_.now(), "rq-s", domain_, r.request_id, r.request_id, "service", false);
  send_rq_g(r.request_id, "rqg-" + r.request_id, "service",
            {catalogue_.at(info_model_processor_for(domain_)), catalogue_.at(protocol_converter_for(domain_))});
  return json_response(202, {{"request_id", r.request_id}, {"status", "PENDING"}});
}

void VwsnProviderService::send_rq_g(const std::string& service_id, const std::string& request_id,
                                    const std::string& purpose, std::vector<VnfDescriptor> descriptors) {
  VnfRequirementRequest r;
  r.request_id = request_id;
  r.domain = domain_;
  r.vnf_descriptors = std::move(descriptors);
  r.reply_url = base_url(domain_) + "/g-i";
  r.purpose = purpose;
  r.service_id = service_id;
  pending_[request_id] = {service_id, purpose, r.vnf_descriptors.front().vnf_type,
                          static_cast<int>(r.vnf_descriptors.size())};
  ++counters_.rq_g_sent;
  send_reliably(
      loop_, transport_, make_post(base_url(Domain::GatewayProvider) + "/rq-g", to_json(r).dump()), retry_,
      [this, request_id](const HttpResponse& resp) {
        if (resp.ok()) return;
        auto pit = pending_.find(request_id);
        if (pit == pending_.end()) return;
        const auto p = pit->second;
        pending_.erase(pit);
        if (p.purpose == "scale") {
          mano_.settle_pending(p.service_id, p.vnf_type, p.count);
          return;
        }
        auto& s = services_.at(p.service_id);
        s.status = ServiceStatus::Rejected;
        auto j = Json::parse(resp.body, nullptr, false);
        s.reason = "gateway rejected request";
        if (!j.is_discarded() && j.is_object()) s.reason += ": " + j.value("error", std::string{});
        send_ack(p.service_id, false, s.reason);
      },
      alive_);
}

void VwsnProviderService::request_scale_up(const std::string& service_id, VnfType type, int count) {
  std::vector<VnfDescriptor> descriptors(static_cast<std::size_t>(count), catalogue_.at(type));
  send_rq_g(service_id, numbered("scale-" + service_id + "-", next_scale_++), "scale", std::move(descriptors));
}

void VwsnProviderService::send_ack(const std::string& service_id, bool ready, const std::string& reason) {
  const auto& s = services_.at(service_id);
  ServiceAck ack;
  ack.request_id = service_id;
  ack.provider = domain_;
  ack.ready = ready;
  ack.reason = reason;
  if (ready) ack.service_endpoint = base_url(domain_) + "/ingest/" + service_id;
  ++counters_.acks_sent;
  send_reliably(loop_, transport_, make_post(s.request.app_callback_url + "/ack", to_json(ack).dump()), retry_,
                nullptr, alive_);
}

HttpResponse VwsnProviderService::handle_g_i(const HttpRequest& req) {
  GatewayInstanceNotification n;
  try {
    n = notification_from_json(parse_body(req));
  } catch (const Error& e) {
    return error_response(400, e);
  }
  if (auto it = g_i_results_.find(n.request_id); it != g_i_results_.end()) {
    trace_control(trace_, loop_.now(), "g-i", domain_, n.request_id, "", "", true);
    return it->second;
  }
  auto pit = pending_.find(n.request_id);
  if (pit == pending_.end()) return error_response(404, Error(Errc::NotFound, "request " + n.request_id));
  const PendingRequest p = pit->second;
  pending_.erase(pit);
  trace_control(trace_, loop_.now(), "g-i", domain_, n.request_id, p.service_id, p.purpose, false);

  if (p.purpose == "service") {
    auto& s = services_.at(p.service_id);
    const auto imp_type = info_model_processor_for(domain_);
    const auto pc_type = protocol_converter_for(domain_);
    std::optional<VnfInstance> imp;
    std::optional<VnfInstance> pc;
    bool complete = true;
    for (const auto& i : n.instances) {
      if (!i.ready) {
        complete = false;
        continue;
      }
      auto inst = mano_.instance(i.instance_id);
      if (!inst) {
        complete = false;
        continue;
      }
      if (inst->descriptor.vnf_type == imp_type && !imp) {
        imp = inst;
      } else if (inst->descriptor.vnf_type == pc_type && !pc) {
        pc = inst;
      }
    }
    std::string reason;
    if (!complete || !imp || !pc) {
      reason = "provisioning incomplete";
    } else {
      ServiceChain chain{p.service_id, domain_, {*imp, *pc}};
      for (auto v : validate_chain(chain)) reason += (reason.empty() ? "chain invalid: " : ", ") + std::string(to_string(v));
    }
    if (reason.empty()) {
      mano_.register_service(p.service_id, {catalogue_.at(imp_type), catalogue_.at(pc_type)});
      mano_.add_to_pool(p.service_id, imp->instance_id);
      mano_.add_to_pool(p.service_id, pc->instance_id);
      s.status = ServiceStatus::Active;
      send_ack(p.service_id, true, "");
    } else {
      for (const auto& i : n.instances) {
        if (!i.ready) continue;
        try {
          mano_.terminate(i.instance_id);
        } catch (const Error&) {
        }
      }
      s.status = ServiceStatus::Rejected;
      s.reason = reason;
      send_ack(p.service_id, false, reason);
    }
  } else {
    for (const auto& i : n.instances) {
      if (!i.ready) continue;
      try {
        mano_.add_to_pool(p.service_id, i.instance_id);
      } catch (const Error&) {
        try {
          mano_.terminate(i.instance_id);
        } catch (const Error&) {
        }
      }
    }
    mano_.settle_pending(p.service_id, p.vnf_type, p.count);
  }
  auto resp = json_response(200, {{"request_id", n.request_id}, {"status", "ok"}});
  g_i_results_[n.request_id] = resp;
  return resp;
}

HttpResponse VwsnProviderService::handle_rpc(const HttpRequest& req) {
  Json j;
  try {
    j = parse_body(req);
  } catch (const Error& e) {
    return error_response(400, e);
  }
  const auto id = j.value("id", std::string{});
  if (auto it = rpc_results_.find(id); !id.empty() && it != rpc_results_.end()) return it->second;
  Json out{{"id", id}};
  try {
    out["result"] = json_guard([&] { return mano_.handle_rpc(j.at("method").get<std::string>(), j.value("params", Json::object())); });
  } catch (const Error& e) {
    out["error"] = {{"code", std::string(to_string(e.code()))}, {"detail", e.detail()}};
  }
  auto resp = json_response(200, out);
  if (!id.empty()) rpc_results_[id] = resp;
  return resp;
}

std::string VwsnProviderService::peek_sensor_id(const std::string& body) const {
  if (domain_ == Domain::VWSN2) {
    if (body.size() < 3) return "unknown";
    const auto hi = static_cast<unsigned char>(body[1]);
    const auto lo = static_cast<unsigned char>(body[2]);
    return std::to_string((hi << 8) | lo);
  }
  if (body.size() <= 2) return "unknown";
  const auto first = body.find(',', 2);
  if (first == std::string::npos) return "unknown";
  const auto second = body.find(',', first + 1);
  if (second == std::string::npos) return "unknown";
  auto id = body.substr(first + 1, second - first - 1);
  return id.empty() ? "unknown" : id;
}

std::shared_ptr<VnfHandle> VwsnProviderService::pick(Service& s, const std::string& service_id, VnfType type,
                                                     const std::string& sensor_id) {
  const auto pool = mano_.pool(service_id, type);
  if (pool.empty()) return nullptr;
  auto& route = s.routes[{type, sensor_id}];
  const bool sticky =
      route.in_flight > 0 && std::find(pool.begin(), pool.end(), route.instance_id) != pool.end();
  if (!sticky) route.instance_id = pool[fnv1a(sensor_id) % pool.size()];
  auto handle = mano_.handle(route.instance_id);
  if (!handle || handle->stopped()) return nullptr;
  ++route.in_flight;
  return handle;
}

void VwsnProviderService::settle(Service& s, VnfType type, const std::string& sensor_id) {
  auto it = s.routes.find({type, sensor_id});
  if (it != s.routes.end() && it->second.in_flight > 0) --it->second.in_flight;
}

HttpResponse VwsnProviderService::handle_ingest(const std::string& service_id, const HttpRequest& req) {
  auto it = services_.find(service_id);
  if (it == services_.end() || it->second.status != ServiceStatus::Active)
    return error_response(404, Error(Errc::NotFound, "no active service " + service_id));
  auto& s = it->second;
  const auto sensor = peek_sensor_id(req.body);
  const auto imp_type = info_model_processor_for(domain_);
  auto handle = pick(s, service_id, imp_type, sensor);
  if (!handle) return error_response(503, Error(Errc::ChainUnavailable, "no running information model processor"));

  VnfMessage msg;
  msg.payload = to_bytes(req.body);
  msg.meta[meta::kTraceId] = numbered(host_of(domain_) + "-", next_trace_++);
  msg.meta[meta::kSensorId] = sensor;
  msg.meta[meta::kDomain] = std::string(to_string(domain_));
  msg.meta[meta::kSeq] = std::to_string(++s.next_seq[sensor]);
  if (auto emit = req.header("x-emit-time"); !emit.empty()) msg.meta[meta::kEmitTime] = emit;
  msg.meta[meta::kIngressTime] = std::to_string(loop_.now());
  try {
    handle->submit(
        std::move(msg),
        [this, service_id, sensor, imp_type](std::vector<VnfMessage> out) {
          settle(services_.at(service_id), imp_type, sensor);
          for (auto& m : out) to_pc(service_id, std::move(m));
        },
        [this, service_id, sensor, imp_type](VnfMessage m, const Error& e) {
          settle(services_.at(service_id), imp_type, sensor);
          drop(m, e.what());
        });
  } catch (const Error& e) {
    settle(s, imp_type, sensor);
    return error_response(status_for(e.code()), e);
  }
  ++counters_.ingested;
  return {204, "application/json", ""};
}

void VwsnProviderService::to_pc(const std::string& service_id, VnfMessage msg) {
  auto& s = services_.at(service_id);
  const auto pc_type = protocol_converter_for(domain_);
  const auto sensor = msg.get(meta::kSensorId);
  msg = link_between_stages(domain_, std::move(msg));
  auto handle = pick(s, service_id, pc_type, sensor);
  if (!handle) {
    drop(msg, "ChainUnavailable: no running protocol converter");
    return;
  }
  try {
    handle->submit(
        std::move(msg),
        [this, service_id, sensor, pc_type](std::vector<VnfMessage> out) {
          settle(services_.at(service_id), pc_type, sensor);
          for (auto& m : out) egress(std::move(m));
        },
        [this, service_id, sensor, pc_type](VnfMessage m, const Error& e) {
          settle(services_.at(service_id), pc_type, sensor);
          drop(m, e.what());
        });
  } catch (const Error& e) {
    settle(s, pc_type, sensor);
    drop(msg, e.what());
  }
}

void VwsnProviderService::egress(VnfMessage msg) {
  HttpRequest out;
  try {
    out = parse_http_request(to_string(msg.payload));
  } catch (const Error& e) {
    drop(msg, e.what());
    return;
  }
  msg.meta[meta::kEgressTime] = std::to_string(loop_.now());
  out.headers["x-vnf-meta"] = Json(msg.meta).dump();
  ++counters_.forwarded;
  transport_.send(std::move(out), nullptr);
}

void VwsnProviderService::drop(const VnfMessage& msg, const std::string& reason) {
  ++counters_.dropped;
  if (trace_) {
    trace_->record(loop_.now(), "drop",
                   {{"trace_id", msg.get(meta::kTraceId)},
                    {"sensor_id", msg.get(meta::kSensorId)},
                    {"domain", std::string(to_string(domain_))},
                    {"reason", reason}});
  }
}

std::vector<VwsnProviderService::ServiceView> VwsnProviderService::services() const {
  std::vector<ServiceView> out;
  for (const auto& [id, s] : services_) {
    ServiceView v{id, s.status, s.reason, {}};
    for (auto type : {info_model_processor_for(domain_), protocol_converter_for(domain_)})
      v.pools[type] = mano_.pool(id, type);
    out.push_back(std::move(v));
  }
  return out;
}

std::optional<ServiceChain> VwsnProviderService::chain(const std::string& service_id) const {
  auto it = services_.find(service_id);
  if (it == services_.end() || it->second.status != ServiceStatus::Active) return std::nullopt;
  ServiceChain chain{service_id, domain_, {}};
  for (auto type : {info_model_processor_for(domain_), protocol_converter_for(domain_)}) {
    const auto pool = mano_.pool(service_id, type);
    if (pool.empty()) return std::nullopt;
    if (auto inst = mano_.instance(pool.front())) chain.stages.push_back(*inst);
  }
  return chain;
}

// ---- ApplicationService

ApplicationService::ApplicationService(EventLoop& loop, Transport& transport, Trace* trace, RetryPolicy retry,
                                       bool trace_deliveries)
    : loop_(loop), transport_(transport), trace_(trace), retry_(retry), trace_deliveries_(trace_deliveries) {}

HttpResponse ApplicationService::handle(const HttpRequest& req) {
  if (req.method == "GET" && req.path == "/health") return json_response(200, {{"status", "ok"}, {"service", "app"}});
  if (req.method == "POST" && req.path == "/ack") {
    ServiceAck ack;
    try {
      ack = service_ack_from_json(parse_body(req));
    } catch (const Error& e) {
      return error_response(400, e);
    }
    ++ack_messages_;
    const bool dup = acks_.count(ack.request_id) > 0;
    trace_control(trace_, loop_.now(), "ack", ack.provider, ack.request_id, ack.request_id, "service", dup);
    if (!dup) {
      acks_[ack.request_id] = ack;
      if (on_ack_) on_ack_(ack);
    }
    return json_response(200, {{"request_id", ack.request_id}, {"status", "ok"}});
  }
  if (req.method == "POST" && req.path == "/measurements") {
    Delivery d;
    d.arrival = loop_.now();
    d.body = req.body;
    auto meta = Json::parse(req.header("x-vnf-meta"), nullptr, false);
    if (!meta.is_discarded() && meta.is_object()) {
      for (auto& [k, v] : meta.items()) {
        if (v.is_string()) d.meta[k] = v.get<std::string>();
      }
    }
    d.trace_id = d.meta.count(meta::kTraceId) ? d.meta[meta::kTraceId] : std::string{};
    d.valid = senml_violations(d.body).empty();
    if (!d.valid) ++invalid_;
    const bool dup = !d.trace_id.empty() && !seen_traces_.insert(d.trace_id).second;
    if (dup) {
      ++duplicates_;
    }
    if (trace_ && trace_deliveries_) {
      trace_->record(d.arrival, "deliver",
                     {{"trace_id", d.trace_id},
                      {"sensor_id", d.meta[meta::kSensorId]},
                      {"domain", d.meta[meta::kDomain]},
                      {"seq", d.meta[meta::kSeq]},
                      {"stages", d.meta[meta::kStages]},
                      {"valid", d.valid},
                      {"dup", dup}});
    }
    if (!dup) deliveries_.push_back(std::move(d));
    return {204, "application/json", ""};
  }
  return error_response(404, Error(Errc::NotFound, req.method + " " + req.path));
}

void ApplicationService::request_service(Domain provider, const ServiceRequest& request,
                                         std::function<void(const HttpResponse&)> on_response) {
  send_reliably(loop_, transport_, make_post(base_url(provider) + "/rq-s", to_json(request).dump()), retry_,
                std::move(on_response), alive_);
}

}  // namespace vgw
