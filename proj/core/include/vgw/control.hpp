#pragma once

// RESTful control plane: Rq-S, Rq-G, G-I and ACK message types, the three
// service kinds (gateway provider, VWSN provider, application) and the data
// ingestion path into the service chains.

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vgw/image_store.hpp"
#include "vgw/mano.hpp"
#include "vgw/model.hpp"
#include "vgw/runtime.hpp"
#include "vgw/trace.hpp"
#include "vgw/vnf.hpp"

namespace vgw {

/// Symbolic host of each domain's service: "gateway", "vwsn1", "vwsn2", "app".
std::string host_of(Domain d);
std::string base_url(Domain d);

// ---- messages

Json to_json(const ServiceRequest& r);
/// Throws InvalidArgument on malformed JSON structure (not on invariant
/// violations; see ServiceRequest::violations).
ServiceRequest service_request_from_json(const Json& j);

struct VnfRequirementRequest {
  std::string request_id;
  Domain domain = Domain::VWSN1;
  std::vector<VnfDescriptor> vnf_descriptors;
  std::string reply_url;
  /// "service" for initial provisioning, "scale" for scale-out.
  std::string purpose = "service";
  std::string service_id;

  std::vector<std::string> violations() const;
};

Json to_json(const VnfRequirementRequest& r);
VnfRequirementRequest requirement_request_from_json(const Json& j);

struct DispatchedInstance {
  std::string instance_id;
  VnfType vnf_type = VnfType::InfoModelProcessor1;
  bool ready = false;
  std::string reason;
  std::optional<Location> location;
};

/// G-I: the gateway provider's dispatch notification.
struct GatewayInstanceNotification {
  std::string request_id;
  Domain domain = Domain::VWSN1;
  std::vector<DispatchedInstance> instances;
};

Json to_json(const GatewayInstanceNotification& n);
GatewayInstanceNotification notification_from_json(const Json& j);

struct ServiceAck {
  std::string request_id;
  Domain provider = Domain::VWSN1;
  bool ready = false;
  std::string reason;
  std::string service_endpoint;
};

Json to_json(const ServiceAck& a);
ServiceAck service_ack_from_json(const Json& j);

// ---- delivery helpers

struct RetryPolicy {
  Millis initial_ms = 100;
  Millis max_ms = 2000;
};

/// Sends `req` and retries with exponential backoff while the destination is
/// unreachable or answers 5xx, until `alive` turns false. `done` receives the
/// first 2xx/4xx response.
void send_reliably(EventLoop& loop, Transport& transport, HttpRequest req, RetryPolicy policy,
                   std::function<void(const HttpResponse&)> done,
                   std::shared_ptr<std::atomic<bool>> alive = nullptr);

HttpResponse json_response(int status, const Json& body);
HttpResponse error_response(int status, const Error& e);

/// JSON-RPC style transport of the Ve-Vnfm / Nf-Vi calls over POST /rpc.
class RpcDomainPort final : public DomainPort {
 public:
  RpcDomainPort(EventLoop& loop, Transport& transport, RetryPolicy retry = {},
                std::shared_ptr<std::atomic<bool>> alive = nullptr);
  void call(Domain domain, const std::string& method, Json params, Reply reply) override;

 private:
  EventLoop& loop_;
  Transport& transport_;
  RetryPolicy retry_;
  std::shared_ptr<std::atomic<bool>> alive_;
  std::atomic<std::uint64_t> next_id_{1};
};

/// Trace record for a control message as seen by its receiver.
void trace_control(Trace* trace, Millis t, std::string_view kind, Domain provider, const std::string& request_id,
                   const std::string& service_id, std::string_view purpose, bool duplicate);

// ---- services

/// Gateway provider: POST /rq-g, GET /health.
class GatewayProviderService final : public Endpoint {
 public:
  GatewayProviderService(EventLoop& loop, Transport& transport, const ImageStore& store, CoreMano& mano,
                         Trace* trace = nullptr, RetryPolicy retry = {});

  HttpResponse handle(const HttpRequest& req) override;
  void shutdown() { alive_->store(false); }
  std::shared_ptr<std::atomic<bool>> alive() const { return alive_; }

  std::size_t requests_seen() const { return results_.size(); }
  std::size_t notifications_sent() const { return gi_sent_; }

 private:
  HttpResponse handle_rq_g(const HttpRequest& req);
  void dispatch(const VnfRequirementRequest& r, const std::vector<MigrationOutcome>& outcomes);

  EventLoop& loop_;
  Transport& transport_;
  const ImageStore& store_;
  CoreMano& mano_;
  Trace* trace_;
  RetryPolicy retry_;
  std::shared_ptr<std::atomic<bool>> alive_ = std::make_shared<std::atomic<bool>>(true);
  std::map<std::string, HttpResponse> results_;
  std::size_t gi_sent_ = 0;
};

struct ProviderCounters {
  std::uint64_t ingested = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t dropped = 0;
  std::uint64_t acks_sent = 0;
  std::uint64_t rq_g_sent = 0;
};

/// VWSN provider: POST /rq-s, /g-i, /ingest/{service_id}, /rpc, GET /health.
class VwsnProviderService final : public Endpoint {
 public:
  /// `catalogue` holds the descriptors of this domain's IMP and PC.
  VwsnProviderService(Domain domain, EventLoop& loop, Transport& transport, DomainMano& mano,
                      std::map<VnfType, VnfDescriptor> catalogue, Trace* trace = nullptr, RetryPolicy retry = {});

  HttpResponse handle(const HttpRequest& req) override;
  void shutdown() { alive_->store(false); }
  std::shared_ptr<std::atomic<bool>> alive() const { return alive_; }

  Domain domain() const { return domain_; }
  ProviderCounters counters() const { return counters_; }

  enum class ServiceStatus { Pending, Active, Rejected };
  struct ServiceView {
    std::string service_id;
    ServiceStatus status = ServiceStatus::Pending;
    std::string reason;
    std::map<VnfType, std::vector<std::string>> pools;
  };
  std::vector<ServiceView> services() const;
  std::optional<ServiceChain> chain(const std::string& service_id) const;

 private:
  struct Route {
    std::string instance_id;
    int in_flight = 0;
  };
  struct Service {
    ServiceRequest request;
    ServiceStatus status = ServiceStatus::Pending;
    std::string reason;
    std::string rq_g_id;
    std::map<std::pair<VnfType, std::string>, Route> routes;
    std::map<std::string, std::uint64_t> next_seq;
  };
  struct PendingRequest {
    std::string service_id;
    std::string purpose;
    VnfType vnf_type = VnfType::InfoModelProcessor1;
    int count = 0;
  };

  HttpResponse handle_rq_s(const HttpRequest& req);
  HttpResponse handle_g_i(const HttpRequest& req);
  HttpResponse handle_ingest(const std::string& service_id, const HttpRequest& req);
  HttpResponse handle_rpc(const HttpRequest& req);

  void send_rq_g(const std::string& service_id, const std::string& request_id, const std::string& purpose,
                 std::vector<VnfDescriptor> descriptors);
  void send_ack(const std::string& service_id, bool ready, const std::string& reason);
  void request_scale_up(const std::string& service_id, VnfType type, int count);

  std::shared_ptr<VnfHandle> pick(Service& s, const std::string& service_id, VnfType type,
                                  const std::string& sensor_id);
  void settle(Service& s, VnfType type, const std::string& sensor_id);
  void to_pc(const std::string& service_id, VnfMessage msg);
  void egress(VnfMessage msg);
  void drop(const VnfMessage& msg, const std::string& reason);
  std::string peek_sensor_id(const std::string& body) const;

  Domain domain_;
  EventLoop& loop_;
  Transport& transport_;
  DomainMano& mano_;
  std::map<VnfType, VnfDescriptor> catalogue_;
  Trace* trace_;
  RetryPolicy retry_;
  std::shared_ptr<std::atomic<bool>> alive_ = std::make_shared<std::atomic<bool>>(true);
  std::map<std::string, Service> services_;
  std::map<std::string, PendingRequest> pending_;
  std::map<std::string, HttpResponse> g_i_results_;
  std::map<std::string, HttpResponse> rpc_results_;
  std::uint64_t next_trace_ = 1;
  std::uint64_t next_scale_ = 1;
  ProviderCounters counters_;
};

struct Delivery {
  Millis arrival = 0;
  std::string trace_id;
  std::string body;
  std::map<std::string, std::string> meta;
  bool valid = false;
};

/// Forest-monitoring application stub: POST /ack, /measurements, GET /health;
/// also the client side of Rq-S.
class ApplicationService final : public Endpoint {
 public:
  using OnAck = std::function<void(const ServiceAck&)>;

  ApplicationService(EventLoop& loop, Transport& transport, Trace* trace = nullptr, RetryPolicy retry = {},
                     bool trace_deliveries = true);

  HttpResponse handle(const HttpRequest& req) override;
  void shutdown() { alive_->store(false); }

  void set_on_ack(OnAck on_ack) { on_ack_ = std::move(on_ack); }
  /// Sends Rq-S to `provider`; `on_response` gets the provider's answer.
  void request_service(Domain provider, const ServiceRequest& request,
                       std::function<void(const HttpResponse&)> on_response = nullptr);

  const std::vector<Delivery>& deliveries() const { return deliveries_; }
  std::size_t invalid_deliveries() const { return invalid_; }
  std::size_t duplicate_deliveries() const { return duplicates_; }
  const std::map<std::string, ServiceAck>& acks() const { return acks_; }
  std::size_t ack_messages() const { return ack_messages_; }

 private:
  EventLoop& loop_;
  Transport& transport_;
  Trace* trace_;
  RetryPolicy retry_;
  bool trace_deliveries_;
  std::shared_ptr<std::atomic<bool>> alive_ = std::make_shared<std::atomic<bool>>(true);
  OnAck on_ack_;
  std::vector<Delivery> deliveries_;
  std::set<std::string> seen_traces_;
  std::size_t invalid_ = 0;
  std::size_t duplicates_ = 0;
  std::map<std::string, ServiceAck> acks_;
  std::size_t ack_messages_ = 0;
};

/// FNV-1a 64-bit, used for per-sensor instance selection.
std::uint64_t fnv1a(std::string_view s) noexcept;

}  // namespace vgw
