#include "vgw/runtime.hpp"

#include <future>
#include <limits>
#include <queue>

#include <nlohmann/json.hpp>

#include "httplib.h"

namespace vgw {

namespace detail {

TimerId TimerQueue::push(Millis when, Task task) {
  const TimerId id = next_id_++;
  tasks_.emplace(std::make_pair(when, id), std::move(task));
  by_id_.emplace(id, when);
  return id;
}

bool TimerQueue::cancel(TimerId id) {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return false;
  tasks_.erase({it->second, id});
  by_id_.erase(it);
  return true;
}

Task TimerQueue::pop(Millis& when) {
  auto it = tasks_.begin();
  when = it->first.first;
  by_id_.erase(it->first.second);
  Task task = std::move(it->second);
  tasks_.erase(it);
  return task;
}

}  // namespace detail

// ---- VirtualLoop

Millis VirtualLoop::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

TimerId VirtualLoop::schedule_at(Millis when, Task task) {
  std::lock_guard lock(mu_);
  return queue_.push(std::max(when, now_), std::move(task));
}

void VirtualLoop::cancel(TimerId id) {
  std::lock_guard lock(mu_);
  queue_.cancel(id);
}

void VirtualLoop::run_until(Millis until) {
  while (true) {
    Task task;
    {
      std::lock_guard lock(mu_);
      if (queue_.empty() || queue_.next_time() > until) break;
      Millis when = 0;
      task = queue_.pop(when);
      now_ = std::max(now_, when);
    }
    task();
  }
  std::lock_guard lock(mu_);
  now_ = std::max(now_, until);
}

std::size_t VirtualLoop::pending() const {
  std::lock_guard lock(mu_);
  return queue_.empty() ? 0 : 1;
}

// ---- RealLoop

RealLoop::~RealLoop() { stop(); }

Millis RealLoop::now() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - epoch_).count();
}

TimerId RealLoop::schedule_at(Millis when, Task task) {
  TimerId id;
  {
    std::lock_guard lock(mu_);
    id = queue_.push(when, std::move(task));
  }
  cv_.notify_all();
  return id;
}

void RealLoop::cancel(TimerId id) {
  std::lock_guard lock(mu_);
  queue_.cancel(id);
}

void RealLoop::run_until(Millis until) {
  std::unique_lock lock(mu_);
  while (!stopping_) {
    const Millis t = now();
    if (!queue_.empty() && queue_.next_time() <= t) {
      Millis when = 0;
      Task task = queue_.pop(when);
      lock.unlock();
      task();
      lock.lock();
      continue;
    }
    if (t >= until) break;
    Millis wake = until;
    if (!queue_.empty()) wake = std::min(wake, queue_.next_time());
    cv_.wait_until(lock, epoch_ + std::chrono::milliseconds(wake));
  }
}

void RealLoop::start() {
  {
    std::lock_guard lock(mu_);
    stopping_ = false;
  }
  thread_ = std::thread([this] { run_until(std::numeric_limits<Millis>::max() / 4); });
}

void RealLoop::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

// ---- traffic

std::string error_body(std::string_view code, std::string_view detail) {
  nlohmann::json j;
  j["error"] = std::string(code);
  j["detail"] = std::string(detail);
  return j.dump();
}

bool is_control_request(const HttpRequest& req) {
  if (req.method == "GET") return false;
  if (req.path.rfind("/ingest/", 0) == 0) return false;
  if (req.path == "/measurements") return false;
  return true;
}

void TrafficLog::record(Millis t, const HttpRequest& req, const std::string& wire) {
  if (!is_control_request(req)) {
    ++data_;
    return;
  }
  ++control_;
  std::lock_guard lock(mu_);
  control_log_.push_back({t, req.host, wire});
}

std::vector<TrafficLog::Entry> TrafficLog::control_entries() const {
  std::lock_guard lock(mu_);
  return control_log_;
}

HttpRequest make_post(const std::string& url, std::string body, std::string content_type) {
  const Url u = parse_url(url);
  HttpRequest req;
  req.method = "POST";
  req.path = u.path;
  req.host = u.host;
  req.headers["content-type"] = std::move(content_type);
  req.body = std::move(body);
  return req;
}

// ---- InProcessTransport

InProcessTransport::InProcessTransport(EventLoop& loop, LinkLatency latency, TrafficLog* log)
    : loop_(loop), latency_(latency), log_(log) {}

void InProcessTransport::attach(const std::string& host, Endpoint* endpoint) { endpoints_[host] = endpoint; }

void InProcessTransport::set_reachable(const std::string& host, bool reachable) {
  if (reachable) {
    down_.erase(host);
  } else {
    down_.insert(host);
  }
}

bool InProcessTransport::reachable(const std::string& host) const {
  return endpoints_.count(host) > 0 && down_.count(host) == 0;
}

void InProcessTransport::send(HttpRequest req, ResponseHandler on_response) {
  const Millis latency = is_control_request(req) ? latency_.control_ms : latency_.data_ms;
  auto wire = std::make_shared<std::string>(serialize_http_request(req));
  if (log_) log_->record(loop_.now(), req, *wire);
  const std::string host = req.host;
  loop_.schedule_after(latency, [this, host, wire, latency, on_response = std::move(on_response)]() mutable {
    HttpResponse response;
    if (!reachable(host)) {
      response.status = kUnreachable;
      response.body = R"({"error":"Unreachable","detail":")" + host + "\"}";
    } else {
      try {
        response = endpoints_.at(host)->handle(parse_http_request(*wire));
      } catch (const Error& e) {
        response.status = 400;
        response.body = error_body(to_string(e.code()), e.detail());
      }
    }
    if (!on_response) return;
    loop_.schedule_after(latency, [response = std::move(response), cb = std::move(on_response)] { cb(response); });
  });
}

// ---- TcpTransport

TcpTransport::TcpTransport(EventLoop& caller_loop, std::map<std::string, int> ports, TrafficLog* log,
                           Millis timeout_ms)
    : loop_(caller_loop), ports_(std::move(ports)), log_(log), timeout_ms_(timeout_ms) {}

TcpTransport::~TcpTransport() { drain(); }

void TcpTransport::send(HttpRequest req, ResponseHandler on_response) {
  const auto wire = serialize_http_request(req);
  if (log_) log_->record(loop_.now(), req, wire);
  int port = 0;
  {
    std::lock_guard lock(mu_);
    auto it = ports_.find(req.host);
    if (it != ports_.end()) port = it->second;
  }
  if (port == 0) {
    loop_.post([cb = std::move(on_response)] {
      if (cb) cb(HttpResponse{kUnreachable, "application/json", R"({"error":"Unreachable"})"});
    });
    return;
  }
  const Millis timeout = timeout_ms_;
  std::lock_guard lock(mu_);
  workers_.emplace_back([this, port, timeout, req = std::move(req), cb = std::move(on_response)] {
    httplib::Client client("127.0.0.1", port);
    client.set_connection_timeout(std::chrono::milliseconds(timeout));
    client.set_read_timeout(std::chrono::milliseconds(timeout));
    httplib::Headers headers;
    std::string content_type = "application/octet-stream";
    for (const auto& [name, value] : req.headers) {
      if (name == "content-type") {
        content_type = value;
      } else if (name != "host" && name != "content-length") {
        headers.emplace(name, value);
      }
    }
    headers.emplace("X-Vgw-Host", req.host);
    httplib::Result res = req.method == "GET" ? client.Get(req.path, headers)
                                              : client.Post(req.path, headers, req.body, content_type);
    HttpResponse response;
    if (res) {
      response.status = res->status;
      response.body = res->body;
      response.content_type = res->get_header_value("Content-Type");
    } else {
      response.status = kUnreachable;
      response.body = R"({"error":"Unreachable"})";
    }
    loop_.post([response = std::move(response), cb] {
      if (cb) cb(response);
    });
  });
}

void TcpTransport::set_port(const std::string& host, int port) {
  std::lock_guard lock(mu_);
  ports_[host] = port;
}

void TcpTransport::drain() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    workers.swap(workers_);
  }
  for (auto& w : workers) {
    if (w.joinable()) w.join();
  }
}

// ---- TcpServer

struct TcpServer::Impl {
  Endpoint& endpoint;
  EventLoop& loop;
  httplib::Server server;
  std::thread thread;
};

TcpServer::TcpServer(Endpoint& endpoint, EventLoop& loop) : impl_(new Impl{endpoint, loop, {}, {}}) {
  auto handler = [impl = impl_.get()](const httplib::Request& in, httplib::Response& out) {
    HttpRequest req;
    req.method = in.method;
    req.path = in.path;
    for (const auto& [name, value] : in.headers) {
      std::string lower = name;
      for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      req.headers[lower] = value;
    }
    req.host = req.header("x-vgw-host");
    req.headers.erase("x-vgw-host");
    req.body = in.body;
    auto promise = std::make_shared<std::promise<HttpResponse>>();
    auto future = promise->get_future();
    impl->loop.post([impl, req, promise] {
      try {
        promise->set_value(impl->endpoint.handle(req));
      } catch (const std::exception& e) {
        promise->set_value(HttpResponse{500, "application/json", error_body("Internal", e.what())});
      }
    });
    if (future.wait_for(std::chrono::seconds(30)) != std::future_status::ready) {
      out.status = 503;
      return;
    }
    auto response = future.get();
    out.status = response.status;
    if (!response.body.empty()) out.set_content(response.body, response.content_type);
  };
  impl_->server.Post(".*", handler);
  impl_->server.Get(".*", handler);
}

TcpServer::~TcpServer() { stop(); }

int TcpServer::start() {
  const int port = impl_->server.bind_to_any_port("127.0.0.1");
  if (port <= 0) throw Error(Errc::InvalidConfig, "cannot bind loopback port");
  impl_->thread = std::thread([impl = impl_.get()] { impl->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void TcpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace vgw
