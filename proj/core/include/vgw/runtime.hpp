#pragma once

// Event loops (virtual and real time) and the HTTP transports that connect
// the domains: an in-process transport that still passes every request
// through its HTTP/1.1 byte form, and a loopback TCP transport.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "vgw/codec.hpp"
#include "vgw/model.hpp"

namespace vgw {

using Task = std::function<void()>;
using TimerId = std::uint64_t;

class EventLoop {
 public:
  virtual ~EventLoop() = default;

  virtual Millis now() const = 0;
  virtual bool is_virtual() const = 0;

  /// Thread-safe. Runs `task` on the loop at `when` (or as soon as possible if past).
  virtual TimerId schedule_at(Millis when, Task task) = 0;
  virtual void cancel(TimerId id) = 0;
  /// Processes tasks due at or before `until`, then leaves the clock at `until`.
  virtual void run_until(Millis until) = 0;

  TimerId post(Task task) { return schedule_at(now(), std::move(task)); }
  TimerId schedule_after(Millis delay, Task task) { return schedule_at(now() + delay, std::move(task)); }
};

namespace detail {

/// Timer queue ordered by (time, insertion sequence), shared by both loops.
class TimerQueue {
 public:
  TimerId push(Millis when, Task task);
  bool cancel(TimerId id);
  bool empty() const { return tasks_.empty(); }
  Millis next_time() const { return tasks_.begin()->first.first; }
  Task pop(Millis& when);

 private:
  std::map<std::pair<Millis, TimerId>, Task> tasks_;
  std::unordered_map<TimerId, Millis> by_id_;
  TimerId next_id_ = 1;
};

}  // namespace detail

/// Discrete-event loop: time jumps to the next task, never sleeps.
class VirtualLoop final : public EventLoop {
 public:
  explicit VirtualLoop(Millis start = 0) : now_(start) {}

  Millis now() const override;
  bool is_virtual() const override { return true; }
  TimerId schedule_at(Millis when, Task task) override;
  void cancel(TimerId id) override;
  void run_until(Millis until) override;

  std::size_t pending() const;

 private:
  mutable std::mutex mu_;
  detail::TimerQueue queue_;
  Millis now_;
};

/// Wall-clock loop. now() is milliseconds since `epoch`, so several loops
/// built from the same epoch share one timeline.
class RealLoop final : public EventLoop {
 public:
  using Clock = std::chrono::steady_clock;

  explicit RealLoop(Clock::time_point epoch = Clock::now()) : epoch_(epoch) {}
  ~RealLoop() override;

  Millis now() const override;
  bool is_virtual() const override { return false; }
  TimerId schedule_at(Millis when, Task task) override;
  void cancel(TimerId id) override;
  void run_until(Millis until) override;

  /// Runs the loop on its own thread until stop().
  void start();
  void stop();

 private:
  Clock::time_point epoch_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  detail::TimerQueue queue_;
  bool stopping_ = false;
  std::thread thread_;
};

/// A service reachable over the transport. handle() always runs on the
/// service's own loop.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual HttpResponse handle(const HttpRequest& req) = 0;
};

/// {"error": code, "detail": detail}
std::string error_body(std::string_view code, std::string_view detail);

/// Status used when the destination could not be reached.
inline constexpr int kUnreachable = 0;

/// Control requests are everything except the data-plane routes
/// (/ingest/..., /measurements) and GET /health.
bool is_control_request(const HttpRequest& req);

/// Record of transported traffic: counts per plane and the serialized bytes
/// of every control request (for duplicate-delivery replay).
class TrafficLog {
 public:
  struct Entry {
    Millis t;
    std::string host;
    std::string wire;
  };

  void record(Millis t, const HttpRequest& req, const std::string& wire);
  std::uint64_t control_messages() const { return control_.load(); }
  std::uint64_t data_messages() const { return data_.load(); }
  std::vector<Entry> control_entries() const;

 private:
  std::atomic<std::uint64_t> control_{0};
  std::atomic<std::uint64_t> data_{0};
  mutable std::mutex mu_;
  std::vector<Entry> control_log_;
};

class Transport {
 public:
  using ResponseHandler = std::function<void(const HttpResponse&)>;
  virtual ~Transport() = default;
  /// Sends `req` to the service named by req.host. `on_response` runs on the
  /// sender's loop; status kUnreachable when delivery failed.
  virtual void send(HttpRequest req, ResponseHandler on_response) = 0;
};

/// Builds a POST to `url` with a JSON (or raw) body.
HttpRequest make_post(const std::string& url, std::string body,
                      std::string content_type = "application/json");

struct LinkLatency {
  Millis control_ms = 1;
  Millis data_ms = 1;
};

/// Single-process transport on a shared loop. Requests are serialized to
/// HTTP/1.1 bytes and parsed again on delivery.
class InProcessTransport final : public Transport {
 public:
  InProcessTransport(EventLoop& loop, LinkLatency latency, TrafficLog* log = nullptr);

  void attach(const std::string& host, Endpoint* endpoint);
  /// Unreachable hosts answer every request with kUnreachable.
  void set_reachable(const std::string& host, bool reachable);
  bool reachable(const std::string& host) const;

  void send(HttpRequest req, ResponseHandler on_response) override;

 private:
  EventLoop& loop_;
  LinkLatency latency_;
  TrafficLog* log_;
  std::map<std::string, Endpoint*> endpoints_;
  std::set<std::string> down_;
};

/// Loopback TCP transport. Symbolic hosts ("vwsn1") resolve through the
/// port table to 127.0.0.1:<port>.
class TcpTransport final : public Transport {
 public:
  TcpTransport(EventLoop& caller_loop, std::map<std::string, int> ports, TrafficLog* log = nullptr,
               Millis timeout_ms = 5000);
  ~TcpTransport() override;

  void send(HttpRequest req, ResponseHandler on_response) override;
  void set_port(const std::string& host, int port);
  /// Blocks until all in-flight requests have completed.
  void drain();

 private:
  EventLoop& loop_;
  std::map<std::string, int> ports_;
  TrafficLog* log_;
  Millis timeout_ms_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
};

/// Serves an Endpoint on 127.0.0.1; requests are handed to the endpoint's
/// loop and the connection thread waits for the answer.
class TcpServer {
 public:
  TcpServer(Endpoint& endpoint, EventLoop& loop);
  ~TcpServer();

  /// Binds an ephemeral port and starts listening; returns the port.
  int start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vgw
