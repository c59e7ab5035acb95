#include <gtest/gtest.h>

#include <future>

#include "vgw/runtime.hpp"

using namespace vgw;

namespace {

class Echo : public Endpoint {
 public:
  HttpResponse handle(const HttpRequest& req) override {
    ++calls;
    last = req;
    return {201, "text/plain", req.method + " " + req.path + " " + req.body};
  }
  int calls = 0;
  HttpRequest last;
};

}  // namespace

TEST(VirtualLoop, OrdersByTimeThenInsertion) {
  VirtualLoop loop;
  std::vector<int> order;
  loop.schedule_at(10, [&] { order.push_back(3); });
  loop.schedule_at(5, [&] { order.push_back(1); });
  loop.schedule_at(5, [&] { order.push_back(2); });
  const auto id = loop.schedule_at(7, [&] { order.push_back(99); });
  loop.cancel(id);
  loop.run_until(9);
  EXPECT_EQ(order, (std::vector<int>{1, 2}));
  EXPECT_EQ(loop.now(), 9);
  loop.run_until(20);
  EXPECT_EQ(order, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(loop.pending(), 0u);
}

TEST(VirtualLoop, TasksScheduledWhileRunningAndPastTimes) {
  VirtualLoop loop(100);
  std::vector<Millis> at;
  loop.schedule_at(50, [&] {
    at.push_back(loop.now());
    loop.schedule_after(10, [&] { at.push_back(loop.now()); });
  });
  loop.run_until(200);
  EXPECT_EQ(at, (std::vector<Millis>{100, 110}));
}

TEST(RealLoop, RunsOnItsThread) {
  RealLoop loop;
  loop.start();
  std::promise<Millis> p;
  loop.schedule_after(20, [&] { p.set_value(loop.now()); });
  auto f = p.get_future();
  ASSERT_EQ(f.wait_for(std::chrono::seconds(5)), std::future_status::ready);
  EXPECT_GE(f.get(), 20);
  loop.stop();
}

TEST(ControlClassification, DataRoutesAndHealthAreNotControl) {
  EXPECT_FALSE(is_control_request(make_post("http://vwsn1/ingest/svc-vwsn1", "x")));
  EXPECT_FALSE(is_control_request(make_post("http://app/measurements", "x")));
  HttpRequest health;
  health.method = "GET";
  health.path = "/health";
  EXPECT_FALSE(is_control_request(health));
  EXPECT_TRUE(is_control_request(make_post("http://gateway/rq-s", "{}")));
  EXPECT_TRUE(is_control_request(make_post("http://app/ack", "{}")));
}

TEST(InProcessTransport, RoundTripThroughWireBytes) {
  VirtualLoop loop;
  TrafficLog log;
  InProcessTransport t(loop, {2, 1}, &log);
  Echo echo;
  t.attach("gateway", &echo);
  std::vector<std::pair<Millis, int>> got;
  auto req = make_post("http://gateway/rq-s", R"({"a":1})");
  req.headers["x-extra"] = "v";
  t.send(req, [&](const HttpResponse& r) {
    got.emplace_back(loop.now(), r.status);
    EXPECT_EQ(r.body, R"(POST /rq-s {"a":1})");
  });
  t.send(make_post("http://gateway/measurements", "d"), [&](const HttpResponse& r) {
    got.emplace_back(loop.now(), r.status);
  });
  loop.run_until(100);
  EXPECT_EQ(got, (std::vector<std::pair<Millis, int>>{{2, 201}, {4, 201}}));
  EXPECT_EQ(echo.last.header("content-type"), "application/json");
  EXPECT_EQ(log.control_messages(), 1u);
  EXPECT_EQ(log.data_messages(), 1u);
  ASSERT_EQ(log.control_entries().size(), 1u);
  EXPECT_EQ(parse_http_request(log.control_entries()[0].wire).header("x-extra"), "v");
}

TEST(InProcessTransport, UnreachableHosts) {
  VirtualLoop loop;
  InProcessTransport t(loop, {});
  Echo echo;
  t.attach("gateway", &echo);
  t.set_reachable("gateway", false);
  std::vector<int> status;
  t.send(make_post("http://gateway/rq-s", "{}"), [&](const HttpResponse& r) { status.push_back(r.status); });
  t.send(make_post("http://nowhere/x", "{}"), [&](const HttpResponse& r) { status.push_back(r.status); });
  loop.run_until(10);
  t.set_reachable("gateway", true);
  t.send(make_post("http://gateway/rq-s", "{}"), [&](const HttpResponse& r) { status.push_back(r.status); });
  loop.run_until(20);
  EXPECT_EQ(status, (std::vector<int>{kUnreachable, kUnreachable, 201}));
  EXPECT_EQ(echo.calls, 1);
}

TEST(TcpTransport, LoopbackRoundTrip) {
  RealLoop server_loop;
  RealLoop client_loop;
  server_loop.start();
  client_loop.start();
  Echo echo;
  TcpServer server(echo, server_loop);
  const int port = server.start();
  ASSERT_GT(port, 0);
  TrafficLog log;
  TcpTransport t(client_loop, {{"gateway", port}}, &log, 2000);
  std::promise<HttpResponse> p;
  t.send(make_post("http://gateway/rq-g", "body"), [&](const HttpResponse& r) { p.set_value(r); });
  auto f = p.get_future();
  ASSERT_EQ(f.wait_for(std::chrono::seconds(5)), std::future_status::ready);
  const auto r = f.get();
  EXPECT_EQ(r.status, 201);
  EXPECT_EQ(r.body, "POST /rq-g body");

  t.set_port("gateway", 0);
  std::promise<int> q;
  t.send(make_post("http://gateway/rq-g", "body"), [&](const HttpResponse& r2) { q.set_value(r2.status); });
  auto g = q.get_future();
  ASSERT_EQ(g.wait_for(std::chrono::seconds(5)), std::future_status::ready);
  EXPECT_EQ(g.get(), kUnreachable);
  t.drain();
  server.stop();
  client_loop.stop();
  server_loop.stop();
  EXPECT_EQ(log.control_messages(), 2u);
}
