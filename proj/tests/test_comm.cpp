#include <doctest.h>

#include <bit>
#include <random>
#include <thread>

#include "support.hpp"
#include "treelet/comm.hpp"
#include "treelet/engine.hpp"
#include "treelet/transport.hpp"

using namespace treelet;
using namespace std::chrono_literals;

TEST_CASE("ring schedule examples") {
  const auto r5 = ring_schedule(5);
  CHECK(r5.steps() == 4);
  CHECK(r5.step(1, 0).send_to == 1);
  CHECK(r5.step(1, 0).recv_from == 4);
  const auto r2 = ring_schedule(2);
  CHECK(r2.steps() == 1);
  CHECK(r2.step(1, 0).send_to == 1);
  CHECK(r2.step(1, 1).send_to == 0);
  CHECK_THROWS_AS(ring_schedule(1), std::invalid_argument);
  CHECK_THROWS_AS(ring_schedule(0), std::invalid_argument);
}

TEST_CASE("ring schedule covers each ordered pair once") {
  for (std::size_t P = 2; P <= 16; ++P) {
    const auto r = ring_schedule(P);
    REQUIRE(r.steps() == P - 1);
    std::vector<int> hits(P * P, 0);
    for (std::size_t w = 1; w <= r.steps(); ++w)
      for (WorkerId p = 0; p < P; ++p) {
        const auto s = r.step(w, p);
        ++hits[p * P + s.send_to];
        // the receiver of p's message lists p as its source in the same step
        CHECK(r.step(w, s.send_to).recv_from == p);
      }
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t q = 0; q < P; ++q) CHECK(hits[p * P + q] == (p == q ? 0 : 1));
  }
}

TEST_CASE("meta id codec") {
  CHECK(encode_meta(2, 3, 5) == 2097925u);
  CHECK(encode_meta(0, 0, 0) == 0u);
  CHECK(decode_meta(2097925u) == MetaId{2, 3, 5});
  std::mt19937 rng(3);
  for (int i = 0; i < 10000; ++i) {
    const MetaId m{std::uint32_t(rng() % 4096), std::uint32_t(rng() % 4096), std::uint32_t(rng() % 256)};
    CHECK(decode_meta(encode_meta(m.sender, m.receiver, m.offset)) == m);
  }
  CHECK_THROWS_AS(encode_meta(4096, 0, 0), std::out_of_range);
  CHECK_THROWS_AS(encode_meta(0, 4096, 0), std::out_of_range);
  CHECK_THROWS_AS(encode_meta(0, 0, 256), std::out_of_range);
}

TEST_CASE("row encoding layout") {
  std::vector<Count> sparse(10, 0.0);
  sparse[3] = 7.0;
  std::vector<std::uint8_t> buf;
  encode_row(buf, 42, sparse);
  REQUIRE(buf.size() == 8 + 4 + 12);
  CHECK(buf.size() == encoded_row_size(sparse));
  CHECK(get_u64(buf.data()) == 42);
  CHECK(get_u32(buf.data() + 8) == 1);
  CHECK(get_u32(buf.data() + 12) == 3);
  CHECK(std::bit_cast<double>(get_u64(buf.data() + 16)) == 7.0);

  std::vector<Count> dense{1, 2, 3, 0};
  buf.clear();
  encode_row(buf, 5, dense);
  CHECK(buf.size() == 8 + 4 + 8 * 4);
  CHECK(get_u32(buf.data() + 8) == (3 | kDenseFlag));

  // exactly half nonzero stays sparse
  std::vector<Count> half{1, 0, 2, 0};
  CHECK(encoded_row_size(half) == 12 + 24);
  CHECK(row_is_zero(std::vector<Count>(5, 0.0)));
  CHECK_FALSE(row_is_zero(half));
}

TEST_CASE("row decoding round trip and faults") {
  std::vector<Count> a{0, 0, 4, 0, 0, 0}, b{1, 2, 3, 4, 5, 6};
  std::vector<std::uint8_t> buf;
  encode_row(buf, 10, a);
  encode_row(buf, 30, b);
  RemoteRows rows(1, 0, 6, {10, 20, 30});
  CHECK(decode_rows(buf, rows) == 2);
  CHECK(std::vector<Count>(rows.row(10, 0).begin(), rows.row(10, 0).end()) == a);
  CHECK(std::vector<Count>(rows.row(30, 0).begin(), rows.row(30, 0).end()) == b);
  CHECK(rows.row(20, 0).empty());

  RemoteRows t1(1, 0, 6, {10, 20, 30});
  std::vector<std::uint8_t> cut(buf.begin(), buf.end() - 3);
  CHECK_THROWS_AS(decode_rows(cut, t1), ProtocolError);

  std::vector<std::uint8_t> bad;
  put_u64(bad, 10);
  put_u32(bad, 1);
  put_u32(bad, 99);  // index past the row width
  put_u64(bad, std::bit_cast<std::uint64_t>(1.0));
  RemoteRows t2(1, 0, 6, {10});
  CHECK_THROWS_AS(decode_rows(bad, t2), ProtocolError);

  RemoteRows t3(1, 0, 6, {20});
  CHECK_THROWS_AS(decode_rows(buf, t3), ProtocolError);  // row 10 was never requested
}

TEST_CASE("exchange plan on a path") {
  const auto g = testing::path_graph(3);
  Partition part{2, {0, 1, 0}, {{0, 2}, {1}}};
  const auto plan = build_exchange_plan(g, part);
  CHECK(plan.rows(1, 0) == std::vector<VertexId>{1});
  CHECK(plan.rows(0, 1) == std::vector<VertexId>{0, 2});
  CHECK(plan.rows(0, 0).empty());
  CHECK(plan.total_rows() == 3);

  const auto single = build_exchange_plan(g, partition_random(g, 1, 1));
  CHECK(single.empty());
}

TEST_CASE("exchange plan matches a recount from the edge list") {
  const auto g = testing::erdos_renyi(80, 0.08, 21);
  for (std::size_t P : {2u, 3u, 5u}) {
    const auto part = partition_random(g, P, 4);
    const auto plan = build_exchange_plan(g, part);
    std::set<std::tuple<WorkerId, WorkerId, VertexId>> demand;
    for (auto [u, v] : g.edge_list()) {
      if (part.owner[u] == part.owner[v]) continue;
      demand.emplace(part.owner[u], part.owner[v], u);
      demand.emplace(part.owner[v], part.owner[u], v);
    }
    std::size_t listed = 0;
    for (WorkerId p = 0; p < P; ++p)
      for (WorkerId q = 0; q < P; ++q) {
        const auto& rows = plan.rows(p, q);
        CHECK(std::is_sorted(rows.begin(), rows.end()));
        for (auto v : rows) {
          CHECK(part.owner[v] == p);
          CHECK(demand.count({p, q, v}) == 1);
        }
        listed += rows.size();
      }
    CHECK(listed == demand.size());
  }
}

TEST_CASE("mode selection") {
  const ModePolicy naive{Mode::naive, 5.0}, adaptive{}, pipe{Mode::pipeline, 5.0};
  CostModel heavy;
  heavy.intensity = 100.0;
  SubTemplate leaf, big;
  big.size = 8;
  big.active = 1;
  big.passive = 2;
  CHECK(select_mode(naive, big, heavy) == ExchangeMode::alltoall);
  CHECK(select_mode(pipe, big, heavy) == ExchangeMode::pipeline);
  CHECK(select_mode(adaptive, leaf, heavy) == ExchangeMode::alltoall);
  CHECK(select_mode(adaptive, big, heavy) == ExchangeMode::pipeline);
  CostModel light;
  light.intensity = 2.0;
  CHECK(select_mode(adaptive, big, light) == ExchangeMode::alltoall);

  const auto u12 = partition_template(named_template("u12-2"));
  const auto m12 = resolve_modes(adaptive, u12);
  for (std::size_t i = 0; i < m12.size(); ++i)
    CHECK(m12[i] == (u12.entry(i).is_leaf() ? ExchangeMode::alltoall : ExchangeMode::pipeline));
  const auto u5 = partition_template(named_template("u5-2"));
  for (auto m : resolve_modes(adaptive, u5)) CHECK(m == ExchangeMode::alltoall);

  CHECK(parse_mode("pipeline") == Mode::pipeline);
  CHECK(to_string(Mode::adaptive) == "adaptive");
  CHECK_THROWS_AS(parse_mode("fast"), std::invalid_argument);
}

namespace {

void exercise_fabric(std::vector<std::unique_ptr<Transport>>& f) {
  const std::size_t P = f.size();
  for (WorkerId p = 0; p < P; ++p) {
    CHECK(f[p]->rank() == p);
    CHECK(f[p]->size() == P);
  }
  // every ordered pair, with a large payload and an empty one, in order
  for (WorkerId p = 0; p < P; ++p)
    for (WorkerId q = 0; q < P; ++q) {
      if (p == q) continue;
      Frame big{encode_meta(p, q, 0), std::vector<std::uint8_t>(300000)};
      for (std::size_t i = 0; i < big.payload.size(); ++i) big.payload[i] = static_cast<std::uint8_t>(i * 7 + p);
      f[p]->send(q, std::move(big));
      f[p]->send(q, Frame{encode_meta(p, q, 1), {}});
    }
  for (WorkerId q = 0; q < P; ++q)
    for (WorkerId p = 0; p < P; ++p) {
      if (p == q) continue;
      auto a = f[q]->recv(p, 5s);
      REQUIRE(a.has_value());
      CHECK(decode_meta(a->meta) == MetaId{p, q, 0});
      REQUIRE(a->payload.size() == 300000);
      CHECK(a->payload[12345] == static_cast<std::uint8_t>(12345 * 7 + p));
      auto b = f[q]->recv(p, 5s);
      REQUIRE(b.has_value());
      CHECK(decode_meta(b->meta).offset == 1);
      CHECK(b->payload.empty());
    }
  CHECK_FALSE(f[0]->recv(1, 20ms).has_value());

  std::thread waiter([&] { CHECK_THROWS_AS(f[1]->recv(0, 10s), TransportError); });
  std::this_thread::sleep_for(50ms);
  f[1]->abort("test abort");
  waiter.join();
}

}  // namespace

TEST_CASE("in-process transport") {
  auto f = make_inproc_fabric(3);
  CHECK(f[0]->kind() == "inproc");
  exercise_fabric(f);
}

TEST_CASE("socket transport over loopback") {
  auto f = make_loopback_socket_fabric(3);
  CHECK(f[0]->kind() == "socket");
  exercise_fabric(f);
}

TEST_CASE("peer list parsing") {
  const auto peers = parse_peers("127.0.0.1:7000,node2:7001");
  REQUIRE(peers.size() == 2);
  CHECK(peers[0].host == "127.0.0.1");
  CHECK(peers[1].port == 7001);
  CHECK_THROWS_AS(parse_peers(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_peers("host"), std::invalid_argument);
  CHECK_THROWS_AS(parse_peers("host:0"), std::invalid_argument);
}

namespace {

// Worker 0 runs a real engine on the edge template; the test plays worker 1 by hand.
struct Rig {
  Graph g = testing::path_graph(6);
  Partition part{2, {0, 1, 0, 1, 0, 1}, {{0, 2, 4}, {1, 3, 5}}};
  ExchangePlan xplan = build_exchange_plan(g, part);
  TemplatePlan plan = partition_template(testing::edge_template());
  std::vector<std::unique_ptr<Transport>> fabric = make_inproc_fabric(2);

  std::string run(Mode mode, const std::function<void(Transport&)>& peer) {
    EngineConfig cfg;
    cfg.policy.mode = mode;
    cfg.recv_timeout = 200ms;
    WorkerEngine w0(g, part, xplan, plan, 0, fabric[0].get(), cfg);
    peer(*fabric[1]);
    try {
      w0.colorful_partial(1);
    } catch (const ProtocolError& e) {
      return e.what();
    }
    return "";
  }
};

Frame row_frame(WorkerId from, WorkerId to, std::uint32_t offset, VertexId v) {
  Frame f{encode_meta(from, to, offset), {}};
  std::vector<Count> row{1.0, 0.0};
  encode_row(f.payload, v, row);
  return f;
}

}  // namespace

TEST_CASE("protocol errors at the barrier") {
  for (Mode mode : {Mode::naive, Mode::pipeline}) {
    CAPTURE(to_string(mode));
    {
      Rig rig;
      const auto msg = rig.run(mode, [](Transport&) {});
      CHECK(msg.find("missing packet from worker 1") != std::string::npos);
      CHECK(msg.find("stage") != std::string::npos);
    }
    {
      Rig rig;
      const auto msg = rig.run(mode, [](Transport& t) { t.send(0, row_frame(1, 0, 3, 1)); });
      CHECK(msg.find("expected chunk 0") != std::string::npos);
    }
    {
      Rig rig;
      const auto msg = rig.run(mode, [](Transport& t) { t.send(0, row_frame(1, 0, 0, 5000)); });
      CHECK(msg.find("unrequested row") != std::string::npos);
    }
    {
      Rig rig;
      const auto msg = rig.run(mode, [](Transport& t) {
        t.send(0, row_frame(1, 0, 0, 1));
        t.send(0, row_frame(1, 0, 1, 1));
        t.send(0, Frame{encode_meta(1, 0, 2), {}});
      });
      CHECK(msg.find("twice") != std::string::npos);
    }
    {
      Rig rig;
      const auto msg = rig.run(mode, [](Transport& t) { t.send(0, Frame{encode_meta(1, 1, 0), {}}); });
      CHECK(msg.find("got meta (1, 1, 0)") != std::string::npos);
    }
  }
}
