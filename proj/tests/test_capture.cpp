#include <gtest/gtest.h>

#include <thread>

#include "sniff/capture.hpp"
#include "support.hpp"

using namespace sniff;
using namespace testsupport;
using namespace std::chrono_literals;

namespace {

RawFrame udp_frame(int i) {
  return frame_at(ether(mac_of(1), mac_of(2), ethertype::ipv4,
                        udp(ip_of(1), ip_of(2), 1000, static_cast<std::uint16_t>(1 + i % 7))),
                  base_ns + i * 1'000'000LL);
}

RawFrame arp_frame(int i) {
  return frame_at(ether(mac_of(3), mac_of(4), ethertype::arp,
                        arp(ArpPacket::request, mac_of(3), ip_of(3), MacAddr{}, ip_of(4))),
                  base_ns + i * 1'000'000LL);
}

std::unique_ptr<CaptureSession> queue_session(std::vector<RawFrame> frames, bool finished, FilterExpr f = {},
                                              CaptureSession::Options o = {}, QueueSource** q = nullptr) {
  auto src = std::make_unique<QueueSource>(std::move(frames), finished);
  if (q) *q = src.get();
  return std::make_unique<CaptureSession>(std::move(src), std::move(f), o);
}

enum class Op { Start, Stop, Save, SetFilter };

}  // namespace

TEST(Capture, StateMachineMatchesModelForAllShortSequences) {
  const Op ops[] = {Op::Start, Op::Stop, Op::Save, Op::SetFilter};
  std::size_t sequences = 0;
  for (int len = 0; len <= 6; ++len) {
    std::size_t total = 1;
    for (int i = 0; i < len; ++i) total *= 4;
    for (std::size_t code = 0; code < total; ++code) {
      auto s = queue_session({udp_frame(0)}, false);
      SessionState model = SessionState::Idle;
      std::size_t c = code;
      for (int i = 0; i < len; ++i, c /= 4) {
        Op op = ops[c % 4];
        bool ok = true;
        try {
          switch (op) {
            case Op::Start: s->start(); break;
            case Op::Stop: s->stop(); break;
            case Op::Save: {
              std::ostringstream os;
              s->save(os);
              break;
            }
            case Op::SetFilter: s->set_filter(compile_filter("proto == udp")); break;
          }
        } catch (const CaptureError& e) {
          ASSERT_EQ(e.code(), CaptureError::Code::InvalidTransition);
          ok = false;
        }
        bool legal = op == Op::SetFilter || (op == Op::Start && model == SessionState::Idle) ||
                     (op == Op::Stop && model == SessionState::Capturing) ||
                     (op == Op::Save && model == SessionState::Stopped);
        ASSERT_EQ(ok, legal) << "len " << len << " code " << code << " step " << i;
        if (op == Op::Start && legal) model = SessionState::Capturing;
        if (op == Op::Stop && legal) model = SessionState::Stopped;
        ASSERT_EQ(s->state(), model);
      }
      ++sequences;
    }
  }
  EXPECT_EQ(sequences, 5461u);
}

TEST(Capture, FilterAppliedPerFrameAndCountersConserved) {
  std::vector<RawFrame> frames;
  for (int i = 0; i < 40; ++i) frames.push_back(i % 3 == 0 ? arp_frame(i) : udp_frame(i));
  auto s = queue_session(frames, true, compile_filter("proto == udp"));
  s->start();
  ASSERT_TRUE(s->wait_until_stopped(5s));
  auto c = s->counters();
  EXPECT_EQ(c.seen, 40u);
  EXPECT_EQ(c.matched, 26u);
  EXPECT_EQ(c.rejected(), 14u);
  EXPECT_EQ(c.dropped, 0u);
  for (const auto& r : s->snapshot()) EXPECT_TRUE(r.has(Protocol::Udp));
  // indices are capture ordinals, so rejected frames leave holes
  EXPECT_EQ(s->snapshot().front().index, 2u);
}

TEST(Capture, SetFilterTakesEffectAtMarker) {
  QueueSource* q = nullptr;
  std::vector<std::uint64_t> indices;
  auto s = queue_session({}, false, compile_filter("proto == udp"), {}, &q);
  SessionCallbacks cb;
  cb.on_packet = [&](const PacketRecord& r) { indices.push_back(r.index); };
  s->set_callbacks(cb);
  s->start();
  for (int i = 0; i < 10; ++i) q->push(i % 2 ? arp_frame(i) : udp_frame(i));
  ASSERT_TRUE(s->wait_for_seen(10));
  s->set_filter(compile_filter("proto == arp"));
  for (int i = 10; i < 20; ++i) q->push(i % 2 ? arp_frame(i) : udp_frame(i));
  q->finish();
  ASSERT_TRUE(s->wait_until_stopped(5s));
  std::vector<std::uint64_t> want;
  for (std::uint64_t i = 1; i <= 10; i += 2) want.push_back(i);   // udp frames before the marker
  for (std::uint64_t i = 12; i <= 20; i += 2) want.push_back(i);  // arp frames after it
  EXPECT_EQ(indices, want);
}

TEST(Capture, RingEvictionReportsGap) {
  std::vector<RawFrame> frames;
  for (int i = 0; i < 32; ++i) frames.push_back(udp_frame(i));
  CaptureSession::Options o;
  o.ring_capacity = 16;
  auto s = queue_session(frames, true, {}, o);
  s->start();
  ASSERT_TRUE(s->wait_until_stopped(5s));
  EXPECT_EQ(s->counters().dropped, 16u);
  auto d = s->drain(0);
  EXPECT_TRUE(d.gap);
  EXPECT_EQ(d.evicted_through, 16u);
  ASSERT_EQ(d.records.size(), 16u);
  EXPECT_EQ(d.records.front().index, 17u);
  auto tail = s->drain(16, 5);
  EXPECT_FALSE(tail.gap);
  ASSERT_EQ(tail.records.size(), 5u);
  EXPECT_EQ(tail.records.back().index, 21u);
  EXPECT_TRUE(s->drain(32).records.empty());
  // stats still cover the evicted records
  EXPECT_EQ(s->stats().total_packets, 32u);
}

TEST(Capture, CountAndDurationLimits) {
  std::vector<RawFrame> frames;
  for (int i = 0; i < 100; ++i) frames.push_back(i % 2 ? arp_frame(i) : udp_frame(i));
  CaptureSession::Options o;
  o.max_packets = 7;
  auto s = queue_session(frames, false, compile_filter("proto == udp"), o);
  s->start();
  ASSERT_TRUE(s->wait_until_stopped(5s));
  EXPECT_EQ(s->counters().matched, 7u);
  EXPECT_EQ(s->counters().seen, 13u);

  CaptureSession::Options d;
  d.max_duration = 10ms;  // frames are 1 ms apart in capture time
  auto t = queue_session(frames, false, {}, d);
  t->start();
  ASSERT_TRUE(t->wait_until_stopped(5s));
  EXPECT_EQ(t->counters().seen, 10u);
}

TEST(Capture, FileReplayIsDeterministic) {
  std::vector<std::vector<SummaryRow>> runs;
  for (int run = 0; run < 3; ++run) {
    CaptureSession s(std::make_unique<PcapFileSource>(testdata("mixed.pcap")), compile_filter("not proto == arp"));
    s.start();
    ASSERT_TRUE(s.wait_until_stopped(5s));
    std::vector<SummaryRow> rows;
    for (const auto& r : s.snapshot()) rows.push_back(r.summary);
    runs.push_back(rows);
  }
  EXPECT_EQ(runs[0], runs[1]);
  EXPECT_EQ(runs[1], runs[2]);
  EXPECT_FALSE(runs[0].empty());
}

TEST(Capture, SaveWritesMatchedFramesOnly) {
  CaptureSession s(std::make_unique<PcapFileSource>(testdata("corpus.pcap")), compile_filter("proto == tcp"));
  s.start();
  ASSERT_TRUE(s.wait_until_stopped(5s));
  std::ostringstream os(std::ios::binary);
  s.save(os);
  std::istringstream in(os.str(), std::ios::binary);
  auto back = read_pcap(in).frames;
  auto records = s.snapshot();
  ASSERT_EQ(back.size(), records.size());
  ASSERT_EQ(back.size(), s.counters().matched);
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i], records[i].frame);

  std::size_t tcp = 0;
  for (const auto& r : load_records("corpus")) tcp += r.has(Protocol::Tcp);
  EXPECT_EQ(back.size(), tcp);
}

TEST(Capture, MissingFileFailsToStart) {
  CaptureSession s(std::make_unique<PcapFileSource>(testdata("does-not-exist.pcap")));
  try {
    s.start();
    FAIL();
  } catch (const CaptureError& e) {
    EXPECT_EQ(e.code(), CaptureError::Code::OpenFailed);
  }
  EXPECT_EQ(s.state(), SessionState::Idle);
}

TEST(Capture, TruncatedFileKeepsEarlierFramesAndReportsError) {
  auto bytes = slurp(testdata("ping.pcap"));
  auto path = std::filesystem::temp_directory_path() / "sniff-test-truncated.pcap";
  {
    std::ofstream out(path, std::ios::binary);
    out << bytes.substr(0, bytes.size() - 5);
  }
  CaptureSession s(std::make_unique<PcapFileSource>(path));
  s.start();
  ASSERT_TRUE(s.wait_until_stopped(5s));
  EXPECT_EQ(s.counters().seen, load_frames("ping").size() - 1);
  ASSERT_TRUE(s.source_error());
  EXPECT_NE(s.source_error()->find("cut short"), std::string::npos);
  std::filesystem::remove(path);
}

TEST(Capture, PacedStopInterruptsPromptly) {
  CaptureSession s(std::make_unique<PcapFileSource>(testdata("scan.pcap"), 20ms));
  s.start();
  ASSERT_TRUE(s.wait_for_seen(2));
  auto t = std::chrono::steady_clock::now();
  s.stop();
  EXPECT_LT(std::chrono::steady_clock::now() - t, 1s);
  EXPECT_EQ(s.state(), SessionState::Stopped);
  EXPECT_LT(s.counters().seen, 100u);
}

TEST(Capture, StateCallbacksBracketPackets) {
  std::vector<std::string> events;
  std::mutex mu;
  auto s = queue_session({udp_frame(0), udp_frame(1)}, true);
  SessionCallbacks cb;
  cb.on_packet = [&](const PacketRecord& r) {
    std::lock_guard l(mu);
    events.push_back("p" + std::to_string(r.index));
  };
  cb.on_state = [&](SessionState st) {
    std::lock_guard l(mu);
    events.push_back(std::string(to_string(st)));
  };
  s->set_callbacks(cb);
  s->start();
  ASSERT_TRUE(s->wait_until_stopped(5s));
  std::lock_guard l(mu);
  EXPECT_EQ(events, (std::vector<std::string>{"Capturing", "p1", "p2", "Stopped"}));
}

TEST(Capture, SessionTableConcurrentAccess) {
  SessionTable<int> table;
  std::vector<std::jthread> workers;
  for (int w = 0; w < 8; ++w)
    workers.emplace_back([&, w] {
      for (int i = 0; i < 200; ++i) {
        auto id = std::to_string(w) + "-" + std::to_string(i);
        table.insert(id, std::make_shared<int>(i));
        EXPECT_EQ(*table.find(id), i);
        if (i % 2) EXPECT_TRUE(table.erase(id));
      }
    });
  workers.clear();
  EXPECT_EQ(table.size(), 800u);
  EXPECT_FALSE(table.find("nope"));
  EXPECT_FALSE(table.erase("nope"));
}
