#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sniff/filter.hpp"
#include "support.hpp"

using namespace sniff;
using namespace testsupport;

namespace {

struct Corpus {
  std::vector<PacketRecord> records;
  std::vector<oracle::RefPacket> refs;
  oracle::ValuePools pools;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    Corpus c;
    c.records = load_records("corpus");
    std::set<std::string> ips, macs, ports;
    for (const auto& f : load_reference_fields("corpus")) {
      c.refs.push_back(oracle::ref_packet(f));
      const auto& p = c.refs.back();
      if (p.ip_src) {
        ips.insert(oracle::ip_text(*p.ip_src));
        ips.insert(oracle::ip_text(*p.ip_dst));
      }
      if (p.mac_src) {
        macs.insert(*p.mac_src);
        macs.insert(*p.mac_dst);
      }
      if (p.sport) {
        ports.insert(std::to_string(*p.sport));
        ports.insert(std::to_string(*p.dport));
      }
    }
    ips.insert("192.168.7.7");
    macs.insert("02:00:00:00:00:09");
    ports.insert("65535");
    c.pools = {{ips.begin(), ips.end()}, {macs.begin(), macs.end()}, {ports.begin(), ports.end()}};
    // mixed case and dash-separated MACs are valid spellings
    for (std::size_t i = 0; i < c.pools.macs.size(); i += 3) {
      auto m = c.pools.macs[i];
      std::replace(m.begin(), m.end(), ':', '-');
      for (auto& ch : m) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      c.pools.macs.push_back(m);
    }
    return c;
  }();
  return c;
}

FilterError error_of(std::string_view text) {
  try {
    compile_filter(text);
  } catch (const FilterError& e) {
    return e;
  }
  ADD_FAILURE() << "accepted: " << text;
  return FilterError(FilterError::Kind::Parse, 0, "");
}

}  // namespace

TEST(Filter, CorpusHasEnoughPackets) { ASSERT_GE(corpus().records.size(), 200u); }

TEST(Filter, RandomExpressionsAgreeWithReferenceEvaluator) {
  const auto& c = corpus();
  ASSERT_EQ(c.records.size(), c.refs.size());
  auto rng = rng_for(31);
  std::size_t nontrivial = 0;
  for (int i = 0; i < 600; ++i) {
    auto e = oracle::random_expr(rng, c.pools, 1 + i % 5);
    auto text = oracle::render(e, rng);
    auto f = compile_filter(text);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < c.records.size(); ++k) {
      bool want = oracle::ref_eval(e, c.refs[k]);
      ASSERT_EQ(eval_filter(f, c.records[k]), want) << text << " on frame " << k + 1;
      hits += want;
    }
    nontrivial += hits > 0 && hits < c.records.size();
  }
  EXPECT_GT(nontrivial, 200u);
}

TEST(Filter, CanonicalPrintRoundTrips) {
  const auto& c = corpus();
  auto rng = rng_for(32);
  for (int i = 0; i < 1000; ++i) {
    auto f = compile_filter(oracle::render(oracle::random_expr(rng, c.pools, 4), rng));
    auto printed = print_filter(f);
    ASSERT_EQ(compile_filter(printed), f) << printed;
    ASSERT_EQ(print_filter(compile_filter(printed)), printed);
  }
}

TEST(Filter, DeMorganAndDoubleNegation) {
  const auto& c = corpus();
  auto rng = rng_for(33);
  for (int i = 0; i < 200; ++i) {
    auto a = compile_filter(oracle::render(oracle::random_expr(rng, c.pools, 2), rng));
    auto b = compile_filter(oracle::render(oracle::random_expr(rng, c.pools, 2), rng));
    auto lhs = FilterExpr::negate(FilterExpr::conj(a, b));
    auto rhs = FilterExpr::disj(FilterExpr::negate(a), FilterExpr::negate(b));
    auto lhs2 = FilterExpr::negate(FilterExpr::disj(a, b));
    auto rhs2 = FilterExpr::conj(FilterExpr::negate(a), FilterExpr::negate(b));
    auto nn = FilterExpr::negate(FilterExpr::negate(a));
    for (const auto& r : c.records) {
      ASSERT_EQ(eval_filter(lhs, r), eval_filter(rhs, r));
      ASSERT_EQ(eval_filter(lhs2, r), eval_filter(rhs2, r));
      ASSERT_EQ(eval_filter(nn, r), eval_filter(a, r));
    }
  }
}

TEST(Filter, PrecedenceAndCase) {
  auto f = compile_filter("proto == tcp or proto == udp and port == 53");
  ASSERT_EQ(f.kind(), FilterExpr::Kind::Or);
  EXPECT_EQ(f.right().kind(), FilterExpr::Kind::And);
  EXPECT_EQ(compile_filter("NOT Proto == ARP"), compile_filter("not proto == arp"));
  EXPECT_EQ(compile_filter("proto==ip"), compile_filter("proto == ipv4"));
  EXPECT_EQ(compile_filter("   "), FilterExpr::match_all());
}

TEST(Filter, NotBindsTighterThanAnd) {
  auto f = compile_filter("not proto == arp and proto == ethernet");
  ASSERT_EQ(f.kind(), FilterExpr::Kind::And);
  EXPECT_EQ(f.left().kind(), FilterExpr::Kind::Not);
}

TEST(Filter, MissingFieldsAreFalseForBothOperators) {
  auto rec = dissect(frame_at(ether(mac_of(1), mac_of(2), ethertype::arp,
                                    arp(ArpPacket::request, mac_of(1), ip_of(1), MacAddr{}, ip_of(2))), 0),
                     1, {});
  EXPECT_FALSE(eval_filter(compile_filter("port == 80"), rec));
  EXPECT_FALSE(eval_filter(compile_filter("port != 80"), rec));
  EXPECT_FALSE(eval_filter(compile_filter("ip.src == 10.0.0.0/8"), rec));
  EXPECT_FALSE(eval_filter(compile_filter("ip.src != 10.0.0.0/8"), rec));
  EXPECT_TRUE(eval_filter(compile_filter("not port == 80"), rec));
  EXPECT_TRUE(eval_filter(compile_filter("proto == arp and mac.src == 00:1b:21:0a:32:01"), rec));
}

TEST(Filter, ErrorsCarryOffsetsAndExpectations) {
  auto e = error_of("proto == tcp and");
  EXPECT_EQ(e.kind(), FilterError::Kind::Parse);
  EXPECT_EQ(e.offset(), 16u);

  e = error_of("ip.src == 300.1.1.1");
  EXPECT_EQ(e.kind(), FilterError::Kind::Type);
  EXPECT_EQ(e.offset(), 10u);

  e = error_of("port == 70000");
  EXPECT_EQ(e.kind(), FilterError::Kind::Type);
  EXPECT_EQ(e.offset(), 8u);

  e = error_of("proto == gopher");
  EXPECT_EQ(e.kind(), FilterError::Kind::Type);

  e = error_of("mac.src == 00:11:22");
  EXPECT_EQ(e.kind(), FilterError::Kind::Type);

  e = error_of("(proto == tcp");
  EXPECT_EQ(e.offset(), 13u);
  EXPECT_FALSE(e.expected().empty());

  e = error_of("colour == red");
  EXPECT_EQ(e.offset(), 0u);

  e = error_of("proto = tcp");
  EXPECT_EQ(e.offset(), 6u);

  e = error_of("proto == tcp proto == udp");
  EXPECT_EQ(e.offset(), 13u);

  e = error_of("ip.src == 10.0.0.0/33");
  EXPECT_EQ(e.kind(), FilterError::Kind::Type);

  e = error_of("port == 80 $");
  EXPECT_EQ(e.offset(), 11u);
}

TEST(Filter, PrefixMatchingUsesNetworkBits) {
  auto rec = dissect(frame_at(ether(mac_of(1), mac_of(2), ethertype::ipv4, udp(ip_of(77), ip_of(2), 1, 2)), 0), 1, {});
  EXPECT_TRUE(eval_filter(compile_filter("ip.src == 10.10.50.64/26"), rec));
  EXPECT_FALSE(eval_filter(compile_filter("ip.src == 10.10.50.0/26"), rec));
  EXPECT_TRUE(eval_filter(compile_filter("ip.addr == 10.10.50.2"), rec));
  EXPECT_TRUE(eval_filter(compile_filter("ip.dst == 0.0.0.0/0"), rec));
}

TEST(Filter, ModeClassification) {
  EXPECT_EQ(filter_mode(compile_filter("")), FilterMode::None);
  EXPECT_EQ(filter_mode(compile_filter("port == 80")), FilterMode::None);
  EXPECT_EQ(filter_mode(compile_filter("ip.addr == 10.0.0.1")), FilterMode::IpBased);
  EXPECT_EQ(filter_mode(compile_filter("not mac.src == 00:00:00:00:00:01")), FilterMode::MacBased);
  EXPECT_EQ(filter_mode(compile_filter("proto == arp")), FilterMode::ArpBased);
  EXPECT_EQ(filter_mode(compile_filter("proto == arp or ip.src == 1.2.3.4")), FilterMode::Mixed);
  EXPECT_EQ(to_string(FilterMode::IpBased), "ip-based");
}
