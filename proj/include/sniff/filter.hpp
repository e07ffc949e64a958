#pragma once

// Display/capture filter language.
//
//   expr       := or
//   or         := and ("or" and)*
//   and        := unary ("and" unary)*
//   unary      := "not" unary | "(" expr ")" | "true" | comparison
//   comparison := field ("==" | "!=") value
//
// Fields: ip.src ip.dst ip.addr mac.src mac.dst mac.addr proto port port.src
// port.dst. Keywords, field names and protocol names are case-insensitive.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sniff/addr.hpp"
#include "sniff/dissect.hpp"

namespace sniff {

enum class Field { IpSrc, IpDst, IpAddr, MacSrc, MacDst, MacAddr, Proto, Port, PortSrc, PortDst };
enum class CompareOp { Eq, Ne };

constexpr std::string_view field_name(Field f) noexcept {
  switch (f) {
    case Field::IpSrc: return "ip.src";
    case Field::IpDst: return "ip.dst";
    case Field::IpAddr: return "ip.addr";
    case Field::MacSrc: return "mac.src";
    case Field::MacDst: return "mac.dst";
    case Field::MacAddr: return "mac.addr";
    case Field::Proto: return "proto";
    case Field::Port: return "port";
    case Field::PortSrc: return "port.src";
    case Field::PortDst: return "port.dst";
  }
  return "?";
}

inline constexpr std::array<Field, 10> all_fields{Field::IpSrc,  Field::IpDst, Field::IpAddr, Field::MacSrc,
                                                  Field::MacDst, Field::MacAddr, Field::Proto, Field::Port,
                                                  Field::PortSrc, Field::PortDst};

using FilterValue = std::variant<Ipv4Prefix, MacAddr, Protocol, std::uint16_t>;

struct Comparison {
  Field field = Field::Proto;
  CompareOp op = CompareOp::Eq;
  FilterValue value;

  friend bool operator==(const Comparison&, const Comparison&) = default;
};

/// Immutable predicate tree. Copies share children.
class FilterExpr {
 public:
  enum class Kind { MatchAll, Compare, And, Or, Not };

  FilterExpr() = default;  // MatchAll

  static FilterExpr match_all() { return {}; }
  static FilterExpr compare(Comparison c) {
    FilterExpr e;
    e.kind_ = Kind::Compare;
    e.cmp_ = std::move(c);
    return e;
  }
  static FilterExpr conj(FilterExpr l, FilterExpr r) { return binary(Kind::And, std::move(l), std::move(r)); }
  static FilterExpr disj(FilterExpr l, FilterExpr r) { return binary(Kind::Or, std::move(l), std::move(r)); }
  static FilterExpr negate(FilterExpr e) {
    FilterExpr out;
    out.kind_ = Kind::Not;
    out.lhs_ = std::make_shared<const FilterExpr>(std::move(e));
    return out;
  }

  Kind kind() const noexcept { return kind_; }
  const Comparison& comparison() const noexcept { return cmp_; }
  const FilterExpr& left() const noexcept { return *lhs_; }
  const FilterExpr& right() const noexcept { return *rhs_; }
  const FilterExpr& operand() const noexcept { return *lhs_; }

  friend bool operator==(const FilterExpr& a, const FilterExpr& b) {
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
      case Kind::MatchAll: return true;
      case Kind::Compare: return a.cmp_ == b.cmp_;
      case Kind::Not: return a.operand() == b.operand();
      case Kind::And:
      case Kind::Or: return a.left() == b.left() && a.right() == b.right();
    }
    return false;
  }

 private:
  static FilterExpr binary(Kind k, FilterExpr l, FilterExpr r) {
    FilterExpr out;
    out.kind_ = k;
    out.lhs_ = std::make_shared<const FilterExpr>(std::move(l));
    out.rhs_ = std::make_shared<const FilterExpr>(std::move(r));
    return out;
  }

  Kind kind_ = Kind::MatchAll;
  Comparison cmp_;
  std::shared_ptr<const FilterExpr> lhs_;
  std::shared_ptr<const FilterExpr> rhs_;
};

class FilterError : public std::runtime_error {
 public:
  enum class Kind { Parse, Type };

  FilterError(Kind kind, std::size_t offset, std::string message, std::vector<std::string> expected = {})
      : std::runtime_error(std::move(message)), kind_(kind), offset_(offset), expected_(std::move(expected)) {}

  Kind kind() const noexcept { return kind_; }
  /// Byte offset into the filter text of the offending token.
  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  Kind kind_;
  std::size_t offset_;
  std::vector<std::string> expected_;
};

struct FilterToken {
  enum class Kind { Word, Eq, Ne, LParen, RParen, End };
  Kind kind = Kind::End;
  std::string_view text;
  std::size_t offset = 0;
};

/// Filter text with the byte offset of every token.
struct FilterSource {
  std::string text;
  std::vector<FilterToken> tokens;  // views into `text`; last is End
};

namespace detail {

inline bool is_word_char(char c) noexcept {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == ':' || c == '/' || c == '-' || c == '_';
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

inline std::vector<FilterToken> tokenize(std::string_view text) {
  std::vector<FilterToken> out;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(' || c == ')') {
      out.push_back({c == '(' ? FilterToken::Kind::LParen : FilterToken::Kind::RParen, text.substr(i, 1), i});
      ++i;
    } else if ((c == '=' || c == '!') && i + 1 < text.size() && text[i + 1] == '=') {
      out.push_back({c == '=' ? FilterToken::Kind::Eq : FilterToken::Kind::Ne, text.substr(i, 2), i});
      i += 2;
    } else if (is_word_char(c)) {
      auto start = i;
      while (i < text.size() && is_word_char(text[i])) ++i;
      out.push_back({FilterToken::Kind::Word, text.substr(start, i - start), start});
    } else {
      throw FilterError(FilterError::Kind::Parse, i, "unexpected character '" + std::string(1, c) + "'",
                        {"field", "'('", "'not'"});
    }
  }
  out.push_back({FilterToken::Kind::End, {}, text.size()});
  return out;
}

inline std::optional<Field> parse_field(std::string_view word) {
  auto w = lower(word);
  for (auto f : all_fields)
    if (field_name(f) == w) return f;
  return std::nullopt;
}

inline std::optional<Protocol> parse_protocol(std::string_view word) {
  auto w = lower(word);
  if (w == "ip") return Protocol::Ipv4;
  for (auto p : all_protocols)
    if (filter_name(p) == w) return p;
  return std::nullopt;
}

class Parser {
 public:
  explicit Parser(const std::vector<FilterToken>& tokens) : toks_(tokens) {}

  FilterExpr parse() {
    if (peek().kind == FilterToken::Kind::End) return FilterExpr::match_all();
    auto e = parse_or();
    if (peek().kind != FilterToken::Kind::End) fail({"'and'", "'or'", "end of expression"});
    return e;
  }

 private:
  const FilterToken& peek() const { return toks_[pos_]; }
  const FilterToken& take() { return toks_[pos_++]; }

  bool at_keyword(std::string_view kw) const {
    return peek().kind == FilterToken::Kind::Word && lower(peek().text) == kw;
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const auto& t = peek();
    std::string found = t.kind == FilterToken::Kind::End ? "end of expression" : "'" + std::string(t.text) + "'";
    std::string msg = "expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) msg += (i ? " or " : "") + expected[i];
    msg += ", found " + found + " at offset " + std::to_string(t.offset);
    throw FilterError(FilterError::Kind::Parse, t.offset, std::move(msg), std::move(expected));
  }

  FilterExpr parse_or() {
    auto e = parse_and();
    while (at_keyword("or")) {
      take();
      e = FilterExpr::disj(std::move(e), parse_and());
    }
    return e;
  }

  FilterExpr parse_and() {
    auto e = parse_unary();
    while (at_keyword("and")) {
      take();
      e = FilterExpr::conj(std::move(e), parse_unary());
    }
    return e;
  }

  FilterExpr parse_unary() {
    if (at_keyword("not")) {
      take();
      return FilterExpr::negate(parse_unary());
    }
    if (at_keyword("true")) {
      take();
      return FilterExpr::match_all();
    }
    if (peek().kind == FilterToken::Kind::LParen) {
      take();
      auto e = parse_or();
      if (peek().kind != FilterToken::Kind::RParen) fail({"')'", "'and'", "'or'"});
      take();
      return e;
    }
    return parse_comparison();
  }

  FilterExpr parse_comparison() {
    if (peek().kind != FilterToken::Kind::Word) fail({"field", "'('", "'not'"});
    auto field = parse_field(peek().text);
    if (!field) fail({"field"});
    take();
    CompareOp op;
    if (peek().kind == FilterToken::Kind::Eq) op = CompareOp::Eq;
    else if (peek().kind == FilterToken::Kind::Ne) op = CompareOp::Ne;
    else fail({"'=='", "'!='"});
    take();
    if (peek().kind != FilterToken::Kind::Word) fail({"value"});
    const auto& tok = take();
    return FilterExpr::compare({*field, op, parse_value(*field, tok)});
  }

  static FilterValue parse_value(Field field, const FilterToken& tok) {
    auto type_error = [&](std::string_view what) -> FilterError {
      return FilterError(FilterError::Kind::Type, tok.offset,
                         "'" + std::string(tok.text) + "' is not " + std::string(what) + " (for " +
                             std::string(field_name(field)) + ") at offset " + std::to_string(tok.offset));
    };
    switch (field) {
      case Field::IpSrc:
      case Field::IpDst:
      case Field::IpAddr:
        if (auto p = Ipv4Prefix::parse(tok.text)) return *p;
        throw type_error("an IPv4 address or prefix");
      case Field::MacSrc:
      case Field::MacDst:
      case Field::MacAddr:
        if (auto m = MacAddr::parse(tok.text)) return *m;
        throw type_error("a MAC address");
      case Field::Proto:
        if (auto p = parse_protocol(tok.text)) return *p;
        throw type_error("a protocol name");
      case Field::Port:
      case Field::PortSrc:
      case Field::PortDst: {
        unsigned long v = 0;
        auto* b = tok.text.data();
        auto* e = b + tok.text.size();
        auto [p, ec] = std::from_chars(b, e, v);
        if (ec == std::errc{} && p == e && v <= 65535) return static_cast<std::uint16_t>(v);
        throw type_error("a port number (0-65535)");
      }
    }
    throw type_error("a value");
  }

  const std::vector<FilterToken>& toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline FilterSource tokenize_filter(std::string text) {
  FilterSource src{std::move(text), {}};
  src.tokens = detail::tokenize(src.text);
  return src;
}

/// Compiles filter text. Empty or blank text yields MatchAll.
inline FilterExpr compile_filter(std::string_view text) {
  auto tokens = detail::tokenize(text);
  return detail::Parser(tokens).parse();
}

namespace detail {

inline bool compare_ports(const PacketRecord& p, Field field, std::uint16_t port, bool& exists) {
  std::uint16_t sp = 0, dp = 0;
  if (auto* t = p.find<TcpHeader>()) {
    sp = t->src_port;
    dp = t->dst_port;
  } else if (auto* u = p.find<UdpHeader>()) {
    sp = u->src_port;
    dp = u->dst_port;
  } else {
    exists = false;
    return false;
  }
  exists = true;
  switch (field) {
    case Field::PortSrc: return sp == port;
    case Field::PortDst: return dp == port;
    default: return sp == port || dp == port;
  }
}

/// Whether the field is present and, if so, whether it equals the value.
inline bool field_matches(const Comparison& c, const PacketRecord& p, bool& exists) {
  switch (c.field) {
    case Field::IpSrc:
    case Field::IpDst:
    case Field::IpAddr: {
      auto* ip = p.find<Ipv4Header>();
      exists = ip != nullptr;
      if (!exists) return false;
      const auto& prefix = std::get<Ipv4Prefix>(c.value);
      if (c.field == Field::IpSrc) return prefix.contains(ip->src);
      if (c.field == Field::IpDst) return prefix.contains(ip->dst);
      return prefix.contains(ip->src) || prefix.contains(ip->dst);
    }
    case Field::MacSrc:
    case Field::MacDst:
    case Field::MacAddr: {
      auto* eth = p.find<EthernetHeader>();
      exists = eth != nullptr;
      if (!exists) return false;
      const auto& mac = std::get<MacAddr>(c.value);
      if (c.field == Field::MacSrc) return eth->src == mac;
      if (c.field == Field::MacDst) return eth->dst == mac;
      return eth->src == mac || eth->dst == mac;
    }
    case Field::Proto:
      exists = !p.layers.empty();
      return p.has(std::get<Protocol>(c.value));
    case Field::Port:
    case Field::PortSrc:
    case Field::PortDst: return compare_ports(p, c.field, std::get<std::uint16_t>(c.value), exists);
  }
  exists = false;
  return false;
}

}  // namespace detail

/// `==` holds when the field exists and matches; `!=` when the field exists
/// and does not match. On packets without the field both are false.
inline bool eval_filter(const FilterExpr& f, const PacketRecord& p) {
  switch (f.kind()) {
    case FilterExpr::Kind::MatchAll: return true;
    case FilterExpr::Kind::And: return eval_filter(f.left(), p) && eval_filter(f.right(), p);
    case FilterExpr::Kind::Or: return eval_filter(f.left(), p) || eval_filter(f.right(), p);
    case FilterExpr::Kind::Not: return !eval_filter(f.operand(), p);
    case FilterExpr::Kind::Compare: {
      bool exists = false;
      bool match = detail::field_matches(f.comparison(), p, exists);
      if (!exists) return false;
      return f.comparison().op == CompareOp::Eq ? match : !match;
    }
  }
  return false;
}

inline std::string to_string(const FilterValue& v) {
  struct {
    std::string operator()(const Ipv4Prefix& p) const { return p.to_string(); }
    std::string operator()(const MacAddr& m) const { return m.to_string(); }
    std::string operator()(Protocol p) const { return std::string(filter_name(p)); }
    std::string operator()(std::uint16_t port) const { return std::to_string(port); }
  } visitor;
  return std::visit(visitor, v);
}

/// Canonical text. compile_filter(print_filter(f)) == f.
inline std::string print_filter(const FilterExpr& f) {
  using K = FilterExpr::Kind;
  auto child = [](const FilterExpr& e) {
    auto s = print_filter(e);
    return (e.kind() == K::And || e.kind() == K::Or) ? "(" + s + ")" : s;
  };
  switch (f.kind()) {
    case K::MatchAll: return "true";
    case K::Compare: {
      const auto& c = f.comparison();
      return std::string(field_name(c.field)) + (c.op == CompareOp::Eq ? " == " : " != ") + to_string(c.value);
    }
    case K::Not: return "not " + child(f.operand());
    case K::And: {
      // Left-associative chains print without parentheses on the left.
      auto l = f.left().kind() == K::And ? print_filter(f.left()) : child(f.left());
      return l + " and " + child(f.right());
    }
    case K::Or: {
      auto l = f.left().kind() == K::Or ? print_filter(f.left()) : child(f.left());
      return l + " or " + child(f.right());
    }
  }
  return {};
}

/// Text for storage and display: MatchAll at the top prints as "".
inline std::string filter_text(const FilterExpr& f) {
  return f.kind() == FilterExpr::Kind::MatchAll ? std::string{} : print_filter(f);
}

enum class FilterMode { None, IpBased, MacBased, ArpBased, Mixed };

constexpr std::string_view to_string(FilterMode m) noexcept {
  switch (m) {
    case FilterMode::None: return "none";
    case FilterMode::IpBased: return "ip-based";
    case FilterMode::MacBased: return "mac-based";
    case FilterMode::ArpBased: return "arp-based";
    case FilterMode::Mixed: return "mixed";
  }
  return "none";
}

/// Which sniffing method an expression embodies, by the field families it
/// references: ip.* (IP-based), mac.* (MAC-based), proto == arp (ARP-based).
/// Ports and other protocols belong to no method.
inline FilterMode filter_mode(const FilterExpr& f) {
  bool ip = false, mac = false, arp = false;
  auto walk = [&](auto&& self, const FilterExpr& e) -> void {
    switch (e.kind()) {
      case FilterExpr::Kind::MatchAll: return;
      case FilterExpr::Kind::Not: self(self, e.operand()); return;
      case FilterExpr::Kind::And:
      case FilterExpr::Kind::Or:
        self(self, e.left());
        self(self, e.right());
        return;
      case FilterExpr::Kind::Compare: {
        const auto& c = e.comparison();
        switch (c.field) {
          case Field::IpSrc:
          case Field::IpDst:
          case Field::IpAddr: ip = true; break;
          case Field::MacSrc:
          case Field::MacDst:
          case Field::MacAddr: mac = true; break;
          case Field::Proto:
            if (std::get<Protocol>(c.value) == Protocol::Arp) arp = true;
            break;
          default: break;
        }
        return;
      }
    }
  };
  walk(walk, f);
  int n = int{ip} + int{mac} + int{arp};
  if (n == 0) return FilterMode::None;
  if (n > 1) return FilterMode::Mixed;
  return ip ? FilterMode::IpBased : mac ? FilterMode::MacBased : FilterMode::ArpBased;
}

}  // namespace sniff
