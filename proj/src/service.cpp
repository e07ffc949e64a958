#include "sniff/service.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "sniff/capture.hpp"
#include "sniff/document.hpp"
#include "sniff/filter.hpp"
#include "sniff/live.hpp"
#include "sniff/report.hpp"

namespace sniff {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

constexpr auto close_unknown_session = static_cast<websocket::close_code>(4404);
constexpr auto close_session_deleted = static_cast<websocket::close_code>(4410);

Timestamp system_now() {
  auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch());
  return Timestamp::from_ns(ns.count());
}

/// Sequenced, bounded event history of one session. Every subscriber reads
/// it through its own cursor.
class EventLog {
 public:
  explicit EventLog(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

  std::uint64_t append(Json event) {
    std::lock_guard lock(mu_);
    auto seq = next_seq_++;
    event["seq"] = seq;
    events_.push_back(event.dump());
    if (events_.size() > capacity_) {
      events_.pop_front();
      ++floor_;
    }
    return seq;
  }

  struct Batch {
    std::vector<std::string> events;
    std::optional<std::pair<std::uint64_t, std::uint64_t>> gap;  // evicted seq range
    std::uint64_t cursor = 0;                                     // last seq covered
  };

  Batch read(std::uint64_t since, std::size_t max) const {
    std::lock_guard lock(mu_);
    Batch b;
    b.cursor = since;
    if (since + 1 < floor_) {
      b.gap = std::pair{since + 1, floor_ - 1};
      b.cursor = floor_ - 1;
    }
    for (auto seq = b.cursor + 1; seq < next_seq_ && b.events.size() < max; ++seq) {
      b.events.push_back(events_[seq - floor_]);
      b.cursor = seq;
    }
    return b;
  }

  std::uint64_t last_seq() const {
    std::lock_guard lock(mu_);
    return next_seq_ - 1;
  }

 private:
  mutable std::mutex mu_;
  std::deque<std::string> events_;
  std::uint64_t floor_ = 1;  // seq of events_.front()
  std::uint64_t next_seq_ = 1;
  std::size_t capacity_;
};

struct ApiSession {
  ApiSession(std::size_t log_capacity, Timestamp created) : log(log_capacity), created_at(created) {}

  EventLog log;
  Timestamp created_at;
  std::mutex command_mu;
  std::atomic<bool> deleted{false};
  std::shared_ptr<CaptureSession> core;  // last: its producer thread writes to `log`
};

struct Reply {
  http::status status = http::status::ok;
  std::optional<Json> body;
};

Reply error_reply(http::status status, std::string error, std::string detail,
                  std::optional<std::size_t> offset = std::nullopt) {
  Json body = {{"error", std::move(error)}, {"detail", std::move(detail)}};
  if (offset) body["offset"] = *offset;
  return {status, body};
}

Reply filter_error_reply(const FilterError& e) {
  auto r = error_reply(http::status::bad_request, "bad_filter", e.what(), e.offset());
  (*r.body)["expected"] = e.expected();
  return r;
}

std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      auto hex = std::string(s.substr(i + 1, 2));
      char* end = nullptr;
      long v = std::strtol(hex.c_str(), &end, 16);
      if (end == hex.c_str() + 2) {
        out.push_back(static_cast<char>(v));
        i += 2;
        continue;
      }
    }
    out.push_back(s[i] == '+' ? ' ' : s[i]);
  }
  return out;
}

struct Target {
  std::vector<std::string> segments;
  std::map<std::string, std::string> query;
};

Target parse_target(std::string_view target) {
  Target t;
  auto q = target.find('?');
  auto path = target.substr(0, q);
  std::size_t pos = 0;
  while (pos < path.size()) {
    auto slash = path.find('/', pos);
    auto seg = path.substr(pos, slash == std::string_view::npos ? std::string_view::npos : slash - pos);
    if (!seg.empty()) t.segments.push_back(percent_decode(seg));
    if (slash == std::string_view::npos) break;
    pos = slash + 1;
  }
  if (q != std::string_view::npos) {
    auto qs = target.substr(q + 1);
    pos = 0;
    while (pos <= qs.size()) {
      auto amp = qs.find('&', pos);
      auto kv = qs.substr(pos, amp == std::string_view::npos ? std::string_view::npos : amp - pos);
      auto eq = kv.find('=');
      if (!kv.empty()) {
        if (eq == std::string_view::npos)
          t.query[percent_decode(kv)] = "";
        else
          t.query[percent_decode(kv.substr(0, eq))] = percent_decode(kv.substr(eq + 1));
      }
      if (amp == std::string_view::npos) break;
      pos = amp + 1;
    }
  }
  return t;
}

std::optional<std::uint64_t> parse_u64(const std::string& s) {
  if (s.empty() || s.size() > 20) return std::nullopt;
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    auto next = v * 10 + static_cast<std::uint64_t>(c - '0');
    if (next / 10 != v) return std::nullopt;
    v = next;
  }
  return v;
}

}  // namespace

bool is_loopback_address(const std::string& address) {
  if (address == "localhost") return true;
  boost::system::error_code ec;
  auto a = net::ip::make_address(address, ec);
  return !ec && a.is_loopback();
}

struct MonitorService::Impl {
  explicit Impl(ServiceOptions o) : opts(std::move(o)), ioc(static_cast<int>(std::max<std::size_t>(opts.io_threads, 1))) {
    if (!opts.clock) opts.clock = system_now;
    if (!opts.enumerate) opts.enumerate = fixture_or_system_interfaces;
  }

  ServiceOptions opts;
  net::io_context ioc;
  std::optional<tcp::acceptor> acceptor;
  std::vector<std::thread> threads;
  std::uint16_t bound_port = 0;
  SessionTable<ApiSession> sessions;

  std::mutex run_mu;
  std::condition_variable run_cv;
  bool running = false;

  // ------------------------------------------------------------- sessions

  bool authorized(std::string_view header, const Target& t) const {
    if (!opts.token) return true;
    if (header == "Bearer " + *opts.token) return true;
    auto it = t.query.find("token");
    return it != t.query.end() && it->second == *opts.token;
  }

  Json session_document(const ApiSession& s) const {
    auto err = s.core->source_error();
    return {{"id", s.core->id()},
            {"source", s.core->source_description()},
            {"state", to_string(s.core->state())},
            {"filter", filter_text(s.core->filter())},
            {"counters", to_document(s.core->counters())},
            {"created_at", format_utc(s.created_at)},
            {"error", err ? Json(*err) : Json()}};
  }

  void wire_callbacks(const std::shared_ptr<ApiSession>& s) {
    auto* api = s.get();
    auto detectors = opts.detectors;
    SessionCallbacks cb;
    cb.on_packet = [api](const PacketRecord& r) {
      api->log.append({{"type", "packet"}, {"record", to_document(r)}});
    };
    cb.on_filter = [api](const FilterExpr& f) { api->log.append({{"type", "filter"}, {"filter", filter_text(f)}}); };
    cb.on_state = [api, detectors](SessionState st) {
      const auto& core = *api->core;
      if (st == SessionState::Stopped) {
        api->log.append({{"type", "stats"}, {"stats", to_document(core.stats())}});
        for (const auto& a : run_detectors(core.snapshot(), detectors))
          api->log.append({{"type", "alert"}, {"alert", to_document(a)}});
      }
      auto err = core.source_error();
      api->log.append({{"type", "state"},
                       {"state", to_string(st)},
                       {"counters", to_document(core.counters())},
                       {"error", err ? Json(*err) : Json()}});
    };
    s->core->set_callbacks(std::move(cb));
  }

  Reply create_session(const std::string& body) {
    Json req;
    try {
      req = body.empty() ? Json::object() : Json::parse(body);
    } catch (const Json::parse_error& e) {
      return error_reply(http::status::bad_request, "bad_request", e.what());
    }
    if (!req.is_object()) return error_reply(http::status::bad_request, "bad_request", "body must be an object");

    FilterExpr filter;
    try {
      filter = compile_filter(req.value("filter", std::string{}));
    } catch (const FilterError& e) {
      return filter_error_reply(e);
    } catch (const Json::exception& e) {
      return error_reply(http::status::bad_request, "bad_request", e.what());
    }

    std::unique_ptr<CaptureSource> source;
    try {
      Json src = req.value("source", Json());
      if (src.is_string()) {
        auto text = src.get<std::string>();
        if (text.rfind("file:", 0) == 0)
          src = {{"kind", "file"}, {"path", text.substr(5)}};
        else if (text.rfind("live:", 0) == 0)
          src = {{"kind", "live"}, {"interface", text.substr(5)}};
        else
          return error_reply(http::status::bad_request, "bad_source", "source must start with file: or live:");
      }
      if (!src.is_object()) return error_reply(http::status::bad_request, "bad_source", "missing source");
      auto kind = src.value("kind", std::string{});
      if (kind == "file") {
        auto path = src.at("path").get<std::string>();
        if (!std::ifstream(path, std::ios::binary))
          return error_reply(http::status::bad_request, "bad_source", "cannot read " + path);
        source = std::make_unique<PcapFileSource>(path, std::chrono::microseconds(src.value("pace_us", 0)));
      } else if (kind == "live") {
        LiveOptions lo;
        lo.interface = src.at("interface").get<std::string>();
        lo.promiscuous = src.value("promiscuous", true);
        lo.snaplen = src.value("snaplen", lo.snaplen);
        auto ifaces = list_interfaces(opts.enumerate);
        if (std::none_of(ifaces.begin(), ifaces.end(), [&](const auto& i) { return i.name == lo.interface; }))
          return error_reply(http::status::bad_request, "bad_source", "unknown interface " + lo.interface);
        source = std::make_unique<LiveSource>(lo);
      } else {
        return error_reply(http::status::bad_request, "bad_source", "source kind must be file or live");
      }
    } catch (const CaptureError& e) {
      if (e.code() == CaptureError::Code::PermissionDenied)
        return error_reply(http::status::forbidden, "permission_denied", e.what());
      return error_reply(http::status::bad_request, "bad_source", e.what());
    } catch (const Json::exception& e) {
      return error_reply(http::status::bad_request, "bad_request", e.what());
    }

    CaptureSession::Options so;
    try {
      so.ring_capacity = req.value("ring_capacity", opts.default_ring_capacity);
      so.max_packets = req.value("max_packets", std::uint64_t{0});
      so.max_duration = std::chrono::nanoseconds(
          static_cast<std::int64_t>(std::llround(req.value("max_duration_secs", 0.0) * 1e9)));
    } catch (const Json::exception& e) {
      return error_reply(http::status::bad_request, "bad_request", e.what());
    }

    auto api = std::make_shared<ApiSession>(opts.event_log_capacity, opts.clock());
    api->core = std::make_shared<CaptureSession>(std::move(source), std::move(filter), so);
    wire_callbacks(api);
    sessions.insert(api->core->id(), api);
    return {http::status::created, session_document(*api)};
  }

  Reply transition(ApiSession& s, bool start) {
    std::lock_guard lock(s.command_mu);
    try {
      if (start)
        s.core->start();
      else
        s.core->stop();
    } catch (const CaptureError& e) {
      switch (e.code()) {
        case CaptureError::Code::InvalidTransition:
          return error_reply(http::status::conflict, "invalid_transition", e.what());
        case CaptureError::Code::PermissionDenied:
          return error_reply(http::status::forbidden, "permission_denied", e.what());
        default:
          return error_reply(http::status::internal_server_error, "open_failed", e.what());
      }
    }
    return {http::status::ok, session_document(s)};
  }

  Reply put_filter(ApiSession& s, const std::string& body) {
    std::string text;
    try {
      auto req = Json::parse(body);
      text = req.at("filter").get<std::string>();
    } catch (const Json::exception& e) {
      return error_reply(http::status::bad_request, "bad_request", e.what());
    }
    try {
      auto f = compile_filter(text);
      std::lock_guard lock(s.command_mu);
      s.core->set_filter(std::move(f));
    } catch (const FilterError& e) {
      return filter_error_reply(e);
    }
    return {http::status::ok, session_document(s)};
  }

  Reply packets(ApiSession& s, const Target& t) {
    std::uint64_t since = 0;
    std::size_t limit = 1000;
    if (auto it = t.query.find("since"); it != t.query.end()) {
      auto v = parse_u64(it->second);
      if (!v) return error_reply(http::status::bad_request, "bad_request", "since must be a nonnegative integer");
      since = *v;
    }
    if (auto it = t.query.find("limit"); it != t.query.end()) {
      auto v = parse_u64(it->second);
      if (!v || *v == 0) return error_reply(http::status::bad_request, "bad_request", "limit must be positive");
      limit = static_cast<std::size_t>(*v);
    }
    auto d = s.core->drain(since, limit);
    Json records = Json::array();
    for (const auto& r : d.records) records.push_back(to_document(r));
    return {http::status::ok,
            Json{{"records", records},
                 {"gap", d.gap},
                 {"evicted_through", d.evicted_through},
                 {"next_since", d.records.empty() ? std::max(since, d.evicted_through) : d.records.back().index},
                 {"counters", to_document(s.core->counters())}}};
  }

  Reply report(ApiSession& s) {
    const auto& core = *s.core;
    ReportSession info{core.id(), core.source_description(), filter_text(core.filter()),
                       std::string(to_string(core.state())), core.counters(), core.t0()};
    auto rep = analyze(std::move(info), core.snapshot(), core.stats(), opts.clock(), opts.detectors);
    return {http::status::ok, to_document(rep)};
  }

  Reply erase(const std::string& id) {
    auto s = sessions.erase(id);
    if (!s) return error_reply(http::status::not_found, "unknown_session", "no session " + id);
    std::lock_guard lock(s->command_mu);
    if (s->core->state() == SessionState::Capturing) {
      try {
        s->core->stop();
      } catch (const CaptureError&) {
        // already stopped by the producer
      }
    }
    s->deleted = true;
    return {http::status::no_content, std::nullopt};
  }

  Reply handle(http::verb method, std::string_view target_text, const std::string& body) {
    auto t = parse_target(target_text);
    const auto& seg = t.segments;
    if (seg.size() < 2 || seg[0] != "api") return error_reply(http::status::not_found, "not_found", "no such endpoint");

    try {
      if (seg[1] == "interfaces" && seg.size() == 2) {
        if (method != http::verb::get) return method_not_allowed();
        try {
          Json list = Json::array();
          for (const auto& i : list_interfaces(opts.enumerate)) list.push_back(to_document(i));
          return {http::status::ok, Json{{"interfaces", list}}};
        } catch (const CaptureError& e) {
          if (e.code() == CaptureError::Code::PermissionDenied)
            return error_reply(http::status::forbidden, "permission_denied", e.what());
          return error_reply(http::status::internal_server_error, "io_error", e.what());
        }
      }
      if (seg[1] != "sessions") return error_reply(http::status::not_found, "not_found", "no such endpoint");

      if (seg.size() == 2) {
        if (method == http::verb::post) return create_session(body);
        if (method == http::verb::get) {
          Json list = Json::array();
          auto all = sessions.list();
          std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
            return std::tie(a->created_at, a->core->id()) < std::tie(b->created_at, b->core->id());
          });
          for (const auto& s : all) list.push_back(session_document(*s));
          return {http::status::ok, Json{{"sessions", list}}};
        }
        return method_not_allowed();
      }

      const auto& id = seg[2];
      if (seg.size() == 3 && method == http::verb::delete_) return erase(id);
      auto s = sessions.find(id);
      if (!s) return error_reply(http::status::not_found, "unknown_session", "no session " + id);

      if (seg.size() == 3) {
        if (method != http::verb::get) return method_not_allowed();
        return {http::status::ok, session_document(*s)};
      }
      if (seg.size() != 4) return error_reply(http::status::not_found, "not_found", "no such endpoint");
      const auto& action = seg[3];
      if (action == "start" || action == "stop") {
        if (method != http::verb::post) return method_not_allowed();
        return transition(*s, action == "start");
      }
      if (action == "filter") {
        if (method != http::verb::put) return method_not_allowed();
        return put_filter(*s, body);
      }
      if (action == "packets") {
        if (method != http::verb::get) return method_not_allowed();
        return packets(*s, t);
      }
      if (action == "report") {
        if (method != http::verb::get) return method_not_allowed();
        return report(*s);
      }
      return error_reply(http::status::not_found, "not_found", "no such endpoint");
    } catch (const std::exception& e) {
      return error_reply(http::status::internal_server_error, "internal", e.what());
    }
  }

  static Reply method_not_allowed() {
    return error_reply(http::status::method_not_allowed, "method_not_allowed", "method not supported here");
  }

  void stop_all_sessions() {
    for (const auto& s : sessions.list()) {
      std::lock_guard lock(s->command_mu);
      if (s->core->state() == SessionState::Capturing) {
        try {
          s->core->stop();
        } catch (const CaptureError&) {
        }
      }
    }
  }
};

namespace {

using ImplPtr = MonitorService::Impl*;

/// One subscriber: replays the session log from its cursor and accepts
/// {cmd: set_filter|stop} commands.
class StreamConnection : public std::enable_shared_from_this<StreamConnection> {
 public:
  StreamConnection(tcp::socket socket, ImplPtr svc) : ws_(std::move(socket)), timer_(ws_.get_executor()), svc_(svc) {}

  void run(http::request<http::string_body> req, std::string id, std::uint64_t since) {
    session_ = svc_->sessions.find(id);
    cursor_ = since;
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&StreamConnection::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    if (!session_) {
      closing_ = true;
      ws_.async_close(websocket::close_reason(close_unknown_session, "unknown session"),
                      [self = shared_from_this()](beast::error_code) {});
      return;
    }
    do_read();
    pump();
  }

  void do_read() {
    ws_.async_read(rbuf_, beast::bind_front_handler(&StreamConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      closed_ = true;
      timer_.cancel();
      return;
    }
    auto text = beast::buffers_to_string(rbuf_.data());
    rbuf_.consume(rbuf_.size());
    handle_command(text);
    do_read();
    pump();
  }

  void handle_command(const std::string& text) {
    Json cmd;
    try {
      cmd = Json::parse(text);
    } catch (const Json::parse_error& e) {
      return reject("bad_request", e.what());
    }
    auto name = cmd.is_object() ? cmd.value("cmd", std::string{}) : std::string{};
    if (session_->deleted) return reject("unknown_session", "session deleted");
    if (name == "set_filter") {
      try {
        auto f = compile_filter(cmd.value("filter", std::string{}));
        std::lock_guard lock(session_->command_mu);
        session_->core->set_filter(std::move(f));
      } catch (const FilterError& e) {
        return reject("bad_filter", e.what(), e.offset());
      } catch (const Json::exception& e) {
        return reject("bad_request", e.what());
      }
    } else if (name == "stop") {
      try {
        std::lock_guard lock(session_->command_mu);
        session_->core->stop();
      } catch (const CaptureError& e) {
        return reject("invalid_transition", e.what());
      }
    } else {
      reject("bad_request", "unknown command");
    }
  }

  /// Command errors go only to the issuing client and carry no seq.
  void reject(std::string error, std::string detail, std::optional<std::size_t> offset = std::nullopt) {
    Json j = {{"type", "error"}, {"error", std::move(error)}, {"detail", std::move(detail)}};
    if (offset) j["offset"] = *offset;
    control_.push_back(j.dump());
  }

  void pump() {
    if (writing_ || closing_ || closed_) return;
    if (!control_.empty()) {
      out_ = std::move(control_.front());
      control_.pop_front();
      return write();
    }
    auto batch = session_->log.read(cursor_, 1);
    if (batch.gap) {
      cursor_ = batch.gap->second;
      out_ = Json{{"type", "gap"}, {"from_seq", batch.gap->first}, {"to_seq", batch.gap->second}}.dump();
      return write();
    }
    if (!batch.events.empty()) {
      cursor_ = batch.cursor;
      out_ = std::move(batch.events.front());
      return write();
    }
    if (session_->deleted) {
      closing_ = true;
      ws_.async_close(websocket::close_reason(close_session_deleted, "session deleted"),
                      [self = shared_from_this()](beast::error_code) {});
      return;
    }
    timer_.expires_after(std::chrono::milliseconds(20));
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->pump();
    });
  }

  void write() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) {
        self->closed_ = true;
        return;
      }
      self->pump();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  ImplPtr svc_;
  std::shared_ptr<ApiSession> session_;
  std::uint64_t cursor_ = 0;
  beast::flat_buffer rbuf_;
  std::deque<std::string> control_;
  std::string out_;
  bool writing_ = false;
  bool closing_ = false;
  bool closed_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, ImplPtr svc) : stream_(std::move(socket)), svc_(svc) {}

  void run() { do_read(); }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      beast::error_code ignored;
      stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      return;
    }
    auto target = parse_target(std::string_view(req_.target().data(), req_.target().size()));
    auto auth = req_[http::field::authorization];
    if (!svc_->authorized(std::string_view(auth.data(), auth.size()), target)) {
      return send(error_reply(http::status::unauthorized, "unauthorized", "missing or wrong API token"));
    }

    if (websocket::is_upgrade(req_)) {
      const auto& seg = target.segments;
      if (seg.size() == 4 && seg[0] == "api" && seg[1] == "sessions" && seg[3] == "stream") {
        std::uint64_t since = 0;
        if (auto it = target.query.find("since"); it != target.query.end()) {
          auto v = parse_u64(it->second);
          if (!v) return send(error_reply(http::status::bad_request, "bad_request", "since must be an integer"));
          since = *v;
        }
        stream_.expires_never();
        std::make_shared<StreamConnection>(stream_.release_socket(), svc_)->run(std::move(req_), seg[2], since);
        return;
      }
      return send(error_reply(http::status::not_found, "not_found", "no such stream"));
    }

    if (req_.method() == http::verb::options) return send({http::status::no_content, std::nullopt});
    send(svc_->handle(req_.method(), std::string_view(req_.target().data(), req_.target().size()), req_.body()));
  }

  void send(Reply reply) {
    auto res = std::make_shared<http::response<http::string_body>>(reply.status, req_.version());
    res->set(http::field::server, "sniff");
    res->set(http::field::access_control_allow_origin, "*");
    res->set(http::field::access_control_allow_headers, "Authorization, Content-Type");
    res->set(http::field::access_control_allow_methods, "GET, POST, PUT, DELETE, OPTIONS");
    if (reply.body) {
      res->set(http::field::content_type, "application/json");
      res->body() = reply.body->dump();
    }
    res->keep_alive(req_.keep_alive());
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!res->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  ImplPtr svc_;
};

void do_accept(ImplPtr svc) {
  svc->acceptor->async_accept(net::make_strand(svc->ioc), [svc](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<HttpConnection>(std::move(socket), svc)->run();
    do_accept(svc);
  });
}

}  // namespace

MonitorService::MonitorService(ServiceOptions opts) : impl_(std::make_unique<Impl>(std::move(opts))) {}

MonitorService::~MonitorService() { stop(); }

void MonitorService::start() {
  auto& o = impl_->opts;
  if (!is_loopback_address(o.address)) {
    if (!o.allow_external) throw ServiceError("refusing to bind " + o.address + " without --allow-external");
    if (!o.token) throw ServiceError("binding " + o.address + " requires SNIFF_API_TOKEN");
  }
  beast::error_code ec;
  auto addr = net::ip::make_address(o.address == "localhost" ? "127.0.0.1" : o.address, ec);
  if (ec) throw ServiceError("bad address " + o.address);
  tcp::endpoint ep(addr, o.port);
  auto& acc = impl_->acceptor.emplace(impl_->ioc);
  acc.open(ep.protocol(), ec);
  if (!ec) acc.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(ep, ec);
  if (!ec) acc.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw ServiceError("cannot listen on " + o.address + ":" + std::to_string(o.port) + ": " + ec.message());
  impl_->bound_port = acc.local_endpoint().port();
  {
    std::lock_guard lock(impl_->run_mu);
    impl_->running = true;
  }
  do_accept(impl_.get());
  for (std::size_t i = 0; i < std::max<std::size_t>(o.io_threads, 1); ++i)
    impl_->threads.emplace_back([this] { impl_->ioc.run(); });
}

void MonitorService::stop() {
  {
    std::lock_guard lock(impl_->run_mu);
    if (!impl_->running) return;
    impl_->running = false;
  }
  impl_->ioc.stop();
  for (auto& t : impl_->threads)
    if (t.joinable()) t.join();
  impl_->threads.clear();
  beast::error_code ignored;
  impl_->acceptor->close(ignored);
  impl_->stop_all_sessions();
  impl_->run_cv.notify_all();
}

void MonitorService::wait() {
  std::unique_lock lock(impl_->run_mu);
  impl_->run_cv.wait(lock, [&] { return !impl_->running; });
}

std::uint16_t MonitorService::port() const { return impl_->bound_port; }
const std::string& MonitorService::address() const { return impl_->opts.address; }

}  // namespace sniff
