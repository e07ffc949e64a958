#include "sniff/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "sniff/capture.hpp"
#include "sniff/filter.hpp"
#include "sniff/interfaces.hpp"
#include "sniff/live.hpp"
#include "sniff/report.hpp"
#include "sniff/service.hpp"

namespace sniff::cli {

namespace {

std::atomic<bool> interrupted{false};

extern "C" void on_signal(int) { interrupted = true; }

struct SignalGuard {
  SignalGuard() {
    interrupted = false;
    prev_int_ = std::signal(SIGINT, on_signal);
    prev_term_ = std::signal(SIGTERM, on_signal);
  }
  ~SignalGuard() {
    std::signal(SIGINT, prev_int_);
    std::signal(SIGTERM, prev_term_);
  }

 private:
  void (*prev_int_)(int);
  void (*prev_term_)(int);
};

Timestamp wall_now() {
  auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch());
  return Timestamp::from_ns(ns.count());
}

std::optional<Mode> mode_word(const std::string& s) {
  if (s == "read") return Mode::Read;
  if (s == "live") return Mode::Live;
  if (s == "list-interfaces") return Mode::ListInterfaces;
  if (s == "serve") return Mode::Serve;
  return std::nullopt;
}

std::pair<std::string, std::uint16_t> split_address(const std::string& text) {
  std::string host = "127.0.0.1";
  std::string port = "8080";
  auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    bool numeric = !text.empty() && text.find_first_not_of("0123456789") == std::string::npos;
    (numeric ? port : host) = text;
  } else {
    if (colon > 0) host = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  if (port.empty() || port.size() > 5 || port.find_first_not_of("0123456789") != std::string::npos ||
      std::stoul(port) > 65535)
    throw UsageError("bad --serve address: " + text);
  return {host, static_cast<std::uint16_t>(std::stoul(port))};
}

void print_filter_error(std::ostream& err, const std::string& text, const FilterError& e) {
  err << "sniff: bad filter: " << e.what() << "\n";
  err << "  " << text << "\n";
  err << "  " << std::string(std::min(e.offset(), text.size()), ' ') << "^\n";
}

int list_mode(std::ostream& out, std::ostream& err) {
  try {
    for (const auto& i : list_interfaces()) {
      std::string addrs;
      for (const auto& a : i.ipv4) addrs += (addrs.empty() ? "" : ",") + a.to_string();
      char line[256];
      std::snprintf(line, sizeof line, "%-16s %-4s %-17s %-31s %s", i.name.c_str(), i.up ? "up" : "down",
                    i.mac ? i.mac->to_string().c_str() : "-", addrs.empty() ? "-" : addrs.c_str(),
                    i.description.c_str());
      out << line << "\n";
    }
  } catch (const CaptureError& e) {
    err << "sniff: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int serve_mode(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  ServiceOptions opts;
  std::tie(opts.address, opts.port) = split_address(cfg.serve_address);
  opts.allow_external = cfg.allow_external;
  opts.default_ring_capacity = cfg.ring;
  if (const char* tok = std::getenv("SNIFF_API_TOKEN"); tok && *tok) opts.token = tok;
  MonitorService svc(opts);
  try {
    svc.start();
  } catch (const ServiceError& e) {
    err << "sniff: " << e.what() << "\n";
    return 2;
  }
  out << "listening on http://" << opts.address << ":" << svc.port() << "/api" << std::endl;
  SignalGuard guard;
  while (!interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  svc.stop();
  return 0;
}

int capture_mode(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  FilterExpr filter;
  try {
    filter = compile_filter(cfg.filter);
  } catch (const FilterError& e) {
    print_filter_error(err, cfg.filter, e);
    return 1;
  }

  std::unique_ptr<CaptureSource> source;
  if (cfg.mode == Mode::Read) {
    source = std::make_unique<PcapFileSource>(cfg.input);
  } else {
    LiveOptions lo{cfg.interface, cfg.promiscuous, cfg.snaplen};
    source = std::make_unique<LiveSource>(lo);
  }

  CaptureSession::Options so;
  so.ring_capacity = cfg.ring;
  so.max_packets = cfg.count;
  so.max_duration = std::chrono::nanoseconds(static_cast<std::int64_t>(std::llround(cfg.duration_secs * 1e9)));
  CaptureSession session(std::move(source), filter, so);

  bool header_done = false;
  auto header = [&] {
    if (!header_done) out << render_header_line() << "\n";
    header_done = true;
  };
  SessionCallbacks cb;
  cb.on_packet = [&](const PacketRecord& r) {
    header();
    out << render_summary_line(r.summary) << "\n";
  };
  session.set_callbacks(std::move(cb));

  SignalGuard guard;
  try {
    session.start();
  } catch (const CaptureError& e) {
    err << "sniff: " << e.what() << "\n";
    return 2;
  }
  if (cfg.mode == Mode::Live) {
    while (!session.wait_until_stopped(std::chrono::milliseconds(100))) {
      if (interrupted && session.state() == SessionState::Capturing) {
        try {
          session.stop();
        } catch (const CaptureError&) {
        }
      }
    }
  } else {
    session.wait_until_stopped();
  }
  header();

  int rc = 0;
  if (auto e = session.source_error()) {
    err << "sniff: " << *e << "\n";
    rc = 2;
  }

  if (!cfg.output.empty()) {
    try {
      session.save(std::filesystem::path(cfg.output));
    } catch (const std::exception& e) {
      err << "sniff: " << e.what() << "\n";
      rc = 2;
    }
  }

  if (cfg.stats) out << "\n" << render_stats_text(session.stats());
  std::vector<Alert> alerts;
  if (cfg.alerts || !cfg.report.empty()) alerts = run_detectors(session.snapshot());
  if (cfg.alerts) out << "\n" << render_alerts_text(alerts);

  if (!cfg.report.empty()) {
    ReportSession info{session.id(), session.source_description(), filter_text(session.filter()),
                       std::string(to_string(session.state())), session.counters(), session.t0()};
    auto records = session.snapshot();
    auto rep = generate_report(std::move(info), session.stats(), build_conversations(records), pair_echoes(records),
                               std::move(alerts), wall_now());
    bool json = cfg.report.size() >= 5 && cfg.report.compare(cfg.report.size() - 5, 5, ".json") == 0;
    std::ofstream f(cfg.report, std::ios::binary | std::ios::trunc);
    f << (json ? render_document(rep) : render_text(rep));
    if (!f) {
      err << "sniff: cannot write report " << cfg.report << "\n";
      rc = 2;
    }
  }

  auto c = session.counters();
  err << c.seen << " packets seen, " << c.matched << " matched, " << c.dropped << " dropped\n";
  out.flush();
  return rc;
}

}  // namespace

CliConfig parse_args(const std::vector<std::string>& args, std::string* help) {
  CliConfig cfg;
  std::vector<std::string> rest(args.begin(), args.end());
  std::optional<Mode> mode;
  if (!rest.empty()) {
    if ((mode = mode_word(rest.front()))) rest.erase(rest.begin());
  }

  CLI::App app{"Packet capture and traffic analysis", "sniff"};
  app.set_help_flag("-h,--help", "Show help");
  std::optional<std::string> serve;
  std::vector<std::string> positional;
  bool no_promisc = false;
  app.add_option("-i,--interface", cfg.interface, "Capture live from this interface");
  app.add_option("-r,--read", cfg.input, "Read packets from a pcap file");
  app.add_option("-w,--write", cfg.output, "Save matched packets to a pcap file");
  app.add_option("-f,--filter", cfg.filter, "Filter expression");
  app.add_option("-c,--count", cfg.count, "Stop after this many matched packets");
  app.add_option("-t,--duration", cfg.duration_secs, "Stop after this many seconds of capture")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--stats", cfg.stats, "Print protocol statistics at the end");
  app.add_flag("--alerts", cfg.alerts, "Print alerts at the end");
  app.add_option("--report", cfg.report, "Write a report (.json for the structured form)");
  app.add_flag("--no-promiscuous", no_promisc, "Do not put the interface into promiscuous mode");
  app.add_option("--snaplen", cfg.snaplen, "Bytes captured per frame (live)")->check(CLI::Range(64u, 262144u));
  app.add_option("--ring", cfg.ring, "Ring buffer capacity in packets")->check(CLI::PositiveNumber);
  app.add_option("--serve", serve, "Run the monitor service on [host:]port")->expected(0, 1);
  app.add_flag("--allow-external", cfg.allow_external, "Permit a non-loopback --serve address");
  app.add_option("args", positional, "serve address");

  std::vector<std::string> reversed(rest.rbegin(), rest.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    if (help) *help = app.help();
    throw;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  cfg.promiscuous = !no_promisc;

  bool serve_flag = app.count("--serve") > 0;
  if (serve_flag && serve && !serve->empty()) cfg.serve_address = *serve;

  if (!mode) {
    int chosen = int(serve_flag) + int(!cfg.input.empty()) + int(!cfg.interface.empty());
    if (chosen == 0) throw UsageError("nothing to do: give -r FILE, -i IFACE, --serve or a mode");
    if (chosen > 1) throw UsageError("choose exactly one of -r, -i and --serve");
    mode = serve_flag ? Mode::Serve : !cfg.input.empty() ? Mode::Read : Mode::Live;
  }
  cfg.mode = *mode;

  if (!positional.empty()) {
    if (cfg.mode != Mode::Serve || positional.size() > 1)
      throw UsageError("unexpected argument: " + positional.front());
    cfg.serve_address = positional.front();
  }
  switch (cfg.mode) {
    case Mode::Read:
      if (cfg.input.empty()) throw UsageError("read mode requires -r FILE");
      if (!cfg.interface.empty() || serve_flag) throw UsageError("read mode takes -r only, not -i or --serve");
      break;
    case Mode::Live:
      if (cfg.interface.empty()) throw UsageError("live mode requires -i IFACE");
      if (!cfg.input.empty() || serve_flag) throw UsageError("live mode takes -i only, not -r or --serve");
      break;
    case Mode::ListInterfaces:
      if (!cfg.input.empty() || !cfg.interface.empty() || serve_flag)
        throw UsageError("list-interfaces takes no capture options");
      break;
    case Mode::Serve:
      if (!cfg.input.empty() || !cfg.interface.empty()) throw UsageError("serve mode takes no -r or -i");
      split_address(cfg.serve_address);
      break;
  }
  return cfg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliConfig cfg;
  try {
    std::string help;
    try {
      cfg = parse_args(args, &help);
    } catch (const CLI::CallForHelp&) {
      out << help;
      out << "\nModes: sniff read -r FILE | sniff live -i IFACE | sniff list-interfaces | sniff serve [ADDR]\n";
      return 0;
    }
  } catch (const UsageError& e) {
    err << "sniff: " << e.what() << "\n";
    err << "usage: sniff [read|live|list-interfaces|serve] [options], see --help\n";
    return 1;
  }

  try {
    switch (cfg.mode) {
      case Mode::ListInterfaces: return list_mode(out, err);
      case Mode::Serve: return serve_mode(cfg, out, err);
      case Mode::Read:
      case Mode::Live: return capture_mode(cfg, out, err);
    }
  } catch (const std::exception& e) {
    err << "sniff: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace sniff::cli
