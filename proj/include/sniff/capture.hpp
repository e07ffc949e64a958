#pragma once

// Collection stage: capture sources and the capture session state machine.
//
// A session owns one producer thread that pulls frames from its source,
// dissects them, counts them, applies the filter and appends matches to a
// bounded ring. Any number of consumers may drain the ring concurrently.
//
//   Idle --start--> Capturing --stop / source exhausted / limit--> Stopped

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "sniff/analysis.hpp"
#include "sniff/dissect.hpp"
#include "sniff/filter.hpp"
#include "sniff/pcap.hpp"

namespace sniff {

class CaptureError : public std::runtime_error {
 public:
  enum class Code { InvalidTransition, OpenFailed, PermissionDenied, Io };

  CaptureError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

/// Abstract packet producer.
class CaptureSource {
 public:
  virtual ~CaptureSource() = default;

  /// Acquires the device or file. Throws CaptureError(OpenFailed).
  virtual void open() {}
  /// Blocks until a frame is available. nullopt means the source is exhausted
  /// or `stop` was requested.
  virtual std::optional<RawFrame> next(std::stop_token stop) = 0;
  virtual void close() {}
  virtual std::string describe() const = 0;
  virtual bool is_live() const { return false; }
  /// Error that ended the stream early (e.g. a truncated file), if any.
  virtual std::optional<std::string> error() const { return std::nullopt; }
};

/// Replays a pcap file. An optional per-frame delay paces the replay.
class PcapFileSource : public CaptureSource {
 public:
  explicit PcapFileSource(std::filesystem::path path, std::chrono::microseconds pace = {})
      : path_(std::move(path)), pace_(pace) {}

  void open() override {
    in_.open(path_, std::ios::binary);
    if (!in_) throw CaptureError(CaptureError::Code::OpenFailed, "cannot open " + path_.string());
    try {
      reader_.emplace(in_);
    } catch (const PcapError& e) {
      throw CaptureError(CaptureError::Code::OpenFailed, path_.string() + ": " + e.what());
    }
  }

  std::optional<RawFrame> next(std::stop_token stop) override {
    if (!reader_ || stop.stop_requested()) return std::nullopt;
    if (pace_.count() > 0) {
      std::mutex m;
      std::condition_variable_any cv;
      std::unique_lock lock(m);
      cv.wait_for(lock, stop, pace_, [] { return false; });
      if (stop.stop_requested()) return std::nullopt;
    }
    try {
      return reader_->next();
    } catch (const PcapError& e) {
      error_ = path_.string() + ": " + e.what();
      reader_.reset();
      return std::nullopt;
    }
  }

  void close() override {
    reader_.reset();
    in_.close();
  }

  std::string describe() const override { return "file:" + path_.string(); }
  std::optional<std::string> error() const override { return error_; }
  const PcapMetadata* metadata() const { return reader_ ? &reader_->metadata() : nullptr; }

 private:
  std::filesystem::path path_;
  std::chrono::microseconds pace_;
  std::ifstream in_;
  std::optional<PcapReader> reader_;
  std::optional<std::string> error_;
};

/// Frames pushed by another thread; exhausted after finish(). Used for
/// scripted replays.
class QueueSource : public CaptureSource {
 public:
  explicit QueueSource(std::vector<RawFrame> initial = {}, bool finished = false)
      : queue_(initial.begin(), initial.end()), finished_(finished) {}

  void push(RawFrame f) {
    {
      std::lock_guard lock(mu_);
      queue_.push_back(std::move(f));
    }
    cv_.notify_all();
  }

  void finish() {
    {
      std::lock_guard lock(mu_);
      finished_ = true;
    }
    cv_.notify_all();
  }

  std::optional<RawFrame> next(std::stop_token stop) override {
    std::unique_lock lock(mu_);
    cv_.wait(lock, stop, [&] { return !queue_.empty() || finished_; });
    if (stop.stop_requested() || queue_.empty()) return std::nullopt;
    auto f = std::move(queue_.front());
    queue_.pop_front();
    return f;
  }

  std::string describe() const override { return "queue"; }

 private:
  std::mutex mu_;
  std::condition_variable_any cv_;
  std::deque<RawFrame> queue_;
  bool finished_;
};

enum class SessionState { Idle, Capturing, Stopped };

constexpr std::string_view to_string(SessionState s) noexcept {
  switch (s) {
    case SessionState::Idle: return "Idle";
    case SessionState::Capturing: return "Capturing";
    case SessionState::Stopped: return "Stopped";
  }
  return "?";
}

struct SessionCounters {
  std::uint64_t seen = 0;
  std::uint64_t matched = 0;
  std::uint64_t dropped = 0;  // ring evictions

  std::uint64_t rejected() const noexcept { return seen - matched; }
  friend bool operator==(const SessionCounters&, const SessionCounters&) = default;
};

struct DrainResult {
  std::vector<PacketRecord> records;
  /// Records newer than `since` were evicted before this call.
  bool gap = false;
  /// Index of the newest evicted record (0 if none).
  std::uint64_t evicted_through = 0;
};

/// Invoked outside the session's data lock. on_packet runs on the producer
/// thread; calls are serialized with on_filter and on_state so listeners see
/// one consistent order.
struct SessionCallbacks {
  std::function<void(const PacketRecord&)> on_packet;
  std::function<void(const FilterExpr&)> on_filter;
  std::function<void(SessionState)> on_state;
};

inline std::string make_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  static constexpr char digits[] = "0123456789abcdef";
  std::string id(24, '0');
  for (auto& c : id) c = digits[rng() & 0xf];
  return id;
}

class CaptureSession {
 public:
  struct Options {
    std::size_t ring_capacity = 100000;
    std::uint64_t max_packets = 0;           // matched packets; 0 = unlimited
    std::chrono::nanoseconds max_duration{};  // 0 = unlimited
  };

  CaptureSession(std::unique_ptr<CaptureSource> source, FilterExpr filter, Options opts)
      : id_(make_session_id()), source_(std::move(source)), filter_(std::move(filter)), opts_(opts) {
    if (opts_.ring_capacity == 0) opts_.ring_capacity = 1;
  }

  explicit CaptureSession(std::unique_ptr<CaptureSource> source, FilterExpr filter = {})
      : CaptureSession(std::move(source), std::move(filter), Options{}) {}

  CaptureSession(const CaptureSession&) = delete;
  CaptureSession& operator=(const CaptureSession&) = delete;

  ~CaptureSession() {
    producer_.request_stop();
    if (producer_.joinable()) producer_.join();
    std::lock_guard lock(mu_);
    if (opened_) source_->close();
  }

  const std::string& id() const noexcept { return id_; }
  std::string source_description() const { return source_->describe(); }
  const Options& options() const noexcept { return opts_; }

  /// Must be called before start().
  void set_callbacks(SessionCallbacks cb) { callbacks_ = std::move(cb); }

  SessionState state() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  SessionCounters counters() const {
    std::lock_guard lock(mu_);
    return counters_;
  }

  FilterExpr filter() const {
    std::lock_guard lock(mu_);
    return filter_;
  }

  std::optional<Timestamp> t0() const {
    std::lock_guard lock(mu_);
    return t0_;
  }

  /// Statistics over every matched packet, including evicted ones.
  ProtocolStats stats() const { return stats_.snapshot(); }

  std::optional<std::string> source_error() const {
    std::lock_guard lock(mu_);
    return source_error_;
  }

  void start() {
    {
      std::lock_guard emit(emit_mu_);
      {
        std::lock_guard lock(mu_);
        if (state_ != SessionState::Idle)
          throw CaptureError(CaptureError::Code::InvalidTransition,
                             "cannot start a session that is " + std::string(to_string(state_)));
        source_->open();
        opened_ = true;
        state_ = SessionState::Capturing;
        started_at_ = std::chrono::steady_clock::now();
      }
      state_cv_.notify_all();
      if (callbacks_.on_state) callbacks_.on_state(SessionState::Capturing);
    }
    producer_ = std::jthread([this](std::stop_token st) { run(st); });
  }

  void stop() {
    {
      std::lock_guard lock(mu_);
      if (state_ != SessionState::Capturing)
        throw CaptureError(CaptureError::Code::InvalidTransition,
                           "cannot stop a session that is " + std::string(to_string(state_)));
    }
    producer_.request_stop();
    if (producer_.joinable() && producer_.get_id() != std::this_thread::get_id()) producer_.join();
    finish();
  }

  /// Takes effect for frames processed after the call returns. Already
  /// buffered records are kept. On a stopped session this changes nothing.
  void set_filter(FilterExpr f) {
    std::lock_guard emit(emit_mu_);
    {
      std::lock_guard lock(mu_);
      filter_ = f;
    }
    if (callbacks_.on_filter) callbacks_.on_filter(f);
  }

  void save(std::ostream& out, PcapWriteOptions opts = {}) const {
    std::vector<RawFrame> frames;
    {
      std::lock_guard lock(mu_);
      if (state_ != SessionState::Stopped)
        throw CaptureError(CaptureError::Code::InvalidTransition,
                           "cannot save a session that is " + std::string(to_string(state_)));
      for (const auto& r : ring_) frames.push_back(r.frame);
    }
    PcapWriter w(out, opts);
    for (const auto& f : frames) w.write(f);
  }

  void save(const std::filesystem::path& path, PcapWriteOptions opts = {}) const {
    if (state() != SessionState::Stopped)
      throw CaptureError(CaptureError::Code::InvalidTransition,
                         "cannot save a session that is " + std::string(to_string(state())));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CaptureError(CaptureError::Code::Io, "cannot write " + path.string());
    save(out, opts);
    out.flush();
    if (!out) throw CaptureError(CaptureError::Code::Io, "write failed: " + path.string());
  }

  /// Buffered records with index > since, oldest first, at most `limit`.
  DrainResult drain(std::uint64_t since, std::size_t limit = SIZE_MAX) const {
    std::lock_guard lock(mu_);
    DrainResult out;
    out.evicted_through = evicted_through_;
    out.gap = evicted_through_ > since;
    auto it = std::upper_bound(ring_.begin(), ring_.end(), since,
                               [](std::uint64_t s, const PacketRecord& r) { return s < r.index; });
    for (; it != ring_.end() && out.records.size() < limit; ++it) out.records.push_back(*it);
    return out;
  }

  std::vector<PacketRecord> snapshot() const { return drain(0).records; }

  bool wait_until_stopped(std::chrono::milliseconds timeout = std::chrono::hours(1)) const {
    std::unique_lock lock(mu_);
    return state_cv_.wait_for(lock, timeout, [&] { return state_ == SessionState::Stopped && settled_; });
  }

  bool wait_for_seen(std::uint64_t n, std::chrono::milliseconds timeout = std::chrono::seconds(10)) const {
    std::unique_lock lock(mu_);
    return state_cv_.wait_for(lock, timeout,
                              [&] { return counters_.seen >= n || state_ == SessionState::Stopped; });
  }

 private:
  void run(std::stop_token st) {
    while (!st.stop_requested()) {
      auto frame = source_->next(st);
      if (!frame) break;
      if (!process(std::move(*frame), st)) break;
    }
    if (!st.stop_requested()) finish();
  }

  /// Returns false when a capture limit has been reached.
  bool process(RawFrame frame, const std::stop_token& st) {
    std::lock_guard emit(emit_mu_);
    std::optional<PacketRecord> appended;
    bool keep_going = true;
    {
      std::lock_guard lock(mu_);
      if (st.stop_requested() || state_ != SessionState::Capturing) return false;
      if (!t0_) t0_ = frame.ts;
      if (opts_.max_duration.count() > 0) {
        auto elapsed = std::chrono::nanoseconds(frame.ts.to_ns() - t0_->to_ns());
        auto wall = std::chrono::steady_clock::now() - started_at_;
        if (elapsed >= opts_.max_duration || (source_->is_live() && wall >= opts_.max_duration)) return false;
      }
      auto rec = dissect(std::move(frame), counters_.seen + 1, *t0_);
      ++counters_.seen;
      if (eval_filter(filter_, rec)) {
        ++counters_.matched;
        if (ring_.size() >= opts_.ring_capacity) {
          evicted_through_ = ring_.front().index;
          ring_.pop_front();
          ++counters_.dropped;
        }
        stats_.add(rec);
        ring_.push_back(rec);
        appended = std::move(rec);
      }
      if (opts_.max_packets && counters_.matched >= opts_.max_packets) keep_going = false;
    }
    state_cv_.notify_all();
    if (appended && callbacks_.on_packet) callbacks_.on_packet(*appended);
    return keep_going;
  }

  void finish() {
    std::lock_guard emit(emit_mu_);
    {
      std::lock_guard lock(mu_);
      if (state_ != SessionState::Capturing) return;
      state_ = SessionState::Stopped;
      if (auto err = source_->error()) source_error_ = *err;
      source_->close();
      opened_ = false;
    }
    state_cv_.notify_all();
    if (callbacks_.on_state) callbacks_.on_state(SessionState::Stopped);
    {
      std::lock_guard lock(mu_);
      settled_ = true;
    }
    state_cv_.notify_all();
  }

  const std::string id_;
  std::unique_ptr<CaptureSource> source_;
  FilterExpr filter_;
  Options opts_;
  SessionCallbacks callbacks_;

  mutable std::mutex mu_;
  mutable std::condition_variable state_cv_;
  std::mutex emit_mu_;
  SessionState state_ = SessionState::Idle;
  bool settled_ = false;  // Stopped callbacks have returned
  SessionCounters counters_;
  std::deque<PacketRecord> ring_;
  StatsAccumulator stats_;
  std::uint64_t evicted_through_ = 0;
  std::optional<Timestamp> t0_;
  std::optional<std::string> source_error_;
  std::chrono::steady_clock::time_point started_at_;
  bool opened_ = false;
  std::jthread producer_;
};

/// Thread-safe id -> session map.
template <typename Session>
class SessionTable {
 public:
  void insert(const std::string& id, std::shared_ptr<Session> s) {
    std::unique_lock lock(mu_);
    map_[id] = std::move(s);
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = map_.find(id);
    return it == map_.end() ? nullptr : it->second;
  }

  std::shared_ptr<Session> erase(const std::string& id) {
    std::unique_lock lock(mu_);
    auto it = map_.find(id);
    if (it == map_.end()) return nullptr;
    auto s = std::move(it->second);
    map_.erase(it);
    return s;
  }

  std::vector<std::shared_ptr<Session>> list() const {
    std::shared_lock lock(mu_);
    std::vector<std::shared_ptr<Session>> out;
    for (const auto& [_, s] : map_) out.push_back(s);
    return out;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return map_.size();
  }

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<Session>> map_;
};

}  // namespace sniff
