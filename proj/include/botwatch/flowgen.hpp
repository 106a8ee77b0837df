#pragma once

// Bidirectional TCP netflow assembly with window-boundary splitting.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "botwatch/model.hpp"

namespace botwatch {

// Unordered endpoint pair; the lower (ip, port) endpoint comes first.
struct FlowKey {
  Ipv4 a_ip;
  std::uint16_t a_port = 0;
  Ipv4 b_ip;
  std::uint16_t b_port = 0;

  static FlowKey of(const PacketEvent& ev) {
    auto src = std::make_pair(ev.src_ip, ev.src_port);
    auto dst = std::make_pair(ev.dst_ip, ev.dst_port);
    if (dst < src) std::swap(src, dst);
    return {src.first, src.second, dst.first, dst.second};
  }

  bool operator==(const FlowKey&) const = default;
  auto operator<=>(const FlowKey&) const = default;
};

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& k) const noexcept {
    std::uint64_t x = (std::uint64_t{k.a_ip.value()} << 32) | k.b_ip.value();
    std::uint64_t y = (std::uint64_t{k.a_port} << 16) | k.b_port;
    x ^= y * 0x9e3779b97f4a7c15ULL;
    x ^= x >> 31;
    x *= 0xbf58476d1ce4e5b9ULL;
    return static_cast<std::size_t>(x ^ (x >> 29));
  }
};

class FlowTable {
 public:
  FlowTable(std::size_t payload_cap, Micros idle_timeout)
      : payload_cap_(payload_cap), idle_timeout_(idle_timeout) {}

  explicit FlowTable(const Config& cfg) : FlowTable(cfg.payload_cap, cfg.idle_timeout) {}

  // Accounts one TCP packet. Non-TCP events are ignored.
  void observe(const PacketEvent& ev) {
    if (ev.protocol != Protocol::Tcp) return;
    auto key = FlowKey::of(ev);
    auto it = active_.find(key);
    if (it != active_.end()) {
      auto& af = it->second;
      bool idle = ev.ts - af.last_ts > idle_timeout_;
      bool reopened = af.terminated && ev.flags.syn && !ev.flags.ack;
      if (idle || reopened) {
        retire(af);
        active_.erase(it);
        it = active_.end();
      }
    }
    if (it == active_.end()) it = active_.emplace(key, open(ev)).first;

    auto& af = it->second;
    auto& f = af.flow;
    if (!af.has_activity) {
      f.start_ts = ev.ts;
      af.has_activity = true;
    }
    bool outbound = ev.src_ip == f.src && ev.src_port == f.src_port;
    if (outbound) {
      ++f.sent_pkts;
      f.sent_bytes += ev.payload.size();
      append_capped(f.sent_payload, ev.payload);
    } else {
      ++f.recv_pkts;
      f.recv_bytes += ev.payload.size();
      append_capped(f.recv_payload, ev.payload);
    }
    f.end_ts = ev.ts;
    af.last_ts = ev.ts;
    if (ev.flags.fin || ev.flags.rst) af.terminated = true;
  }

  // Emits every flow with activity in `window`. Unterminated flows that are
  // not yet idle at `window_end` continue as fresh accumulators; both the
  // emitted piece and the continuation are marked partial.
  std::vector<Netflow> close_window(WindowIndex window, Timestamp window_end) {
    std::vector<Netflow> out = std::move(finished_);
    finished_.clear();
    for (auto it = active_.begin(); it != active_.end();) {
      auto& af = it->second;
      bool alive = !af.terminated && window_end - af.last_ts < idle_timeout_;
      if (af.has_activity) {
        Netflow piece = af.flow;
        piece.partial = af.continuation || alive;
        out.push_back(std::move(piece));
      }
      if (!alive) {
        it = active_.erase(it);
        continue;
      }
      if (af.has_activity) restart(af);
      ++it;
    }

    std::sort(out.begin(), out.end(), [](const Netflow& x, const Netflow& y) {
      return std::tie(x.start_ts, x.src, x.src_port, x.dst_ip, x.dst_port) <
             std::tie(y.start_ts, y.src, y.src_port, y.dst_ip, y.dst_port);
    });
    for (auto& f : out) {
      f.window = window;
      f.flow_id = next_id_++;
    }
    return out;
  }

  std::size_t active_size() const noexcept { return active_.size(); }

 private:
  struct ActiveFlow {
    Netflow flow;
    Timestamp last_ts{0};
    bool has_activity = false;  // at least one packet since the last window close
    bool terminated = false;    // FIN or RST seen
    bool continuation = false;  // carried over from an earlier window
  };

  static ActiveFlow open(const PacketEvent& ev) {
    ActiveFlow af;
    af.flow.src = ev.src_ip;
    af.flow.src_port = ev.src_port;
    af.flow.dst_ip = ev.dst_ip;
    af.flow.dst_port = ev.dst_port;
    af.flow.start_ts = ev.ts;
    af.last_ts = ev.ts;
    return af;
  }

  static void restart(ActiveFlow& af) {
    auto& f = af.flow;
    f.sent_pkts = f.recv_pkts = f.sent_bytes = f.recv_bytes = 0;
    f.sent_payload.clear();
    f.recv_payload.clear();
    af.has_activity = false;
    af.continuation = true;
  }

  void retire(const ActiveFlow& af) {
    if (!af.has_activity) return;
    Netflow piece = af.flow;
    piece.partial = af.continuation;
    finished_.push_back(std::move(piece));
  }

  void append_capped(Bytes& dst, const Bytes& src) const {
    if (dst.size() >= payload_cap_) return;
    auto n = std::min(src.size(), payload_cap_ - dst.size());
    dst.insert(dst.end(), src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n));
  }

  std::size_t payload_cap_;
  Micros idle_timeout_;
  std::unordered_map<FlowKey, ActiveFlow, FlowKeyHash> active_;
  std::vector<Netflow> finished_;  // retired before the window closed
  std::uint64_t next_id_ = 0;
};

}  // namespace botwatch
