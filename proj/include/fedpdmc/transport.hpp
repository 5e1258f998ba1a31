#pragma once

#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedpdmc/federated.hpp"

namespace fedpdmc {

namespace wire {

inline nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

inline std::vector<double> to_list(const Vec& v) { return {v.data(), v.data() + v.size()}; }

inline Vec from_list(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// Worker -> server. Only the proposed time and velocity cross the boundary.
inline std::string encode_proposal(std::uint64_t round, const EventProposal& p) {
  nlohmann::json j = {{"round", round}, {"worker", p.worker_id}, {"tau", number_or_null(p.tau)}};
  j["velocity"] = p.finite() ? nlohmann::json(to_list(p.new_velocity)) : nlohmann::json::array();
  return j.dump();
}

inline EventProposal decode_proposal(const nlohmann::json& j, std::uint64_t* round = nullptr) {
  EventProposal p;
  p.worker_id = j.at("worker").get<int>();
  p.tau = j.at("tau").is_null() ? kNever : j.at("tau").get<double>();
  if (p.finite()) p.new_velocity = from_list(j.at("velocity"));
  if (round != nullptr) *round = j.at("round").get<std::uint64_t>();
  return p;
}

/// Server -> worker: current state and the proposal horizon.
inline std::string encode_state(std::uint64_t round, const PhaseState& s, double horizon) {
  return nlohmann::json{{"round", round}, {"t", s.t}, {"x", to_list(s.x)}, {"v", to_list(s.v)}, {"horizon", horizon}}
      .dump();
}

inline PhaseState decode_state(const nlohmann::json& j) {
  return {from_list(j.at("x")), from_list(j.at("v")), j.at("t").get<double>()};
}

}  // namespace wire

namespace detail {

class LineChannel {
 public:
  explicit LineChannel(int fd = -1) : fd_(fd) {}

  int fd() const { return fd_; }

  void send_line(const std::string& line) const {
    std::string buf = line + '\n';
    std::size_t sent = 0;
    while (sent < buf.size()) {
      const ssize_t n = ::send(fd_, buf.data() + sent, buf.size() - sent, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw Error(ErrorCode::TransportError, std::string("send failed: ") + std::strerror(errno));
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string receive_line() {
    for (;;) {
      const auto nl = pending_.find('\n');
      if (nl != std::string::npos) {
        std::string line = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::read(fd_, chunk, sizeof(chunk));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw Error(ErrorCode::TransportError, "peer closed the connection");
      pending_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
  std::string pending_;
};

}  // namespace detail

/// Each worker runs in its own forked process and talks newline-delimited
/// JSON over a stream socket. The worker's data never leaves its process.
class SocketTransport final : public Transport {
 public:
  SocketTransport(std::vector<ModelWorker> workers, Flow flow) {
    detail::require(!workers.empty(), ErrorCode::InvalidArgument, "no workers");
    for (const auto& w : workers) sharing_.push_back(w.holds_prior_share());
    for (auto& worker : workers) {
      int fds[2];
      if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0)
        throw Error(ErrorCode::TransportError, std::string("socketpair: ") + std::strerror(errno));
      const pid_t pid = ::fork();
      if (pid < 0) throw Error(ErrorCode::TransportError, std::string("fork: ") + std::strerror(errno));
      if (pid == 0) {
        ::close(fds[0]);
        for (auto& c : channels_) c.close();
        serve(worker, flow, detail::LineChannel(fds[1]));
      }
      ::close(fds[1]);
      channels_.emplace_back(fds[0]);
      pids_.push_back(pid);
    }
  }

  ~SocketTransport() override {
    for (auto& c : channels_) {
      try {
        c.send_line(R"({"shutdown":true})");
      } catch (...) {
      }
      c.close();
    }
    for (pid_t pid : pids_) ::waitpid(pid, nullptr, 0);
  }
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  std::size_t size() const override { return channels_.size(); }

  std::vector<EventProposal> collect(std::uint64_t round, const PhaseState& state, double cutoff) override {
    const std::string msg = wire::encode_state(round, state, cutoff);
    for (auto& c : channels_) c.send_line(msg);
    std::vector<EventProposal> out;
    for (auto& c : channels_) {
      const auto j = parse(c.receive_line());
      if (j.contains("error")) throw Error(ErrorCode::TransportError, j.at("error").get<std::string>());
      std::uint64_t echoed = 0;
      out.push_back(wire::decode_proposal(j, &echoed));
      detail::require(echoed == round, ErrorCode::TransportError, "proposal for the wrong round");
    }
    return out;
  }

  void set_prior_weights(const Vec& alpha) override {
    Eigen::Index j = 0;
    for (std::size_t m = 0; m < channels_.size(); ++m)
      if (sharing_[m]) channels_[m].send_line(nlohmann::json{{"prior_weight", alpha[j++]}}.dump());
    detail::require(j == alpha.size(), ErrorCode::DimensionMismatch, "one prior weight per sharing worker");
  }

  std::vector<std::uint64_t> evaluations() const override {
    std::vector<std::uint64_t> out;
    for (auto& c : channels_) {
      c.send_line(R"({"stats":true})");
      out.push_back(parse(c.receive_line()).at("evaluations").get<std::uint64_t>());
    }
    return out;
  }

 private:
  static nlohmann::json parse(const std::string& line) {
    try {
      return nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::TransportError, std::string("malformed message: ") + e.what());
    }
  }

  [[noreturn]] static void serve(ModelWorker& worker, const Flow& flow, detail::LineChannel channel) {
    int status = 0;
    try {
      for (;;) {
        const auto j = nlohmann::json::parse(channel.receive_line());
        if (j.contains("shutdown")) break;
        if (j.contains("prior_weight")) {
          worker.set_prior_weight(j.at("prior_weight").get<double>());
        } else if (j.contains("stats")) {
          channel.send_line(nlohmann::json{{"evaluations", worker.evaluations()}}.dump());
        } else {
          const auto round = j.at("round").get<std::uint64_t>();
          try {
            const EventProposal p = worker.propose(wire::decode_state(j), flow, j.at("horizon").get<double>());
            channel.send_line(wire::encode_proposal(round, p));
          } catch (const std::exception& e) {
            channel.send_line(nlohmann::json{{"round", round}, {"worker", worker.id()}, {"error", e.what()}}.dump());
          }
        }
      }
    } catch (...) {
      status = 1;
    }
    channel.close();
    ::_exit(status);
  }

  std::vector<bool> sharing_;
  mutable std::vector<detail::LineChannel> channels_;
  std::vector<pid_t> pids_;
};

}  // namespace fedpdmc
