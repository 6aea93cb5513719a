#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mdd {

using Payload = Eigen::VectorXd;

/// Raised by RoundEngine::run when a worker task throws. The original
/// exception is kept in `cause()`.
class WorkerFailure : public std::runtime_error {
 public:
  WorkerFailure(std::size_t worker, const std::string& message, std::exception_ptr cause)
      : std::runtime_error("worker " + std::to_string(worker) + " failed: " + message),
        worker_(worker),
        cause_(std::move(cause)) {}
  [[nodiscard]] std::size_t worker() const { return worker_; }
  [[nodiscard]] std::exception_ptr cause() const { return cause_; }

 private:
  std::size_t worker_;
  std::exception_ptr cause_;
};

/// Engine-side bookkeeping for one completed round. Counters are cumulative.
struct RoundRecord {
  std::size_t t = 0;
  std::uint64_t floats_pushed = 0;
  std::uint64_t floats_pulled = 0;
  double elapsed_s = 0.0;
};

struct ServerStep {
  std::vector<Payload> pulls;  // one per worker, delivered next round
  bool stop = false;
};

struct RunResult {
  std::vector<Payload> last_pushes;
  std::vector<RoundRecord> rounds;
  bool stopped = false;  // false when max_iters ran out first

  [[nodiscard]] std::size_t completed_rounds() const { return rounds.size(); }
  [[nodiscard]] std::uint64_t floats_pushed() const { return rounds.empty() ? 0 : rounds.back().floats_pushed; }
  [[nodiscard]] std::uint64_t floats_pulled() const { return rounds.empty() ? 0 : rounds.back().floats_pulled; }
};

/// Bulk-synchronous pull/compute/push loop over m in-process workers.
///
/// Each round t = 1, 2, ... delivers one pull payload to every worker, runs
/// all worker tasks (concurrently when threads > 1), then hands the pushed
/// payloads to the server task on the calling thread. No worker starts round
/// t+1 before the server has finished round t. Payload sizes are counted
/// exactly; the pushes and pulls of a round are charged to that round.
class RoundEngine {
 public:
  using WorkerTask = std::function<Payload(std::size_t worker, const Payload& pulled)>;
  using ServerTask = std::function<ServerStep(std::size_t t, std::span<const Payload> pushes)>;

  RoundEngine(std::size_t workers, WorkerTask worker_task, ServerTask server_task, std::size_t threads = 1);

  [[nodiscard]] std::size_t workers() const { return workers_; }

  [[nodiscard]] RunResult run(std::vector<Payload> initial_pulls, std::size_t max_iters) const;

 private:
  std::size_t workers_;
  WorkerTask worker_task_;
  ServerTask server_task_;
  std::size_t threads_;
};

/// Worker-thread budget from MDD_THREADS, falling back to the hardware
/// concurrency (at least 1).
[[nodiscard]] std::size_t thread_budget();

}  // namespace mdd
