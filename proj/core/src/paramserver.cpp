#include "mdd/paramserver.hpp"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <string_view>
#include <thread>

namespace mdd {

namespace {

std::string describe(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown exception";
  }
}

// Runs one worker phase per call to `phase`; threads persist for the whole run.
class WorkerPool {
 public:
  WorkerPool(std::size_t threads, std::size_t workers, const RoundEngine::WorkerTask& task)
      : workers_(workers), task_(task), sync_(static_cast<std::ptrdiff_t>(threads + 1)) {
    for (std::size_t k = 0; k < threads; ++k) {
      pool_.emplace_back([this, k, threads] { loop(k, threads); });
    }
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    done_ = true;
    sync_.arrive_and_wait();
    for (auto& t : pool_) t.join();
  }

  void phase(const std::vector<Payload>& pulls, std::vector<Payload>& pushes,
             std::vector<std::exception_ptr>& errors) {
    pulls_ = &pulls;
    pushes_ = &pushes;
    errors_ = &errors;
    sync_.arrive_and_wait();  // start
    sync_.arrive_and_wait();  // finish
  }

 private:
  void loop(std::size_t k, std::size_t stride) {
    for (;;) {
      sync_.arrive_and_wait();
      if (done_) return;
      for (std::size_t i = k; i < workers_; i += stride) {
        try {
          (*pushes_)[i] = task_(i, (*pulls_)[i]);
        } catch (...) {
          (*errors_)[i] = std::current_exception();
        }
      }
      sync_.arrive_and_wait();
    }
  }

  std::size_t workers_;
  const RoundEngine::WorkerTask& task_;
  std::barrier<> sync_;
  std::vector<std::thread> pool_;
  bool done_ = false;
  const std::vector<Payload>* pulls_ = nullptr;
  std::vector<Payload>* pushes_ = nullptr;
  std::vector<std::exception_ptr>* errors_ = nullptr;
};

}  // namespace

RoundEngine::RoundEngine(std::size_t workers, WorkerTask worker_task, ServerTask server_task, std::size_t threads)
    : workers_(workers),
      worker_task_(std::move(worker_task)),
      server_task_(std::move(server_task)),
      threads_(std::max<std::size_t>(1, std::min(threads, workers))) {
  if (workers_ == 0) throw std::invalid_argument("RoundEngine: need at least one worker");
  if (!worker_task_ || !server_task_) throw std::invalid_argument("RoundEngine: missing task");
}

RunResult RoundEngine::run(std::vector<Payload> initial_pulls, std::size_t max_iters) const {
  if (initial_pulls.size() != workers_) {
    throw std::invalid_argument("RoundEngine::run: expected " + std::to_string(workers_) + " initial pulls");
  }
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  RunResult result;
  std::vector<Payload> pulls = std::move(initial_pulls);
  std::vector<Payload> pushes(workers_);
  std::vector<std::exception_ptr> errors(workers_);
  std::uint64_t pushed = 0;
  std::uint64_t pulled = 0;

  std::unique_ptr<WorkerPool> pool;
  if (threads_ > 1) pool = std::make_unique<WorkerPool>(threads_, workers_, worker_task_);

  for (std::size_t t = 1; t <= max_iters; ++t) {
    std::fill(errors.begin(), errors.end(), nullptr);
    if (pool) {
      pool->phase(pulls, pushes, errors);
    } else {
      for (std::size_t i = 0; i < workers_; ++i) {
        try {
          pushes[i] = worker_task_(i, pulls[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    }
    for (std::size_t i = 0; i < workers_; ++i) {
      if (errors[i]) throw WorkerFailure(i, describe(errors[i]), errors[i]);
    }

    for (const auto& p : pulls) pulled += static_cast<std::uint64_t>(p.size());
    for (const auto& p : pushes) pushed += static_cast<std::uint64_t>(p.size());

    ServerStep step = server_task_(t, pushes);
    const double elapsed = std::chrono::duration<double>(clock::now() - start).count();
    result.rounds.push_back({t, pushed, pulled, elapsed});
    if (step.stop) {
      result.stopped = true;
      break;
    }
    if (step.pulls.size() != workers_) {
      throw std::logic_error("RoundEngine: server produced " + std::to_string(step.pulls.size()) +
                             " pulls for " + std::to_string(workers_) + " workers");
    }
    pulls = std::move(step.pulls);
  }
  result.last_pushes = std::move(pushes);
  return result;
}

std::size_t thread_budget() {
  if (const char* env = std::getenv("MDD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace mdd
