#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "domus/datapipe.hpp"
#include "domus/metrics.hpp"
#include "domus/policy.hpp"

namespace domus::bench {

using data::BenchmarkSet;
using data::EpisodeRecord;
using taskgen::TaskKind;
using worldgen::Catalog;

// Wilson 95% score interval for a success proportion.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};
Interval wilson95(int successes, int n);

// One-sided two-proportion z-test that p1 > p2; returns the p-value.
double two_proportion_p(int s1, int n1, int s2, int n2);

struct MetricsReport {
  struct PerKind {
    int episodes = 0;
    int successes = 0;
    double success = 0.0;      // percent
    double sel = 0.0;          // percent
    double pct_rooms = 0.0;    // percent
    double soft_success = 0.0;  // percent, manipulation kinds
    Interval success_ci;       // fraction scale
  };
  std::map<TaskKind, PerKind> kinds;
  double avg_success = 0.0;  // mean of per-kind success, percent
  std::string fingerprint;
  std::vector<EpisodeResult> episodes;  // in (kind, index) order

  std::string to_json() const;
  std::string to_csv() const;
};

// Rollout-time policy interface.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual void reset(const EpisodeRecord& episode) = 0;
  virtual sim::Action act(const sim::Observation& obs, Rng& rng) = 0;
};

using AgentFactory = std::function<std::unique_ptr<Agent>()>;

// kind: "random", "expert_replay", or "always_terminate".
AgentFactory baseline(const std::string& kind);

enum class ActMode { Sample, Greedy };

AgentFactory policy_agent(const policy::Checkpoint& ckpt, const Catalog& catalog,
                          ActMode mode = ActMode::Sample, double temperature = 1.0);

struct EvalConfig {
  int step_cap = 600;
  int room_visit_cap = 1000;
  int workers = 0;  // 0 = hardware concurrency
  uint64_t seed = 0;
  sim::EgoConfig ego;
};

// Rolls out every benchmark episode, judges, and aggregates. Per-episode
// results reduce in deterministic (kind, index) order.
MetricsReport evaluate(const Catalog& catalog, const AgentFactory& factory,
                       const BenchmarkSet& bench, const EvalConfig& config);

}  // namespace domus::bench
