#include "domus/bench.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

namespace domus::bench {

using nlohmann::json;

Interval wilson95(int successes, int n) {
  if (n == 0) return {0.0, 0.0};
  const double z = 1.959963984540054;
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double two_proportion_p(int s1, int n1, int s2, int n2) {
  if (n1 == 0 || n2 == 0) return 1.0;
  const double p1 = static_cast<double>(s1) / n1;
  const double p2 = static_cast<double>(s2) / n2;
  const double pooled = static_cast<double>(s1 + s2) / (n1 + n2);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  if (se == 0.0) return p1 > p2 ? 0.0 : 1.0;
  const double z = (p1 - p2) / se;
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

std::string MetricsReport::to_json() const {
  json j;
  j["avg_success"] = avg_success;
  j["fingerprint"] = fingerprint;
  for (const auto& [kind, pk] : kinds) {
    json k;
    k["episodes"] = pk.episodes;
    k["success"] = pk.success;
    k["sel"] = pk.sel;
    k["pct_rooms"] = pk.pct_rooms;
    k["soft_success"] = pk.soft_success;
    k["success_ci95"] = {pk.success_ci.lo, pk.success_ci.hi};
    j["tasks"][taskgen::task_kind_name(kind)] = std::move(k);
  }
  return j.dump(1);
}

std::string MetricsReport::to_csv() const {
  std::string out = "task,episodes,success,sel,pct_rooms,soft_success,ci_lo,ci_hi\n";
  char line[256];
  for (const auto& [kind, pk] : kinds) {
    std::snprintf(line, sizeof line, "%s,%d,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f\n",
                  taskgen::task_kind_name(kind), pk.episodes, pk.success, pk.sel,
                  pk.pct_rooms, pk.soft_success, 100.0 * pk.success_ci.lo,
                  100.0 * pk.success_ci.hi);
    out += line;
  }
  return out;
}

namespace {

class RandomAgent : public Agent {
 public:
  void reset(const EpisodeRecord&) override {}
  sim::Action act(const sim::Observation&, Rng& rng) override {
    return static_cast<sim::Action>(rng.uniform_int(sim::kNumActions));
  }
};

class AlwaysTerminateAgent : public Agent {
 public:
  void reset(const EpisodeRecord&) override {}
  sim::Action act(const sim::Observation&, Rng&) override {
    return sim::Action::Terminate;
  }
};

class ExpertReplayAgent : public Agent {
 public:
  void reset(const EpisodeRecord& e) override {
    episode_ = &e;
    next_ = 0;
    if (e.steps.empty())
      throw std::runtime_error("expert_replay needs stored trajectories");
  }
  sim::Action act(const sim::Observation&, Rng&) override {
    if (next_ >= episode_->steps.size()) return sim::Action::Terminate;
    return static_cast<sim::Action>(episode_->steps[next_++].action);
  }

 private:
  const EpisodeRecord* episode_ = nullptr;
  size_t next_ = 0;
};

class PolicyAgent : public Agent {
 public:
  PolicyAgent(const policy::Checkpoint& ckpt, const Catalog& catalog, ActMode mode,
              double temperature)
      : tokenizer_(ckpt.vocab),
        model_(ckpt.config, 0),
        ego_(),
        mode_(mode),
        temperature_(temperature) {
    (void)catalog;
    policy::restore_model(ckpt, model_);
  }

  void reset(const EpisodeRecord& e) override {
    const auto tokens =
        tokenizer_.encode(e.task.instruction, model_.config().n_goal_max);
    rollout_ = model_.start_rollout(tokens);
    prev_action_ = model_.config().n_actions;  // START
    t_ = 0;
  }

  sim::Action act(const sim::Observation& obs, Rng& rng) override {
    const data::StoredStep stored =
        data::compress_step(obs, sim::Action::Terminate, ego_);
    const auto logits = model_.rollout_step(*rollout_, stored, prev_action_, t_);
    ++t_;
    int choice;
    if (mode_ == ActMode::Greedy) {
      Eigen::Index arg;
      logits.maxCoeff(&arg);
      choice = static_cast<int>(arg);
    } else {
      policy::Col<float> p =
          ((logits.array() - logits.maxCoeff()) / static_cast<float>(temperature_))
              .exp()
              .matrix();
      p /= p.sum();
      double u = rng.uniform();
      choice = 0;
      for (int a = 0; a < static_cast<int>(p.size()); ++a) {
        u -= p[a];
        if (u < 0.0) {
          choice = a;
          break;
        }
        if (a == static_cast<int>(p.size()) - 1) choice = a;
      }
    }
    prev_action_ = choice;
    return static_cast<sim::Action>(choice);
  }

 private:
  policy::Tokenizer tokenizer_;
  policy::Model<float> model_;
  sim::EgoConfig ego_;
  ActMode mode_;
  double temperature_;
  std::unique_ptr<policy::Model<float>::Rollout> rollout_;
  int prev_action_ = 0;
  int t_ = 0;
};

}  // namespace

AgentFactory baseline(const std::string& kind) {
  if (kind == "random")
    return [] { return std::make_unique<RandomAgent>(); };
  if (kind == "always_terminate")
    return [] { return std::make_unique<AlwaysTerminateAgent>(); };
  if (kind == "expert_replay")
    return [] { return std::make_unique<ExpertReplayAgent>(); };
  throw std::runtime_error("unknown baseline: " + kind);
}

AgentFactory policy_agent(const policy::Checkpoint& ckpt, const Catalog& catalog,
                          ActMode mode, double temperature) {
  return [&ckpt, &catalog, mode, temperature] {
    return std::make_unique<PolicyAgent>(ckpt, catalog, mode, temperature);
  };
}

MetricsReport evaluate(const Catalog& catalog, const AgentFactory& factory,
                       const BenchmarkSet& bench, const EvalConfig& config) {
  struct Item {
    TaskKind kind;
    const EpisodeRecord* episode;
    int index;
  };
  std::vector<Item> items;
  for (const auto& [kind, eps] : bench.episodes) {
    int i = 0;
    for (const auto& e : eps) items.push_back({kind, &e, i++});
  }

  std::vector<EpisodeResult> results(items.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    auto agent = factory();
    for (;;) {
      const size_t idx = next.fetch_add(1);
      if (idx >= items.size()) return;
      const Item& item = items[idx];
      const EpisodeRecord& e = *item.episode;
      EpisodeResult res;
      res.kind = item.kind;
      try {
        auto house = data::rebuild_house(catalog, e.layout_name, e.house_seed);
        sim::Sim sim(catalog, std::move(house), config.ego);
        sim.spawn(e.task.spawn.pose.x, e.task.spawn.pose.y, e.task.spawn.pose.theta);
        RolloutLog log;
        log.reset(sim);
        agent->reset(e);
        Rng rng(derive_seed({config.seed, static_cast<uint64_t>(item.kind),
                             static_cast<uint64_t>(item.index), 0xe7a1ULL}));
        const int cap = item.kind == TaskKind::RoomVisit ? config.room_visit_cap
                                                         : config.step_cap;
        for (int step = 0; step < cap; ++step) {
          const auto obs = sim.observe(e.task.valid_target_ids);
          const sim::Action a = agent->act(obs, rng);
          log.apply(sim, a, e.task.valid_target_ids);
          if (a == sim::Action::Terminate) break;
        }
        res = judge(sim, e.task, log);
        res.kind = item.kind;
      } catch (const std::exception& ex) {
        // Agent failures count as failed episodes.
        fprintf(stderr, "eval: episode %s/%d failed: %s\n",
                taskgen::task_kind_name(item.kind), item.index, ex.what());
        res.success = false;
        res.agent_length = config.step_cap;
      }
      res.expert_length = static_cast<int>(e.expert_length);
      results[idx] = res;
    }
  };
  int workers = config.workers > 0 ? config.workers
                                   : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(items.size())));
  {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MetricsReport report;
  std::map<TaskKind, std::vector<const EpisodeResult*>> by_kind;
  for (size_t i = 0; i < results.size(); ++i)
    by_kind[items[i].kind].push_back(&results[i]);
  double kind_success_sum = 0.0;
  for (const auto& [kind, rs] : by_kind) {
    MetricsReport::PerKind pk;
    pk.episodes = static_cast<int>(rs.size());
    double sel_sum = 0.0, rooms_sum = 0.0, soft = 0.0;
    for (const auto* r : rs) {
      pk.successes += r->success ? 1 : 0;
      sel_sum += sel(r->success, r->expert_length, r->agent_length);
      rooms_sum += pct_rooms(r->rooms_visited, r->rooms_total);
      soft += r->soft_success ? 1 : 0;
    }
    pk.success = 100.0 * pk.successes / pk.episodes;
    pk.sel = 100.0 * sel_sum / pk.episodes;
    pk.pct_rooms = rooms_sum / pk.episodes;
    pk.soft_success = 100.0 * soft / pk.episodes;
    pk.success_ci = wilson95(pk.successes, pk.episodes);
    kind_success_sum += pk.success;
    report.kinds[kind] = pk;
  }
  if (!by_kind.empty()) report.avg_success = kind_success_sum / by_kind.size();
  report.episodes.assign(results.begin(), results.end());

  json fp;
  fp["step_cap"] = config.step_cap;
  fp["room_visit_cap"] = config.room_visit_cap;
  fp["seed"] = config.seed;
  fp["success_radius"] = config.ego.visibility_range;
  fp["sel"] = "success * expert_len / max(agent_len, expert_len)";
  fp["catalog_version"] = catalog.version;
  report.fingerprint = fp.dump();
  return report;
}

}  // namespace domus::bench
