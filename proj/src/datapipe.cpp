#include "domus/datapipe.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <thread>

#include <nlohmann/json.hpp>

namespace domus::data {

using nlohmann::json;

namespace {

constexpr char kShardMagic[8] = {'D', 'O', 'M', 'U', 'S', 'S', 'H', 'D'};
constexpr int kShardSize = 256;

uint8_t quantize_depth(double depth, double max_range) {
  const double t = std::clamp(depth / max_range, 0.0, 1.0);
  return static_cast<uint8_t>(std::lround(t * 255.0));
}

void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(static_cast<const char*>(p), n);
}
template <typename T>
void put(std::string& out, T v) {
  put_bytes(out, &v, sizeof v);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  void need(size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("shard: truncated data");
  }
  void get_bytes(void* p, size_t n) {
    need(n);
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  template <typename T>
  T get() {
    T v;
    get_bytes(&v, sizeof v);
    return v;
  }
};

}  // namespace

StoredStep compress_step(const sim::Observation& obs, sim::Action action,
                         const sim::EgoConfig& ego) {
  StoredStep s;
  s.nav_cls = obs.nav.cls;
  s.manip_cls = obs.manip.cls;
  s.nav_depth.resize(obs.nav.depth.size());
  s.manip_depth.resize(obs.manip.depth.size());
  for (size_t i = 0; i < obs.nav.depth.size(); ++i)
    s.nav_depth[i] = quantize_depth(obs.nav.depth[i], ego.max_range);
  for (size_t i = 0; i < obs.manip.depth.size(); ++i)
    s.manip_depth[i] = quantize_depth(obs.manip.depth[i], ego.max_range);
  s.object_in_hand = obs.object_in_hand ? 1 : 0;
  s.det = {static_cast<float>(obs.det_nav.x1),   static_cast<float>(obs.det_nav.y1),
           static_cast<float>(obs.det_nav.x2),   static_cast<float>(obs.det_nav.y2),
           static_cast<float>(obs.det_nav.area), static_cast<float>(obs.det_manip.x1),
           static_cast<float>(obs.det_manip.y1), static_cast<float>(obs.det_manip.x2),
           static_cast<float>(obs.det_manip.y2), static_cast<float>(obs.det_manip.area)};
  s.action = static_cast<uint8_t>(action);
  return s;
}

EpisodeRecord record_from_trajectory(const Catalog& catalog, const House& house,
                                     const experts::ExpertTrajectory& traj,
                                     uint64_t gen_seed, const sim::EgoConfig& ego) {
  (void)catalog;
  EpisodeRecord rec;
  rec.house_seed = house.seed;
  rec.layout_name = house.layout_name;
  rec.gen_seed = gen_seed;
  rec.task = traj.task;
  rec.expert_length = static_cast<uint32_t>(traj.steps.size());
  rec.steps.reserve(traj.steps.size());
  for (const auto& st : traj.steps)
    rec.steps.push_back(compress_step(st.obs, st.action, ego));
  return rec;
}

// ------------------------------------------------------------------ shards

namespace {

std::string encode_episode(const Catalog& catalog, const EpisodeRecord& rec) {
  std::string out;
  put<uint32_t>(out, rec.schema_version);
  put<uint64_t>(out, rec.house_seed);
  put<uint64_t>(out, rec.gen_seed);
  const std::string task = taskgen::task_to_json(catalog, rec.task);
  put<uint32_t>(out, static_cast<uint32_t>(task.size()));
  put_bytes(out, task.data(), task.size());
  put<uint32_t>(out, static_cast<uint32_t>(rec.layout_name.size()));
  put_bytes(out, rec.layout_name.data(), rec.layout_name.size());
  put<uint32_t>(out, rec.expert_length);
  put<uint32_t>(out, static_cast<uint32_t>(rec.steps.size()));
  for (const auto& s : rec.steps) {
    put<uint16_t>(out, static_cast<uint16_t>(s.nav_cls.size()));
    put_bytes(out, s.nav_cls.data(), s.nav_cls.size());
    put_bytes(out, s.nav_depth.data(), s.nav_depth.size());
    put_bytes(out, s.manip_cls.data(), s.manip_cls.size());
    put_bytes(out, s.manip_depth.data(), s.manip_depth.size());
    put<uint8_t>(out, s.object_in_hand);
    put_bytes(out, s.det.data(), sizeof(float) * s.det.size());
    put<uint8_t>(out, s.action);
  }
  return out;
}

EpisodeRecord decode_episode(const Catalog& catalog, const std::string& payload) {
  Reader r{payload};
  EpisodeRecord rec;
  rec.schema_version = r.get<uint32_t>();
  if (rec.schema_version != 1)
    throw std::runtime_error("episode: unsupported schema version");
  rec.house_seed = r.get<uint64_t>();
  rec.gen_seed = r.get<uint64_t>();
  const auto task_len = r.get<uint32_t>();
  std::string task(task_len, '\0');
  r.get_bytes(task.data(), task_len);
  rec.task = taskgen::task_from_json(catalog, task);
  const auto name_len = r.get<uint32_t>();
  rec.layout_name.resize(name_len);
  r.get_bytes(rec.layout_name.data(), name_len);
  rec.expert_length = r.get<uint32_t>();
  const auto n_steps = r.get<uint32_t>();
  rec.steps.resize(n_steps);
  for (auto& s : rec.steps) {
    const auto w = r.get<uint16_t>();
    s.nav_cls.resize(w);
    s.nav_depth.resize(w);
    s.manip_cls.resize(w);
    s.manip_depth.resize(w);
    r.get_bytes(s.nav_cls.data(), w);
    r.get_bytes(s.nav_depth.data(), w);
    r.get_bytes(s.manip_cls.data(), w);
    r.get_bytes(s.manip_depth.data(), w);
    s.object_in_hand = r.get<uint8_t>();
    r.get_bytes(s.det.data(), sizeof(float) * s.det.size());
    s.action = r.get<uint8_t>();
  }
  if (r.pos != payload.size()) throw std::runtime_error("episode: trailing bytes");
  return rec;
}

}  // namespace

void write_shard(const Catalog& catalog, const Shard& shard, const std::string& path) {
  std::string out;
  put_bytes(out, kShardMagic, sizeof kShardMagic);
  put<uint32_t>(out, shard.version);
  put<uint32_t>(out, static_cast<uint32_t>(shard.kind));
  put<uint32_t>(out, static_cast<uint32_t>(shard.split));
  put<uint32_t>(out, static_cast<uint32_t>(shard.episodes.size()));
  put<uint32_t>(out, shard.raster_width);
  put<uint32_t>(out, 0);  // reserved
  for (const auto& e : shard.episodes) {
    const std::string payload = encode_episode(catalog, e);
    put<uint64_t>(out, static_cast<uint64_t>(payload.size()));
    out += payload;
  }
  put<uint64_t>(out, fnv1a(out.data(), out.size()));

  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  const size_t n = std::fwrite(out.data(), 1, out.size(), f);
  std::fclose(f);
  if (n != out.size()) throw std::runtime_error("short write: " + path);
}

Shard read_shard(const Catalog& catalog, const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open shard: " + path);
  std::string buf;
  char tmp[65536];
  size_t n;
  while ((n = std::fread(tmp, 1, sizeof tmp, f)) > 0) buf.append(tmp, n);
  std::fclose(f);
  if (buf.size() < sizeof kShardMagic + 6 * sizeof(uint32_t) + sizeof(uint64_t))
    throw std::runtime_error("shard: file too small");

  const size_t body = buf.size() - sizeof(uint64_t);
  uint64_t stored_sum;
  std::memcpy(&stored_sum, buf.data() + body, sizeof stored_sum);
  if (fnv1a(buf.data(), body) != stored_sum)
    throw std::runtime_error("shard: checksum mismatch");

  Reader r{buf};
  char magic[8];
  r.get_bytes(magic, 8);
  if (std::memcmp(magic, kShardMagic, 8) != 0)
    throw std::runtime_error("shard: bad magic");
  Shard shard;
  shard.version = r.get<uint32_t>();
  if (shard.version != 1) throw std::runtime_error("shard: unsupported version");
  shard.kind = static_cast<TaskKind>(r.get<uint32_t>());
  shard.split = static_cast<Split>(r.get<uint32_t>());
  const auto count = r.get<uint32_t>();
  shard.raster_width = r.get<uint32_t>();
  r.get<uint32_t>();  // reserved
  shard.episodes.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<uint64_t>();
    r.need(len);
    const std::string payload(buf.data() + r.pos, len);
    r.pos += len;
    shard.episodes.push_back(decode_episode(catalog, payload));
  }
  if (r.pos != body) throw std::runtime_error("shard: count does not match payloads");
  return shard;
}

// ------------------------------------------------------------- generation

SplitAssignment split_houses(const std::vector<uint64_t>& seeds) {
  SplitAssignment a;
  for (uint64_t s : seeds) {
    switch (worldgen::split_for_seed(s)) {
      case Split::Train: a.train.push_back(s); break;
      case Split::Val: a.val.push_back(s); break;
      case Split::Test: a.test.push_back(s); break;
    }
  }
  return a;
}

std::vector<uint64_t> seeds_for_split(uint64_t start, int count, Split split) {
  std::vector<uint64_t> out;
  for (uint64_t s = start; static_cast<int>(out.size()) < count; ++s)
    if (worldgen::split_for_seed(s) == split) out.push_back(s);
  return out;
}

House rebuild_house(const Catalog& catalog, const std::string& layout_name,
                    uint64_t seed) {
  for (const auto& l : catalog.layouts)
    if (l.name == layout_name) return worldgen::realize_house(catalog, l, seed);
  throw std::runtime_error("unknown layout in episode: " + layout_name);
}

namespace {

Catalog filtered_catalog(const Catalog& catalog, const std::vector<std::string>& names) {
  Catalog out = catalog;
  out.layouts.clear();
  for (const auto& l : catalog.layouts)
    if (std::find(names.begin(), names.end(), l.name) != names.end())
      out.layouts.push_back(l);
  if (out.layouts.empty()) throw std::runtime_error("layout filter matched nothing");
  return out;
}

struct Job {
  int house_index = -1;
  TaskSpec spec;
  uint64_t episode_seed = 0;
};

}  // namespace

GenStats generate_episodes(const Catalog& catalog, const GenConfig& config,
                           std::vector<EpisodeRecord>& out) {
  const Catalog* gen_cat = &catalog;
  std::optional<Catalog> filtered;
  if (!config.layout_filter.empty()) {
    filtered.emplace(filtered_catalog(catalog, config.layout_filter));
    gen_cat = &*filtered;
  }

  GenStats stats;
  const auto seeds = seeds_for_split(derive_seed({config.master_seed, 0x5eedULL}) % 100000,
                                     config.houses, config.split);

  // Phase A: houses and task sampling, serial so counters stay deterministic.
  std::vector<House> houses;
  std::vector<std::unique_ptr<taskgen::HouseContext>> contexts;
  houses.reserve(seeds.size());
  for (uint64_t s : seeds) houses.push_back(worldgen::generate_house(*gen_cat, s));
  for (const auto& h : houses)
    contexts.push_back(std::make_unique<taskgen::HouseContext>(catalog, h));

  std::vector<Job> jobs;
  taskgen::SamplerCounters counters(catalog);
  for (TaskKind kind : config.kinds) {
    auto& per = stats.kinds[kind];
    for (size_t hi = 0; hi < houses.size(); ++hi) {
      for (int e = 0; e < config.episodes_per_house; ++e) {
        const uint64_t episode_seed =
            derive_seed({config.master_seed, houses[hi].seed,
                         static_cast<uint64_t>(kind), static_cast<uint64_t>(e)});
        Rng rng(episode_seed);
        ++per.attempted;
        auto spec =
            taskgen::sample_task(kind, *contexts[hi], counters, rng, config.sampler);
        if (!spec) continue;
        ++per.sampled;
        jobs.push_back({static_cast<int>(hi), std::move(*spec), episode_seed});
      }
    }
  }

  // Phase B: expert rollouts in parallel; results keyed by job index so the
  // output is independent of scheduling.
  std::vector<std::optional<experts::ExpertTrajectory>> results(jobs.size());
  std::atomic<size_t> next{0};
  std::atomic<uint64_t> sim_steps{0};
  const auto t0 = std::chrono::steady_clock::now();
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      experts::ExpertOptions opts;
      opts.step_cap = config.step_cap;
      opts.room_visit_cap = config.room_visit_cap;
      opts.exploration = config.exploration_expert;
      Rng rng(derive_seed({job.episode_seed, 0xe9be47ULL}));
      auto traj = experts::run_expert(*contexts[job.house_index], job.spec, rng, opts);
      if (traj) sim_steps += traj->steps.size();
      results[i] = std::move(traj);
    }
  };
  int workers = config.workers > 0 ? config.workers
                                   : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  stats.expert_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  stats.total_sim_steps = sim_steps;

  // Phase C: collect retained episodes in job order.
  for (size_t i = 0; i < jobs.size(); ++i) {
    if (!results[i]) continue;
    const Job& job = jobs[i];
    stats.kinds[job.spec.kind].retained++;
    out.push_back(record_from_trajectory(catalog, houses[job.house_index], *results[i],
                                         job.episode_seed, config.ego));
  }
  return stats;
}

GenStats generate_dataset(const Catalog& catalog, const GenConfig& config) {
  std::vector<EpisodeRecord> episodes;
  GenStats stats = generate_episodes(catalog, config, episodes);

  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  std::map<TaskKind, std::vector<EpisodeRecord>> by_kind;
  for (auto& e : episodes) by_kind[e.task.kind].push_back(std::move(e));
  for (auto& [kind, eps] : by_kind) {
    int index = 0;
    for (size_t off = 0; off < eps.size(); off += kShardSize, ++index) {
      Shard shard;
      shard.kind = kind;
      shard.split = config.split;
      shard.raster_width = static_cast<uint32_t>(config.ego.width);
      const size_t end = std::min(eps.size(), off + kShardSize);
      shard.episodes.assign(eps.begin() + off, eps.begin() + end);
      char name[128];
      std::snprintf(name, sizeof name, "%s-%s-%03d.shard",
                    taskgen::task_kind_name(kind), worldgen::split_name(config.split),
                    index);
      const std::string path = (fs::path(config.out_dir) / name).string();
      write_shard(catalog, shard, path);
      stats.shard_files.push_back(path);
    }
  }
  return stats;
}

// ------------------------------------------------------------- benchmark

namespace {

// Uniqueness keys in priority order: kind parameter, synset, hypernym, lemma.
std::array<std::string, 4> curation_keys(const Catalog& catalog,
                                         const EpisodeRecord& e) {
  const auto& tax = catalog.taxonomy;
  const TaskSpec& t = e.task;
  std::string kind_param;
  switch (t.kind) {
    case TaskKind::ObjectNavRoom:
    case TaskKind::RoomNav:
      kind_param = "room:" + std::to_string(t.room_type);
      break;
    case TaskKind::ObjectNavRelAttribute:
      kind_param = std::string("attr:") + taskgen::rel_attribute_name(t.attribute);
      break;
    case TaskKind::ObjectNavAffordance:
      kind_param = "aff:" + t.affordance;
      break;
    case TaskKind::ObjectNavLocalRef:
      kind_param = "ref:" + std::to_string(t.local_mode) + ":" +
                   std::to_string(t.ref_synset_a) + ":" + std::to_string(t.ref_synset_b);
      break;
    case TaskKind::ObjectNavOpenVocab:
      kind_param = "asset:" + std::to_string(t.target_asset);
      break;
    case TaskKind::RoomVisit:
      // Balanced on the number of rooms in the house.
      kind_param = "rooms:" + e.layout_name;
      break;
    default:
      kind_param = "syn:" + std::to_string(t.target_synset);
  }
  std::string syn = "-", hyp = "-", lemma = "-";
  if (t.target_synset >= 0) {
    syn = tax.at(t.target_synset).id;
    const int h = tax.at(t.target_synset).hypernym;
    hyp = h >= 0 ? tax.at(h).id : "-";
    lemma = tax.primary_lemma(t.target_synset);
  }
  return {kind_param, syn, hyp, lemma};
}

}  // namespace

BenchmarkSet curate_benchmark(const Catalog& catalog,
                              const std::vector<EpisodeRecord>& candidates,
                              int per_task_target, const std::string& name) {
  BenchmarkSet set;
  set.name = name;
  std::map<TaskKind, std::vector<int>> by_kind;
  for (size_t i = 0; i < candidates.size(); ++i)
    by_kind[candidates[i].task.kind].push_back(static_cast<int>(i));

  for (auto& [kind, idxs] : by_kind) {
    auto& chosen = set.episodes[kind];
    if (static_cast<int>(idxs.size()) <= per_task_target) {
      for (int i : idxs) chosen.push_back(candidates[i]);
      if (static_cast<int>(idxs.size()) < per_task_target) set.shortfall = true;
      continue;
    }
    std::array<std::map<std::string, int>, 4> used;
    std::vector<bool> taken(idxs.size(), false);
    std::vector<std::array<std::string, 4>> keys;
    keys.reserve(idxs.size());
    for (int i : idxs) keys.push_back(curation_keys(catalog, candidates[i]));
    for (int round = 0; round < per_task_target; ++round) {
      int best = -1;
      std::array<int, 4> best_score{};
      for (size_t c = 0; c < idxs.size(); ++c) {
        if (taken[c]) continue;
        std::array<int, 4> score;
        for (int k = 0; k < 4; ++k) {
          auto it = used[k].find(keys[c][k]);
          score[k] = it == used[k].end() ? 0 : it->second;
        }
        if (best < 0 || score < best_score) {
          best = static_cast<int>(c);
          best_score = score;
        }
      }
      taken[best] = true;
      for (int k = 0; k < 4; ++k) ++used[k][keys[best][k]];
      chosen.push_back(candidates[idxs[best]]);
    }
  }
  return set;
}

// --------------------------------------------------------------- reports

DatasetStats dataset_stats(const Catalog& catalog,
                           const std::vector<EpisodeRecord>& episodes) {
  DatasetStats s;
  std::map<uint64_t, int> house_rooms;
  for (const auto& e : episodes) {
    s.episode_count[e.task.kind]++;
    s.frame_count[e.task.kind] += e.steps.size();
    const size_t bin = e.steps.size() / 25;
    if (s.length_histogram.size() <= bin) s.length_histogram.resize(bin + 1, 0);
    s.length_histogram[bin]++;
    if (!house_rooms.count(e.house_seed)) {
      const House h = rebuild_house(catalog, e.layout_name, e.house_seed);
      house_rooms[e.house_seed] = static_cast<int>(h.rooms.size());
    }
    if (e.task.target_synset >= 0)
      s.synset_frequency[catalog.taxonomy.at(e.task.target_synset).id]++;
  }
  for (const auto& [seed, rooms] : house_rooms) s.room_count_histogram[rooms]++;
  return s;
}

std::string stats_to_json(const DatasetStats& stats) {
  json j;
  j["episodes"] = json::object();
  j["frames"] = json::object();
  for (const auto& [kind, n] : stats.episode_count)
    j["episodes"][taskgen::task_kind_name(kind)] = n;
  for (const auto& [kind, n] : stats.frame_count)
    j["frames"][taskgen::task_kind_name(kind)] = n;
  j["length_histogram_bin"] = 25;
  j["length_histogram"] = stats.length_histogram;
  j["room_count_histogram"] = json::object();
  for (const auto& [rooms, n] : stats.room_count_histogram)
    j["room_count_histogram"][std::to_string(rooms)] = n;
  j["synset_frequency"] = stats.synset_frequency;
  return j.dump(1);
}

// ----------------------------------------------------------------- replay

bool replay_verify(const Catalog& catalog, const EpisodeRecord& record,
                   const sim::EgoConfig& ego, std::string* error) {
  auto fail = [&](const std::string& why) {
    if (error) *error = why;
    return false;
  };
  House house;
  try {
    house = rebuild_house(catalog, record.layout_name, record.house_seed);
  } catch (const std::exception& e) {
    return fail(e.what());
  }
  sim::Sim sim(catalog, std::move(house), ego);
  sim.spawn(record.task.spawn.pose.x, record.task.spawn.pose.y,
            record.task.spawn.pose.theta);
  bench::RolloutLog log;
  log.reset(sim);
  for (size_t i = 0; i < record.steps.size(); ++i) {
    const auto obs = sim.observe(record.task.valid_target_ids);
    const StoredStep expect =
        compress_step(obs, static_cast<sim::Action>(record.steps[i].action), ego);
    if (!(expect == record.steps[i]))
      return fail("observation mismatch at step " + std::to_string(i));
    log.apply(sim, static_cast<sim::Action>(record.steps[i].action),
              record.task.valid_target_ids);
  }
  const auto result = bench::judge(sim, record.task, log);
  if (!result.success) return fail("replay did not reproduce success");
  if (record.expert_length != record.steps.size()) return fail("length mismatch");
  return true;
}

}  // namespace domus::data
