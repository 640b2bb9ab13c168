#include "domus/runner.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>

#include <nlohmann/json.hpp>

#include "domus/bench.hpp"
#include "domus/datapipe.hpp"
#include "domus/policy.hpp"
#include "domus/worldgen.hpp"

namespace domus::runner {

namespace fs = std::filesystem;
using nlohmann::json;
using worldgen::Catalog;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void validate_keys(const json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw UsageError("unknown config key: " + key);
  }
}

const Catalog& resolve_catalog(const json& cfg, std::optional<Catalog>& storage) {
  if (cfg.contains("catalog_dir")) {
    storage.emplace(worldgen::load_catalog_dir(cfg.at("catalog_dir").get<std::string>()));
    return *storage;
  }
  return worldgen::builtin_catalog();
}

// Layouts with at most three rooms and ten always-useful pickupable targets.
const std::vector<std::string> kMicroLayouts = {
    "kitchen",        "living",           "bed",
    "bath",           "kitchen-living",   "bed-bath",
    "kitchen-living-bed", "kitchen-living-bed-2"};
const std::vector<std::string> kMicroSynsets = {
    "mug.n.04",   "vase.n.01",   "houseplant.n.01", "basketball.n.02",
    "book.n.01",  "bowl.n.01",   "teddy.n.01",      "bottle.n.01",
    "apple.n.01", "pillow.n.01"};

std::vector<taskgen::TaskKind> parse_kinds(const json& cfg) {
  std::vector<taskgen::TaskKind> kinds;
  if (!cfg.contains("kinds") || cfg.at("kinds") == "all") {
    for (int k = 0; k < taskgen::kNumTaskKinds; ++k)
      kinds.push_back(static_cast<taskgen::TaskKind>(k));
    return kinds;
  }
  for (const auto& name : cfg.at("kinds"))
    kinds.push_back(taskgen::task_kind_from_name(name.get<std::string>()));
  if (kinds.empty()) throw UsageError("kinds: empty list");
  return kinds;
}

data::GenConfig parse_gen_config(const Catalog& catalog, const json& cfg) {
  data::GenConfig gen;
  gen.kinds = parse_kinds(cfg);
  gen.houses = cfg.value("houses", 10);
  gen.episodes_per_house = cfg.value("episodes", 1);
  gen.master_seed = cfg.value("seed", 0ULL);
  const std::string split = cfg.value("split", "train");
  gen.split = split == "train"  ? worldgen::Split::Train
              : split == "val"  ? worldgen::Split::Val
              : split == "test" ? worldgen::Split::Test
                                : throw UsageError("split must be train|val|test");
  gen.out_dir = cfg.value("out", "");
  gen.workers = cfg.value("workers", 0);
  gen.exploration_expert = cfg.value("exploration", false);
  gen.step_cap = cfg.value("step_cap", 600);
  gen.room_visit_cap = cfg.value("room_visit_cap", 1000);
  if (cfg.value("micro", false)) {
    gen.layout_filter = kMicroLayouts;
    for (const auto& s : kMicroSynsets) {
      const int idx = catalog.taxonomy.find(s);
      if (idx >= 0) gen.sampler.target_synsets.push_back(idx);
    }
  }
  if (cfg.contains("layouts"))
    gen.layout_filter = cfg.at("layouts").get<std::vector<std::string>>();
  if (cfg.contains("target_synsets")) {
    gen.sampler.target_synsets.clear();
    for (const auto& s : cfg.at("target_synsets"))
      gen.sampler.target_synsets.push_back(
          catalog.taxonomy.index_of(s.get<std::string>()));
  }
  return gen;
}

std::vector<data::EpisodeRecord> load_shard_dir(const Catalog& catalog,
                                                const std::string& path) {
  std::vector<data::EpisodeRecord> out;
  std::vector<std::string> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.path().extension() == ".shard") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
  } else if (fs::exists(path)) {
    files.push_back(path);
  } else {
    throw DataError("no such data path: " + path);
  }
  if (files.empty()) throw DataError("no shard files under " + path);
  for (const auto& f : files) {
    auto shard = data::read_shard(catalog, f);
    for (auto& e : shard.episodes) out.push_back(std::move(e));
  }
  return out;
}

json gen_stats_json(const data::GenStats& stats) {
  json j;
  for (const auto& [kind, pk] : stats.kinds) {
    j["kinds"][taskgen::task_kind_name(kind)] = {{"attempted", pk.attempted},
                                                 {"sampled", pk.sampled},
                                                 {"retained", pk.retained}};
  }
  j["sim_steps"] = stats.total_sim_steps;
  j["expert_seconds"] = stats.expert_seconds;
  j["shards"] = stats.shard_files;
  return j;
}

json cmd_gen_houses(const json& cfg) {
  validate_keys(cfg, {"count", "seed", "out", "catalog_dir"});
  std::optional<Catalog> storage;
  const Catalog& catalog = resolve_catalog(cfg, storage);
  const int count = cfg.value("count", 10);
  const uint64_t seed = cfg.value("seed", 0ULL);
  const std::string out = cfg.value("out", "");
  if (!out.empty()) fs::create_directories(out);
  double rooms = 0.0;
  json index = json::array();
  for (int i = 0; i < count; ++i) {
    const auto house = worldgen::generate_house(catalog, seed + i);
    rooms += house.rooms.size();
    if (!out.empty()) {
      char name[64];
      std::snprintf(name, sizeof name, "house-%llu.json",
                    static_cast<unsigned long long>(house.seed));
      std::ofstream f(fs::path(out) / name);
      f << worldgen::house_to_json(catalog, house);
      index.push_back({{"seed", house.seed},
                       {"layout", house.layout_name},
                       {"rooms", house.rooms.size()},
                       {"split", worldgen::split_name(house.split)},
                       {"file", name}});
    }
  }
  json j;
  j["houses"] = count;
  j["mean_rooms"] = rooms / std::max(count, 1);
  if (!out.empty()) {
    std::ofstream f(fs::path(out) / "index.json");
    f << index.dump(1);
    j["out"] = out;
  }
  return j;
}

json cmd_gen_episodes(const json& cfg) {
  validate_keys(cfg, {"kinds", "houses", "episodes", "seed", "out", "split", "workers",
                      "exploration", "micro", "layouts", "target_synsets", "step_cap",
                      "room_visit_cap", "catalog_dir"});
  std::optional<Catalog> storage;
  const Catalog& catalog = resolve_catalog(cfg, storage);
  data::GenConfig gen = parse_gen_config(catalog, cfg);
  if (gen.out_dir.empty()) throw UsageError("gen-episodes: 'out' is required");
  const auto stats = data::generate_dataset(catalog, gen);
  return gen_stats_json(stats);
}

json cmd_stats(const json& cfg) {
  validate_keys(cfg, {"data", "out", "catalog_dir"});
  std::optional<Catalog> storage;
  const Catalog& catalog = resolve_catalog(cfg, storage);
  if (!cfg.contains("data")) throw UsageError("stats: 'data' is required");
  const auto episodes = load_shard_dir(catalog, cfg.at("data").get<std::string>());
  const auto stats = data::dataset_stats(catalog, episodes);
  const std::string text = data::stats_to_json(stats);
  if (cfg.contains("out")) {
    std::ofstream f(cfg.at("out").get<std::string>());
    f << text;
  }
  return json::parse(text);
}

json cmd_curate_bench(const json& cfg) {
  validate_keys(cfg, {"data", "per_task", "out", "name", "catalog_dir"});
  std::optional<Catalog> storage;
  const Catalog& catalog = resolve_catalog(cfg, storage);
  if (!cfg.contains("data") || !cfg.contains("out"))
    throw UsageError("curate-bench: 'data' and 'out' are required");
  const auto candidates = load_shard_dir(catalog, cfg.at("data").get<std::string>());
  for (const auto& e : candidates)
    if (worldgen::split_for_seed(e.house_seed) == worldgen::Split::Train)
      throw DataError("curate-bench: candidate episodes include train-split houses");
  const int per_task = cfg.value("per_task", 195);
  const auto set = data::curate_benchmark(catalog, candidates, per_task,
                                          cfg.value("name", "bench"));
  const std::string out = cfg.at("out").get<std::string>();
  fs::create_directories(out);
  json manifest;
  manifest["name"] = set.name;
  manifest["per_task_target"] = per_task;
  manifest["shortfall"] = set.shortfall;
  manifest["catalog_version"] = catalog.version;
  for (const auto& [kind, eps] : set.episodes) {
    data::Shard shard;
    shard.kind = kind;
    shard.split = worldgen::Split::Val;
    shard.episodes = eps;
    const std::string name =
        std::string(taskgen::task_kind_name(kind)) + "-bench.shard";
    data::write_shard(catalog, shard, (fs::path(out) / name).string());
    manifest["tasks"][taskgen::task_kind_name(kind)] = {
        {"episodes", eps.size()}, {"file", name}};
  }
  std::ofstream f(fs::path(out) / "manifest.json");
  f << manifest.dump(1);
  return manifest;
}

policy::PolicyConfig preset_config(const std::string& preset) {
  if (preset == "micro") return policy::micro_preset();
  if (preset == "paper") return policy::paper_preset();
  throw UsageError("preset must be micro|paper");
}

json cmd_train(const json& cfg) {
  validate_keys(cfg, {"data", "preset", "steps", "ckpt", "seed", "detect", "lr",
                      "batch", "threads", "weight_decay", "log_every", "catalog_dir"});
  std::optional<Catalog> storage;
  const Catalog& catalog = resolve_catalog(cfg, storage);
  if (!cfg.contains("data") || !cfg.contains("ckpt"))
    throw UsageError("train: 'data' and 'ckpt' are required");
  const auto episodes = load_shard_dir(catalog, cfg.at("data").get<std::string>());
  if (episodes.empty()) throw DataError("train: no episodes");

  policy::PolicyConfig pc = preset_config(cfg.value("preset", "micro"));
  policy::Tokenizer tokenizer(catalog);
  pc.vocab = tokenizer.vocab_size();
  pc.n_class = catalog.num_class_channels();
  pc.n_patch = static_cast<int>(episodes[0].steps[0].nav_cls.size());
  pc.detection = cfg.value("detect", false);

  const uint64_t seed = cfg.value("seed", 0ULL);
  policy::Model<float> model(pc, seed);
  policy::TrainConfig tc;
  tc.lr = cfg.value("lr", 2e-4);
  tc.weight_decay = cfg.value("weight_decay", 0.01);
  tc.batch_windows = cfg.value("batch", 8);
  tc.threads = cfg.value("threads", 1);
  tc.seed = seed;
  policy::Trainer<float> trainer(model, tc);
  policy::WindowSampler sampler(catalog, tokenizer, pc, &episodes);

  const int steps = cfg.value("steps", 1000);
  const int log_every = cfg.value("log_every", 100);
  Rng rng(derive_seed({seed, 0x7a14ULL}));
  double last_loss = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int step = 0; step < steps; ++step) {
    std::vector<policy::Window> batch;
    for (int b = 0; b < tc.batch_windows; ++b) batch.push_back(sampler.sample(rng));
    last_loss = trainer.train_step(batch);
    if (log_every > 0 && (step + 1) % log_every == 0) {
      fprintf(stderr, "train step %d/%d loss %.4f\n", step + 1, steps, last_loss);
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // Teacher-forced next-action accuracy over a sample of windows.
  Rng acc_rng(derive_seed({seed, 0xaccULL}));
  int correct = 0, total = 0;
  for (int i = 0; i < 64; ++i) {
    const auto w = sampler.sample(acc_rng);
    const auto logits = model.forward(w);
    for (int t = 0; t < static_cast<int>(w.steps.size()); ++t) {
      Eigen::Index arg;
      logits.col(t).maxCoeff(&arg);
      correct += (static_cast<int>(arg) == w.steps[t].expert_action) ? 1 : 0;
      ++total;
    }
  }

  const std::string ckpt_path = cfg.at("ckpt").get<std::string>();
  if (const auto parent = fs::path(ckpt_path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  policy::save_checkpoint(policy::make_checkpoint(model, tokenizer, &trainer),
                          ckpt_path);

  json j;
  j["steps"] = steps;
  j["final_loss"] = last_loss;
  j["teacher_forced_accuracy"] = static_cast<double>(correct) / std::max(total, 1);
  j["episodes"] = episodes.size();
  j["params"] = model.allocated_params();
  j["seconds"] = secs;
  j["ckpt"] = ckpt_path;
  return j;
}

json cmd_eval(const json& cfg) {
  validate_keys(cfg, {"ckpt", "baseline", "bench", "report", "seed", "workers",
                      "mode", "temperature", "step_cap", "room_visit_cap",
                      "catalog_dir"});
  std::optional<Catalog> storage;
  const Catalog& catalog = resolve_catalog(cfg, storage);
  if (!cfg.contains("bench")) throw UsageError("eval: 'bench' is required");
  if (cfg.contains("ckpt") == cfg.contains("baseline"))
    throw UsageError("eval: exactly one of 'ckpt' or 'baseline' is required");

  data::BenchmarkSet set;
  set.name = "bench";
  for (auto& e : load_shard_dir(catalog, cfg.at("bench").get<std::string>()))
    set.episodes[e.task.kind].push_back(std::move(e));

  bench::EvalConfig ec;
  ec.seed = cfg.value("seed", 0ULL);
  ec.workers = cfg.value("workers", 0);
  ec.step_cap = cfg.value("step_cap", 600);
  ec.room_visit_cap = cfg.value("room_visit_cap", 1000);

  bench::MetricsReport report;
  if (cfg.contains("baseline")) {
    report = bench::evaluate(catalog, bench::baseline(cfg.at("baseline")), set, ec);
  } else {
    const auto ckpt = policy::load_checkpoint(cfg.at("ckpt").get<std::string>());
    const auto mode = cfg.value("mode", "sample") == "greedy" ? bench::ActMode::Greedy
                                                              : bench::ActMode::Sample;
    const auto factory =
        bench::policy_agent(ckpt, catalog, mode, cfg.value("temperature", 1.0));
    report = bench::evaluate(catalog, factory, set, ec);
  }
  if (cfg.contains("report")) {
    const std::string path = cfg.at("report").get<std::string>();
    if (const auto parent = fs::path(path).parent_path(); !parent.empty())
      fs::create_directories(parent);
    std::ofstream f(path);
    f << report.to_json();
    std::ofstream csv(path + ".csv");
    csv << report.to_csv();
  }
  return json::parse(report.to_json());
}

json cmd_replay(const json& cfg) {
  validate_keys(cfg, {"data", "index", "catalog_dir"});
  std::optional<Catalog> storage;
  const Catalog& catalog = resolve_catalog(cfg, storage);
  if (!cfg.contains("data")) throw UsageError("replay: 'data' is required");
  auto episodes = load_shard_dir(catalog, cfg.at("data").get<std::string>());
  if (cfg.contains("index")) {
    const int idx = cfg.at("index").get<int>();
    if (idx < 0 || idx >= static_cast<int>(episodes.size()))
      throw DataError("replay: index out of range");
    episodes = {episodes[idx]};
  }
  int verified = 0;
  json failures = json::array();
  for (size_t i = 0; i < episodes.size(); ++i) {
    std::string err;
    if (data::replay_verify(catalog, episodes[i], sim::EgoConfig{}, &err)) {
      ++verified;
    } else {
      failures.push_back({{"episode", i}, {"error", err}});
    }
  }
  json j;
  j["episodes"] = episodes.size();
  j["verified"] = verified;
  j["status"] = failures.empty() ? "verified" : "failed";
  if (!failures.empty()) j["failures"] = failures;
  if (!failures.empty()) throw DataError("replay: " + std::to_string(failures.size()) +
                                         " episodes failed verification");
  return j;
}

}  // namespace

CommandResult run_command(const std::string& command, const std::string& config_json) {
  CommandResult out;
  json cfg;
  try {
    cfg = config_json.empty() ? json::object() : json::parse(config_json);
    if (!cfg.is_object()) throw UsageError("config must be a JSON object");
  } catch (const json::parse_error& e) {
    out.status = kUsageError;
    out.error = std::string("config parse error: ") + e.what();
    return out;
  } catch (const UsageError& e) {
    out.status = kUsageError;
    out.error = e.what();
    return out;
  }
  try {
    json result;
    if (command == "gen-houses") result = cmd_gen_houses(cfg);
    else if (command == "gen-episodes") result = cmd_gen_episodes(cfg);
    else if (command == "stats") result = cmd_stats(cfg);
    else if (command == "curate-bench") result = cmd_curate_bench(cfg);
    else if (command == "train") result = cmd_train(cfg);
    else if (command == "eval") result = cmd_eval(cfg);
    else if (command == "replay") result = cmd_replay(cfg);
    else throw UsageError("unknown command: " + command);
    result["command"] = command;
    result["config"] = cfg;  // resolved fingerprint
    out.result_json = result.dump(1);
  } catch (const UsageError& e) {
    out.status = kUsageError;
    out.error = e.what();
  } catch (const DataError& e) {
    out.status = kDataError;
    out.error = e.what();
  } catch (const std::exception& e) {
    out.status = kInternalError;
    out.error = e.what();
  }
  return out;
}

}  // namespace domus::runner
