// domus command line: procedural houses, expert imitation datasets, policy
// training, and benchmark evaluation over the libdomusc C API.
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "domus/domus_c.h"

using nlohmann::json;

namespace {

std::string data_root() {
  const char* env = std::getenv("DOMUS_DATA_ROOT");
  return env && *env ? env : "data";
}

// Flags override same-named keys from --config.
json merge_config(const std::string& config_file, const json& flags) {
  json cfg = json::object();
  if (!config_file.empty()) {
    FILE* f = std::fopen(config_file.c_str(), "rb");
    if (!f) {
      fprintf(stderr, "error: cannot open config file %s\n", config_file.c_str());
      std::exit(1);
    }
    std::string text;
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
    std::fclose(f);
    cfg = json::parse(text);
  }
  for (const auto& [k, v] : flags.items()) cfg[k] = v;
  return cfg;
}

int run(const std::string& command, const json& cfg) {
  domus_ctx* ctx = domus_ctx_create(nullptr);
  if (!ctx) {
    fprintf(stderr, "error: out of memory\n");
    return 3;
  }
  const char* result = nullptr;
  const std::string text = cfg.dump();
  fprintf(stderr, "[domus] %s %s\n", command.c_str(), text.c_str());
  const domus_status status = domus_run(ctx, command.c_str(), text.c_str(), &result);
  int rc = static_cast<int>(status);
  if (status == DOMUS_OK) {
    printf("%s\n", result);
  } else {
    json err;
    err["command"] = command;
    err["status"] = rc;
    err["error"] = domus_last_error(ctx);
    fprintf(stderr, "%s\n", err.dump().c_str());
  }
  domus_ctx_destroy(ctx);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("domus pipeline (") + domus_version() + ")"};
  app.require_subcommand(1);

  std::string config_file;

  // gen-houses
  auto* gh = app.add_subcommand("gen-houses", "generate houses as JSON files");
  int gh_count = 10;
  uint64_t gh_seed = 0;
  std::string gh_out = data_root() + "/houses";
  gh->add_option("--count", gh_count);
  gh->add_option("--seed", gh_seed);
  gh->add_option("--out", gh_out);
  gh->add_option("--config", config_file);

  // gen-episodes
  auto* ge = app.add_subcommand("gen-episodes", "generate expert episode shards");
  std::vector<std::string> ge_kinds;
  int ge_houses = 10, ge_episodes = 1, ge_workers = 0;
  uint64_t ge_seed = 0;
  std::string ge_out = data_root() + "/shards";
  std::string ge_split = "train";
  bool ge_micro = false, ge_exploration = false;
  ge->add_option("--kind", ge_kinds, "task kinds (default all)");
  ge->add_option("--houses", ge_houses);
  ge->add_option("--episodes", ge_episodes, "episodes per house per kind");
  ge->add_option("--seed", ge_seed);
  ge->add_option("--out", ge_out);
  ge->add_option("--split", ge_split);
  ge->add_option("--workers", ge_workers);
  ge->add_flag("--micro", ge_micro, "micro preset: small houses, 10 target synsets");
  ge->add_flag("--exploration", ge_exploration, "exploration planner for object-nav");
  ge->add_option("--config", config_file);

  // stats
  auto* st = app.add_subcommand("stats", "dataset statistics report");
  std::string st_data = data_root() + "/shards", st_out;
  st->add_option("--data", st_data);
  st->add_option("--out", st_out);
  st->add_option("--config", config_file);

  // curate-bench
  auto* cb = app.add_subcommand("curate-bench", "curate a benchmark from eval shards");
  std::string cb_data, cb_out = data_root() + "/bench";
  int cb_per_task = 195;
  cb->add_option("--data", cb_data)->required();
  cb->add_option("--out", cb_out);
  cb->add_option("--per-task", cb_per_task);
  cb->add_option("--config", config_file);

  // train
  auto* tr = app.add_subcommand("train", "behavior-clone a policy from shards");
  std::string tr_data = data_root() + "/shards";
  std::string tr_ckpt = data_root() + "/ckpt/policy.ckpt";
  std::string tr_preset = "micro";
  int tr_steps = 1000, tr_batch = 8, tr_threads = 1;
  uint64_t tr_seed = 0;
  double tr_lr = 2e-4;
  bool tr_detect = false;
  tr->add_option("--data", tr_data);
  tr->add_option("--ckpt", tr_ckpt);
  tr->add_option("--preset", tr_preset, "micro|paper");
  tr->add_option("--steps", tr_steps);
  tr->add_option("--batch", tr_batch);
  tr->add_option("--threads", tr_threads);
  tr->add_option("--seed", tr_seed);
  tr->add_option("--lr", tr_lr);
  tr->add_flag("--detect", tr_detect, "use ground-truth detection tokens");
  tr->add_option("--config", config_file);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a policy or baseline");
  std::string ev_ckpt, ev_baseline, ev_bench = data_root() + "/bench";
  std::string ev_report = data_root() + "/reports/report.json";
  std::string ev_mode = "sample";
  int ev_workers = 0;
  uint64_t ev_seed = 0;
  ev->add_option("--ckpt", ev_ckpt);
  ev->add_option("--baseline", ev_baseline, "random|expert_replay|always_terminate");
  ev->add_option("--bench", ev_bench);
  ev->add_option("--report", ev_report);
  ev->add_option("--mode", ev_mode, "sample|greedy");
  ev->add_option("--workers", ev_workers);
  ev->add_option("--seed", ev_seed);
  ev->add_option("--config", config_file);

  // replay
  auto* rp = app.add_subcommand("replay", "re-simulate episodes and verify");
  std::string rp_data;
  int rp_index = -1;
  rp->add_option("--data", rp_data)->required();
  rp->add_option("--index", rp_index, "episode index (default: all)");
  rp->add_option("--config", config_file);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gh->parsed()) {
      json f{{"count", gh_count}, {"seed", gh_seed}, {"out", gh_out}};
      return run("gen-houses", merge_config(config_file, f));
    }
    if (ge->parsed()) {
      json f{{"houses", ge_houses}, {"episodes", ge_episodes}, {"seed", ge_seed},
             {"out", ge_out},       {"split", ge_split},       {"workers", ge_workers}};
      if (!ge_kinds.empty()) f["kinds"] = ge_kinds;
      if (ge_micro) f["micro"] = true;
      if (ge_exploration) f["exploration"] = true;
      return run("gen-episodes", merge_config(config_file, f));
    }
    if (st->parsed()) {
      json f{{"data", st_data}};
      if (!st_out.empty()) f["out"] = st_out;
      return run("stats", merge_config(config_file, f));
    }
    if (cb->parsed()) {
      json f{{"data", cb_data}, {"out", cb_out}, {"per_task", cb_per_task}};
      return run("curate-bench", merge_config(config_file, f));
    }
    if (tr->parsed()) {
      json f{{"data", tr_data},     {"ckpt", tr_ckpt}, {"preset", tr_preset},
             {"steps", tr_steps},   {"batch", tr_batch}, {"threads", tr_threads},
             {"seed", tr_seed},     {"lr", tr_lr}};
      if (tr_detect) f["detect"] = true;
      return run("train", merge_config(config_file, f));
    }
    if (ev->parsed()) {
      json f{{"bench", ev_bench}, {"report", ev_report}, {"mode", ev_mode},
             {"workers", ev_workers}, {"seed", ev_seed}};
      if (!ev_ckpt.empty()) f["ckpt"] = ev_ckpt;
      if (!ev_baseline.empty()) f["baseline"] = ev_baseline;
      return run("eval", merge_config(config_file, f));
    }
    if (rp->parsed()) {
      json f{{"data", rp_data}};
      if (rp_index >= 0) f["index"] = rp_index;
      return run("replay", merge_config(config_file, f));
    }
  } catch (const std::exception& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 1;
}
