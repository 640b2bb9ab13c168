#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "domus/experts.hpp"
#include "domus/taskgen.hpp"

namespace domus::data {

using taskgen::TaskKind;
using taskgen::TaskSpec;
using worldgen::Catalog;
using worldgen::House;
using worldgen::Split;

// One step as stored: class-index columns plus 8-bit quantized depth per
// camera, the held flag, ground-truth detections, and the expert action.
struct StoredStep {
  std::vector<uint8_t> nav_cls;
  std::vector<uint8_t> nav_depth;
  std::vector<uint8_t> manip_cls;
  std::vector<uint8_t> manip_depth;
  uint8_t object_in_hand = 0;
  std::array<float, 10> det{};  // nav x1,y1,x2,y2,area then manip
  uint8_t action = 0;

  bool operator==(const StoredStep&) const = default;
};

StoredStep compress_step(const sim::Observation& obs, sim::Action action,
                         const sim::EgoConfig& ego);

struct EpisodeRecord {
  uint32_t schema_version = 1;
  uint64_t house_seed = 0;
  std::string layout_name;  // with house_seed this regenerates the house
  uint64_t gen_seed = 0;
  TaskSpec task;
  std::vector<StoredStep> steps;
  uint32_t expert_length = 0;

  bool operator==(const EpisodeRecord&) const = default;
};

EpisodeRecord record_from_trajectory(const Catalog& catalog, const House& house,
                                     const experts::ExpertTrajectory& traj,
                                     uint64_t gen_seed, const sim::EgoConfig& ego);

// ------------------------------------------------------------------ shards

struct Shard {
  uint32_t version = 1;
  TaskKind kind = TaskKind::ObjectNav;
  Split split = Split::Train;
  uint32_t raster_width = 32;
  std::vector<EpisodeRecord> episodes;
};

// Byte layout documented in docs/formats.md. Checksum is FNV-1a over all
// preceding bytes; read_shard validates it and the version.
void write_shard(const Catalog& catalog, const Shard& shard, const std::string& path);
Shard read_shard(const Catalog& catalog, const std::string& path);

// ------------------------------------------------------------- generation

struct GenConfig {
  std::vector<TaskKind> kinds;
  int houses = 10;            // houses per kind
  int episodes_per_house = 1;
  uint64_t master_seed = 0;
  Split split = Split::Train;
  std::string out_dir;
  int workers = 0;  // 0 = hardware concurrency
  bool exploration_expert = false;
  sim::EgoConfig ego;
  taskgen::SamplerOptions sampler;
  std::vector<std::string> layout_filter;  // restrict layouts by name
  int step_cap = 600;
  int room_visit_cap = 1000;
};

struct GenStats {
  struct PerKind {
    int attempted = 0;  // sampling attempts
    int sampled = 0;    // specs produced
    int retained = 0;   // expert successes
  };
  std::map<TaskKind, PerKind> kinds;
  uint64_t total_sim_steps = 0;
  double expert_seconds = 0.0;
  std::vector<std::string> shard_files;
};

// worldgen -> taskgen -> experts -> shards. Deterministic in (config, seed);
// shard bytes are independent of the worker count.
GenStats generate_dataset(const Catalog& catalog, const GenConfig& config);

// In-memory variant used by tests and training drivers.
GenStats generate_episodes(const Catalog& catalog, const GenConfig& config,
                           std::vector<EpisodeRecord>& out);

// Deterministic 10:1:1 split over house seeds.
struct SplitAssignment {
  std::vector<uint64_t> train, val, test;
};
SplitAssignment split_houses(const std::vector<uint64_t>& seeds);

// The first `count` seeds >= `start` whose split matches.
std::vector<uint64_t> seeds_for_split(uint64_t start, int count, Split split);

// ------------------------------------------------------------- benchmark

struct BenchmarkSet {
  std::string name;
  std::map<TaskKind, std::vector<EpisodeRecord>> episodes;
  bool shortfall = false;  // fewer candidates than the target
};

// Greedy inverse-frequency selection over uniqueness keys
// (kind parameter, synset, hypernym, lemma), deterministic in input order.
BenchmarkSet curate_benchmark(const Catalog& catalog,
                              const std::vector<EpisodeRecord>& candidates,
                              int per_task_target, const std::string& name);

// --------------------------------------------------------------- reports

struct DatasetStats {
  std::map<TaskKind, int> episode_count;
  std::map<TaskKind, uint64_t> frame_count;
  std::vector<int> length_histogram;           // bins of 25 steps
  std::map<int, int> room_count_histogram;     // rooms -> houses
  std::map<std::string, int> synset_frequency;  // target synset id -> episodes
};

DatasetStats dataset_stats(const Catalog& catalog,
                           const std::vector<EpisodeRecord>& episodes);
std::string stats_to_json(const DatasetStats& stats);

// ----------------------------------------------------------------- replay

House rebuild_house(const Catalog& catalog, const std::string& layout_name,
                    uint64_t seed);

// Re-simulates the stored actions and verifies observations and the stored
// success flag bit-exactly.
bool replay_verify(const Catalog& catalog, const EpisodeRecord& record,
                   const sim::EgoConfig& ego, std::string* error = nullptr);

}  // namespace domus::data
