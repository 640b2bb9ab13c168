#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "domus/geometry.hpp"
#include "domus/rng.hpp"

namespace domus::worldgen {

enum class RoomType : uint8_t { Kitchen = 0, Bathroom, LivingRoom, Bedroom };
constexpr int kNumRoomTypes = 4;

const char* room_type_name(RoomType t);
RoomType room_type_from_name(const std::string& name);

struct Affordance {
  std::string description;
  int confidence = 0;  // 0..10
};

struct Synset {
  std::string id;  // e.g. "mug.n.01"
  std::vector<std::string> lemmas;
  int hypernym = -1;  // index into taxonomy, -1 only for the root
  std::vector<Affordance> affordances;
  bool pickupable_class = false;
};

// Hypernym taxonomy over the catalog synsets. Single parent per node,
// rooted at index 0.
class Taxonomy {
 public:
  explicit Taxonomy(std::vector<Synset> synsets);

  int size() const { return static_cast<int>(synsets_.size()); }
  const Synset& at(int idx) const { return synsets_.at(idx); }
  int index_of(const std::string& id) const;
  int find(const std::string& id) const;  // -1 if absent
  int root() const { return 0; }
  int depth(int idx) const { return depth_.at(idx); }

  bool is_ancestor_or_self(int ancestor, int node) const;

  // Deepest synset that is an ancestor-or-self of every input.
  int lowest_common_hypernym(const std::vector<int>& nodes) const;

  // Proper ancestors of `node`, nearest first, excluding the root.
  std::vector<int> proper_ancestors(int node) const;

  // Most precise lemma for a synset: the lemma used by the fewest other
  // synsets in the catalog (first lemma wins ties).
  const std::string& primary_lemma(int idx) const;

 private:
  std::vector<Synset> synsets_;
  std::vector<int> depth_;
  std::vector<std::string> primary_lemma_;
  std::unordered_map<std::string, int> by_id_;
};

enum class Placement : uint8_t { Floor = 0, Surface, Either };

struct AssetClass {
  std::string id;  // e.g. "vase_tall"
  int synset = -1;
  Vec3 dims;  // dx, dy, dz metres (z up)
  Placement placement = Placement::Floor;
  bool pickupable = false;
  bool supporter = false;    // other objects may rest on its top face
  bool against_wall = false;  // placed flush against a wall
  std::array<double, kNumRoomTypes> room_weight = {0, 0, 0, 0};  // expected count per room
  std::string description;  // open-vocabulary instance description, may be empty
};

struct LayoutNode {
  // Leaf iff children empty; then room_type is meaningful.
  RoomType room_type = RoomType::Kitchen;
  double area_weight = 1.0;
  std::vector<LayoutNode> children;

  bool is_leaf() const { return children.empty(); }
  int leaf_count() const;
};

struct LayoutSpec {
  std::string name;
  double frequency = 0.0;
  LayoutNode root;
};

struct Catalog {
  int version = 0;
  Taxonomy taxonomy;
  std::vector<AssetClass> assets;
  // Per asset: allowed supporter asset indices; empty means any supporter.
  std::vector<std::vector<int>> supporter_pref;
  std::vector<LayoutSpec> layouts;

  const AssetClass& asset(int idx) const { return assets.at(idx); }
  int asset_index(const std::string& id) const;
  // Raster class channel for a synset: 0 = free, 1 = wall, 2+i = synset i.
  int class_channel(int synset) const { return 2 + synset; }
  int num_class_channels() const { return 2 + taxonomy.size(); }
};

// Parses the two catalog files (JSON text). Throws std::runtime_error with a
// description on schema violations.
Catalog load_catalog(const std::string& assets_json, const std::string& layouts_json);

// Catalog compiled into the library from data/catalog/.
const Catalog& builtin_catalog();

// Reads both files from a directory holding assets.json and layouts.json.
Catalog load_catalog_dir(const std::string& dir);

struct Room {
  int id = -1;
  RoomType type = RoomType::Kitchen;
  Rect rect;  // rectilinear region
  Vec2 center() const { return rect.center(); }
};

struct Door {
  int room_a = -1;
  int room_b = -1;
  bool vertical = false;  // true: wall at x = at, opening spans y in [lo, hi]
  double at = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct ObjectInstance {
  int id = -1;
  int asset = -1;   // catalog asset index
  int synset = -1;  // taxonomy index
  Vec3 position;    // bbox center
  Vec3 dims;        // bbox full dims as placed (dx/dy may be swapped by rotation)
  int room = -1;
  int on_top_of = -1;  // object id of the supporter, -1 if on the floor
  bool pickupable = false;

  double top() const { return position.z + dims.z * 0.5; }
  double bottom() const { return position.z - dims.z * 0.5; }
  Rect footprint() const {
    return {{position.x - dims.x * 0.5, position.y - dims.y * 0.5},
            {position.x + dims.x * 0.5, position.y + dims.y * 0.5}};
  }
  double diagonal() const {
    return std::sqrt(dims.x * dims.x + dims.y * dims.y + dims.z * dims.z);
  }
};

enum class Split : uint8_t { Train = 0, Val, Test };
const char* split_name(Split s);

struct House {
  uint64_t seed = 0;
  std::string layout_name;
  Split split = Split::Train;
  Rect footprint;
  std::vector<Room> rooms;
  std::vector<Door> doors;
  std::vector<ObjectInstance> objects;

  const ObjectInstance& object_by_id(int id) const { return objects.at(id); }
  int room_at(Vec2 p) const;  // -1 if outside every room
};

// Wall segments with door openings removed; shared by collision and
// rendering. Built once per house.
struct WallSet {
  std::vector<Segment> segments;
};

WallSet build_walls(const House& house);

// Deterministic 10:1:1 split by house seed hash.
Split split_for_seed(uint64_t seed);

// Draws one layout spec with probability equal to its frequency.
const LayoutSpec& sample_layout(const Catalog& catalog, Rng& rng);

// Generates the house for (spec, seed). Deterministic in its arguments.
// Throws std::runtime_error when placement remains infeasible after the
// bounded retry budget.
House realize_house(const Catalog& catalog, const LayoutSpec& spec, uint64_t seed);

// Layout draw + realize, both derived from `seed` alone.
House generate_house(const Catalog& catalog, uint64_t seed);

// All objects whose synset equals `synset` or descends from it.
std::vector<int> referable_objects(const Catalog& catalog, const House& house, int synset);

// JSON export/import, one house per document.
std::string house_to_json(const Catalog& catalog, const House& house);
House house_from_json(const Catalog& catalog, const std::string& text);

}  // namespace domus::worldgen
