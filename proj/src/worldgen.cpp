#include "domus/worldgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "domus/navgrid.hpp"

namespace domus::worldgen {

using nlohmann::json;

namespace {

constexpr double kGrid = 0.05;        // rectilinear discretization
constexpr double kMinRoomSide = 1.35;
constexpr double kDoorWidth = 0.9;
constexpr double kDoorMargin = 0.15;  // keep-out from wall corners
constexpr double kDoorClear = 0.70;   // furniture keep-out in front of doors
constexpr double kWallMargin = 0.03;
constexpr int kHouseAttempts = 12;

double snap(double v) { return std::round(v / kGrid) * kGrid; }

}  // namespace

const char* room_type_name(RoomType t) {
  switch (t) {
    case RoomType::Kitchen: return "kitchen";
    case RoomType::Bathroom: return "bathroom";
    case RoomType::LivingRoom: return "living_room";
    case RoomType::Bedroom: return "bedroom";
  }
  return "?";
}

RoomType room_type_from_name(const std::string& name) {
  for (int i = 0; i < kNumRoomTypes; ++i) {
    if (name == room_type_name(static_cast<RoomType>(i)))
      return static_cast<RoomType>(i);
  }
  throw std::runtime_error("unknown room type: " + name);
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_for_seed(uint64_t seed) {
  const uint64_t h = mix64(seed ^ 0x5157a11edb01cafeULL) % 12;
  if (h < 10) return Split::Train;
  return h == 10 ? Split::Val : Split::Test;
}

// ---------------------------------------------------------------- Taxonomy

Taxonomy::Taxonomy(std::vector<Synset> synsets) : synsets_(std::move(synsets)) {
  if (synsets_.empty()) throw std::runtime_error("taxonomy: empty");
  for (size_t i = 0; i < synsets_.size(); ++i) {
    if (synsets_[i].lemmas.empty())
      throw std::runtime_error("taxonomy: synset without lemma: " + synsets_[i].id);
    if (!by_id_.emplace(synsets_[i].id, static_cast<int>(i)).second)
      throw std::runtime_error("taxonomy: duplicate synset id: " + synsets_[i].id);
  }
  if (synsets_[0].hypernym != -1)
    throw std::runtime_error("taxonomy: first synset must be the root");
  depth_.assign(synsets_.size(), -1);
  depth_[0] = 0;
  for (size_t i = 0; i < synsets_.size(); ++i) {
    // Walk to a resolved ancestor; bounded by size to catch cycles.
    int steps = 0;
    std::vector<int> chain;
    int cur = static_cast<int>(i);
    while (depth_[cur] < 0) {
      chain.push_back(cur);
      cur = synsets_[cur].hypernym;
      if (cur < 0 || ++steps > size())
        throw std::runtime_error("taxonomy: broken hypernym chain at " + synsets_[i].id);
    }
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      depth_[*it] = depth_[synsets_[*it].hypernym] + 1;
    }
  }
  // Lemma precision: prefer the lemma shared with the fewest synsets.
  std::unordered_map<std::string, int> lemma_count;
  for (const auto& s : synsets_)
    for (const auto& l : s.lemmas) ++lemma_count[l];
  primary_lemma_.resize(synsets_.size());
  for (size_t i = 0; i < synsets_.size(); ++i) {
    const std::string* best = &synsets_[i].lemmas[0];
    int best_count = lemma_count[*best];
    for (const auto& l : synsets_[i].lemmas) {
      if (lemma_count[l] < best_count) {
        best = &l;
        best_count = lemma_count[l];
      }
    }
    primary_lemma_[i] = *best;
  }
}

int Taxonomy::index_of(const std::string& id) const {
  const int idx = find(id);
  if (idx < 0) throw std::runtime_error("unknown synset: " + id);
  return idx;
}

int Taxonomy::find(const std::string& id) const {
  const auto it = by_id_.find(id);
  return it == by_id_.end() ? -1 : it->second;
}

bool Taxonomy::is_ancestor_or_self(int ancestor, int node) const {
  while (node >= 0) {
    if (node == ancestor) return true;
    node = synsets_[node].hypernym;
  }
  return false;
}

int Taxonomy::lowest_common_hypernym(const std::vector<int>& nodes) const {
  if (nodes.empty()) throw std::runtime_error("lowest_common_hypernym: empty set");
  int lca = nodes[0];
  for (size_t i = 1; i < nodes.size(); ++i) {
    int a = lca, b = nodes[i];
    while (depth_[a] > depth_[b]) a = synsets_[a].hypernym;
    while (depth_[b] > depth_[a]) b = synsets_[b].hypernym;
    while (a != b) {
      a = synsets_[a].hypernym;
      b = synsets_[b].hypernym;
    }
    lca = a;
  }
  return lca;
}

std::vector<int> Taxonomy::proper_ancestors(int node) const {
  std::vector<int> out;
  int cur = synsets_.at(node).hypernym;
  while (cur > 0) {  // root (0) excluded
    out.push_back(cur);
    cur = synsets_[cur].hypernym;
  }
  return out;
}

const std::string& Taxonomy::primary_lemma(int idx) const {
  return primary_lemma_.at(idx);
}

// ----------------------------------------------------------------- Catalog

int LayoutNode::leaf_count() const {
  if (is_leaf()) return 1;
  int n = 0;
  for (const auto& c : children) n += c.leaf_count();
  return n;
}

int Catalog::asset_index(const std::string& id) const {
  for (size_t i = 0; i < assets.size(); ++i)
    if (assets[i].id == id) return static_cast<int>(i);
  throw std::runtime_error("unknown asset: " + id);
}

namespace {

double parse_frequency(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  const auto slash = s.find('/');
  if (slash == std::string::npos) return std::stod(s);
  const double num = std::stod(s.substr(0, slash));
  const double den = std::stod(s.substr(slash + 1));
  if (den == 0.0) throw std::runtime_error("layout frequency with zero denominator");
  return num / den;
}

LayoutNode parse_layout_node(const json& j) {
  if (!j.is_array() || j.size() < 2)
    throw std::runtime_error("layout node must be [kind, weight(, children)]");
  LayoutNode n;
  const std::string kind = j[0].get<std::string>();
  n.area_weight = j[1].get<double>();
  if (!(n.area_weight > 0.0))
    throw std::runtime_error("layout node weight must be positive");
  if (kind == "group") {
    if (j.size() != 3 || !j[2].is_array() || j[2].empty())
      throw std::runtime_error("group node needs a nonempty child list");
    for (const auto& c : j[2]) n.children.push_back(parse_layout_node(c));
  } else {
    n.room_type = room_type_from_name(kind);
  }
  return n;
}

Placement parse_placement(const std::string& s) {
  if (s == "floor") return Placement::Floor;
  if (s == "surface") return Placement::Surface;
  if (s == "either") return Placement::Either;
  throw std::runtime_error("unknown placement: " + s);
}

}  // namespace

Catalog load_catalog(const std::string& assets_json, const std::string& layouts_json) {
  const json ja = json::parse(assets_json);
  const json jl = json::parse(layouts_json);
  if (ja.value("schema", "") != "domus.assets")
    throw std::runtime_error("assets file: bad schema marker");
  if (jl.value("schema", "") != "domus.layouts")
    throw std::runtime_error("layouts file: bad schema marker");
  const int va = ja.at("version").get<int>();
  const int vl = jl.at("version").get<int>();
  if (va != vl)
    throw std::runtime_error("catalog version mismatch between assets and layouts");

  std::vector<Synset> synsets;
  std::unordered_map<std::string, int> syn_index;
  for (const auto& js : ja.at("synsets")) {
    Synset s;
    s.id = js.at("id").get<std::string>();
    for (const auto& l : js.at("lemmas")) s.lemmas.push_back(l.get<std::string>());
    if (js.at("hypernym").is_null()) {
      s.hypernym = -1;
    } else {
      const auto it = syn_index.find(js.at("hypernym").get<std::string>());
      if (it == syn_index.end())
        throw std::runtime_error("synset " + s.id + ": hypernym must be declared earlier");
      s.hypernym = it->second;
    }
    s.pickupable_class = js.value("pickupable", false);
    for (const auto& aff : js.value("affordances", json::array())) {
      Affordance a{aff.at(0).get<std::string>(), aff.at(1).get<int>()};
      if (a.confidence < 0 || a.confidence > 10)
        throw std::runtime_error("affordance confidence out of [0,10] on " + s.id);
      s.affordances.push_back(std::move(a));
    }
    syn_index.emplace(s.id, static_cast<int>(synsets.size()));
    synsets.push_back(std::move(s));
  }

  Catalog cat{va, Taxonomy(std::move(synsets)), {}, {}, {}};

  for (const auto& jair : ja.at("assets")) {
    AssetClass a;
    a.id = jair.at("id").get<std::string>();
    a.synset = cat.taxonomy.index_of(jair.at("synset").get<std::string>());
    const auto& d = jair.at("dims");
    a.dims = {d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>()};
    a.placement = parse_placement(jair.value("placement", "floor"));
    a.pickupable = jair.value("pickupable", false);
    if (a.pickupable && !cat.taxonomy.at(a.synset).pickupable_class)
      throw std::runtime_error("asset " + a.id + ": pickupable but synset class is not");
    a.supporter = jair.value("supporter", false);
    a.against_wall = jair.value("against_wall", false);
    for (const auto& [room, w] : jair.at("rooms").items())
      a.room_weight[static_cast<int>(room_type_from_name(room))] = w.get<double>();
    a.description = jair.value("description", "");
    cat.assets.push_back(std::move(a));
  }
  // Resolve "on" preference lists after all assets exist.
  std::vector<std::vector<std::string>> on_lists(cat.assets.size());
  {
    size_t i = 0;
    for (const auto& jair : ja.at("assets")) {
      for (const auto& s : jair.value("on", json::array()))
        on_lists[i].push_back(s.get<std::string>());
      ++i;
    }
  }
  cat.supporter_pref.resize(cat.assets.size());
  for (size_t i = 0; i < cat.assets.size(); ++i)
    for (const auto& name : on_lists[i])
      cat.supporter_pref[i].push_back(cat.asset_index(name));

  for (const auto& jls : jl.at("layouts")) {
    LayoutSpec spec;
    spec.name = jls.at("name").get<std::string>();
    spec.frequency = parse_frequency(jls.at("frequency"));
    if (!(spec.frequency > 0.0))
      throw std::runtime_error("layout " + spec.name + ": frequency must be positive");
    spec.root = parse_layout_node(jls.at("root"));
    cat.layouts.push_back(std::move(spec));
  }
  if (cat.layouts.empty()) throw std::runtime_error("layout catalog is empty");
  return cat;
}

const char* embedded_assets_json();
const char* embedded_layouts_json();

const Catalog& builtin_catalog() {
  static const Catalog cat =
      load_catalog(embedded_assets_json(), embedded_layouts_json());
  return cat;
}

Catalog load_catalog_dir(const std::string& dir) {
  auto slurp = [](const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string out;
    char buf[65536];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
    std::fclose(f);
    return out;
  };
  return load_catalog(slurp(dir + "/assets.json"), slurp(dir + "/layouts.json"));
}

// ------------------------------------------------------------------- House

int House::room_at(Vec2 p) const {
  for (const auto& r : rooms)
    if (r.rect.contains_closed(p)) return r.id;
  return -1;
}

const LayoutSpec& sample_layout(const Catalog& catalog, Rng& rng) {
  std::vector<double> w;
  w.reserve(catalog.layouts.size());
  for (const auto& l : catalog.layouts) w.push_back(l.frequency);
  return catalog.layouts[rng.weighted_index(w)];
}

namespace {

struct Adjacency {
  int a, b;
  bool vertical;   // shared wall at x = at (else y = at)
  double at, lo, hi;
};

std::vector<Adjacency> find_adjacencies(const std::vector<Room>& rooms) {
  std::vector<Adjacency> out;
  for (size_t i = 0; i < rooms.size(); ++i) {
    for (size_t j = i + 1; j < rooms.size(); ++j) {
      const Rect& a = rooms[i].rect;
      const Rect& b = rooms[j].rect;
      // Vertical shared wall.
      if (a.hi.x == b.lo.x || b.hi.x == a.lo.x) {
        const double at = (a.hi.x == b.lo.x) ? a.hi.x : b.hi.x;
        const double lo = std::max(a.lo.y, b.lo.y);
        const double hi = std::min(a.hi.y, b.hi.y);
        if (hi > lo)
          out.push_back({static_cast<int>(i), static_cast<int>(j), true, at, lo, hi});
      }
      if (a.hi.y == b.lo.y || b.hi.y == a.lo.y) {
        const double at = (a.hi.y == b.lo.y) ? a.hi.y : b.hi.y;
        const double lo = std::max(a.lo.x, b.lo.x);
        const double hi = std::min(a.hi.x, b.hi.x);
        if (hi > lo)
          out.push_back({static_cast<int>(i), static_cast<int>(j), false, at, lo, hi});
      }
    }
  }
  return out;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

// Weight-balanced binary guillotine of `rect` over the node's children.
void partition_node(const LayoutNode& node, Rect rect, Rng& rng,
                    std::vector<Room>& rooms, bool& failed) {
  if (failed) return;
  if (node.is_leaf()) {
    if (rect.width() < kMinRoomSide || rect.height() < kMinRoomSide) {
      failed = true;
      return;
    }
    Room r;
    r.id = static_cast<int>(rooms.size());
    r.type = node.room_type;
    r.rect = rect;
    rooms.push_back(r);
    return;
  }
  std::vector<const LayoutNode*> kids;
  for (const auto& c : node.children) kids.push_back(&c);
  rng.shuffle(kids);

  // Recursive halving keeps every child's area share exact while the cuts
  // follow the longer side for sane aspect ratios.
  struct Frame {
    std::vector<const LayoutNode*> nodes;
    Rect rect;
  };
  std::vector<Frame> stack{{std::move(kids), rect}};
  while (!stack.empty() && !failed) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (f.nodes.size() == 1) {
      partition_node(*f.nodes[0], f.rect, rng, rooms, failed);
      continue;
    }
    double total = 0.0;
    for (const auto* n : f.nodes) total += n->area_weight;
    // Split the list where the weight halves most evenly.
    double best_diff = 1e300;
    size_t cut_index = 1;
    double acc = 0.0;
    for (size_t i = 0; i + 1 < f.nodes.size(); ++i) {
      acc += f.nodes[i]->area_weight;
      const double diff = std::abs(acc - (total - acc));
      if (diff < best_diff) {
        best_diff = diff;
        cut_index = i + 1;
      }
    }
    double left_w = 0.0;
    for (size_t i = 0; i < cut_index; ++i) left_w += f.nodes[i]->area_weight;
    const double frac = left_w / total;

    const bool cut_x = f.rect.width() >= f.rect.height();
    Rect rl = f.rect, rr = f.rect;
    if (cut_x) {
      const double cut = snap(f.rect.lo.x + f.rect.width() * frac);
      if (cut - f.rect.lo.x < kMinRoomSide || f.rect.hi.x - cut < kMinRoomSide) {
        failed = true;
        break;
      }
      rl.hi.x = cut;
      rr.lo.x = cut;
    } else {
      const double cut = snap(f.rect.lo.y + f.rect.height() * frac);
      if (cut - f.rect.lo.y < kMinRoomSide || f.rect.hi.y - cut < kMinRoomSide) {
        failed = true;
        break;
      }
      rl.hi.y = cut;
      rr.lo.y = cut;
    }
    Frame left{{f.nodes.begin(), f.nodes.begin() + cut_index}, rl};
    Frame right{{f.nodes.begin() + cut_index, f.nodes.end()}, rr};
    stack.push_back(std::move(right));
    stack.push_back(std::move(left));
  }
}

bool place_doors(const std::vector<Room>& rooms, Rng& rng, std::vector<Door>& doors) {
  auto adj = find_adjacencies(rooms);
  std::vector<Adjacency> usable;
  for (const auto& a : adj)
    if (a.hi - a.lo >= kDoorWidth + 2 * kDoorMargin) usable.push_back(a);
  rng.shuffle(usable);
  UnionFind uf(static_cast<int>(rooms.size()));
  std::vector<const Adjacency*> chosen;
  for (const auto& a : usable)
    if (uf.unite(a.a, a.b)) chosen.push_back(&a);
  int components = 0;
  for (size_t i = 0; i < rooms.size(); ++i)
    if (uf.find(static_cast<int>(i)) == static_cast<int>(i)) ++components;
  if (components != 1) return false;
  // A few extra doors beyond the spanning tree create loops.
  for (const auto& a : usable) {
    const bool in_tree =
        std::find(chosen.begin(), chosen.end(), &a) != chosen.end();
    if (!in_tree && rng.chance(0.15)) chosen.push_back(&a);
  }
  for (const auto* a : chosen) {
    const double lo_min = a->lo + kDoorMargin;
    const double lo_max = a->hi - kDoorMargin - kDoorWidth;
    const double t = snap(rng.uniform(lo_min, lo_max));
    Door d;
    d.room_a = a->a;
    d.room_b = a->b;
    d.vertical = a->vertical;
    d.at = a->at;
    d.lo = std::max(t, lo_min);
    d.hi = d.lo + kDoorWidth;
    doors.push_back(d);
  }
  return true;
}

struct PlacementState {
  std::vector<Rect> blocked;   // furniture footprints (inflated at query time)
  std::vector<Rect> reserved;  // door clearances and the room-center pad
};

bool rect_clear(const Rect& r, const PlacementState& st, const Rect& room,
                bool respect_reserved) {
  if (r.lo.x < room.lo.x + kWallMargin || r.hi.x > room.hi.x - kWallMargin ||
      r.lo.y < room.lo.y + kWallMargin || r.hi.y > room.hi.y - kWallMargin)
    return false;
  for (const auto& b : st.blocked)
    if (r.overlaps(b.inflated(0.05))) return false;
  if (respect_reserved)
    for (const auto& b : st.reserved)
      if (r.overlaps(b)) return false;
  return true;
}

void place_objects(const Catalog& catalog, House& house, Rng& rng) {
  for (const auto& room : house.rooms) {
    PlacementState st;
    // Keep door approaches and the room center walkable.
    for (const auto& d : house.doors) {
      if (d.room_a != room.id && d.room_b != room.id) continue;
      if (d.vertical)
        st.reserved.push_back(
            {{d.at - kDoorClear, d.lo - 0.45}, {d.at + kDoorClear, d.hi + 0.45}});
      else
        st.reserved.push_back(
            {{d.lo - 0.45, d.at - kDoorClear}, {d.hi + 0.45, d.at + kDoorClear}});
    }
    const Vec2 c = room.center();
    st.reserved.push_back({{c.x - 0.55, c.y - 0.55}, {c.x + 0.55, c.y + 0.55}});

    const int type = static_cast<int>(room.type);
    std::vector<int> placed_here;  // object ids in this room

    auto instance_count = [&](const AssetClass& a) {
      const double w = a.room_weight[type];
      if (w <= 0.0) return 0;
      return static_cast<int>(w) + (rng.uniform() < (w - std::floor(w)) ? 1 : 0);
    };

    // Floor furniture first.
    for (size_t ai = 0; ai < catalog.assets.size(); ++ai) {
      const AssetClass& a = catalog.assets[ai];
      if (a.placement != Placement::Floor) continue;
      const int n = instance_count(a);
      for (int k = 0; k < n; ++k) {
        for (int attempt = 0; attempt < 24; ++attempt) {
          double dx = a.dims.x, dy = a.dims.y;
          Vec2 pos;
          if (a.against_wall) {
            const int side = rng.uniform_index(4);
            // dy is the depth axis facing away from the wall.
            if (side >= 2) std::swap(dx, dy);
            const double hx = dx * 0.5, hy = dy * 0.5;
            switch (side) {
              case 0:  // south wall
                pos = {rng.uniform(room.rect.lo.x + hx + kWallMargin,
                                   room.rect.hi.x - hx - kWallMargin),
                       room.rect.lo.y + hy + kWallMargin + 0.01};
                break;
              case 1:  // north wall
                pos = {rng.uniform(room.rect.lo.x + hx + kWallMargin,
                                   room.rect.hi.x - hx - kWallMargin),
                       room.rect.hi.y - hy - kWallMargin - 0.01};
                break;
              case 2:  // west wall
                pos = {room.rect.lo.x + hx + kWallMargin + 0.01,
                       rng.uniform(room.rect.lo.y + hy + kWallMargin,
                                   room.rect.hi.y - hy - kWallMargin)};
                break;
              default:  // east wall
                pos = {room.rect.hi.x - hx - kWallMargin - 0.01,
                       rng.uniform(room.rect.lo.y + hy + kWallMargin,
                                   room.rect.hi.y - hy - kWallMargin)};
                break;
            }
          } else {
            if (rng.chance(0.5)) std::swap(dx, dy);
            const double hx = dx * 0.5, hy = dy * 0.5;
            if (room.rect.width() < 2 * (hx + kWallMargin) + 0.01 ||
                room.rect.height() < 2 * (hy + kWallMargin) + 0.01)
              break;
            pos = {rng.uniform(room.rect.lo.x + hx + kWallMargin,
                               room.rect.hi.x - hx - kWallMargin),
                   rng.uniform(room.rect.lo.y + hy + kWallMargin,
                               room.rect.hi.y - hy - kWallMargin)};
          }
          // Keep a walkable passage: obstacles may not span the room on
          // either axis once the planner's inflation is added.
          if (room.rect.width() - dx < 0.85 || room.rect.height() - dy < 0.85)
            continue;
          const Rect fp{{pos.x - dx * 0.5, pos.y - dy * 0.5},
                        {pos.x + dx * 0.5, pos.y + dy * 0.5}};
          if (!rect_clear(fp, st, room.rect, true)) continue;
          ObjectInstance obj;
          obj.id = static_cast<int>(house.objects.size());
          obj.asset = static_cast<int>(ai);
          obj.synset = a.synset;
          obj.position = {pos.x, pos.y, a.dims.z * 0.5};
          obj.dims = {dx, dy, a.dims.z};
          obj.room = room.id;
          obj.pickupable = a.pickupable;
          st.blocked.push_back(fp);
          placed_here.push_back(obj.id);
          house.objects.push_back(obj);
          break;
        }
      }
    }

    // Small objects on supporters or the floor.
    for (size_t ai = 0; ai < catalog.assets.size(); ++ai) {
      const AssetClass& a = catalog.assets[ai];
      if (a.placement == Placement::Floor) continue;
      const int n = instance_count(a);
      for (int k = 0; k < n; ++k) {
        // Candidate supporters in this room.
        std::vector<int> supporters;
        for (int oid : placed_here) {
          const ObjectInstance& s = house.objects[oid];
          const AssetClass& sa = catalog.assets[s.asset];
          if (!sa.supporter) continue;
          if (!catalog.supporter_pref[ai].empty()) {
            const auto& pref = catalog.supporter_pref[ai];
            if (std::find(pref.begin(), pref.end(), s.asset) == pref.end()) continue;
          }
          if (s.dims.x < a.dims.x + 0.04 || s.dims.y < a.dims.y + 0.04) continue;
          supporters.push_back(oid);
        }
        const bool want_surface =
            a.placement == Placement::Surface ||
            (a.placement == Placement::Either && !supporters.empty() && rng.chance(0.6));
        bool done = false;
        if (want_surface && !supporters.empty()) {
          const int sid = supporters[rng.uniform_index(supporters.size())];
          const ObjectInstance& sup = house.objects[sid];
          const Rect top = sup.footprint();
          for (int attempt = 0; attempt < 12 && !done; ++attempt) {
            const double hx = a.dims.x * 0.5, hy = a.dims.y * 0.5;
            const Vec2 pos{rng.uniform(top.lo.x + hx + 0.02, top.hi.x - hx - 0.02),
                           rng.uniform(top.lo.y + hy + 0.02, top.hi.y - hy - 0.02)};
            const Rect fp{{pos.x - hx, pos.y - hy}, {pos.x + hx, pos.y + hy}};
            bool clear = true;
            for (int oid : placed_here) {
              const ObjectInstance& other = house.objects[oid];
              if (other.on_top_of == sid && other.footprint().overlaps(fp.inflated(0.01))) {
                clear = false;
                break;
              }
            }
            if (!clear) continue;
            ObjectInstance obj;
            obj.id = static_cast<int>(house.objects.size());
            obj.asset = static_cast<int>(ai);
            obj.synset = a.synset;
            obj.position = {pos.x, pos.y, sup.top() + a.dims.z * 0.5};
            obj.dims = a.dims;
            obj.room = room.id;
            obj.on_top_of = sid;
            obj.pickupable = a.pickupable;
            placed_here.push_back(obj.id);
            house.objects.push_back(obj);
            done = true;
          }
        }
        if (!done && a.placement == Placement::Either) {
          for (int attempt = 0; attempt < 12 && !done; ++attempt) {
            const double hx = a.dims.x * 0.5, hy = a.dims.y * 0.5;
            if (room.rect.width() < 2 * (hx + kWallMargin) + 0.01 ||
                room.rect.height() < 2 * (hy + kWallMargin) + 0.01)
              break;
            const Vec2 pos{rng.uniform(room.rect.lo.x + hx + kWallMargin,
                                       room.rect.hi.x - hx - kWallMargin),
                           rng.uniform(room.rect.lo.y + hy + kWallMargin,
                                       room.rect.hi.y - hy - kWallMargin)};
            const Rect fp{{pos.x - hx, pos.y - hy}, {pos.x + hx, pos.y + hy}};
            bool clear = rect_clear(fp, st, room.rect, false);
            if (clear) {
              for (int oid : placed_here) {
                if (house.objects[oid].on_top_of == -1 &&
                    house.objects[oid].footprint().overlaps(fp.inflated(0.02))) {
                  clear = false;
                  break;
                }
              }
            }
            if (!clear) continue;
            ObjectInstance obj;
            obj.id = static_cast<int>(house.objects.size());
            obj.asset = static_cast<int>(ai);
            obj.synset = a.synset;
            obj.position = {pos.x, pos.y, a.dims.z * 0.5};
            obj.dims = a.dims;
            obj.room = room.id;
            obj.pickupable = a.pickupable;
            placed_here.push_back(obj.id);
            house.objects.push_back(obj);
            done = true;
          }
        }
      }
    }
  }
}

}  // namespace

House realize_house(const Catalog& catalog, const LayoutSpec& spec, uint64_t seed) {
  const uint64_t spec_tag = fnv1a(spec.name.data(), spec.name.size());
  for (int attempt = 0; attempt < kHouseAttempts; ++attempt) {
    Rng rng(derive_seed({seed, spec_tag, static_cast<uint64_t>(attempt)}));
    const int n_rooms = spec.root.leaf_count();
    const double area = n_rooms * rng.uniform(8.5, 11.5);
    double aspect = rng.uniform(0.6, 0.95);
    double w = std::sqrt(area / aspect);
    double h = area / w;
    if (rng.chance(0.5)) std::swap(w, h);
    w = snap(w);
    h = snap(h);

    House house;
    house.seed = seed;
    house.layout_name = spec.name;
    house.split = split_for_seed(seed);
    house.footprint = {{0.0, 0.0}, {w, h}};

    bool failed = false;
    partition_node(spec.root, house.footprint, rng, house.rooms, failed);
    if (failed || static_cast<int>(house.rooms.size()) != n_rooms) continue;
    if (!place_doors(house.rooms, rng, house.doors)) continue;
    place_objects(catalog, house, rng);
    // Navigability gate: every room center must be reachable on the
    // planners' inflated grid.
    const auto grid = nav::build_navgrid(catalog, house);
    bool navigable = true;
    for (const auto& room : house.rooms) {
      if (!grid.in_main(grid.cell_at(room.center()))) {
        navigable = false;
        break;
      }
    }
    if (!navigable) continue;
    return house;
  }
  throw std::runtime_error("realize_house: placement infeasible for layout " +
                           spec.name + " seed " + std::to_string(seed));
}

House generate_house(const Catalog& catalog, uint64_t seed) {
  Rng rng(derive_seed({seed, 0xd0d0'0001ULL}));
  const LayoutSpec& spec = sample_layout(catalog, rng);
  return realize_house(catalog, spec, seed);
}

std::vector<int> referable_objects(const Catalog& catalog, const House& house,
                                   int synset) {
  std::vector<int> out;
  for (const auto& o : house.objects)
    if (catalog.taxonomy.is_ancestor_or_self(synset, o.synset)) out.push_back(o.id);
  return out;
}

WallSet build_walls(const House& house) {
  WallSet ws;
  const Rect& f = house.footprint;
  ws.segments.push_back({{f.lo.x, f.lo.y}, {f.hi.x, f.lo.y}});
  ws.segments.push_back({{f.hi.x, f.lo.y}, {f.hi.x, f.hi.y}});
  ws.segments.push_back({{f.hi.x, f.hi.y}, {f.lo.x, f.hi.y}});
  ws.segments.push_back({{f.lo.x, f.hi.y}, {f.lo.x, f.lo.y}});
  for (const auto& adj : find_adjacencies(house.rooms)) {
    // Carve door openings out of this shared interval.
    std::vector<std::pair<double, double>> gaps;
    for (const auto& d : house.doors) {
      const bool same_pair = (d.room_a == adj.a && d.room_b == adj.b) ||
                             (d.room_a == adj.b && d.room_b == adj.a);
      if (same_pair && d.vertical == adj.vertical && d.at == adj.at &&
          d.lo >= adj.lo - 1e-9 && d.hi <= adj.hi + 1e-9)
        gaps.emplace_back(d.lo, d.hi);
    }
    std::sort(gaps.begin(), gaps.end());
    double cur = adj.lo;
    auto emit = [&](double a, double b) {
      if (b - a <= 1e-9) return;
      if (adj.vertical)
        ws.segments.push_back({{adj.at, a}, {adj.at, b}});
      else
        ws.segments.push_back({{a, adj.at}, {b, adj.at}});
    };
    for (const auto& [glo, ghi] : gaps) {
      emit(cur, glo);
      cur = std::max(cur, ghi);
    }
    emit(cur, adj.hi);
  }
  return ws;
}

// --------------------------------------------------------------- JSON io

std::string house_to_json(const Catalog& catalog, const House& house) {
  json j;
  j["schema"] = "domus.house";
  j["version"] = 1;
  j["catalog_version"] = catalog.version;
  j["seed"] = house.seed;
  j["layout"] = house.layout_name;
  j["split"] = split_name(house.split);
  j["footprint"] = {house.footprint.lo.x, house.footprint.lo.y,
                    house.footprint.hi.x, house.footprint.hi.y};
  for (const auto& r : house.rooms) {
    j["rooms"].push_back({{"id", r.id},
                          {"type", room_type_name(r.type)},
                          {"rect", {r.rect.lo.x, r.rect.lo.y, r.rect.hi.x, r.rect.hi.y}},
                          {"center", {r.center().x, r.center().y}}});
  }
  j["doors"] = json::array();
  for (const auto& d : house.doors) {
    j["doors"].push_back({{"a", d.room_a},
                          {"b", d.room_b},
                          {"vertical", d.vertical},
                          {"at", d.at},
                          {"lo", d.lo},
                          {"hi", d.hi}});
  }
  j["objects"] = json::array();
  for (const auto& o : house.objects) {
    json jo = {{"id", o.id},
               {"asset", catalog.assets[o.asset].id},
               {"synset", catalog.taxonomy.at(o.synset).id},
               {"pos", {o.position.x, o.position.y, o.position.z}},
               {"dims", {o.dims.x, o.dims.y, o.dims.z}},
               {"room", o.room},
               {"pickupable", o.pickupable}};
    if (o.on_top_of >= 0)
      jo["on_top_of"] = o.on_top_of;
    j["objects"].push_back(std::move(jo));
  }
  return j.dump(1);
}

House house_from_json(const Catalog& catalog, const std::string& text) {
  const json j = json::parse(text);
  if (j.value("schema", "") != "domus.house")
    throw std::runtime_error("not a house file");
  if (j.at("catalog_version").get<int>() != catalog.version)
    throw std::runtime_error("house was generated against a different catalog version");
  House h;
  h.seed = j.at("seed").get<uint64_t>();
  h.layout_name = j.at("layout").get<std::string>();
  const std::string sp = j.at("split").get<std::string>();
  h.split = sp == "train" ? Split::Train : (sp == "val" ? Split::Val : Split::Test);
  const auto& fp = j.at("footprint");
  h.footprint = {{fp.at(0).get<double>(), fp.at(1).get<double>()},
                 {fp.at(2).get<double>(), fp.at(3).get<double>()}};
  for (const auto& jr : j.at("rooms")) {
    Room r;
    r.id = jr.at("id").get<int>();
    r.type = room_type_from_name(jr.at("type").get<std::string>());
    const auto& rc = jr.at("rect");
    r.rect = {{rc.at(0).get<double>(), rc.at(1).get<double>()},
              {rc.at(2).get<double>(), rc.at(3).get<double>()}};
    h.rooms.push_back(r);
  }
  for (const auto& jd : j.at("doors")) {
    Door d;
    d.room_a = jd.at("a").get<int>();
    d.room_b = jd.at("b").get<int>();
    d.vertical = jd.at("vertical").get<bool>();
    d.at = jd.at("at").get<double>();
    d.lo = jd.at("lo").get<double>();
    d.hi = jd.at("hi").get<double>();
    h.doors.push_back(d);
  }
  for (const auto& jo : j.at("objects")) {
    ObjectInstance o;
    o.id = jo.at("id").get<int>();
    o.asset = catalog.asset_index(jo.at("asset").get<std::string>());
    o.synset = catalog.taxonomy.index_of(jo.at("synset").get<std::string>());
    const auto& p = jo.at("pos");
    o.position = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
    const auto& d = jo.at("dims");
    o.dims = {d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>()};
    o.room = jo.at("room").get<int>();
    o.on_top_of = jo.value("on_top_of", -1);
    o.pickupable = jo.at("pickupable").get<bool>();
    h.objects.push_back(o);
  }
  return h;
}

}  // namespace domus::worldgen
