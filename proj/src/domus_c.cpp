#include "domus/domus_c.h"

#include <memory>
#include <optional>
#include <string>

#include "domus/runner.hpp"
#include "domus/simcore.hpp"
#include "domus/worldgen.hpp"

using domus::worldgen::Catalog;

struct domus_ctx {
  std::optional<Catalog> owned;
  const Catalog* catalog = nullptr;
  std::string last_error;
  std::string last_result;
};

struct domus_house {
  domus::worldgen::House house;
  std::string json;
};

struct domus_sim {
  std::unique_ptr<domus::sim::Sim> sim;
};

namespace {

domus_status set_error(domus_ctx* ctx, domus_status status, const std::string& what) {
  if (ctx) ctx->last_error = what;
  return status;
}

template <typename Fn>
domus_status guarded(domus_ctx* ctx, Fn&& fn) {
  try {
    return fn();
  } catch (const std::runtime_error& e) {
    return set_error(ctx, DOMUS_DATA_ERROR, e.what());
  } catch (const std::exception& e) {
    return set_error(ctx, DOMUS_INTERNAL_ERROR, e.what());
  }
}

}  // namespace

extern "C" {

domus_ctx* domus_ctx_create(const char* catalog_dir) {
  auto* ctx = new (std::nothrow) domus_ctx;
  if (!ctx) return nullptr;
  try {
    if (catalog_dir && *catalog_dir) {
      ctx->owned.emplace(domus::worldgen::load_catalog_dir(catalog_dir));
      ctx->catalog = &*ctx->owned;
    } else {
      ctx->catalog = &domus::worldgen::builtin_catalog();
    }
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    ctx->catalog = nullptr;
  }
  return ctx;
}

void domus_ctx_destroy(domus_ctx* ctx) { delete ctx; }

const char* domus_last_error(const domus_ctx* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

domus_status domus_run(domus_ctx* ctx, const char* command, const char* config_json,
                       const char** result_json) {
  if (!ctx || !command) return DOMUS_USAGE_ERROR;
  const auto result = domus::runner::run_command(
      command, config_json ? std::string(config_json) : std::string("{}"));
  if (result.status != domus::runner::kOk) {
    ctx->last_error = result.error;
    return static_cast<domus_status>(result.status);
  }
  ctx->last_result = result.result_json;
  if (result_json) *result_json = ctx->last_result.c_str();
  return DOMUS_OK;
}

domus_status domus_house_generate(domus_ctx* ctx, uint64_t seed, domus_house** out) {
  if (!ctx || !ctx->catalog || !out) return DOMUS_USAGE_ERROR;
  return guarded(ctx, [&] {
    auto h = std::make_unique<domus_house>();
    h->house = domus::worldgen::generate_house(*ctx->catalog, seed);
    *out = h.release();
    return DOMUS_OK;
  });
}

domus_status domus_house_from_json(domus_ctx* ctx, const char* json,
                                   domus_house** out) {
  if (!ctx || !ctx->catalog || !json || !out) return DOMUS_USAGE_ERROR;
  return guarded(ctx, [&] {
    auto h = std::make_unique<domus_house>();
    h->house = domus::worldgen::house_from_json(*ctx->catalog, json);
    *out = h.release();
    return DOMUS_OK;
  });
}

void domus_house_destroy(domus_house* house) { delete house; }

domus_status domus_house_json(domus_ctx* ctx, const domus_house* house,
                              const char** json) {
  if (!ctx || !ctx->catalog || !house || !json) return DOMUS_USAGE_ERROR;
  return guarded(ctx, [&] {
    auto* mutable_house = const_cast<domus_house*>(house);
    mutable_house->json = domus::worldgen::house_to_json(*ctx->catalog, house->house);
    *json = mutable_house->json.c_str();
    return DOMUS_OK;
  });
}

int domus_house_room_count(const domus_house* house) {
  return house ? static_cast<int>(house->house.rooms.size()) : -1;
}

int domus_house_object_count(const domus_house* house) {
  return house ? static_cast<int>(house->house.objects.size()) : -1;
}

domus_status domus_sim_create(domus_ctx* ctx, const domus_house* house,
                              domus_sim** out) {
  if (!ctx || !ctx->catalog || !house || !out) return DOMUS_USAGE_ERROR;
  return guarded(ctx, [&] {
    auto s = std::make_unique<domus_sim>();
    s->sim = std::make_unique<domus::sim::Sim>(*ctx->catalog, house->house);
    *out = s.release();
    return DOMUS_OK;
  });
}

void domus_sim_destroy(domus_sim* sim) { delete sim; }

domus_status domus_sim_spawn(domus_sim* sim, double x, double y, double theta_deg) {
  if (!sim) return DOMUS_USAGE_ERROR;
  sim->sim->spawn(x, y, theta_deg);
  return DOMUS_OK;
}

domus_status domus_sim_step(domus_sim* sim, int action, int* succeeded) {
  if (!sim || action < 0 || action >= domus::sim::kNumActions)
    return DOMUS_USAGE_ERROR;
  const auto res = sim->sim->step(static_cast<domus::sim::Action>(action));
  if (succeeded) *succeeded = res.action_succeeded ? 1 : 0;
  return DOMUS_OK;
}

domus_status domus_sim_pose(const domus_sim* sim, double* x, double* y,
                            double* theta_deg) {
  if (!sim) return DOMUS_USAGE_ERROR;
  const auto& pose = sim->sim->state().pose;
  if (x) *x = pose.x;
  if (y) *y = pose.y;
  if (theta_deg) *theta_deg = pose.theta;
  return DOMUS_OK;
}

int domus_sim_held_object(const domus_sim* sim) {
  return sim ? sim->sim->state().arm.held_object : -1;
}

int domus_action_count(void) { return domus::sim::kNumActions; }

const char* domus_action_name(int action) {
  if (action < 0 || action >= domus::sim::kNumActions) return "";
  return domus::sim::action_name(static_cast<domus::sim::Action>(action));
}

const char* domus_version(void) { return "domus 0.1.0"; }

}  // extern "C"
