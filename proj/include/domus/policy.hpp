#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "domus/datapipe.hpp"
#include "domus/rng.hpp"
#include "domus/worldgen.hpp"

namespace domus::policy {

using data::EpisodeRecord;
using data::StoredStep;
using worldgen::Catalog;

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Col = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct PolicyConfig {
  int d_goal = 32;
  int d_visual = 64;
  int n_goal_max = 24;
  int n_patch = 32;   // raster columns per camera
  int n_class = 0;    // raster class channels (catalog synsets + 2)
  int enc_layers = 2;
  int enc_heads = 4;
  int dec_layers = 2;
  int dec_heads = 4;
  int t_ctx = 32;
  int l_shift = 128;
  int n_actions = 20;
  int vocab = 0;  // goal token vocabulary (from the tokenizer)
  bool detection = false;

  int d_ff() const { return 4 * d_visual; }
  // Encoder token count per frame: two cameras of patches, the goal tokens,
  // and the CLS slot, plus ten coordinate tokens when detection is enabled.
  int encoder_tokens(int n_goal) const {
    return 2 * n_patch + n_goal + 1 + (detection ? 10 : 0);
  }
};

// Named presets: "micro" trains on a desk; "paper" mirrors the full-scale
// hyperparameters for documentation and is not meant for CPU training.
PolicyConfig micro_preset();
PolicyConfig paper_preset();

// Whitespace tokenizer over the closed template vocabulary derived from the
// catalog. Unknown words map to UNK.
class Tokenizer {
 public:
  explicit Tokenizer(const Catalog& catalog);
  explicit Tokenizer(std::vector<std::string> vocab);  // from a checkpoint

  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  const std::vector<std::string>& vocab() const { return vocab_; }
  std::vector<int> encode(const std::string& text, int max_tokens) const;
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

 private:
  std::vector<std::string> vocab_;
  std::map<std::string, int> index_;
};

struct TensorSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
};

std::vector<TensorSpec> tensor_specs(const PolicyConfig& config);
// Closed-form total parameter count; asserted against allocation in tests.
int64_t param_count(const PolicyConfig& config);

// One teacher-forcing window, already featurized.
struct WindowStep {
  const StoredStep* step = nullptr;
  int prev_action = 0;  // n_actions = START at t=0
  int time_index = 0;
  int expert_action = 0;
};

struct Window {
  std::vector<int> goal_tokens;
  std::vector<WindowStep> steps;
};

// Random time-index shift for a training window: [s+l, ...], l ~ U{0..l_shift}.
std::vector<int> shift_time_indices(int window_start, int window_len, int l_shift,
                                    Rng& rng);

template <typename T>
class Model {
 public:
  Model(const PolicyConfig& config, uint64_t init_seed);

  const PolicyConfig& config() const { return config_; }
  std::vector<Mat<T>>& params() { return params_; }
  const std::vector<Mat<T>>& params() const { return params_; }
  int tensor_index(const std::string& name) const;
  const std::vector<TensorSpec>& specs() const { return specs_; }
  int64_t allocated_params() const;

  // Teacher-forced logits for a window: n_actions x T.
  Mat<T> forward(const Window& w) const;
  // Forward plus backward; returns the mean cross-entropy over the window
  // steps weighted by `loss_scale`, accumulating parameter gradients.
  T forward_backward(const Window& w, T loss_scale, std::vector<Mat<T>>& grads) const;

  // Incremental rollout state (KV caches grow with the history).
  struct Rollout {
    Mat<T> g_mem;
    std::vector<Mat<T>> cross_kv;
    std::vector<std::vector<Col<T>>> self_k, self_v;
    int t = 0;
  };
  std::unique_ptr<Rollout> start_rollout(const std::vector<int>& goal_tokens) const;
  // Logits for the next step given the previous action and current inputs.
  Col<T> rollout_step(Rollout& r, const StoredStep& obs, int prev_action,
                      int time_index) const;

  struct Impl;  // forward-pass caches, defined in policy.cpp

 private:
  PolicyConfig config_;
  std::vector<TensorSpec> specs_;
  std::vector<Mat<T>> params_;
  std::map<std::string, int> index_;
};

// Mean token-level cross entropy; logits n_actions x T.
template <typename T>
T bc_loss(const Mat<T>& logits, const std::vector<int>& expert_actions);

struct TrainConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  int batch_windows = 8;
  uint64_t seed = 0;
  int threads = 1;  // batch rows processed in parallel, reduced serially
};

template <typename T>
class Trainer {
 public:
  Trainer(Model<T>& model, const TrainConfig& config);

  // One optimizer step over `batch`; returns the mean loss. Throws on
  // non-finite loss or gradients.
  T train_step(const std::vector<Window>& batch);
  int64_t step_count() const { return step_; }
  std::vector<Mat<T>>& moment1() { return m_; }
  std::vector<Mat<T>>& moment2() { return v_; }
  void set_step_count(int64_t s) { step_ = s; }

 private:
  Model<T>& model_;
  TrainConfig config_;
  std::vector<Mat<T>> m_, v_;
  int64_t step_ = 0;
};

// Samples teacher-forcing windows from a fixed episode set.
class WindowSampler {
 public:
  WindowSampler(const Catalog& catalog, const Tokenizer& tokenizer,
                const PolicyConfig& config,
                const std::vector<EpisodeRecord>* episodes);
  Window sample(Rng& rng) const;

 private:
  const Tokenizer* tokenizer_;
  const PolicyConfig* config_;
  const std::vector<EpisodeRecord>* episodes_;
};

// Checkpoint: config, vocabulary, shape table, f32 tensors (parameters and
// optimizer moments), step counter, trailing checksum.
struct Checkpoint {
  PolicyConfig config;
  std::vector<std::string> vocab;
  std::vector<Mat<float>> params;
  std::vector<Mat<float>> m, v;  // empty when the optimizer state is absent
  int64_t step = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

template <typename T>
Checkpoint make_checkpoint(const Model<T>& model, const Tokenizer& tokenizer,
                           const Trainer<T>* trainer);
template <typename T>
void restore_model(const Checkpoint& ckpt, Model<T>& model);

extern template class Model<float>;
extern template class Model<double>;
extern template class Trainer<float>;
extern template class Trainer<double>;

}  // namespace domus::policy
