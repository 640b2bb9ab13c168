#include "domus/policy.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstring>
#include <set>
#include <thread>

namespace domus::policy {

PolicyConfig micro_preset() {
  PolicyConfig c;
  c.d_goal = 32;
  c.d_visual = 64;
  c.n_goal_max = 24;
  c.n_patch = 32;
  c.enc_layers = 2;
  c.enc_heads = 4;
  c.dec_layers = 2;
  c.dec_heads = 4;
  c.t_ctx = 32;
  c.l_shift = 128;
  return c;
}

PolicyConfig paper_preset() {
  PolicyConfig c;
  c.d_goal = 768;
  c.d_visual = 512;
  c.n_goal_max = 32;
  c.n_patch = 32;
  c.enc_layers = 3;
  c.enc_heads = 8;
  c.dec_layers = 3;
  c.dec_heads = 8;
  c.t_ctx = 100;
  c.l_shift = 900;
  return c;
}

// -------------------------------------------------------------- tokenizer

namespace {

std::string clean_token(std::string w) {
  for (auto& ch : w) ch = static_cast<char>(std::tolower(ch));
  size_t b = 0, e = w.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(w[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(w[e - 1]))) --e;
  return w.substr(b, e - b);
}

void add_words(std::set<std::string>& out, const std::string& text) {
  std::string cur;
  for (char ch : text + " ") {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      const std::string t = clean_token(cur);
      if (!t.empty()) out.insert(t);
      cur.clear();
    } else {
      cur += ch;
    }
  }
}

}  // namespace

Tokenizer::Tokenizer(const Catalog& catalog) {
  std::set<std::string> words;
  add_words(words,
            "find locate search for a the in on near and that can best be used "
            "pick up visit every room this house indicate when you have seen new "
            "when you are done smallest largest highest lowest nearest furthest "
            "from to kitchen bathroom living bedroom");
  for (int i = 0; i < catalog.taxonomy.size(); ++i) {
    const auto& s = catalog.taxonomy.at(i);
    for (const auto& l : s.lemmas) add_words(words, l);
    for (const auto& a : s.affordances) add_words(words, a.description);
  }
  for (const auto& a : catalog.assets) add_words(words, a.description);
  for (int n = 1; n <= 16; ++n) words.insert(std::to_string(n) + "-room");

  vocab_.push_back("<pad>");
  vocab_.push_back("<unk>");
  vocab_.insert(vocab_.end(), words.begin(), words.end());
  for (size_t i = 0; i < vocab_.size(); ++i) index_[vocab_[i]] = static_cast<int>(i);
}

Tokenizer::Tokenizer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
  for (size_t i = 0; i < vocab_.size(); ++i) index_[vocab_[i]] = static_cast<int>(i);
}

std::vector<int> Tokenizer::encode(const std::string& text, int max_tokens) const {
  std::vector<int> out;
  std::string cur;
  for (char ch : text + " ") {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      const std::string t = clean_token(cur);
      cur.clear();
      if (t.empty()) continue;
      if (static_cast<int>(out.size()) >= max_tokens) break;
      const auto it = index_.find(t);
      out.push_back(it == index_.end() ? kUnk : it->second);
    } else {
      cur += ch;
    }
  }
  if (out.empty()) out.push_back(kUnk);
  return out;
}

// ----------------------------------------------------------- tensor specs

std::vector<TensorSpec> tensor_specs(const PolicyConfig& c) {
  std::vector<TensorSpec> s;
  const int d = c.d_visual;
  auto add = [&](const std::string& name, int rows, int cols) {
    s.push_back({name, rows, cols});
  };
  add("tok_embed", c.d_goal, c.vocab);
  add("patch_embed", d, c.n_class);
  add("depth_w", d, 1);
  add("img_l1_w", d, d);
  add("img_l1_b", d, 1);
  add("img_l2_w", d, d);
  add("img_l2_b", d, 1);
  add("img_ln_g", d, 1);
  add("img_ln_b", d, 1);
  add("goal_l1_w", d, c.d_goal);
  add("goal_l1_b", d, 1);
  add("goal_l2_w", d, d);
  add("goal_l2_b", d, 1);
  add("goal_ln_g", d, 1);
  add("goal_ln_b", d, 1);
  add("cam_embed", d, 2);
  add("col_embed", d, c.n_patch);
  add("cls_embed", d, 1);
  if (c.detection) {
    add("det_w", d, d);
    add("det_b", d, 1);
    add("det_ln_g", d, 1);
    add("det_ln_b", d, 1);
    add("coord_embed", d, 10);
  }
  auto add_block = [&](const std::string& p, bool cross) {
    add(p + ".ln1_g", d, 1);
    add(p + ".ln1_b", d, 1);
    add(p + ".qkv_w", 3 * d, d);
    add(p + ".qkv_b", 3 * d, 1);
    add(p + ".proj_w", d, d);
    add(p + ".proj_b", d, 1);
    if (cross) {
      add(p + ".ln2_g", d, 1);
      add(p + ".ln2_b", d, 1);
      add(p + ".q_w", d, d);
      add(p + ".q_b", d, 1);
      add(p + ".kv_w", 2 * d, d);
      add(p + ".kv_b", 2 * d, 1);
      add(p + ".cproj_w", d, d);
      add(p + ".cproj_b", d, 1);
    }
    add(p + ".ln3_g", d, 1);
    add(p + ".ln3_b", d, 1);
    add(p + ".ff1_w", c.d_ff(), d);
    add(p + ".ff1_b", c.d_ff(), 1);
    add(p + ".ff2_w", d, c.d_ff());
    add(p + ".ff2_b", d, 1);
  };
  for (int l = 0; l < c.enc_layers; ++l) add_block("enc" + std::to_string(l), false);
  add("enc_lnf_g", d, 1);
  add("enc_lnf_b", d, 1);
  add("act_embed", d, c.n_actions + 1);  // +1 START
  add("hand_embed", d, 2);
  for (int l = 0; l < c.dec_layers; ++l) add_block("dec" + std::to_string(l), true);
  add("dec_lnf_g", d, 1);
  add("dec_lnf_b", d, 1);
  add("head_w", c.n_actions, d);
  add("head_b", c.n_actions, 1);
  return s;
}

int64_t param_count(const PolicyConfig& c) {
  const int64_t d = c.d_visual, g = c.d_goal, f = c.d_ff();
  int64_t total = 0;
  total += g * c.vocab;                    // tok_embed
  total += d * c.n_class + d;              // patch_embed + depth_w
  total += 2 * (d * d + d) + 2 * d;        // M_image
  total += d * g + d + d * d + d + 2 * d;  // M_goal
  total += 2 * d + d * c.n_patch + d;      // cam/col/cls embeds
  if (c.detection) total += d * d + d + 2 * d + 10 * d;
  const int64_t self_block = 2 * d + (3 * d * d + 3 * d) + (d * d + d) + 2 * d +
                             (f * d + f) + (d * f + d);
  const int64_t cross_part = 2 * d + (d * d + d) + (2 * d * d + 2 * d) + (d * d + d);
  total += c.enc_layers * self_block + 2 * d;
  total += d * (c.n_actions + 1) + 2 * d;  // act/hand embeds
  total += c.dec_layers * (self_block + cross_part) + 2 * d;
  total += c.n_actions * d + c.n_actions;  // head
  return total;
}

std::vector<int> shift_time_indices(int window_start, int window_len, int l_shift,
                                    Rng& rng) {
  const int l = l_shift > 0 ? static_cast<int>(rng.uniform_int(l_shift + 1)) : 0;
  std::vector<int> out(window_len);
  for (int i = 0; i < window_len; ++i) out[i] = window_start + i + l;
  return out;
}

// ------------------------------------------------------- layer primitives

namespace {

template <typename T>
Col<T> sinusoidal(int dims, double pos) {
  Col<T> v(dims);
  for (int i = 0; i < dims; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / dims);
    v[i] = static_cast<T>(std::sin(pos * freq));
    if (i + 1 < dims) v[i + 1] = static_cast<T>(std::cos(pos * freq));
  }
  return v;
}

template <typename T>
struct LnCache {
  Mat<T> xhat;
  Col<T> inv_sigma;
};

template <typename T>
Mat<T> layernorm_fw(const Mat<T>& x, const Col<T>& g, const Col<T>& b,
                    LnCache<T>* cache) {
  const int n = static_cast<int>(x.cols());
  Mat<T> y(x.rows(), n);
  if (cache) {
    cache->xhat.resize(x.rows(), n);
    cache->inv_sigma.resize(n);
  }
  const T eps = static_cast<T>(1e-5);
  for (int j = 0; j < n; ++j) {
    const T mu = x.col(j).mean();
    const Col<T> c = (x.col(j).array() - mu).matrix();
    const T var = c.squaredNorm() / static_cast<T>(x.rows());
    const T inv = T(1) / std::sqrt(var + eps);
    const Col<T> xhat = c * inv;
    y.col(j) = (g.array() * xhat.array() + b.array()).matrix();
    if (cache) {
      cache->xhat.col(j) = xhat;
      cache->inv_sigma[j] = inv;
    }
  }
  return y;
}

template <typename T>
Mat<T> layernorm_bw(const Mat<T>& dy, const LnCache<T>& cache, const Col<T>& g,
                    Mat<T>& dg, Mat<T>& db) {
  const int n = static_cast<int>(dy.cols());
  const int d = static_cast<int>(dy.rows());
  Mat<T> dx(d, n);
  for (int j = 0; j < n; ++j) {
    const Col<T> xhat = cache.xhat.col(j);
    const Col<T> gdy = (g.array() * dy.col(j).array()).matrix();
    dg.col(0).array() += dy.col(j).array() * xhat.array();
    db.col(0) += dy.col(j);
    const T m1 = gdy.mean();
    const T m2 = (gdy.array() * xhat.array()).mean();
    dx.col(j) = ((gdy.array() - m1 - xhat.array() * m2) * cache.inv_sigma[j]).matrix();
  }
  return dx;
}

template <typename T>
struct AttnCache {
  Mat<T> x;    // input tokens (post-LN)
  Mat<T> qkv;  // stacked projections
  std::vector<Mat<T>> probs;
  Mat<T> concat;  // pre-projection head outputs
};

// Self-attention over columns; causal masking restricts key i to i <= query j.
template <typename T>
Mat<T> self_attention_fw(const Mat<T>& x, const Mat<T>& w_qkv, const Mat<T>& b_qkv,
                         const Mat<T>& w_proj, const Mat<T>& b_proj, int heads,
                         bool causal, AttnCache<T>* cache) {
  const int d = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  const int dh = d / heads;
  Mat<T> qkv = (w_qkv * x).colwise() + Col<T>(b_qkv.col(0));
  Mat<T> concat(d, n);
  std::vector<Mat<T>> probs(heads);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  for (int h = 0; h < heads; ++h) {
    const auto Q = qkv.block(h * dh, 0, dh, n);
    const auto K = qkv.block(d + h * dh, 0, dh, n);
    const auto V = qkv.block(2 * d + h * dh, 0, dh, n);
    Mat<T> s = (K.transpose() * Q) * scale;  // s(i,j): key i, query j
    Mat<T> p(n, n);
    for (int j = 0; j < n; ++j) {
      const int limit = causal ? j + 1 : n;
      T mx = s(0, j);
      for (int i = 1; i < limit; ++i) mx = std::max(mx, s(i, j));
      T sum = T(0);
      for (int i = 0; i < limit; ++i) {
        p(i, j) = std::exp(s(i, j) - mx);
        sum += p(i, j);
      }
      for (int i = 0; i < limit; ++i) p(i, j) /= sum;
      for (int i = limit; i < n; ++i) p(i, j) = T(0);
    }
    concat.block(h * dh, 0, dh, n) = V * p;
    probs[h] = std::move(p);
  }
  if (cache) {
    cache->x = x;
    cache->qkv = std::move(qkv);
    cache->probs = std::move(probs);
    cache->concat = concat;
  }
  return (w_proj * concat).colwise() + Col<T>(b_proj.col(0));
}

template <typename T>
Mat<T> self_attention_bw(const Mat<T>& dy, const AttnCache<T>& c, const Mat<T>& w_qkv,
                         const Mat<T>& w_proj, int heads, Mat<T>& dw_qkv,
                         Mat<T>& db_qkv, Mat<T>& dw_proj, Mat<T>& db_proj) {
  const int d = static_cast<int>(c.x.rows());
  const int n = static_cast<int>(c.x.cols());
  const int dh = d / heads;
  dw_proj += dy * c.concat.transpose();
  db_proj.col(0) += dy.rowwise().sum();
  const Mat<T> d_concat = w_proj.transpose() * dy;
  Mat<T> d_qkv = Mat<T>::Zero(3 * d, n);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  for (int h = 0; h < heads; ++h) {
    const auto Q = c.qkv.block(h * dh, 0, dh, n);
    const auto K = c.qkv.block(d + h * dh, 0, dh, n);
    const auto V = c.qkv.block(2 * d + h * dh, 0, dh, n);
    const auto dO = d_concat.block(h * dh, 0, dh, n);
    const Mat<T>& p = c.probs[h];
    d_qkv.block(2 * d + h * dh, 0, dh, n) += dO * p.transpose();  // dV
    Mat<T> dp = V.transpose() * dO;                               // n x n
    Mat<T> ds(n, n);
    for (int j = 0; j < n; ++j) {
      const T dot = (dp.col(j).array() * p.col(j).array()).sum();
      ds.col(j) = (p.col(j).array() * (dp.col(j).array() - dot)).matrix();
    }
    d_qkv.block(h * dh, 0, dh, n) += (K * ds) * scale;                  // dQ
    d_qkv.block(d + h * dh, 0, dh, n) += (Q * ds.transpose()) * scale;  // dK
  }
  dw_qkv += d_qkv * c.x.transpose();
  db_qkv.col(0) += d_qkv.rowwise().sum();
  return w_qkv.transpose() * d_qkv;
}

template <typename T>
struct CrossCache {
  Mat<T> x;  // queries input (post-LN)
  Mat<T> q;
  Mat<T> kv;
  std::vector<Mat<T>> probs;
  Mat<T> concat;
};

template <typename T>
Mat<T> cross_attention_fw(const Mat<T>& x, const Mat<T>& memory, const Mat<T>& w_q,
                          const Mat<T>& b_q, const Mat<T>& w_kv, const Mat<T>& b_kv,
                          const Mat<T>& w_proj, const Mat<T>& b_proj, int heads,
                          CrossCache<T>* cache) {
  const int d = static_cast<int>(x.rows());
  const int n = static_cast<int>(x.cols());
  const int m = static_cast<int>(memory.cols());
  const int dh = d / heads;
  Mat<T> q = (w_q * x).colwise() + Col<T>(b_q.col(0));
  Mat<T> kv = (w_kv * memory).colwise() + Col<T>(b_kv.col(0));
  Mat<T> concat(d, n);
  std::vector<Mat<T>> probs(heads);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  for (int h = 0; h < heads; ++h) {
    const auto Q = q.block(h * dh, 0, dh, n);
    const auto K = kv.block(h * dh, 0, dh, m);
    const auto V = kv.block(d + h * dh, 0, dh, m);
    Mat<T> s = (K.transpose() * Q) * scale;  // m x n
    Mat<T> p(m, n);
    for (int j = 0; j < n; ++j) {
      const T mx = s.col(j).maxCoeff();
      p.col(j) = (s.col(j).array() - mx).exp().matrix();
      p.col(j) /= p.col(j).sum();
    }
    concat.block(h * dh, 0, dh, n) = V * p;
    probs[h] = std::move(p);
  }
  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->kv = std::move(kv);
    cache->probs = std::move(probs);
    cache->concat = concat;
  }
  return (w_proj * concat).colwise() + Col<T>(b_proj.col(0));
}

// Returns dX; accumulates the memory gradient into d_memory.
template <typename T>
Mat<T> cross_attention_bw(const Mat<T>& dy, const CrossCache<T>& c, const Mat<T>& w_q,
                          const Mat<T>& w_kv, const Mat<T>& w_proj, int heads,
                          Mat<T>& dw_q, Mat<T>& db_q, Mat<T>& dw_kv, Mat<T>& db_kv,
                          Mat<T>& dw_proj, Mat<T>& db_proj, const Mat<T>& memory,
                          Mat<T>& d_memory) {
  const int d = static_cast<int>(c.x.rows());
  const int n = static_cast<int>(c.x.cols());
  const int m = static_cast<int>(memory.cols());
  const int dh = d / heads;
  dw_proj += dy * c.concat.transpose();
  db_proj.col(0) += dy.rowwise().sum();
  const Mat<T> d_concat = w_proj.transpose() * dy;
  Mat<T> dq = Mat<T>::Zero(d, n);
  Mat<T> dkv = Mat<T>::Zero(2 * d, m);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  for (int h = 0; h < heads; ++h) {
    const auto Q = c.q.block(h * dh, 0, dh, n);
    const auto K = c.kv.block(h * dh, 0, dh, m);
    const auto V = c.kv.block(d + h * dh, 0, dh, m);
    const auto dO = d_concat.block(h * dh, 0, dh, n);
    const Mat<T>& p = c.probs[h];
    dkv.block(d + h * dh, 0, dh, m) += dO * p.transpose();
    Mat<T> dp = V.transpose() * dO;  // m x n
    Mat<T> ds(m, n);
    for (int j = 0; j < n; ++j) {
      const T dot = (dp.col(j).array() * p.col(j).array()).sum();
      ds.col(j) = (p.col(j).array() * (dp.col(j).array() - dot)).matrix();
    }
    dq.block(h * dh, 0, dh, n) += (K * ds) * scale;
    dkv.block(h * dh, 0, dh, m) += (Q * ds.transpose()) * scale;
  }
  dw_q += dq * c.x.transpose();
  db_q.col(0) += dq.rowwise().sum();
  dw_kv += dkv * memory.transpose();
  db_kv.col(0) += dkv.rowwise().sum();
  d_memory += w_kv.transpose() * dkv;
  return w_q.transpose() * dq;
}

}  // namespace

// ------------------------------------------------------------------ model

template <typename T>
Model<T>::Model(const PolicyConfig& config, uint64_t init_seed) : config_(config) {
  if (config_.vocab <= 0 || config_.n_class <= 0)
    throw std::runtime_error("policy: vocab and n_class must be set");
  if (config_.d_visual % config_.enc_heads != 0 ||
      config_.d_visual % config_.dec_heads != 0)
    throw std::runtime_error("policy: head counts must divide d_visual");
  specs_ = tensor_specs(config_);
  params_.reserve(specs_.size());
  Rng rng(derive_seed({init_seed, 0x90de1ULL}));
  for (size_t i = 0; i < specs_.size(); ++i) {
    const auto& sp = specs_[i];
    Mat<T> m(sp.rows, sp.cols);
    const bool is_bias = sp.name.ends_with("_b");
    const bool is_gain = sp.name.ends_with("_g");
    if (is_gain) {
      m.setOnes();
    } else if (is_bias) {
      m.setZero();
    } else {
      for (int c = 0; c < sp.cols; ++c)
        for (int r = 0; r < sp.rows; ++r) m(r, c) = static_cast<T>(rng.normal() * 0.02);
    }
    index_[sp.name] = static_cast<int>(i);
    params_.push_back(std::move(m));
  }
}

template <typename T>
int Model<T>::tensor_index(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::runtime_error("unknown tensor: " + name);
  return it->second;
}

template <typename T>
int64_t Model<T>::allocated_params() const {
  int64_t n = 0;
  for (const auto& m : params_) n += m.size();
  return n;
}

// Per-window forward state.
template <typename T>
struct Model<T>::Impl {
  Mat<T> g_raw;
  Mat<T> goal_h1;
  Mat<T> goal_h1_relu;
  LnCache<T> goal_ln;
  Mat<T> g_mem;

  struct Frame {
    Mat<T> patch_pre;
    Mat<T> img_h1;
    Mat<T> img_h1_relu;
    LnCache<T> img_ln;
    Mat<T> det_sin;
    LnCache<T> det_ln;
    Mat<T> det_post_ln;
    Mat<T> tokens;
    struct Layer {
      LnCache<T> ln1;
      AttnCache<T> att;
      LnCache<T> ln3;
      Mat<T> ff_h;
      Mat<T> ff_in;
    };
    std::vector<Layer> layers;
    LnCache<T> lnf;
  };
  std::vector<Frame> frames;

  Mat<T> dec_in;
  struct DecLayer {
    LnCache<T> ln1;
    AttnCache<T> att;
    LnCache<T> ln2;
    CrossCache<T> cross;
    LnCache<T> ln3;
    Mat<T> ff_h;
    Mat<T> ff_in;
  };
  std::vector<DecLayer> dec_layers;
  LnCache<T> dec_lnf;
  Mat<T> dec_out;
};

namespace {

template <typename T>
Mat<T> detection_sin(const StoredStep& s, int d) {
  Mat<T> out(d, 10);
  for (int j = 0; j < 10; ++j) out.col(j) = sinusoidal<T>(d, s.det[j]);
  return out;
}

}  // namespace

template <typename T>
class ForwardPass {
 public:
  ForwardPass(const Model<T>& model, const std::vector<Mat<T>>& p)
      : m_(model), p_(p), c_(model.config()) {
    cache_ = std::make_unique<typename Model<T>::Impl>();
  }

  typename Model<T>::Impl& cache() { return *cache_; }

  const Mat<T>& P(const std::string& name) const { return p_[m_.tensor_index(name)]; }

  Mat<T> goal_memory(const std::vector<int>& tokens) {
    const int n = static_cast<int>(tokens.size());
    auto& ch = *cache_;
    ch.g_raw.resize(c_.d_goal, n);
    const auto& tok = P("tok_embed");
    for (int i = 0; i < n; ++i)
      ch.g_raw.col(i) = tok.col(tokens[i]) + sinusoidal<T>(c_.d_goal, i);
    ch.goal_h1 = (P("goal_l1_w") * ch.g_raw).colwise() + Col<T>(P("goal_l1_b").col(0));
    ch.goal_h1_relu = ch.goal_h1.cwiseMax(T(0));
    Mat<T> h2 =
        (P("goal_l2_w") * ch.goal_h1_relu).colwise() + Col<T>(P("goal_l2_b").col(0));
    ch.g_mem = layernorm_fw(h2, Col<T>(P("goal_ln_g").col(0)),
                            Col<T>(P("goal_ln_b").col(0)), &ch.goal_ln);
    return ch.g_mem;
  }

  Col<T> encode_frame(const StoredStep& s, const Mat<T>& g_mem,
                      typename Model<T>::Impl::Frame& f) {
    const int d = c_.d_visual;
    const int np = c_.n_patch;
    const int ng = static_cast<int>(g_mem.cols());
    f.patch_pre.resize(d, 2 * np);
    const auto& pe = P("patch_embed");
    const auto& dw = P("depth_w");
    for (int i = 0; i < np; ++i) {
      f.patch_pre.col(i) =
          pe.col(s.nav_cls[i]) + dw.col(0) * static_cast<T>(s.nav_depth[i] / 255.0);
      f.patch_pre.col(np + i) =
          pe.col(s.manip_cls[i]) + dw.col(0) * static_cast<T>(s.manip_depth[i] / 255.0);
    }
    f.img_h1 = (P("img_l1_w") * f.patch_pre).colwise() + Col<T>(P("img_l1_b").col(0));
    f.img_h1_relu = f.img_h1.cwiseMax(T(0));
    Mat<T> h2 =
        (P("img_l2_w") * f.img_h1_relu).colwise() + Col<T>(P("img_l2_b").col(0));
    Mat<T> patches = layernorm_fw(h2, Col<T>(P("img_ln_g").col(0)),
                                  Col<T>(P("img_ln_b").col(0)), &f.img_ln);
    const auto& cam = P("cam_embed");
    const auto& colp = P("col_embed");
    for (int i = 0; i < np; ++i) {
      patches.col(i) += cam.col(0) + colp.col(i);
      patches.col(np + i) += cam.col(1) + colp.col(i);
    }

    const int n_det = c_.detection ? 10 : 0;
    const int total = 2 * np + n_det + ng + 1;
    f.tokens.resize(d, total);
    f.tokens.leftCols(2 * np) = patches;
    if (c_.detection) {
      f.det_sin = detection_sin<T>(s, d);
      Mat<T> lin = (P("det_w") * f.det_sin).colwise() + Col<T>(P("det_b").col(0));
      f.det_post_ln = layernorm_fw(lin, Col<T>(P("det_ln_g").col(0)),
                                   Col<T>(P("det_ln_b").col(0)), &f.det_ln);
      Mat<T> det = f.det_post_ln.cwiseMax(T(0));
      det += P("coord_embed");
      f.tokens.middleCols(2 * np, 10) = det;
    }
    f.tokens.middleCols(2 * np + n_det, ng) = g_mem;
    f.tokens.col(total - 1) = P("cls_embed").col(0);

    Mat<T> x = f.tokens;
    f.layers.resize(c_.enc_layers);
    for (int l = 0; l < c_.enc_layers; ++l) {
      const std::string pre = "enc" + std::to_string(l);
      auto& lc = f.layers[l];
      Mat<T> h = layernorm_fw(x, Col<T>(P(pre + ".ln1_g").col(0)),
                              Col<T>(P(pre + ".ln1_b").col(0)), &lc.ln1);
      x += self_attention_fw(h, P(pre + ".qkv_w"), P(pre + ".qkv_b"),
                             P(pre + ".proj_w"), P(pre + ".proj_b"), c_.enc_heads,
                             false, &lc.att);
      Mat<T> h2n = layernorm_fw(x, Col<T>(P(pre + ".ln3_g").col(0)),
                                Col<T>(P(pre + ".ln3_b").col(0)), &lc.ln3);
      lc.ff_in = h2n;
      lc.ff_h = (P(pre + ".ff1_w") * h2n).colwise() + Col<T>(P(pre + ".ff1_b").col(0));
      Mat<T> relu = lc.ff_h.cwiseMax(T(0));
      x += (P(pre + ".ff2_w") * relu).colwise() + Col<T>(P(pre + ".ff2_b").col(0));
    }
    Mat<T> out = layernorm_fw(x, Col<T>(P("enc_lnf_g").col(0)),
                              Col<T>(P("enc_lnf_b").col(0)), &f.lnf);
    return out.col(total - 1);
  }

  Mat<T> decode(const Mat<T>& vs, const Window& w, const Mat<T>& g_mem) {
    const int d = c_.d_visual;
    const int n = static_cast<int>(w.steps.size());
    auto& ch = *cache_;
    ch.dec_in.resize(d, n);
    const auto& act = P("act_embed");
    const auto& hand = P("hand_embed");
    for (int t = 0; t < n; ++t) {
      ch.dec_in.col(t) = vs.col(t) + sinusoidal<T>(d, w.steps[t].time_index) +
                         act.col(w.steps[t].prev_action) +
                         hand.col(w.steps[t].step->object_in_hand ? 1 : 0);
    }
    Mat<T> x = ch.dec_in;
    ch.dec_layers.resize(c_.dec_layers);
    for (int l = 0; l < c_.dec_layers; ++l) {
      const std::string pre = "dec" + std::to_string(l);
      auto& lc = ch.dec_layers[l];
      Mat<T> h = layernorm_fw(x, Col<T>(P(pre + ".ln1_g").col(0)),
                              Col<T>(P(pre + ".ln1_b").col(0)), &lc.ln1);
      x += self_attention_fw(h, P(pre + ".qkv_w"), P(pre + ".qkv_b"),
                             P(pre + ".proj_w"), P(pre + ".proj_b"), c_.dec_heads,
                             true, &lc.att);
      Mat<T> h2 = layernorm_fw(x, Col<T>(P(pre + ".ln2_g").col(0)),
                               Col<T>(P(pre + ".ln2_b").col(0)), &lc.ln2);
      x += cross_attention_fw(h2, g_mem, P(pre + ".q_w"), P(pre + ".q_b"),
                              P(pre + ".kv_w"), P(pre + ".kv_b"), P(pre + ".cproj_w"),
                              P(pre + ".cproj_b"), c_.dec_heads, &lc.cross);
      Mat<T> h3 = layernorm_fw(x, Col<T>(P(pre + ".ln3_g").col(0)),
                               Col<T>(P(pre + ".ln3_b").col(0)), &lc.ln3);
      lc.ff_in = h3;
      lc.ff_h = (P(pre + ".ff1_w") * h3).colwise() + Col<T>(P(pre + ".ff1_b").col(0));
      Mat<T> relu = lc.ff_h.cwiseMax(T(0));
      x += (P(pre + ".ff2_w") * relu).colwise() + Col<T>(P(pre + ".ff2_b").col(0));
    }
    ch.dec_out = layernorm_fw(x, Col<T>(P("dec_lnf_g").col(0)),
                              Col<T>(P("dec_lnf_b").col(0)), &ch.dec_lnf);
    return (P("head_w") * ch.dec_out).colwise() + Col<T>(P("head_b").col(0));
  }

 private:
  const Model<T>& m_;
  const std::vector<Mat<T>>& p_;
  PolicyConfig c_;
  std::unique_ptr<typename Model<T>::Impl> cache_;
};

template <typename T>
Mat<T> Model<T>::forward(const Window& w) const {
  ForwardPass<T> fp(*this, params_);
  const Mat<T> g_mem = fp.goal_memory(w.goal_tokens);
  auto& frames = fp.cache().frames;
  frames.resize(w.steps.size());
  Mat<T> vs(config_.d_visual, w.steps.size());
  for (size_t t = 0; t < w.steps.size(); ++t)
    vs.col(t) = fp.encode_frame(*w.steps[t].step, g_mem, frames[t]);
  return fp.decode(vs, w, g_mem);
}

template <typename T>
T bc_loss(const Mat<T>& logits, const std::vector<int>& expert_actions) {
  const int n = static_cast<int>(expert_actions.size());
  T total = T(0);
  for (int t = 0; t < n; ++t) {
    const auto col = logits.col(t);
    const T mx = col.maxCoeff();
    const T lse = mx + std::log((col.array() - mx).exp().sum());
    total += lse - col[expert_actions[t]];
  }
  return total / static_cast<T>(n);
}

template float bc_loss<float>(const Mat<float>&, const std::vector<int>&);
template double bc_loss<double>(const Mat<double>&, const std::vector<int>&);

template <typename T>
T Model<T>::forward_backward(const Window& w, T loss_scale,
                             std::vector<Mat<T>>& grads) const {
  ForwardPass<T> fp(*this, params_);
  const Mat<T> g_mem = fp.goal_memory(w.goal_tokens);
  auto& ch = fp.cache();
  const int n = static_cast<int>(w.steps.size());
  ch.frames.resize(n);
  Mat<T> vs(config_.d_visual, n);
  for (int t = 0; t < n; ++t)
    vs.col(t) = fp.encode_frame(*w.steps[t].step, g_mem, ch.frames[t]);
  const Mat<T> logits = fp.decode(vs, w, g_mem);

  auto G = [&](const std::string& name) -> Mat<T>& { return grads[tensor_index(name)]; };
  auto Pm = [&](const std::string& name) -> const Mat<T>& {
    return params_[tensor_index(name)];
  };

  const int d = config_.d_visual;
  T loss = T(0);
  Mat<T> dlogits(config_.n_actions, n);
  for (int t = 0; t < n; ++t) {
    const auto col = logits.col(t);
    const T mx = col.maxCoeff();
    Col<T> p = (col.array() - mx).exp().matrix();
    const T sum = p.sum();
    p /= sum;
    loss += (std::log(sum) + mx - col[w.steps[t].expert_action]) * loss_scale;
    p[w.steps[t].expert_action] -= T(1);
    dlogits.col(t) = p * loss_scale;
  }

  G("head_w") += dlogits * ch.dec_out.transpose();
  G("head_b").col(0) += dlogits.rowwise().sum();
  Mat<T> dx = Pm("head_w").transpose() * dlogits;
  dx = layernorm_bw(dx, ch.dec_lnf, Col<T>(Pm("dec_lnf_g").col(0)), G("dec_lnf_g"),
                    G("dec_lnf_b"));
  Mat<T> dg_mem = Mat<T>::Zero(d, g_mem.cols());
  for (int l = config_.dec_layers - 1; l >= 0; --l) {
    const std::string pre = "dec" + std::to_string(l);
    auto& lc = ch.dec_layers[l];
    Mat<T> relu = lc.ff_h.cwiseMax(T(0));
    G(pre + ".ff2_w") += dx * relu.transpose();
    G(pre + ".ff2_b").col(0) += dx.rowwise().sum();
    Mat<T> drelu = Pm(pre + ".ff2_w").transpose() * dx;
    drelu = (lc.ff_h.array() > T(0)).select(drelu, Mat<T>::Zero(drelu.rows(), drelu.cols()));
    G(pre + ".ff1_w") += drelu * lc.ff_in.transpose();
    G(pre + ".ff1_b").col(0) += drelu.rowwise().sum();
    Mat<T> dh3 = Pm(pre + ".ff1_w").transpose() * drelu;
    dx += layernorm_bw(dh3, lc.ln3, Col<T>(Pm(pre + ".ln3_g").col(0)),
                       G(pre + ".ln3_g"), G(pre + ".ln3_b"));
    Mat<T> dh2 = cross_attention_bw(dx, lc.cross, Pm(pre + ".q_w"), Pm(pre + ".kv_w"),
                                    Pm(pre + ".cproj_w"), config_.dec_heads,
                                    G(pre + ".q_w"), G(pre + ".q_b"), G(pre + ".kv_w"),
                                    G(pre + ".kv_b"), G(pre + ".cproj_w"),
                                    G(pre + ".cproj_b"), g_mem, dg_mem);
    dx += layernorm_bw(dh2, lc.ln2, Col<T>(Pm(pre + ".ln2_g").col(0)),
                       G(pre + ".ln2_g"), G(pre + ".ln2_b"));
    Mat<T> dh1 = self_attention_bw(dx, lc.att, Pm(pre + ".qkv_w"), Pm(pre + ".proj_w"),
                                   config_.dec_heads, G(pre + ".qkv_w"),
                                   G(pre + ".qkv_b"), G(pre + ".proj_w"),
                                   G(pre + ".proj_b"));
    dx += layernorm_bw(dh1, lc.ln1, Col<T>(Pm(pre + ".ln1_g").col(0)),
                       G(pre + ".ln1_g"), G(pre + ".ln1_b"));
  }

  for (int t = 0; t < n; ++t) {
    G("act_embed").col(w.steps[t].prev_action) += dx.col(t);
    G("hand_embed").col(w.steps[t].step->object_in_hand ? 1 : 0) += dx.col(t);
  }

  const int np = config_.n_patch;
  const int n_det = config_.detection ? 10 : 0;
  const int ng = static_cast<int>(g_mem.cols());
  for (int t = 0; t < n; ++t) {
    auto& f = ch.frames[t];
    const int total = 2 * np + n_det + ng + 1;
    Mat<T> dtok = Mat<T>::Zero(d, total);
    dtok.col(total - 1) = dx.col(t);
    dtok = layernorm_bw(dtok, f.lnf, Col<T>(Pm("enc_lnf_g").col(0)), G("enc_lnf_g"),
                        G("enc_lnf_b"));
    for (int l = config_.enc_layers - 1; l >= 0; --l) {
      const std::string pre = "enc" + std::to_string(l);
      auto& lc = f.layers[l];
      Mat<T> relu = lc.ff_h.cwiseMax(T(0));
      G(pre + ".ff2_w") += dtok * relu.transpose();
      G(pre + ".ff2_b").col(0) += dtok.rowwise().sum();
      Mat<T> drelu = Pm(pre + ".ff2_w").transpose() * dtok;
      drelu = (lc.ff_h.array() > T(0))
                  .select(drelu, Mat<T>::Zero(drelu.rows(), drelu.cols()));
      G(pre + ".ff1_w") += drelu * lc.ff_in.transpose();
      G(pre + ".ff1_b").col(0) += drelu.rowwise().sum();
      Mat<T> dh3 = Pm(pre + ".ff1_w").transpose() * drelu;
      dtok += layernorm_bw(dh3, lc.ln3, Col<T>(Pm(pre + ".ln3_g").col(0)),
                           G(pre + ".ln3_g"), G(pre + ".ln3_b"));
      Mat<T> dh1 = self_attention_bw(dtok, lc.att, Pm(pre + ".qkv_w"),
                                     Pm(pre + ".proj_w"), config_.enc_heads,
                                     G(pre + ".qkv_w"), G(pre + ".qkv_b"),
                                     G(pre + ".proj_w"), G(pre + ".proj_b"));
      dtok += layernorm_bw(dh1, lc.ln1, Col<T>(Pm(pre + ".ln1_g").col(0)),
                           G(pre + ".ln1_g"), G(pre + ".ln1_b"));
    }

    G("cls_embed").col(0) += dtok.col(total - 1);
    dg_mem += dtok.middleCols(2 * np + n_det, ng);
    if (config_.detection) {
      Mat<T> ddet = dtok.middleCols(2 * np, 10);
      G("coord_embed") += ddet;
      Mat<T> dln = (f.det_post_ln.array() > T(0))
                       .select(ddet, Mat<T>::Zero(ddet.rows(), ddet.cols()));
      Mat<T> dlin = layernorm_bw(dln, f.det_ln, Col<T>(Pm("det_ln_g").col(0)),
                                 G("det_ln_g"), G("det_ln_b"));
      G("det_w") += dlin * f.det_sin.transpose();
      G("det_b").col(0) += dlin.rowwise().sum();
    }
    Mat<T> dpatch = dtok.leftCols(2 * np);
    for (int i = 0; i < np; ++i) {
      G("cam_embed").col(0) += dpatch.col(i);
      G("cam_embed").col(1) += dpatch.col(np + i);
      G("col_embed").col(i) += dpatch.col(i) + dpatch.col(np + i);
    }
    Mat<T> dh2 = layernorm_bw(dpatch, f.img_ln, Col<T>(Pm("img_ln_g").col(0)),
                              G("img_ln_g"), G("img_ln_b"));
    G("img_l2_w") += dh2 * f.img_h1_relu.transpose();
    G("img_l2_b").col(0) += dh2.rowwise().sum();
    Mat<T> drelu = Pm("img_l2_w").transpose() * dh2;
    drelu = (f.img_h1.array() > T(0))
                .select(drelu, Mat<T>::Zero(drelu.rows(), drelu.cols()));
    G("img_l1_w") += drelu * f.patch_pre.transpose();
    G("img_l1_b").col(0) += drelu.rowwise().sum();
    Mat<T> dpre = Pm("img_l1_w").transpose() * drelu;
    const StoredStep& s = *w.steps[t].step;
    for (int i = 0; i < np; ++i) {
      G("patch_embed").col(s.nav_cls[i]) += dpre.col(i);
      G("patch_embed").col(s.manip_cls[i]) += dpre.col(np + i);
      G("depth_w").col(0) += dpre.col(i) * static_cast<T>(s.nav_depth[i] / 255.0) +
                             dpre.col(np + i) * static_cast<T>(s.manip_depth[i] / 255.0);
    }
  }

  Mat<T> dh2g = layernorm_bw(dg_mem, ch.goal_ln, Col<T>(Pm("goal_ln_g").col(0)),
                             G("goal_ln_g"), G("goal_ln_b"));
  G("goal_l2_w") += dh2g * ch.goal_h1_relu.transpose();
  G("goal_l2_b").col(0) += dh2g.rowwise().sum();
  Mat<T> dgrelu = Pm("goal_l2_w").transpose() * dh2g;
  dgrelu = (ch.goal_h1.array() > T(0))
               .select(dgrelu, Mat<T>::Zero(dgrelu.rows(), dgrelu.cols()));
  G("goal_l1_w") += dgrelu * ch.g_raw.transpose();
  G("goal_l1_b").col(0) += dgrelu.rowwise().sum();
  Mat<T> dgraw = Pm("goal_l1_w").transpose() * dgrelu;
  for (size_t i = 0; i < w.goal_tokens.size(); ++i)
    G("tok_embed").col(w.goal_tokens[i]) += dgraw.col(static_cast<int>(i));

  return loss;
}

// ---------------------------------------------------------------- rollout

template <typename T>
std::unique_ptr<typename Model<T>::Rollout> Model<T>::start_rollout(
    const std::vector<int>& goal_tokens) const {
  ForwardPass<T> fp(*this, params_);
  auto r = std::make_unique<Rollout>();
  r->g_mem = fp.goal_memory(goal_tokens);
  r->cross_kv.resize(config_.dec_layers);
  r->self_k.resize(config_.dec_layers);
  r->self_v.resize(config_.dec_layers);
  for (int l = 0; l < config_.dec_layers; ++l) {
    const std::string pre = "dec" + std::to_string(l);
    r->cross_kv[l] = (params_[tensor_index(pre + ".kv_w")] * r->g_mem).colwise() +
                     Col<T>(params_[tensor_index(pre + ".kv_b")].col(0));
  }
  return r;
}

template <typename T>
Col<T> Model<T>::rollout_step(Rollout& r, const StoredStep& obs, int prev_action,
                              int time_index) const {
  ForwardPass<T> fp(*this, params_);
  typename Model<T>::Impl::Frame frame;
  const Col<T> v = fp.encode_frame(obs, r.g_mem, frame);
  const int d = config_.d_visual;
  const int dh = d / config_.dec_heads;

  auto P = [&](const std::string& name) -> const Mat<T>& {
    return params_[tensor_index(name)];
  };
  auto ln_col = [&](const Col<T>& x, const Mat<T>& g, const Mat<T>& b) {
    const T mu = x.mean();
    const Col<T> c = (x.array() - mu).matrix();
    const T var = c.squaredNorm() / static_cast<T>(x.size());
    const T inv = T(1) / std::sqrt(var + static_cast<T>(1e-5));
    return Col<T>((g.col(0).array() * (c * inv).array() + b.col(0).array()).matrix());
  };

  Col<T> x = v + sinusoidal<T>(d, time_index) + P("act_embed").col(prev_action) +
             P("hand_embed").col(obs.object_in_hand ? 1 : 0);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  for (int l = 0; l < config_.dec_layers; ++l) {
    const std::string pre = "dec" + std::to_string(l);
    Col<T> h = ln_col(x, P(pre + ".ln1_g"), P(pre + ".ln1_b"));
    Col<T> qkv = P(pre + ".qkv_w") * h + P(pre + ".qkv_b").col(0);
    r.self_k[l].push_back(qkv.segment(d, d));
    r.self_v[l].push_back(qkv.segment(2 * d, d));
    const int hist = static_cast<int>(r.self_k[l].size());
    Col<T> attn_out(d);
    for (int head = 0; head < config_.dec_heads; ++head) {
      const auto q = qkv.segment(head * dh, dh);
      Col<T> scores(hist);
      for (int i = 0; i < hist; ++i)
        scores[i] = q.dot(r.self_k[l][i].segment(head * dh, dh)) * scale;
      const T mx = scores.maxCoeff();
      Col<T> p = (scores.array() - mx).exp().matrix();
      p /= p.sum();
      Col<T> o = Col<T>::Zero(dh);
      for (int i = 0; i < hist; ++i)
        o += r.self_v[l][i].segment(head * dh, dh) * p[i];
      attn_out.segment(head * dh, dh) = o;
    }
    x += P(pre + ".proj_w") * attn_out + P(pre + ".proj_b").col(0);

    Col<T> h2 = ln_col(x, P(pre + ".ln2_g"), P(pre + ".ln2_b"));
    Col<T> q2 = P(pre + ".q_w") * h2 + P(pre + ".q_b").col(0);
    const Mat<T>& kv = r.cross_kv[l];
    const int m = static_cast<int>(kv.cols());
    Col<T> cross_out(d);
    for (int head = 0; head < config_.dec_heads; ++head) {
      const auto q = q2.segment(head * dh, dh);
      Col<T> scores(m);
      for (int i = 0; i < m; ++i)
        scores[i] = q.dot(kv.col(i).segment(head * dh, dh)) * scale;
      const T mx = scores.maxCoeff();
      Col<T> p = (scores.array() - mx).exp().matrix();
      p /= p.sum();
      Col<T> o = Col<T>::Zero(dh);
      for (int i = 0; i < m; ++i) o += kv.col(i).segment(d + head * dh, dh) * p[i];
      cross_out.segment(head * dh, dh) = o;
    }
    x += P(pre + ".cproj_w") * cross_out + P(pre + ".cproj_b").col(0);

    Col<T> h3 = ln_col(x, P(pre + ".ln3_g"), P(pre + ".ln3_b"));
    Col<T> ff = P(pre + ".ff1_w") * h3 + P(pre + ".ff1_b").col(0);
    ff = ff.cwiseMax(T(0));
    x += P(pre + ".ff2_w") * ff + P(pre + ".ff2_b").col(0);
  }
  x = ln_col(x, P("dec_lnf_g"), P("dec_lnf_b"));
  ++r.t;
  return P("head_w") * x + P("head_b").col(0);
}

// ---------------------------------------------------------------- trainer

template <typename T>
Trainer<T>::Trainer(Model<T>& model, const TrainConfig& config)
    : model_(model), config_(config) {
  for (const auto& p : model.params()) {
    m_.push_back(Mat<T>::Zero(p.rows(), p.cols()));
    v_.push_back(Mat<T>::Zero(p.rows(), p.cols()));
  }
}

template <typename T>
T Trainer<T>::train_step(const std::vector<Window>& batch) {
  int64_t total_steps = 0;
  for (const auto& w : batch) total_steps += w.steps.size();
  if (total_steps == 0) throw std::runtime_error("train_step: empty batch");
  const T scale = T(1) / static_cast<T>(total_steps);

  const int threads =
      std::max(1, std::min<int>(config_.threads, static_cast<int>(batch.size())));
  std::vector<std::vector<Mat<T>>> grad_buffers(threads);
  std::vector<T> losses(threads, T(0));
  for (int w = 0; w < threads; ++w) {
    grad_buffers[w].reserve(model_.params().size());
    for (const auto& p : model_.params())
      grad_buffers[w].push_back(Mat<T>::Zero(p.rows(), p.cols()));
  }
  auto work = [&](int worker) {
    for (size_t i = worker; i < batch.size(); i += threads)
      losses[worker] += model_.forward_backward(batch[i], scale, grad_buffers[worker]);
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  auto& grads = grad_buffers[0];
  for (int w = 1; w < threads; ++w)
    for (size_t i = 0; i < grads.size(); ++i) grads[i] += grad_buffers[w][i];
  T loss = T(0);
  for (T l : losses) loss += l;

  if (!std::isfinite(static_cast<double>(loss)))
    throw std::runtime_error("train_step: non-finite loss");

  ++step_;
  const T b1 = static_cast<T>(config_.beta1);
  const T b2 = static_cast<T>(config_.beta2);
  const T bc1 = T(1) - std::pow(b1, static_cast<T>(step_));
  const T bc2 = T(1) - std::pow(b2, static_cast<T>(step_));
  const T lr = static_cast<T>(config_.lr);
  const T wd = static_cast<T>(config_.weight_decay);
  const T eps = static_cast<T>(config_.eps);
  auto& params = model_.params();
  for (size_t i = 0; i < params.size(); ++i) {
    const T gnorm = grads[i].norm();
    if (!std::isfinite(static_cast<double>(gnorm)))
      throw std::runtime_error("train_step: non-finite gradient in " +
                               model_.specs()[i].name);
    m_[i] = b1 * m_[i] + (T(1) - b1) * grads[i];
    v_[i] = (b2 * v_[i].array() + (T(1) - b2) * grads[i].array().square()).matrix();
    const auto mhat = m_[i].array() / bc1;
    const auto vhat = v_[i].array() / bc2;
    // Decoupled weight decay on weight matrices only.
    const auto& name = model_.specs()[i].name;
    const bool decay = !(name.ends_with("_b") || name.ends_with("_g"));
    params[i].array() -=
        lr * (mhat / (vhat.sqrt() + eps) + (decay ? wd : T(0)) * params[i].array());
  }
  return loss;
}

// ----------------------------------------------------------------- windows

WindowSampler::WindowSampler(const Catalog& catalog, const Tokenizer& tokenizer,
                             const PolicyConfig& config,
                             const std::vector<EpisodeRecord>* episodes)
    : tokenizer_(&tokenizer), config_(&config), episodes_(episodes) {
  (void)catalog;
  if (episodes_->empty()) throw std::runtime_error("window sampler: no episodes");
}

Window WindowSampler::sample(Rng& rng) const {
  const EpisodeRecord& e = (*episodes_)[rng.uniform_index(episodes_->size())];
  const int len = static_cast<int>(e.steps.size());
  const int wlen = std::min(len, config_->t_ctx);
  const int max_start = len - wlen;
  const int start = max_start > 0 ? static_cast<int>(rng.uniform_int(max_start + 1)) : 0;
  const auto times = shift_time_indices(start, wlen, config_->l_shift, rng);
  Window w;
  w.goal_tokens = tokenizer_->encode(e.task.instruction, config_->n_goal_max);
  w.steps.resize(wlen);
  for (int i = 0; i < wlen; ++i) {
    const int t = start + i;
    w.steps[i].step = &e.steps[t];
    w.steps[i].prev_action =
        t == 0 ? config_->n_actions : static_cast<int>(e.steps[t - 1].action);
    w.steps[i].time_index = times[i];
    w.steps[i].expert_action = static_cast<int>(e.steps[t].action);
  }
  return w;
}

// -------------------------------------------------------------- checkpoint

namespace {

constexpr char kCkptMagic[8] = {'D', 'O', 'M', 'U', 'S', 'C', 'K', 'P'};

void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(static_cast<const char*>(p), n);
}
template <typename V>
void put(std::string& out, V v) {
  put_bytes(out, &v, sizeof v);
}
void put_str(std::string& out, const std::string& s) {
  put<uint32_t>(out, static_cast<uint32_t>(s.size()));
  put_bytes(out, s.data(), s.size());
}

struct CkptReader {
  const std::string& buf;
  size_t pos = 0;
  void get_bytes(void* p, size_t n) {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  template <typename V>
  V get() {
    V v;
    get_bytes(&v, sizeof v);
    return v;
  }
  std::string get_str() {
    const auto n = get<uint32_t>();
    std::string s(n, '\0');
    get_bytes(s.data(), n);
    return s;
  }
};

void put_tensors(std::string& out, const std::vector<Mat<float>>& ts) {
  put<uint32_t>(out, static_cast<uint32_t>(ts.size()));
  for (const auto& t : ts) {
    put<uint32_t>(out, static_cast<uint32_t>(t.rows()));
    put<uint32_t>(out, static_cast<uint32_t>(t.cols()));
    for (int r = 0; r < t.rows(); ++r)  // row-major on the wire
      for (int c = 0; c < t.cols(); ++c) put<float>(out, t(r, c));
  }
}

std::vector<Mat<float>> get_tensors(CkptReader& r) {
  const auto n = r.get<uint32_t>();
  std::vector<Mat<float>> out(n);
  for (auto& t : out) {
    const auto rows = r.get<uint32_t>();
    const auto cols = r.get<uint32_t>();
    t.resize(rows, cols);
    for (uint32_t i = 0; i < rows; ++i)
      for (uint32_t j = 0; j < cols; ++j) t(i, j) = r.get<float>();
  }
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out;
  put_bytes(out, kCkptMagic, sizeof kCkptMagic);
  put<uint32_t>(out, 1);
  const auto& c = ckpt.config;
  for (int v : {c.d_goal, c.d_visual, c.n_goal_max, c.n_patch, c.n_class, c.enc_layers,
                c.enc_heads, c.dec_layers, c.dec_heads, c.t_ctx, c.l_shift, c.n_actions,
                c.vocab, c.detection ? 1 : 0})
    put<int32_t>(out, v);
  put<int64_t>(out, ckpt.step);
  put<uint32_t>(out, static_cast<uint32_t>(ckpt.vocab.size()));
  for (const auto& w : ckpt.vocab) put_str(out, w);
  put_tensors(out, ckpt.params);
  put<uint8_t>(out, ckpt.m.empty() ? 0 : 1);
  if (!ckpt.m.empty()) {
    put_tensors(out, ckpt.m);
    put_tensors(out, ckpt.v);
  }
  put<uint64_t>(out, fnv1a(out.data(), out.size()));
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  const size_t n = std::fwrite(out.data(), 1, out.size(), f);
  std::fclose(f);
  if (n != out.size()) throw std::runtime_error("short checkpoint write");
}

Checkpoint load_checkpoint(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string buf;
  char tmp[65536];
  size_t n;
  while ((n = std::fread(tmp, 1, sizeof tmp, f)) > 0) buf.append(tmp, n);
  std::fclose(f);
  if (buf.size() < 24) throw std::runtime_error("checkpoint: too small");
  uint64_t sum;
  std::memcpy(&sum, buf.data() + buf.size() - 8, 8);
  if (fnv1a(buf.data(), buf.size() - 8) != sum)
    throw std::runtime_error("checkpoint: checksum mismatch");
  CkptReader r{buf};
  char magic[8];
  r.get_bytes(magic, 8);
  if (std::memcmp(magic, kCkptMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  if (r.get<uint32_t>() != 1) throw std::runtime_error("checkpoint: bad version");
  Checkpoint ckpt;
  auto& c = ckpt.config;
  c.d_goal = r.get<int32_t>();
  c.d_visual = r.get<int32_t>();
  c.n_goal_max = r.get<int32_t>();
  c.n_patch = r.get<int32_t>();
  c.n_class = r.get<int32_t>();
  c.enc_layers = r.get<int32_t>();
  c.enc_heads = r.get<int32_t>();
  c.dec_layers = r.get<int32_t>();
  c.dec_heads = r.get<int32_t>();
  c.t_ctx = r.get<int32_t>();
  c.l_shift = r.get<int32_t>();
  c.n_actions = r.get<int32_t>();
  c.vocab = r.get<int32_t>();
  c.detection = r.get<int32_t>() != 0;
  ckpt.step = r.get<int64_t>();
  const auto vs = r.get<uint32_t>();
  ckpt.vocab.reserve(vs);
  for (uint32_t i = 0; i < vs; ++i) ckpt.vocab.push_back(r.get_str());
  ckpt.params = get_tensors(r);
  if (r.get<uint8_t>()) {
    ckpt.m = get_tensors(r);
    ckpt.v = get_tensors(r);
  }
  return ckpt;
}

template <typename T>
Checkpoint make_checkpoint(const Model<T>& model, const Tokenizer& tokenizer,
                           const Trainer<T>* trainer) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.vocab = tokenizer.vocab();
  for (const auto& p : model.params()) ckpt.params.push_back(p.template cast<float>());
  if (trainer) {
    auto* tr = const_cast<Trainer<T>*>(trainer);
    ckpt.step = tr->step_count();
    for (const auto& m : tr->moment1()) ckpt.m.push_back(m.template cast<float>());
    for (const auto& v : tr->moment2()) ckpt.v.push_back(v.template cast<float>());
  }
  return ckpt;
}

template <typename T>
void restore_model(const Checkpoint& ckpt, Model<T>& model) {
  auto& params = model.params();
  if (ckpt.params.size() != params.size())
    throw std::runtime_error("checkpoint: tensor count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    if (ckpt.params[i].rows() != params[i].rows() ||
        ckpt.params[i].cols() != params[i].cols())
      throw std::runtime_error("checkpoint: shape mismatch in " +
                               model.specs()[i].name);
    params[i] = ckpt.params[i].template cast<T>();
  }
}

template class Model<float>;
template class Model<double>;
template class Trainer<float>;
template class Trainer<double>;
template Checkpoint make_checkpoint<float>(const Model<float>&, const Tokenizer&,
                                           const Trainer<float>*);
template Checkpoint make_checkpoint<double>(const Model<double>&, const Tokenizer&,
                                            const Trainer<double>*);
template void restore_model<float>(const Checkpoint&, Model<float>&);
template void restore_model<double>(const Checkpoint&, Model<double>&);

}  // namespace domus::policy
