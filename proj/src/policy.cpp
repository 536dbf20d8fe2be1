#include "pvp/policy.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "pvp/binary_io.hpp"
#include "pvp/errors.hpp"

namespace pvp {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kStdCenter = (kLogStdMax + kLogStdMin) / 2.0;
constexpr double kStdHalf = (kLogStdMax - kLogStdMin) / 2.0;

// Sorting first makes the result independent of the order of the terms.
template <class S>
S log_sum_exp(std::vector<S> v) {
  std::sort(v.begin(), v.end());
  const S m = v.back();
  S sum = 0;
  for (const S x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

template <class S>
S softplus(S x) {
  return std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class S>
S sigmoid(S x) {
  if (x >= 0) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <class S>
struct Activations {
  std::vector<S> h1, h2, out;
};

template <class S>
void forward(const MixtureNet<S>& net, const SparseInput& x, Activations<S>& a) {
  const NetShape& sh = net.shape;
  const int H = sh.hidden, O = sh.out();
  const S* th = net.theta.data();
  a.h1.assign(th + sh.b1(), th + sh.b1() + H);
  for (std::size_t n = 0; n < x.index.size(); ++n) {
    const S v = static_cast<S>(x.value[n]);
    const S* w = th + sh.w1() + static_cast<std::size_t>(x.index[n]) * H;
    for (int j = 0; j < H; ++j) a.h1[j] += v * w[j];
  }
  for (auto& h : a.h1) h = std::tanh(h);
  a.h2.assign(th + sh.b2(), th + sh.b2() + H);
  for (int j = 0; j < H; ++j) {
    const S v = a.h1[j];
    const S* w = th + sh.w2() + static_cast<std::size_t>(j) * H;
    for (int k = 0; k < H; ++k) a.h2[k] += v * w[k];
  }
  for (auto& h : a.h2) h = std::tanh(h);
  a.out.assign(th + sh.b3(), th + sh.b3() + O);
  for (int k = 0; k < H; ++k) {
    const S v = a.h2[k];
    const S* w = th + sh.w3() + static_cast<std::size_t>(k) * O;
    for (int m = 0; m < O; ++m) a.out[m] += v * w[m];
  }
}

template <class S>
typename MixtureNet<S>::Head make_head(const MixtureNet<S>& net, const std::vector<S>& out) {
  const int K = net.shape.modes;
  typename MixtureNet<S>::Head h;
  std::vector<S> logits(K);
  h.mean.resize(K * kActionDim);
  h.log_std.resize(K * kActionDim);
  for (int k = 0; k < K; ++k) {
    logits[k] = out[k * kHeadWidth];
    for (int d = 0; d < kActionDim; ++d) {
      h.mean[k * kActionDim + d] = out[k * kHeadWidth + 1 + d];
      const S raw = out[k * kHeadWidth + 1 + kActionDim + d];
      h.log_std[k * kActionDim + d] =
          net.fixed_variance ? S(0) : S(kStdCenter) + S(kStdHalf) * std::tanh((raw - S(kStdCenter)) / S(kStdHalf));
    }
  }
  const S lse = log_sum_exp(logits);
  h.log_w.resize(K);
  for (int k = 0; k < K; ++k) h.log_w[k] = logits[k] - lse;
  h.gripper_logit = out[K * kHeadWidth];
  return h;
}

template <class S>
void backward(const MixtureNet<S>& net, const SparseInput& x, const Activations<S>& a, const std::vector<S>& d_out,
              std::vector<S>& g) {
  const NetShape& sh = net.shape;
  const int H = sh.hidden, O = sh.out();
  const S* th = net.theta.data();
  std::vector<S> d2(H, S(0)), d1(H, S(0));
  for (int m = 0; m < O; ++m) g[sh.b3() + m] += d_out[m];
  for (int k = 0; k < H; ++k) {
    const S* w = th + sh.w3() + static_cast<std::size_t>(k) * O;
    S* gw = g.data() + sh.w3() + static_cast<std::size_t>(k) * O;
    S acc = 0;
    for (int m = 0; m < O; ++m) {
      gw[m] += a.h2[k] * d_out[m];
      acc += w[m] * d_out[m];
    }
    d2[k] = acc * (S(1) - a.h2[k] * a.h2[k]);
  }
  for (int k = 0; k < H; ++k) g[sh.b2() + k] += d2[k];
  for (int j = 0; j < H; ++j) {
    const S* w = th + sh.w2() + static_cast<std::size_t>(j) * H;
    S* gw = g.data() + sh.w2() + static_cast<std::size_t>(j) * H;
    S acc = 0;
    for (int k = 0; k < H; ++k) {
      gw[k] += a.h1[j] * d2[k];
      acc += w[k] * d2[k];
    }
    d1[j] = acc * (S(1) - a.h1[j] * a.h1[j]);
  }
  for (int j = 0; j < H; ++j) g[sh.b1() + j] += d1[j];
  for (std::size_t n = 0; n < x.index.size(); ++n) {
    const S v = static_cast<S>(x.value[n]);
    S* gw = g.data() + sh.w1() + static_cast<std::size_t>(x.index[n]) * H;
    for (int j = 0; j < H; ++j) gw[j] += v * d1[j];
  }
}

bool finite_sample(const Sample& s) {
  for (const float v : s.x.value) {
    if (!std::isfinite(v)) return false;
  }
  return std::all_of(s.action.begin(), s.action.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

void TrainConfig::validate() const {
  if (batch < 1 || epochs < 0 || min_steps < 0) throw ConfigError("batch and epoch counts must be positive");
  if (!(step_size > 0.0)) throw ConfigError("step size must be positive");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip norm must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(sigma_eval > 0.0)) throw ConfigError("sigma_eval must be positive");
  if (modes < 1 || hidden < 1 || frame_stack < 1) throw ConfigError("modes, hidden width and stack must be positive");
  if (fixed_variance && modes != 1) throw ConfigError("the fixed-variance head has a single mode");
  if (!(holdout >= 0.0 && holdout < 1.0)) throw ConfigError("holdout fraction must lie in [0, 1)");
}

template <class S>
void MixtureNet<S>::init(Rng& rng) {
  theta.assign(shape.count(), S(0));
  const int H = shape.hidden, O = shape.out();
  const double s1 = 1.0 / std::sqrt(static_cast<double>(std::max(shape.input, 1)));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(H));
  for (std::size_t i = shape.w1(); i < shape.b1(); ++i) theta[i] = static_cast<S>(rng.normal(s1));
  for (std::size_t i = shape.w2(); i < shape.b2(); ++i) theta[i] = static_cast<S>(rng.normal(s2));
  for (std::size_t i = shape.w3(); i < shape.b3(); ++i) theta[i] = static_cast<S>(rng.normal(0.1 * s2));
  for (int m = 0; m < O; ++m) theta[shape.b3() + m] = static_cast<S>(rng.normal(0.1));
}

template <class S>
typename MixtureNet<S>::Head MixtureNet<S>::head(const SparseInput& x) const {
  Activations<S> a;
  forward(*this, x, a);
  return make_head(*this, a.out);
}

template <class S>
S MixtureNet<S>::head_nll(const Head& h, const std::array<double, kActionDim>& a, int gripper) {
  const int K = static_cast<int>(h.log_w.size());
  std::vector<S> comp(K);
  for (int k = 0; k < K; ++k) {
    S c = h.log_w[k];
    for (int d = 0; d < kActionDim; ++d) {
      const S s = h.log_std[k * kActionDim + d];
      const S z = (static_cast<S>(a[d]) - h.mean[k * kActionDim + d]) / std::exp(s);
      c += -S(0.5) * z * z - s - S(kHalfLog2Pi);
    }
    comp[k] = c;
  }
  return -log_sum_exp(comp) + softplus(h.gripper_logit) - static_cast<S>(gripper) * h.gripper_logit;
}

template <class S>
S MixtureNet<S>::loss(std::span<const Sample> batch, std::vector<S>* grad, LossKind kind,
                      std::size_t batch_index) const {
  if (batch.empty()) throw TrainingError("empty batch", batch_index);
  if (kind == LossKind::mse && (shape.modes != 1 || !fixed_variance)) {
    throw ConfigError("the MSE objective needs a single fixed-variance mode");
  }
  if (grad && grad->size() != theta.size()) grad->assign(theta.size(), S(0));
  const int K = shape.modes, O = shape.out();
  const S inv_n = S(1) / static_cast<S>(batch.size());
  double total = 0.0;
  Activations<S> act;
  std::vector<S> d_out(O);
  std::vector<S> comp(K);
  for (const Sample& smp : batch) {
    if (!finite_sample(smp)) throw TrainingError("non-finite training input", batch_index);
    forward(*this, smp.x, act);
    const Head h = make_head(*this, act.out);
    const S g = h.gripper_logit;
    const S y = static_cast<S>(smp.gripper);
    S l = softplus(g) - y * g;
    std::fill(d_out.begin(), d_out.end(), S(0));
    if (kind == LossKind::mse) {
      for (int d = 0; d < kActionDim; ++d) {
        const S diff = static_cast<S>(smp.action[d]) - h.mean[d];
        l += S(0.5) * diff * diff;
        d_out[1 + d] = -diff * inv_n;
      }
    } else {
      for (int k = 0; k < K; ++k) {
        S c = h.log_w[k];
        for (int d = 0; d < kActionDim; ++d) {
          const S s = h.log_std[k * kActionDim + d];
          const S z = (static_cast<S>(smp.action[d]) - h.mean[k * kActionDim + d]) / std::exp(s);
          c += -S(0.5) * z * z - s - S(kHalfLog2Pi);
        }
        comp[k] = c;
      }
      const S lse = log_sum_exp(comp);
      l += -lse;
      if (grad) {
        for (int k = 0; k < K; ++k) {
          const S r = std::exp(comp[k] - lse);
          d_out[k * kHeadWidth] = (std::exp(h.log_w[k]) - r) * inv_n;
          for (int d = 0; d < kActionDim; ++d) {
            const S s = h.log_std[k * kActionDim + d];
            const S sigma = std::exp(s);
            const S diff = static_cast<S>(smp.action[d]) - h.mean[k * kActionDim + d];
            const S z = diff / sigma;
            d_out[k * kHeadWidth + 1 + d] = -(r * z / sigma) * inv_n;
            if (!fixed_variance) {
              const S raw = act.out[k * kHeadWidth + 1 + kActionDim + d];
              const S t = std::tanh((raw - S(kStdCenter)) / S(kStdHalf));
              d_out[k * kHeadWidth + 1 + kActionDim + d] = r * (S(1) - z * z) * (S(1) - t * t) * inv_n;
            }
          }
        }
      }
    }
    if (!std::isfinite(static_cast<double>(l))) throw TrainingError("non-finite loss", batch_index);
    total += static_cast<double>(l);
    if (grad) {
      d_out[K * kHeadWidth] = (sigmoid(g) - y) * inv_n;
      backward(*this, smp.x, act, d_out, *grad);
    }
  }
  return static_cast<S>(total / static_cast<double>(batch.size()));
}

template struct MixtureNet<float>;
template struct MixtureNet<double>;

SparseInput encode(std::span<const float> stack, const Normalizer& n, int frame_stack) {
  constexpr int F = ObservationFrame::kSize, R = ObservationFrame::kRasterSize;
  if (stack.size() != static_cast<std::size_t>(F) * frame_stack) throw DomainError("frame stack has the wrong size");
  SparseInput x;
  for (int f = 0; f < frame_stack; ++f) {
    const std::size_t base = static_cast<std::size_t>(f) * F;
    for (int i = 0; i < R; ++i) {
      const float v = stack[base + i];
      if (v != 0.0f) {
        x.index.push_back(static_cast<std::int32_t>(base + i));
        x.value.push_back(v);
      }
    }
    for (int i = 0; i < ObservationFrame::kProprio; ++i) {
      x.index.push_back(static_cast<std::int32_t>(base + R + i));
      x.value.push_back((stack[base + R + i] - n.proprio_mean[i]) / n.proprio_std[i]);
    }
  }
  return x;
}

Normalizer fit_normalizer(const std::vector<Episode>& episodes) {
  Normalizer n;
  std::array<double, ObservationFrame::kProprio> ps{}, pq{};
  std::array<double, kActionDim> as{}, aq{};
  double pc = 0.0, ac = 0.0;
  for (const auto& e : episodes) {
    if (!e.meta.success) continue;
    for (const auto& f : e.frames) {
      for (int i = 0; i < ObservationFrame::kProprio; ++i) {
        ps[i] += f.proprio[i];
        pq[i] += static_cast<double>(f.proprio[i]) * f.proprio[i];
      }
      pc += 1.0;
    }
    for (const auto& a : e.actions) {
      for (int d = 0; d < kActionDim; ++d) {
        as[d] += a.delta[d];
        aq[d] += a.delta[d] * a.delta[d];
      }
      ac += 1.0;
    }
  }
  if (pc > 0) {
    for (int i = 0; i < ObservationFrame::kProprio; ++i) {
      const double m = ps[i] / pc;
      n.proprio_mean[i] = static_cast<float>(m);
      n.proprio_std[i] = static_cast<float>(std::max(1e-3, std::sqrt(std::max(0.0, pq[i] / pc - m * m))));
    }
  }
  if (ac > 0) {
    for (int d = 0; d < kActionDim; ++d) {
      const double m = as[d] / ac;
      n.action_mean[d] = static_cast<float>(m);
      n.action_std[d] = static_cast<float>(std::max(1e-4, std::sqrt(std::max(0.0, aq[d] / ac - m * m))));
    }
  }
  return n;
}

std::vector<Sample> make_samples(const std::vector<Episode>& episodes, const Normalizer& n, int frame_stack) {
  std::vector<Sample> out;
  for (const auto& e : episodes) {
    if (!e.meta.success || e.frames.size() != e.actions.size() + 1) continue;
    for (std::size_t i = 0; i < e.actions.size(); ++i) {
      Sample s;
      s.x = encode(e.stack(i, frame_stack), n, frame_stack);
      for (int d = 0; d < kActionDim; ++d) {
        s.action[d] = (static_cast<float>(e.actions[i].delta[d]) - n.action_mean[d]) / n.action_std[d];
      }
      s.gripper = e.actions[i].gripper;
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

double mean_loss(const MixtureNet<float>& net, const std::vector<Sample>& set, int batch) {
  if (set.empty()) return std::nan("");
  double total = 0.0;
  for (std::size_t i = 0; i < set.size(); i += batch) {
    const std::size_t n = std::min<std::size_t>(batch, set.size() - i);
    total += static_cast<double>(net.loss(std::span(set).subspan(i, n), nullptr)) * n;
  }
  return total / static_cast<double>(set.size());
}

}  // namespace

TrainResult train_samples(const std::vector<Sample>& train_set, const std::vector<Sample>& heldout, int input_dim,
                          const TrainConfig& tc) {
  tc.validate();
  if (train_set.empty()) throw TrainingError("no training samples", 0);
  TrainResult res;
  Rng rng(derive_seed(tc.seed, 0x7a1));
  res.params.net = MixtureNet<float>({input_dim, tc.hidden, tc.modes}, tc.fixed_variance);
  res.params.net.init(rng);
  res.params.frame_stack = tc.frame_stack;
  res.params.sigma_eval = static_cast<float>(tc.sigma_eval);
  res.train_samples = train_set.size();
  res.heldout_samples = heldout.size();
  auto& net = res.params.net;

  const std::size_t per_epoch = (train_set.size() + tc.batch - 1) / tc.batch;
  int epochs = tc.epochs;
  if (tc.min_steps > 0) epochs = std::max<int>(epochs, static_cast<int>((tc.min_steps + per_epoch - 1) / per_epoch));

  const double init_train = mean_loss(net, train_set, tc.batch);
  res.log.push_back({0, init_train, heldout.empty() ? init_train : mean_loss(net, heldout, tc.batch)});

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<float> grad(net.theta.size()), velocity(net.theta.size(), 0.0f);
  std::vector<Sample> batch;
  const float lr = static_cast<float>(tc.step_size), mu = static_cast<float>(tc.momentum);
  for (int ep = 1; ep <= epochs; ++ep) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    double total = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      batch.clear();
      for (std::size_t i = b * tc.batch; i < std::min(order.size(), (b + 1) * tc.batch); ++i) {
        batch.push_back(train_set[order[i]]);
      }
      std::fill(grad.begin(), grad.end(), 0.0f);
      const float l = net.loss(batch, &grad, LossKind::nll, res.steps);
      total += static_cast<double>(l) * batch.size();
      float scale = 1.0f;
      if (tc.clip_norm > 0.0) {
        double sq = 0.0;
        for (const float g : grad) sq += static_cast<double>(g) * g;
        if (sq > tc.clip_norm * tc.clip_norm) scale = static_cast<float>(tc.clip_norm / std::sqrt(sq));
      }
      for (std::size_t i = 0; i < grad.size(); ++i) {
        velocity[i] = mu * velocity[i] - lr * scale * grad[i];
        net.theta[i] += velocity[i];
      }
      ++res.steps;
    }
    const double tl = total / static_cast<double>(order.size());
    if (!std::isfinite(tl)) throw TrainingError("training diverged", res.steps);
    res.log.push_back({ep, tl, heldout.empty() ? tl : mean_loss(net, heldout, tc.batch)});
  }
  return res;
}

TrainResult train(const std::vector<Episode>& episodes, const TrainConfig& tc) {
  tc.validate();
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (episodes[i].meta.success && !episodes[i].frames.empty()) usable.push_back(i);
  }
  if (usable.empty()) throw TrainingError("no successful rendered episodes to train on", 0);
  Rng rng(derive_seed(tc.seed, 0x5b1));
  for (std::size_t i = usable.size(); i > 1; --i) std::swap(usable[i - 1], usable[rng.index(i)]);
  std::size_t n_hold = static_cast<std::size_t>(std::floor(tc.holdout * usable.size()));
  if (n_hold >= usable.size()) n_hold = usable.size() - 1;
  std::vector<Episode> tr, ho;
  for (std::size_t i = 0; i < usable.size(); ++i) (i < n_hold ? ho : tr).push_back(episodes[usable[i]]);

  const Normalizer norm = fit_normalizer(tr);
  TrainResult res = train_samples(make_samples(tr, norm, tc.frame_stack), make_samples(ho, norm, tc.frame_stack),
                                  ObservationFrame::kSize * tc.frame_stack, tc);
  res.params.norm = norm;
  return res;
}

Action act(const PolicyParams& p, std::span<const float> stack, bool low_noise, Rng& rng) {
  const auto h = p.net.head(encode(stack, p.norm, p.frame_stack));
  const int K = p.net.shape.modes;
  int k = K - 1;
  double u = rng.uniform01();
  for (int i = 0; i < K; ++i) {
    const double w = std::exp(static_cast<double>(h.log_w[i]));
    if (u < w) {
      k = i;
      break;
    }
    u -= w;
  }
  Action a;
  for (int d = 0; d < kActionDim; ++d) {
    const double mean = h.mean[k * kActionDim + d];
    const double sd = p.norm.action_std[d];
    const double eps = rng.normal(1.0);
    if (low_noise) {
      a.delta[d] = mean * sd + p.norm.action_mean[d] + p.sigma_eval * eps;
    } else {
      a.delta[d] = (mean + std::exp(static_cast<double>(h.log_std[k * kActionDim + d])) * eps) * sd +
                   p.norm.action_mean[d];
    }
  }
  a.gripper = h.gripper_logit >= 0.0f ? 1 : 0;
  return a;
}

namespace {
constexpr char kParamsMagic[4] = {'P', 'V', 'P', 'P'};
constexpr std::uint32_t kParamsVersion = 1;
}  // namespace

std::vector<std::uint8_t> serialize(const PolicyParams& p) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kParamsMagic, kParamsMagic + 4);
  bin::put<std::uint32_t>(out, kParamsVersion);
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.net.shape.input));
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.net.shape.hidden));
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.net.shape.modes));
  bin::put<std::uint8_t>(out, p.net.fixed_variance ? 1 : 0);
  bin::put<std::uint8_t>(out, static_cast<std::uint8_t>(p.frame_stack));
  bin::put<std::uint16_t>(out, 0);
  bin::put<float>(out, p.sigma_eval);
  for (float v : p.norm.proprio_mean) bin::put<float>(out, v);
  for (float v : p.norm.proprio_std) bin::put<float>(out, v);
  for (float v : p.norm.action_mean) bin::put<float>(out, v);
  for (float v : p.norm.action_std) bin::put<float>(out, v);
  bin::put<std::uint64_t>(out, p.net.theta.size());
  for (float v : p.net.theta) bin::put<float>(out, v);
  bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(crc32(0L, out.data(), static_cast<uInt>(out.size()))));
  return out;
}

PolicyParams deserialize_params(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || !std::equal(kParamsMagic, kParamsMagic + 4, bytes.begin())) {
    throw IntegrityError("not a policy parameter file", 0);
  }
  const std::uint32_t stored = bin::Reader(bytes.subspan(bytes.size() - 4)).get<std::uint32_t>();
  const auto body = bytes.first(bytes.size() - 4);
  if (stored != static_cast<std::uint32_t>(crc32(0L, body.data(), static_cast<uInt>(body.size())))) {
    throw IntegrityError("policy parameter checksum mismatch", 0);
  }
  bin::Reader rd(body.subspan(4));
  if (rd.get<std::uint32_t>() != kParamsVersion) throw IntegrityError("unsupported parameter file version", 0);
  PolicyParams p;
  NetShape sh;
  sh.input = static_cast<int>(rd.get<std::uint32_t>());
  sh.hidden = static_cast<int>(rd.get<std::uint32_t>());
  sh.modes = static_cast<int>(rd.get<std::uint32_t>());
  const bool fixed = rd.get<std::uint8_t>() != 0;
  p.frame_stack = rd.get<std::uint8_t>();
  rd.get<std::uint16_t>();
  p.sigma_eval = rd.get<float>();
  for (auto& v : p.norm.proprio_mean) v = rd.get<float>();
  for (auto& v : p.norm.proprio_std) v = rd.get<float>();
  for (auto& v : p.norm.action_mean) v = rd.get<float>();
  for (auto& v : p.norm.action_std) v = rd.get<float>();
  const std::uint64_t n = rd.get<std::uint64_t>();
  if (n != sh.count() || rd.remaining() != n * sizeof(float)) throw IntegrityError("parameter layout mismatch", 0);
  p.net = MixtureNet<float>(sh, fixed);
  for (auto& v : p.net.theta) v = rd.get<float>();
  return p;
}

void save_params(const std::string& path, const PolicyParams& p) {
  const auto bytes = serialize(p);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing", 0);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path, 0);
}

PolicyParams load_params(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path, 0);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_params(bytes);
}

std::string epoch_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_nll,heldout_nll\n";
  char buf[96];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g\n", e.epoch, e.train_loss, e.heldout_loss);
    out += buf;
  }
  return out;
}

}  // namespace pvp
