#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pvp/collect.hpp"
#include "pvp/rng.hpp"
#include "pvp/trajectory.hpp"

namespace pvp {

constexpr int kActionDim = 6;
constexpr int kHeadWidth = 1 + 2 * kActionDim;  // logit, mean, raw log-std per mode

/// Log-std is squashed smoothly into (kLogStdMin, kLogStdMax).
constexpr double kLogStdMin = -2.5;
constexpr double kLogStdMax = 2.0;

struct TrainConfig {
  int batch = 64;
  int epochs = 50;
  int min_steps = 0;        // raises the epoch count for small datasets
  double step_size = 3e-3;
  double momentum = 0.9;
  double clip_norm = 5.0;   // global gradient-norm clip, 0 disables
  std::uint64_t seed = 0;
  int modes = 5;
  bool fixed_variance = false;  // deterministic-equivalent: unit variance, mean-only learning
  double sigma_eval = 1e-4;
  int hidden = 128;
  double holdout = 0.1;
  int frame_stack = 4;

  void validate() const;
};

/// Sparse input row; raster cells are mostly empty.
struct SparseInput {
  std::vector<std::int32_t> index;
  std::vector<float> value;
};

struct Sample {
  SparseInput x;
  std::array<double, kActionDim> action{};  // normalized
  int gripper = 0;
};

struct NetShape {
  int input = 0;
  int hidden = 128;
  int modes = 1;

  int out() const { return modes * kHeadWidth + 1; }
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return w1() + static_cast<std::size_t>(input) * hidden; }
  std::size_t w2() const { return b1() + hidden; }
  std::size_t b2() const { return w2() + static_cast<std::size_t>(hidden) * hidden; }
  std::size_t w3() const { return b2() + hidden; }
  std::size_t b3() const { return w3() + static_cast<std::size_t>(hidden) * out(); }
  std::size_t count() const { return b3() + out(); }
  bool operator==(const NetShape&) const = default;
};

enum class LossKind { nll, mse };

/// Mixture-density MLP: tanh(W1 x + b1) -> tanh(W2 h + b2) -> W3 h + b3.
/// Weight matrices are stored input-major so sparse rows touch contiguous memory.
template <class S>
struct MixtureNet {
  NetShape shape;
  bool fixed_variance = false;
  std::vector<S> theta;

  struct Head {
    std::vector<S> log_w;    // modes, log mixture weights
    std::vector<S> mean;     // modes * 6
    std::vector<S> log_std;  // modes * 6, after squashing
    S gripper_logit = 0;
  };

  MixtureNet() = default;
  MixtureNet(NetShape s, bool fixed_var) : shape(s), fixed_variance(fixed_var), theta(s.count(), S(0)) {}

  void init(Rng& rng);
  Head head(const SparseInput& x) const;
  /// Per-sample negative log-likelihood (mixture of diagonal Gaussians plus Bernoulli gripper).
  static S head_nll(const Head& h, const std::array<double, kActionDim>& a, int gripper);

  /// Mean loss over the batch; accumulates the gradient into `grad` when given.
  /// Throws TrainingError (tagged with `batch_index`) on non-finite inputs or loss.
  S loss(std::span<const Sample> batch, std::vector<S>* grad, LossKind kind = LossKind::nll,
         std::size_t batch_index = 0) const;
};

extern template struct MixtureNet<float>;
extern template struct MixtureNet<double>;

struct Normalizer {
  std::array<float, ObservationFrame::kProprio> proprio_mean{};
  std::array<float, ObservationFrame::kProprio> proprio_std{1, 1, 1, 1, 1, 1, 1};
  std::array<float, kActionDim> action_mean{};
  std::array<float, kActionDim> action_std{1, 1, 1, 1, 1, 1};
  bool operator==(const Normalizer&) const = default;
};

struct PolicyParams {
  MixtureNet<float> net;
  Normalizer norm;
  int frame_stack = 4;
  float sigma_eval = 1e-4f;

  bool operator==(const PolicyParams& o) const {
    return net.shape == o.net.shape && net.fixed_variance == o.net.fixed_variance && net.theta == o.net.theta &&
           norm == o.norm && frame_stack == o.frame_stack && sigma_eval == o.sigma_eval;
  }
};

/// Normalized sparse encoding of a raw frame stack.
SparseInput encode(std::span<const float> stack, const Normalizer& n, int frame_stack);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double heldout_loss = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<EpochLog> log;  // entry 0 is the untrained network
  std::size_t train_samples = 0;
  std::size_t heldout_samples = 0;
  std::size_t steps = 0;
};

/// Builds training tuples from successful rendered episodes.
std::vector<Sample> make_samples(const std::vector<Episode>& episodes, const Normalizer& n, int frame_stack);
Normalizer fit_normalizer(const std::vector<Episode>& episodes);

/// Momentum gradient descent on the likelihood objective. Throws TrainingError on divergence.
TrainResult train(const std::vector<Episode>& episodes, const TrainConfig& tc);
/// Same, on prepared samples (normalization already applied); no held-out split when heldout is empty.
TrainResult train_samples(const std::vector<Sample>& train_set, const std::vector<Sample>& heldout, int input_dim,
                          const TrainConfig& tc);

/// Samples an action; with low_noise every std is replaced by sigma_eval (in action units).
Action act(const PolicyParams& p, std::span<const float> stack, bool low_noise, Rng& rng);

std::vector<std::uint8_t> serialize(const PolicyParams& p);
PolicyParams deserialize_params(std::span<const std::uint8_t> bytes);
void save_params(const std::string& path, const PolicyParams& p);
PolicyParams load_params(const std::string& path);
std::string epoch_log_csv(const std::vector<EpochLog>& log);

}  // namespace pvp
