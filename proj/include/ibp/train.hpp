#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ibp/example.hpp"
#include "ibp/nn.hpp"
#include "ibp/perturb.hpp"
#include "ibp/verify.hpp"

namespace ibp::train {

enum class Regime { Normal, Augmentation, Adversarial, Verifiable };

const char* to_string(Regime regime);
/// Throws std::invalid_argument listing the accepted names.
Regime parse_regime(const std::string& name);

struct KappaSchedule {
  double start = 1.0;
  double end = 0.25;
  double warmup_fraction = 0.5;  // of the total number of optimiser steps
};

struct TrainConfig {
  Regime regime = Regime::Normal;
  std::size_t delta_train = 3;
  KappaSchedule kappa;
  double interpolation = 0.5;  // weight of the perturbed term (augmentation, adversarial)
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 20;
  std::size_t patience = 5;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

struct TrainState {
  std::uint64_t step = 0;
  double best_metric = -std::numeric_limits<double>::infinity();
  double best_tiebreak = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t epochs_without_improvement = 0;
  std::mt19937_64 rng;

  /// Records one validation result. Improvement is judged on (metric,
  /// tiebreak) lexicographically; it resets the patience counter.
  bool observe(std::size_t epoch, double metric, double tiebreak);
};

/// Linear from start to end over warmup_fraction * total_steps, then constant.
double kappa_schedule(std::uint64_t step, std::uint64_t total_steps, const KappaSchedule& cfg);

template <typename T>
struct LossResult {
  T loss = T{0};               // batch mean of the combined objective
  T clean_term = T{0};         // batch mean of the clean cross-entropy
  T perturbed_term = T{0};     // batch mean of the sampled, adversarial or worst-case term
  nn::GradientStore<T> grads;  // gradient of `loss`
};

/// Mean cross-entropy.
template <typename T>
LossResult<T> loss_normal(const nn::Network<T>& net, std::span<const Example> batch);

/// (1 - w) CE(clean) + w CE(one uniformly sampled in-budget perturbation).
template <typename T>
LossResult<T> loss_augmentation(const nn::Network<T>& net, std::span<const Example> batch,
                                const perturb::SubstitutionTable& table, std::size_t delta,
                                std::mt19937_64& rng, double interpolation = 0.5);

/// (1 - w) CE(clean) + w CE(HotFlip example at budget delta). The attack is a
/// discrete selection; gradients flow through the two cross-entropies only.
template <typename T>
LossResult<T> loss_adversarial(const nn::Network<T>& net, std::span<const Example> batch,
                               const perturb::SubstitutionTable& table, std::size_t delta,
                               double interpolation = 0.5);

/// kappa CE(z) + (1 - kappa) CE(z_hat), z_hat being the worst-case logits of
/// the simplex bounds at budget delta.
template <typename T>
LossResult<T> loss_verifiable(const nn::Network<T>& net, std::span<const Example> batch,
                              const perturb::SubstitutionTable& table, std::size_t delta,
                              double kappa);

struct EpochLog {
  std::size_t epoch = 0;
  double kappa = 1.0;
  double train_loss = 0;
  double validation_metric = 0;
  verify::MetricsSummary validation;
  double wall_seconds = 0;
  bool improved = false;
};

/// Serialises one log record as a single JSON line (no trailing newline).
std::string to_json_line(const EpochLog& log);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct TrainResult {
  nn::Network<T> net;  // best validation checkpoint
  std::vector<EpochLog> log;
  TrainState state;
};

/// Regime-specific validation: nominal accuracy for normal and augmentation,
/// adversarial accuracy at delta_train for adversarial, IBP-verified accuracy
/// at delta_train for verifiable.
template <typename T>
verify::MetricsSummary validation_metrics(const nn::Network<T>& net, std::span<const Example> data,
                                          const perturb::SubstitutionTable& table,
                                          const TrainConfig& cfg);
double validation_score(const verify::MetricsSummary& m, Regime regime);

/// Adam over shuffled mini-batches with early stopping on the regime metric.
/// Throws TrainingDiverged if a loss or gradient becomes non-finite.
template <typename T>
TrainResult<T> train(const TrainConfig& cfg, std::span<const Example> train_set,
                     std::span<const Example> validation_set,
                     const perturb::SubstitutionTable& table, nn::Network<T> net,
                     const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace ibp::train
