#include "ibp/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>

#include "ibp/attack.hpp"
#include "ibp/bounds.hpp"
#include "json.hpp"

namespace ibp::train {

const char* to_string(Regime regime) {
  switch (regime) {
    case Regime::Normal: return "normal";
    case Regime::Augmentation: return "augmentation";
    case Regime::Adversarial: return "adversarial";
    case Regime::Verifiable: return "verifiable";
  }
  return "?";
}

Regime parse_regime(const std::string& name) {
  for (Regime r : {Regime::Normal, Regime::Augmentation, Regime::Adversarial, Regime::Verifiable})
    if (name == to_string(r)) return r;
  throw std::invalid_argument("unknown regime '" + name +
                              "' (expected normal, augmentation, adversarial or verifiable)");
}

void TrainConfig::validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(kappa.start) || !in_unit(kappa.end))
    throw std::invalid_argument("kappa endpoints must lie in [0, 1]");
  if (!in_unit(kappa.warmup_fraction))
    throw std::invalid_argument("kappa warmup fraction must lie in [0, 1]");
  if (!in_unit(interpolation))
    throw std::invalid_argument("interpolation weight must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
}

bool TrainState::observe(std::size_t epoch, double metric, double tiebreak) {
  const bool improved = metric > best_metric || (metric == best_metric && tiebreak > best_tiebreak);
  if (improved) {
    best_metric = metric;
    best_tiebreak = tiebreak;
    best_epoch = epoch;
    epochs_without_improvement = 0;
  } else {
    ++epochs_without_improvement;
  }
  return improved;
}

double kappa_schedule(std::uint64_t step, std::uint64_t total_steps, const KappaSchedule& cfg) {
  const double horizon = cfg.warmup_fraction * double(total_steps);
  if (!(horizon > 0.0) || double(step) >= horizon) return cfg.end;
  const double frac = double(step) / horizon;
  return cfg.start + (cfg.end - cfg.start) * frac;
}

namespace {

template <typename T>
struct ExampleLoss {
  T loss = T{0};
  T clean = T{0};
  T perturbed = T{0};
  nn::GradientStore<T> grads;
};

// Adds weight * CE(logits of tokens) and its gradient to `out`.
template <typename T>
T add_cross_entropy(const nn::Network<T>& net, std::span<const TokenId> tokens, std::size_t label,
                    T weight, nn::GradientStore<T>& out) {
  const auto trace = nn::forward_tokens(net, tokens, true);
  std::vector<T> g(trace.logits.size());
  const T ce = nn::cross_entropy_grad<T>(trace.logits.data(), label, g);
  for (T& v : g) v *= weight;
  nn::backward_into(net, trace, std::span<const T>(g), out);
  return ce;
}

// Per-example work runs in parallel; the reduction below runs in example order
// so the result does not depend on the thread count.
template <typename T, typename Fn>
LossResult<T> reduce_batch(const nn::Network<T>& net, std::size_t n, Fn&& per_example) {
  std::vector<ExampleLoss<T>> parts(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ii = 0; ii < std::ptrdiff_t(n); ++ii) {
    auto& p = parts[std::size_t(ii)];
    try {
      p.grads = nn::GradientStore<T>::zeros_like(net);
      per_example(std::size_t(ii), p);
    } catch (...) {
      errors[std::size_t(ii)] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const NumericalError& e) {
      throw TrainingDiverged("non-finite values for batch example " + std::to_string(i) + ": " +
                             e.what());
    }
  }
  LossResult<T> r;
  r.grads = nn::GradientStore<T>::zeros_like(net);
  for (const auto& p : parts) {
    r.loss += p.loss;
    r.clean_term += p.clean;
    r.perturbed_term += p.perturbed;
    r.grads.add(p.grads);
  }
  if (n > 0) {
    const T inv = T{1} / T(n);
    r.loss *= inv;
    r.clean_term *= inv;
    r.perturbed_term *= inv;
    r.grads.scale(inv);
  }
  return r;
}

template <typename T>
std::span<const TokenId> tokens_of(const Example& ex) {
  return std::span<const TokenId>(ex.tokens);
}

}  // namespace

template <typename T>
LossResult<T> loss_normal(const nn::Network<T>& net, std::span<const Example> batch) {
  return reduce_batch<T>(net, batch.size(), [&](std::size_t i, ExampleLoss<T>& p) {
    const Example& ex = batch[i];
    p.clean = add_cross_entropy<T>(net, tokens_of<T>(ex), ex.label, T{1}, p.grads);
    p.loss = p.clean;
  });
}

template <typename T>
LossResult<T> loss_augmentation(const nn::Network<T>& net, std::span<const Example> batch,
                                const perturb::SubstitutionTable& table, std::size_t delta,
                                std::mt19937_64& rng, double interpolation) {
  std::vector<std::vector<TokenId>> sampled(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto pset = perturb::elementary_perturbations(tokens_of<T>(batch[i]), table, delta);
    sampled[i] = perturb::sample_perturbation(pset, rng).tokens;
  }
  const T w = T(interpolation);
  return reduce_batch<T>(net, batch.size(), [&](std::size_t i, ExampleLoss<T>& p) {
    const Example& ex = batch[i];
    p.clean = add_cross_entropy<T>(net, tokens_of<T>(ex), ex.label, T{1} - w, p.grads);
    p.perturbed =
        add_cross_entropy<T>(net, std::span<const TokenId>(sampled[i]), ex.label, w, p.grads);
    p.loss = (T{1} - w) * p.clean + w * p.perturbed;
  });
}

template <typename T>
LossResult<T> loss_adversarial(const nn::Network<T>& net, std::span<const Example> batch,
                               const perturb::SubstitutionTable& table, std::size_t delta,
                               double interpolation) {
  const T w = T(interpolation);
  return reduce_batch<T>(net, batch.size(), [&](std::size_t i, ExampleLoss<T>& p) {
    const Example& ex = batch[i];
    const auto pset = perturb::elementary_perturbations(tokens_of<T>(ex), table, delta);
    const auto adv = attack::hotflip(net, pset, ex.label);
    p.clean = add_cross_entropy<T>(net, tokens_of<T>(ex), ex.label, T{1} - w, p.grads);
    p.perturbed =
        add_cross_entropy<T>(net, std::span<const TokenId>(adv.tokens), ex.label, w, p.grads);
    p.loss = (T{1} - w) * p.clean + w * p.perturbed;
  });
}

template <typename T>
LossResult<T> loss_verifiable(const nn::Network<T>& net, std::span<const Example> batch,
                              const perturb::SubstitutionTable& table, std::size_t delta,
                              double kappa) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw std::invalid_argument("kappa must lie in [0, 1]");
  const T k = T(kappa);
  return reduce_batch<T>(net, batch.size(), [&](std::size_t i, ExampleLoss<T>& p) {
    const Example& ex = batch[i];
    p.clean = add_cross_entropy<T>(net, tokens_of<T>(ex), ex.label, k, p.grads);

    const auto pset = perturb::elementary_perturbations(tokens_of<T>(ex), table, delta);
    const auto vertices = perturb::make_vertices(pset, net.embedding_table());
    auto first = bounds::simplex_first_layer_bounds(net, vertices);
    const auto trace = bounds::propagate_recorded(net, std::move(first));
    const auto worst = bounds::worst_case_logits(trace.logits, ex.label);
    std::vector<T> g(worst.values.size());
    p.perturbed = nn::cross_entropy_grad<T>(worst.values.data(), ex.label, g);
    std::vector<T> gl(g.size(), T{0}), gu(g.size(), T{0});
    for (std::size_t y = 0; y < g.size(); ++y) (y == ex.label ? gl : gu)[y] = (T{1} - k) * g[y];
    bounds::bounds_backward(net, vertices, trace, std::span<const T>(gl), std::span<const T>(gu),
                            p.grads);
    p.loss = k * p.clean + (T{1} - k) * p.perturbed;
  });
}

std::string to_json_line(const EpochLog& log) {
  nlohmann::json j;
  j["epoch"] = log.epoch;
  j["kappa"] = log.kappa;
  j["train_loss"] = log.train_loss;
  j["validation_metric"] = log.validation_metric;
  j["validation"] = {{"delta", log.validation.delta},
                     {"total", log.validation.total},
                     {"nominal", log.validation.nominal_accuracy()},
                     {"adversarial", log.validation.adversarial_accuracy()},
                     {"ibp_verified", log.validation.ibp_accuracy()}};
  j["improved"] = log.improved;
  j["wall_seconds"] = log.wall_seconds;
  return j.dump();
}

template <typename T>
verify::MetricsSummary validation_metrics(const nn::Network<T>& net, std::span<const Example> data,
                                          const perturb::SubstitutionTable& table,
                                          const TrainConfig& cfg) {
  verify::EvalOptions opt;
  opt.delta = cfg.delta_train;
  opt.oracle = false;
  opt.attack = cfg.regime == Regime::Adversarial;
  opt.ibp = cfg.regime == Regime::Verifiable;
  return verify::evaluate(net, data, table, opt).summary;
}

double validation_score(const verify::MetricsSummary& m, Regime regime) {
  switch (regime) {
    case Regime::Adversarial: return m.adversarial_accuracy();
    case Regime::Verifiable: return m.ibp_accuracy();
    default: return m.nominal_accuracy();
  }
}

template <typename T>
TrainResult<T> train(const TrainConfig& cfg, std::span<const Example> train_set,
                     std::span<const Example> validation_set,
                     const perturb::SubstitutionTable& table, nn::Network<T> net,
                     const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (validation_set.empty()) throw std::invalid_argument("validation set is empty");

  TrainResult<T> result;
  TrainState& state = result.state;
  state.rng.seed(cfg.seed);
  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  auto adam = nn::AdamState<T>::for_network(net, adam_cfg);

  const std::size_t n = train_set.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::uint64_t total_steps = std::uint64_t(batches) * cfg.max_epochs;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Example> batch;
  result.net = net;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), state.rng);
    double loss_sum = 0;
    double kappa = kappa_schedule(state.step, total_steps, cfg.kappa);
    for (std::size_t b = 0; b < batches; ++b) {
      batch.clear();
      for (std::size_t i = b * cfg.batch_size; i < std::min(n, (b + 1) * cfg.batch_size); ++i)
        batch.push_back(train_set[order[i]]);
      kappa = kappa_schedule(state.step, total_steps, cfg.kappa);
      LossResult<T> lr;
      switch (cfg.regime) {
        case Regime::Normal: lr = loss_normal<T>(net, batch); break;
        case Regime::Augmentation:
          lr = loss_augmentation<T>(net, batch, table, cfg.delta_train, state.rng,
                                    cfg.interpolation);
          break;
        case Regime::Adversarial:
          lr = loss_adversarial<T>(net, batch, table, cfg.delta_train, cfg.interpolation);
          break;
        case Regime::Verifiable:
          lr = loss_verifiable<T>(net, batch, table, cfg.delta_train, kappa);
          break;
      }
      if (!std::isfinite(double(lr.loss)) || !lr.grads.all_finite()) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ", step " << state.step << " (loss "
            << double(lr.loss) << ", regime " << to_string(cfg.regime) << ")";
        throw TrainingDiverged(msg.str());
      }
      nn::adam_step(net, lr.grads, adam);
      ++state.step;
      loss_sum += double(lr.loss) * double(batch.size());
    }

    EpochLog log;
    log.epoch = epoch;
    log.kappa = kappa;
    log.train_loss = loss_sum / double(n);
    log.validation = validation_metrics(net, validation_set, table, cfg);
    log.validation_metric = validation_score(log.validation, cfg.regime);
    log.improved = state.observe(epoch, log.validation_metric, log.validation.nominal_accuracy());
    if (log.improved) result.net = net;
    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (state.epochs_without_improvement >= cfg.patience) break;
  }
  return result;
}

#define IBP_INSTANTIATE_TRAIN(T)                                                                \
  template LossResult<T> loss_normal<T>(const nn::Network<T>&, std::span<const Example>);       \
  template LossResult<T> loss_augmentation<T>(const nn::Network<T>&, std::span<const Example>,  \
                                              const perturb::SubstitutionTable&, std::size_t,   \
                                              std::mt19937_64&, double);                        \
  template LossResult<T> loss_adversarial<T>(const nn::Network<T>&, std::span<const Example>,   \
                                             const perturb::SubstitutionTable&, std::size_t,    \
                                             double);                                           \
  template LossResult<T> loss_verifiable<T>(const nn::Network<T>&, std::span<const Example>,    \
                                            const perturb::SubstitutionTable&, std::size_t,     \
                                            double);                                            \
  template verify::MetricsSummary validation_metrics<T>(                                        \
      const nn::Network<T>&, std::span<const Example>, const perturb::SubstitutionTable&,       \
      const TrainConfig&);                                                                      \
  template TrainResult<T> train<T>(const TrainConfig&, std::span<const Example>,                \
                                   std::span<const Example>, const perturb::SubstitutionTable&, \
                                   nn::Network<T>, const std::function<void(const EpochLog&)>&);

IBP_INSTANTIATE_TRAIN(float)
IBP_INSTANTIATE_TRAIN(double)

}  // namespace ibp::train
