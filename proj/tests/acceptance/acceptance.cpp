// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ibp/attack.hpp"
#include "ibp/bounds.hpp"
#include "ibp/harness/data.hpp"
#include "ibp/harness/model.hpp"
#include "ibp/harness/synthetic.hpp"
#include "ibp/perturb.hpp"
#include "ibp/train.hpp"
#include "ibp/verify.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace ibp;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const char* kTinyArchs[] = {
    "input=5 conv=4x3 relu avgpool linear=2",
    "vocab=14 embed=5 conv=4x3 relu avgpool linear=2",
    "vocab=14 embed=5 conv=4x4 relu avgpool linear=6 relu linear=6 relu linear=4",
};

template <typename T>
nn::Network<T> tiny_net(std::size_t arch, std::uint64_t seed, double bias_scale = 0.1) {
  if (arch == 0) return testing_support::random_word_network<T>(kTinyArchs[0], 14, seed);
  return testing_support::random_network<T>(kTinyArchs[arch], seed, bias_scale);
}

// ---------------------------------------------------------------------------
// Trained desk-scale models on the synthetic character task.

struct SyntheticSetup {
  harness::SyntheticTask task;
  harness::Vocabulary vocab;
  perturb::SubstitutionTable table;
  std::string arch;
  std::vector<Example> train, validation, test;
};

SyntheticSetup make_setup(const harness::SyntheticOptions& opt) {
  SyntheticSetup s;
  s.task = harness::make_synthetic_task(opt);
  s.vocab = harness::build_char_vocabulary(s.task.train);
  const fs::path dir = fs::temp_directory_path() / ("ibp_acceptance_" + std::to_string(::getpid()));
  harness::write_atomic(dir / "typos.tsv", s.task.typo_table);
  s.table = harness::load_substitutions(dir / "typos.tsv", s.vocab);
  fs::remove_all(dir);
  s.arch = "vocab=" + std::to_string(s.vocab.size()) + " embed=16 conv=16x5 relu avgpool linear=2";
  const auto probe = harness::build_network<float>(harness::ArchSpec::parse(s.arch));
  s.train = harness::encode(s.task.train, s.vocab, probe.min_length());
  s.validation = harness::encode(s.task.validation, s.vocab, probe.min_length());
  s.test = harness::encode(s.task.test, s.vocab, probe.min_length());
  return s;
}

struct TrainedModel {
  std::string name;
  nn::Network<float> net;
  const SyntheticSetup* setup = nullptr;
  double seconds = 0;
};

struct Trained {
  SyntheticSetup robust_task;  // more cues than the budget
  SyntheticSetup sparse_task;  // few cues, used to hunt for attack failures
  std::vector<TrainedModel> models;
  const TrainedModel* normal = nullptr;
  const TrainedModel* verifiable = nullptr;
};

TrainedModel train_model(const SyntheticSetup& s, train::Regime regime, std::uint64_t seed,
                         std::size_t epochs) {
  train::TrainConfig cfg;
  cfg.regime = regime;
  cfg.delta_train = 3;
  cfg.learning_rate = 0.005;
  cfg.max_epochs = epochs;
  cfg.patience = epochs;
  cfg.seed = seed;
  auto init = harness::build_model<float>(s.arch, s.vocab.size(), 0, seed);
  const auto t0 = Clock::now();
  auto r = train::train<float>(cfg, s.train, s.validation, s.table, std::move(init));
  TrainedModel m;
  m.name = train::to_string(regime);
  m.net = std::move(r.net);
  m.setup = &s;
  m.seconds = seconds_since(t0);
  return m;
}

const std::uint64_t kSparseSeeds[] = {1, 2, 3, 4, 5};

Trained& trained() {
  static Trained t = [] {
    Trained t;
    harness::SyntheticOptions o;
    o.cues = 4;
    o.seed = 1;
    t.robust_task = make_setup(o);
    harness::SyntheticOptions sparse;
    sparse.cues = 2;
    sparse.train_size = 500;
    sparse.validation_size = 200;
    sparse.test_size = 200;
    sparse.seed = 2;
    t.sparse_task = make_setup(sparse);
    for (auto regime : {train::Regime::Normal, train::Regime::Verifiable,
                        train::Regime::Augmentation, train::Regime::Adversarial})
      t.models.push_back(train_model(t.robust_task, regime, 7, 10));
    for (std::uint64_t seed : kSparseSeeds) {
      t.models.push_back(train_model(t.sparse_task, train::Regime::Normal, seed, 3));
      t.models.back().name = "sparse-normal-seed" + std::to_string(seed);
    }
    t.normal = &t.models[0];
    t.verifiable = &t.models[1];
    return t;
  }();
  return t;
}

verify::Evaluation eval_model(const TrainedModel& m, std::size_t delta, bool oracle = true) {
  verify::EvalOptions eo;
  eo.delta = delta;
  eo.oracle = oracle;
  eo.attack = oracle;
  return verify::evaluate(m.net, std::span<const Example>(m.setup->test), m.setup->table, eo);
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  const std::vector<std::size_t> options(26, 1);
  const auto t0 = Clock::now();
  const auto n = perturb::count_space(options, 3);
  const double ms = seconds_since(t0) * 1e3;
  return {n == 2951 && ms < 1.0,
          fmt("count_space(26 x 1 option, delta=3) = %llu in %.4f ms", (unsigned long long)n, ms)};
}

Outcome criterion2() {
  std::mt19937_64 rng(21);
  std::size_t checked = 0, bad_ibp = 0, robust = 0, bad_oracle = 0;
  std::vector<std::size_t> ms;
  for (int i = 0; i < 60; ++i) {
    const auto net = tiny_net<float>(i % 3, 100 + i);
    const auto table = testing_support::random_table(14, 1 + i % 3, 0.3 + 0.01 * i, rng);
    const auto s = testing_support::random_sentence(8 + i % 5, 14, rng);
    const std::size_t label = testing_support::predict(net, s);
    for (std::size_t delta = 1; delta <= 4; ++delta) {
      const auto pset = perturb::elementary_perturbations(s, table, delta);
      const auto r = verify::ibp_verify(net, pset, label);
      ++checked;
      ms.push_back(pset.size());
      if (r.counts.bound_passes != 2 || r.counts.vertex_evaluations != pset.size() + 1) ++bad_ibp;
      const auto o = verify::exhaustive_verify(net, pset, label);
      if (o.status == verify::OracleStatus::Robust) {
        ++robust;
        if (o.forward_passes != perturb::count_space(pset) + 1) ++bad_oracle;
      } else if (o.forward_passes > perturb::count_space(pset) + 1) {
        ++bad_oracle;
      }
    }
  }
  // Trained robust model: every example is robust, so every oracle run is a full walk.
  const auto& tm = *trained().verifiable;
  std::size_t trained_checked = 0;
  for (std::size_t delta = 1; delta <= 3; ++delta) {
    const auto ev = eval_model(tm, delta);
    if (verify::ibp_pass_cost(ev.reports) != 2 * ev.reports.size()) ++bad_ibp;
    for (const auto& r : ev.reports) {
      ++trained_checked;
      if (r.ibp_counts.bound_passes != 2) ++bad_ibp;
      if (r.oracle == verify::OracleStatus::Robust) {
        ++robust;
        if (r.oracle_passes != r.space_size + 1) ++bad_oracle;
      }
    }
  }
  const auto [mn, mx] = std::minmax_element(ms.begin(), ms.end());
  return {
      bad_ibp == 0 && bad_oracle == 0 && robust > 0,
      fmt("%zu random + %zu trained cases, M in [%zu, %zu], delta 1..4: IBP passes != 2 in %zu; "
          "%zu robust oracle runs, pass count != count_space+1 in %zu",
          checked, trained_checked, *mn, *mx, bad_ibp, robust, bad_oracle)};
}

Outcome criterion3() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(31);
  std::size_t outside = 0, samples = 0, verified = 0, unsound = 0, examples = 0;
  for (int i = 0; i < 100; ++i) {
    const auto net = tiny_net<float>(i % 3, 300 + i);
    const auto table = testing_support::random_table(14, 3, 0.6, rng);
    const auto s = testing_support::random_sentence(10, 14, rng);
    const std::size_t label = testing_support::predict(net, s);
    for (std::size_t delta = 1; delta <= 3; ++delta) {
      ++examples;
      const auto pset = perturb::elementary_perturbations(s, table, delta);
      const auto vertices = perturb::make_vertices(pset, net.embedding_table());
      const auto first = bounds::simplex_first_layer_bounds(net, vertices);
      const auto logits = bounds::propagate(net, first);
      for (int k = 0; k < 1000; ++k) {
        const auto p = perturb::sample_perturbation(pset, rng);
        const auto z = nn::forward_tokens(net, std::span<const TokenId>(p.tokens), false).logits;
        ++samples;
        if (!logits.contains(z, 1e-5f)) ++outside;
      }
      const auto ibp = verify::ibp_verify(net, pset, label);
      if (ibp.verified) {
        ++verified;
        if (verify::exhaustive_verify(net, pset, label).status == verify::OracleStatus::NotRobust)
          ++unsound;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {
      outside == 0 && unsound == 0 && secs < 120.0,
      fmt("%zu examples, %zu sampled perturbations, %zu outside bounds; %zu IBP-verified, %zu with "
          "an oracle counterexample; %.1f s",
          examples, samples, outside, verified, unsound, secs)};
}

Outcome criterion4() {
  std::size_t rows = 0, violations = 0;
  std::ostringstream d;
  for (const auto& m : trained().models) {
    for (std::size_t delta = 1; delta <= 3; ++delta) {
      const auto ev = eval_model(m, delta);
      const auto& s = ev.summary;
      ++rows;
      if (s.oracle_attempted != s.total ||
          !(s.ibp_verified <= s.oracle && s.oracle <= s.adversarial && s.adversarial <= s.nominal))
        ++violations;
      for (const auto& r : ev.reports) {
        const bool oracle = r.oracle == verify::OracleStatus::Robust;
        if ((r.ibp_verified && !oracle) || (oracle && !r.adversarial_correct) ||
            (r.adversarial_correct && !r.nominal_correct))
          ++violations;
      }
      if (delta == 3)
        d << " " << m.name << "(" << s.ibp_verified << "<=" << s.oracle << "<=" << s.adversarial
          << "<=" << s.nominal << ")";
    }
  }
  return {violations == 0,
          fmt("%zu model/delta rows, %zu violations; at delta=3:", rows, violations) + d.str()};
}

Outcome criterion5() {
  std::mt19937_64 rng(51);
  std::size_t not_nested = 0;
  for (int i = 0; i < 100; ++i) {
    const auto net = tiny_net<float>(i % 3, 500 + i);
    const auto table = testing_support::random_table(14, 3, 0.6, rng);
    const auto s = testing_support::random_sentence(10, 14, rng);
    auto bounds_at = [&](std::size_t delta) {
      const auto pset = perturb::elementary_perturbations(s, table, delta);
      return bounds::propagate(net, bounds::simplex_first_layer_bounds(
                                        net, perturb::make_vertices(pset, net.embedding_table())));
    };
    if (!bounds_at(3).contains(bounds_at(1), 1e-6f)) ++not_nested;
  }
  std::size_t increases = 0;
  std::ostringstream d;
  const std::vector<std::size_t> deltas = {1, 2, 3, 4, 5, 6};
  for (const auto* m : {trained().normal, trained().verifiable}) {
    verify::EvalOptions eo;
    eo.attack = false;
    eo.oracle = false;
    const auto rows = verify::sweep(m->net, std::span<const Example>(m->setup->test),
                                    m->setup->table, deltas, eo);
    d << " " << m->name << ":";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      d << " " << rows[i].ibp_verified;
      if (i > 0 && rows[i].ibp_verified > rows[i - 1].ibp_verified) ++increases;
    }
  }
  return {not_nested == 0 && increases == 0, fmt("100 random examples, %zu with delta=1 bounds "
                                                 "outside delta=3 bounds; IBP-verified counts for "
                                                 "delta 1..6 (%zu increases):",
                                                 not_nested, increases) +
                                                 d.str()};
}

template <typename F>
double gradient_error(nn::Network<double>& net, const nn::GradientStore<double>& grads, F&& loss) {
  double worst = 0;
  for (std::size_t k = 0; k < net.layers.size(); ++k)
    for (int which = 0; which < 2; ++which) {
      auto& p = which ? net.layers[k].bias : net.layers[k].weight;
      const auto& g = which ? grads.bias[k] : grads.weight[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i], h = 1e-6;
        p[i] = saved + h;
        const double up = loss();
        p[i] = saved - h;
        const double down = loss();
        p[i] = saved;
        const double fd = (up - down) / (2 * h);
        worst =
            std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-4}));
      }
    }
  return worst;
}

Outcome criterion6() {
  std::mt19937_64 rng(61);
  double worst_normal = 0, worst_verifiable = 0;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
      auto net = tiny_net<double>(a, 600 + 10 * a + seed, 0.3);
      const auto table = testing_support::random_table(14, 3, 0.6, rng);
      std::vector<Example> batch;
      for (std::size_t i = 0; i < 4; ++i)
        batch.push_back({testing_support::random_sentence(7, 14, rng), i % net.class_count});
      const std::span<const Example> b(batch);
      const auto n = train::loss_normal(net, b);
      worst_normal = std::max(worst_normal, gradient_error(net, n.grads, [&] {
                                return double(train::loss_normal(net, b).loss);
                              }));
      const auto v = train::loss_verifiable(net, b, table, 2, 0.4);
      worst_verifiable =
          std::max(worst_verifiable, gradient_error(net, v.grads, [&] {
                     return double(train::loss_verifiable(net, b, table, 2, 0.4).loss);
                   }));
    }
  }
  return {
      worst_normal < 1e-4 && worst_verifiable < 1e-4,
      fmt("max relative error over every parameter of word, char and deep char nets: normal %.2e, "
          "verifiable %.2e",
          worst_normal, worst_verifiable)};
}

// Independent reference: odometer over every per-position choice (keep or one
// of the replacements), keeping assignments with at most delta changes.
struct BruteForce {
  std::uint64_t variants = 0;  // original excluded
  bool robust = true;
};

BruteForce brute_force(const nn::Network<float>& net, const std::vector<TokenId>& s,
                       const perturb::SubstitutionTable& table, std::size_t delta,
                       std::size_t label) {
  BruteForce out;
  std::vector<std::size_t> choice(s.size(), 0);
  std::vector<TokenId> cur = s;
  while (true) {
    std::size_t changed = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto opts = table.options(s[i]);
      cur[i] = choice[i] == 0 ? s[i] : opts[choice[i] - 1];
      changed += choice[i] != 0;
    }
    if (changed <= delta) {
      if (changed > 0) ++out.variants;
      if (testing_support::predict(net, cur) != label) out.robust = false;
    }
    std::size_t i = 0;
    for (; i < s.size(); ++i) {
      if (choice[i] < table.options(s[i]).size()) {
        ++choice[i];
        break;
      }
      choice[i] = 0;
    }
    if (i == s.size()) break;
  }
  return out;
}

Outcome criterion7() {
  std::mt19937_64 rng(71);
  std::size_t instances = 0, count_mismatch = 0, verdict_mismatch = 0, robust = 0, bad_witness = 0;
  for (int i = 0; i < 400; ++i) {
    const auto net = tiny_net<float>(i % 3, 700 + i);
    const auto table = testing_support::random_table(14, 3, 0.5, rng);
    const auto s = testing_support::random_sentence(3 + i % 6, 14, rng);  // <= 8 perturbable
    const std::size_t delta = 1 + i % 3;
    const std::size_t label =
        i % 2 ? testing_support::predict(net, s) : std::size_t(i / 2) % net.class_count;
    const auto pset = perturb::elementary_perturbations(s, table, delta);
    const auto ref = brute_force(net, s, table, delta, label);
    const auto o = verify::exhaustive_verify(net, pset, label);
    ++instances;
    if (perturb::count_space(pset) != ref.variants) ++count_mismatch;
    if ((o.status == verify::OracleStatus::Robust) != ref.robust) ++verdict_mismatch;
    if (o.status == verify::OracleStatus::Robust) ++robust;
    if (o.status == verify::OracleStatus::NotRobust) {
      std::size_t changed = 0;
      for (std::size_t k = 0; k < s.size(); ++k) changed += o.counterexample[k] != s[k];
      if (changed > delta || testing_support::predict(net, o.counterexample) == label)
        ++bad_witness;
    }
  }
  return {
      count_mismatch == 0 && verdict_mismatch == 0 && bad_witness == 0 && robust > 0 &&
          robust < instances,
      fmt("%zu instances (%zu robust): %zu count mismatches, %zu verdict mismatches, %zu invalid "
          "counterexamples",
          instances, robust, count_mismatch, verdict_mismatch, bad_witness)};
}

Outcome criterion8() {
  const auto& t = trained();
  const auto n = eval_model(*t.normal, 3).summary;
  const auto v = eval_model(*t.verifiable, 3).summary;
  const double gap = 100.0 * (v.oracle_accuracy() - n.oracle_accuracy());
  const double tight = 100.0 * std::abs(v.oracle_accuracy() - v.ibp_accuracy());
  const bool all = n.oracle_attempted == n.total && v.oracle_attempted == v.total;
  return {
      all && gap >= 20.0 && tight <= 5.0,
      fmt("synthetic char task (%zu train), delta=3: normal oracle %.1f%% (train %.1f s), "
          "verifiable oracle "
          "%.1f%% IBP %.1f%% (train %.1f s); gap %.1f points, IBP-oracle distance %.1f points",
          t.robust_task.train.size(), 100 * n.oracle_accuracy(), t.normal->seconds,
          100 * v.oracle_accuracy(), 100 * v.ibp_accuracy(), t.verifiable->seconds, gap, tight)};
}

Outcome criterion9() {
  std::mt19937_64 rng(91);
  std::size_t cases = 0, kappa_mismatch = 0, delta0_mismatch = 0;
  auto same = [](double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; };
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto net = tiny_net<double>(a, 900 + 10 * a + seed, 0.3);
      const auto table = testing_support::random_table(14, 3, 0.6, rng);
      std::vector<Example> batch;
      for (std::size_t i = 0; i < 6; ++i)
        batch.push_back({testing_support::random_sentence(8, 14, rng), i % net.class_count});
      const std::span<const Example> b(batch);
      ++cases;
      const auto n = train::loss_normal(net, b);
      const auto v = train::loss_verifiable(net, b, table, 3, 1.0);
      bool eq = same(n.loss, v.loss);
      for (std::size_t k = 0; k < n.grads.weight.size(); ++k) {
        for (std::size_t i = 0; i < n.grads.weight[k].size(); ++i)
          eq = eq && same(n.grads.weight[k][i], v.grads.weight[k][i]);
        for (std::size_t i = 0; i < n.grads.bias[k].size(); ++i)
          eq = eq && same(n.grads.bias[k][i], v.grads.bias[k][i]);
      }
      if (!eq) ++kappa_mismatch;
      const auto z = train::loss_verifiable(net, b, table, 0, 0.3);
      if (!same(z.perturbed_term, z.clean_term) || !same(z.clean_term, n.loss)) ++delta0_mismatch;
    }
  }
  return {kappa_mismatch == 0 && delta0_mismatch == 0,
          fmt("%zu double-precision batches: kappa=1 loss/gradient bit mismatches %zu; delta=0 "
              "worst-case term "
              "!= clean term in %zu",
              cases, kappa_mismatch, delta0_mismatch)};
}

Outcome criterion10() {
  std::mt19937_64 rng(101);
  std::size_t disagree = 0;
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto net = tiny_net<float>(i % 3, 1000 + i);
    const auto table = testing_support::random_table(14, 3, 0.6, rng);
    const auto s = testing_support::random_sentence(5 + i % 12, 14, rng);
    const auto pset = perturb::elementary_perturbations(s, table, 1 + i % 3);
    const auto v = perturb::make_vertices(pset, net.embedding_table());
    const auto a = bounds::simplex_first_layer_bounds(net, v, bounds::SimplexMethod::Naive);
    const auto b = bounds::simplex_first_layer_bounds(net, v, bounds::SimplexMethod::Incremental);
    double d = 0;
    for (std::size_t k = 0; k < a.pre.lower.size(); ++k)
      d = std::max({d, double(std::abs(a.pre.lower[k] - b.pre.lower[k])),
                    double(std::abs(a.pre.upper[k] - b.pre.upper[k]))});
    worst = std::max(worst, d);
    if (d > 1e-6) ++disagree;
  }
  // L = 100, w = 5, M = 200: two replacements at every position.
  auto net = testing_support::random_network<float>(
      "vocab=300 embed=8 conv=16x5 relu avgpool linear=2", 5);
  perturb::SubstitutionTable table;
  std::vector<TokenId> s(100);
  for (std::size_t i = 0; i < 100; ++i) {
    s[i] = TokenId(2 + i);
    table.add(s[i], TokenId(102 + i));
    table.add(s[i], TokenId(202 + (i % 98)));
  }
  const auto pset = perturb::elementary_perturbations(s, table, 3);
  const auto v = perturb::make_vertices(pset, net.embedding_table());
  bounds::PassCounts naive, incremental;
  bounds::simplex_first_layer_bounds(net, v, bounds::SimplexMethod::Naive, &naive);
  bounds::simplex_first_layer_bounds(net, v, bounds::SimplexMethod::Incremental, &incremental);
  const double ratio = double(naive.macs) / double(incremental.macs);
  return {
      disagree == 0 && pset.size() == 200 && ratio >= 5.0,
      fmt("1000 random cases, max |naive - incremental| = %.2e; at L=100, w=5, M=%zu: %llu vs %llu "
          "multiply-adds (%.1fx)",
          worst, pset.size(), (unsigned long long)naive.macs, (unsigned long long)incremental.macs,
          ratio)};
}

Outcome criterion11() {
  const auto& t = trained();
  for (const auto& m : t.models) {
    if (m.setup != &t.sparse_task) continue;
    for (std::size_t delta = 1; delta <= 3; ++delta) {
      const auto ev = eval_model(m, delta);
      for (const auto& r : ev.reports) {
        if (!(r.adversarial_correct && r.oracle == verify::OracleStatus::NotRobust)) continue;
        // Re-derive both verdicts directly.
        const auto& ex = m.setup->test[r.index];
        const auto pset = perturb::elementary_perturbations(ex.tokens, m.setup->table, delta);
        const auto atk = attack::hotflip(m.net, pset, ex.label);
        const auto o = verify::exhaustive_verify(m.net, pset, ex.label);
        std::size_t changed = 0;
        for (std::size_t k = 0; k < ex.tokens.size(); ++k)
          changed += o.counterexample[k] != ex.tokens[k];
        const bool ok = atk.prediction == ex.label && o.status == verify::OracleStatus::NotRobust &&
                        changed <= delta &&
                        testing_support::predict(m.net, o.counterexample) != ex.label;
        return {
            ok,
            fmt("%s, delta=%zu, test example %zu: HotFlip keeps label %zu after %zu flips; oracle "
                "counterexample with %zu substitutions predicts %zu",
                m.name.c_str(), delta, r.index, ex.label, atk.flips.size(), changed,
                o.counterexample_prediction)};
      }
    }
  }
  return {false, "no example where HotFlip fails and the oracle finds a counterexample"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"counting anchor", criterion1},
      {"two-pass IBP and count+1 oracle passes", criterion2},
      {"soundness", criterion3},
      {"metric ordering", criterion4},
      {"budget nesting", criterion5},
      {"gradient checks", criterion6},
      {"oracle equivalence", criterion7},
      {"verifiable training raises oracle accuracy", criterion8},
      {"loss reductions", criterion9},
      {"incremental first-layer bounds", criterion10},
      {"attack suboptimality witness", criterion11},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
