#include "ibp/verify.hpp"

#include <algorithm>
#include <exception>
#include <tuple>

#include "ibp/attack.hpp"

namespace ibp::verify {

const char* to_string(OracleStatus status) {
  switch (status) {
    case OracleStatus::Robust: return "robust";
    case OracleStatus::NotRobust: return "not_robust";
    case OracleStatus::NotAttempted: return "not_attempted";
  }
  return "?";
}

template <typename T>
IbpResult ibp_verify(const nn::Network<T>& net, const perturb::PerturbationSet& pset,
                     std::size_t label, bounds::SimplexMethod method) {
  IbpResult r;
  const auto nominal = nn::forward_tokens(net, std::span<const TokenId>(pset.original), false);
  r.nominal_correct = nn::argmax<T>(nominal.logits.data()) == label;
  const auto vertices = perturb::make_vertices(pset, net.embedding_table());
  const auto first = bounds::simplex_first_layer_bounds(net, vertices, method, &r.counts);
  const auto logits = bounds::propagate(net, first, &r.counts);
  const auto m = bounds::verified_margin(logits, label);
  r.margin = double(m.value);
  r.verified = m.verified && r.nominal_correct;
  return r;
}

namespace {

struct ChunkHit {
  bool found = false;
  std::uint64_t passes = 0;
  std::vector<perturb::Substitution> subs;
  std::vector<TokenId> tokens;
  std::size_t prediction = 0;
};

// Enumeration order: fewer substitutions first, then positions, then replacements.
auto order_key(const std::vector<perturb::Substitution>& subs) {
  std::vector<std::size_t> pos;
  std::vector<TokenId> rep;
  for (const auto& s : subs) {
    pos.push_back(s.position);
    rep.push_back(s.replacement);
  }
  return std::make_tuple(subs.size(), pos, rep);
}

}  // namespace

template <typename T>
OracleResult exhaustive_verify(const nn::Network<T>& net, const perturb::PerturbationSet& pset,
                               std::size_t label, std::uint64_t budget) {
  OracleResult r;
  try {
    r.space_size = perturb::count_space(pset);
  } catch (const perturb::CountOverflow&) {
    return r;
  }
  if (r.space_size >= budget) return r;

  const auto clean = nn::forward_tokens(net, std::span<const TokenId>(pset.original), false);
  r.forward_passes = 1;
  const std::size_t clean_pred = nn::argmax<T>(clean.logits.data());
  if (clean_pred != label) {
    r.status = OracleStatus::NotRobust;
    r.counterexample = pset.original;
    r.counterexample_prediction = clean_pred;
    return r;
  }

  const std::size_t chunks = pset.delta == 0 ? 0 : pset.perturbable();
  std::vector<ChunkHit> hits(chunks);
  std::vector<std::exception_ptr> errors(chunks);
  const bool par = !kernels::in_parallel() && r.space_size > 256;
#pragma omp parallel for schedule(dynamic) if (par)
  for (std::ptrdiff_t cc = 0; cc < std::ptrdiff_t(chunks); ++cc) {
    ChunkHit& h = hits[std::size_t(cc)];
    try {
      perturb::SpaceCursor cursor(pset, std::size_t(cc));
      while (cursor.next()) {
        const auto out = nn::forward_tokens(net, std::span<const TokenId>(cursor.tokens()), false);
        ++h.passes;
        const std::size_t pred = nn::argmax<T>(out.logits.data());
        if (pred != label) {
          h.found = true;
          h.subs = cursor.substitutions();
          h.tokens = cursor.tokens();
          h.prediction = pred;
          break;
        }
      }
    } catch (...) {
      errors[std::size_t(cc)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  const ChunkHit* best = nullptr;
  for (const auto& h : hits) {
    r.forward_passes += h.passes;
    if (h.found && (!best || order_key(h.subs) < order_key(best->subs))) best = &h;
  }
  if (best) {
    r.status = OracleStatus::NotRobust;
    r.counterexample = best->tokens;
    r.counterexample_substitutions = best->subs;
    r.counterexample_prediction = best->prediction;
  } else {
    r.status = OracleStatus::Robust;
  }
  return r;
}

template <typename T>
Evaluation evaluate(const nn::Network<T>& net, std::span<const Example> examples,
                    const perturb::SubstitutionTable& table, const EvalOptions& options) {
  Evaluation ev;
  ev.reports.resize(examples.size());
  std::vector<std::exception_ptr> errors(examples.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ii = 0; ii < std::ptrdiff_t(examples.size()); ++ii) {
    const std::size_t i = std::size_t(ii);
    try {
      const Example& ex = examples[i];
      ExampleReport& rep = ev.reports[i];
      rep.index = i;
      rep.label = ex.label;
      const auto pset = perturb::elementary_perturbations(ex.tokens, table, options.delta);
      rep.elementary = pset.size();
      const auto clean = nn::forward_tokens(net, std::span<const TokenId>(ex.tokens), false);
      rep.prediction = nn::argmax<T>(clean.logits.data());
      rep.nominal_correct = rep.prediction == ex.label;
      if (options.attack) {
        const auto adv = attack::hotflip(net, pset, ex.label);
        rep.adversarial_correct = rep.nominal_correct && adv.prediction == ex.label;
        rep.adversarial_tokens = adv.tokens;
      }
      if (options.ibp) {
        const auto ibp = ibp_verify(net, pset, ex.label);
        rep.ibp_verified = ibp.verified;
        rep.ibp_margin = ibp.margin;
        rep.ibp_counts = ibp.counts;
      }
      if (options.oracle) {
        const auto orc = exhaustive_verify(net, pset, ex.label, options.oracle_budget);
        rep.oracle = orc.status;
        rep.oracle_passes = orc.forward_passes;
        rep.space_size = orc.space_size;
        rep.counterexample = orc.counterexample;
      } else {
        try {
          rep.space_size = perturb::count_space(pset);
        } catch (const perturb::CountOverflow&) {
          rep.space_size = 0;
        }
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  MetricsSummary& s = ev.summary;
  s.delta = options.delta;
  s.total = examples.size();
  for (const auto& rep : ev.reports) {
    s.nominal += rep.nominal_correct;
    s.adversarial += rep.adversarial_correct;
    s.ibp_verified += rep.ibp_verified;
    if (rep.oracle != OracleStatus::NotAttempted) {
      ++s.oracle_attempted;
      s.oracle += rep.oracle == OracleStatus::Robust;
    }
    s.forward_passes += rep.oracle_passes;
  }
  return ev;
}

template <typename T>
std::vector<MetricsSummary> sweep(const nn::Network<T>& net, std::span<const Example> examples,
                                  const perturb::SubstitutionTable& table,
                                  std::span<const std::size_t> deltas, EvalOptions options) {
  if (!std::is_sorted(deltas.begin(), deltas.end()))
    throw std::invalid_argument("sweep budgets must be ascending");
  std::vector<MetricsSummary> rows;
  for (std::size_t d : deltas) {
    options.delta = d;
    rows.push_back(evaluate(net, examples, table, options).summary);
  }
  return rows;
}

std::vector<CurvePoint> pass_budget_curve(std::span<const ExampleReport> reports) {
  std::vector<const ExampleReport*> attempted;
  for (const auto& r : reports)
    if (r.oracle != OracleStatus::NotAttempted) attempted.push_back(&r);
  std::stable_sort(attempted.begin(), attempted.end(), [](const auto* a, const auto* b) {
    return a->oracle_passes < b->oracle_passes;
  });
  std::vector<CurvePoint> curve;
  const double n = double(attempted.size());
  std::uint64_t passes = 0;
  std::size_t robust = 0;
  for (std::size_t i = 0; i < attempted.size(); ++i) {
    passes += attempted[i]->oracle_passes;
    robust += attempted[i]->oracle == OracleStatus::Robust;
    const bool last_of_step =
        i + 1 == attempted.size() || attempted[i + 1]->oracle_passes != attempted[i]->oracle_passes;
    if (last_of_step) curve.push_back({passes, double(robust) / n});
  }
  return curve;
}

std::uint64_t ibp_pass_cost(std::span<const ExampleReport> reports) {
  return 2 * std::uint64_t(reports.size());
}

#define IBP_INSTANTIATE_VERIFY(T)                                                                \
  template IbpResult ibp_verify<T>(const nn::Network<T>&, const perturb::PerturbationSet&,       \
                                   std::size_t, bounds::SimplexMethod);                          \
  template OracleResult exhaustive_verify<T>(                                                    \
      const nn::Network<T>&, const perturb::PerturbationSet&, std::size_t, std::uint64_t);       \
  template Evaluation evaluate<T>(const nn::Network<T>&, std::span<const Example>,               \
                                  const perturb::SubstitutionTable&, const EvalOptions&);        \
  template std::vector<MetricsSummary> sweep<T>(const nn::Network<T>&, std::span<const Example>, \
                                                const perturb::SubstitutionTable&,               \
                                                std::span<const std::size_t>, EvalOptions);

IBP_INSTANTIATE_VERIFY(float)
IBP_INSTANTIATE_VERIFY(double)

}  // namespace ibp::verify
