#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ibp/bounds.hpp"
#include "ibp/example.hpp"
#include "ibp/nn.hpp"
#include "ibp/perturb.hpp"

namespace ibp::verify {

struct IbpResult {
  bool verified = false;
  bool nominal_correct = false;
  double margin = 0;
  bounds::PassCounts counts;
};

/// Simplex first-layer bounds, interval propagation, margin test. An example
/// counts as verified only if it is also classified correctly.
template <typename T>
IbpResult ibp_verify(const nn::Network<T>& net, const perturb::PerturbationSet& pset,
                     std::size_t label,
                     bounds::SimplexMethod method = bounds::SimplexMethod::Incremental);

enum class OracleStatus { Robust, NotRobust, NotAttempted };

const char* to_string(OracleStatus status);

struct OracleResult {
  OracleStatus status = OracleStatus::NotAttempted;
  std::vector<TokenId> counterexample;
  std::vector<perturb::Substitution> counterexample_substitutions;
  std::size_t counterexample_prediction = 0;
  std::uint64_t forward_passes = 0;
  std::uint64_t space_size = 0;  // excludes the original; 0 when it overflowed
};

inline constexpr std::uint64_t kDefaultOracleBudget = 2'000'000;

/// Forwards every sequence of the perturbation space. The walk is split into
/// one chunk per leading perturbable position; each chunk stops at its first
/// misclassified sequence, and the reported counterexample is the earliest one
/// in enumeration order. Robust examples cost exactly count_space + 1 passes.
/// Spaces larger than `budget` forward passes are not attempted.
template <typename T>
OracleResult exhaustive_verify(const nn::Network<T>& net, const perturb::PerturbationSet& pset,
                               std::size_t label, std::uint64_t budget = kDefaultOracleBudget);

struct ExampleReport {
  std::size_t index = 0;
  std::size_t label = 0;
  std::size_t prediction = 0;
  std::size_t elementary = 0;  // M
  bool nominal_correct = false;
  bool adversarial_correct = false;
  bool ibp_verified = false;
  OracleStatus oracle = OracleStatus::NotAttempted;
  double ibp_margin = 0;
  std::vector<TokenId> counterexample;
  std::vector<TokenId> adversarial_tokens;
  std::uint64_t oracle_passes = 0;
  std::uint64_t space_size = 0;
  bounds::PassCounts ibp_counts;
};

struct MetricsSummary {
  std::size_t delta = 0;
  std::size_t total = 0;
  std::size_t nominal = 0;
  std::size_t adversarial = 0;
  std::size_t ibp_verified = 0;
  std::size_t oracle = 0;
  std::size_t oracle_attempted = 0;
  std::uint64_t forward_passes = 0;

  double nominal_accuracy() const { return ratio(nominal, total); }
  double adversarial_accuracy() const { return ratio(adversarial, total); }
  double ibp_accuracy() const { return ratio(ibp_verified, total); }
  /// Over attempted examples only.
  double oracle_accuracy() const { return ratio(oracle, oracle_attempted); }

 private:
  static double ratio(std::size_t a, std::size_t b) { return b ? double(a) / double(b) : 0.0; }
};

struct EvalOptions {
  std::size_t delta = 1;
  bool attack = true;
  bool oracle = true;
  bool ibp = true;
  std::uint64_t oracle_budget = kDefaultOracleBudget;
};

struct Evaluation {
  MetricsSummary summary;
  std::vector<ExampleReport> reports;
};

/// Four-metric evaluation: nominal, adversarial (clean and attacked both
/// correct), IBP-verified, exhaustive oracle. Parallel over examples.
template <typename T>
Evaluation evaluate(const nn::Network<T>& net, std::span<const Example> examples,
                    const perturb::SubstitutionTable& table, const EvalOptions& options);

/// One summary row per budget; `deltas` must be ascending.
template <typename T>
std::vector<MetricsSummary> sweep(const nn::Network<T>& net, std::span<const Example> examples,
                                  const perturb::SubstitutionTable& table,
                                  std::span<const std::size_t> deltas, EvalOptions options);

struct CurvePoint {
  std::uint64_t passes = 0;
  double fraction = 0;
};

/// Cumulative forward passes against the fraction of oracle-robust examples,
/// visiting examples by ascending pass count; examples sharing a pass count
/// form one step. Examples the oracle did not attempt are left out.
std::vector<CurvePoint> pass_budget_curve(std::span<const ExampleReport> reports);

/// Two interval passes per example, regardless of the perturbation space size.
std::uint64_t ibp_pass_cost(std::span<const ExampleReport> reports);

}  // namespace ibp::verify
