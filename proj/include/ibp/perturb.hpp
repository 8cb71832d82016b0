#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "ibp/kernels.hpp"
#include "ibp/nn.hpp"
#include "ibp/tensor.hpp"

namespace ibp::perturb {

/// Allowed replacements per token. A token never maps to itself; replacement
/// lists are sorted and free of duplicates.
class SubstitutionTable {
 public:
  void add(TokenId from, TokenId to);
  std::span<const TokenId> options(TokenId token) const noexcept;
  bool contains(TokenId token) const noexcept { return map_.count(token) != 0; }
  std::size_t size() const noexcept { return map_.size(); }
  std::size_t pair_count() const noexcept;
  /// Every (from, to) pair, sorted.
  std::vector<std::pair<TokenId, TokenId>> pairs() const;

 private:
  std::unordered_map<TokenId, std::vector<TokenId>> map_;
};

struct ElementaryPerturbation {
  std::size_t position = 0;
  TokenId replacement = 0;
  friend bool operator==(const ElementaryPerturbation&, const ElementaryPerturbation&) = default;
};

using Substitution = ElementaryPerturbation;

/// All single-substitution variants of one sentence together with the budget.
/// `elems` is position-major, then by replacement id.
struct PerturbationSet {
  std::vector<TokenId> original;
  std::vector<ElementaryPerturbation> elems;
  std::size_t delta = 0;
  // Perturbable positions (ascending) and the [begin, end) slice of elems for each.
  std::vector<std::size_t> positions;
  std::vector<std::size_t> slice_begin;
  std::vector<std::size_t> slice_end;

  std::size_t size() const noexcept { return elems.size(); }
  std::size_t perturbable() const noexcept { return positions.size(); }
  std::size_t options_at(std::size_t slot) const noexcept {
    return slice_end[slot] - slice_begin[slot];
  }
  /// Same elementary perturbations under a different budget.
  PerturbationSet with_budget(std::size_t budget) const;
};

/// Lists every (position, allowed replacement) pair. Tokens at or above
/// `vocab_size` (when non-zero) are rejected.
PerturbationSet elementary_perturbations(std::span<const TokenId> sentence,
                                         const SubstitutionTable& table, std::size_t delta,
                                         std::size_t vocab_size = 0);

/// Vertex 0 is the original embedding; vertex m >= 1 equals the original except
/// at elems[m-1].position, whose row is x0 + delta * (p - x0).
template <typename T>
struct SimplexVertices {
  std::vector<TokenId> tokens;         // original sentence
  Tensor<T> origin;                    // (L, d)
  std::vector<std::size_t> positions;  // per non-origin vertex
  std::vector<TokenId> replacements;
  Tensor<T> rows;  // (M, d) dilated rows
  T delta = T{1};

  std::size_t size() const noexcept { return positions.size() + 1; }
  /// Full (L, d) embedding of vertex m.
  Tensor<T> materialize(std::size_t m) const;
  std::vector<kernels::VertexPatch<T>> patches() const;
};

/// Dilates the elementary perturbations by the set's budget. Throws
/// std::invalid_argument for delta < 1.
template <typename T>
SimplexVertices<T> build_simplex(const PerturbationSet& pset, const Tensor<T>& embedding_table);

/// build_simplex for delta >= 1; for delta == 0 only the original vertex.
template <typename T>
SimplexVertices<T> make_vertices(const PerturbationSet& pset, const Tensor<T>& embedding_table);

/// Walks the perturbation space: the original sentence first, then for
/// k = 1..delta every k-subset of perturbable positions in lexicographic order,
/// and for each subset every replacement tuple (last position varying fastest).
class SpaceCursor {
 public:
  explicit SpaceCursor(const PerturbationSet& pset);
  /// Restricts the walk to subsets whose first position is perturbable slot
  /// `leading_slot`; the original sentence is not part of any chunk.
  SpaceCursor(const PerturbationSet& pset, std::size_t leading_slot);

  /// Advances; returns false when the space is exhausted.
  bool next();
  const std::vector<TokenId>& tokens() const noexcept { return current_; }
  /// Substitutions applied in the current sequence, ascending by position.
  std::vector<Substitution> substitutions() const;
  std::size_t substitution_count() const noexcept { return started_ ? combo_.size() : 0; }

 private:
  bool first_combo(std::size_t k);
  bool next_combo();
  bool next_replacement();
  void apply();

  const PerturbationSet* pset_;
  std::optional<std::size_t> chunk_;
  std::vector<TokenId> current_;
  std::vector<std::size_t> combo_;  // slots into pset.positions
  std::vector<std::size_t> repl_;   // replacement index within each slot
  std::size_t max_k_ = 0;
  bool started_ = false;
  bool done_ = false;
};

/// Thrown when the exact space size does not fit in 64 bits.
class CountOverflow : public std::overflow_error {
 public:
  CountOverflow(std::size_t budget);
  std::size_t budget() const noexcept { return budget_; }

 private:
  std::size_t budget_;
};

/// Number of perturbed sequences (original excluded) with 1..delta substitutions
/// at distinct positions: sum_{k<=delta} e_k(options), by elementary symmetric
/// polynomial accumulation.
std::uint64_t count_space(std::span<const std::size_t> options, std::size_t delta);
std::uint64_t count_space(const PerturbationSet& pset);

struct SampledPerturbation {
  std::vector<TokenId> tokens;
  std::vector<Substitution> substitutions;
  bool perturbed = false;
};

/// k ~ U{1..min(delta, perturbable)}, k distinct positions uniformly without
/// replacement, one uniform replacement per chosen position. Returns the
/// original with perturbed == false when there is nothing to perturb.
SampledPerturbation sample_perturbation(const PerturbationSet& pset, std::mt19937_64& rng);

/// Applies substitutions to a copy of the sentence.
std::vector<TokenId> apply_substitutions(std::span<const TokenId> sentence,
                                         std::span<const Substitution> subs);

}  // namespace ibp::perturb
