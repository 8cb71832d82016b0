#include "ibp/perturb.hpp"

#include <algorithm>
#include <string>

namespace ibp::perturb {

void SubstitutionTable::add(TokenId from, TokenId to) {
  if (from == to) return;
  auto& v = map_[from];
  auto it = std::lower_bound(v.begin(), v.end(), to);
  if (it == v.end() || *it != to) v.insert(it, to);
}

std::span<const TokenId> SubstitutionTable::options(TokenId token) const noexcept {
  auto it = map_.find(token);
  if (it == map_.end()) return {};
  return it->second;
}

std::size_t SubstitutionTable::pair_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [k, v] : map_) n += v.size();
  return n;
}

std::vector<std::pair<TokenId, TokenId>> SubstitutionTable::pairs() const {
  std::vector<std::pair<TokenId, TokenId>> out;
  for (const auto& [k, v] : map_)
    for (TokenId r : v) out.emplace_back(k, r);
  std::sort(out.begin(), out.end());
  return out;
}

PerturbationSet PerturbationSet::with_budget(std::size_t budget) const {
  PerturbationSet p = *this;
  p.delta = budget;
  return p;
}

PerturbationSet elementary_perturbations(std::span<const TokenId> sentence,
                                         const SubstitutionTable& table, std::size_t delta,
                                         std::size_t vocab_size) {
  PerturbationSet p;
  p.original.assign(sentence.begin(), sentence.end());
  p.delta = delta;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (vocab_size && sentence[i] >= vocab_size)
      throw std::out_of_range("token id " + std::to_string(sentence[i]) + " at position " +
                              std::to_string(i) + " is outside the vocabulary");
    auto opts = table.options(sentence[i]);
    if (opts.empty()) continue;
    p.positions.push_back(i);
    p.slice_begin.push_back(p.elems.size());
    for (TokenId r : opts) {
      if (vocab_size && r >= vocab_size)
        throw std::out_of_range("replacement id " + std::to_string(r) +
                                " is outside the vocabulary");
      p.elems.push_back({i, r});
    }
    p.slice_end.push_back(p.elems.size());
  }
  return p;
}

template <typename T>
Tensor<T> SimplexVertices<T>::materialize(std::size_t m) const {
  Tensor<T> z = origin;
  if (m == 0) return z;
  auto src = rows.row(m - 1);
  std::copy(src.begin(), src.end(), z.row(positions[m - 1]).begin());
  return z;
}

template <typename T>
std::vector<kernels::VertexPatch<T>> SimplexVertices<T>::patches() const {
  std::vector<kernels::VertexPatch<T>> out;
  out.reserve(positions.size());
  for (std::size_t m = 0; m < positions.size(); ++m) out.push_back({positions[m], rows.row(m)});
  return out;
}

template <typename T>
SimplexVertices<T> build_simplex(const PerturbationSet& pset, const Tensor<T>& table) {
  if (pset.delta < 1) throw std::invalid_argument("simplex dilation needs a budget >= 1");
  if (table.rank() != 2) throw DimensionError("embedding table must be rank 2");
  const std::size_t d = table.dim(1);
  SimplexVertices<T> s;
  s.delta = T(pset.delta);
  s.tokens = pset.original;
  s.origin = Tensor<T>({pset.original.size(), d});
  for (std::size_t i = 0; i < pset.original.size(); ++i) {
    auto src = table.row(pset.original[i]);
    std::copy(src.begin(), src.end(), s.origin.row(i).begin());
  }
  s.rows = Tensor<T>({pset.elems.size(), d});
  for (std::size_t m = 0; m < pset.elems.size(); ++m) {
    const auto& e = pset.elems[m];
    s.positions.push_back(e.position);
    s.replacements.push_back(e.replacement);
    auto x0 = s.origin.row(e.position);
    auto p = table.row(e.replacement);
    auto out = s.rows.row(m);
    for (std::size_t c = 0; c < d; ++c) out[c] = x0[c] + s.delta * (p[c] - x0[c]);
  }
  return s;
}

template <typename T>
SimplexVertices<T> make_vertices(const PerturbationSet& pset, const Tensor<T>& table) {
  if (pset.delta >= 1) return build_simplex(pset, table);
  return build_simplex(PerturbationSet{pset.original, {}, 1, {}, {}, {}}, table);
}

template struct SimplexVertices<float>;
template struct SimplexVertices<double>;
template SimplexVertices<float> build_simplex<float>(const PerturbationSet&, const Tensor<float>&);
template SimplexVertices<double> build_simplex<double>(const PerturbationSet&,
                                                       const Tensor<double>&);
template SimplexVertices<float> make_vertices<float>(const PerturbationSet&, const Tensor<float>&);
template SimplexVertices<double> make_vertices<double>(const PerturbationSet&,
                                                       const Tensor<double>&);

SpaceCursor::SpaceCursor(const PerturbationSet& pset)
    : pset_(&pset), current_(pset.original), max_k_(std::min(pset.delta, pset.perturbable())) {}

SpaceCursor::SpaceCursor(const PerturbationSet& pset, std::size_t leading_slot)
    : pset_(&pset),
      chunk_(leading_slot),
      current_(pset.original),
      max_k_(std::min(pset.delta, pset.perturbable())) {
  if (leading_slot >= pset.perturbable()) throw std::out_of_range("chunk slot out of range");
}

void SpaceCursor::apply() {
  current_ = pset_->original;
  for (std::size_t i = 0; i < combo_.size(); ++i) {
    const std::size_t slot = combo_[i];
    const auto& e = pset_->elems[pset_->slice_begin[slot] + repl_[i]];
    current_[e.position] = e.replacement;
  }
}

bool SpaceCursor::first_combo(std::size_t k) {
  const std::size_t n = pset_->perturbable();
  const std::size_t lead = chunk_.value_or(0);
  if (lead + k > n) return false;
  combo_.resize(k);
  for (std::size_t i = 0; i < k; ++i) combo_[i] = lead + i;
  repl_.assign(k, 0);
  return true;
}

bool SpaceCursor::next_combo() {
  const std::size_t n = pset_->perturbable();
  const std::size_t k = combo_.size();
  const std::size_t fixed = chunk_ ? 1 : 0;
  for (std::size_t i = k; i-- > fixed;) {
    if (combo_[i] < n - k + i) {
      ++combo_[i];
      for (std::size_t j = i + 1; j < k; ++j) combo_[j] = combo_[j - 1] + 1;
      repl_.assign(k, 0);
      return true;
    }
  }
  return false;
}

bool SpaceCursor::next_replacement() {
  for (std::size_t i = combo_.size(); i-- > 0;) {
    if (repl_[i] + 1 < pset_->options_at(combo_[i])) {
      ++repl_[i];
      for (std::size_t j = i + 1; j < repl_.size(); ++j) repl_[j] = 0;
      return true;
    }
  }
  return false;
}

bool SpaceCursor::next() {
  if (done_) return false;
  if (!started_) {
    started_ = true;
    if (!chunk_) {
      combo_.clear();
      current_ = pset_->original;
      return true;
    }
    if (max_k_ == 0 || !first_combo(1)) {
      done_ = true;
      return false;
    }
    apply();
    return true;
  }
  if (!combo_.empty() && (next_replacement() || next_combo())) {
    apply();
    return true;
  }
  for (std::size_t k = combo_.size() + 1; k <= max_k_; ++k) {
    if (first_combo(k)) {
      apply();
      return true;
    }
  }
  done_ = true;
  return false;
}

std::vector<Substitution> SpaceCursor::substitutions() const {
  std::vector<Substitution> out;
  for (std::size_t i = 0; i < combo_.size(); ++i)
    out.push_back(pset_->elems[pset_->slice_begin[combo_[i]] + repl_[i]]);
  return out;
}

CountOverflow::CountOverflow(std::size_t budget)
    : std::overflow_error("perturbation space size overflows 64 bits at budget " +
                          std::to_string(budget)),
      budget_(budget) {}

std::uint64_t count_space(std::span<const std::size_t> options, std::size_t delta) {
  if (delta == 0) return 0;
  // e[j] = number of ways to perturb exactly j of the positions seen so far.
  std::vector<std::uint64_t> e(delta + 1, 0);
  e[0] = 1;
  std::size_t seen = 0;
  for (std::size_t o : options) {
    if (o == 0) continue;
    ++seen;
    for (std::size_t j = std::min(delta, seen); j >= 1; --j) {
      std::uint64_t prod = 0;
      if (__builtin_mul_overflow(e[j - 1], std::uint64_t(o), &prod) ||
          __builtin_add_overflow(e[j], prod, &e[j]))
        throw CountOverflow(j);
    }
  }
  std::uint64_t total = 0;
  for (std::size_t k = 1; k <= delta; ++k)
    if (__builtin_add_overflow(total, e[k], &total)) throw CountOverflow(k);
  return total;
}

std::uint64_t count_space(const PerturbationSet& pset) {
  std::vector<std::size_t> options;
  for (std::size_t s = 0; s < pset.perturbable(); ++s) options.push_back(pset.options_at(s));
  return count_space(options, pset.delta);
}

SampledPerturbation sample_perturbation(const PerturbationSet& pset, std::mt19937_64& rng) {
  SampledPerturbation out;
  out.tokens = pset.original;
  const std::size_t n = pset.perturbable();
  const std::size_t kmax = std::min(pset.delta, n);
  if (kmax == 0) return out;
  const std::size_t k = std::uniform_int_distribution<std::size_t>(1, kmax)(rng);
  std::vector<std::size_t> slots(n);
  for (std::size_t i = 0; i < n; ++i) slots[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, n - 1)(rng);
    std::swap(slots[i], slots[j]);
  }
  std::sort(slots.begin(), slots.begin() + std::ptrdiff_t(k));
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t slot = slots[i];
    const std::size_t r =
        std::uniform_int_distribution<std::size_t>(0, pset.options_at(slot) - 1)(rng);
    const auto& e = pset.elems[pset.slice_begin[slot] + r];
    out.tokens[e.position] = e.replacement;
    out.substitutions.push_back(e);
  }
  out.perturbed = true;
  return out;
}

std::vector<TokenId> apply_substitutions(std::span<const TokenId> sentence,
                                         std::span<const Substitution> subs) {
  std::vector<TokenId> out(sentence.begin(), sentence.end());
  for (const auto& s : subs) out.at(s.position) = s.replacement;
  return out;
}

}  // namespace ibp::perturb
