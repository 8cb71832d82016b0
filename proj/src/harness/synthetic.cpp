#include "ibp/harness/synthetic.hpp"

#include <random>
#include <sstream>
#include <stdexcept>

namespace ibp::harness {

namespace {

char partner(char c) { return char('a' + ((c - 'a') ^ 1)); }

RawExample make_sentence(std::size_t label, const SyntheticOptions& o, std::mt19937_64& rng) {
  static const std::string cue_sets[2] = {"ac", "eg"};
  const std::size_t len =
      std::uniform_int_distribution<std::size_t>(o.min_length, o.max_length)(rng);
  std::string s(len, ' ');
  std::size_t word_left = 0;
  for (std::size_t i = 0; i < len; ++i) {
    if (word_left == 0 && i > 0 && i + 1 < len) {
      word_left = std::uniform_int_distribution<std::size_t>(3, 6)(rng);
      continue;  // leave a space
    }
    if (word_left == 0) word_left = std::uniform_int_distribution<std::size_t>(3, 6)(rng);
    s[i] = char('i' + std::uniform_int_distribution<int>(0, 17)(rng));
    --word_left;
  }
  std::vector<std::size_t> letters;
  for (std::size_t i = 0; i < len; ++i)
    if (s[i] != ' ') letters.push_back(i);
  const std::size_t cues = std::min(o.cues, letters.size());
  for (std::size_t k = 0; k < cues; ++k) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(k, letters.size() - 1)(rng);
    std::swap(letters[k], letters[j]);
    const auto& set = cue_sets[label];
    s[letters[k]] = set[std::uniform_int_distribution<std::size_t>(0, set.size() - 1)(rng)];
  }
  RawExample ex;
  ex.label = label;
  ex.tokens = tokenize(s, Level::Character);
  return ex;
}

Dataset make_split(std::size_t n, const char* name, const SyntheticOptions& o,
                   std::mt19937_64& rng) {
  Dataset d;
  d.level = Level::Character;
  d.split = name;
  for (std::size_t i = 0; i < n; ++i) d.examples.push_back(make_sentence(i % 2, o, rng));
  return d;
}

}  // namespace

SyntheticTask make_synthetic_task(const SyntheticOptions& o) {
  if (o.min_length < 4 || o.max_length < o.min_length)
    throw std::invalid_argument("synthetic sentence lengths must satisfy 4 <= min <= max");
  std::mt19937_64 rng(o.seed);
  SyntheticTask t;
  t.train = make_split(o.train_size, "train", o, rng);
  t.validation = make_split(o.validation_size, "validation", o, rng);
  t.test = make_split(o.test_size, "test", o, rng);
  std::ostringstream table;
  for (char c = 'a'; c <= 'z'; ++c) table << c << '\t' << partner(c) << '\n';
  t.typo_table = table.str();
  return t;
}

std::string format_dataset(const Dataset& data) {
  std::ostringstream out;
  for (const auto& ex : data.examples) {
    out << ex.label << '\t';
    for (std::size_t i = 0; i < ex.tokens.size(); ++i)
      out << (data.level == Level::Word && i > 0 ? " " : "") << ex.tokens[i];
    out << '\n';
  }
  return out.str();
}

void write_synthetic_task(const SyntheticTask& task, const std::filesystem::path& dir) {
  write_atomic(dir / "train.tsv", format_dataset(task.train));
  write_atomic(dir / "validation.tsv", format_dataset(task.validation));
  write_atomic(dir / "test.tsv", format_dataset(task.test));
  write_atomic(dir / "typos.tsv", task.typo_table);
}

}  // namespace ibp::harness
