#include "ibp/harness/experiment.hpp"

#include <sstream>

#include "ibp/harness/model.hpp"

namespace ibp::harness {

Dataset load_split(const ExperimentConfig& cfg, const std::filesystem::path& path,
                   const std::string& split) {
  if (path.empty()) throw std::invalid_argument("config has no " + split + " path");
  DatasetOptions opt;
  opt.class_count = cfg.class_count;
  opt.split = split;
  opt.char_limit = cfg.level == Level::Character ? cfg.char_limit : 0;
  return load_dataset(path, cfg.level, opt);
}

namespace {

perturb::SubstitutionTable table_for(const ExperimentConfig& cfg, const Vocabulary& vocab,
                                     const WarningSink& warn) {
  if (cfg.substitutions_path.empty()) return {};
  return load_substitutions(cfg.substitutions_path, vocab, warn);
}

}  // namespace

Resources load_resources(const ExperimentConfig& cfg, const WarningSink& warn) {
  Resources r;
  if (cfg.level == Level::Character) {
    r.vocab = build_char_vocabulary(load_split(cfg, cfg.train_path, "train"));
  } else {
    if (cfg.embeddings_path.empty())
      throw std::invalid_argument("word-level runs need an embeddings file");
    auto emb = load_embeddings(cfg.embeddings_path, cfg.embed_dim, warn);
    r.vocab = std::move(emb.vocab);
    r.frozen_embeddings = std::move(emb.matrix);
  }
  r.table = table_for(cfg, r.vocab, warn);
  return r;
}

nn::Network<float> make_network(const ExperimentConfig& cfg, const Resources& res) {
  const std::size_t input = res.frozen_embeddings.rank() == 2 ? res.frozen_embeddings.dim(1) : 0;
  auto spec = resolve_architecture(cfg.architecture, res.vocab.size(), input);
  if (spec.class_count() != cfg.class_count)
    throw std::invalid_argument("architecture has " + std::to_string(spec.class_count()) +
                                " outputs but the config declares " +
                                std::to_string(cfg.class_count) + " classes");
  if (spec.owns_embedding() != (cfg.level == Level::Character))
    throw std::invalid_argument(
        "character models own their embedding table; word models read a frozen one");
  if (spec.owns_embedding() && spec.vocab != res.vocab.size())
    throw std::invalid_argument("architecture vocab=" + std::to_string(spec.vocab) +
                                " differs from the vocabulary size " +
                                std::to_string(res.vocab.size()));
  if (!spec.owns_embedding() && spec.input != input)
    throw std::invalid_argument("architecture input=" + std::to_string(spec.input) +
                                " differs from the embedding width " + std::to_string(input));
  auto net = build_network<float>(spec);
  nn::initialize(net, cfg.seed);
  if (!spec.owns_embedding()) net.frozen_embeddings = res.frozen_embeddings;
  return net;
}

nlohmann::json checkpoint_metadata(const ExperimentConfig& cfg, const Resources& res) {
  nlohmann::json j;
  j["vocab"] = res.vocab.tokens();
  j["level"] = to_string(cfg.level);
  j["architecture_name"] = cfg.architecture;
  j["seed"] = cfg.seed;
  j["scalar"] = "f32";
  j["config"] = to_json(cfg);
  return j;
}

Resources resources_from_metadata(const nlohmann::json& metadata, const ExperimentConfig& cfg,
                                  const WarningSink& warn) {
  Resources r;
  r.vocab = Vocabulary::from_tokens(metadata.at("vocab").get<std::vector<std::string>>());
  r.table = table_for(cfg, r.vocab, warn);
  return r;
}

std::string decode(std::span<const TokenId> tokens, const Vocabulary& vocab, Level level) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == Vocabulary::kPad) continue;
    if (level == Level::Word && !s.empty()) s += ' ';
    s += vocab.token(tokens[i]);
  }
  return s;
}

std::string metrics_csv(std::span<const verify::MetricsSummary> rows) {
  std::ostringstream out;
  out << "delta,total,nominal,adversarial,ibp_verified,oracle,oracle_attempted,ibp_passes,oracle_"
         "passes\n";
  for (const auto& m : rows) {
    out << m.delta << ',' << m.total << ',' << m.nominal_accuracy() << ','
        << m.adversarial_accuracy() << ',' << m.ibp_accuracy() << ',' << m.oracle_accuracy() << ','
        << m.oracle_attempted << ',' << 2 * m.total << ',' << m.forward_passes << '\n';
  }
  return out.str();
}

std::string curve_csv(std::span<const verify::CurvePoint> curve, std::uint64_t ibp_cost) {
  std::ostringstream out;
  out << "forward_passes,fraction_robust\n";
  for (const auto& p : curve) out << p.passes << ',' << p.fraction << '\n';
  out << "# ibp_passes," << ibp_cost << '\n';
  return out.str();
}

nlohmann::json report_json(const verify::ExampleReport& r, const Vocabulary& vocab, Level level) {
  nlohmann::json j;
  j["index"] = r.index;
  j["label"] = r.label;
  j["prediction"] = r.prediction;
  j["elementary"] = r.elementary;
  j["nominal_correct"] = r.nominal_correct;
  j["adversarial_correct"] = r.adversarial_correct;
  j["ibp_verified"] = r.ibp_verified;
  j["ibp_margin"] = r.ibp_margin;
  j["oracle"] = verify::to_string(r.oracle);
  j["oracle_passes"] = r.oracle_passes;
  j["space_size"] = r.space_size;
  if (!r.counterexample.empty()) j["counterexample"] = decode(r.counterexample, vocab, level);
  if (!r.adversarial_tokens.empty()) j["adversarial"] = decode(r.adversarial_tokens, vocab, level);
  return j;
}

}  // namespace ibp::harness
