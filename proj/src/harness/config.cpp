#include "ibp/harness/config.hpp"

#include <set>

#include "ibp/harness/io.hpp"

namespace ibp::harness {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw std::invalid_argument(where + ": unknown key '" + k + "'");
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  check_keys(j, {"regime",     "architecture",  "level",         "class_count", "train",
                 "validation", "test",          "embeddings",    "embed_dim",   "substitutions",
                 "checkpoint", "delta",         "delta_train",   "deltas",      "seed",
                 "kappa",      "interpolation", "learning_rate", "batch_size",  "max_epochs",
                 "patience",   "char_limit",    "oracle_budget"},
             "config");
  ExperimentConfig c;
  try {
    if (j.contains("regime")) c.train.regime = train::parse_regime(j["regime"].get<std::string>());
    c.architecture = j.value("architecture", c.architecture);
    if (j.contains("level")) c.level = parse_level(j["level"].get<std::string>());
    c.class_count = j.value("class_count", c.class_count);
    c.train_path = resolve(base_dir, j.value("train", std::string{}));
    c.validation_path = resolve(base_dir, j.value("validation", std::string{}));
    c.test_path = resolve(base_dir, j.value("test", std::string{}));
    c.embeddings_path = resolve(base_dir, j.value("embeddings", std::string{}));
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.substitutions_path = resolve(base_dir, j.value("substitutions", std::string{}));
    c.checkpoint_path = resolve(base_dir, j.value("checkpoint", std::string{}));
    c.delta = j.value("delta", c.delta);
    c.train.delta_train = j.value("delta_train", c.train.delta_train);
    if (j.contains("deltas")) c.deltas = j["deltas"].get<std::vector<std::size_t>>();
    c.seed = j.value("seed", c.seed);
    c.train.seed = c.seed;
    if (j.contains("kappa")) {
      const auto& k = j["kappa"];
      check_keys(k, {"start", "end", "warmup_fraction"}, "config.kappa");
      c.train.kappa.start = k.value("start", c.train.kappa.start);
      c.train.kappa.end = k.value("end", c.train.kappa.end);
      c.train.kappa.warmup_fraction = k.value("warmup_fraction", c.train.kappa.warmup_fraction);
    }
    c.train.interpolation = j.value("interpolation", c.train.interpolation);
    c.train.learning_rate = j.value("learning_rate", c.train.learning_rate);
    c.train.batch_size = j.value("batch_size", c.train.batch_size);
    c.train.max_epochs = j.value("max_epochs", c.train.max_epochs);
    c.train.patience = j.value("patience", c.train.patience);
    c.char_limit = j.value("char_limit", c.char_limit);
    c.oracle_budget = j.value("oracle_budget", c.oracle_budget);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.train.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path, e.what());
  }
  try {
    return config_from_json(j, path.parent_path());
  } catch (const std::invalid_argument& e) {
    throw InputError(path, e.what());
  }
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["regime"] = train::to_string(c.train.regime);
  j["architecture"] = c.architecture;
  j["level"] = to_string(c.level);
  j["class_count"] = c.class_count;
  j["train"] = c.train_path.string();
  j["validation"] = c.validation_path.string();
  j["test"] = c.test_path.string();
  j["embeddings"] = c.embeddings_path.string();
  j["embed_dim"] = c.embed_dim;
  j["substitutions"] = c.substitutions_path.string();
  j["checkpoint"] = c.checkpoint_path.string();
  j["delta"] = c.delta;
  j["delta_train"] = c.train.delta_train;
  j["deltas"] = c.deltas;
  j["seed"] = c.seed;
  j["kappa"] = {{"start", c.train.kappa.start},
                {"end", c.train.kappa.end},
                {"warmup_fraction", c.train.kappa.warmup_fraction}};
  j["interpolation"] = c.train.interpolation;
  j["learning_rate"] = c.train.learning_rate;
  j["batch_size"] = c.train.batch_size;
  j["max_epochs"] = c.train.max_epochs;
  j["patience"] = c.train.patience;
  j["char_limit"] = c.char_limit;
  j["oracle_budget"] = c.oracle_budget;
  return j;
}

}  // namespace ibp::harness
