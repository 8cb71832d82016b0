// Command-line front end: training, evaluation, attacks, verification, budget
// sweeps and perturbation-space counting.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ibp/harness/checkpoint.hpp"
#include "ibp/harness/config.hpp"
#include "ibp/harness/data.hpp"
#include "ibp/harness/experiment.hpp"
#include "ibp/harness/io.hpp"
#include "ibp/train.hpp"
#include "ibp/verify.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ibp;
using namespace ibp::harness;

namespace {

struct Common {
  std::string config;
  std::optional<std::size_t> delta;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string checkpoint;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "Experiment configuration (JSON)");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--delta", c.delta, "Perturbation budget");
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
}

ExperimentConfig resolved_config(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = cfg.train.seed = *c.seed;
  if (c.delta) cfg.delta = *c.delta;
  return cfg;
}

void write_config(const Common& c, const ExperimentConfig& cfg) {
  write_atomic(fs::path(c.out) / "config.json", to_json(cfg).dump(2) + "\n");
}

struct Loaded {
  Checkpoint ckpt;
  Resources res;
  std::vector<Example> test;
};

Loaded load_for_evaluation(const Common& c, const ExperimentConfig& cfg) {
  const fs::path ckpt_path = c.checkpoint.empty() ? cfg.checkpoint_path : fs::path(c.checkpoint);
  if (ckpt_path.empty())
    throw std::invalid_argument("no checkpoint given (--checkpoint or config 'checkpoint')");
  Loaded l;
  l.ckpt = load_checkpoint(ckpt_path);
  const Level level = parse_level(l.ckpt.metadata.at("level").get<std::string>());
  if (level != cfg.level)
    throw std::invalid_argument("checkpoint level differs from the config level");
  l.res = resources_from_metadata(l.ckpt.metadata, cfg);
  l.test = encode(load_split(cfg, cfg.test_path, "test"), l.res.vocab, l.ckpt.net.min_length());
  return l;
}

void write_reports(const fs::path& path, const verify::Evaluation& ev, const Loaded& l,
                   Level level) {
  std::string lines;
  for (const auto& r : ev.reports) lines += report_json(r, l.res.vocab, level).dump() + "\n";
  write_atomic(path, lines);
}

void print_summary(const verify::MetricsSummary& m, const verify::EvalOptions& opt) {
  std::printf("delta=%zu examples=%zu nominal=%.4f", m.delta, m.total, m.nominal_accuracy());
  if (opt.attack) std::printf(" adversarial=%.4f", m.adversarial_accuracy());
  if (opt.ibp) std::printf(" ibp_verified=%.4f", m.ibp_accuracy());
  if (opt.oracle)
    std::printf(" oracle=%.4f (attempted %zu, %llu forward passes)", m.oracle_accuracy(),
                m.oracle_attempted, static_cast<unsigned long long>(m.forward_passes));
  std::printf("\n");
}

int run_evaluation(const Common& c, verify::EvalOptions opt, const std::string& report_name) {
  const auto cfg = resolved_config(c);
  const auto l = load_for_evaluation(c, cfg);
  opt.delta = cfg.delta;
  opt.oracle_budget = cfg.oracle_budget;
  const auto ev = verify::evaluate(l.ckpt.net, std::span<const Example>(l.test), l.res.table, opt);
  const fs::path out(c.out);
  write_atomic(out / "metrics.csv", metrics_csv(std::span(&ev.summary, 1)));
  write_reports(out / report_name, ev, l, cfg.level);
  write_config(c, cfg);
  print_summary(ev.summary, opt);
  return 0;
}

int cmd_train(const Common& c, const std::optional<std::string>& regime) {
  auto cfg = resolved_config(c);
  if (c.delta) cfg.train.delta_train = *c.delta;
  if (regime) cfg.train.regime = train::parse_regime(*regime);
  const auto res = load_resources(cfg);
  auto net = make_network(cfg, res);
  const auto train_set =
      encode(load_split(cfg, cfg.train_path, "train"), res.vocab, net.min_length());
  const auto valid_set =
      encode(load_split(cfg, cfg.validation_path, "validation"), res.vocab, net.min_length());
  const fs::path out(c.out);
  std::string log_lines;
  const auto result = train::train<float>(
      cfg.train, train_set, valid_set, res.table, std::move(net), [&](const train::EpochLog& e) {
        log_lines += train::to_json_line(e) + "\n";
        std::printf("epoch %zu kappa=%.3f loss=%.4f validation=%.4f%s\n", e.epoch, e.kappa,
                    e.train_loss, e.validation_metric, e.improved ? " *" : "");
        std::fflush(stdout);
      });
  write_atomic(out / "training_log.jsonl", log_lines);
  const fs::path ckpt = out / "model.ckpt";
  save_checkpoint(ckpt, result.net, checkpoint_metadata(cfg, res));
  cfg.checkpoint_path = fs::absolute(ckpt);
  write_config(c, cfg);
  std::printf("best epoch %zu, validation %.4f, checkpoint %s\n", result.state.best_epoch,
              result.state.best_metric, ckpt.string().c_str());
  return 0;
}

int cmd_sweep(const Common& c, std::vector<std::size_t> deltas) {
  const auto cfg = resolved_config(c);
  if (deltas.empty()) deltas = cfg.deltas;
  if (!std::is_sorted(deltas.begin(), deltas.end()))
    throw std::invalid_argument("--deltas must be ascending");
  const auto l = load_for_evaluation(c, cfg);
  verify::EvalOptions opt;
  opt.oracle_budget = cfg.oracle_budget;
  std::vector<verify::MetricsSummary> rows;
  const fs::path out(c.out);
  for (std::size_t d : deltas) {
    opt.delta = d;
    const auto ev =
        verify::evaluate(l.ckpt.net, std::span<const Example>(l.test), l.res.table, opt);
    rows.push_back(ev.summary);
    const auto curve = verify::pass_budget_curve(ev.reports);
    write_atomic(out / ("curve_delta" + std::to_string(d) + ".csv"),
                 curve_csv(curve, verify::ibp_pass_cost(ev.reports)));
    print_summary(ev.summary, opt);
  }
  write_atomic(out / "metrics.csv", metrics_csv(rows));
  write_config(c, cfg);
  return 0;
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(item, &pos);
    if (pos != item.size()) throw std::invalid_argument("bad list entry '" + item + "'");
    out.push_back(std::size_t(v));
  }
  return out;
}

struct CountArgs {
  std::string options;
  std::string text;
  std::string substitutions;
  std::string level = "char";
};

// Vocabulary covering the text and every token named in the table file.
Vocabulary count_vocabulary(const std::vector<std::string>& tokens, const fs::path& table) {
  Vocabulary v;
  for (const auto& t : tokens) v.add(t);
  for_each_line(table, [&](std::size_t, std::string_view line) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    std::istringstream in{std::string(line)};
    std::string field;
    while (in >> field) v.add(field);
  });
  return v;
}

int cmd_count(const Common& c, const CountArgs& a) {
  std::optional<ExperimentConfig> cfg;
  if (!c.config.empty()) cfg = resolved_config(c);
  const std::size_t delta = c.delta ? *c.delta : cfg ? cfg->delta : 1;
  auto print = [](std::uint64_t n) { std::printf("%llu\n", static_cast<unsigned long long>(n)); };
  if (!a.options.empty()) {
    const auto options = parse_list(a.options);
    print(perturb::count_space(options, delta));
    return 0;
  }
  const Level level = cfg ? cfg->level : parse_level(a.level);
  const fs::path table_path = !a.substitutions.empty() ? fs::path(a.substitutions)
                              : cfg                    ? cfg->substitutions_path
                                                       : fs::path();
  if (table_path.empty())
    throw std::invalid_argument("count-space needs --options or a substitution table");
  std::vector<std::vector<std::string>> texts;
  if (!a.text.empty()) {
    texts.push_back(tokenize(level == Level::Character ? lowercase(a.text) : a.text, level));
  } else if (cfg) {
    for (auto& ex : load_split(*cfg, cfg->test_path, "test").examples)
      texts.push_back(std::move(ex.tokens));
  } else {
    throw std::invalid_argument(
        "count-space needs --options, --text or a config with a test split");
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto vocab = count_vocabulary(texts[i], table_path);
    const auto table = load_substitutions(table_path, vocab);
    const auto ids = encode_tokens(texts[i], vocab, 0);
    const auto pset = perturb::elementary_perturbations(ids, table, delta);
    if (texts.size() > 1) std::printf("%zu,", i);
    print(perturb::count_space(pset));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified robustness to symbol substitutions: training and verification"};
  app.require_subcommand(1);

  Common train_c, eval_c, attack_c, verify_c, sweep_c, count_c;
  std::optional<std::string> regime;
  std::string method = "ibp";
  std::string deltas_text;
  CountArgs count_args;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  add_common(train_cmd, train_c);
  train_cmd->add_option("--regime", regime, "normal, augmentation, adversarial or verifiable");

  auto* eval_cmd =
      app.add_subcommand("evaluate", "Nominal, adversarial, IBP-verified and oracle accuracy");
  add_common(eval_cmd, eval_c);
  eval_cmd->add_option("--checkpoint", eval_c.checkpoint, "Checkpoint (overrides the config)");

  auto* attack_cmd = app.add_subcommand("attack", "HotFlip attack on the test split");
  add_common(attack_cmd, attack_c);
  attack_cmd->add_option("--checkpoint", attack_c.checkpoint, "Checkpoint (overrides the config)");

  auto* verify_cmd = app.add_subcommand("verify", "Verify the test split");
  add_common(verify_cmd, verify_c);
  verify_cmd->add_option("--checkpoint", verify_c.checkpoint, "Checkpoint (overrides the config)");
  verify_cmd->add_option("--method", method, "ibp or exhaustive")
      ->check(CLI::IsMember({"ibp", "exhaustive"}))
      ->capture_default_str();

  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate every metric over several budgets");
  add_common(sweep_cmd, sweep_c);
  sweep_cmd->add_option("--checkpoint", sweep_c.checkpoint, "Checkpoint (overrides the config)");
  sweep_cmd->add_option("--deltas", deltas_text, "Comma-separated ascending budgets");

  auto* count_cmd = app.add_subcommand("count-space", "Size of the perturbation space");
  add_common(count_cmd, count_c, false);
  count_cmd->add_option("--options", count_args.options,
                        "Comma-separated option counts per position");
  count_cmd->add_option("--text", count_args.text, "Sentence to count");
  count_cmd->add_option("--substitutions", count_args.substitutions, "Substitution table");
  count_cmd->add_option("--level", count_args.level, "word or char")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(train_c, regime);
    if (*eval_cmd) return run_evaluation(eval_c, {}, "examples.jsonl");
    if (*attack_cmd) {
      verify::EvalOptions opt;
      opt.ibp = opt.oracle = false;
      return run_evaluation(attack_c, opt, "attacks.jsonl");
    }
    if (*verify_cmd) {
      verify::EvalOptions opt;
      opt.attack = false;
      opt.ibp = method == "ibp";
      opt.oracle = method == "exhaustive";
      return run_evaluation(verify_c, opt, "verify.jsonl");
    }
    if (*sweep_cmd)
      return cmd_sweep(sweep_c,
                       deltas_text.empty() ? std::vector<std::size_t>{} : parse_list(deltas_text));
    if (*count_cmd) return cmd_count(count_c, count_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
