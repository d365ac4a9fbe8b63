// Command-line driver: playtrace [global options] <command> [options]

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "playtrace/config.hpp"
#include "playtrace/pipeline.hpp"

using namespace playtrace;

namespace {

const std::map<std::string, ModelKind> kKinds = {
    {"knn", ModelKind::Knn}, {"mlp", ModelKind::Mlp}, {"rf", ModelKind::Forest}};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Session-log aggregation and student answer prediction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");

  std::string config_path;
  std::optional<std::string> workdir;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--workdir", workdir, "Directory for inputs and outputs (env PLAYTRACE_WORKDIR)");
  app.add_option("--workers", workers, "Cap on parallel threads; 0 uses every core")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "Master seed for splits, models and the generator");

  std::optional<std::string> events_path, labels_path;
  auto add_paths = [&](CLI::App* cmd, bool events, bool labels) {
    if (events) cmd->add_option("--events", events_path, "Event file");
    if (labels) cmd->add_option("--labels", labels_path, "Label file");
  };

  auto* gen = app.add_subcommand("gen-synthetic", "Write a seeded synthetic event log, labels and manifest");
  std::optional<std::size_t> sessions, events_per_session;
  std::optional<double> noise;
  gen->add_option("--sessions", sessions, "Number of sessions")->check(CLI::PositiveNumber);
  gen->add_option("--events-per-session", events_per_session, "Mean events per session");
  gen->add_option("--noise", noise, "Std of the label logit noise")->check(CLI::NonNegativeNumber);
  add_paths(gen, true, true);

  auto* agg = app.add_subcommand("aggregate", "Aggregate events per (session, level group)");
  add_paths(agg, true, false);

  auto* sel = app.add_subcommand("select", "Rank features and keep a non-redundant subset");
  std::optional<std::size_t> select_k;
  std::optional<double> threshold;
  sel->add_option("--k", select_k, "Features to keep")->check(CLI::PositiveNumber);
  sel->add_option("--threshold", threshold, "Redundancy cut-off on |r|");
  add_paths(sel, false, true);

  std::string model_name;
  auto model_option = [&](CLI::App* cmd) {
    cmd->add_option("--model", model_name, "knn, mlp or rf")->required()->check(CLI::IsMember({"knn", "mlp", "rf"}));
  };
  auto* train = app.add_subcommand("train", "Fit a model on the training split and save it");
  model_option(train);
  add_paths(train, false, true);
  auto* evaluate = app.add_subcommand("evaluate", "Score a saved model on the held-out split");
  model_option(evaluate);
  add_paths(evaluate, false, true);
  auto* cv = app.add_subcommand("cv", "Cross-validate one model");
  model_option(cv);
  std::optional<std::size_t> folds;
  cv->add_option("--folds", folds, "Override the model's fold count")->check(CLI::Range(2, 1000));
  add_paths(cv, false, true);

  auto* bench = app.add_subcommand("benchmark", "Cross-validate every model and print the comparison table");
  std::vector<std::string> bench_models = {"knn", "mlp", "rf"};
  bench->add_option("--models", bench_models, "Models to run")->delimiter(',')->check(CLI::IsMember({"knn", "mlp", "rf"}));
  add_paths(bench, false, true);

  auto* verify = app.add_subcommand("verify", "Check output fingerprints against the current configuration");
  std::vector<std::string> verify_files;
  verify->add_option("files", verify_files, "Files to check (default: every known output)");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config = load_config_file(config_path, config);
    if (const char* env = std::getenv("PLAYTRACE_WORKDIR"); env && *env) config.paths.workdir = env;
    if (workdir) config.paths.workdir = *workdir;
    if (workers) config.workers = *workers;
    if (seed) config.set_seed(*seed);
    if (events_path) config.paths.events = *events_path;
    if (labels_path) config.paths.labels = *labels_path;
    if (sessions) config.synth.sessions = *sessions;
    if (events_per_session) config.synth.events_per_session = *events_per_session;
    if (noise) config.synth.noise = *noise;
    if (select_k) config.selection.k = *select_k;
    if (threshold) config.selection.redundancy_threshold = *threshold;

    Pipeline pipeline(config, std::cout, std::cerr);
    const std::string& cmd = app.get_subcommands().front()->get_name();
    if (cmd == "gen-synthetic") {
      pipeline.gen_synthetic();
    } else if (cmd == "aggregate") {
      pipeline.aggregate();
    } else if (cmd == "select") {
      pipeline.select();
    } else if (cmd == "train") {
      pipeline.train(kKinds.at(model_name));
    } else if (cmd == "evaluate") {
      pipeline.evaluate(kKinds.at(model_name));
    } else if (cmd == "cv") {
      if (folds) {
        RunConfig c = config;
        c.model(kKinds.at(model_name)).folds = *folds;
        Pipeline(c, std::cout, std::cerr).cv(kKinds.at(model_name));
      } else {
        pipeline.cv(kKinds.at(model_name));
      }
    } else if (cmd == "benchmark") {
      std::vector<ModelKind> kinds;
      for (const auto& m : bench_models) kinds.push_back(kKinds.at(m));
      pipeline.benchmark(kinds);
    } else if (cmd == "verify") {
      pipeline.verify(verify_files);
    }
  } catch (const Error& e) {
    std::cerr << "playtrace: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "playtrace: internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
