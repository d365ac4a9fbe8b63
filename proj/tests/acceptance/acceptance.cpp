// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance <work-dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "oracles.hpp"
#include "playtrace/config.hpp"
#include "playtrace/forest.hpp"
#include "playtrace/knn.hpp"
#include "playtrace/mlp.hpp"
#include "playtrace/selection.hpp"
#include "playtrace/synth.hpp"

using namespace playtrace;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  /// Records a failed condition; the first failure message leads the detail.
  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail.str("");
    pass = false;
    detail << what << "; ";
  }
};

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(PLAYTRACE_CLI_PATH) + " " + args + " >>" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s.setf(std::ios::scientific);
  s.precision(2);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

/// 1 and 2 share the default corpus: stream it through the reader, then
/// regenerate each session in memory for the brute-force comparison.
void aggregation_criteria(const fs::path& dir, Outcome& c1, Outcome& c2) {
  const SynthConfig config;
  const auto specs = default_specs();
  const fs::path events_path = dir / "events.csv", labels_path = dir / "labels.csv";
  SynthSummary summary;
  {
    std::ofstream ev(events_path, std::ios::binary), lab(labels_path, std::ios::binary);
    summary = generate(config, ev, lab);
  }
  c1.require(summary.events_written >= 1000000, "corpus has only " + std::to_string(summary.events_written) + " events");

  parallel::set_workers(1);
  const auto start = std::chrono::steady_clock::now();
  std::ifstream in(events_path, std::ios::binary);
  std::size_t row_errors = 0;
  EventReader reader(in, kEventColumns, [&](const RowError&) { ++row_errors; });
  const FeatureMatrix fm = aggregate(reader, specs, 1 << 15);
  const double stream_seconds = seconds_since(start);
  parallel::set_workers(0);
  const IngestStats stats = reader.stats();

  c1.require(row_errors == 0 && stats.rows_skipped == 0, "reader skipped rows");
  c1.require(stats.events_emitted == summary.events_written, "event count differs from generator");
  c1.require(fm.rows.size() == 3 * config.sessions, "expected one row per (session, group)");

  std::map<std::pair<SessionId, LevelGroup>, std::size_t> row_of;
  for (std::size_t r = 0; r < fm.rows.size(); ++r) row_of[{fm.rows[r].session_id, fm.rows[r].level_group}] = r;

  double vs_oracle = 0, vs_manifest = 0;
  std::size_t cells = 0;
  for (std::size_t i = 0; i < config.sessions; ++i) {
    SessionTruth truth;
    const auto events = generate_session(config, i, truth);
    const auto table = oracle::aggregate(events, specs);
    for (const auto& [key, want] : table) {
      auto it = row_of.find(key);
      if (it == row_of.end()) {
        vs_oracle = INFINITY;
        continue;
      }
      const auto& got = fm.rows[it->second].values;
      const auto& manifest = summary.sessions[i].aggregates[static_cast<std::size_t>(key.second)];
      for (std::size_t j = 0; j < specs.size(); ++j, ++cells) {
        const auto& w = want[j].number;
        if (got[j].has_value() != w.has_value()) vs_oracle = INFINITY;
        else if (w) vs_oracle = std::max(vs_oracle, std::fabs(*got[j] - *w));
        if (got[j].has_value() != manifest[j].has_value()) vs_manifest = INFINITY;
        else if (got[j]) vs_manifest = std::max(vs_manifest, std::fabs(*got[j] - *manifest[j]));
      }
    }
  }
  c1.require(cells == 3 * config.sessions * specs.size(), "oracle produced the wrong number of cells");
  c1.require(vs_oracle < 1e-9, "max |delta| vs oracle " + sci(vs_oracle));
  c1.require(vs_manifest < 1e-9, "max |delta| vs manifest " + sci(vs_manifest));
  c1.require(stream_seconds < 60, "streaming aggregate took " + fmt(stream_seconds, 1) + " s");
  c1.detail << summary.events_written << " events, " << cells << " cells, max |delta| oracle " << sci(vs_oracle)
            << " manifest " << sci(vs_manifest) << ", streamed in " << fmt(stream_seconds, 1) << " s on 1 worker";

  const CompressionReport cr = compression_report(stats, fm);
  c2.require(cr.ratio.has_value() && *cr.ratio <= 0.05, "output exceeds 5% of input bytes");
  c2.detail << cr.output_bytes << " of " << cr.input_bytes << " bytes = " << fmt(cr.ratio.value_or(1) * 100, 3)
            << "% (limit 5%)";
  fs::remove(events_path);
  fs::remove(labels_path);
}

void gradient_criterion(Outcome& c) {
  double worst = 0;
  for (auto act : {Activation::Relu, Activation::Logistic}) {
    MlpConfig mc;
    mc.input_dim = 3;
    mc.hidden_sizes = {4};
    mc.output_dim = 2;
    mc.seed = 42;
    mc.hidden_activation = act;
    const MlpModel m = mlp_init(mc);
    const Matrix x = oracle::random_matrix(16, 3, 42, -2, 2);
    std::vector<int> y(16);
    Rng rng(43);
    for (auto& v : y) v = static_cast<int>(rng.below(2));
    const double err = oracle::gradient_check(m, x, y, 1e-5);
    c.require(err < 1e-4, std::string(to_string(act)) + " max relative error " + sci(err));
    worst = std::max(worst, err);
  }
  c.detail << "3-4-2 network, 26 parameters, h = 1e-5, max relative error " << sci(worst) << " (limit 1e-4)";
}

void knn_criterion(Outcome& c) {
  const Matrix train = oracle::random_matrix(200, 4, 1);
  const Matrix queries = oracle::random_matrix(200, 4, 2);
  std::vector<int> labels(200);
  Rng rng(3);
  for (auto& v : labels) v = static_cast<int>(rng.below(2));
  std::size_t compared = 0;
  for (auto metric : {Metric::Euclidean, Metric::Manhattan, Metric::Cosine}) {
    for (std::size_t k : {1u, 3u, 5u, 10u}) {
      const auto model = knn_fit(train, labels, k, metric);
      const bool same = knn_predict(model, queries) == oracle::knn_predict(train, labels, k, metric, queries) &&
                        knn_predict_serial(model, queries) == knn_predict(model, queries);
      c.require(same, std::string(to_string(metric)) + " k=" + std::to_string(k) + " differs from oracle");
      compared += queries.rows();
    }
    const auto self = knn_predict(knn_fit(train, labels, 1, metric), train);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < self.size(); ++i) hits += self[i] == labels[i];
    c.require(hits == self.size(), std::string(to_string(metric)) + " k=1 self accuracy below 1");
  }
  c.detail << compared << " predictions identical to brute force over 3 metrics; k=1 self accuracy 1.0";
}

void forest_criterion(Outcome& c) {
  // Unit impurity values, compared exactly.
  const std::vector<std::size_t> balanced = {5, 5}, pure = {4, 0};
  c.require(entropy(balanced) == 1.0 && gini(balanced) == 0.5, "(5,5) impurity not exact");
  c.require(entropy(pure) == 0.0 && gini(pure) == 0.0, "pure impurity not zero");

  Rng rng(7);
  std::size_t matched = 0;
  for (int node = 0; node < 50; ++node) {
    const std::size_t n = 20 + rng.below(40), d = 1 + rng.below(5);
    Matrix x(n, d);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x(i, j) = node % 2 ? rng.uniform(-3, 3) : double(rng.below(5));
      y[i] = rng.bernoulli(x(i, 0) > 0 ? 0.7 : 0.3);
    }
    std::vector<std::size_t> rows(n), features(d);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    for (std::size_t j = 0; j < d; ++j) features[j] = j;
    const bool gini_node = node % 3 != 0;
    const auto got = best_split(x, y, rows, features, gini_node ? Criterion::Gini : Criterion::Entropy);
    const auto want = oracle::exhaustive_split(x, y, rows, features, gini_node);
    const bool same = got.has_value() == want.has_value() &&
                      (!got || (got->feature == want->feature && got->threshold == want->threshold &&
                                std::fabs(got->gain - want->gain) < 1e-12));
    c.require(same, "node " + std::to_string(node) + " split differs from exhaustive scan");
    matched += same;
  }

  Matrix xor_x(400, 2);
  std::vector<int> xor_y(400);
  for (std::size_t i = 0; i < 400; ++i) {
    xor_x(i, 0) = rng.uniform(-1, 1);
    xor_x(i, 1) = rng.uniform(-1, 1);
    xor_y[i] = (xor_x(i, 0) > 0) != (xor_x(i, 1) > 0);
  }
  const Tree tree = tree_fit(xor_x, xor_y, {});
  std::size_t xor_hits = 0;
  for (std::size_t i = 0; i < 400; ++i) xor_hits += tree.predict(xor_x.row(i)) == xor_y[i];
  const double xor_acc = double(xor_hits) / 400;
  c.require(xor_acc == 1.0, "XOR training accuracy " + fmt(xor_acc));

  Matrix bx, tx;
  std::vector<int> by, ty;
  oracle::blobs(600, 4, 1.5, 11, bx, by);
  oracle::blobs(400, 4, 1.5, 12, tx, ty);
  const auto forest = forest_fit(bx, by, {});
  const auto pred = forest_predict(forest, tx);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == ty[i];
  const double acc = double(hits) / double(pred.size());
  c.require(forest.trees.size() == 100, "forest does not have 100 trees");
  c.require(acc >= 0.95, "blob test accuracy " + fmt(acc));
  c.detail << matched << "/50 splits match exhaustive scan; XOR train accuracy " << fmt(xor_acc)
           << "; 100-tree blob test accuracy " << fmt(acc) << "; impurity units exact";
}

void selection_criterion(Outcome& c) {
  SynthConfig config;
  config.sessions = 400;
  config.events_per_session = 300;
  config.noise = 0;
  const SynthCorpus corpus = generate_in_memory(config);
  const FeatureMatrix fm = aggregate(corpus.events, default_specs());
  const JoinedDataset data = join(fm, corpus.labels);
  SelectionInput input;
  input.names = data.feature_names;
  for (const auto& name : data.feature_names) input.sources.push_back(fm.columns[*fm.find_column(name)].source);
  input.categorical = data.code_columns;
  input.x = impute_mean(data.x, data.feature_names).x;
  input.label = data.y;
  const SelectionPolicy policy;
  const SelectionResult result = select_features(input, policy);
  c.require(!result.selected.empty() && result.selected.front() == corpus.summary.driver,
            "planted driver " + corpus.summary.driver + " not ranked first");
  double worst_pair = 0;
  for (std::size_t a = 0; a < result.selected.size(); ++a)
    for (std::size_t b = a + 1; b < result.selected.size(); ++b) {
      const auto index = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(input.names.begin(), input.names.end(), name) - input.names.begin());
      };
      const auto xa = input.x.column(index(result.selected[a])), xb = input.x.column(index(result.selected[b]));
      if (auto r = pearson(xa, xb)) worst_pair = std::max(worst_pair, std::fabs(*r));
    }
  c.require(worst_pair <= policy.redundancy_threshold, "kept pair with |r| " + fmt(worst_pair));

  Rng rng(17);
  double worst_affine = 0, min_mi = INFINITY;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 5 + rng.below(200);
    std::vector<double> x(n), y(n), ax(n);
    std::vector<int> label(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = 0.5 * x[i] + rng.normal();
      label[i] = rng.bernoulli(0.3 + 0.4 * (x[i] > 0));
    }
    double a = std::exp(rng.uniform(-3, 3));
    if (rng.bernoulli(0.5)) a = -a;
    const double b = rng.uniform(-10, 10);
    for (std::size_t i = 0; i < n; ++i) ax[i] = a * x[i] + b;
    const double r = *pearson(x, y), r2 = *pearson(ax, y);
    worst_affine = std::max(worst_affine, std::fabs(r2 - (a > 0 ? r : -r)));
    min_mi = std::min(min_mi, mutual_information(x, label, 10));
  }
  c.require(worst_affine < 1e-12, "affine invariance error " + sci(worst_affine));
  c.require(min_mi >= -1e-12, "negative MI " + sci(min_mi));
  c.detail << "driver " << corpus.summary.driver << " ranked first of " << input.names.size()
           << "; max kept |r| " << fmt(worst_pair) << "; 1000 trials: affine error " << sci(worst_affine)
           << ", min MI " << sci(min_mi);
}

/// 7, 8 and 9 read the reports of two full CLI runs.
void pipeline_criteria(const fs::path& dir, Outcome& c7, Outcome& c8, Outcome& c9) {
  const std::vector<std::string> steps = {"gen-synthetic", "aggregate", "select", "benchmark"};
  std::array<double, 2> seconds{};
  for (int run = 0; run < 2; ++run) {
    const fs::path wd = dir / (run == 0 ? "run_a" : "run_b");
    fs::remove_all(wd);
    fs::create_directories(wd);
    const auto start = std::chrono::steady_clock::now();
    for (const auto& step : steps) {
      const int code = run_cli("--seed 42 --workdir " + wd.string() + " " + step, wd / "cli.log");
      c7.require(code == 0, step + " exited with " + std::to_string(code));
    }
    seconds[run] = seconds_since(start);
    c7.require(seconds[run] < 300, "run took " + fmt(seconds[run], 1) + " s");
  }
  const fs::path a = dir / "run_a", b = dir / "run_b";
  std::size_t compared = 0;
  for (const char* f : {"events.csv", "labels.csv", "manifest.json", "features.csv", "features.meta.json",
                        "compression.json", "selection.json", "benchmark.json"}) {
    const bool exists = fs::exists(a / f) && fs::exists(b / f);
    c7.require(exists, std::string(f) + " missing");
    if (!exists) continue;
    c7.require(slurp(a / f) == slurp(b / f), std::string(f) + " differs between runs");
    ++compared;
  }
  c7.detail << compared << " outputs byte-identical; wall clock " << fmt(seconds[0], 1) << " s and "
            << fmt(seconds[1], 1) << " s (limit 300 s)";

  json bench;
  try {
    bench = json::parse(slurp(a / "benchmark.json"));
  } catch (const std::exception& e) {
    c8.require(false, std::string("benchmark.json unreadable: ") + e.what());
    c9.require(false, "benchmark.json unreadable");
    return;
  }

  std::map<std::string, std::size_t> folds;
  for (const auto& r : bench["reports"]) folds[r["model"].get<std::string>()] = r["fold_count"].get<std::size_t>();
  c8.require(folds["knn"] == 10, "knn used " + std::to_string(folds["knn"]) + " folds");
  c8.require(folds["mlp"] == 5, "mlp used " + std::to_string(folds["mlp"]) + " folds");
  c8.require(folds["rf"] == 5, "rf used " + std::to_string(folds["rf"]) + " folds");
  const json& fp = bench["fingerprint"];
  c8.require(fingerprint_consistent(fp), "fingerprint hash does not match its config");
  const json& cfg = fp["config"];
  const json& m = cfg["models"];
  c8.require(m["knn"]["k"] == 5, "k != 5");
  c8.require(m["rf"]["trees"] == 100, "trees != 100");
  c8.require(m["rf"]["seed"] == 42, "forest seed != 42");
  c8.require(m["mlp"]["hidden_sizes"] == json::array({128}), "hidden != [128]");
  c8.require(m["mlp"]["epochs"] == 100, "epochs != 100");
  c8.require(m["mlp"]["learning_rate"] == 0.001, "learning rate != 0.001");
  c8.require(cfg["split"]["test_fraction"] == 0.2, "split is not 80-20");
  c8.require(m["knn"]["folds"] == 10 && m["mlp"]["folds"] == 5 && m["rf"]["folds"] == 5,
             "fold counts missing from fingerprint");
  c8.detail << "folds knn " << folds["knn"] << ", mlp " << folds["mlp"] << ", rf " << folds["rf"]
            << "; k=5, 100 trees seed 42, hidden [128], 100 epochs, lr 0.001, 80-20 split in fingerprint "
            << fp["hash"].get<std::string>();

  std::ifstream lab(a / "labels.csv");
  const auto labels = read_labels(lab);
  double positives = 0;
  for (const auto& l : labels) positives += l.correct;
  const double p = positives / double(labels.size());
  const double baseline = 2 * p / (1 + p);
  c9.detail << "positive rate " << fmt(p) << ", baseline F1 " << fmt(baseline, 4) << ", need "
            << fmt(baseline + 0.05, 4) << ":";
  std::size_t rows = 0;
  for (const auto& row : bench["table"]) {
    if (row["reference"].get<bool>()) continue;
    ++rows;
    const std::string name = row["model"];
    const double f1 = row["f1"].get<double>();
    c9.require(f1 >= baseline + 0.05, name + " F1 " + fmt(f1, 4) + " below " + fmt(baseline + 0.05, 4));
    c9.detail << ' ' << name << ' ' << fmt(f1, 4);
  }
  c9.require(rows == 3, "expected three computed models");
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "playtrace_acceptance";
  fs::create_directories(dir);

  std::array<Outcome, 10> c;
  const std::array<const char*, 10> names = {"",
                                             "aggregation oracle equivalence",
                                             "compression",
                                             "MLP gradient check",
                                             "KNN brute-force equivalence",
                                             "tree/forest correctness",
                                             "selection ground truth",
                                             "end-to-end determinism",
                                             "protocol fidelity",
                                             "learnability floor"};
  auto guarded = [](std::initializer_list<Outcome*> outs, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      for (auto* o : outs) o->require(false, std::string("exception: ") + e.what());
    }
  };
  guarded({&c[1], &c[2]}, [&] { aggregation_criteria(dir, c[1], c[2]); });
  guarded({&c[3]}, [&] { gradient_criterion(c[3]); });
  guarded({&c[4]}, [&] { knn_criterion(c[4]); });
  guarded({&c[5]}, [&] { forest_criterion(c[5]); });
  guarded({&c[6]}, [&] { selection_criterion(c[6]); });
  guarded({&c[7], &c[8], &c[9]}, [&] { pipeline_criteria(dir, c[7], c[8], c[9]); });

  bool all = true;
  for (int i = 1; i <= 9; ++i) {
    std::cout << "criterion " << i << " (" << names[i] << "): " << (c[i].pass ? "PASS" : "FAIL") << " - "
              << c[i].detail.str() << '\n';
    all = all && c[i].pass;
  }
  return all ? 0 : 1;
}
