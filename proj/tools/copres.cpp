// copres: dataset generation, training, evaluation and attack experiments.
//
//   copres gen --out data/bench.jsonl
//   copres attack-matrix --system audio-radio-physical --fusion all --out matrix.csv
//   copres relay-grid --probe
//   copres simulate --attacker relay --attack "B,W"
//
// Exit codes: 0 success, 1 other errors, 2 invalid plan, 3 infeasible attack
// without --force.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "copresence/dataset_io.hpp"
#include "copresence/harness.hpp"
#include "copresence/model_io.hpp"
#include "copresence/parallel.hpp"

using namespace copresence;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  int threads = 0;
  std::string out;
};

struct ModelOptions {
  std::string system = "audio-radio-physical";
  std::string classifier = "dt";
  int trees = 50;
  int max_depth = 10;
  int min_leaf = 2;

  void add(CLI::App* cmd) {
    cmd->add_option("--system", system, "audio-only | audio-radio | physical | audio-radio-physical")
        ->capture_default_str();
    cmd->add_option("--trees", trees, "trees per random forest")->capture_default_str();
    cmd->add_option("--max-depth", max_depth)->capture_default_str();
    cmd->add_option("--min-leaf", min_leaf)->capture_default_str();
  }
  ClassifierParams params(ClassifierKind kind, std::uint64_t seed) const {
    if (trees < 1 || max_depth < 1 || min_leaf < 1) throw Error(Errc::InvalidPlan, "tree parameters must be >= 1");
    ClassifierParams p;
    p.kind = kind;
    p.forest.n_trees = trees;
    p.forest.tree.max_depth = max_depth;
    p.forest.tree.min_leaf = min_leaf;
    p.forest.seed = seed;
    return p;
  }
};

struct AttackOptions {
  std::vector<std::string> attacks;
  std::string radio_direction = "bi";
  std::string physical_mode = "zero";
  bool force = false;

  void add(CLI::App* cmd, bool many) {
    auto* opt = cmd->add_option("--attack", attacks, "manipulated modalities, e.g. \"B,W\"; \"\" or {} for none");
    if (!many) opt->expected(1);
    cmd->add_option("--radio-direction", radio_direction, "bi | uni")->capture_default_str();
    cmd->add_option("--physical-mode", physical_mode, "zero | mode")->capture_default_str();
    cmd->add_flag("--force", force, "allow combinations outside the demonstrated catalog");
  }
  std::vector<AttackSpec> specs() const {
    std::vector<AttackSpec> out;
    const auto dir = parse_radio_direction(radio_direction);
    const auto mode = parse_physical_mode(physical_mode);
    for (const auto& a : attacks) out.push_back(AttackSpec::parse(a, dir, mode));
    return out;
  }
  void check(ModalitySet system) const {
    for (const auto& s : specs()) {
      if (!s.manipulated.is_subset_of(system))
        throw Error(Errc::InvalidPlan, s.label() + " is not part of the system's modalities");
      if (!force && !check_feasible(s).feasible)
        throw Error(Errc::InfeasibleAttack, s.label() + " is not a demonstrated combination (use --force)");
    }
  }
};

std::vector<ContextPair> load_or_generate(const std::string& data, std::uint64_t seed) {
  if (!data.empty()) return read_dataset(data);
  std::cerr << "no --data given; generating the benchmark with seed " << seed << "\n";
  return gen_pairs(benchmark_config(seed));
}

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(g.out, text);
    std::cerr << "wrote " << g.out << "\n";
  }
}

std::vector<FusionStrategy> parse_fusions(const std::vector<std::string>& names) {
  std::vector<FusionStrategy> out;
  for (const auto& n : names) {
    if (n == "all") {
      out = {FusionStrategy::features(), FusionStrategy::single(), FusionStrategy::with_subsets()};
      continue;
    }
    switch (parse_fusion(n)) {
      case FusionKind::Features: out.push_back(FusionStrategy::features()); break;
      case FusionKind::DecisionsSingle: out.push_back(FusionStrategy::single()); break;
      case FusionKind::DecisionsSubsets: out.push_back(FusionStrategy::with_subsets()); break;
    }
  }
  return out;
}

// Wraps argument parse failures so they surface as plan errors (exit 2).
template <class F>
auto as_plan(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::InfeasibleAttack || e.code() == Errc::InvalidPlan) throw;
    throw Error(Errc::InvalidPlan, e.what());
  }
}

std::string metrics_text(const Metrics& m) {
  auto pct = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * *v);
    return std::string(buf);
  };
  std::string s = "tp=" + std::to_string(m.counts.tp) + " fp=" + std::to_string(m.counts.fp) +
                  " tn=" + std::to_string(m.counts.tn) + " fn=" + std::to_string(m.counts.fn) + "\n";
  s += "FPR " + pct(m.fpr) + "  FNR " + pct(m.fnr) + "  F1 " +
       (m.f1 ? std::to_string(*m.f1).substr(0, 5) : std::string("n/a")) + "\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-based co-presence detection: datasets, models and attack experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--threads", g.threads, "OpenMP worker threads (0 = runtime default)");
  app.add_option("--out", g.out, "output file (stdout when omitted, where applicable)");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset (JSON Lines + WAV files)");
  std::string gen_config, gen_preset = "benchmark";
  std::optional<int> gen_n_co, gen_n_non;
  std::optional<double> gen_noise;
  bool gen_no_hw = false, gen_inline = false;
  gen->add_option("--config", gen_config, "profile config JSON (default: the shipped profiles)");
  gen->add_option("--preset", gen_preset, "benchmark | controlled | imbalance")->capture_default_str();
  gen->add_option("--n-co", gen_n_co, "co-present pair count");
  gen->add_option("--n-non", gen_n_non, "non-co-present pair count");
  gen->add_option("--noise-scale", gen_noise, "scales every co-location and sensor noise term");
  gen->add_flag("--no-hardware-variance", gen_no_hw, "single-mode sensor discrepancies");
  gen->add_flag("--inline-audio", gen_inline, "store samples in the JSON lines instead of WAV files");

  // train
  auto* train = app.add_subcommand("train", "train a fused model and save it (--out is the manifest path)");
  std::string train_data, train_fusion = "features";
  ModelOptions train_model;
  train->add_option("--data", train_data, "dataset (default: generated benchmark)");
  train->add_option("--fusion", train_fusion, "features | single | subsets")->capture_default_str();
  train->add_option("--classifier", train_model.classifier, "dt | rf")->capture_default_str();
  train_model.add(train);

  // eval
  auto* eval = app.add_subcommand("eval", "score a saved model on a dataset, optionally under attack");
  std::string eval_data, eval_model;
  AttackOptions eval_attack;
  eval->add_option("--data", eval_data, "dataset (default: generated benchmark)");
  eval->add_option("--model", eval_model, "model manifest written by train")->required();
  eval_attack.add(eval, false);

  // attack-matrix
  auto* matrix = app.add_subcommand("attack-matrix", "cross-validated FPR/FNR under every attack (CSV to --out)");
  std::string matrix_data, matrix_text;
  std::vector<std::string> matrix_fusions{"features"}, matrix_classifiers{"dt", "rf"};
  ModelOptions matrix_model;
  AttackOptions matrix_attack;
  int matrix_folds = 10;
  bool matrix_undersample = false;
  matrix->add_option("--data", matrix_data, "dataset (default: generated benchmark)");
  matrix->add_option("--fusion", matrix_fusions, "features | single | subsets | all (repeatable)")
      ->capture_default_str();
  matrix->add_option("--classifier", matrix_classifiers, "dt | rf (repeatable)")->capture_default_str();
  matrix->add_option("--folds", matrix_folds)->capture_default_str();
  matrix->add_flag("--undersample", matrix_undersample, "19-subset rounds over the non-co-present pairs");
  matrix->add_option("--text", matrix_text, "also write the rendered table here");
  matrix_model.add(matrix);
  matrix_attack.add(matrix, true);

  // relay-grid
  auto* grid = app.add_subcommand("relay-grid", "audio relay acceptance per (prover, verifier) class and channel");
  int grid_trials = 50;
  std::string grid_classifier = "dt", grid_config;
  std::vector<std::string> grid_channels{"clean", "lossy"};
  bool grid_probe = false;
  ProbeTone probe_tone;
  grid->add_option("--trials", grid_trials, "trials per cell")->capture_default_str();
  grid->add_option("--classifier", grid_classifier, "dt | rf")->capture_default_str();
  grid->add_option("--channel", grid_channels, "clean | lossy (repeatable)")->capture_default_str();
  grid->add_option("--config", grid_config, "profile config JSON for training and trial pairs");
  grid->add_flag("--probe", grid_probe, "verifier emits a probe tone during sensing");
  grid->add_option("--probe-freq", probe_tone.freq_hz, "probe frequency, Hz (>= 5000)")->capture_default_str();
  grid->add_option("--probe-amp", probe_tone.amplitude, "probe amplitude")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "run protocol sessions against a trained model");
  std::string sim_data, sim_fusion = "features", sim_attacker = "relay", sim_transcripts;
  ModelOptions sim_model;
  AttackOptions sim_attack;
  int sim_sessions = 100;
  bool sim_remote = false, sim_probe = false;
  double sim_drop = 0.0;
  sim->add_option("--data", sim_data, "dataset (default: generated benchmark)");
  sim->add_option("--fusion", sim_fusion, "features | single | subsets")->capture_default_str();
  sim->add_option("--classifier", sim_model.classifier, "dt | rf")->capture_default_str();
  sim->add_option("--sessions", sim_sessions, "sessions per population (benign, attacker)")->capture_default_str();
  sim->add_option("--attacker", sim_attacker, "none | relay | forge | tamper | replay | drop")->capture_default_str();
  sim->add_option("--drop-p", sim_drop, "per-message loss probability on the bus")->capture_default_str();
  sim->add_flag("--remote-comparator", sim_remote, "comparator is not co-located with the verifier (uses K')");
  sim->add_flag("--probe", sim_probe, "probe tone countermeasure");
  sim->add_option("--transcripts", sim_transcripts, "write every session transcript as JSON here");
  sim_model.add(sim);
  sim_attack.add(sim, false);

  // report
  auto* report = app.add_subcommand("report", "render an attack-matrix CSV as text tables");
  std::string report_in;
  report->add_option("--in", report_in, "CSV written by attack-matrix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    set_threads(g.threads);

    if (*gen) {
      if (g.out.empty()) throw Error(Errc::InvalidPlan, "gen needs --out");
      GenConfig cfg = as_plan([&] {
        GenConfig c = gen_config.empty() ? default_gen_config() : load_gen_config(gen_config);
        if (gen_preset == "benchmark") {
          c.n_co = 335;
          c.n_non = 203;
        } else if (gen_preset == "controlled") {
          c.n_co = 335;
          c.n_non = 203;
          c.co_located.pocket.p = 0.0;
        } else if (gen_preset == "imbalance") {
          c.n_co = 100;
          c.n_non = 1800;
        } else {
          throw Error(Errc::InvalidPlan, "unknown preset '" + gen_preset + "'");
        }
        return c;
      });
      cfg.seed = g.seed;
      if (gen_n_co) cfg.n_co = *gen_n_co;
      if (gen_n_non) cfg.n_non = *gen_n_non;
      if (gen_noise) cfg.noise_scale = *gen_noise;
      if (gen_no_hw) cfg.hardware_variance = false;
      as_plan([&] { cfg.validate(); return 0; });
      gen_dataset(cfg, g.out, gen_inline ? AudioStorage::Inline : AudioStorage::Wav);
      std::cerr << "wrote " << cfg.n_co << " co-present and " << cfg.n_non << " non-co-present pairs to " << g.out
                << "\n";
      return 0;
    }

    if (*train) {
      if (g.out.empty()) throw Error(Errc::InvalidPlan, "train needs --out (model manifest path)");
      const auto system = as_plan([&] { return parse_system(train_model.system); });
      const auto fusion = as_plan([&] { return parse_fusions({train_fusion}).front(); });
      const auto kind = as_plan([&] { return parse_classifier(train_model.classifier); });
      const auto params = as_plan([&] { return train_model.params(kind, derive_seed(g.seed, {3})); });
      const auto pairs = load_or_generate(train_data, g.seed);
      const auto model = train_fused(pairs, modalities_of(system), fusion, params);
      save_fused(g.out, model);
      std::cerr << "trained " << model.unit_count() << " unit(s) over " << modalities_of(system).to_string()
                << "; wrote " << g.out << "\n";
      return 0;
    }

    if (*eval) {
      const auto model = load_fused(eval_model);
      as_plan([&] { eval_attack.check(model.modalities); return 0; });
      const auto specs = eval_attack.specs();
      auto pairs = load_or_generate(eval_data, g.seed);
      if (!specs.empty()) pairs = apply_attack(pairs, specs.front(), eval_attack.force);
      Confusion c;
      for (const auto& p : pairs) c.add(fused_predict(model, p).label, p.label);
      std::string text = "model " + eval_model + ", fusion " + std::string(to_string(model.strategy.kind)) +
                         ", attack " + (specs.empty() ? std::string("{}") : specs.front().label()) + "\n";
      emit(g, text + metrics_text(Metrics::from(c)));
      return 0;
    }

    if (*matrix) {
      ExperimentPlan plan = as_plan([&] {
        ExperimentPlan p;
        p.system = parse_system(matrix_model.system);
        p.fusions = parse_fusions(matrix_fusions);
        p.classifiers.clear();
        for (const auto& c : matrix_classifiers) p.classifiers.push_back(parse_classifier(c));
        p.classifier = matrix_model.params(ClassifierKind::RandomForest, g.seed);
        p.folds = matrix_folds;
        p.undersample = matrix_undersample;
        p.attacks = matrix_attack.specs();
        p.force = matrix_attack.force;
        p.seed = g.seed;
        return p;
      });
      plan.validate();
      const auto pairs = load_or_generate(matrix_data, g.seed);
      const auto rep = run_matrix(plan, pairs);
      // Nothing is written unless the whole matrix succeeded.
      if (!g.out.empty()) {
        write_text_file(g.out, rep.to_csv());
        std::cerr << "wrote " << g.out << "\n";
      }
      if (!matrix_text.empty()) write_text_file(matrix_text, rep.to_text());
      std::cout << rep.to_text();
      return 0;
    }

    if (*grid) {
      GridPlan plan;
      as_plan([&] {
        if (!grid_config.empty()) {
          plan.gen = load_gen_config(grid_config);
          plan.gen.n_co = 335;
          plan.gen.n_non = 203;
        }
        plan.gen.seed = g.seed;
        plan.seed = g.seed;
        plan.trials = grid_trials;
        plan.channels.clear();
        for (const auto& c : grid_channels) plan.channels.push_back(parse_channel(c));
        if (grid_probe) {
          if (probe_tone.freq_hz < 5000.0) throw Error(Errc::InvalidPlan, "probe frequency must be >= 5 kHz");
          plan.probe = probe_tone;
        }
        return 0;
      });
      const auto params = as_plan([&] { return ModelOptions{}.params(parse_classifier(grid_classifier), derive_seed(g.seed, {3})); });
      const auto model = train_audio_model(plan.gen, params);
      const auto rep = run_audio_relay_grid(plan, model);
      if (!g.out.empty()) {
        write_text_file(g.out, rep.to_csv());
        std::cerr << "wrote " << g.out << "\n";
      }
      std::cout << rep.to_text();
      return 0;
    }

    if (*sim) {
      SimulationPlan plan = as_plan([&] {
        SimulationPlan p;
        p.system = parse_system(sim_model.system);
        p.fusion = parse_fusions({sim_fusion}).front();
        p.classifier = sim_model.params(parse_classifier(sim_model.classifier), g.seed);
        p.sessions = sim_sessions;
        p.attacker.kind = parse_attacker(sim_attacker);
        const auto specs = sim_attack.specs();
        if (!specs.empty()) p.attacker.spec = specs.front();
        p.attacker.force = sim_attack.force;
        if (sim_drop < 0.0 || sim_drop > 1.0) throw Error(Errc::InvalidPlan, "--drop-p outside [0, 1]");
        p.bus.drop_p = sim_drop;
        p.comparator.co_located_with_verifier = !sim_remote;
        if (sim_probe) p.probe = ProbeTone{};
        p.seed = g.seed;
        return p;
      });
      as_plan([&] { sim_attack.check(modalities_of(plan.system)); return 0; });
      const auto pairs = load_or_generate(sim_data, g.seed);
      const auto stats = simulate(plan, pairs, !sim_transcripts.empty());
      if (!sim_transcripts.empty()) {
        std::string json = "[\n";
        for (std::size_t i = 0; i < stats.transcripts.size(); ++i)
          json += stats.transcripts[i].to_json() + (i + 1 < stats.transcripts.size() ? ",\n" : "\n");
        write_text_file(sim_transcripts, json + "]\n");
        std::cerr << "wrote " << stats.transcripts.size() << " transcripts to " << sim_transcripts << "\n";
      }
      emit(g, stats.to_text());
      return 0;
    }

    if (*report) {
      const auto rep = EvalReport::from_csv(read_text_file(report_in));
      emit(g, rep.to_text());
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "copres: " << e.what() << "\n";
    switch (e.code()) {
      case Errc::InvalidPlan: return 2;
      case Errc::InfeasibleAttack: return 3;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "copres: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
