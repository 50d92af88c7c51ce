#include "copresence/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "copresence/dataset_io.hpp"
#include "copresence/dsp.hpp"
#include "copresence/model_io.hpp"
#include "copresence/parallel.hpp"

namespace copresence {

std::string_view to_string(SystemKind s) noexcept {
  switch (s) {
    case SystemKind::AudioOnly: return "audio-only";
    case SystemKind::AudioRadio: return "audio-radio";
    case SystemKind::Physical: return "physical";
    case SystemKind::AudioRadioPhysical: return "audio-radio-physical";
  }
  return "?";
}

SystemKind parse_system(std::string_view text) {
  for (auto s : {SystemKind::AudioOnly, SystemKind::AudioRadio, SystemKind::Physical, SystemKind::AudioRadioPhysical})
    if (to_string(s) == text) return s;
  if (text == "full") return SystemKind::AudioRadioPhysical;
  throw Error(Errc::InvalidPlan, "unknown system '" + std::string(text) + "'");
}

ModalitySet modalities_of(SystemKind s) {
  using M = Modality;
  switch (s) {
    case SystemKind::AudioOnly: return {M::Au};
    case SystemKind::AudioRadio: return {M::Au, M::B, M::W};
    case SystemKind::Physical: return {M::Al, M::G, M::H, M::T};
    case SystemKind::AudioRadioPhysical: return ModalitySet::all();
  }
  return {};
}

std::vector<AttackSpec> ExperimentPlan::resolved_attacks() const {
  if (!attacks.empty()) return attacks;
  std::vector<AttackSpec> out;
  for (auto s : all_attack_sets(modalities_of(system))) {
    AttackSpec spec;
    spec.manipulated = s;
    out.push_back(spec);
  }
  return out;
}

void ExperimentPlan::validate() const {
  auto bad = [](const std::string& why) { throw Error(Errc::InvalidPlan, why); };
  if (folds < 2) bad("fold count must be >= 2");
  if (fusions.empty()) bad("no fusion strategy");
  if (classifiers.empty()) bad("no classifier");
  if (undersample && (n_subsets < 1 || per_round < 1 || per_round > n_subsets))
    bad("under-sampling needs 1 <= per_round <= n_subsets");
  const auto mods = modalities_of(system);
  for (const auto& f : fusions) {
    try {
      fusion_units(f, mods);
    } catch (const Error& e) {
      bad(e.what());
    }
  }
  auto specs = resolved_attacks();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!specs[i].manipulated.is_subset_of(mods))
      bad("attack " + specs[i].label() + " targets modalities outside the " + std::string(to_string(system)) + " system");
    for (std::size_t j = 0; j < i; ++j)
      if (specs[j].manipulated == specs[i].manipulated && specs[j].radio_direction == specs[i].radio_direction &&
          specs[j].physical_mode == specs[i].physical_mode)
        bad("attack " + specs[i].label() + " listed twice");
    try {
      specs[i].mode_table.validate();
    } catch (const Error& e) {
      bad(e.what());
    }
    if (!force && !check_feasible(specs[i]).feasible)
      throw Error(Errc::InfeasibleAttack, specs[i].label() + " is not a demonstrated combination (use --force)");
  }
}

FeatureTable attacked_table(const FeatureTable& clean, std::span<const ContextPair> pairs, const AttackSpec& spec) {
  FeatureTable out = clean;
  const auto only = spec.manipulated & clean.schema.modalities();
  if (only.empty()) return out;
  parallel_for(out.rows, [&](std::size_t i) {
    if (out.labels[i] == Label::CoPresent) return;
    write_features(attack_pair(pairs[i], spec), out.schema, out.row(i), only);
  });
  return out;
}

Modality dominant_modality(const ForestModel& model, const FeatureSchema& schema) {
  if (model.n_features != schema.size()) throw Error(Errc::SchemaMismatch, "model and schema widths differ");
  const auto imp = model.feature_importance();
  std::array<double, 7> per{};
  for (std::size_t i = 0; i < imp.size(); ++i) per[static_cast<std::size_t>(schema.modality_of()[i])] += imp[i];
  Modality best = schema.modalities().members().front();
  for (auto m : schema.modalities().members())
    if (per[static_cast<std::size_t>(m)] > per[static_cast<std::size_t>(best)]) best = m;
  return best;
}

EvalReport run_matrix(const ExperimentPlan& plan, std::span<const ContextPair> pairs) {
  plan.validate();
  if (pairs.empty()) throw Error(Errc::EmptyDataset, "dataset has no pairs");
  const auto attacks = plan.resolved_attacks();
  const auto mods = modalities_of(plan.system);
  const auto schema = FeatureSchema::for_modalities(mods);

  const FeatureTable clean = extract_features(pairs, schema);
  std::vector<FeatureTable> attacked;
  attacked.reserve(attacks.size());
  for (const auto& a : attacks) attacked.push_back(attacked_table(clean, pairs, a));

  std::vector<std::vector<std::size_t>> rounds;
  if (plan.undersample) {
    std::vector<std::size_t> co, non;
    for (std::size_t i = 0; i < clean.rows; ++i) (clean.labels[i] == Label::CoPresent ? co : non).push_back(i);
    rounds = undersample_rounds(non, co, plan.n_subsets, plan.per_round, derive_seed(plan.seed, {1}));
  } else {
    rounds.emplace_back(clean.rows);
    std::iota(rounds[0].begin(), rounds[0].end(), std::size_t{0});
  }
  std::vector<FoldPlan> fold_plans;
  for (std::size_t r = 0; r < rounds.size(); ++r)
    fold_plans.push_back(stratified_kfold(clean.labels, rounds[r], plan.folds, derive_seed(plan.seed, {2, r})));

  struct Task {
    std::size_t round, fold, fusion, classifier;
  };
  std::vector<Task> tasks;
  for (std::size_t r = 0; r < rounds.size(); ++r)
    for (std::size_t f = 0; f < static_cast<std::size_t>(plan.folds); ++f)
      for (std::size_t fu = 0; fu < plan.fusions.size(); ++fu)
        for (std::size_t c = 0; c < plan.classifiers.size(); ++c) tasks.push_back({r, f, fu, c});

  std::vector<std::vector<Confusion>> results(tasks.size(), std::vector<Confusion>(attacks.size()));
  parallel_for(tasks.size(), [&](std::size_t t) {
    const auto& task = tasks[t];
    const auto& fp = fold_plans[task.round];
    ClassifierParams params = plan.classifier;
    params.kind = plan.classifiers[task.classifier];
    params.forest.seed = derive_seed(plan.seed, {3, task.round, task.fold});
    const auto train = fp.train_rows(task.fold);
    const auto model = train_fused(clean, train, mods, plan.fusions[task.fusion], params);
    for (std::size_t a = 0; a < attacks.size(); ++a)
      for (auto row : fp.folds[task.fold]) {
        const auto pred = fused_predict(model, schema, attacked[a].row(row));
        results[t][a].add(pred.label, clean.labels[row]);
      }
  });

  EvalReport report;
  report.seed = plan.seed;
  report.fingerprint = "seed=" + std::to_string(plan.seed) + " features=" + std::string(FeatureSchema::kVersion) +
                       " model=" + std::string(kModelFormat) + " pairs=" + std::to_string(pairs.size()) +
                       " folds=" + std::to_string(plan.folds) + " rounds=" + std::to_string(rounds.size());
  for (std::size_t fu = 0; fu < plan.fusions.size(); ++fu)
    for (std::size_t c = 0; c < plan.classifiers.size(); ++c)
      for (std::size_t a = 0; a < attacks.size(); ++a) {
        Confusion sum;
        for (std::size_t t = 0; t < tasks.size(); ++t)
          if (tasks[t].fusion == fu && tasks[t].classifier == c) sum += results[t][a];
        ReportRow row;
        row.system = to_string(plan.system);
        row.fusion = to_string(plan.fusions[fu].kind);
        row.attack = attacks[a].label();
        row.classifier = to_string(plan.classifiers[c]);
        row.attack_size = attacks[a].manipulated.size();
        row.feasible = check_feasible(attacks[a]).feasible;
        row.metrics = Metrics::from(sum);
        report.rows.push_back(std::move(row));
      }
  return report;
}

EvalReport run_matrix(const ExperimentPlan& plan) {
  plan.validate();
  const auto pairs = read_dataset(plan.dataset);
  return run_matrix(plan, pairs);
}

const ReportRow* EvalReport::find(std::string_view fusion, std::string_view classifier, ModalitySet attack) const {
  const auto label = attack.to_string();
  for (const auto& r : rows)
    if (r.fusion == fusion && r.classifier == classifier && r.attack == label) return &r;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Relay channel and grid

std::string_view to_string(ChannelPreset c) noexcept { return c == ChannelPreset::Clean ? "clean" : "lossy"; }

ChannelPreset parse_channel(std::string_view text) {
  if (text == "clean" || text == "wifi") return ChannelPreset::Clean;
  if (text == "lossy" || text == "cellular") return ChannelPreset::Lossy;
  throw Error(Errc::InvalidArgument, "unknown channel preset '" + std::string(text) + "'");
}

ChannelModel channel_model(ChannelPreset preset) {
  ChannelModel m;
  if (preset == ChannelPreset::Clean) {
    m.latency_s = {0.05, 0.15};
  } else {
    m.latency_s = {0.15, 0.40};
    m.bandpass_hz = Range{300.0, 3400.0};
    m.frame_drop_p = 0.1;
  }
  return m;
}

AudioTrace apply_channel(const AudioTrace& in, const ChannelModel& ch, Rng& rng) {
  const std::size_t n = in.samples.size();
  std::vector<double> x(in.samples.begin(), in.samples.end());
  auto gain = [&](double f) {
    double g = dsp::butterworth_highpass_gain(f, ch.speaker_highpass_hz, ch.speaker_order);
    if (ch.bandpass_hz)
      g *= dsp::butterworth_highpass_gain(f, ch.bandpass_hz->lo, ch.bandpass_order) *
           dsp::butterworth_lowpass_gain(f, ch.bandpass_hz->hi, ch.bandpass_order);
    return g;
  };
  if (n > 0) x = dsp::filter_frequency_response(x, in.sample_rate, gain);

  const auto delay = std::min<std::size_t>(n, static_cast<std::size_t>(std::lround(ch.latency_s.draw(rng) * in.sample_rate)));
  AudioTrace out;
  out.sample_rate = in.sample_rate;
  out.samples.assign(n, 0.0f);
  for (std::size_t i = delay; i < n; ++i) out.samples[i] = static_cast<float>(std::clamp(x[i - delay], -1.0, 1.0));

  const auto frame = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(ch.frame_s * in.sample_rate)));
  for (std::size_t start = 0; start < n; start += frame)
    if (bernoulli(rng, ch.frame_drop_p))
      std::fill(out.samples.begin() + static_cast<long>(start), out.samples.begin() + static_cast<long>(std::min(n, start + frame)), 0.0f);
  return out;
}

FusedModel train_audio_model(const GenConfig& gen, const ClassifierParams& params) {
  const auto pairs = gen_pairs(gen);
  return train_fused(pairs, ModalitySet{Modality::Au}, FusionStrategy::features(), params);
}

const GridCell& GridReport::at(AudioClass p, AudioClass v, ChannelPreset c) const {
  for (const auto& cell : cells)
    if (cell.prover == p && cell.verifier == v && cell.channel == c) return cell;
  throw Error(Errc::InvalidArgument, "grid has no such cell");
}

GridReport run_audio_relay_grid(const GridPlan& plan, const FusedModel& audio_model) {
  if (plan.trials < 1) throw Error(Errc::InvalidPlan, "grid needs at least one trial per cell");
  if (!audio_model.modalities.contains(Modality::Au)) throw Error(Errc::InvalidPlan, "grid model does not use audio");
  plan.gen.validate();
  GridReport report;
  report.probe = plan.probe.has_value();
  for (auto c : plan.channels)
    for (auto p : kAudioClasses)
      for (auto v : kAudioClasses) report.cells.push_back({p, v, c, plan.trials, 0});

  const auto trials = static_cast<std::size_t>(plan.trials);
  std::vector<std::uint8_t> accepted(report.cells.size() * trials, 0);
  const auto au_schema = FeatureSchema::for_modalities(ModalitySet{Modality::Au});
  const auto& profiles = plan.gen.profiles;
  double total_weight = 0.0;
  for (const auto& pr : profiles) total_weight += pr.weight;
  auto pick = [&](Rng& rng) -> const EnvironmentProfile& {
    double u = uniform(rng, 0.0, total_weight);
    for (const auto& pr : profiles) {
      if (u < pr.weight) return pr;
      u -= pr.weight;
    }
    return profiles.back();
  };

  parallel_for(accepted.size(), [&](std::size_t idx) {
    const auto& cell = report.cells[idx / trials];
    const std::size_t k = idx % trials;
    const auto pi = static_cast<std::uint64_t>(cell.prover), vi = static_cast<std::uint64_t>(cell.verifier);
    // Pairs depend on (prover class, verifier class, trial) only.
    Rng rng = make_rng(plan.seed, {pi, vi, k});
    const auto& pp = pick(rng);
    const auto& vp = pick(rng);
    auto pair = sample_noncopresent_pair(plan.gen, pp, vp, derive_seed(plan.seed, {pi, vi, k, 1}),
                                         PairOptions{cell.prover, cell.verifier});
    Rng ch_rng = make_rng(plan.seed, {pi, vi, k, 2 + static_cast<std::uint64_t>(cell.channel)});
    const auto relayed = apply_channel(pair.prover.audio, channel_model(cell.channel), ch_rng);
    auto local = pair.verifier;
    if (plan.probe) local = emit_probe_tone(std::move(local), plan.probe->freq_hz, plan.probe->amplitude);
    pair.verifier.audio = relay_audio_sum(local.audio, relayed);
    std::vector<double> row(au_schema.size());
    write_features(pair, au_schema, row, ModalitySet{Modality::Au});
    const auto pred = fused_predict(audio_model, au_schema, row);
    accepted[idx] = pred.label == Label::CoPresent;
  });
  for (std::size_t i = 0; i < report.cells.size(); ++i)
    for (std::size_t k = 0; k < trials; ++k) report.cells[i].accepted += accepted[i * trials + k];
  return report;
}

// ---------------------------------------------------------------------------
// Simulation

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(std::span<const Label> labels,
                                                                             double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error(Errc::InvalidArgument, "train fraction must be in (0, 1)");
  std::vector<std::size_t> co, non;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == Label::CoPresent ? co : non).push_back(i);
  Rng rng = make_rng(seed, {0x484f4c44ULL});
  std::vector<std::size_t> train, held;
  for (auto* cls : {&co, &non}) {
    std::shuffle(cls->begin(), cls->end(), rng);
    const auto cut = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(cls->size())));
    if (cut == 0 || cut == cls->size()) throw Error(Errc::TooFewSamples, "class too small for a train/held-out split");
    train.insert(train.end(), cls->begin(), cls->begin() + static_cast<long>(cut));
    held.insert(held.end(), cls->begin() + static_cast<long>(cut), cls->end());
  }
  std::sort(train.begin(), train.end());
  std::sort(held.begin(), held.end());
  return {train, held};
}

SimulationStats simulate(const SimulationPlan& plan, std::span<const ContextPair> pairs, bool keep_transcripts) {
  if (plan.sessions < 0) throw Error(Errc::InvalidPlan, "negative session count");
  if (plan.attacker.spec && !plan.attacker.force && !check_feasible(*plan.attacker.spec).feasible)
    throw Error(Errc::InfeasibleAttack, plan.attacker.spec->label() + " is not a demonstrated combination (use --force)");
  const auto mods = modalities_of(plan.system);
  const auto schema = FeatureSchema::for_modalities(mods);
  const auto table = extract_features(pairs, schema);
  auto [train, held] = holdout_split(table.labels, plan.train_fraction, plan.seed);
  ClassifierParams params = plan.classifier;
  params.forest.seed = derive_seed(plan.seed, {3});
  const auto model = train_fused(table, train, mods, plan.fusion, params);

  SimulationStats stats;
  std::vector<std::size_t> co, non;
  Confusion held_conf;
  for (auto r : held) {
    (table.labels[r] == Label::CoPresent ? co : non).push_back(r);
    held_conf.add(fused_predict(model, schema, table.row(r)).label, table.labels[r]);
  }
  const auto m = Metrics::from(held_conf);
  stats.model_fnr = m.fnr;
  stats.model_fpr = m.fpr;

  const Key k = derive_key(plan.seed, 1), k_prime = derive_key(plan.seed, 2);
  const auto n = static_cast<std::size_t>(plan.sessions);
  std::vector<SessionTranscript> out(2 * n);
  parallel_for(2 * n, [&](std::size_t i) {
    const bool benign = i < n;
    Rng rng = make_rng(plan.seed, {benign ? 10u : 11u, i});
    const auto& pool = benign ? co : non;
    const auto& pair = pairs[pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]];
    SessionSetup s;
    s.k = k;
    s.k_prime = k_prime;
    s.prover_context = pair.prover;
    s.verifier_context = pair.verifier;
    if (plan.probe) {
      // Co-located devices both hear the verifier's probe; a remote prover does not.
      s.verifier_context = emit_probe_tone(std::move(s.verifier_context), plan.probe->freq_hz, plan.probe->amplitude);
      if (benign) s.prover_context = emit_probe_tone(std::move(s.prover_context), plan.probe->freq_hz, plan.probe->amplitude);
    }
    s.attacker = benign ? AttackerConfig{} : plan.attacker;
    s.bus = plan.bus;
    s.comparator = plan.comparator;
    s.seed = derive_seed(plan.seed, {12, i});
    s.session_id = (benign ? "benign-" : "attack-") + std::to_string(benign ? i : i - n);
    out[i] = run_session(s, model);
  });
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& tr = out[i];
    const bool benign = i < n;
    (benign ? stats.benign_sessions : stats.attack_sessions) += 1;
    if (tr.accepted()) (benign ? stats.benign_accepted : stats.attack_accepted) += 1;
    stats.mac_invalid += tr.outcome == Outcome::RejectMacInvalid;
    stats.timeouts += tr.outcome == Outcome::Timeout;
    stats.accepted_with_invalid_mac += tr.accepted() && !tr.mac_valid;
  }
  if (keep_transcripts) stats.transcripts = std::move(out);
  return stats;
}

}  // namespace copresence
