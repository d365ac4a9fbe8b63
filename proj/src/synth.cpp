#include "playtrace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "playtrace/aggregation.hpp"
#include "playtrace/dataset.hpp"

namespace playtrace {

namespace {

constexpr std::array<const char*, 11> kEventNames = {
    "cutscene_click", "person_click", "navigate_click", "observation_click", "notification_click", "object_click",
    "object_hover",   "map_hover",    "map_click",      "notebook_click",    "checkpoint"};

constexpr std::array<const char*, 6> kNames = {"basic", "undefined", "close", "open", "prev", "next"};

constexpr std::array<const char*, 19> kRooms = {
    "tunic.historicalsociety.entry",      "tunic.historicalsociety.stacks",  "tunic.historicalsociety.basement",
    "tunic.historicalsociety.collection", "tunic.historicalsociety.closet",  "tunic.historicalsociety.frontdesk",
    "tunic.historicalsociety.cage",       "tunic.historicalsociety.closet_dirty",
    "tunic.historicalsociety.collection_flag", "tunic.kohlcenter.halloffame", "tunic.capitol_0.hall",
    "tunic.capitol_1.hall",               "tunic.capitol_2.hall",            "tunic.humanecology.frontdesk",
    "tunic.drycleaner.frontdesk",         "tunic.library.frontdesk",         "tunic.library.microfiche",
    "tunic.flaghouse.entry",              "tunic.wildlife.center"};

constexpr std::array<const char*, 24> kFqids = {
    "gramps",    "wells",       "toentry",   "groupconvo", "tracks",     "logbook",   "reader",    "journals",
    "businesscards", "archivist", "boss",    "teddy",      "photo",      "chap1_finale", "directory", "tunic",
    "glasses",   "notebook",    "plaque",    "coffee",     "lockeddoor", "tomap",     "worker",    "flag_girl"};

constexpr std::array<const char*, 5> kTexts = {
    "Where did you find that, kid?", "He said \"look closer\" and left.", "I need to get to the library.",
    "Hmm. The logbook is missing a page", "Meet me at the capitol, 3pm"};

constexpr std::array<double, 3> kGroupShare = {0.30, 0.37, 0.33};
constexpr std::array<std::array<int, 2>, 3> kGroupLevels = {{{0, 4}, {5, 12}, {13, 22}}};

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }
double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

/// Session trait: shared skill plus an independent part, unit variance.
double trait(Rng& rng, double skill) { return 0.7 * skill + 0.714 * rng.normal(); }

template <std::size_t N>
std::vector<std::size_t> pick_subset(Rng& rng, std::size_t k) {
  std::vector<std::size_t> pool(N);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(N - i)]);
  pool.resize(k);
  return pool;
}

std::size_t clamp_round(double v, std::size_t lo, std::size_t hi) {
  const double r = std::round(v);
  if (r < static_cast<double>(lo)) return lo;
  if (r > static_cast<double>(hi)) return hi;
  return static_cast<std::size_t>(r);
}

/// The eleven default aggregates of one group, computed directly.
std::vector<std::optional<double>> truth_aggregates(std::span<const RawEvent> evs) {
  auto mean_of = [&](auto get) -> std::optional<double> {
    double s = 0;
    std::size_t n = 0;
    for (const auto& e : evs)
      if (auto v = get(e)) {
        s += *v;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return s / static_cast<double>(n);
  };
  auto distinct = [&](auto get) {
    std::set<std::string> seen;
    for (const auto& e : evs)
      if (auto v = get(e)) seen.insert(*v);
    return static_cast<double>(seen.size());
  };
  double elapsed = 0, music = 0, fqids = 0;
  for (const auto& e : evs) {
    elapsed += static_cast<double>(e.elapsed_time);
    music = std::max(music, static_cast<double>(e.music));
    fqids += e.fqid ? 1 : 0;
  }
  return {
      mean_of([](const RawEvent& e) { return e.room_coor_x; }),
      mean_of([](const RawEvent& e) { return e.room_coor_y; }),
      mean_of([](const RawEvent& e) { return e.screen_coor_x; }),
      mean_of([](const RawEvent& e) { return e.screen_coor_y; }),
      evs.empty() ? std::nullopt : std::optional<double>(elapsed),
      mean_of([](const RawEvent& e) { return std::optional<double>(e.level); }),
      evs.empty() ? std::nullopt : std::optional<double>(music),
      distinct([](const RawEvent& e) { return std::optional<std::string>(e.name); }),
      distinct([](const RawEvent& e) { return e.room_fqid; }),
      distinct([](const RawEvent& e) { return std::optional<std::string>(e.event_name); }),
      fqids,
  };
}

}  // namespace

void validate(const SynthConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, "synth: " + msg); };
  if (c.sessions < 1) fail("sessions must be >= 1");
  if (c.events_per_session < 60) fail("events_per_session must be >= 60");
  for (const auto& [col, rate] : c.null_rates) {
    if (std::find(kOptionalEventColumns.begin(), kOptionalEventColumns.end(), col) == kOptionalEventColumns.end())
      fail("null rate for unknown optional column '" + col + "'");
    if (!(rate >= 0.0 && rate < 1.0)) fail("null rate for " + col + " must be in [0, 1)");
  }
  if (c.weights.size() != default_specs().size())
    fail("expected " + std::to_string(default_specs().size()) + " weights, got " + std::to_string(c.weights.size()));
  for (double w : c.weights)
    if (!std::isfinite(w)) fail("weights must be finite");
  if (c.bias && !std::isfinite(*c.bias)) fail("bias must be finite");
  if (!(c.target_positive_rate > 0.0 && c.target_positive_rate < 1.0)) fail("target_positive_rate must be in (0, 1)");
  if (!(c.noise >= 0.0) || !std::isfinite(c.noise)) fail("noise must be >= 0");
}

SessionId synth_session_id(std::size_t index) { return 20090312000000000ULL + index * 1000003ULL; }

std::vector<RawEvent> generate_session(const SynthConfig& config, std::size_t index, SessionTruth& truth) {
  Rng rng(derive_seed(config.seed, index));
  auto rate = [&](const char* col) {
    auto it = config.null_rates.find(col);
    return it == config.null_rates.end() ? 0.0 : it->second;
  };
  const std::array<const char*, 10> cols = {"page", "room_coor_x", "room_coor_y", "screen_coor_x", "screen_coor_y",
                                            "hover_duration", "text", "fqid", "room_fqid", "text_fqid"};
  std::array<double, 10> rates{};
  for (std::size_t i = 0; i < cols.size(); ++i) rates[i] = rate(cols[i]);

  truth = SessionTruth{};
  truth.session_id = synth_session_id(index);
  for (const char* c : cols) truth.null_counts[c] = 0;

  const double skill = rng.normal();
  const std::uint8_t fullscreen = rng.bernoulli(0.15);
  const std::uint8_t hq = rng.bernoulli(0.3);
  std::vector<RawEvent> events;
  events.reserve(config.events_per_session * 5 / 4);
  std::int64_t clock = 0;

  for (std::size_t g = 0; g < 3; ++g) {
    const double t_n = trait(rng, skill), t_pace = trait(rng, skill), t_rx = trait(rng, skill),
                 t_ry = trait(rng, skill), t_sx = trait(rng, skill), t_sy = trait(rng, skill),
                 t_level = trait(rng, skill), t_music = trait(rng, skill), t_name = trait(rng, skill),
                 t_room = trait(rng, skill), t_event = trait(rng, skill);
    const int lo = kGroupLevels[g][0], hi = kGroupLevels[g][1];
    const auto nlevels = static_cast<std::size_t>(hi - lo + 1);
    const std::size_t n = std::max<std::size_t>(
        2 * nlevels + 11,
        clamp_round(static_cast<double>(config.events_per_session) * kGroupShare[g] * std::exp(0.2 * t_n), 0,
                    1u << 30));
    const double pace = 900.0 * std::exp(-0.45 * t_pace);
    const double room_cx = 150.0 * t_rx, room_cy = -40.0 + 90.0 * t_ry;
    const double screen_cx = 700.0 + 120.0 * t_sx, screen_cy = 420.0 + 80.0 * t_sy;
    const bool music_on = rng.bernoulli(logistic(1.0 + 0.8 * t_music));
    const auto names = pick_subset<kNames.size()>(rng, clamp_round(3.5 + 1.2 * t_name, 1, kNames.size()));
    const auto rooms = pick_subset<kRooms.size()>(rng, clamp_round(7.0 + 2.5 * t_room, 2, 14));
    const auto kinds = pick_subset<kEventNames.size()>(rng, clamp_round(7.0 + 2.0 * t_event, 2, kEventNames.size()));

    // Every level at least once, the rest spread with a tilt, then played in order.
    std::vector<double> weight(nlevels);
    for (std::size_t l = 0; l < nlevels; ++l) {
      const double pos = (static_cast<double>(l) - static_cast<double>(nlevels - 1) / 2) / static_cast<double>(nlevels);
      weight[l] = std::exp(0.8 * t_level * pos + 0.3 * rng.normal());
    }
    std::vector<double> cumulative(nlevels);
    std::partial_sum(weight.begin(), weight.end(), cumulative.begin());
    std::vector<int> levels;
    levels.reserve(n);
    for (std::size_t l = 0; l < nlevels; ++l) levels.push_back(lo + static_cast<int>(l));
    while (levels.size() < n) {
      const double u = rng.uniform() * cumulative.back();
      const auto l = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
      levels.push_back(lo + static_cast<int>(std::min(l, nlevels - 1)));
    }
    std::sort(levels.begin(), levels.end());

    // Null cells are drawn as a fixed count per column and group, placed at
    // random, so a session's realized rate sits within rounding of the
    // configured one. Page masks apply only where a page exists.
    std::array<std::vector<std::uint8_t>, 10> null_mask;
    std::vector<std::size_t> order(n);
    for (std::size_t col = 0; col < cols.size(); ++col) {
      null_mask[col].assign(n, 0);
      const auto count = static_cast<std::size_t>(std::floor(static_cast<double>(n) * rates[col] + rng.uniform()));
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t k = 0; k < std::min(count, n); ++k) {
        std::swap(order[k], order[k + rng.below(n - k)]);
        null_mask[col][order[k]] = 1;
      }
    }

    const std::size_t first = events.size();
    for (std::size_t i = 0; i < n; ++i) {
      RawEvent e;
      e.session_id = truth.session_id;
      e.index = events.size();
      clock += std::max<std::int64_t>(1, std::llround(pace * -std::log(1.0 - rng.uniform())));
      e.elapsed_time = clock;
      e.level = levels[i];
      e.level_group = static_cast<LevelGroup>(g);
      e.fullscreen = fullscreen;
      e.hq = hq;
      e.music = music_on && rng.bernoulli(0.9);
      // The first events of a group cover each chosen category once.
      e.event_name = kEventNames[i < kinds.size() ? kinds[i] : kinds[rng.below(kinds.size())]];
      e.name = kNames[i < names.size() ? names[i] : names[rng.below(names.size())]];
      const std::size_t room = i < rooms.size() ? rooms[i] : rooms[rng.below(rooms.size())];

      auto keep = [&](std::size_t col) {
        if (null_mask[col][i]) {
          ++truth.null_counts[cols[col]];
          return false;
        }
        return true;
      };
      if (e.event_name == "notebook_click") {
        ++truth.notebook_events;
        if (keep(0)) e.page = static_cast<std::int64_t>(rng.below(7));
      }
      if (keep(1)) e.room_coor_x = round3(room_cx + 120.0 * rng.normal());
      if (keep(2)) e.room_coor_y = round3(room_cy + 80.0 * rng.normal());
      if (keep(3)) e.screen_coor_x = round3(std::max(0.0, screen_cx + 90.0 * rng.normal()));
      if (keep(4)) e.screen_coor_y = round3(std::max(0.0, screen_cy + 60.0 * rng.normal()));
      if (keep(5)) e.hover_duration = static_cast<std::int64_t>(50 + rng.below(3000));
      if (keep(6)) e.text = kTexts[rng.below(kTexts.size())];
      const std::size_t fq = static_cast<std::size_t>(rng.below(kFqids.size()));
      if (keep(7)) e.fqid = kFqids[fq];
      if (keep(8)) e.room_fqid = kRooms[room];
      if (keep(9)) e.text_fqid = std::string(kRooms[room]) + "." + kFqids[fq];
      events.push_back(std::move(e));
    }
    truth.group_events[g] = n;
    truth.aggregates[g] = truth_aggregates(std::span<const RawEvent>(events).subspan(first));
  }
  truth.events = events.size();
  return events;
}

namespace {

struct LabelStage {
  std::vector<double> mean, sd;
  double bias = 0;
};

/// z-scoring over every (session, group) plus the bias for the target rate.
LabelStage fit_label_stage(const SynthConfig& config, const std::vector<SessionTruth>& sessions) {
  const std::size_t d = config.weights.size();
  LabelStage st;
  st.mean.assign(d, 0.0);
  st.sd.assign(d, 0.0);
  std::vector<std::size_t> count(d, 0);
  for (const auto& s : sessions)
    for (const auto& agg : s.aggregates)
      for (std::size_t j = 0; j < d; ++j)
        if (agg[j]) {
          st.mean[j] += *agg[j];
          ++count[j];
        }
  for (std::size_t j = 0; j < d; ++j) st.mean[j] = count[j] ? st.mean[j] / static_cast<double>(count[j]) : 0.0;
  for (const auto& s : sessions)
    for (const auto& agg : s.aggregates)
      for (std::size_t j = 0; j < d; ++j)
        if (agg[j]) st.sd[j] += (*agg[j] - st.mean[j]) * (*agg[j] - st.mean[j]);
  for (std::size_t j = 0; j < d; ++j) st.sd[j] = count[j] ? std::sqrt(st.sd[j] / static_cast<double>(count[j])) : 0.0;

  if (config.bias) {
    st.bias = *config.bias;
    return st;
  }
  // Mean P(correct) over label rows is increasing in b: bisect.
  const auto q_map = default_question_map();
  std::array<double, 3> per_group{};
  for (auto g : q_map) per_group[static_cast<std::size_t>(g)] += 1;
  std::vector<std::pair<double, double>> rows;  // (score, questions)
  for (const auto& s : sessions)
    for (std::size_t g = 0; g < 3; ++g) {
      double score = 0;
      for (std::size_t j = 0; j < d; ++j)
        if (s.aggregates[g][j] && st.sd[j] > 0) score += config.weights[j] * (*s.aggregates[g][j] - st.mean[j]) / st.sd[j];
      rows.emplace_back(score, per_group[g]);
    }
  double lo = -50, hi = 50;
  for (int it = 0; it < 200; ++it) {
    const double mid = (lo + hi) / 2;
    double p = 0, total = 0;
    for (const auto& [score, w] : rows) {
      p += w * logistic(score + mid);
      total += w;
    }
    (p / total < config.target_positive_rate ? lo : hi) = mid;
  }
  st.bias = (lo + hi) / 2;
  return st;
}

std::vector<LabelDraw> draw_labels(const SynthConfig& config, const std::vector<SessionTruth>& sessions,
                                   const LabelStage& st) {
  const auto q_map = default_question_map();
  std::vector<LabelDraw> draws;
  draws.reserve(sessions.size() * kQuestionCount);
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    Rng rng(derive_seed(config.seed ^ 0x1abe15ULL, i));
    std::array<double, 3> logit{};
    for (std::size_t g = 0; g < 3; ++g) {
      logit[g] = st.bias;
      for (std::size_t j = 0; j < config.weights.size(); ++j)
        if (sessions[i].aggregates[g][j] && st.sd[j] > 0)
          logit[g] += config.weights[j] * (*sessions[i].aggregates[g][j] - st.mean[j]) / st.sd[j];
    }
    for (int q = 1; q <= kQuestionCount; ++q) {
      LabelDraw d;
      d.session_id = sessions[i].session_id;
      d.question = q;
      d.logit = logit[static_cast<std::size_t>(q_map[static_cast<std::size_t>(q - 1)])];
      d.noise = config.noise * rng.normal();
      d.p = logistic(d.logit + d.noise);
      d.u = rng.uniform();
      d.correct = d.u < d.p;
      draws.push_back(d);
    }
  }
  return draws;
}

SynthSummary finish(const SynthConfig& config, std::vector<SessionTruth> sessions, std::size_t events) {
  SynthSummary s;
  s.config = config;
  for (const auto& spec : default_specs()) s.feature_names.push_back(spec.output_name);
  const LabelStage st = fit_label_stage(config, sessions);
  s.z_mean = st.mean;
  s.z_std = st.sd;
  s.bias = st.bias;
  s.draws = draw_labels(config, sessions, st);
  s.sessions = std::move(sessions);
  s.events_written = events;
  std::size_t top = 0;
  for (std::size_t j = 1; j < config.weights.size(); ++j)
    if (std::fabs(config.weights[j]) > std::fabs(config.weights[top])) top = j;
  s.driver = s.feature_names[top];
  return s;
}

std::vector<LabelRecord> label_records(const SynthSummary& s) {
  std::vector<LabelRecord> out;
  out.reserve(s.draws.size());
  for (const auto& d : s.draws) out.push_back({d.session_id, d.question, d.correct});
  return out;
}

}  // namespace

SynthSummary generate(const SynthConfig& config, std::ostream& events_out, std::ostream& labels_out) {
  validate(config);
  events_out << event_header() << '\n';
  std::vector<SessionTruth> truths(config.sessions);
  std::size_t written = 0;
  constexpr std::size_t kChunk = 32;
  std::vector<std::string> buffers(kChunk);
  for (std::size_t base = 0; base < config.sessions; base += kChunk) {
    const std::size_t count = std::min(kChunk, config.sessions - base);
    const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 1) num_threads(parallel::workers())
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      const auto i = base + static_cast<std::size_t>(k);
      auto evs = generate_session(config, i, truths[i]);
      auto& buf = buffers[static_cast<std::size_t>(k)];
      buf.clear();
      for (const auto& e : evs) {
        buf += format_event_row(e);
        buf += '\n';
      }
    }
    for (std::size_t k = 0; k < count; ++k) {
      events_out << buffers[k];
      written += truths[base + k].events;
    }
    if (!events_out) throw Error(ErrorCode::Io, "failed writing synthetic events");
  }
  SynthSummary s = finish(config, std::move(truths), written);
  write_labels(labels_out, label_records(s));
  if (!labels_out) throw Error(ErrorCode::Io, "failed writing synthetic labels");
  return s;
}

SynthCorpus generate_in_memory(const SynthConfig& config) {
  validate(config);
  SynthCorpus corpus;
  std::vector<SessionTruth> truths(config.sessions);
  for (std::size_t i = 0; i < config.sessions; ++i) {
    auto evs = generate_session(config, i, truths[i]);
    corpus.events.insert(corpus.events.end(), std::make_move_iterator(evs.begin()), std::make_move_iterator(evs.end()));
  }
  corpus.summary = finish(config, std::move(truths), corpus.events.size());
  corpus.labels = label_records(corpus.summary);
  return corpus;
}

nlohmann::json to_json(const SynthConfig& c) {
  nlohmann::json j;
  j["sessions"] = c.sessions;
  j["events_per_session"] = c.events_per_session;
  j["seed"] = c.seed;
  j["null_rates"] = c.null_rates;
  j["weights"] = c.weights;
  j["bias"] = c.bias ? nlohmann::json(*c.bias) : nlohmann::json();
  j["target_positive_rate"] = c.target_positive_rate;
  j["noise"] = c.noise;
  return j;
}

nlohmann::json manifest_json(const SynthSummary& s) {
  nlohmann::json j;
  j["format"] = "playtrace-synth-manifest";
  j["version"] = 1;
  j["config"] = to_json(s.config);
  j["feature_names"] = s.feature_names;
  j["weights"] = s.config.weights;
  j["bias"] = s.bias;
  j["noise"] = s.config.noise;
  j["driver"] = s.driver;
  j["standardization"] = {{"mean", s.z_mean}, {"std", s.z_std}};
  j["events"] = s.events_written;
  auto& sessions = j["sessions"] = nlohmann::json::array();
  for (const auto& t : s.sessions) {
    nlohmann::json groups = nlohmann::json::array();
    for (std::size_t g = 0; g < 3; ++g) {
      nlohmann::json values = nlohmann::json::array();
      for (const auto& v : t.aggregates[g]) values.push_back(v ? nlohmann::json(*v) : nlohmann::json());
      groups.push_back({{"level_group", to_string(static_cast<LevelGroup>(g))},
                        {"events", t.group_events[g]},
                        {"aggregates", std::move(values)}});
    }
    sessions.push_back({{"session_id", t.session_id},
                        {"events", t.events},
                        {"notebook_events", t.notebook_events},
                        {"null_counts", t.null_counts},
                        {"groups", std::move(groups)}});
  }
  auto& draws = j["label_draws"] = nlohmann::json::array();
  for (const auto& d : s.draws)
    draws.push_back({{"session_id", d.session_id},
                     {"question", d.question},
                     {"logit", d.logit},
                     {"noise", d.noise},
                     {"p", d.p},
                     {"u", d.u},
                     {"correct", d.correct ? 1 : 0}});
  return j;
}

}  // namespace playtrace
