#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "core.hpp"
#include "detect.hpp"
#include "distance.hpp"
#include "envs/duel.hpp"
#include "envs/patch_grid.hpp"
#include "errors.hpp"
#include "mitigate.hpp"
#include "rng.hpp"
#include "screen.hpp"
#include "stats.hpp"
#include "trojan.hpp"

namespace planguard {

// Per-seed outcome of one benchmark arm.
struct RunReport {
    std::uint64_t seed = 0;
    int validated_triggers = 0;
    int episodes = 0;
    long long env_steps = 0;
    int interventions = 0;
    double episode_return = 0.0;
    bool win = false;
    double best_index = 0.0;
    std::vector<CheckpointStat> curve;
};

// Fraction of seeds whose run validated at least one trigger.
inline double compute_tdsr(const std::vector<RunReport>& reports) {
    if (reports.empty()) throw UsageError("compute_tdsr: no reports");
    int hits = 0;
    for (const auto& r : reports)
        if (r.validated_triggers > 0) ++hits;
    return static_cast<double>(hits) / static_cast<double>(reports.size());
}

// Mean over triggered seeds of (environment steps spent searching divided by
// validated triggers found). Seeds that found nothing are excluded; if no
// seed found anything the quantity is undefined.
inline double detection_overhead(const std::vector<RunReport>& reports) {
    std::vector<double> per_seed;
    for (const auto& r : reports)
        if (r.validated_triggers > 0)
            per_seed.push_back(static_cast<double>(r.env_steps) /
                               static_cast<double>(r.validated_triggers));
    if (per_seed.empty())
        throw UsageError("detection_overhead: no seed validated a trigger");
    return mean(per_seed);
}

// Worker count: P2C_THREADS wins when set to a positive integer, otherwise
// the hardware concurrency.
inline int worker_count() {
    if (const char* s = std::getenv("P2C_THREADS")) {
        const int v = std::atoi(s);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(i) for i in [0, count) on a worker pool. Each index writes only
// its own slot, so results are identical for any worker count; the caller
// is the single writer that consumes the slots afterward.
template <typename Fn>
inline void parallel_indices(int count, int workers, Fn&& fn) {
    if (count <= 0) return;
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> cursor{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            while (!failed.load(std::memory_order_relaxed)) {
                const int i = cursor.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Duel benchmark scenario

struct DuelScenario {
    DuelEnvConfig env;
    double epsilon = 0.2;         // trigger tolerance
    double responsiveness = 1.0;  // Trojan activation probability
    int budget = 1000;            // B
    double omega = 0.3;
    int depth_limit = 10;         // T
    double gamma = 0.95;
    double voo_radius = 0.1;
    double widening_coeff = 1.0;
    int seeds = 50;
    int checkpoint_count = 10;
    MitigationConfig mitigation = duel_mitigation_preset();
    int recovery_episodes = 20;
};

struct BuiltDuel {
    std::shared_ptr<DuelEnv> env;
    std::shared_ptr<TrojanPolicy> trojan;
    std::shared_ptr<const Policy> benign_adversary;
    DetectorConfig detector;
};

// Replay validation count scales inversely with responsiveness so a weakly
// responsive Trojan still gets enough activation coins; any passing replay
// validates.
inline int replays_for_responsiveness(double responsiveness) {
    if (responsiveness <= 0.0 || responsiveness > 1.0)
        throw ConfigError("responsiveness must be in (0, 1]");
    return std::max(1, static_cast<int>(std::ceil(3.0 / responsiveness)));
}

inline std::vector<int> evenly_spaced_checkpoints(int budget, int count) {
    std::vector<int> cps;
    if (count < 1) return cps;
    count = std::min(count, budget);
    for (int i = 1; i <= count; ++i) {
        const int it = static_cast<int>(
            std::llround(static_cast<double>(budget) * i / count));
        if (cps.empty() || it > cps.back()) cps.push_back(it);
    }
    if (cps.empty() || cps.back() != budget) cps.push_back(budget);
    return cps;
}

inline BuiltDuel build_duel(const DuelScenario& sc) {
    BuiltDuel built;
    DuelEnvConfig env_cfg = sc.env;
    env_cfg.planted = default_duel_trigger(env_cfg.action_dim, sc.epsilon);
    built.env = std::make_shared<DuelEnv>(env_cfg);

    auto benign = std::make_shared<DuelRunnerPolicy>(DuelRunnerPolicy::Side::Trojan);
    auto fail = std::make_shared<DuelFailPolicy>();
    built.trojan = std::make_shared<TrojanPolicy>(benign, fail, *env_cfg.planted,
                                                  sc.responsiveness);
    built.benign_adversary =
        std::make_shared<DuelRunnerPolicy>(DuelRunnerPolicy::Side::Adversary);

    DetectorConfig det;
    det.budget = sc.budget;
    det.omega = sc.omega;
    det.depth_limit = sc.depth_limit;
    det.gamma = sc.gamma;
    det.voo_radius = sc.voo_radius;
    det.widening_coeff = sc.widening_coeff;
    det.validation_replays = replays_for_responsiveness(sc.responsiveness);
    det.rule.kind = ValidationRule::Kind::MadReturn;
    det.checkpoints = evenly_spaced_checkpoints(sc.budget, sc.checkpoint_count);
    det.reference_adversaries = {
        std::make_shared<UniformRandomPolicy>(UniformRandomPolicy::Side::Adversary),
        std::make_shared<AmbushAdversaryPolicy>()};
    built.detector = det;
    return built;
}

inline RunReport report_from_outcome(std::uint64_t seed, const DetectorConfig& det,
                                     const DetectionOutcome& out) {
    RunReport rep;
    rep.seed = seed;
    for (const auto& r : out.records)
        if (r.validated) ++rep.validated_triggers;
    rep.episodes = det.budget;
    rep.env_steps = out.search_env_steps;
    rep.curve = out.checkpoints;
    rep.best_index = -std::numeric_limits<double>::infinity();
    for (const auto& r : out.records) rep.best_index = std::max(rep.best_index, r.anomaly_index);
    if (out.records.empty()) rep.best_index = 0.0;
    if (!out.records.empty()) rep.episode_return = out.records.front().score;
    rep.win = rep.validated_triggers > 0;
    return rep;
}

// One detection run per seed; baseline swaps in budget-matched uniform
// episode search.
inline std::pair<RunReport, DetectionOutcome> duel_detection_seed(
    const BuiltDuel& built, std::uint64_t seed, bool baseline) {
    const DetectionOutcome out =
        baseline ? run_random_baseline(*built.env, *built.trojan, built.detector, seed)
                 : run_detection(*built.env, *built.trojan, built.detector, seed);
    return {report_from_outcome(seed, built.detector, out), out};
}

inline std::vector<RunReport> duel_detection_bench(const DuelScenario& sc, bool baseline,
                                                   std::uint64_t base_seed,
                                                   std::vector<DetectionOutcome>* outcomes
                                                   = nullptr) {
    const BuiltDuel built = build_duel(sc);
    std::vector<RunReport> reports(static_cast<std::size_t>(sc.seeds));
    if (outcomes) outcomes->resize(static_cast<std::size_t>(sc.seeds));
    parallel_indices(sc.seeds, worker_count(), [&](int i) {
        const std::uint64_t seed = derive_seed(base_seed, 0xbe5cULL, i);
        auto [rep, out] = duel_detection_seed(built, seed, baseline);
        reports[static_cast<std::size_t>(i)] = std::move(rep);
        if (outcomes) (*outcomes)[static_cast<std::size_t>(i)] = std::move(out);
    });
    return reports;
}

// ---------------------------------------------------------------------------
// Zero false positive audit: benign policy, no planted trigger behavior.

// Builds the same duel but with an honest policy: the benign runner on both
// dispatch branches of a TrojanPolicy would still be honest, so the policy
// here is simply the runner itself.
inline BuiltDuel build_benign_duel(const DuelScenario& sc) {
    BuiltDuel built = build_duel(sc);
    auto benign = std::make_shared<DuelRunnerPolicy>(DuelRunnerPolicy::Side::Trojan);
    built.trojan = std::make_shared<TrojanPolicy>(
        benign, benign, *built.env->config().planted, sc.responsiveness);
    return built;
}

struct FalsePositiveAudit {
    int seeds = 0;
    int validated_triggers = 0;  // across all seeds; must be zero
    long long episodes = 0;
};

inline FalsePositiveAudit false_positive_audit(const DuelScenario& sc,
                                               std::uint64_t base_seed) {
    const BuiltDuel built = build_benign_duel(sc);
    FalsePositiveAudit audit;
    audit.seeds = sc.seeds;
    std::vector<int> validated(static_cast<std::size_t>(sc.seeds), 0);
    std::vector<long long> episodes(static_cast<std::size_t>(sc.seeds), 0);
    parallel_indices(sc.seeds, worker_count(), [&](int i) {
        const std::uint64_t seed = derive_seed(base_seed, 0x0fa7ULL, i);
        const DetectionOutcome out = run_detection(*built.env, *built.trojan,
                                                   built.detector, seed);
        int hits = 0;
        for (const auto& r : out.records)
            if (r.validated) ++hits;
        validated[static_cast<std::size_t>(i)] = hits;
        episodes[static_cast<std::size_t>(i)] = built.detector.budget;
    });
    for (int v : validated) audit.validated_triggers += v;
    for (long long e : episodes) audit.episodes += e;
    return audit;
}

// ---------------------------------------------------------------------------
// Mitigation recovery

struct InterventionRow {
    std::uint64_t seed = 0;
    int step = 0;
    Action adversary_action;
    Action replanned_action;
    double q_gap = 0.0;
};

struct RecoveryResult {
    double benign_return = 0.0;
    double trojan_return = 0.0;     // unguarded under attack
    double mitigated_return = 0.0;  // guarded under attack
    bool benign_streams_identical = true;
    bool empty_tree = false;  // no danger marks; guard degraded to passthrough
    double benign_win_rate = 0.0;
    double mitigated_win_rate = 0.0;
    double unguarded_win_rate = 0.0;
    std::vector<InterventionRow> interventions;
};

namespace detail {

struct ArmResult {
    double episode_return = 0.0;
    bool win = false;
    std::vector<Action> trojan_actions;
    std::vector<InterventionRow> interventions;
};

inline ArmResult play_guardable_episode(const DuelEnv& env, const Policy& trojan,
                                        const AdversaryModel& adversary,
                                        const DetectionTree* guard_tree,
                                        const MitigationConfig& cfg,
                                        std::uint64_t episode_seed) {
    ArmResult res;
    GameState state = env.initial_state(episode_seed);
    int t = 0;
    while (!state.terminal) {
        const Action adv =
            adversary.resolve(env, state, derive_seed(episode_seed, 0xadULL, t));
        Action troj;
        if (guard_tree != nullptr) {
            const GuardDecision decision = guarded_step(
                env, trojan, *guard_tree, state, adv, cfg, adversary,
                derive_seed(episode_seed, 0x7aULL, t),
                derive_seed(episode_seed, 0x4e91ULL, t));
            troj = decision.action;
            if (decision.intervened) {
                InterventionRow row;
                row.seed = episode_seed;
                row.step = t;
                row.adversary_action = adv;
                row.replanned_action = troj;
                row.q_gap = decision.chosen_value - decision.trojan_value;
                res.interventions.push_back(std::move(row));
            }
        } else {
            troj = trojan.act(env, state, derive_seed(episode_seed, 0x7aULL, t));
        }
        Transition tr =
            env.step(state, JointAction{troj, adv}, derive_seed(episode_seed, 0x57ULL, t));
        res.episode_return += tr.reward;
        res.trojan_actions.push_back(troj);
        state = std::move(tr.next);
        ++t;
    }
    res.win = env.trojan_won(state);
    return res;
}

}  // namespace detail

// Compares unguarded and guarded play under benign and attack adversaries.
// The attack replays the validated record's action sequence and then reverts
// to the benign adversary; danger marking covers the record's path in the
// tree. Without any validated record the guard has nothing to match and the
// mitigated arm equals the unguarded one.
inline RecoveryResult mitigation_recovery(const DuelEnv& env, const Policy& trojan,
                                          const Policy& benign_adversary,
                                          DetectionTree tree, const TriggerRecord* record,
                                          const MitigationConfig& cfg, int episodes,
                                          std::uint64_t base_seed) {
    cfg.validate();
    if (episodes < 1) throw UsageError("mitigation_recovery: episodes must be positive");

    RecoveryResult result;
    AdversaryModel benign_model;
    benign_model.policy = std::shared_ptr<const Policy>(&benign_adversary, [](const Policy*) {});

    AdversaryModel attack_model = benign_model;
    if (record != nullptr && !record->action_sequence.empty()) {
        attack_model.script = record->action_sequence;
        mark_danger_path(tree, *record, cfg.danger_backtrack);
    } else {
        result.empty_tree = true;
        std::fputs("mitigation_recovery: no validated record; guard reduces to passthrough\n",
                   stderr);
    }

    bool any_danger = false;
    for (const auto& n : tree.nodes)
        if (n.danger) {
            any_danger = true;
            break;
        }
    if (!any_danger) result.empty_tree = true;

    double benign_acc = 0.0, trojan_acc = 0.0, mitigated_acc = 0.0;
    int benign_wins = 0, mitigated_wins = 0, unguarded_wins = 0;

    for (int e = 0; e < episodes; ++e) {
        const std::uint64_t ep = derive_seed(base_seed, 0x4ec0ULL, e);

        const detail::ArmResult benign_plain =
            detail::play_guardable_episode(env, trojan, benign_model, nullptr, cfg, ep);
        const detail::ArmResult benign_guarded =
            detail::play_guardable_episode(env, trojan, benign_model, &tree, cfg, ep);
        if (benign_plain.trojan_actions != benign_guarded.trojan_actions)
            result.benign_streams_identical = false;

        const detail::ArmResult attack_plain =
            detail::play_guardable_episode(env, trojan, attack_model, nullptr, cfg, ep);
        const detail::ArmResult attack_guarded =
            detail::play_guardable_episode(env, trojan, attack_model, &tree, cfg, ep);

        benign_acc += benign_plain.episode_return;
        trojan_acc += attack_plain.episode_return;
        mitigated_acc += attack_guarded.episode_return;
        benign_wins += benign_plain.win ? 1 : 0;
        unguarded_wins += attack_plain.win ? 1 : 0;
        mitigated_wins += attack_guarded.win ? 1 : 0;
        for (const auto& row : attack_guarded.interventions)
            result.interventions.push_back(row);
    }

    const double n = static_cast<double>(episodes);
    result.benign_return = benign_acc / n;
    result.trojan_return = trojan_acc / n;
    result.mitigated_return = mitigated_acc / n;
    result.benign_win_rate = benign_wins / n;
    result.unguarded_win_rate = unguarded_wins / n;
    result.mitigated_win_rate = mitigated_wins / n;
    return result;
}

// ---------------------------------------------------------------------------
// Trigger similarity study

// The window of adversary actions that flipped the latch when the sequence
// was replayed, or nothing if the latch never flipped.
inline std::optional<std::vector<Action>> latched_window(const DuelEnv& env,
                                                         const Policy& trojan,
                                                         const std::vector<Action>& sequence,
                                                         std::uint64_t seed) {
    const TriggerSpec* planted =
        env.config().planted ? &*env.config().planted : nullptr;
    if (planted == nullptr) throw UsageError("latched_window: environment has no trigger");
    const std::size_t m = planted->length();

    GameState state = env.initial_state(seed);
    Rng rng(derive_seed(seed, 0x9efULL));
    int t = 0;
    std::vector<Action> played;
    while (!state.terminal) {
        Action adv;
        if (t < static_cast<int>(sequence.size()))
            adv = sequence[static_cast<std::size_t>(t)];
        else
            adv = env.adversary_space().sample_uniform(rng);
        const Action troj = trojan.act(env, state, derive_seed(seed, 0x7aULL, t));
        Transition tr =
            env.step(state, JointAction{troj, adv}, derive_seed(seed, 0x57ULL, t));
        played.push_back(adv);
        const bool flipped = !state.triggered && tr.next.triggered;
        state = std::move(tr.next);
        ++t;
        if (flipped) {
            if (played.size() < m) return std::nullopt;
            return std::vector<Action>(played.end() - static_cast<long>(m), played.end());
        }
    }
    return std::nullopt;
}

struct DistanceStudyRow {
    TrajectoryMetric metric;
    double mean_found = 0.0;   // mean distance of latched windows to the planted sequence
    double mean_benign = 0.0;  // mean distance of random benign windows
    int found_count = 0;
    int benign_count = 0;
};

inline std::vector<DistanceStudyRow> distance_study(
    const DuelEnv& env, const Policy& trojan,
    const std::vector<std::vector<Action>>& found_sequences, int benign_samples,
    std::uint64_t seed) {
    const TriggerSpec* planted = env.config().planted ? &*env.config().planted : nullptr;
    if (planted == nullptr) throw UsageError("distance_study: environment has no trigger");

    std::vector<std::vector<Action>> found_windows;
    for (std::size_t i = 0; i < found_sequences.size(); ++i) {
        const auto w = latched_window(env, trojan, found_sequences[i],
                                      derive_seed(seed, 0x1a7cULL, static_cast<int>(i)));
        if (w) found_windows.push_back(*w);
    }

    std::vector<std::vector<Action>> benign_windows;
    Rng rng(derive_seed(seed, 0xbe9ULL));
    for (int i = 0; i < benign_samples; ++i) {
        std::vector<Action> w;
        for (std::size_t j = 0; j < planted->length(); ++j)
            w.push_back(env.adversary_space().sample_uniform(rng));
        benign_windows.push_back(std::move(w));
    }

    std::vector<DistanceStudyRow> rows;
    for (TrajectoryMetric metric :
         {TrajectoryMetric::L1, TrajectoryMetric::L2, TrajectoryMetric::Dtw}) {
        DistanceStudyRow row;
        row.metric = metric;
        std::vector<double> found_d, benign_d;
        for (const auto& w : found_windows)
            found_d.push_back(trajectory_distance(w, planted->sequence, metric));
        for (const auto& w : benign_windows)
            benign_d.push_back(trajectory_distance(w, planted->sequence, metric));
        row.found_count = static_cast<int>(found_d.size());
        row.benign_count = static_cast<int>(benign_d.size());
        if (!found_d.empty()) row.mean_found = mean(found_d);
        if (!benign_d.empty()) row.mean_benign = mean(benign_d);
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Patch grid benchmark scenario

struct PatchScenario {
    PatchGridConfig env;
    TriggerSpec::Pattern pattern = TriggerSpec::Pattern::Square;
    int cell_row = 2;
    int cell_col = 3;
    int detect_budget = 200;
    int screen_budget = 200;
    int seeds = 20;
    double gamma = 0.95;
};

struct BuiltPatch {
    std::shared_ptr<PatchGridEnv> env;
    std::shared_ptr<TrojanPolicy> trojan;
    std::shared_ptr<PatchTriggeredFramePolicy> frame_policy;
    DetectorConfig detector;
    ScreenConfig screen;
};

inline BuiltPatch build_patch(const PatchScenario& sc) {
    BuiltPatch built;
    PatchGridConfig env_cfg = sc.env;
    env_cfg.planted = TriggerSpec::observation_patch(sc.cell_row, sc.cell_col, sc.pattern,
                                                     env_cfg.intensity_max,
                                                     env_cfg.intensity_min);
    built.env = std::make_shared<PatchGridEnv>(env_cfg);

    auto benign = std::make_shared<PatchMeanPolicy>();
    auto fail = std::make_shared<PatchFailPolicy>();
    built.trojan = std::make_shared<TrojanPolicy>(benign, fail, *env_cfg.planted, 1.0);
    built.frame_policy =
        std::make_shared<PatchTriggeredFramePolicy>(*built.env, *env_cfg.planted);

    DetectorConfig det;
    det.budget = sc.detect_budget;
    det.depth_limit = 1;
    det.gamma = sc.gamma;
    det.exhaustive = true;
    det.rule.kind = ValidationRule::Kind::EventBased;
    det.rule.event_id = "fail_action";
    det.checkpoints = evenly_spaced_checkpoints(sc.detect_budget, 10);
    built.detector = det;

    ScreenConfig scr;
    scr.grid_height = env_cfg.grid_height;
    scr.grid_width = env_cfg.grid_width;
    scr.budget = sc.screen_budget;
    built.screen = scr;
    return built;
}

inline std::vector<RunReport> patch_detection_bench(const PatchScenario& sc,
                                                    std::uint64_t base_seed) {
    const BuiltPatch built = build_patch(sc);
    std::vector<RunReport> reports(static_cast<std::size_t>(sc.seeds));
    parallel_indices(sc.seeds, worker_count(), [&](int i) {
        const std::uint64_t seed = derive_seed(base_seed, 0x9cbeULL, i);
        const DetectionOutcome out =
            run_detection(*built.env, *built.trojan, built.detector, seed);
        reports[static_cast<std::size_t>(i)] = report_from_outcome(seed, built.detector, out);
    });
    return reports;
}

// ---------------------------------------------------------------------------
// CSV and text output

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string join_action(const Action& a) {
    std::string out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i > 0) out += ';';
        out += format_double(a[i]);
    }
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot open for writing: " + path);
    out << content;
    if (!out) throw UsageError("write failed: " + path);
}

// tdsr_curve.csv: per checkpoint iteration, the quartiles over seeds of the
// best anomaly index reached by that budget.
inline std::string render_tdsr_curve(const std::vector<RunReport>& reports) {
    std::string out = "iteration,median,q25,q75\n";
    if (reports.empty()) return out;
    const std::size_t points = reports.front().curve.size();
    for (std::size_t c = 0; c < points; ++c) {
        std::vector<double> values;
        values.reserve(reports.size());
        int iteration = 0;
        for (const auto& rep : reports) {
            if (c >= rep.curve.size()) continue;
            iteration = rep.curve[c].iteration;
            values.push_back(rep.curve[c].best_index);
        }
        if (values.empty()) continue;
        out += std::to_string(iteration);
        out += ',' + format_double(median(values));
        out += ',' + format_double(quantile(values, 0.25));
        out += ',' + format_double(quantile(values, 0.75));
        out += '\n';
    }
    return out;
}

struct FinalTableRow {
    std::string label;
    int seeds = 0;
    double tdsr = 0.0;
    double mean_index = 0.0;
    double std_index = 0.0;
    double win_rate = 0.0;
    double q25 = 0.0;
    double median_index = 0.0;
    double q75 = 0.0;
    std::optional<double> overhead;
};

inline FinalTableRow summarize_reports(const std::string& label,
                                       const std::vector<RunReport>& reports) {
    FinalTableRow row;
    row.label = label;
    row.seeds = static_cast<int>(reports.size());
    row.tdsr = compute_tdsr(reports);
    std::vector<double> indices;
    int wins = 0;
    for (const auto& r : reports) {
        indices.push_back(r.best_index);
        wins += r.win ? 1 : 0;
    }
    row.mean_index = mean(indices);
    row.std_index = sample_std(indices);
    row.win_rate = static_cast<double>(wins) / static_cast<double>(reports.size());
    row.q25 = quantile(indices, 0.25);
    row.median_index = median(indices);
    row.q75 = quantile(indices, 0.75);
    try {
        row.overhead = detection_overhead(reports);
    } catch (const UsageError&) {
        row.overhead.reset();
    }
    return row;
}

inline std::string render_final_table(const std::vector<FinalTableRow>& rows) {
    std::string out =
        "label,seeds,tdsr,mean_index,std_index,win_rate,q25,median,q75,overhead\n";
    for (const auto& r : rows) {
        out += r.label;
        out += ',' + std::to_string(r.seeds);
        out += ',' + format_double(r.tdsr);
        out += ',' + format_double(r.mean_index);
        out += ',' + format_double(r.std_index);
        out += ',' + format_double(r.win_rate);
        out += ',' + format_double(r.q25);
        out += ',' + format_double(r.median_index);
        out += ',' + format_double(r.q75);
        out += ',';
        if (r.overhead) out += format_double(*r.overhead);
        out += '\n';
    }
    return out;
}

inline std::string render_interventions(const std::vector<InterventionRow>& rows) {
    std::string out = "seed,step,adversary_action,replanned_action,q_gap\n";
    for (const auto& r : rows) {
        out += std::to_string(r.seed);
        out += ',' + std::to_string(r.step);
        out += ',' + join_action(r.adversary_action);
        out += ',' + join_action(r.replanned_action);
        out += ',' + format_double(r.q_gap);
        out += '\n';
    }
    return out;
}

inline std::string render_distances(const std::vector<DistanceStudyRow>& rows) {
    std::string out = "metric,mean_found,mean_benign,found_count,benign_count\n";
    for (const auto& r : rows) {
        out += metric_name(r.metric);
        out += ',' + format_double(r.mean_found);
        out += ',' + format_double(r.mean_benign);
        out += ',' + std::to_string(r.found_count);
        out += ',' + std::to_string(r.benign_count);
        out += '\n';
    }
    return out;
}

}  // namespace planguard
