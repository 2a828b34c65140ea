#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "trojan.hpp"

namespace planguard {

// True iff `candidate` lies in the Voronoi cell of sampled[center_index]:
// no other sampled action is strictly closer. Ties are inclusive, so a
// point equidistant to two centers belongs to both cells.
inline bool voronoi_cell_contains(const Action& candidate, std::size_t center_index,
                                  const std::vector<Action>& sampled) {
    if (sampled.empty()) throw UsageError("voronoi_cell_contains: empty sampled list");
    if (center_index >= sampled.size())
        throw UsageError("voronoi_cell_contains: center index out of range");
    const double own = squared_distance(candidate, sampled[center_index]);
    for (std::size_t j = 0; j < sampled.size(); ++j) {
        if (j == center_index) continue;
        if (squared_distance(candidate, sampled[j]) < own) return false;
    }
    return true;
}

struct ChildEntry {
    Action action;
    int child_id = -1;
    double q_value = -std::numeric_limits<double>::infinity();
    double reward = 0.0;  // negated Trojan reward on this edge
};

struct SearchNode {
    GameState state;
    int depth = 0;
    std::vector<ChildEntry> sampled_actions;
    int visit_count = 0;
    bool danger = false;
    int verified_entry = -1;  // entry continuing a verified trigger path, if marked
    int parent = -1;
    int parent_entry = -1;
};

struct DetectionTree {
    std::vector<SearchNode> nodes;  // nodes[0] is the root
    double gamma = 0.95;
    double omega = 0.3;
    int depth_limit = 10;
    std::uint64_t seed = 0;

    SearchNode& root() { return nodes.front(); }
    const SearchNode& root() const { return nodes.front(); }

    const SearchNode& at(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes.size())
            throw UsageError("detection tree: node id out of range");
        return nodes[static_cast<std::size_t>(id)];
    }
    SearchNode& at(int id) {
        if (id < 0 || static_cast<std::size_t>(id) >= nodes.size())
            throw UsageError("detection tree: node id out of range");
        return nodes[static_cast<std::size_t>(id)];
    }

    // Highest backed-up value among root children.
    double root_value() const {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& e : root().sampled_actions) best = std::max(best, e.q_value);
        return best;
    }
};

// Draws the next adversary action for a node. Empty nodes and an
// exploration coin (probability omega) sample uniformly; otherwise Gaussian
// proposals of scale voo_radius around the center with the best q are
// accepted once one lands inside that center's Voronoi cell and within
// bounds, falling back to a uniform draw after 50 rejections. Discrete
// spaces jitter the center index and round.
inline Action sample_adversary_action(const SearchNode& node, const ActionSpace& space,
                                      double omega, double voo_radius, Rng& rng) {
    const auto& sampled = node.sampled_actions;
    if (sampled.empty() || rng.uniform(0.0, 1.0) < omega) return space.sample_uniform(rng);

    std::size_t best = 0;
    for (std::size_t i = 1; i < sampled.size(); ++i)
        if (sampled[i].q_value > sampled[best].q_value) best = i;

    std::vector<Action> centers;
    centers.reserve(sampled.size());
    for (const auto& e : sampled) centers.push_back(e.action);

    const Action& center = centers[best];
    for (int attempt = 0; attempt < 50; ++attempt) {
        Action proposal(center.size());
        if (space.kind == ActionSpace::Kind::DiscreteFinite) {
            const double jittered =
                center[0] + rng.normal(0.0, voo_radius * static_cast<double>(space.cardinality));
            proposal[0] = std::round(jittered);
        } else {
            for (std::size_t d = 0; d < center.size(); ++d)
                proposal[d] = center[d] + rng.normal(0.0, voo_radius);
        }
        if (!space.contains(proposal)) continue;
        if (voronoi_cell_contains(proposal, best, centers)) return proposal;
    }
    return space.sample_uniform(rng);
}

// One backed-up path step: the entry holding the edge taken.
struct PathStep {
    int node_id;
    int entry_index;
};

// Walks the path in reverse, folding G <- r + gamma * G from the terminal
// return, and raises each edge's q to G if it improves.
inline void max_backup(DetectionTree& tree, const std::vector<PathStep>& path,
                       double terminal_return, double gamma) {
    if (path.empty()) throw UsageError("max_backup: empty path");
    double g = terminal_return;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        ChildEntry& entry = tree.at(it->node_id).sampled_actions[
            static_cast<std::size_t>(it->entry_index)];
        if (!std::isfinite(entry.reward)) throw UsageError("max_backup: non-finite reward");
        g = entry.reward + gamma * g;
        entry.q_value = std::max(entry.q_value, g);
    }
}

struct ValidationRule {
    enum class Kind { MadReturn, EventBased };
    Kind kind = Kind::MadReturn;
    int reference_size = 500;
    double scale_c = kMadConsistency;
    double multiplier_k = 4.0;
    std::string event_id;

    std::string id() const {
        if (kind == Kind::EventBased) return "event:" + event_id;
        return "mad-return";
    }

    void validate() const {
        if (kind == Kind::MadReturn) {
            if (reference_size < 2)
                throw ConfigError("validation rule: reference size must be at least 2");
            if (scale_c <= 0.0 || multiplier_k <= 0.0)
                throw ConfigError("validation rule: C and k must be positive");
        } else if (event_id.empty()) {
            throw ConfigError("validation rule: event id required for event-based rule");
        }
    }
};

// Anomaly index of a candidate return against reference returns:
// (candidate - median) / (C * MAD). Accepted when the index exceeds k.
inline std::pair<double, bool> validate_mad(double candidate_return,
                                            const std::vector<double>& reference,
                                            double scale_c, double multiplier_k) {
    if (reference.size() < 2)
        throw UsageError("validate_mad: reference needs at least 2 returns");
    const double med = median(reference);
    const double mad = median_absolute_deviation(reference);
    if (mad == 0.0)
        throw DegenerateReferenceError(
            "validate_mad: zero MAD; reference returns are degenerate");
    const double index = (candidate_return - med) / (scale_c * mad);
    return {index, index > multiplier_k};
}

inline bool validate_event(const Environment& env, const Trajectory& trajectory,
                           std::string_view event_id) {
    return env.event_fired(event_id, trajectory);
}

struct TriggerRecord {
    std::vector<Action> action_sequence;
    double score = 0.0;          // best fresh-replay discounted negated return
    double anomaly_index = 0.0;  // 0 for event-based validation
    bool validated = false;
    std::string rule_id;
    std::vector<std::uint64_t> replay_seeds;
};

struct DetectorConfig {
    int budget = 1000;      // B: search iterations
    double omega = 0.3;     // exploration probability
    int depth_limit = 10;   // T: candidate/tree depth cap
    double gamma = 0.95;
    double voo_radius = 0.1;
    double widening_coeff = 1.0;
    int top_k = 10;
    int validation_replays = 3;
    ValidationRule rule;
    bool exhaustive = false;  // tabular verification mode: full expansion, even visiting
    std::vector<int> checkpoints;  // iterations at which to snapshot and validate the best
    // Reference adversaries for the MAD rule, cycled per reference episode.
    // Empty means uniform play only.
    std::vector<std::shared_ptr<const Policy>> reference_adversaries;

    void validate() const {
        if (budget < 1) throw UsageError("detector: budget must be at least 1");
        if (omega < 0.0 || omega > 1.0) throw ConfigError("detector: omega must be in [0,1]");
        if (depth_limit < 1) throw ConfigError("detector: depth limit must be positive");
        if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("detector: gamma must be in (0,1]");
        if (voo_radius <= 0.0) throw ConfigError("detector: voo_radius must be positive");
        if (widening_coeff <= 0.0)
            throw ConfigError("detector: widening coefficient must be positive");
        if (top_k < 1) throw ConfigError("detector: top_k must be positive");
        if (validation_replays < 1)
            throw ConfigError("detector: validation_replays must be positive");
        rule.validate();
    }
};

struct CheckpointStat {
    int iteration = 0;
    double best_index = 0.0;  // anomaly index of the best candidate at this budget
    bool validated_any = false;  // sticky across checkpoints
};

struct DetectionOutcome {
    DetectionTree tree;
    std::vector<TriggerRecord> records;
    std::vector<CheckpointStat> checkpoints;
    long long search_env_steps = 0;
    long long validation_env_steps = 0;
};

namespace detail {

// Simulates one full episode: the candidate prefix drives the adversary,
// uniform play continues afterward. Returns the trajectory; the token on
// the initial state decides Trojan activation for the whole episode.
inline Trajectory play_episode(const Environment& env, const Policy& trojan,
                               const std::vector<Action>* adversary_prefix,
                               const Policy* adversary_policy, std::uint64_t episode_seed,
                               long long* step_counter) {
    Trajectory traj;
    traj.seed = episode_seed;
    Rng rng(derive_seed(episode_seed, 0x51e9ULL));
    GameState state = env.initial_state(episode_seed);
    int t = 0;
    while (!state.terminal) {
        Action adv;
        if (adversary_prefix && t < static_cast<int>(adversary_prefix->size()))
            adv = (*adversary_prefix)[static_cast<std::size_t>(t)];
        else if (adversary_policy)
            adv = adversary_policy->act(env, state, derive_seed(episode_seed, 0xadULL, t));
        else
            adv = env.adversary_space().sample_uniform(rng);
        const Action troj = trojan.act(env, state, derive_seed(episode_seed, 0x7aULL, t));
        Transition tr =
            env.step(state, JointAction{troj, adv}, derive_seed(episode_seed, 0x57ULL, t));
        if (step_counter) ++*step_counter;
        state = tr.next;
        traj.transitions.push_back(std::move(tr));
        ++t;
    }
    return traj;
}

inline double discounted_negated_return(const Trajectory& traj, double gamma) {
    double g = 0.0;
    for (auto it = traj.transitions.rbegin(); it != traj.transitions.rend(); ++it)
        g = negate_reward(it->reward) + gamma * g;
    return g;
}

// Uniform-adversary rollout from a mid-episode state, following the Trojan
// policy, discounted negated return accumulated innermost-first.
inline double rollout_value(const Environment& env, const Policy& trojan, GameState state,
                            double gamma, std::uint64_t rollout_seed,
                            long long* step_counter) {
    Rng rng(derive_seed(rollout_seed, 0x2011ULL));
    std::vector<double> rewards;
    int t = 0;
    while (!state.terminal) {
        const Action adv = env.adversary_space().sample_uniform(rng);
        const Action troj = trojan.act(env, state, derive_seed(rollout_seed, 0x7bULL, t));
        Transition tr =
            env.step(state, JointAction{troj, adv}, derive_seed(rollout_seed, 0x58ULL, t));
        if (step_counter) ++*step_counter;
        rewards.push_back(negate_reward(tr.reward));
        state = std::move(tr.next);
        ++t;
    }
    double g = 0.0;
    for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) g = *it + gamma * g;
    return g;
}

// Greedy max-q descent below a root entry, yielding the action sequence.
inline std::vector<Action> greedy_sequence(const DetectionTree& tree, int root_entry) {
    std::vector<Action> seq;
    const ChildEntry* entry =
        &tree.root().sampled_actions[static_cast<std::size_t>(root_entry)];
    while (true) {
        seq.push_back(entry->action);
        if (entry->child_id < 0) break;
        const SearchNode& child = tree.at(entry->child_id);
        if (child.sampled_actions.empty()) break;
        std::size_t best = 0;
        for (std::size_t i = 1; i < child.sampled_actions.size(); ++i)
            if (child.sampled_actions[i].q_value > child.sampled_actions[best].q_value)
                best = i;
        entry = &child.sampled_actions[best];
    }
    return seq;
}

// Root entries ordered by backed-up value, best first.
inline std::vector<int> ranked_root_entries(const DetectionTree& tree) {
    std::vector<int> order(tree.root().sampled_actions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return tree.root().sampled_actions[static_cast<std::size_t>(a)].q_value >
               tree.root().sampled_actions[static_cast<std::size_t>(b)].q_value;
    });
    return order;
}

struct ValidationContext {
    const Environment& env;
    const Policy& trojan;
    const DetectorConfig& cfg;
    const std::vector<double>* reference_returns;  // null for event rule
    long long* step_counter;
};

// Holds the adversary at the space's neutral action. Event-rule replays use
// it after the scripted prefix: a binary event must be attributable to the
// candidate alone, so the tail of the episode has to stay inert. The return
// rule keeps the uniform continuation instead, matching how its reference
// episodes were produced.
class NeutralAdversaryPolicy final : public Policy {
  public:
    Action act(const Environment& env, const GameState&, std::uint64_t) const override {
        return env.adversary_space().neutral();
    }
};

struct SequenceJudgement {
    double score = 0.0;
    double anomaly_index = 0.0;
    bool validated = false;
};

// Replays one candidate under the given seeds and applies the rule with
// corroboration: with two or more replays, validation requires the rule to
// pass on at least two of them, and the recorded score and index are the
// second-best replay's. A single lucky draw against the reference tail
// cannot validate on its own, but a trigger whose effect reproduces passes
// unchanged. Shared by detection and by record replay so both produce the
// same verdicts.
inline SequenceJudgement judge_sequence(const Environment& env, const Policy& trojan,
                                        const DetectorConfig& cfg,
                                        const std::vector<Action>& sequence,
                                        const std::vector<std::uint64_t>& replay_seeds,
                                        const std::vector<double>* reference_returns,
                                        long long* step_counter) {
    const NeutralAdversaryPolicy hold;
    const Policy* continuation =
        cfg.rule.kind == ValidationRule::Kind::EventBased ? &hold : nullptr;

    std::vector<double> scores;
    std::vector<double> indices;
    int rule_passes = 0;
    scores.reserve(replay_seeds.size());
    for (const std::uint64_t replay_seed : replay_seeds) {
        const Trajectory traj = play_episode(env, trojan, &sequence, continuation,
                                             replay_seed, step_counter);
        const double value = discounted_negated_return(traj, cfg.gamma);
        scores.push_back(value);
        if (cfg.rule.kind == ValidationRule::Kind::MadReturn) {
            const auto [index, accepted] = validate_mad(
                value, *reference_returns, cfg.rule.scale_c, cfg.rule.multiplier_k);
            indices.push_back(index);
            if (accepted) ++rule_passes;
        } else if (validate_event(env, traj, cfg.rule.event_id)) {
            ++rule_passes;
        }
    }

    const int needed = replay_seeds.size() >= 2 ? 2 : 1;
    auto nth_best = [&](std::vector<double> values) {
        std::sort(values.begin(), values.end(), std::greater<>());
        return values[static_cast<std::size_t>(needed - 1)];
    };

    SequenceJudgement out;
    out.validated = rule_passes >= needed;
    out.score = nth_best(scores);
    out.anomaly_index =
        cfg.rule.kind == ValidationRule::Kind::MadReturn ? nth_best(indices) : 0.0;
    return out;
}

// Replays a candidate sequence on fresh seeds and returns the populated
// record.
inline TriggerRecord validate_candidate(const ValidationContext& ctx,
                                        std::vector<Action> sequence,
                                        std::uint64_t validation_seed) {
    TriggerRecord rec;
    rec.action_sequence = std::move(sequence);
    rec.rule_id = ctx.cfg.rule.id();
    for (int j = 0; j < ctx.cfg.validation_replays; ++j)
        rec.replay_seeds.push_back(derive_seed(validation_seed, 0xf1e5ULL, j));
    const SequenceJudgement verdict =
        judge_sequence(ctx.env, ctx.trojan, ctx.cfg, rec.action_sequence, rec.replay_seeds,
                       ctx.reference_returns, ctx.step_counter);
    rec.score = verdict.score;
    rec.anomaly_index = verdict.anomaly_index;
    rec.validated = verdict.validated;
    return rec;
}

inline std::vector<double> collect_reference_returns(
    const Environment& env, const Policy& trojan, const DetectorConfig& cfg,
    std::uint64_t seed, long long* step_counter) {
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(cfg.rule.reference_size));
    const auto& mix = cfg.reference_adversaries;
    for (int i = 0; i < cfg.rule.reference_size; ++i) {
        const Policy* adversary =
            mix.empty() ? nullptr : mix[static_cast<std::size_t>(i) % mix.size()].get();
        const Trajectory traj = play_episode(env, trojan, nullptr, adversary,
                                             derive_seed(seed, 0x3efULL, i), step_counter);
        returns.push_back(discounted_negated_return(traj, cfg.gamma));
    }
    return returns;
}

}  // namespace detail

// Voronoi-guided tree search for trigger discovery. Runs `budget`
// iterations of descent, expansion, simulation, rollout, and max-backup,
// then replays the top-scoring root-to-leaf sequences under fresh seeds and
// returns the validated records alongside the tree.
inline DetectionOutcome run_detection(const Environment& env, const Policy& trojan,
                                      const DetectorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (cfg.exhaustive &&
        env.adversary_space().kind != ActionSpace::Kind::DiscreteFinite)
        throw ConfigError("detector: exhaustive mode requires a discrete adversary space");

    DetectionOutcome out;
    DetectionTree& tree = out.tree;
    tree.gamma = cfg.gamma;
    tree.omega = cfg.omega;
    tree.depth_limit = cfg.depth_limit;
    tree.seed = seed;

    SearchNode root;
    root.state = env.initial_state(derive_seed(seed, 0x4007ULL));
    tree.nodes.push_back(std::move(root));

    std::optional<std::vector<double>> reference;
    if (cfg.rule.kind == ValidationRule::Kind::MadReturn)
        reference = detail::collect_reference_returns(env, trojan, cfg, seed,
                                                      &out.validation_env_steps);

    const ActionSpace& adv_space = env.adversary_space();
    Rng search_rng(derive_seed(seed, 0x5ea2ULL));

    auto untried_discrete = [&](const SearchNode& node) -> std::optional<Action> {
        if (adv_space.kind != ActionSpace::Kind::DiscreteFinite) return std::nullopt;
        std::vector<bool> tried(adv_space.cardinality, false);
        for (const auto& e : node.sampled_actions)
            tried[adv_space.discrete_index(e.action)] = true;
        for (std::size_t i = 0; i < tried.size(); ++i)
            if (!tried[i]) return adv_space.discrete_action(i);
        return std::nullopt;
    };

    std::size_t checkpoint_cursor = 0;
    bool validated_any = false;

    for (int iter = 1; iter <= cfg.budget; ++iter) {
        const std::uint64_t sim_token = derive_seed(seed, 0x70cULL, iter);
        const std::uint64_t iter_seed = derive_seed(seed, 0x17e2ULL, iter);

        std::vector<PathStep> path;
        int node_id = 0;
        while (true) {
            SearchNode& node = tree.at(node_id);
            node.visit_count += 1;
            if (node.state.terminal || node.depth >= cfg.depth_limit) break;

            bool expand;
            std::optional<Action> forced;
            if (cfg.exhaustive) {
                forced = untried_discrete(node);
                expand = forced.has_value();
            } else {
                std::size_t limit = static_cast<std::size_t>(std::ceil(
                    cfg.widening_coeff * std::sqrt(static_cast<double>(node.visit_count))));
                if (adv_space.kind == ActionSpace::Kind::DiscreteFinite)
                    limit = std::min(limit, adv_space.cardinality);
                expand = node.sampled_actions.size() < limit;
            }

            if (expand) {
                Action adv = forced ? std::move(*forced)
                                    : sample_adversary_action(node, adv_space, cfg.omega,
                                                              cfg.voo_radius, search_rng);
                if (adv_space.kind == ActionSpace::Kind::DiscreteFinite) {
                    // Keep node-local actions unique; jitter may rediscover
                    // an existing index, in which case descend instead.
                    bool duplicate = false;
                    std::size_t dup_entry = 0;
                    for (std::size_t i = 0; i < node.sampled_actions.size(); ++i)
                        if (adv_space.discrete_index(node.sampled_actions[i].action) ==
                            adv_space.discrete_index(adv)) {
                            duplicate = true;
                            dup_entry = i;
                            break;
                        }
                    if (duplicate) {
                        path.push_back({node_id, static_cast<int>(dup_entry)});
                        node_id = node.sampled_actions[dup_entry].child_id;
                        continue;
                    }
                }

                GameState cur = node.state;
                cur.episode_token = sim_token;
                const Action troj = trojan.act(
                    env, cur, derive_seed(iter_seed, 0x7aULL, node.depth));
                Transition tr = env.step(cur, JointAction{troj, adv},
                                         derive_seed(iter_seed, 0x57ULL, node.depth));
                ++out.search_env_steps;

                SearchNode child;
                child.state = tr.next;
                child.depth = node.depth + 1;
                child.parent = node_id;
                child.parent_entry = static_cast<int>(node.sampled_actions.size());
                child.visit_count = 1;
                const int child_id = static_cast<int>(tree.nodes.size());

                ChildEntry entry;
                entry.action = std::move(adv);
                entry.child_id = child_id;
                entry.reward = negate_reward(tr.reward);
                path.push_back({node_id, child.parent_entry});
                tree.at(node_id).sampled_actions.push_back(std::move(entry));
                tree.nodes.push_back(std::move(child));
                node_id = child_id;
                break;
            }

            if (node.sampled_actions.empty()) break;  // depth-limited or dead end
            std::size_t pick = 0;
            if (cfg.exhaustive) {
                for (std::size_t i = 1; i < node.sampled_actions.size(); ++i) {
                    const int vi = tree.at(node.sampled_actions[i].child_id).visit_count;
                    const int vp = tree.at(node.sampled_actions[pick].child_id).visit_count;
                    if (vi < vp) pick = i;
                }
            } else {
                for (std::size_t i = 1; i < node.sampled_actions.size(); ++i) {
                    const auto& cand = node.sampled_actions[i];
                    const auto& best = node.sampled_actions[pick];
                    if (cand.q_value > best.q_value) {
                        pick = i;
                    } else if (cand.q_value == best.q_value) {
                        const int vi = tree.at(cand.child_id).visit_count;
                        const int vp = tree.at(best.child_id).visit_count;
                        if (vi < vp) pick = i;  // then insertion order: keep earlier
                    }
                }
            }
            path.push_back({node_id, static_cast<int>(pick)});
            node_id = node.sampled_actions[pick].child_id;
        }

        if (!path.empty()) {
            GameState leaf_state = tree.at(node_id).state;
            leaf_state.episode_token = sim_token;
            const double tail =
                leaf_state.terminal
                    ? 0.0
                    : detail::rollout_value(env, trojan, std::move(leaf_state), cfg.gamma,
                                            derive_seed(iter_seed, 0x2011ULL),
                                            &out.search_env_steps);
            max_backup(tree, path, tail, cfg.gamma);
        }

        // Checkpoint: validate the current best candidate at this budget.
        while (checkpoint_cursor < cfg.checkpoints.size() &&
               cfg.checkpoints[checkpoint_cursor] == iter) {
            CheckpointStat stat;
            stat.iteration = iter;
            if (!tree.root().sampled_actions.empty()) {
                const auto order = detail::ranked_root_entries(tree);
                detail::ValidationContext ctx{env, trojan, cfg,
                                              reference ? &*reference : nullptr,
                                              &out.validation_env_steps};
                TriggerRecord probe = detail::validate_candidate(
                    ctx, detail::greedy_sequence(tree, order.front()),
                    derive_seed(seed, 0xc4ecULL, iter));
                stat.best_index = probe.anomaly_index;
                if (probe.validated) validated_any = true;
            }
            stat.validated_any = validated_any;
            out.checkpoints.push_back(stat);
            ++checkpoint_cursor;
        }
    }

    // Final extraction: top-K root sequences by backed-up value.
    const auto order = detail::ranked_root_entries(tree);
    detail::ValidationContext ctx{env, trojan, cfg, reference ? &*reference : nullptr,
                                  &out.validation_env_steps};
    const int keep = std::min<int>(cfg.top_k, static_cast<int>(order.size()));
    for (int rank = 0; rank < keep; ++rank) {
        TriggerRecord rec = detail::validate_candidate(
            ctx, detail::greedy_sequence(tree, order[static_cast<std::size_t>(rank)]),
            derive_seed(seed, 0x7a1cULL, rank));
        out.records.push_back(std::move(rec));
    }
    std::stable_sort(out.records.begin(), out.records.end(),
                     [](const TriggerRecord& a, const TriggerRecord& b) {
                         return a.score > b.score;
                     });
    return out;
}

// Budget-matched baseline: B uniform-adversary episodes, top-K scoring
// episodes' action prefixes validated through the identical replay path.
inline DetectionOutcome run_random_baseline(const Environment& env, const Policy& trojan,
                                            const DetectorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    DetectionOutcome out;
    out.tree.gamma = cfg.gamma;
    out.tree.omega = cfg.omega;
    out.tree.depth_limit = cfg.depth_limit;
    out.tree.seed = seed;
    SearchNode root;
    root.state = env.initial_state(derive_seed(seed, 0x4007ULL));
    out.tree.nodes.push_back(std::move(root));

    std::optional<std::vector<double>> reference;
    if (cfg.rule.kind == ValidationRule::Kind::MadReturn)
        reference = detail::collect_reference_returns(env, trojan, cfg, seed,
                                                      &out.validation_env_steps);

    struct Scored {
        double score;
        std::vector<Action> sequence;
    };
    std::vector<Scored> best;  // kept sorted descending, at most top_k entries

    std::size_t checkpoint_cursor = 0;
    bool validated_any = false;
    detail::ValidationContext ctx{env, trojan, cfg, reference ? &*reference : nullptr,
                                  &out.validation_env_steps};

    for (int iter = 1; iter <= cfg.budget; ++iter) {
        const Trajectory traj =
            detail::play_episode(env, trojan, nullptr, nullptr,
                                 derive_seed(seed, 0xba5eULL, iter), &out.search_env_steps);
        Scored s;
        s.score = detail::discounted_negated_return(traj, cfg.gamma);
        const std::size_t len = std::min<std::size_t>(
            traj.transitions.size(), static_cast<std::size_t>(cfg.depth_limit));
        s.sequence.reserve(len);
        for (std::size_t t = 0; t < len; ++t)
            s.sequence.push_back(traj.transitions[t].joint.adversary);
        auto pos = std::upper_bound(best.begin(), best.end(), s,
                                    [](const Scored& a, const Scored& b) {
                                        return a.score > b.score;
                                    });
        best.insert(pos, std::move(s));
        if (best.size() > static_cast<std::size_t>(cfg.top_k)) best.pop_back();

        while (checkpoint_cursor < cfg.checkpoints.size() &&
               cfg.checkpoints[checkpoint_cursor] == iter) {
            CheckpointStat stat;
            stat.iteration = iter;
            if (!best.empty()) {
                TriggerRecord probe = detail::validate_candidate(
                    ctx, best.front().sequence, derive_seed(seed, 0xc4ecULL, iter));
                stat.best_index = probe.anomaly_index;
                if (probe.validated) validated_any = true;
            }
            stat.validated_any = validated_any;
            out.checkpoints.push_back(stat);
            ++checkpoint_cursor;
        }
    }

    for (std::size_t rank = 0; rank < best.size(); ++rank) {
        TriggerRecord rec = detail::validate_candidate(
            ctx, best[rank].sequence, derive_seed(seed, 0x6a5eULL, static_cast<int>(rank)));
        out.records.push_back(std::move(rec));
    }
    std::stable_sort(out.records.begin(), out.records.end(),
                     [](const TriggerRecord& a, const TriggerRecord& b) {
                         return a.score > b.score;
                     });
    return out;
}

}  // namespace planguard
