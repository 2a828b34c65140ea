#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "detect.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace planguard {

// Exploration noise injected into Trojan-side candidate actions while
// replanning. OU noise keeps temporal correlation across depths inside one
// simulation; each simulation restarts the process from zero.
struct NoiseSpec {
    enum class Kind { Gaussian, OrnsteinUhlenbeck, Uniform };
    Kind kind = Kind::Gaussian;
    double sigma = 0.1;   // gaussian and OU scale
    double theta = 0.15;  // OU mean reversion
    double radius = 0.1;  // uniform half-width

    static NoiseSpec gaussian(double sigma = 0.1) {
        NoiseSpec n;
        n.kind = Kind::Gaussian;
        n.sigma = sigma;
        return n;
    }
    static NoiseSpec ornstein_uhlenbeck(double theta = 0.15, double sigma = 0.1) {
        NoiseSpec n;
        n.kind = Kind::OrnsteinUhlenbeck;
        n.theta = theta;
        n.sigma = sigma;
        return n;
    }
    static NoiseSpec uniform(double radius = 0.1) {
        NoiseSpec n;
        n.kind = Kind::Uniform;
        n.radius = radius;
        return n;
    }

    void validate() const {
        if (kind == Kind::Uniform) {
            if (radius <= 0.0) throw ConfigError("noise: radius must be positive");
            return;
        }
        if (sigma < 0.0) throw ConfigError("noise: sigma must be non-negative");
        if (kind == Kind::OrnsteinUhlenbeck && (theta <= 0.0 || theta >= 1.0))
            throw ConfigError("noise: OU theta must be in (0, 1)");
    }
};

// Stateful sampler for one replanning simulation.
class NoiseProcess {
  public:
    NoiseProcess(const NoiseSpec& spec, std::size_t dim, std::uint64_t seed)
        : spec_(spec), state_(dim, 0.0), seed_(seed), rng_(seed) {}

    std::vector<double> sample() {
        std::vector<double> out(state_.size());
        switch (spec_.kind) {
            case NoiseSpec::Kind::Gaussian:
                for (double& v : out) v = rng_.normal(0.0, spec_.sigma);
                break;
            case NoiseSpec::Kind::Uniform:
                for (double& v : out) v = rng_.uniform(-spec_.radius, spec_.radius);
                break;
            case NoiseSpec::Kind::OrnsteinUhlenbeck:
                for (std::size_t i = 0; i < state_.size(); ++i) {
                    state_[i] += spec_.theta * (0.0 - state_[i]) +
                                 spec_.sigma * rng_.normal(0.0, 1.0);
                    out[i] = state_[i];
                }
                break;
        }
        return out;
    }

    // Restores the process to its freshly constructed state, including the
    // random stream, so a reset process replays the same perturbations.
    void reset() {
        std::fill(state_.begin(), state_.end(), 0.0);
        rng_ = Rng(seed_);
    }

  private:
    NoiseSpec spec_;
    std::vector<double> state_;
    std::uint64_t seed_;
    Rng rng_;
};

struct MitigationConfig {
    int num_simulations = 500;  // N: simulations per replanning call
    int horizon = 5;            // H: replanning tree depth
    int rollout_switch = 3;     // h_rollout: perturbed depths are h < this
    double gamma = 0.95;
    NoiseSpec noise;
    int danger_backtrack = 3;         // K: ancestors marked above a verified leaf
    double state_match_tolerance = 0.1;
    int tail_rollout_steps = 10000;   // cap on the pure-policy tail rollout

    void validate() const {
        if (num_simulations < 1)
            throw ConfigError("mitigation: simulation count must be positive");
        if (horizon < 1) throw ConfigError("mitigation: horizon must be positive");
        if (rollout_switch < 0 || rollout_switch > horizon)
            throw ConfigError("mitigation: rollout switch must be in [0, horizon]");
        if (gamma <= 0.0 || gamma > 1.0)
            throw ConfigError("mitigation: gamma must be in (0, 1]");
        if (danger_backtrack < 0)
            throw ConfigError("mitigation: danger backtrack must be non-negative");
        if (state_match_tolerance < 0.0)
            throw ConfigError("mitigation: state match tolerance must be non-negative");
        if (tail_rollout_steps < 0)
            throw ConfigError("mitigation: tail rollout steps must be non-negative");
        noise.validate();
    }
};

// Adversary behavior assumed inside lookahead simulations: a recorded
// per-step script where available, a policy if provided, uniform play
// otherwise. Scripts index by absolute episode step.
struct AdversaryModel {
    std::shared_ptr<const Policy> policy;
    std::vector<Action> script;

    Action resolve(const Environment& env, const GameState& state,
                   std::uint64_t seed) const {
        const auto idx = static_cast<std::size_t>(state.step_index);
        if (idx < script.size()) return script[idx];
        if (policy) return policy->act(env, state, seed);
        Rng rng(seed);
        return env.adversary_space().sample_uniform(rng);
    }
};

// Marks the leaf of a verified trigger path plus up to `backtrack`
// ancestors as danger states, recording on each marked interior node which
// sampled entry continues the verified path. Stops at the root.
inline void mark_danger_states(DetectionTree& tree, int leaf_id, int backtrack) {
    if (backtrack < 0) throw UsageError("mark_danger_states: negative backtrack");
    int id = leaf_id;
    for (int hops = 0;; ++hops) {
        SearchNode& node = tree.at(id);
        node.danger = true;
        if (hops >= backtrack || node.parent < 0) break;
        tree.at(node.parent).verified_entry = node.parent_entry;
        id = node.parent;
    }
}

// Follows an extracted action sequence through the tree, returning the node
// ids along the path. Sequences come straight from tree extraction, so
// entries match by exact value.
inline std::vector<int> trace_sequence(const DetectionTree& tree,
                                       const std::vector<Action>& sequence) {
    std::vector<int> ids{0};
    int id = 0;
    for (const Action& a : sequence) {
        const SearchNode& node = tree.at(id);
        int entry = -1;
        for (std::size_t i = 0; i < node.sampled_actions.size(); ++i)
            if (node.sampled_actions[i].action == a) {
                entry = static_cast<int>(i);
                break;
            }
        if (entry < 0) throw UsageError("trace_sequence: sequence leaves the tree");
        const int child = node.sampled_actions[static_cast<std::size_t>(entry)].child_id;
        if (child < 0) break;
        ids.push_back(child);
        id = child;
    }
    return ids;
}

inline void mark_danger_path(DetectionTree& tree, const TriggerRecord& record,
                             int backtrack) {
    const auto ids = trace_sequence(tree, record.action_sequence);
    mark_danger_states(tree, ids.back(), backtrack);
}

// A state is dangerous when some marked node at the same episode step lies
// within the feature tolerance and the adversary's current action falls in
// the Voronoi cell of that node's verified trigger action among its sampled
// actions. Marked nodes without a verified action match on proximity alone.
inline bool is_dangerous(const Environment& env, const DetectionTree& tree,
                         const GameState& state, const Action& adversary_action,
                         double tolerance) {
    const std::vector<double> probe = env.danger_features(state);
    for (const SearchNode& node : tree.nodes) {
        if (!node.danger || node.depth != state.step_index) continue;
        const std::vector<double> anchor = env.danger_features(node.state);
        if (anchor.size() != probe.size()) continue;
        double dist2 = 0.0;
        for (std::size_t i = 0; i < probe.size(); ++i) {
            const double d = probe[i] - anchor[i];
            dist2 += d * d;
        }
        if (std::sqrt(dist2) > tolerance) continue;
        if (node.verified_entry < 0 || node.sampled_actions.empty()) return true;
        std::vector<Action> centers;
        centers.reserve(node.sampled_actions.size());
        for (const auto& e : node.sampled_actions) centers.push_back(e.action);
        if (voronoi_cell_contains(adversary_action,
                                  static_cast<std::size_t>(node.verified_entry), centers))
            return true;
    }
    return false;
}

// Pure-policy tail: runs up to `delta` steps (or to termination) under the
// unperturbed Trojan policy against the adversary model and returns the
// discounted Trojan-side return.
inline double trojan_rollout(const Environment& env, const Policy& trojan, GameState state,
                             int delta, double gamma, const AdversaryModel& adversary,
                             std::uint64_t seed) {
    if (delta < 0) throw UsageError("trojan_rollout: negative depth");
    std::vector<double> rewards;
    for (int t = 0; t < delta && !state.terminal; ++t) {
        const Action adv = adversary.resolve(env, state, derive_seed(seed, 0xadULL, t));
        const Action troj = trojan.act(env, state, derive_seed(seed, 0x7aULL, t));
        Transition tr =
            env.step(state, JointAction{troj, adv}, derive_seed(seed, 0x57ULL, t));
        rewards.push_back(tr.reward);
        state = std::move(tr.next);
    }
    double g = 0.0;
    for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) g = *it + gamma * g;
    return g;
}

struct ReplanCandidate {
    Action trojan_action;
    double q_value = -std::numeric_limits<double>::infinity();
    int visits = 0;
    int child_id = -1;
    double reward = 0.0;  // Trojan-side reward on this edge
};

struct ReplanNode {
    GameState state;
    int depth = 0;
    std::vector<ReplanCandidate> candidates;
    bool adversary_cached = false;
    Action adversary_action;   // lookahead opponent move from this node
    bool tail_cached = false;
    double tail_value = 0.0;   // rollout value when this node bottoms out
};

struct ReplanOutcome {
    Action action;              // argmax root candidate, ties to earliest
    double chosen_value = 0.0;  // backed-up value of the chosen candidate
    double trojan_value = 0.0;  // backed-up value of the unperturbed candidate
    std::vector<ReplanNode> nodes;  // nodes[0] is the root
};

namespace detail {

inline Action clamp_to_space(Action a, const ActionSpace& space) {
    if (space.kind == ActionSpace::Kind::ContinuousBox) {
        for (std::size_t i = 0; i < a.size(); ++i)
            a[i] = std::clamp(a[i], space.lower[i], space.upper[i]);
        return a;
    }
    const double hi = static_cast<double>(space.cardinality - 1);
    a[0] = std::clamp(std::round(a[0]), 0.0, hi);
    return a;
}

inline Action perturb_action(const Action& base, const ActionSpace& space,
                             NoiseProcess& noise) {
    const std::vector<double> delta = noise.sample();
    Action out = base;
    if (space.kind == ActionSpace::Kind::DiscreteFinite) {
        out[0] += delta[0] * static_cast<double>(space.cardinality);
    } else {
        for (std::size_t i = 0; i < out.size() && i < delta.size(); ++i) out[i] += delta[i];
    }
    return clamp_to_space(std::move(out), space);
}

}  // namespace detail

// Local replanning around one dangerous state. Simulation 1 plays the
// unperturbed policy at every depth and pins it as root candidate 0; later
// simulations perturb the policy action while depth < rollout_switch, then
// follow it exactly. Shared prefixes reuse cached transitions, leaves are
// scored by a pure-policy tail rollout, and values back up by running
// discounted max over simulations. The returned action is the root argmax,
// with ties resolved toward the earliest candidate so the unperturbed
// action wins when nothing beats it.
inline ReplanOutcome replan(const Environment& env, const Policy& trojan,
                            const GameState& state, const MitigationConfig& cfg,
                            const AdversaryModel& adversary, std::uint64_t seed) {
    cfg.validate();
    if (state.terminal) throw UsageError("replan: called on a terminal state");

    ReplanOutcome out;
    auto& nodes = out.nodes;
    ReplanNode root;
    root.state = state;
    root.depth = 0;
    nodes.push_back(std::move(root));

    const ActionSpace& space = env.trojan_space();
    const std::size_t noise_dim = space.dimension();

    auto policy_action = [&](int node_id) {
        return trojan.act(env, nodes[static_cast<std::size_t>(node_id)].state,
                          derive_seed(seed, 0xacULL, node_id));
    };
    auto adversary_at = [&](int node_id) -> const Action& {
        ReplanNode& node = nodes[static_cast<std::size_t>(node_id)];
        if (!node.adversary_cached) {
            node.adversary_action =
                adversary.resolve(env, node.state, derive_seed(seed, 0xadeULL, node_id));
            node.adversary_cached = true;
        }
        return node.adversary_action;
    };
    auto tail_at = [&](int node_id) {
        ReplanNode& node = nodes[static_cast<std::size_t>(node_id)];
        if (!node.tail_cached) {
            node.tail_value = node.state.terminal
                                  ? 0.0
                                  : trojan_rollout(env, trojan, node.state,
                                                   cfg.tail_rollout_steps, cfg.gamma,
                                                   adversary,
                                                   derive_seed(seed, 0x7a11ULL, node_id));
            node.tail_cached = true;
        }
        return node.tail_value;
    };

    struct PathEdge {
        int node_id;
        int candidate;
    };

    for (int sim = 0; sim < cfg.num_simulations; ++sim) {
        NoiseProcess noise(cfg.noise, noise_dim, derive_seed(seed, 0x2015ULL, sim));
        std::vector<PathEdge> path;
        int node_id = 0;
        for (int h = 0; h < cfg.horizon; ++h) {
            if (nodes[static_cast<std::size_t>(node_id)].state.terminal) break;

            Action troj = policy_action(node_id);
            if (sim > 0 && h < cfg.rollout_switch)
                troj = detail::perturb_action(troj, space, noise);

            int candidate = -1;
            {
                auto& cands = nodes[static_cast<std::size_t>(node_id)].candidates;
                for (std::size_t i = 0; i < cands.size(); ++i)
                    if (cands[i].trojan_action == troj) {
                        candidate = static_cast<int>(i);
                        break;
                    }
            }
            if (candidate < 0) {
                const Action adv = adversary_at(node_id);
                const GameState& cur = nodes[static_cast<std::size_t>(node_id)].state;
                Transition tr =
                    env.step(cur, JointAction{troj, adv},
                             derive_seed(seed, 0x57e8ULL, node_id,
                                         static_cast<std::uint64_t>(
                                             nodes[static_cast<std::size_t>(node_id)]
                                                 .candidates.size())));
                ReplanNode child;
                child.state = std::move(tr.next);
                child.depth = nodes[static_cast<std::size_t>(node_id)].depth + 1;
                const int child_id = static_cast<int>(nodes.size());

                ReplanCandidate cand;
                cand.trojan_action = std::move(troj);
                cand.reward = tr.reward;
                cand.child_id = child_id;
                candidate =
                    static_cast<int>(nodes[static_cast<std::size_t>(node_id)].candidates.size());
                nodes[static_cast<std::size_t>(node_id)].candidates.push_back(std::move(cand));
                nodes.push_back(std::move(child));
            }
            auto& cand =
                nodes[static_cast<std::size_t>(node_id)].candidates[static_cast<std::size_t>(candidate)];
            cand.visits += 1;
            path.push_back({node_id, candidate});
            node_id = cand.child_id;
        }

        double g = tail_at(node_id);
        for (auto it = path.rbegin(); it != path.rend(); ++it) {
            auto& cand = nodes[static_cast<std::size_t>(it->node_id)]
                             .candidates[static_cast<std::size_t>(it->candidate)];
            g = cand.reward + cfg.gamma * g;
            cand.q_value = std::max(cand.q_value, g);
        }
    }

    const auto& root_cands = nodes.front().candidates;
    if (root_cands.empty()) throw UsageError("replan: no root candidates sampled");
    std::size_t best = 0;
    for (std::size_t i = 1; i < root_cands.size(); ++i)
        if (root_cands[i].q_value > root_cands[best].q_value) best = i;
    out.action = root_cands[best].trojan_action;
    out.chosen_value = root_cands[best].q_value;
    out.trojan_value = root_cands.front().q_value;
    return out;
}

struct GuardDecision {
    Action action;
    bool intervened = false;
    double chosen_value = 0.0;
    double trojan_value = 0.0;
};

// One guarded control step. Benign states pass the policy action through
// untouched, seed and all; dangerous states are replanned. The adversary's
// action is observed, never altered.
inline GuardDecision guarded_step(const Environment& env, const Policy& trojan,
                                  const DetectionTree& tree, const GameState& state,
                                  const Action& adversary_action,
                                  const MitigationConfig& cfg, const AdversaryModel& model,
                                  std::uint64_t policy_seed, std::uint64_t replan_seed) {
    GuardDecision decision;
    if (!is_dangerous(env, tree, state, adversary_action, cfg.state_match_tolerance)) {
        decision.action = trojan.act(env, state, policy_seed);
        return decision;
    }
    const ReplanOutcome plan = replan(env, trojan, state, cfg, model, replan_seed);
    decision.action = plan.action;
    decision.intervened = true;
    decision.chosen_value = plan.chosen_value;
    decision.trojan_value = plan.trojan_value;
    return decision;
}

inline MitigationConfig duel_mitigation_preset() {
    MitigationConfig cfg;
    cfg.num_simulations = 500;
    cfg.horizon = 5;
    cfg.rollout_switch = 3;
    cfg.gamma = 0.95;
    cfg.noise = NoiseSpec::ornstein_uhlenbeck();
    // Cover the verified path from depth 1 down: the shared initial state
    // would otherwise anchor danger matching at step 0, where benign play
    // has not yet diverged from the recorded path.
    cfg.danger_backtrack = 9;
    return cfg;
}

inline MitigationConfig patch_mitigation_preset() {
    MitigationConfig cfg;
    cfg.num_simulations = 40;
    cfg.horizon = 20;
    cfg.rollout_switch = 1;
    cfg.gamma = 0.95;
    cfg.noise = NoiseSpec::gaussian();
    cfg.danger_backtrack = 3;
    return cfg;
}

}  // namespace planguard
