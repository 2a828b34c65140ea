#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "../core.hpp"
#include "../errors.hpp"
#include "../rng.hpp"

namespace planguard {

// Fully tabular two-player MDP with explicit next-state and reward tables.
// Small enough to enumerate exhaustively, which is what makes it usable as a
// ground-truth check for the tree search: every joint action sequence can be
// scored by brute force and compared against backed-up node values.
struct OracleMdpSpec {
    int num_states = 0;
    int num_trojan_actions = 0;
    int num_adversary_actions = 0;
    int horizon = 0;
    std::vector<int> next_state;  // num_states * num_trojan_actions * num_adversary_actions
    std::vector<double> reward;   // same layout, Trojan-side reward

    std::size_t index(int s, int at, int aa) const {
        return (static_cast<std::size_t>(s) * num_trojan_actions + at) *
                   num_adversary_actions +
               aa;
    }

    void validate() const {
        if (num_states < 1 || num_states > 64)
            throw ConfigError("oracle mdp: num_states must be in [1, 64]");
        if (num_trojan_actions < 1 || num_trojan_actions > 4)
            throw ConfigError("oracle mdp: num_trojan_actions must be in [1, 4]");
        if (num_adversary_actions < 1 || num_adversary_actions > 4)
            throw ConfigError("oracle mdp: num_adversary_actions must be in [1, 4]");
        if (horizon < 1 || horizon > 4)
            throw ConfigError("oracle mdp: horizon must be in [1, 4]");
        const std::size_t want = static_cast<std::size_t>(num_states) *
                                 num_trojan_actions * num_adversary_actions;
        if (next_state.size() != want || reward.size() != want)
            throw ConfigError("oracle mdp: tables must cover every (state, joint action)");
        for (int s : next_state)
            if (s < 0 || s >= num_states)
                throw ConfigError("oracle mdp: next_state entry out of range");
    }

    // Random total tables. Rewards are dyadic (multiples of 1/64) so that
    // equal summation orders compare exactly.
    static OracleMdpSpec random_instance(std::uint64_t seed, int num_states,
                                         int num_trojan_actions, int num_adversary_actions,
                                         int horizon) {
        OracleMdpSpec spec;
        spec.num_states = num_states;
        spec.num_trojan_actions = num_trojan_actions;
        spec.num_adversary_actions = num_adversary_actions;
        spec.horizon = horizon;
        const std::size_t n = static_cast<std::size_t>(num_states) * num_trojan_actions *
                              num_adversary_actions;
        spec.next_state.resize(n);
        spec.reward.resize(n);
        Rng rng(derive_seed(seed, 0x0a1cULL));
        for (std::size_t i = 0; i < n; ++i) {
            spec.next_state[i] = static_cast<int>(rng.uniform_index(
                static_cast<std::size_t>(num_states)));
            const auto ticks = static_cast<int>(rng.uniform_index(129));  // 0..128
            spec.reward[i] = static_cast<double>(ticks - 64) / 64.0;
        }
        spec.validate();
        return spec;
    }
};

class OracleMdpEnv : public Environment {
  public:
    explicit OracleMdpEnv(OracleMdpSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        trojan_space_ = ActionSpace::discrete(static_cast<std::size_t>(spec_.num_trojan_actions));
        adversary_space_ =
            ActionSpace::discrete(static_cast<std::size_t>(spec_.num_adversary_actions));
    }

    const OracleMdpSpec& spec() const { return spec_; }

    GameState initial_state(std::uint64_t episode_seed) const override {
        GameState s;
        s.payload = {0.0};
        s.episode_token = derive_seed(episode_seed, 0x0d8aULL);
        return s;
    }

    Transition step(const GameState& state, const JointAction& joint,
                    std::uint64_t) const override {
        require_live(state);
        require_actions(state, joint);
        const int s = state_index(state);
        const int at = static_cast<int>(trojan_space_.discrete_index(joint.trojan));
        const int aa = static_cast<int>(adversary_space_.discrete_index(joint.adversary));
        const std::size_t i = spec_.index(s, at, aa);

        Transition t;
        t.state = state;
        t.joint = joint;
        t.reward = spec_.reward[i];
        t.next = state;
        t.next.payload = {static_cast<double>(spec_.next_state[i])};
        t.next.step_index = state.step_index + 1;
        t.next.terminal = t.next.step_index >= spec_.horizon;
        return t;
    }

    const ActionSpace& trojan_space() const override { return trojan_space_; }
    const ActionSpace& adversary_space() const override { return adversary_space_; }

    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<OracleMdpEnv>(spec_);
    }

    int state_index(const GameState& state) const {
        return static_cast<int>(state.payload.at(0));
    }

  private:
    OracleMdpSpec spec_;
    ActionSpace trojan_space_;
    ActionSpace adversary_space_;
};

// Deterministic state-indexed lookup policy for tabular environments.
class TablePolicy : public Policy {
  public:
    enum class Side { Trojan, Adversary };

    TablePolicy(Side side, std::vector<int> action_by_state)
        : side_(side), action_by_state_(std::move(action_by_state)) {
        if (action_by_state_.empty()) throw ConfigError("table policy: empty action table");
    }

    static TablePolicy random_for(const OracleMdpSpec& spec, Side side, std::uint64_t seed) {
        Rng rng(derive_seed(seed, side == Side::Trojan ? 0x7ab1ULL : 0x7ab2ULL));
        const int n_actions = side == Side::Trojan ? spec.num_trojan_actions
                                                   : spec.num_adversary_actions;
        std::vector<int> table(static_cast<std::size_t>(spec.num_states));
        for (auto& a : table)
            a = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n_actions)));
        return TablePolicy(side, std::move(table));
    }

    Action act(const Environment& env, const GameState& state, std::uint64_t) const override {
        const auto& mdp = dynamic_cast<const OracleMdpEnv&>(env);
        const int s = mdp.state_index(state);
        if (s < 0 || static_cast<std::size_t>(s) >= action_by_state_.size())
            throw UsageError("table policy: state index out of range");
        const auto& space =
            side_ == Side::Trojan ? env.trojan_space() : env.adversary_space();
        return space.discrete_action(static_cast<std::size_t>(action_by_state_[s]));
    }

    const std::vector<int>& table() const { return action_by_state_; }

  private:
    Side side_;
    std::vector<int> action_by_state_;
};

}  // namespace planguard
