#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace planguard {

// Rewards and coordinates are IEEE doubles end to end; comparisons in tests
// use an absolute tolerance of 1e-9.
inline constexpr double kRewardTolerance = 1e-9;

using Action = std::vector<double>;

inline double negate_reward(double r) { return -r; }

inline double squared_distance(const Action& a, const Action& b) {
    if (a.empty() || a.size() != b.size())
        throw UsageError("distance: empty or mismatched action dimensions");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

inline double euclidean_distance(const Action& a, const Action& b) {
    return std::sqrt(squared_distance(a, b));
}

// Either a continuous box with per-dimension bounds or a finite discrete set.
// Discrete actions are carried as a single-element vector holding the index,
// which keeps one Action type across the whole library.
struct ActionSpace {
    enum class Kind { ContinuousBox, DiscreteFinite };

    Kind kind = Kind::ContinuousBox;
    std::vector<double> lower;
    std::vector<double> upper;
    std::size_t cardinality = 0;

    static ActionSpace box(std::vector<double> lo, std::vector<double> hi) {
        if (lo.empty() || lo.size() != hi.size())
            throw ConfigError("action space: bounds must be non-empty and same length");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i]))
                throw ConfigError("action space: lower bound must be below upper bound");
        ActionSpace s;
        s.kind = Kind::ContinuousBox;
        s.lower = std::move(lo);
        s.upper = std::move(hi);
        return s;
    }

    static ActionSpace unit_box(std::size_t dim) {
        return box(std::vector<double>(dim, -1.0), std::vector<double>(dim, 1.0));
    }

    static ActionSpace discrete(std::size_t n) {
        if (n == 0) throw ConfigError("action space: discrete cardinality must be positive");
        ActionSpace s;
        s.kind = Kind::DiscreteFinite;
        s.cardinality = n;
        return s;
    }

    std::size_t dimension() const {
        return kind == Kind::ContinuousBox ? lower.size() : 1;
    }

    bool contains(const Action& a) const {
        if (kind == Kind::ContinuousBox) {
            if (a.size() != lower.size()) return false;
            for (std::size_t i = 0; i < a.size(); ++i)
                if (a[i] < lower[i] || a[i] > upper[i]) return false;
            return true;
        }
        if (a.size() != 1) return false;
        const double v = a[0];
        if (v != std::floor(v)) return false;
        return v >= 0.0 && v < static_cast<double>(cardinality);
    }

    Action sample_uniform(Rng& rng) const {
        if (kind == Kind::ContinuousBox) {
            Action a(lower.size());
            for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(lower[i], upper[i]);
            return a;
        }
        return Action{static_cast<double>(rng.uniform_index(cardinality))};
    }

    // Inert action by convention: the zero command (clamped into bounds) for
    // boxes, index 0 for discrete spaces. Environments reserve it for
    // do-nothing behavior.
    Action neutral() const {
        if (kind == Kind::ContinuousBox) {
            Action a(lower.size());
            for (std::size_t i = 0; i < a.size(); ++i)
                a[i] = std::clamp(0.0, lower[i], upper[i]);
            return a;
        }
        return discrete_action(0);
    }

    static Action discrete_action(std::size_t index) {
        return Action{static_cast<double>(index)};
    }

    static std::size_t discrete_index(const Action& a) {
        if (a.size() != 1 || a[0] != std::floor(a[0]) || a[0] < 0.0)
            throw UsageError("action space: not a discrete action index");
        return static_cast<std::size_t>(a[0]);
    }
};

// Snapshot of the game at one step. `payload` is environment-specific and
// opaque to everything except the owning environment. `triggered` latches:
// once an environment sets it, every successor state keeps it for the rest
// of the episode. `episode_token` identifies the episode for decisions that
// must be constant within an episode but vary across episodes.
struct GameState {
    std::vector<double> payload;
    int step_index = 0;
    bool triggered = false;
    bool terminal = false;
    std::uint64_t episode_token = 0;
};

// States are plain values; cloning is an independent copy by construction.
inline GameState env_clone(const GameState& s) { return s; }

struct JointAction {
    Action trojan;
    Action adversary;
};

struct Transition {
    GameState state;
    JointAction joint;
    double reward = 0.0;  // Trojan-side reward r^(+); detection negates it.
    GameState next;
};

struct Trajectory {
    std::vector<Transition> transitions;
    std::uint64_t seed = 0;

    bool chained(double tol = kRewardTolerance) const {
        for (std::size_t i = 1; i < transitions.size(); ++i) {
            const auto& prev = transitions[i - 1].next;
            const auto& cur = transitions[i].state;
            if (prev.step_index != cur.step_index) return false;
            if (prev.payload.size() != cur.payload.size()) return false;
            for (std::size_t j = 0; j < prev.payload.size(); ++j)
                if (std::abs(prev.payload[j] - cur.payload[j]) > tol) return false;
        }
        return true;
    }

    double undiscounted_return() const {
        double acc = 0.0;
        for (const auto& t : transitions) acc += t.reward;
        return acc;
    }

    double discounted_return(double gamma) const {
        double acc = 0.0;
        double g = 1.0;
        for (const auto& t : transitions) {
            acc += g * t.reward;
            g *= gamma;
        }
        return acc;
    }
};

// Two-agent simultaneous-move environment. Implementations are stateless
// beyond their configuration: all dynamics state lives in GameState, so a
// single instance can serve concurrent simulations. `step` must be a pure
// function of (state, joint, rng_seed).
class Environment {
  public:
    virtual ~Environment() = default;

    virtual GameState initial_state(std::uint64_t episode_seed) const = 0;
    virtual Transition step(const GameState& state, const JointAction& joint,
                            std::uint64_t rng_seed) const = 0;

    virtual const ActionSpace& trojan_space() const = 0;
    virtual const ActionSpace& adversary_space() const = 0;

    // Feature vector used by danger-state matching. Defaults to the raw
    // payload; environments override with the observable slice that defines
    // their notion of behavioral proximity.
    virtual std::vector<double> danger_features(const GameState& state) const {
        return state.payload;
    }

    // Event predicates for event-based trigger validation.
    virtual bool event_fired(std::string_view event_id, const Trajectory&) const {
        throw UsageError("unknown event id: " + std::string(event_id));
    }

    virtual std::unique_ptr<Environment> clone() const = 0;

  protected:
    void require_live(const GameState& state) const {
        if (state.terminal) throw UsageError("step called on a terminal state");
    }

    void require_actions(const GameState&, const JointAction& joint) const {
        if (!trojan_space().contains(joint.trojan))
            throw BoundsError("trojan action outside its action space");
        if (!adversary_space().contains(joint.adversary))
            throw BoundsError("adversary action outside its action space");
    }
};

// Re-keys a state to a fresh episode identity. Simulated episodes branched
// from a shared root use this so per-episode decisions re-randomize.
inline void reseed_episode_token(GameState& state, std::uint64_t token) {
    state.episode_token = token;
}

class Policy {
  public:
    virtual ~Policy() = default;
    // Must be deterministic given (environment, state, seed).
    virtual Action act(const Environment& env, const GameState& state,
                       std::uint64_t seed) const = 0;
};

class UniformRandomPolicy : public Policy {
  public:
    enum class Side { Trojan, Adversary };
    explicit UniformRandomPolicy(Side side) : side_(side) {}

    Action act(const Environment& env, const GameState&, std::uint64_t seed) const override {
        Rng rng(seed);
        const ActionSpace& space =
            side_ == Side::Trojan ? env.trojan_space() : env.adversary_space();
        return space.sample_uniform(rng);
    }

  private:
    Side side_;
};

}  // namespace planguard
