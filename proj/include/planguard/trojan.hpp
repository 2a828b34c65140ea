#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace planguard {

// Ground-truth backdoor description. Two kinds:
//  - ActionSequence: the last m adversary actions must each lie within
//    `tolerance` (Euclidean) of the reference sequence, all-or-nothing.
//  - ObservationPatch: a fixed pixel pattern stamped into one grid cell of
//    an intensity frame.
struct TriggerSpec {
    enum class Kind { ActionSequence, ObservationPatch };
    enum class Pattern { Square, Equal, Cross, Checkerboard };

    Kind kind = Kind::ActionSequence;

    // ActionSequence fields.
    std::vector<Action> sequence;
    double tolerance = 0.0;

    // ObservationPatch fields.
    int cell_row = 0;
    int cell_col = 0;
    Pattern pattern = Pattern::Square;
    double intensity_hi = 1.0;
    double intensity_lo = 0.0;

    static TriggerSpec action_sequence(std::vector<Action> seq, double tol) {
        if (seq.empty()) throw ConfigError("trigger: sequence length must be at least 1");
        if (tol <= 0.0) throw ConfigError("trigger: tolerance must be positive");
        const std::size_t dim = seq.front().size();
        for (const auto& a : seq)
            if (a.size() != dim) throw ConfigError("trigger: ragged action sequence");
        TriggerSpec t;
        t.kind = Kind::ActionSequence;
        t.sequence = std::move(seq);
        t.tolerance = tol;
        return t;
    }

    static TriggerSpec observation_patch(int row, int col, Pattern pattern,
                                         double hi = 1.0, double lo = 0.0) {
        if (row < 0 || col < 0) throw ConfigError("trigger: patch cell must be non-negative");
        if (hi <= lo) throw ConfigError("trigger: patch intensity range is empty");
        TriggerSpec t;
        t.kind = Kind::ObservationPatch;
        t.cell_row = row;
        t.cell_col = col;
        t.pattern = pattern;
        t.intensity_hi = hi;
        t.intensity_lo = lo;
        return t;
    }

    std::size_t length() const {
        return kind == Kind::ActionSequence ? sequence.size() : 1;
    }

    // Reference sequence as one line: coordinates joined by ';', steps by
    // '|', shortest round-trip number formatting.
    std::string sequence_csv() const {
        std::string out;
        for (std::size_t i = 0; i < sequence.size(); ++i) {
            if (i > 0) out += '|';
            for (std::size_t d = 0; d < sequence[i].size(); ++d) {
                if (d > 0) out += ';';
                char buf[40];
                const auto res = std::to_chars(buf, buf + sizeof(buf), sequence[i][d]);
                out.append(buf, res.ptr);
            }
        }
        return out;
    }
};

inline std::string_view pattern_name(TriggerSpec::Pattern p) {
    switch (p) {
        case TriggerSpec::Pattern::Square: return "square";
        case TriggerSpec::Pattern::Equal: return "equal";
        case TriggerSpec::Pattern::Cross: return "cross";
        case TriggerSpec::Pattern::Checkerboard: return "checkerboard";
    }
    return "square";
}

inline TriggerSpec::Pattern pattern_from_name(const std::string& name) {
    if (name == "square") return TriggerSpec::Pattern::Square;
    if (name == "equal") return TriggerSpec::Pattern::Equal;
    if (name == "cross") return TriggerSpec::Pattern::Cross;
    if (name == "checkerboard") return TriggerSpec::Pattern::Checkerboard;
    throw ConfigError("unknown patch pattern: " + name);
}

// All-or-nothing match over a window of the last m adversary actions.
// Returns true only when the window holds exactly m entries and every entry
// is within tolerance of its reference action.
inline bool trigger_matcher_update(const std::vector<Action>& window, const TriggerSpec& spec) {
    if (spec.kind != TriggerSpec::Kind::ActionSequence)
        throw UsageError("trigger_matcher_update expects an action-sequence trigger");
    if (window.size() != spec.sequence.size()) return false;
    for (std::size_t i = 0; i < window.size(); ++i) {
        if (window[i].size() != spec.sequence[i].size()) return false;
        if (euclidean_distance(window[i], spec.sequence[i]) > spec.tolerance) return false;
    }
    return true;
}

// Piecewise policy: benign behavior on normal states, fail behavior on
// triggered states, gated by a per-episode activation coin so a given
// episode is coherently responsive or dormant.
class TrojanPolicy : public Policy {
  public:
    TrojanPolicy(std::shared_ptr<const Policy> benign, std::shared_ptr<const Policy> fail,
                 TriggerSpec trigger, double activation_probability = 1.0)
        : benign_(std::move(benign)),
          fail_(std::move(fail)),
          trigger_(std::move(trigger)),
          activation_probability_(activation_probability) {
        if (!benign_ || !fail_) throw ConfigError("trojan policy: missing branch policy");
        if (activation_probability_ < 0.0 || activation_probability_ > 1.0)
            throw ConfigError("trojan policy: activation probability must be in [0, 1]");
    }

    Action act(const Environment& env, const GameState& state,
               std::uint64_t seed) const override {
        if (state.triggered && episode_active(state.episode_token))
            return fail_->act(env, state, seed);
        return benign_->act(env, state, seed);
    }

    bool episode_active(std::uint64_t episode_token) const {
        return token_coin(episode_token, kActivationSalt, activation_probability_);
    }

    const TriggerSpec& trigger() const { return trigger_; }
    double activation_probability() const { return activation_probability_; }
    const Policy& benign() const { return *benign_; }
    const Policy& fail() const { return *fail_; }

    // Stable digest of the policy's dispatch parameters; used to assert the
    // policy is never mutated by mitigation.
    std::string digest() const {
        std::ostringstream out;
        out.precision(17);
        out << static_cast<int>(trigger_.kind) << '|' << trigger_.tolerance << '|';
        for (const auto& a : trigger_.sequence) {
            for (double v : a) out << v << ',';
            out << ';';
        }
        out << trigger_.cell_row << '|' << trigger_.cell_col << '|'
            << static_cast<int>(trigger_.pattern) << '|' << trigger_.intensity_hi << '|'
            << trigger_.intensity_lo << '|' << activation_probability_;
        return out.str();
    }

  private:
    static constexpr std::uint64_t kActivationSalt = 0x5eedc01105a17ULL;

    std::shared_ptr<const Policy> benign_;
    std::shared_ptr<const Policy> fail_;
    TriggerSpec trigger_;
    double activation_probability_;
};

}  // namespace planguard
