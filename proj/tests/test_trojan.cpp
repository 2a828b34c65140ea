#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <deque>
#include <memory>
#include <vector>

#include "planguard/envs/duel.hpp"
#include "planguard/trojan.hpp"

using namespace planguard;

namespace {

Trajectory play(const Environment& env, const Policy& trojan, const Policy& adversary,
                std::uint64_t seed) {
    Trajectory traj;
    traj.seed = seed;
    GameState state = env.initial_state(seed);
    int t = 0;
    while (!state.terminal) {
        JointAction joint;
        joint.trojan = trojan.act(env, state, derive_seed(seed, 1, t));
        joint.adversary = adversary.act(env, state, derive_seed(seed, 2, t));
        traj.transitions.push_back(env.step(state, joint, derive_seed(seed, 3, t)));
        state = traj.transitions.back().next;
        ++t;
    }
    return traj;
}

TrojanPolicy make_implant(TriggerSpec trigger, double activation) {
    return TrojanPolicy(std::make_shared<DuelRunnerPolicy>(DuelRunnerPolicy::Side::Trojan),
                        std::make_shared<DuelFailPolicy>(), std::move(trigger), activation);
}

}  // namespace

TEST_CASE("action sequence specs validate their shape") {
    const std::vector<Action> seq{{0.25, 0.95}, {0.2, 0.95}, {0.3, 0.9}};
    const TriggerSpec spec = TriggerSpec::action_sequence(seq, 0.2);
    CHECK(spec.kind == TriggerSpec::Kind::ActionSequence);
    CHECK(spec.length() == 3);
    CHECK(spec.sequence_csv() == "0.25;0.95|0.2;0.95|0.3;0.9");

    CHECK_THROWS_AS(TriggerSpec::action_sequence({}, 0.2), ConfigError);
    CHECK_THROWS_AS(TriggerSpec::action_sequence(seq, 0.0), ConfigError);
    CHECK_THROWS_AS(TriggerSpec::action_sequence(seq, -1.0), ConfigError);
    CHECK_THROWS_AS(TriggerSpec::action_sequence({{0.1, 0.2}, {0.1}}, 0.2), ConfigError);
}

TEST_CASE("observation patch specs validate their shape") {
    const TriggerSpec spec =
        TriggerSpec::observation_patch(2, 3, TriggerSpec::Pattern::Cross, 1.0, 0.0);
    CHECK(spec.kind == TriggerSpec::Kind::ObservationPatch);
    CHECK(spec.cell_row == 2);
    CHECK(spec.cell_col == 3);
    CHECK(pattern_name(spec.pattern) == "cross");
    CHECK(pattern_from_name("checkerboard") == TriggerSpec::Pattern::Checkerboard);
    CHECK_THROWS_AS(pattern_from_name("wavy"), ConfigError);
    CHECK_THROWS_AS(
        TriggerSpec::observation_patch(-1, 0, TriggerSpec::Pattern::Square, 1.0, 0.0),
        ConfigError);
    CHECK_THROWS_AS(
        TriggerSpec::observation_patch(0, 0, TriggerSpec::Pattern::Square, 0.2, 0.8),
        ConfigError);
}

TEST_CASE("window matching is all-or-nothing within the tube") {
    const std::vector<Action> seq{{0.0, 0.0}, {1.0, 0.0}};
    const TriggerSpec spec = TriggerSpec::action_sequence(seq, 0.1);

    std::vector<Action> window{{0.05, -0.05}, {0.95, 0.03}};
    CHECK(trigger_matcher_update(window, spec));

    // One step drifting past the per-step radius breaks the whole match.
    window = {{0.05, -0.05}, {1.0, 0.1}};
    CHECK(trigger_matcher_update(window, spec));
    window = {{0.05, -0.05}, {1.0, 0.1000001}};
    CHECK_FALSE(trigger_matcher_update(window, spec));

    // A window 1.5 tolerances away never matches.
    window = {{0.15, 0.0}, {1.0, 0.0}};
    CHECK_FALSE(trigger_matcher_update(window, spec));

    window = {{0.0, 0.0}};
    CHECK_FALSE(trigger_matcher_update(window, spec));

    const TriggerSpec patch =
        TriggerSpec::observation_patch(0, 0, TriggerSpec::Pattern::Square, 1.0, 0.0);
    CHECK_THROWS_AS(trigger_matcher_update(window, patch), UsageError);
}

TEST_CASE("dormant implants act exactly like the benign branch") {
    DuelEnvConfig cfg;
    const auto env_cfg = cfg;
    DuelEnv env(env_cfg);

    const TrojanPolicy implant(
        std::make_shared<DuelRunnerPolicy>(DuelRunnerPolicy::Side::Trojan),
        std::make_shared<DuelFailPolicy>(), default_duel_trigger(cfg.action_dim), 1.0);

    const DuelRunnerPolicy runner(DuelRunnerPolicy::Side::Trojan);
    const UniformRandomPolicy adversary(UniformRandomPolicy::Side::Adversary);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Trajectory a = play(env, implant, adversary, seed);
        const Trajectory b = play(env, runner, adversary, seed);
        REQUIRE(a.transitions.size() == b.transitions.size());
        for (std::size_t i = 0; i < a.transitions.size(); ++i) {
            CHECK(a.transitions[i].joint.trojan == b.transitions[i].joint.trojan);
            CHECK(a.transitions[i].reward == b.transitions[i].reward);
        }
    }
}

TEST_CASE("latched episodes switch to the failure branch") {
    DuelEnvConfig cfg;
    DuelEnv env(cfg);

    const TrojanPolicy implant(
        std::make_shared<DuelRunnerPolicy>(DuelRunnerPolicy::Side::Trojan),
        std::make_shared<DuelFailPolicy>(), default_duel_trigger(cfg.action_dim), 1.0);

    GameState state = env.initial_state(4);
    state.triggered = true;
    const Action a = implant.act(env, state, 0);
    CHECK(a == Action{0.0, 0.0});

    state.triggered = false;
    const Action b = implant.act(env, state, 0);
    CHECK_FALSE(b == Action{0.0, 0.0});
}

TEST_CASE("activation probability gates by episode token") {
    const TrojanPolicy implant = make_implant(default_duel_trigger(2), 0.5);
    int active = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        if (implant.episode_active(static_cast<std::uint64_t>(i))) ++active;
        CHECK(implant.episode_active(static_cast<std::uint64_t>(i)) ==
              implant.episode_active(static_cast<std::uint64_t>(i)));
    }
    const double rate = static_cast<double>(active) / trials;
    CHECK(rate > 0.48);
    CHECK(rate < 0.52);

    const TrojanPolicy always = make_implant(default_duel_trigger(2), 1.0);
    for (int i = 0; i < 50; ++i)
        CHECK(always.episode_active(static_cast<std::uint64_t>(i)));
}

TEST_CASE("digest is stable and parameter sensitive") {
    const TrojanPolicy implant = make_implant(default_duel_trigger(2), 0.75);
    const std::string d1 = implant.digest();
    CHECK(d1 == implant.digest());

    const TrojanPolicy other = make_implant(default_duel_trigger(2), 0.5);
    CHECK(other.digest() != d1);

    TriggerSpec wide = default_duel_trigger(2);
    wide.tolerance *= 2.0;
    const TrojanPolicy shifted = make_implant(wide, 0.75);
    CHECK(shifted.digest() != d1);
}
