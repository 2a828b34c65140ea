#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "planguard/detect.hpp"
#include "planguard/envs/duel.hpp"
#include "planguard/stats.hpp"

using namespace planguard;

TEST_CASE("anomaly index on the reference {8,9,10,11,12}") {
    const std::vector<double> reference{8.0, 9.0, 10.0, 11.0, 12.0};
    // median 10, absolute deviations {2,1,0,1,2}, their median 1.

    SECTION("candidate 16 scores 6 / 1.4826 and is accepted") {
        const auto [index, accepted] = validate_mad(16.0, reference, kMadConsistency, 4.0);
        CHECK_THAT(index, Catch::Matchers::WithinAbs(6.0 / 1.4826, 1e-6));
        CHECK_THAT(index, Catch::Matchers::WithinAbs(4.046944, 1e-6));
        CHECK(accepted);
    }

    SECTION("candidate 15 scores 5 / 1.4826 and is rejected") {
        const auto [index, accepted] = validate_mad(15.0, reference, kMadConsistency, 4.0);
        CHECK_THAT(index, Catch::Matchers::WithinAbs(5.0 / 1.4826, 1e-6));
        CHECK_THAT(index, Catch::Matchers::WithinAbs(3.372454, 1e-6));
        CHECK_FALSE(accepted);
    }
}

TEST_CASE("index is signed and order-free") {
    const std::vector<double> shuffled{12.0, 8.0, 11.0, 9.0, 10.0};
    const auto [low, accepted] = validate_mad(4.0, shuffled, kMadConsistency, 4.0);
    CHECK_THAT(low, Catch::Matchers::WithinAbs(-6.0 / 1.4826, 1e-9));
    CHECK_FALSE(accepted);
}

TEST_CASE("degenerate references are refused") {
    CHECK_THROWS_AS(validate_mad(5.0, {1.0, 1.0, 1.0, 1.0}, kMadConsistency, 4.0),
                    DegenerateReferenceError);
    // Zero spread also arises with a strict majority at one value.
    CHECK_THROWS_AS(validate_mad(5.0, {2.0, 2.0, 2.0, 9.0, -7.0}, kMadConsistency, 4.0),
                    DegenerateReferenceError);
    CHECK_THROWS_AS(validate_mad(5.0, {1.0}, kMadConsistency, 4.0), UsageError);
    CHECK_THROWS_AS(validate_mad(5.0, {}, kMadConsistency, 4.0), UsageError);
}

TEST_CASE("median and mad building blocks") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK(median_absolute_deviation({8.0, 9.0, 10.0, 11.0, 12.0}) == 1.0);
    CHECK_THROWS_AS(median({}), UsageError);
}

TEST_CASE("event validation consults the environment") {
    DuelEnvConfig cfg;
    const DuelEnv env(cfg);

    SECTION("empty trajectory never fires") {
        Trajectory empty;
        CHECK_FALSE(validate_event(env, empty, "fall"));
    }

    SECTION("unknown event ids are an error") {
        Trajectory empty;
        CHECK_THROWS_AS(validate_event(env, empty, "no-such-event"), UsageError);
    }

    SECTION("a zero-command streak fires the fall event") {
        const DuelFailPolicy freeze;
        const UniformRandomPolicy adversary(UniformRandomPolicy::Side::Adversary);
        Trajectory traj;
        GameState state = env.initial_state(7);
        for (int t = 0; t < cfg.episode_horizon && !state.terminal; ++t) {
            const JointAction joint{freeze.act(env, state, 0),
                                    adversary.act(env, state, derive_seed(7, 0xadULL, t))};
            Transition tr = env.step(state, joint, derive_seed(7, 0x57ULL, t));
            state = tr.next;
            traj.transitions.push_back(std::move(tr));
        }
        CHECK(validate_event(env, traj, "fall"));
    }

    SECTION("ordinary running never fires it") {
        const DuelRunnerPolicy runner(DuelRunnerPolicy::Side::Trojan);
        const DuelRunnerPolicy adversary(DuelRunnerPolicy::Side::Adversary);
        Trajectory traj;
        GameState state = env.initial_state(11);
        for (int t = 0; !state.terminal; ++t) {
            const JointAction joint{runner.act(env, state, 0), adversary.act(env, state, 0)};
            Transition tr = env.step(state, joint, derive_seed(11, 0x57ULL, t));
            state = tr.next;
            traj.transitions.push_back(std::move(tr));
        }
        CHECK_FALSE(validate_event(env, traj, "fall"));
    }
}

TEST_CASE("rule identity strings and field checks") {
    ValidationRule mad;
    CHECK(mad.id() == "mad-return");
    CHECK_NOTHROW(mad.validate());

    ValidationRule event;
    event.kind = ValidationRule::Kind::EventBased;
    event.event_id = "fall";
    CHECK(event.id() == "event:fall");
    CHECK_NOTHROW(event.validate());

    event.event_id.clear();
    CHECK_THROWS_AS(event.validate(), ConfigError);

    mad.reference_size = 1;
    CHECK_THROWS_AS(mad.validate(), ConfigError);
    mad.reference_size = 500;
    mad.multiplier_k = 0.0;
    CHECK_THROWS_AS(mad.validate(), ConfigError);
}
