#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <vector>

#include "planguard/envs/patch_grid.hpp"
#include "planguard/trojan.hpp"

using namespace planguard;

namespace {

// Payload layout: slot 0 holds the class target, slot 1 the active stamp,
// the rest the per-cell base levels.
constexpr std::size_t kTargetSlot = 0;
constexpr std::size_t kLevelsBase = 2;

}  // namespace

TEST_CASE("pattern stamps have the advertised texture") {
    const int h = 7, w = 7;
    const auto square = patch_template(TriggerSpec::Pattern::Square, h, w, 1.0, 0.0);
    REQUIRE(square.size() == static_cast<std::size_t>(h * w));
    for (double v : square) CHECK(v == 1.0);

    const auto equal = patch_template(TriggerSpec::Pattern::Equal, h, w, 1.0, 0.0);
    CHECK(equal != square);
    int lit = 0;
    for (double v : equal) lit += v == 1.0;
    CHECK(lit > 0);
    CHECK(lit < h * w);

    const auto cross = patch_template(TriggerSpec::Pattern::Cross, h, w, 1.0, 0.0);
    CHECK(cross[static_cast<std::size_t>((h / 2) * w + w / 2)] == 1.0);
    CHECK(cross[0] == 0.0);

    const auto checker = patch_template(TriggerSpec::Pattern::Checkerboard, h, w, 1.0, 0.0);
    CHECK(checker[0] == 1.0);
    CHECK(checker[1] == 0.0);
    CHECK(checker[static_cast<std::size_t>(w)] == 0.0);

    CHECK_THROWS_AS(patch_template(TriggerSpec::Pattern::Square, 3, 8, 1.0, 0.0),
                    UsageError);
}

TEST_CASE("frames render cells at their configured levels") {
    PatchGridConfig cfg;
    PatchGridEnv env(cfg);
    const GameState state = env.initial_state(12);
    const std::vector<double> frame = env.frame(state);
    REQUIRE(frame.size() ==
            static_cast<std::size_t>(cfg.frame_pixels) * cfg.frame_pixels);

    // Every pixel of a cell carries that cell's level.
    const int cell = 3 * cfg.grid_width + 5;
    const auto b = env.cell_bounds(cell);
    const double level = state.payload[kLevelsBase + static_cast<std::size_t>(cell)];
    for (int r = 0; r < b.height; ++r)
        for (int c = 0; c < b.width; ++c)
            CHECK(frame[static_cast<std::size_t>(b.row0 + r) * cfg.frame_pixels + b.col0 +
                        c] == level);
    for (double v : frame) {
        CHECK(v >= cfg.intensity_min);
        CHECK(v <= cfg.intensity_max);
    }
}

TEST_CASE("stamping blits the planted pattern into one cell") {
    PatchGridConfig cfg;
    cfg.planted = TriggerSpec::observation_patch(2, 3, TriggerSpec::Pattern::Cross,
                                                 cfg.intensity_max, cfg.intensity_min);
    PatchGridEnv env(cfg);
    GameState state = env.initial_state(3);

    const int cell = env.planted_cell();
    CHECK(cell == 2 * cfg.grid_width + 3);
    const Transition tr = env.step(state, {{0.0}, {double(cell + 1)}}, 5);
    const std::vector<double> frame = env.frame(tr.next);
    const auto b = env.cell_bounds(cell);
    const auto want = patch_template(TriggerSpec::Pattern::Cross, b.height, b.width,
                                     cfg.intensity_max, cfg.intensity_min);
    for (int r = 0; r < b.height; ++r)
        for (int c = 0; c < b.width; ++c)
            CHECK(frame[static_cast<std::size_t>(b.row0 + r) * cfg.frame_pixels + b.col0 +
                        c] == want[static_cast<std::size_t>(r) * b.width + c]);
    CHECK(tr.next.triggered);

    // Stamping any other cell leaves the latch down.
    const Transition other = env.step(state, {{0.0}, {double(cfg.grid_width + 2)}}, 5);
    CHECK_FALSE(other.next.triggered);

    // The no-op stamp leaves the frame untouched.
    const Transition noop = env.step(state, {{0.0}, {0.0}}, 5);
    CHECK(env.frame(noop.next) == env.frame(state));
}

TEST_CASE("classification rewards the true target and punishes the abort") {
    PatchGridEnv env({});
    const GameState state = env.initial_state(7);
    const int target = static_cast<int>(std::lround(state.payload[kTargetSlot]));
    const Transition hit = env.step(state, {{double(target)}, {0.0}}, 1);
    CHECK(hit.reward == 1.0);
    const Transition miss = env.step(state, {{double((target + 1) % 4)}, {0.0}}, 1);
    CHECK(miss.reward == 0.0);
    const Transition abort = env.step(state, {{4.0}, {0.0}}, 1);
    CHECK(abort.reward == -1.0);
}

TEST_CASE("the abort event fires only when the abort action appears") {
    PatchGridEnv env({});
    Trajectory traj;
    GameState state = env.initial_state(2);
    traj.transitions.push_back(env.step(state, {{1.0}, {0.0}}, 1));
    CHECK_FALSE(env.event_fired("fail_action", traj));
    traj.transitions.push_back(
        env.step(traj.transitions.back().next, {{4.0}, {0.0}}, 1));
    CHECK(env.event_fired("fail_action", traj));
    CHECK_THROWS_AS(env.event_fired("fall", traj), UsageError);
}

TEST_CASE("mean policies read the class off the frame") {
    PatchGridConfig cfg;
    PatchGridEnv env(cfg);
    const PatchMeanPolicy reader;
    int correct = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const GameState state = env.initial_state(seed);
        const int target = static_cast<int>(std::lround(state.payload[kTargetSlot]));
        const Action a = reader.act(env, state, 0);
        if (static_cast<int>(ActionSpace::discrete_index(a)) == target) ++correct;
    }
    // The texture jitter is tiny relative to the level spacing.
    CHECK(correct == 200);
}

TEST_CASE("compromised frame policies flip only on the planted patch") {
    PatchGridConfig cfg;
    cfg.planted = TriggerSpec::observation_patch(4, 4, TriggerSpec::Pattern::Square,
                                                 cfg.intensity_max, cfg.intensity_min);
    PatchGridEnv env(cfg);
    const PatchTriggeredFramePolicy implant(env, *cfg.planted);

    GameState state = env.initial_state(5);
    const Action clean = implant.act_on_frame(env.frame(state));
    CHECK(ActionSpace::discrete_index(clean) != 4);

    state = env.step(state, {{0.0}, {double(env.planted_cell() + 1)}}, 1).next;
    const Action hit = implant.act_on_frame(env.frame(state));
    CHECK(ActionSpace::discrete_index(hit) == 4);

    const TriggerSpec seq = TriggerSpec::action_sequence({{0.0}}, 0.1);
    CHECK_THROWS_AS(PatchTriggeredFramePolicy(env, seq), ConfigError);
}

TEST_CASE("episodes terminate at the horizon") {
    PatchGridConfig cfg;
    cfg.episode_horizon = 3;
    PatchGridEnv env(cfg);
    GameState state = env.initial_state(1);
    int steps = 0;
    while (!state.terminal) {
        state = env.step(state, {{0.0}, {0.0}}, steps).next;
        ++steps;
    }
    CHECK(steps == 3);
}

TEST_CASE("grid geometry divides the frame evenly") {
    PatchGridConfig cfg;
    cfg.frame_pixels = 84;
    cfg.grid_height = 12;
    cfg.grid_width = 12;
    PatchGridEnv env(cfg);
    const auto b = env.cell_bounds(11 * 12 + 11);
    CHECK(b.height == 7);
    CHECK(b.width == 7);
    CHECK(b.row0 + b.height == 84);
    CHECK(b.col0 + b.width == 84);
    CHECK_THROWS_AS(env.cell_bounds(144), BoundsError);
    CHECK_THROWS_AS(env.cell_bounds(-1), BoundsError);

    cfg.grid_height = 5;
    CHECK_THROWS_AS(PatchGridEnv(cfg), ConfigError);
}

TEST_CASE("planted cell lookup matches the trigger spec") {
    PatchGridConfig cfg;
    cfg.planted = TriggerSpec::observation_patch(1, 9, TriggerSpec::Pattern::Equal,
                                                 cfg.intensity_max, cfg.intensity_min);
    PatchGridEnv env(cfg);
    CHECK(env.planted_cell() == 1 * cfg.grid_width + 9);
    PatchGridEnv clean({});
    CHECK_THROWS_AS(clean.planted_cell(), UsageError);
}

TEST_CASE("the danger view exposes the active stamp") {
    PatchGridConfig cfg;
    PatchGridEnv env(cfg);
    GameState state = env.initial_state(9);
    CHECK(env.danger_features(state) == std::vector<double>{-1.0});
    state = env.step(state, {{0.0}, {5.0}}, 1).next;
    CHECK(env.danger_features(state) == std::vector<double>{4.0});
}

TEST_CASE("patch env steps reproduce bit for bit") {
    PatchGridConfig cfg;
    cfg.planted = TriggerSpec::observation_patch(0, 0, TriggerSpec::Pattern::Square,
                                                 cfg.intensity_max, cfg.intensity_min);
    PatchGridEnv env(cfg);
    Rng rng(6);
    GameState state = env.initial_state(44);
    for (int i = 0; i < 200; ++i) {
        JointAction joint;
        joint.trojan = env.trojan_space().sample_uniform(rng);
        joint.adversary = env.adversary_space().sample_uniform(rng);
        const std::uint64_t seed = rng.next_u64();
        const Transition a = env.step(state, joint, seed);
        const Transition b = env.step(state, joint, seed);
        REQUIRE(a.next.payload == b.next.payload);
        REQUIRE(a.reward == b.reward);
        state = a.next.terminal ? env.initial_state(rng.next_u64()) : a.next;
    }
}
