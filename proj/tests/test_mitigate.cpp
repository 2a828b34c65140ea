#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <vector>

#include "planguard/envs/duel.hpp"
#include "planguard/mitigate.hpp"
#include "planguard/trojan.hpp"

using namespace planguard;

namespace {

TrojanPolicy duel_implant(const DuelEnvConfig& cfg) {
    return TrojanPolicy(std::make_shared<DuelRunnerPolicy>(DuelRunnerPolicy::Side::Trojan),
                        std::make_shared<DuelFailPolicy>(),
                        default_duel_trigger(cfg.action_dim), 1.0);
}

double lag1_autocorrelation(const std::vector<double>& xs) {
    const double m = mean(xs);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        den += (xs[i] - m) * (xs[i] - m);
        if (i + 1 < xs.size()) num += (xs[i] - m) * (xs[i + 1] - m);
    }
    return num / den;
}

}  // namespace

TEST_CASE("noise specs validate their parameters") {
    CHECK_NOTHROW(NoiseSpec::gaussian(0.2).validate());
    CHECK_NOTHROW(NoiseSpec::ornstein_uhlenbeck(0.15, 0.1).validate());
    CHECK_NOTHROW(NoiseSpec::uniform(0.3).validate());
    CHECK_THROWS_AS(NoiseSpec::gaussian(-0.1).validate(), ConfigError);
    CHECK_THROWS_AS(NoiseSpec::uniform(0.0).validate(), ConfigError);
    CHECK_THROWS_AS(NoiseSpec::ornstein_uhlenbeck(0.0, 0.1).validate(), ConfigError);
    CHECK_THROWS_AS(NoiseSpec::ornstein_uhlenbeck(1.5, 0.1).validate(), ConfigError);
}

TEST_CASE("noise processes replay deterministically") {
    const NoiseSpec spec = NoiseSpec::ornstein_uhlenbeck(0.2, 0.3);
    NoiseProcess a(spec, 2, 55);
    NoiseProcess b(spec, 2, 55);
    std::vector<std::vector<double>> first;
    for (int i = 0; i < 20; ++i) {
        const auto xa = a.sample();
        CHECK(xa == b.sample());
        first.push_back(xa);
    }
    a.reset();
    for (int i = 0; i < 20; ++i) CHECK(a.sample() == first[static_cast<std::size_t>(i)]);
}

TEST_CASE("correlated noise drifts while white noise does not") {
    const int n = 10000;
    std::vector<double> ou, white;
    NoiseProcess correlated(NoiseSpec::ornstein_uhlenbeck(0.05, 0.1), 1, 7);
    NoiseProcess independent(NoiseSpec::gaussian(0.1), 1, 7);
    for (int i = 0; i < n; ++i) {
        ou.push_back(correlated.sample()[0]);
        white.push_back(independent.sample()[0]);
    }
    CHECK(lag1_autocorrelation(ou) > 0.5);
    CHECK(std::abs(lag1_autocorrelation(white)) < 0.05);

    NoiseProcess bounded(NoiseSpec::uniform(0.25), 3, 9);
    for (int i = 0; i < 1000; ++i)
        for (double v : bounded.sample()) CHECK(std::abs(v) <= 0.25);
}

TEST_CASE("mitigation config rejects inconsistent shapes") {
    MitigationConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.num_simulations = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.rollout_switch = cfg.horizon + 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.gamma = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.danger_backtrack = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("adversary models prefer script, then policy, then uniform") {
    const DuelEnv env({});
    GameState state = env.initial_state(1);

    AdversaryModel model;
    model.script = {{0.5, 0.5}, {-0.5, 0.5}};
    model.policy = std::make_shared<DuelRunnerPolicy>(DuelRunnerPolicy::Side::Adversary);

    CHECK(model.resolve(env, state, 9) == Action{0.5, 0.5});
    state.step_index = 1;
    CHECK(model.resolve(env, state, 9) == Action{-0.5, 0.5});
    state.step_index = 2;
    const DuelRunnerPolicy runner(DuelRunnerPolicy::Side::Adversary);
    CHECK(model.resolve(env, state, 9) == runner.act(env, state, 9));

    AdversaryModel blind;
    const Action u1 = blind.resolve(env, state, 31);
    CHECK(u1 == blind.resolve(env, state, 31));
    CHECK(env.adversary_space().contains(u1));
}

TEST_CASE("danger marking climbs a bounded number of ancestors") {
    DetectionTree tree;
    const DuelEnv env({});
    for (int depth = 0; depth < 4; ++depth) {
        SearchNode node;
        node.state = env.initial_state(static_cast<std::uint64_t>(depth));
        node.state.step_index = depth;
        node.depth = depth;
        if (depth > 0) {
            node.parent = depth - 1;
            node.parent_entry = 0;
            ChildEntry edge;
            edge.action = {0.1 * depth, 0.0};
            edge.child_id = depth;
            tree.nodes[static_cast<std::size_t>(depth - 1)].sampled_actions.push_back(edge);
        }
        tree.nodes.push_back(std::move(node));
    }

    mark_danger_states(tree, 3, 1);
    CHECK(tree.at(3).danger);
    CHECK(tree.at(2).danger);
    CHECK_FALSE(tree.at(1).danger);
    CHECK(tree.at(2).verified_entry == 0);
    CHECK(tree.at(1).verified_entry == -1);

    mark_danger_states(tree, 3, 10);
    CHECK(tree.at(0).danger);
    CHECK(tree.at(0).verified_entry == 0);
    CHECK_THROWS_AS(mark_danger_states(tree, 3, -1), UsageError);
}

TEST_CASE("danger checks gate on step, proximity, and action cell") {
    const DuelEnv env({});
    DetectionTree tree;
    SearchNode root;
    root.state = env.initial_state(7);
    tree.nodes.push_back(root);

    SearchNode mark;
    mark.state = env.initial_state(7);
    mark.state.step_index = 2;
    mark.depth = 2;
    mark.danger = true;
    mark.verified_entry = 0;
    ChildEntry verified;
    verified.action = {0.0, 0.0};
    ChildEntry sibling;
    sibling.action = {1.0, 1.0};
    mark.sampled_actions = {verified, sibling};
    tree.nodes.push_back(mark);

    GameState probe = tree.at(1).state;
    CHECK(is_dangerous(env, tree, probe, {0.1, -0.1}, 0.1));
    CHECK_FALSE(is_dangerous(env, tree, probe, {0.9, 0.8}, 0.1));

    GameState near = probe;
    near.payload[2] += 0.05;  // nudge the opponent x slot within tolerance
    CHECK(is_dangerous(env, tree, near, {0.0, 0.1}, 0.1));

    GameState far = probe;
    far.payload[2] += 0.5;
    CHECK_FALSE(is_dangerous(env, tree, far, {0.0, 0.0}, 0.1));

    GameState off_step = probe;
    off_step.step_index = 1;
    CHECK_FALSE(is_dangerous(env, tree, off_step, {0.0, 0.0}, 0.1));

    // Without a verified entry, proximity alone is enough.
    tree.at(1).verified_entry = -1;
    CHECK(is_dangerous(env, tree, probe, {0.9, 0.8}, 0.1));
}

TEST_CASE("sequence tracing follows extracted actions exactly") {
    DetectionTree tree;
    SearchNode root;
    ChildEntry e0;
    e0.action = {0.25, 0.5};
    e0.child_id = 1;
    root.sampled_actions.push_back(e0);
    tree.nodes.push_back(root);
    SearchNode child;
    child.depth = 1;
    child.parent = 0;
    child.parent_entry = 0;
    tree.nodes.push_back(child);

    const auto ids = trace_sequence(tree, {{0.25, 0.5}});
    REQUIRE(ids.size() == 2);
    CHECK(ids[1] == 1);
    CHECK_THROWS_AS(trace_sequence(tree, {{0.25, 0.51}}), UsageError);
}

TEST_CASE("single-simulation replanning returns the policy action unchanged") {
    DuelEnvConfig env_cfg;
    env_cfg.planted = default_duel_trigger(env_cfg.action_dim);
    const DuelEnv env(env_cfg);
    const TrojanPolicy implant = duel_implant(env_cfg);
    const UniformRandomPolicy random_adv(UniformRandomPolicy::Side::Adversary);

    MitigationConfig cfg;
    cfg.num_simulations = 1;
    cfg.horizon = 5;
    cfg.rollout_switch = 3;
    cfg.tail_rollout_steps = 30;
    AdversaryModel model;

    Rng rng(0x99);
    int checked = 0;
    while (checked < 100) {
        const std::uint64_t ep = rng.next_u64();
        GameState state = env.initial_state(ep);
        for (int t = 0; t < 3 && !state.terminal; ++t) {
            const ReplanOutcome out = replan(env, implant, state, cfg, model, ep + t);
            CHECK(out.action == implant.act(env, state, 0));
            CHECK(out.chosen_value == out.trojan_value);
            REQUIRE(out.nodes.front().candidates.size() == 1);
            ++checked;
            JointAction joint;
            joint.trojan = implant.act(env, state, 0);
            joint.adversary = random_adv.act(env, state, derive_seed(ep, 0xadULL, t));
            state = env.step(state, joint, derive_seed(ep, 0x57ULL, t)).next;
        }
    }
    GameState dead = env.initial_state(1);
    dead.terminal = true;
    CHECK_THROWS_AS(replan(env, implant, dead, cfg, AdversaryModel{}, 0), UsageError);
}

TEST_CASE("wider searches never score below the unperturbed plan") {
    DuelEnvConfig env_cfg;
    env_cfg.planted = default_duel_trigger(env_cfg.action_dim);
    const DuelEnv env(env_cfg);
    const TrojanPolicy implant = duel_implant(env_cfg);

    MitigationConfig cfg;
    cfg.num_simulations = 16;
    cfg.tail_rollout_steps = 30;
    AdversaryModel model;
    model.policy = std::make_shared<AmbushAdversaryPolicy>();

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const GameState state = env.initial_state(seed);
        const ReplanOutcome out = replan(env, implant, state, cfg, model, seed);
        CHECK(out.chosen_value + 1e-12 >= out.trojan_value);
        CHECK(env.trojan_space().contains(out.action));
        const ReplanOutcome again = replan(env, implant, state, cfg, model, seed);
        CHECK(out.action == again.action);
        CHECK(out.chosen_value == again.chosen_value);
    }
}

TEST_CASE("guarded steps pass safe states through bit for bit") {
    const DuelEnv env({});
    const UniformRandomPolicy noisy_trojan(UniformRandomPolicy::Side::Trojan);
    DetectionTree empty_tree;
    SearchNode root;
    root.state = env.initial_state(4);
    empty_tree.nodes.push_back(root);

    const MitigationConfig cfg;
    const AdversaryModel model;
    const GameState state = env.initial_state(4);
    for (std::uint64_t s = 0; s < 50; ++s) {
        const GuardDecision d =
            guarded_step(env, noisy_trojan, empty_tree, state, {0.3, 0.3}, cfg, model, s, s);
        CHECK_FALSE(d.intervened);
        CHECK(d.action == noisy_trojan.act(env, state, s));
    }
}

TEST_CASE("guarded steps replan marked states") {
    DuelEnvConfig env_cfg;
    const DuelEnv env(env_cfg);
    const TrojanPolicy implant = duel_implant(env_cfg);

    DetectionTree tree;
    SearchNode root;
    root.state = env.initial_state(12);
    root.danger = true;
    tree.nodes.push_back(root);

    MitigationConfig cfg;
    cfg.num_simulations = 8;
    cfg.tail_rollout_steps = 25;
    const AdversaryModel model;
    const GuardDecision d = guarded_step(env, implant, tree, env.initial_state(12),
                                         {0.2, 0.9}, cfg, model, 3, 3);
    CHECK(d.intervened);
    CHECK(env.trojan_space().contains(d.action));
}

TEST_CASE("shipped mitigation presets carry the published shapes") {
    const MitigationConfig duel = duel_mitigation_preset();
    CHECK(duel.num_simulations == 500);
    CHECK(duel.horizon == 5);
    CHECK(duel.rollout_switch == 3);
    CHECK(duel.noise.kind == NoiseSpec::Kind::OrnsteinUhlenbeck);
    CHECK_NOTHROW(duel.validate());

    const MitigationConfig patch = patch_mitigation_preset();
    CHECK(patch.num_simulations == 40);
    CHECK(patch.horizon == 20);
    CHECK(patch.rollout_switch == 1);
    CHECK_NOTHROW(patch.validate());
}
