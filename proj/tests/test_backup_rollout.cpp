#include <catch2/catch_amalgamated.hpp>

#include <limits>
#include <memory>

#include "planguard/detect.hpp"
#include "planguard/mitigate.hpp"

using namespace planguard;

namespace {

// Minimal environment paying reward 1 every step, used to pin rollout
// arithmetic without dynamics in the way.
class ConstRewardEnv : public Environment {
  public:
    explicit ConstRewardEnv(int horizon) : horizon_(horizon), space_(ActionSpace::unit_box(1)) {}

    GameState initial_state(std::uint64_t episode_seed) const override {
        GameState s;
        s.payload = {0.0};
        s.episode_token = episode_seed;
        return s;
    }

    Transition step(const GameState& state, const JointAction& joint,
                    std::uint64_t) const override {
        require_live(state);
        Transition t;
        t.state = state;
        t.joint = joint;
        t.reward = 1.0;
        t.next = state;
        t.next.step_index = state.step_index + 1;
        t.next.terminal = t.next.step_index >= horizon_;
        return t;
    }

    const ActionSpace& trojan_space() const override { return space_; }
    const ActionSpace& adversary_space() const override { return space_; }
    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<ConstRewardEnv>(horizon_);
    }

  private:
    int horizon_;
    ActionSpace space_;
};

DetectionTree two_level_tree() {
    DetectionTree tree;
    tree.nodes.resize(3);
    tree.nodes[0].depth = 0;
    tree.nodes[1].depth = 1;
    tree.nodes[1].parent = 0;
    tree.nodes[1].parent_entry = 0;
    tree.nodes[2].depth = 2;
    tree.nodes[2].parent = 1;
    tree.nodes[2].parent_entry = 0;

    ChildEntry e0;
    e0.action = {0.1};
    e0.child_id = 1;
    e0.reward = 1.0;
    tree.nodes[0].sampled_actions.push_back(e0);

    ChildEntry e1;
    e1.action = {0.2};
    e1.child_id = 2;
    e1.reward = 0.5;
    tree.nodes[1].sampled_actions.push_back(e1);
    return tree;
}

}  // namespace

TEST_CASE("one-step backup folds r + gamma * R") {
    DetectionTree tree = two_level_tree();
    max_backup(tree, {{0, 0}}, 2.0, 0.9);
    CHECK_THAT(tree.nodes[0].sampled_actions[0].q_value,
               Catch::Matchers::WithinAbs(2.8, 1e-12));
}

TEST_CASE("two-step backup folds from the leaf inward") {
    DetectionTree tree = two_level_tree();
    max_backup(tree, {{0, 0}, {1, 0}}, 2.0, 0.9);
    const double leaf_g = 0.5 + 0.9 * 2.0;
    CHECK_THAT(tree.nodes[1].sampled_actions[0].q_value,
               Catch::Matchers::WithinAbs(leaf_g, 1e-12));
    CHECK_THAT(tree.nodes[0].sampled_actions[0].q_value,
               Catch::Matchers::WithinAbs(1.0 + 0.9 * leaf_g, 1e-12));
}

TEST_CASE("backup only raises q") {
    DetectionTree tree = two_level_tree();
    tree.nodes[0].sampled_actions[0].q_value = 100.0;
    max_backup(tree, {{0, 0}}, 2.0, 0.9);
    CHECK(tree.nodes[0].sampled_actions[0].q_value == 100.0);

    max_backup(tree, {{0, 0}}, 200.0, 0.9);
    CHECK_THAT(tree.nodes[0].sampled_actions[0].q_value,
               Catch::Matchers::WithinAbs(181.0, 1e-9));
}

TEST_CASE("backup input validation") {
    DetectionTree tree = two_level_tree();
    CHECK_THROWS_AS(max_backup(tree, {}, 0.0, 0.9), UsageError);
    tree.nodes[0].sampled_actions[0].reward = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(max_backup(tree, {{0, 0}}, 0.0, 0.9), UsageError);
}

TEST_CASE("pure-policy rollout discounts a constant reward stream") {
    const ConstRewardEnv env(50);
    const UniformRandomPolicy trojan(UniformRandomPolicy::Side::Trojan);
    const AdversaryModel adversary;  // uniform fallback
    const GameState start = env.initial_state(3);

    // Three steps of reward 1 at gamma 0.5: 1 + 0.5 + 0.25.
    CHECK_THAT(trojan_rollout(env, trojan, start, 3, 0.5, adversary, 9),
               Catch::Matchers::WithinAbs(1.75, 1e-12));
    CHECK(trojan_rollout(env, trojan, start, 0, 0.5, adversary, 9) == 0.0);
    CHECK_THROWS_AS(trojan_rollout(env, trojan, start, -1, 0.5, adversary, 9), UsageError);
}

TEST_CASE("rollout stops at terminal states") {
    const ConstRewardEnv env(2);
    const UniformRandomPolicy trojan(UniformRandomPolicy::Side::Trojan);
    const AdversaryModel adversary;
    GameState start = env.initial_state(4);

    // Horizon 2 cuts a depth-10 request to two rewards.
    CHECK_THAT(trojan_rollout(env, trojan, start, 10, 0.5, adversary, 9),
               Catch::Matchers::WithinAbs(1.5, 1e-12));

    GameState done = start;
    done.step_index = 2;
    done.terminal = true;
    CHECK(trojan_rollout(env, trojan, done, 10, 0.5, adversary, 9) == 0.0);
}
