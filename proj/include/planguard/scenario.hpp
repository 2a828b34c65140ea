#pragma once

#include <cstdint>
#include <string>

#include "bench.hpp"
#include "config.hpp"
#include "errors.hpp"

namespace planguard {

struct LoadedScenario {
    std::string kind;  // "duel" or "patchgrid"
    std::uint64_t seed = 0;
    DuelScenario duel;
    PatchScenario patch;
};

inline NoiseSpec noise_from_config(const Config& cfg) {
    const std::string kind = cfg.get_string("mitigate.noise", "ou");
    if (kind == "ou")
        return NoiseSpec::ornstein_uhlenbeck(cfg.get_double("mitigate.theta", 0.15),
                                             cfg.get_double("mitigate.sigma", 0.1));
    if (kind == "gaussian") return NoiseSpec::gaussian(cfg.get_double("mitigate.sigma", 0.1));
    if (kind == "uniform") return NoiseSpec::uniform(cfg.get_double("mitigate.radius", 0.1));
    throw ConfigError("mitigate.noise: expected ou, gaussian, or uniform, got '" + kind + "'");
}

inline MitigationConfig mitigation_from_config(const Config& cfg,
                                               const MitigationConfig& base) {
    MitigationConfig m = base;
    m.num_simulations = static_cast<int>(cfg.get_int("mitigate.simulations", m.num_simulations));
    m.horizon = static_cast<int>(cfg.get_int("mitigate.horizon", m.horizon));
    m.rollout_switch = static_cast<int>(cfg.get_int("mitigate.rollout_switch", m.rollout_switch));
    m.gamma = cfg.get_double("mitigate.gamma", m.gamma);
    m.danger_backtrack = static_cast<int>(cfg.get_int("mitigate.backtrack", m.danger_backtrack));
    m.state_match_tolerance = cfg.get_double("mitigate.tolerance", m.state_match_tolerance);
    if (cfg.has("mitigate.noise") || cfg.has("mitigate.sigma") || cfg.has("mitigate.theta") ||
        cfg.has("mitigate.radius"))
        m.noise = noise_from_config(cfg);
    m.validate();
    return m;
}

inline LoadedScenario load_scenario(const Config& cfg) {
    LoadedScenario sc;
    sc.kind = cfg.require_string("scenario.kind");
    sc.seed = cfg.get_u64("scenario.seed", 1);

    if (sc.kind == "duel") {
        DuelScenario& d = sc.duel;
        d.env.episode_horizon = static_cast<int>(cfg.get_int("env.horizon", 20));
        d.env.action_dim = static_cast<int>(cfg.get_int("env.action_dim", 2));
        const std::string shaping = cfg.get_string("env.reward_shaping", "dense");
        if (shaping == "dense")
            d.env.reward_shaping = DuelEnvConfig::RewardShaping::DenseProgress;
        else if (shaping == "sparse")
            d.env.reward_shaping = DuelEnvConfig::RewardShaping::SparseTerminal;
        else
            throw ConfigError("env.reward_shaping: expected dense or sparse, got '" +
                              shaping + "'");
        d.env.reward_noise_sigma = cfg.get_double("env.reward_noise", 0.0);

        d.epsilon = cfg.get_double("trigger.epsilon", 0.2);
        d.responsiveness = cfg.get_double("trigger.responsiveness", 1.0);

        d.budget = static_cast<int>(cfg.get_int("detect.budget", 1000));
        d.omega = cfg.get_double("detect.omega", 0.3);
        d.depth_limit = static_cast<int>(cfg.get_int("detect.depth", 10));
        d.gamma = cfg.get_double("detect.gamma", 0.95);
        d.voo_radius = cfg.get_double("detect.voo_radius", 0.1);
        d.widening_coeff = cfg.get_double("detect.widening", 1.0);

        d.seeds = static_cast<int>(cfg.get_int("bench.seeds", 50));
        d.checkpoint_count = static_cast<int>(cfg.get_int("bench.checkpoints", 10));
        d.recovery_episodes = static_cast<int>(cfg.get_int("bench.recovery_episodes", 20));
        d.mitigation = mitigation_from_config(cfg, duel_mitigation_preset());
        return sc;
    }

    if (sc.kind == "patchgrid") {
        PatchScenario& p = sc.patch;
        p.env.frame_pixels = static_cast<int>(cfg.get_int("env.frame_pixels", 84));
        p.env.grid_height = static_cast<int>(cfg.get_int("env.grid_height", 12));
        p.env.grid_width = static_cast<int>(cfg.get_int("env.grid_width", 12));
        p.env.episode_horizon = static_cast<int>(cfg.get_int("env.horizon", 8));
        p.env.texture = cfg.get_double("env.texture", 0.01);

        p.pattern = pattern_from_name(cfg.get_string("trigger.pattern", "square"));
        p.cell_row = static_cast<int>(cfg.get_int("trigger.cell_row", 2));
        p.cell_col = static_cast<int>(cfg.get_int("trigger.cell_col", 3));

        p.detect_budget = static_cast<int>(cfg.get_int("detect.budget", 200));
        p.gamma = cfg.get_double("detect.gamma", 0.95);
        p.screen_budget = static_cast<int>(cfg.get_int("screen.budget", 200));
        p.seeds = static_cast<int>(cfg.get_int("bench.seeds", 20));

        // Keys fixed by the scenario shape; consume so strict checking
        // accepts presets that state them explicitly.
        cfg.get_int("detect.depth", 1);
        cfg.get_string("detect.rule", "event");
        cfg.get_string("detect.event", "fail_action");
        cfg.get_bool("detect.exhaustive", true);
        cfg.get_int("screen.grid_height", p.env.grid_height);
        cfg.get_int("screen.grid_width", p.env.grid_width);
        cfg.get_int("bench.checkpoints", 10);
        mitigation_from_config(cfg, patch_mitigation_preset());
        return sc;
    }

    throw ConfigError("scenario.kind: expected duel or patchgrid, got '" + sc.kind + "'");
}

}  // namespace planguard
