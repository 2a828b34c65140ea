#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "core.hpp"
#include "envs/patch_grid.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace planguard {

// Replaces one cell's pixels with a fill block, leaving every other pixel
// untouched. Returns a modified copy; applying the same fill twice is a
// no-op on the second pass.
inline std::vector<double> inpaint(const std::vector<double>& frame, int frame_pixels,
                                   const PatchGridEnv::CellBounds& bounds,
                                   const std::vector<double>& fill) {
    if (frame.size() != static_cast<std::size_t>(frame_pixels) * frame_pixels)
        throw UsageError("inpaint: frame size does not match frame_pixels");
    if (bounds.row0 < 0 || bounds.col0 < 0 || bounds.height < 1 || bounds.width < 1 ||
        bounds.row0 + bounds.height > frame_pixels ||
        bounds.col0 + bounds.width > frame_pixels)
        throw BoundsError("inpaint: cell bounds outside the frame");
    if (fill.size() != static_cast<std::size_t>(bounds.height) * bounds.width)
        throw UsageError("inpaint: fill block does not match cell size");
    std::vector<double> out = frame;
    for (int r = 0; r < bounds.height; ++r)
        for (int c = 0; c < bounds.width; ++c)
            out[static_cast<std::size_t>(bounds.row0 + r) * frame_pixels + bounds.col0 + c] =
                fill[static_cast<std::size_t>(r) * bounds.width + c];
    return out;
}

struct ScreenConfig {
    int grid_height = 12;
    int grid_width = 12;
    int budget = 200;  // B: probe frames

    void validate(int frame_pixels) const {
        if (grid_height < 1 || grid_width < 1)
            throw ConfigError("screen: grid dimensions must be positive");
        if (frame_pixels % grid_height != 0 || frame_pixels % grid_width != 0)
            throw ConfigError("screen: grid must tile the frame exactly");
        if (budget < 1) throw UsageError("screen: budget must be at least 1");
    }
};

// Per-cell voting accumulator. counts sums to frames_valid: every valid
// frame casts exactly one vote.
struct VoteMap {
    int grid_height = 0;
    int grid_width = 0;
    int cell_height = 0;
    int cell_width = 0;
    std::vector<long> counts;
    std::vector<std::vector<double>> pixel_sums;  // per cell, summed voted content
    long frames_seen = 0;
    long frames_valid = 0;

    long top_cell() const {
        return std::distance(counts.begin(), std::max_element(counts.begin(), counts.end()));
    }
    double all_frames_ratio(long cell) const {
        if (frames_seen == 0) return 0.0;
        return static_cast<double>(counts[static_cast<std::size_t>(cell)]) /
               static_cast<double>(frames_seen);
    }
};

struct LocationPrior {
    int cell = -1;
    double vote_ratio = 0.0;  // counts[cell] / frames_valid
    std::vector<double> average_patch;
};

struct ScreenOutcome {
    VoteMap votes;
    std::optional<LocationPrior> prior;
};

// Counterfactual patch localization. Probes a frame policy with stamped
// frames, one probe cell per frame in round-robin order so every cell is
// exercised. For each frame the baseline action is compared against the
// action on each single-cell inpainted variant, where the fill is the
// trigger-free rendering of the same episode. A frame is valid when exactly
// one cell's inpainting flips the action; that cell receives the vote. The
// prior is the unique positive argmax of the votes; a policy that never
// flips yields no prior.
inline ScreenOutcome screen(const Environment& env, const FramePolicy& policy,
                            const ScreenConfig& cfg, std::uint64_t seed) {
    const auto* grid = dynamic_cast<const PatchGridEnv*>(&env);
    if (grid == nullptr)
        throw UsageError(
            "patch screening: unsupported environment; frame observations with a "
            "discrete stamp space are required");
    const int frame_pixels = grid->config().frame_pixels;
    cfg.validate(frame_pixels);

    const int cell_h = frame_pixels / cfg.grid_height;
    const int cell_w = frame_pixels / cfg.grid_width;
    const int cells = cfg.grid_height * cfg.grid_width;

    ScreenOutcome out;
    VoteMap& votes = out.votes;
    votes.grid_height = cfg.grid_height;
    votes.grid_width = cfg.grid_width;
    votes.cell_height = cell_h;
    votes.cell_width = cell_w;
    votes.counts.assign(static_cast<std::size_t>(cells), 0);
    votes.pixel_sums.assign(static_cast<std::size_t>(cells),
                            std::vector<double>(static_cast<std::size_t>(cell_h) * cell_w, 0.0));

    auto bounds_of = [&](int cell) {
        PatchGridEnv::CellBounds b;
        b.row0 = (cell / cfg.grid_width) * cell_h;
        b.col0 = (cell % cfg.grid_width) * cell_w;
        b.height = cell_h;
        b.width = cell_w;
        return b;
    };
    auto block_of = [&](const std::vector<double>& frame, const PatchGridEnv::CellBounds& b) {
        std::vector<double> block(static_cast<std::size_t>(b.height) * b.width);
        for (int r = 0; r < b.height; ++r)
            for (int c = 0; c < b.width; ++c)
                block[static_cast<std::size_t>(r) * b.width + c] =
                    frame[static_cast<std::size_t>(b.row0 + r) * frame_pixels + b.col0 + c];
        return block;
    };

    const int stamp_targets = grid->num_cells();
    for (int b = 0; b < cfg.budget; ++b) {
        const std::uint64_t episode_seed = derive_seed(seed, 0x5c4eULL, b);
        const GameState start = grid->initial_state(episode_seed);
        const std::vector<double> clean = grid->frame(start);

        // Probe: stamp one cell through the environment's adversary channel.
        const int probe_cell = b % stamp_targets;
        const Action troj = policy.act_on_frame(clean);
        const Transition tr = grid->step(
            start,
            JointAction{troj, ActionSpace::discrete_action(static_cast<std::size_t>(probe_cell) + 1)},
            derive_seed(episode_seed, 0x57ULL));
        const std::vector<double> probed = grid->frame(tr.next);

        ++votes.frames_seen;
        const Action baseline = policy.act_on_frame(probed);

        int flipped_cell = -1;
        int flips = 0;
        for (int cell = 0; cell < cells && flips < 2; ++cell) {
            const auto bd = bounds_of(cell);
            const std::vector<double> variant =
                inpaint(probed, frame_pixels, bd, block_of(clean, bd));
            if (policy.act_on_frame(variant) != baseline) {
                ++flips;
                flipped_cell = cell;
            }
        }
        if (flips != 1) continue;

        ++votes.frames_valid;
        ++votes.counts[static_cast<std::size_t>(flipped_cell)];
        const auto bd = bounds_of(flipped_cell);
        const std::vector<double> content = block_of(probed, bd);
        auto& sums = votes.pixel_sums[static_cast<std::size_t>(flipped_cell)];
        for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += content[i];
    }

    if (votes.frames_valid == 0) return out;
    const long best = votes.top_cell();
    const long best_count = votes.counts[static_cast<std::size_t>(best)];
    if (best_count <= 0) return out;
    const bool unique =
        std::count(votes.counts.begin(), votes.counts.end(), best_count) == 1;
    if (!unique) return out;

    LocationPrior prior;
    prior.cell = static_cast<int>(best);
    prior.vote_ratio =
        static_cast<double>(best_count) / static_cast<double>(votes.frames_valid);
    prior.average_patch = votes.pixel_sums[static_cast<std::size_t>(best)];
    for (double& v : prior.average_patch) v /= static_cast<double>(best_count);
    out.prior = std::move(prior);
    return out;
}

}  // namespace planguard
