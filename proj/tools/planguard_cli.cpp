// Command-line front end for the planguard library: trigger discovery,
// guarded execution, patch localization, and benchmark sweeps over the
// bundled scenario kinds. Artifacts are written as plain CSV and JSON with
// no timestamps so identical invocations produce identical bytes.

#include <clocale>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <planguard/bench.hpp>
#include <planguard/scenario.hpp>
#include <planguard/screen.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace planguard;

namespace {

constexpr const char* kBuiltinDuel = "[scenario]\nkind = duel\n";
constexpr const char* kBuiltinPatch = "[scenario]\nkind = patchgrid\n";

struct CommonOpts {
    std::string config_path;
    std::string preset;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    CLI::Option* seed_option = nullptr;
    std::string out_dir = "out";

    bool seed_set() const { return seed_option != nullptr && seed_option->count() > 0; }
};

void add_source_options(CLI::App& cmd, CommonOpts& opt) {
    cmd.add_option("--config", opt.config_path, "INI config file");
    cmd.add_option("--preset", opt.preset,
                   "Preset name: a file path, <dir>/<name>[.preset] under the preset "
                   "directory, or a builtin scenario kind");
    cmd.add_option("-O,--override", opt.overrides,
                   "Config override as section.key=value; repeatable, wins over the file");
    opt.seed_option = cmd.add_option("--seed", opt.seed, "Base seed override");
    cmd.add_option("--out", opt.out_dir, "Directory for output artifacts");
}

std::string preset_dir() {
    if (const char* d = std::getenv("PLANGUARD_PRESET_DIR")) return d;
    return "presets";
}

Config load_preset(const std::string& name) {
    std::error_code ec;
    if (fs::is_regular_file(name, ec)) return Config::parse_file(name);
    const std::string dir = preset_dir();
    for (const std::string& candidate : {dir + "/" + name, dir + "/" + name + ".preset"})
        if (fs::is_regular_file(candidate, ec)) return Config::parse_file(candidate);
    if (name == "duel") return Config::parse_text(kBuiltinDuel, "builtin:duel");
    if (name == "patchgrid") return Config::parse_text(kBuiltinPatch, "builtin:patchgrid");
    throw ConfigError("unknown preset '" + name + "' (searched " + dir + ")");
}

Config load_base_config(const CommonOpts& opt) {
    if (!opt.config_path.empty() && !opt.preset.empty())
        throw ConfigError("give either --config or --preset, not both");
    Config cfg;
    if (!opt.config_path.empty())
        cfg = Config::parse_file(opt.config_path);
    else if (!opt.preset.empty())
        cfg = load_preset(opt.preset);
    else
        throw ConfigError("a --config file or --preset name is required");
    for (const auto& o : opt.overrides) cfg.apply_override(o);
    return cfg;
}

void write_artifact(const CommonOpts& opt, const std::string& name,
                    const std::string& content) {
    fs::create_directories(opt.out_dir);
    write_text_file((fs::path(opt.out_dir) / name).string(), content);
}

json record_to_json(const TriggerRecord& rec) {
    json seq = json::array();
    for (const Action& a : rec.action_sequence) seq.push_back(a);
    return json{{"sequence", std::move(seq)},
                {"score", rec.score},
                {"anomaly_index", rec.anomaly_index},
                {"validated", rec.validated},
                {"rule", rec.rule_id},
                {"replay_seeds", rec.replay_seeds}};
}

// Environment, policy under test, and detector settings for either scenario
// kind, erased to the base interfaces.
struct BuiltScenario {
    std::shared_ptr<Environment> env;
    std::shared_ptr<const Policy> trojan;
    DetectorConfig detector;
    std::uint64_t seed_salt = 0;  // per-seed derivation salt, matches the bench sweeps
    int bench_seeds = 0;
};

BuiltScenario build_for(const LoadedScenario& sc) {
    BuiltScenario out;
    if (sc.kind == "duel") {
        const BuiltDuel built = build_duel(sc.duel);
        out.env = built.env;
        out.trojan = built.trojan;
        out.detector = built.detector;
        out.seed_salt = 0xbe5cULL;
        out.bench_seeds = sc.duel.seeds;
    } else {
        const BuiltPatch built = build_patch(sc.patch);
        out.env = built.env;
        out.trojan = built.trojan;
        out.detector = built.detector;
        out.seed_salt = 0x9cbeULL;
        out.bench_seeds = sc.patch.seeds;
    }
    return out;
}

int cmd_detect(const CommonOpts& opt) {
    Config cfg = load_base_config(opt);
    const LoadedScenario sc = load_scenario(cfg);
    cfg.reject_unknown_keys();

    const std::uint64_t base = opt.seed_set() ? opt.seed : sc.seed;
    const BuiltScenario built = build_for(sc);

    std::vector<std::uint64_t> run_seeds;
    if (opt.seed_set())
        run_seeds.push_back(base);
    else
        for (int i = 0; i < built.bench_seeds; ++i)
            run_seeds.push_back(derive_seed(base, built.seed_salt, i));

    std::vector<DetectionOutcome> outcomes(run_seeds.size());
    std::vector<RunReport> reports(run_seeds.size());
    parallel_indices(static_cast<int>(run_seeds.size()), worker_count(), [&](int i) {
        const auto idx = static_cast<std::size_t>(i);
        outcomes[idx] =
            run_detection(*built.env, *built.trojan, built.detector, run_seeds[idx]);
        reports[idx] = report_from_outcome(run_seeds[idx], built.detector, outcomes[idx]);
    });

    json runs = json::array();
    for (std::size_t i = 0; i < run_seeds.size(); ++i) {
        json records = json::array();
        for (const auto& rec : outcomes[i].records) records.push_back(record_to_json(rec));
        runs.push_back(json{{"seed", run_seeds[i]}, {"records", std::move(records)}});
    }
    const json doc{{"tool", "planguard"},
                   {"command", "detect"},
                   {"config", cfg.resolved_text()},
                   {"seed", base},
                   {"runs", std::move(runs)}};
    write_artifact(opt, "records.json", doc.dump(2) + "\n");
    write_artifact(opt, "final_table.csv",
                   render_final_table({summarize_reports(sc.kind, reports)}));
    write_artifact(opt, "tdsr_curve.csv", render_tdsr_curve(reports));

    int triggered = 0;
    for (const auto& rep : reports)
        if (rep.validated_triggers > 0) ++triggered;
    std::cout << "detect: " << triggered << "/" << reports.size()
              << " seeds validated a trigger; artifacts in " << opt.out_dir << "\n";
    return triggered > 0 ? 0 : 2;
}

int cmd_mitigate(const CommonOpts& opt) {
    Config cfg = load_base_config(opt);
    const LoadedScenario sc = load_scenario(cfg);
    cfg.reject_unknown_keys();
    if (sc.kind != "duel")
        throw ConfigError("mitigate: recovery runs are defined for duel scenarios");

    const std::uint64_t seed = opt.seed_set() ? opt.seed : sc.seed;
    const BuiltDuel built = build_duel(sc.duel);
    const DetectionOutcome out =
        run_detection(*built.env, *built.trojan, built.detector, seed);

    const TriggerRecord* top = nullptr;
    for (const auto& rec : out.records)
        if (rec.validated) {
            top = &rec;
            break;
        }
    if (top == nullptr) {
        std::cout << "mitigate: no validated trigger at seed " << seed
                  << "; nothing to guard\n";
        return 2;
    }

    const RecoveryResult rec = mitigation_recovery(
        *built.env, *built.trojan, *built.benign_adversary, out.tree, top,
        sc.duel.mitigation, sc.duel.recovery_episodes, derive_seed(seed, 0x4ecULL));

    std::string summary =
        "benign_return,unguarded_return,mitigated_return,benign_win_rate,"
        "unguarded_win_rate,mitigated_win_rate,benign_streams_identical,interventions\n";
    summary += format_double(rec.benign_return);
    summary += ',' + format_double(rec.trojan_return);
    summary += ',' + format_double(rec.mitigated_return);
    summary += ',' + format_double(rec.benign_win_rate);
    summary += ',' + format_double(rec.unguarded_win_rate);
    summary += ',' + format_double(rec.mitigated_win_rate);
    summary += rec.benign_streams_identical ? ",1" : ",0";
    summary += ',' + std::to_string(rec.interventions.size());
    summary += '\n';
    write_artifact(opt, "recovery.csv", summary);
    write_artifact(opt, "interventions.csv", render_interventions(rec.interventions));

    std::cout << "mitigate: returns benign " << format_double(rec.benign_return)
              << ", unguarded " << format_double(rec.trojan_return) << ", guarded "
              << format_double(rec.mitigated_return) << "; "
              << rec.interventions.size() << " interventions; artifacts in "
              << opt.out_dir << "\n";
    return 0;
}

int cmd_screen(const CommonOpts& opt) {
    Config cfg = load_base_config(opt);
    const LoadedScenario sc = load_scenario(cfg);
    const std::string model = cfg.get_string("screen.model", "trojan");
    cfg.reject_unknown_keys();
    if (sc.kind != "patchgrid")
        throw ConfigError("screen: patch localization is defined for patchgrid scenarios");
    if (model != "trojan" && model != "benign")
        throw ConfigError("screen.model: expected trojan or benign, got '" + model + "'");

    const std::uint64_t seed = opt.seed_set() ? opt.seed : sc.seed;
    const BuiltPatch built = build_patch(sc.patch);
    PatchMeanPolicy benign;
    const FramePolicy* probe = built.frame_policy.get();
    if (model == "benign") probe = &benign;

    const ScreenOutcome out = screen(*built.env, *probe, built.screen, seed);

    json doc{{"tool", "planguard"},
             {"command", "screen"},
             {"config", cfg.resolved_text()},
             {"seed", seed},
             {"frames_seen", out.votes.frames_seen},
             {"frames_valid", out.votes.frames_valid},
             {"votes", out.votes.counts}};
    if (out.prior)
        doc["prior"] = json{{"cell", out.prior->cell},
                            {"vote_ratio", out.prior->vote_ratio},
                            {"average_patch", out.prior->average_patch}};
    else
        doc["prior"] = nullptr;
    write_artifact(opt, "screen.json", doc.dump(2) + "\n");

    if (out.prior) {
        std::cout << "screen: located cell " << out.prior->cell << " with vote ratio "
                  << format_double(out.prior->vote_ratio) << "; artifacts in "
                  << opt.out_dir << "\n";
        return 0;
    }
    std::cout << "screen: no cell flips the policy; artifacts in " << opt.out_dir << "\n";
    return 2;
}

int cmd_bench(const CommonOpts& opt) {
    Config cfg = load_base_config(opt);
    const LoadedScenario sc = load_scenario(cfg);
    cfg.reject_unknown_keys();
    const std::uint64_t base = opt.seed_set() ? opt.seed : sc.seed;

    std::vector<FinalTableRow> rows;
    if (sc.kind == "duel") {
        const std::vector<RunReport> tree = duel_detection_bench(sc.duel, false, base);
        const std::vector<RunReport> uniform = duel_detection_bench(sc.duel, true, base);
        rows.push_back(summarize_reports("duel", tree));
        rows.push_back(summarize_reports("duel-uniform-baseline", uniform));
        write_artifact(opt, "tdsr_curve.csv", render_tdsr_curve(tree));
        write_artifact(opt, "baseline_curve.csv", render_tdsr_curve(uniform));
    } else {
        const std::vector<RunReport> reports = patch_detection_bench(sc.patch, base);
        rows.push_back(summarize_reports("patchgrid", reports));
        write_artifact(opt, "tdsr_curve.csv", render_tdsr_curve(reports));
    }
    write_artifact(opt, "final_table.csv", render_final_table(rows));

    for (const auto& row : rows)
        std::cout << "bench: " << row.label << " tdsr " << format_double(row.tdsr)
                  << " over " << row.seeds << " seeds\n";
    std::cout << "bench: artifacts in " << opt.out_dir << "\n";
    return 0;
}

int cmd_replay(const std::string& records_path) {
    std::ifstream in(records_path, std::ios::binary);
    if (!in) throw UsageError("cannot open records file: " + records_path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("records file is not valid JSON: " + std::string(e.what()));
    }

    Config cfg;
    std::vector<json> runs;
    try {
        cfg = Config::parse_text(doc.at("config").get<std::string>(),
                                 records_path + "#config");
        for (const auto& run : doc.at("runs")) runs.push_back(run);
    } catch (const json::exception& e) {
        throw UsageError("records file is missing fields: " + std::string(e.what()));
    }
    if (runs.empty()) {
        std::cerr << "replay: records file has no runs\n";
        return 1;
    }

    const LoadedScenario sc = load_scenario(cfg);
    cfg.get_string("screen.model", "trojan");
    cfg.reject_unknown_keys();
    const BuiltScenario built = build_for(sc);
    const ValidationRule& rule = built.detector.rule;

    int checked = 0;
    int mismatches = 0;
    for (const auto& run : runs) {
        const auto run_seed = run.at("seed").get<std::uint64_t>();
        std::vector<double> reference;
        long long counter = 0;
        if (rule.kind == ValidationRule::Kind::MadReturn)
            reference = detail::collect_reference_returns(*built.env, *built.trojan,
                                                          built.detector, run_seed, &counter);
        for (const auto& rec : run.at("records")) {
            const auto sequence = rec.at("sequence").get<std::vector<Action>>();
            const auto replay_seeds =
                rec.at("replay_seeds").get<std::vector<std::uint64_t>>();

            double score = -std::numeric_limits<double>::infinity();
            double index = -std::numeric_limits<double>::infinity();
            bool validated = false;
            for (const std::uint64_t replay_seed : replay_seeds) {
                const Trajectory traj = detail::play_episode(
                    *built.env, *built.trojan, &sequence, nullptr, replay_seed, &counter);
                const double value =
                    detail::discounted_negated_return(traj, built.detector.gamma);
                score = std::max(score, value);
                if (rule.kind == ValidationRule::Kind::MadReturn) {
                    const auto [ix, accepted] =
                        validate_mad(value, reference, rule.scale_c, rule.multiplier_k);
                    index = std::max(index, ix);
                    if (accepted) validated = true;
                } else if (validate_event(*built.env, traj, rule.event_id)) {
                    validated = true;
                }
            }
            if (rule.kind == ValidationRule::Kind::EventBased) index = 0.0;

            const bool stored_validated = rec.at("validated").get<bool>();
            const double stored_score = rec.at("score").get<double>();
            const double stored_index = rec.at("anomaly_index").get<double>();
            const bool ok = validated == stored_validated &&
                            std::abs(score - stored_score) <= 1e-9 &&
                            std::abs(index - stored_index) <= 1e-9;
            if (!ok) {
                ++mismatches;
                std::cerr << "replay mismatch at seed " << run_seed << ": stored verdict "
                          << (stored_validated ? "validated" : "rejected") << " score "
                          << format_double(stored_score) << ", replayed "
                          << (validated ? "validated" : "rejected") << " score "
                          << format_double(score) << "\n";
            }
            ++checked;
        }
    }
    std::cout << "replay: " << checked << " records checked, " << mismatches
              << " mismatches\n";
    return mismatches == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    std::setlocale(LC_ALL, "C");
    CLI::App app{"Planner Trojan trigger discovery, mitigation, and localization"};
    app.require_subcommand(1);

    CommonOpts detect_opt;
    CLI::App* detect_cmd =
        app.add_subcommand("detect", "Search for trigger sequences and validate them");
    add_source_options(*detect_cmd, detect_opt);

    CommonOpts mitigate_opt;
    CLI::App* mitigate_cmd = app.add_subcommand(
        "mitigate", "Detect, then compare guarded and unguarded episode returns");
    add_source_options(*mitigate_cmd, mitigate_opt);

    CommonOpts screen_opt;
    CLI::App* screen_cmd =
        app.add_subcommand("screen", "Localize an observation patch trigger by inpainting");
    add_source_options(*screen_cmd, screen_opt);

    CommonOpts bench_opt;
    CLI::App* bench_cmd =
        app.add_subcommand("bench", "Run the detection benchmark sweep for a scenario");
    add_source_options(*bench_cmd, bench_opt);

    std::string records_path;
    CLI::App* replay_cmd = app.add_subcommand(
        "replay", "Re-run the validation replays stored in a records file");
    replay_cmd->add_option("records", records_path, "Path to records.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(detect_cmd)) return cmd_detect(detect_opt);
        if (app.got_subcommand(mitigate_cmd)) return cmd_mitigate(mitigate_opt);
        if (app.got_subcommand(screen_cmd)) return cmd_screen(screen_opt);
        if (app.got_subcommand(bench_cmd)) return cmd_bench(bench_opt);
        if (app.got_subcommand(replay_cmd)) return cmd_replay(records_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
