// vigil: probe-based driver impairment monitoring over synthetic cohorts.
//
// Subcommands mirror the deployment workflow: simulate a cohort, calibrate
// per-driver baselines, run checkups on stored sessions, or do the whole
// study in one go and render the results table. Logs go to stderr, data to
// stdout or files, and every command is deterministic given flags + files.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vigil/ensemble.hpp"
#include "vigil/errors.hpp"
#include "vigil/evalharness.hpp"
#include "vigil/learners/model_io.hpp"
#include "vigil/telemetry.hpp"

namespace fs = std::filesystem;
using namespace vigil;

namespace {

bool g_verbose = false;

void log_line(const std::string& msg) {
    if (g_verbose) std::cerr << "vigil: " << msg << '\n';
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
    int jobs = -1; // -1 = keep config value
};

// Config file first, then flags on top (flags win).
evalharness::StudyConfig resolve_config(const CommonFlags& f) {
    evalharness::StudyConfig cfg;
    if (!f.config_path.empty()) {
        try {
            cfg = evalharness::load_study_config(f.config_path);
        } catch (const ParseError& e) {
            // A malformed config file is a configuration problem, not bad data.
            throw ConfigError(e.what());
        }
    }
    if (f.seed_set) cfg.master_seed = f.seed;
    if (f.jobs >= 0) cfg.jobs = f.jobs;
    evalharness::validate_config(cfg);
    return cfg;
}

int cmd_simulate(const CommonFlags& f) {
    const auto cfg = resolve_config(f);
    log_line("simulating " + std::to_string(cfg.n_subjects) + " subjects into " + f.out_dir);
    evalharness::simulate_cohort(cfg, f.out_dir);
    log_line("wrote sessions/ and study_config.json");
    return 0;
}

int cmd_calibrate(const CommonFlags& f) {
    log_line("calibrating drivers under " + f.out_dir);
    evalharness::calibrate_cohort(f.out_dir);
    log_line("wrote models/");
    return 0;
}

int cmd_study(const CommonFlags& f) {
    const auto cfg = resolve_config(f);
    log_line("running study: " + std::to_string(cfg.n_subjects) + " subjects, seed " +
             std::to_string(cfg.master_seed) + ", jobs " + std::to_string(cfg.jobs));
    const auto table = evalharness::run_study(cfg, f.out_dir);
    std::cout << evalharness::render_report_text(table);
    log_line("wrote " + (fs::path(f.out_dir) / "report.csv").string());
    return 0;
}

int cmd_report(const CommonFlags& f) {
    const auto table = evalharness::rebuild_report(f.out_dir);
    std::cout << evalharness::render_report_text(table);
    return 0;
}

// Classifies one stored session against its driver's calibrated models and
// prints the verdict CSV (all three channels) to stdout.
int cmd_checkup(const CommonFlags& f, const std::string& session_arg) {
    fs::path manifest = session_arg;
    if (fs::is_directory(manifest)) manifest /= "manifest.json";
    const auto session = telemetry::read_session(manifest);
    const auto& subject = session.manifest.subject_id;
    log_line("session " + subject + " shift " + std::to_string(session.manifest.shift_index) +
             ", " + std::to_string(session.trains.size()) + " checkups");

    const auto cfg = evalharness::load_study_config(fs::path(f.out_dir) / "study_config.json");
    const fs::path models = fs::path(f.out_dir) / "models";
    const char* stream_tags[2] = {"native", "cloud"};
    const telemetry::StreamId streams[2] = {telemetry::StreamId::Native,
                                            telemetry::StreamId::Cloud};

    auto fvs = evalharness::session_features(session);
    std::vector<ensemble::CheckupVerdict> per_stream[2];
    for (size_t i = 0; i < 2; ++i) {
        const fs::path base_path = models / (subject + "_" + stream_tags[i] + "_baseline.json");
        const fs::path gbt_path = models / (subject + "_" + stream_tags[i] + "_gbt.json");
        if (!fs::exists(base_path) || !fs::exists(gbt_path))
            throw MissingBaseline("no calibrated models for " + subject + " (" + stream_tags[i] +
                                  ") under " + models.string() + "; run calibrate first");
        const auto baseline = ensemble::load_baseline(base_path);
        const auto population = learners::load_gbt(gbt_path);
        const auto& stream_fvs = fvs[streams[i]];
        for (size_t k = 0; k < stream_fvs.size(); ++k) {
            auto v = ensemble::run_checkup(stream_fvs[k], baseline, population);
            v.subject_id = subject;
            v.shift_index = session.manifest.shift_index;
            v.checkup_index = static_cast<int>(k);
            v.channel = i == 0 ? ensemble::ChannelId::Native : ensemble::ChannelId::Cloud;
            // Onset reconstructed from the regular checkup cadence; stored
            // sessions carry no wall-clock.
            v.t = telemetry::q9(static_cast<double>(k) * cfg.checkup_period_s);
            v.severity = session.manifest.checkup_severities[k];
            v.truth_impaired = v.severity > cfg.truth_lambda;
            v.condition = session.manifest.condition;
            per_stream[i].push_back(std::move(v));
        }
    }
    const auto fused = ensemble::fuse_streams(per_stream[0], per_stream[1]);

    std::cout << evalharness::verdict_csv_header() << '\n';
    for (const auto& group : {per_stream[0], per_stream[1], fused})
        for (const auto& v : group) std::cout << evalharness::verdict_csv_row(v) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"probe-based driver impairment monitoring on synthetic cohorts"};
    app.require_subcommand(1);
    app.add_flag("--verbose", g_verbose, "log progress to stderr");

    CommonFlags flags;
    std::string session_arg;

    auto add_common = [&](CLI::App* cmd, bool needs_seed, bool takes_config) {
        cmd->add_option("--out", flags.out_dir, "study directory (artifact root)")->required();
        if (takes_config)
            cmd->add_option("--config", flags.config_path, "JSON study config overlaying defaults");
        if (needs_seed) {
            cmd->add_option("--seed", flags.seed, "master seed (required: no wall-clock default)")
                ->required();
            flags.seed_set = true;
        }
        cmd->add_option("--jobs", flags.jobs, "worker threads (0 = hardware default)");
    };

    add_common(app.add_subcommand("simulate", "generate cohort session files"), true, true);
    add_common(app.add_subcommand("calibrate", "train per-driver baselines from sessions/"),
               false, false);
    auto* checkup =
        app.add_subcommand("checkup", "classify one stored session, verdict CSV to stdout");
    add_common(checkup, false, false);
    checkup->add_option("--session", session_arg, "session directory or manifest.json path")
        ->required();
    add_common(app.add_subcommand("study", "full pipeline: simulate, calibrate, classify, report"),
               true, true);
    add_common(app.add_subcommand("report", "re-render the table of an existing study"), false,
               false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // help text, exit 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "vigil: " << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 2;
    }

    try {
        if (app.got_subcommand("simulate")) return cmd_simulate(flags);
        if (app.got_subcommand("calibrate")) return cmd_calibrate(flags);
        if (app.got_subcommand("checkup")) return cmd_checkup(flags, session_arg);
        if (app.got_subcommand("study")) return cmd_study(flags);
        if (app.got_subcommand("report")) return cmd_report(flags);
    } catch (const ConfigError& e) {
        std::cerr << "vigil: config error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "vigil: io error: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "vigil: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
