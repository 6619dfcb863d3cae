#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vigil/ensemble.hpp"
#include "vigil/errors.hpp"
#include "vigil/synthdriver.hpp"

namespace vigil::evalharness {

// Full synthetic-study recipe. Every field has a desk-scale default; a
// JSON config file may override any of them, and CLI flags override the
// file. The table is a pure function of (config, master_seed).
struct StudyConfig {
    int n_subjects = 31;
    int shifts_per_subject = 10;   // regular shifts; the first two are sober calibration
    int calibration_shifts = 2;
    double shift_hours = 8.0;
    double checkup_period_s = 1800.0; // regular shifts
    double tot_period_s = 300.0;      // time-on-task sessions

    // Scenario membership probabilities (echoing the uneven per-scenario
    // subject counts of the field study this mirrors).
    double p_alcohol = 0.6;
    double p_thc = 0.45;
    double p_fatigue = 0.08;
    double p_tot = 0.3;
    int alcohol_shifts = 3;
    int thc_shifts = 3;
    int max_fatigue_shifts = 2;
    int max_tot_shifts = 3; // members run 1..max sessions

    double severity_scale = 1.0; // 0 turns every scenario sober
    double truth_lambda = 0.2;   // checkup truth: impaired iff severity > this

    synthdriver::EffectDeltas deltas;
    ensemble::CalibConfig calib;          // nu etc. for the one-class trio
    learners::GbtConfig gbt;              // population + time-on-task models
    int tot_min_checkups = 2;             // per window, else the subject is excluded
    int tot_high_data_checkups = 12;      // per window, "high amount of data" row

    uint64_t master_seed = 0;
    int jobs = 1;
    bool write_artifacts = true; // sessions/, features/, models/, verdicts/
};

void validate_config(const StudyConfig& c);

// Overlays a JSON config file onto the defaults. Unknown keys are
// rejected (ConfigError) so typos cannot silently revert to defaults.
StudyConfig load_study_config(const std::filesystem::path& path, StudyConfig base = {});

enum class RowId {
    Overall = 0,
    BaselineFp,
    Alcohol,
    Thc,
    Fatigue,
    TimeOnTaskAll,
    TimeOnTaskHighData,
};
inline constexpr int kRowCount = 7;
inline constexpr int kColCount = 3; // Native, Cloud, Fused
std::string to_string(RowId r);

// One table cell: n is decidable subjects (checkup-contributing subjects
// for the FP row); accuracy/fp are absent where not applicable.
struct Cell {
    int n = 0;
    std::optional<double> accuracy;
    std::optional<double> fp;
};

struct ResultsTable {
    std::array<std::array<Cell, kColCount>, kRowCount> cells{};
    Cell& at(RowId r, ensemble::ChannelId c) { return cells[int(r)][int(c)]; }
    const Cell& at(RowId r, ensemble::ChannelId c) const { return cells[int(r)][int(c)]; }
};

bool operator==(const Cell& a, const Cell& b);
bool operator==(const ResultsTable& a, const ResultsTable& b);

// accuracy = Correct/(Correct+Wrong) over non-omitted results;
// NoDecidableSubjects when every subject is omitted or the list is empty.
double compute_accuracy(const std::vector<ensemble::SubjectResult>& results);
// fraction of truth-sober checkups whose verdict is Impaired.
double compute_fp_rate(const std::vector<ensemble::CheckupVerdict>& verdicts);

// Runs the whole protocol: simulate sober calibration shifts, calibrate
// per driver and stream, train LOSO population models, simulate scenario
// shifts and time-on-task sessions, run checkups on both streams, fuse,
// aggregate, and render the table. With write_artifacts, dumps sessions/,
// features/, models/, verdicts/, report.csv and report.txt under out_dir.
ResultsTable run_study(const StudyConfig& config, const std::filesystem::path& out_dir);

// Rebuilds the table from the verdict CSVs of a previous run; the result
// is identical to the table that run wrote.
ResultsTable rebuild_report(const std::filesystem::path& study_dir);

// Stage entry points reused by the CLI. simulate_cohort writes sessions/
// and study_config.json without classifying anything; calibrate_cohort
// reads the sessions back, calibrates every driver on its calibration
// shifts, trains the LOSO population models and writes models/.
void simulate_cohort(const StudyConfig& config, const std::filesystem::path& out_dir);
void calibrate_cohort(const std::filesystem::path& study_dir);

// Feature vectors per stream for one stored session, checkup-indexed.
std::map<telemetry::StreamId, std::vector<features::FeatureVector>>
session_features(const telemetry::Session& s);

// Verdict CSV plumbing shared by run_study, rebuild_report and the CLI
// checkup command. Rows are line-per-verdict with fmt9 floats, so a parse
// round-trip reproduces the verdicts bit-exactly.
std::string verdict_csv_header();
std::string verdict_csv_row(const ensemble::CheckupVerdict& v);
std::vector<ensemble::CheckupVerdict> parse_verdicts_csv(const std::filesystem::path& path);

std::string render_report_text(const ResultsTable& t);
void write_report_csv(const ResultsTable& t, const std::filesystem::path& path);
ResultsTable parse_report_csv(const std::filesystem::path& path);

} // namespace vigil::evalharness
