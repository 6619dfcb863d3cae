#include "vigil/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "vigil/learners/model_io.hpp"
#include "vigil/parallel.hpp"
#include "vigil/probe.hpp"
#include "vigil/rng.hpp"

namespace vigil::evalharness {

namespace fs = std::filesystem;
using nlohmann::json;
using telemetry::Condition;
using telemetry::StreamId;
using telemetry::fmt9;
using telemetry::q9;

namespace {

constexpr uint64_t L(std::string_view s) { return Rng::label(s); }
uint64_t u(int v) { return static_cast<uint64_t>(v); }

// A derived stream's first draw makes an independent child seed for APIs
// that take uint64 seeds and derive their own labeled streams from them.
uint64_t child_seed(uint64_t master, std::initializer_list<uint64_t> path) {
    return Rng::derive(master, path).next_u64();
}

std::string subject_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%02d", index + 1);
    return buf;
}

double scaled_lambda(double base, double scale) {
    return q9(std::clamp(base * scale, 0.0, 1.0));
}

// Re-throws the in-flight exception with a location prefix, preserving its
// class so exit-code mapping and tests still see the precise failure mode.
[[noreturn]] void add_context(const std::string& ctx) {
    try {
        throw;
    } catch (const TooFewCheckups& e) {
        throw TooFewCheckups(ctx + ": " + e.what());
    } catch (const TooFewPoints& e) {
        throw TooFewPoints(ctx + ": " + e.what());
    } catch (const InsufficientCheckups& e) {
        throw InsufficientCheckups(ctx + ": " + e.what());
    } catch (const DegenerateLabels& e) {
        throw DegenerateLabels(ctx + ": " + e.what());
    } catch (const NoDecidableSubjects& e) {
        throw NoDecidableSubjects(ctx + ": " + e.what());
    } catch (const ConvergenceFailure& e) {
        throw ConvergenceFailure(ctx + ": " + e.what());
    } catch (const MissingFile& e) {
        throw MissingFile(ctx + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(ctx + ": " + e.what());
    } catch (const ParseError& e) {
        throw ParseError(ctx + ": " + e.what());
    } catch (const InvariantViolation& e) {
        throw InvariantViolation(ctx + ": " + e.what());
    } catch (const EmptySession& e) {
        throw EmptySession(ctx + ": " + e.what());
    } catch (const EmptyInput& e) {
        throw EmptyInput(ctx + ": " + e.what());
    } catch (const KeyMismatch& e) {
        throw KeyMismatch(ctx + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
}

// OpenMP regions must not leak exceptions; capture per item and re-raise
// the lowest index so the surfaced error is schedule-independent.
template <typename Fn>
void parallel_items(size_t n, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    parallel_for(static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t i) {
        try {
            fn(static_cast<size_t>(i));
        } catch (...) {
            errors[static_cast<size_t>(i)] = std::current_exception();
        }
    });
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace

// ---------------------------------------------------------------------------
// Config

void validate_config(const StudyConfig& c) {
    if (c.n_subjects < 1) throw ConfigError("n_subjects must be >= 1");
    if (c.calibration_shifts < 1) throw ConfigError("calibration_shifts must be >= 1");
    if (c.shifts_per_subject <= c.calibration_shifts)
        throw ConfigError("shifts_per_subject must exceed calibration_shifts");
    if (c.shifts_per_subject > 10)
        throw ConfigError("shifts_per_subject above 10 breaks the shift_index range");
    if (!(c.shift_hours > 0.0)) throw ConfigError("shift_hours must be positive");
    if (!(c.checkup_period_s > 0.0) || !(c.tot_period_s > 0.0))
        throw ConfigError("checkup periods must be positive");
    for (double p : {c.p_alcohol, c.p_thc, c.p_fatigue, c.p_tot})
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("membership probabilities must be in [0,1]");
    if (c.alcohol_shifts < 0 || c.thc_shifts < 0 || c.max_fatigue_shifts < 0)
        throw ConfigError("scenario shift counts must be >= 0");
    if (c.max_tot_shifts < 1) throw ConfigError("max_tot_shifts must be >= 1");
    if (!(c.severity_scale >= 0.0)) throw ConfigError("severity_scale must be >= 0");
    if (!(c.truth_lambda >= 0.0)) throw ConfigError("truth_lambda must be >= 0");
    if (c.tot_min_checkups < 1) throw ConfigError("tot_min_checkups must be >= 1");
    if (c.tot_high_data_checkups < c.tot_min_checkups)
        throw ConfigError("tot_high_data_checkups must be >= tot_min_checkups");
    if (!(c.calib.nu > 0.0 && c.calib.nu <= 1.0)) throw ConfigError("calib.nu must be in (0,1]");
    if (c.calib.n_trees < 1) throw ConfigError("calib.n_trees must be >= 1");
    if (c.gbt.n_rounds < 1 || c.gbt.max_depth < 0 || !(c.gbt.learning_rate > 0.0) ||
        !(c.gbt.l2_lambda >= 0.0))
        throw ConfigError("gbt config out of range");
    if (c.jobs < 0) throw ConfigError("jobs must be >= 0");
}

namespace {

double want_double(const json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
}

int want_int(const json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
    return v.get<int>();
}

void apply_deltas(const json& j, synthdriver::EffectDeltas& d) {
    if (!j.is_object()) throw ConfigError("'deltas' must be an object");
    for (const auto& [key, v] : j.items()) {
        if (key == "latency_ms") d.latency_ms = want_double(v, key);
        else if (key == "hit") d.hit = want_double(v, key);
        else if (key == "pupil_frac") d.pupil_frac = want_double(v, key);
        else if (key == "blink_per_min") d.blink_per_min = want_double(v, key);
        else if (key == "anticipation_frac") d.anticipation_frac = want_double(v, key);
        else throw ConfigError("unknown config key 'deltas." + key + "'");
    }
}

void apply_calib(const json& j, ensemble::CalibConfig& c) {
    if (!j.is_object()) throw ConfigError("'calib' must be an object");
    for (const auto& [key, v] : j.items()) {
        if (key == "nu") c.nu = want_double(v, key);
        else if (key == "gamma") c.gamma = want_double(v, key);
        else if (key == "n_trees") c.n_trees = want_int(v, key);
        else if (key == "psi") c.psi = want_int(v, key);
        else if (key == "lof_k") c.lof_k = want_int(v, key);
        else if (key == "seed") c.seed = v.get<uint64_t>();
        else throw ConfigError("unknown config key 'calib." + key + "'");
    }
}

void apply_gbt(const json& j, learners::GbtConfig& c) {
    if (!j.is_object()) throw ConfigError("'gbt' must be an object");
    for (const auto& [key, v] : j.items()) {
        if (key == "n_rounds") c.n_rounds = want_int(v, key);
        else if (key == "max_depth") c.max_depth = want_int(v, key);
        else if (key == "learning_rate") c.learning_rate = want_double(v, key);
        else if (key == "l2_lambda") c.l2_lambda = want_double(v, key);
        else throw ConfigError("unknown config key 'gbt." + key + "'");
    }
}

json config_to_json(const StudyConfig& c) {
    return json{{"n_subjects", c.n_subjects},
                {"shifts_per_subject", c.shifts_per_subject},
                {"calibration_shifts", c.calibration_shifts},
                {"shift_hours", c.shift_hours},
                {"checkup_period_s", c.checkup_period_s},
                {"tot_period_s", c.tot_period_s},
                {"p_alcohol", c.p_alcohol},
                {"p_thc", c.p_thc},
                {"p_fatigue", c.p_fatigue},
                {"p_tot", c.p_tot},
                {"alcohol_shifts", c.alcohol_shifts},
                {"thc_shifts", c.thc_shifts},
                {"max_fatigue_shifts", c.max_fatigue_shifts},
                {"max_tot_shifts", c.max_tot_shifts},
                {"severity_scale", c.severity_scale},
                {"truth_lambda", c.truth_lambda},
                {"deltas",
                 {{"latency_ms", c.deltas.latency_ms},
                  {"hit", c.deltas.hit},
                  {"pupil_frac", c.deltas.pupil_frac},
                  {"blink_per_min", c.deltas.blink_per_min},
                  {"anticipation_frac", c.deltas.anticipation_frac}}},
                {"calib",
                 {{"nu", c.calib.nu},
                  {"gamma", c.calib.gamma},
                  {"n_trees", c.calib.n_trees},
                  {"psi", c.calib.psi},
                  {"lof_k", c.calib.lof_k},
                  {"seed", c.calib.seed}}},
                {"gbt",
                 {{"n_rounds", c.gbt.n_rounds},
                  {"max_depth", c.gbt.max_depth},
                  {"learning_rate", c.gbt.learning_rate},
                  {"l2_lambda", c.gbt.l2_lambda}}},
                {"tot_min_checkups", c.tot_min_checkups},
                {"tot_high_data_checkups", c.tot_high_data_checkups},
                {"master_seed", c.master_seed},
                {"jobs", c.jobs},
                {"write_artifacts", c.write_artifacts}};
}

void save_study_config(const StudyConfig& c, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << config_to_json(c).dump(2) << '\n';
    if (!out) throw IoError("short write to " + path.string());
}

} // namespace

StudyConfig load_study_config(const fs::path& path, StudyConfig base) {
    std::ifstream in(path);
    if (!in) throw MissingFile("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(path.string() + ": config root must be an object");

    for (const auto& [key, v] : doc.items()) {
        try {
            if (key == "n_subjects") base.n_subjects = want_int(v, key);
            else if (key == "shifts_per_subject") base.shifts_per_subject = want_int(v, key);
            else if (key == "calibration_shifts") base.calibration_shifts = want_int(v, key);
            else if (key == "shift_hours") base.shift_hours = want_double(v, key);
            else if (key == "checkup_period_s") base.checkup_period_s = want_double(v, key);
            else if (key == "tot_period_s") base.tot_period_s = want_double(v, key);
            else if (key == "p_alcohol") base.p_alcohol = want_double(v, key);
            else if (key == "p_thc") base.p_thc = want_double(v, key);
            else if (key == "p_fatigue") base.p_fatigue = want_double(v, key);
            else if (key == "p_tot") base.p_tot = want_double(v, key);
            else if (key == "alcohol_shifts") base.alcohol_shifts = want_int(v, key);
            else if (key == "thc_shifts") base.thc_shifts = want_int(v, key);
            else if (key == "max_fatigue_shifts") base.max_fatigue_shifts = want_int(v, key);
            else if (key == "max_tot_shifts") base.max_tot_shifts = want_int(v, key);
            else if (key == "severity_scale") base.severity_scale = want_double(v, key);
            else if (key == "truth_lambda") base.truth_lambda = want_double(v, key);
            else if (key == "deltas") apply_deltas(v, base.deltas);
            else if (key == "calib") apply_calib(v, base.calib);
            else if (key == "gbt") apply_gbt(v, base.gbt);
            else if (key == "tot_min_checkups") base.tot_min_checkups = want_int(v, key);
            else if (key == "tot_high_data_checkups") base.tot_high_data_checkups = want_int(v, key);
            else if (key == "master_seed") base.master_seed = v.get<uint64_t>();
            else if (key == "jobs") base.jobs = want_int(v, key);
            else if (key == "write_artifacts") base.write_artifacts = v.get<bool>();
            else throw ConfigError("unknown config key '" + key + "'");
        } catch (const json::exception& e) {
            throw ConfigError(path.string() + ": key '" + key + "': " + e.what());
        }
    }
    validate_config(base);
    return base;
}

// ---------------------------------------------------------------------------
// Table plumbing

std::string to_string(RowId r) {
    switch (r) {
        case RowId::Overall: return "Overall";
        case RowId::BaselineFp: return "BaselineFp";
        case RowId::Alcohol: return "Alcohol";
        case RowId::Thc: return "THC";
        case RowId::Fatigue: return "Fatigue";
        case RowId::TimeOnTaskAll: return "TimeOnTaskAll";
        case RowId::TimeOnTaskHighData: return "TimeOnTaskHighData";
    }
    return "Overall";
}

bool operator==(const Cell& a, const Cell& b) {
    return a.n == b.n && a.accuracy == b.accuracy && a.fp == b.fp;
}

bool operator==(const ResultsTable& a, const ResultsTable& b) { return a.cells == b.cells; }

double compute_accuracy(const std::vector<ensemble::SubjectResult>& results) {
    int correct = 0, wrong = 0;
    for (const auto& r : results) {
        if (r.outcome == ensemble::SubjectOutcome::Correct) ++correct;
        else if (r.outcome == ensemble::SubjectOutcome::Wrong) ++wrong;
    }
    if (correct + wrong == 0)
        throw NoDecidableSubjects("every subject is omitted, accuracy undefined");
    return static_cast<double>(correct) / static_cast<double>(correct + wrong);
}

double compute_fp_rate(const std::vector<ensemble::CheckupVerdict>& verdicts) {
    size_t sober = 0, flagged = 0;
    for (const auto& v : verdicts) {
        if (v.truth_impaired) continue;
        ++sober;
        if (v.impaired) ++flagged;
    }
    if (sober == 0) throw EmptyInput("no truth-sober checkups, FP rate undefined");
    return static_cast<double>(flagged) / static_cast<double>(sober);
}

// ---------------------------------------------------------------------------
// Cohort planning

namespace {

struct CheckupPlan {
    double t = 0.0;      // onset within the shift, seconds
    double lambda = 0.0; // severity at this checkup
    bool truth = false;  // regular: lambda > truth_lambda; time-on-task: late window
    int window = -1;     // time-on-task only: 0 early, 1 mid, 2 late
};

struct ShiftPlan {
    int shift_index = 1;
    Condition condition = Condition::Sober; // Sober when every checkup lambda is 0
    std::vector<CheckupPlan> checkups;
};

struct SubjectPlan {
    int index = 0;
    std::string id;
    synthdriver::DriverProfile profile;
    std::vector<ShiftPlan> shifts;
    std::vector<ShiftPlan> tot; // separate long sessions, shift_index = session number
};

std::vector<double> checkup_times(const StudyConfig& cfg, double period) {
    probe::CheckupPolicy policy;
    policy.period_s = period;
    policy.phase_s = 0.0;
    policy.train_duration_s = 30.0;
    return probe::schedule_checkups(cfg.shift_hours * 3600.0, policy);
}

ShiftPlan plan_shift(const StudyConfig& cfg, int shift_index, Condition planned, double lambda,
                     const std::vector<double>& times) {
    ShiftPlan sp;
    sp.shift_index = shift_index;
    sp.condition = lambda > 0.0 ? planned : Condition::Sober;
    for (double t : times)
        sp.checkups.push_back({t, lambda, lambda > cfg.truth_lambda, -1});
    return sp;
}

SubjectPlan plan_subject(const StudyConfig& cfg, int si) {
    SubjectPlan p;
    p.index = si;
    p.id = subject_name(si);
    p.profile =
        synthdriver::sample_profile(child_seed(cfg.master_seed, {L("subject.profile"), u(si)}));

    // Membership draws in a fixed order so adding scenarios later cannot
    // silently reshuffle existing cohorts.
    Rng member = Rng::derive(cfg.master_seed, {L("membership"), u(si)});
    const bool in_alcohol = member.bernoulli(cfg.p_alcohol);
    const bool in_thc = member.bernoulli(cfg.p_thc);
    const bool in_fatigue = member.bernoulli(cfg.p_fatigue);
    const bool in_tot = member.bernoulli(cfg.p_tot);
    const int tot_sessions =
        in_tot ? 1 + static_cast<int>(member.uniform_int(u(cfg.max_tot_shifts))) : 0;

    const auto times = checkup_times(cfg, cfg.checkup_period_s);

    // Scenario order is fixed: alcohol, THC, fatigue, then sober filler.
    std::vector<std::pair<Condition, double>> scenario;
    int remaining = cfg.shifts_per_subject - cfg.calibration_shifts;
    const int n_alc = in_alcohol ? std::min(cfg.alcohol_shifts, remaining) : 0;
    remaining -= n_alc;
    const int n_thc = in_thc ? std::min(cfg.thc_shifts, remaining) : 0;
    remaining -= n_thc;
    const int n_fat = in_fatigue ? std::min(cfg.max_fatigue_shifts, remaining) : 0;
    remaining -= n_fat;

    for (int i = 0; i < n_alc; ++i)
        scenario.emplace_back(Condition::Alcohol,
                              synthdriver::severity_for(Condition::Alcohol,
                                                        synthdriver::Dose::breathalyzer_ug(240.0)));
    for (int i = 0; i < n_thc; ++i)
        scenario.emplace_back(
            Condition::Thc,
            synthdriver::severity_for(Condition::Thc, synthdriver::Dose::thc_smoked()));
    for (int j = 0; j < n_fat; ++j) {
        // KSS ramps from light to maximal sleepiness across the fatigue shifts.
        const int kss = n_fat == 1
                            ? 9
                            : 2 + static_cast<int>(std::llround(7.0 * j / (n_fat - 1)));
        scenario.emplace_back(
            Condition::Fatigue,
            synthdriver::severity_for(Condition::Fatigue, synthdriver::Dose::kss(kss)));
    }
    for (int i = 0; i < remaining; ++i) scenario.emplace_back(Condition::Sober, 0.0);

    for (int s = 1; s <= cfg.shifts_per_subject; ++s) {
        if (s <= cfg.calibration_shifts) {
            p.shifts.push_back(plan_shift(cfg, s, Condition::Sober, 0.0, times));
        } else {
            const auto& [cond, base] = scenario[static_cast<size_t>(s - cfg.calibration_shifts - 1)];
            p.shifts.push_back(
                plan_shift(cfg, s, cond, scaled_lambda(base, cfg.severity_scale), times));
        }
    }

    const double shift_s = cfg.shift_hours * 3600.0;
    const auto tot_times = checkup_times(cfg, cfg.tot_period_s);
    for (int sess = 1; sess <= tot_sessions; ++sess) {
        ShiftPlan tp;
        tp.shift_index = sess;
        double max_lambda = 0.0;
        for (double t : tot_times) {
            CheckupPlan cp;
            cp.t = t;
            cp.lambda = scaled_lambda(
                synthdriver::severity_for(Condition::TimeOnTask,
                                          synthdriver::Dose::time_on_task_hours(t / 3600.0)),
                cfg.severity_scale);
            cp.window = t < 3600.0 ? 0 : (t >= shift_s - 3600.0 ? 2 : 1);
            cp.truth = cp.window == 2;
            max_lambda = std::max(max_lambda, cp.lambda);
            tp.checkups.push_back(cp);
        }
        tp.condition = max_lambda > 0.0 ? Condition::TimeOnTask : Condition::Sober;
        p.tot.push_back(std::move(tp));
    }
    return p;
}

// ---------------------------------------------------------------------------
// Simulation

telemetry::Session simulate_session(const StudyConfig& cfg, const SubjectPlan& sp,
                                    const ShiftPlan& shift, uint64_t tag) {
    telemetry::Session s;
    s.manifest.subject_id = sp.id;
    s.manifest.shift_index = shift.shift_index;
    s.manifest.condition = shift.condition;

    const probe::ProbeConfig probe_cfg; // stock 8-LED 30 s train
    char name[64];
    double max_lambda = 0.0;
    for (size_t k = 0; k < shift.checkups.size(); ++k) {
        const auto& cp = shift.checkups[k];
        const uint64_t seed =
            child_seed(cfg.master_seed, {tag, u(sp.index), u(shift.shift_index), u(int(k))});
        auto train = probe::generate_probe_train(probe_cfg, seed);

        synthdriver::ImpairmentSpec imp;
        imp.condition = cp.lambda > 0.0 ? shift.condition : Condition::Sober;
        imp.severity = cp.lambda;
        imp.deltas = cfg.deltas;

        auto native = synthdriver::simulate_trace(sp.profile, imp, train, seed);
        auto cloud = synthdriver::recycle_trace(native, sp.profile, seed);

        std::snprintf(name, sizeof(name), "trains/train_%03zu.json", k);
        s.manifest.probe_train_refs.emplace_back(name);
        std::snprintf(name, sizeof(name), "traces/native_%03zu.jsonl", k);
        s.manifest.trace_refs[StreamId::Native].emplace_back(name);
        std::snprintf(name, sizeof(name), "traces/cloud_%03zu.jsonl", k);
        s.manifest.trace_refs[StreamId::Cloud].emplace_back(name);
        s.manifest.checkup_severities.push_back(cp.lambda);
        max_lambda = std::max(max_lambda, cp.lambda);

        s.trains.push_back(std::move(train));
        s.traces[StreamId::Native].push_back(std::move(native));
        s.traces[StreamId::Cloud].push_back(std::move(cloud));
    }
    s.manifest.severity = max_lambda;
    return s;
}

} // namespace

std::map<StreamId, std::vector<features::FeatureVector>>
session_features(const telemetry::Session& s) {
    std::map<StreamId, std::vector<features::FeatureVector>> out;
    for (const auto& [stream, traces] : s.traces) {
        auto& fvs = out[stream];
        fvs.resize(traces.size());
        for (size_t k = 0; k < traces.size(); ++k) {
            try {
                fvs[k] = features::extract_features(traces[k], s.trains[k]);
            } catch (...) {
                add_context(s.manifest.subject_id + " shift " +
                            std::to_string(s.manifest.shift_index) + " checkup " +
                            std::to_string(k) + " " + telemetry::to_string(stream));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV plumbing

namespace {

[[noreturn]] void bad_csv(const fs::path& path, size_t line, const std::string& what) {
    throw ParseError(path.string() + ": line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (true) {
        const size_t comma = line.find(',', pos);
        if (comma == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

double parse_double_field(const std::string& s, const fs::path& path, size_t line) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + s.size() || s.empty()) bad_csv(path, line, "bad number '" + s + "'");
    return v;
}

int parse_int_field(const std::string& s, const fs::path& path, size_t line) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const long v = std::strtol(begin, &end, 10);
    if (end != begin + s.size() || s.empty()) bad_csv(path, line, "bad integer '" + s + "'");
    return static_cast<int>(v);
}

bool parse_bool_field(const std::string& s, const fs::path& path, size_t line) {
    if (s == "1") return true;
    if (s == "0") return false;
    bad_csv(path, line, "bad flag '" + s + "' (want 0 or 1)");
}

} // namespace

std::string verdict_csv_header() {
    return "subject_id,shift_index,checkup_index,channel,t,has_votes,vote_ocsvm,vote_iforest,"
           "vote_lof,vote_gbt,mean_score,threshold,impaired,truth_impaired,condition,severity";
}

std::string verdict_csv_row(const ensemble::CheckupVerdict& v) {
    std::string row = v.subject_id;
    row += ',' + std::to_string(v.shift_index);
    row += ',' + std::to_string(v.checkup_index);
    row += ',' + ensemble::to_string(v.channel);
    row += ',' + fmt9(v.t);
    row += v.has_votes ? ",1" : ",0";
    row += v.has_votes && v.votes.ocsvm ? ",1" : ",0";
    row += v.has_votes && v.votes.iforest ? ",1" : ",0";
    row += v.has_votes && v.votes.lof ? ",1" : ",0";
    row += v.has_votes && v.votes.gbt ? ",1" : ",0";
    row += ',' + fmt9(v.mean_score);
    row += ',' + fmt9(v.threshold);
    row += v.impaired ? ",1" : ",0";
    row += v.truth_impaired ? ",1" : ",0";
    row += ',' + telemetry::to_string(v.condition);
    row += ',' + fmt9(v.severity);
    return row;
}

std::vector<ensemble::CheckupVerdict> parse_verdicts_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile("cannot open verdicts " + path.string());
    std::string line;
    size_t line_no = 0;
    if (!std::getline(in, line)) bad_csv(path, 1, "empty file");
    ++line_no;
    if (line != verdict_csv_header()) bad_csv(path, 1, "unexpected header");

    std::vector<ensemble::CheckupVerdict> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 16) bad_csv(path, line_no, "expected 16 fields, got " + std::to_string(f.size()));
        ensemble::CheckupVerdict v;
        v.subject_id = f[0];
        v.shift_index = parse_int_field(f[1], path, line_no);
        v.checkup_index = parse_int_field(f[2], path, line_no);
        try {
            v.channel = ensemble::channel_from_string(f[3]);
            v.condition = telemetry::condition_from_string(f[14]);
        } catch (const ParseError& e) {
            bad_csv(path, line_no, e.what());
        }
        v.t = parse_double_field(f[4], path, line_no);
        v.has_votes = parse_bool_field(f[5], path, line_no);
        v.votes.ocsvm = parse_bool_field(f[6], path, line_no);
        v.votes.iforest = parse_bool_field(f[7], path, line_no);
        v.votes.lof = parse_bool_field(f[8], path, line_no);
        v.votes.gbt = parse_bool_field(f[9], path, line_no);
        v.mean_score = parse_double_field(f[10], path, line_no);
        v.threshold = parse_double_field(f[11], path, line_no);
        v.impaired = parse_bool_field(f[12], path, line_no);
        v.truth_impaired = parse_bool_field(f[13], path, line_no);
        v.severity = parse_double_field(f[15], path, line_no);
        out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Table assembly

namespace {

Cell accuracy_cell(const std::vector<ensemble::CheckupVerdict>& verdicts,
                   ensemble::TiePolicy policy) {
    Cell cell; // n = 0, no accuracy: the N/A shape
    bool any_impaired_truth = false;
    for (const auto& v : verdicts) any_impaired_truth |= v.truth_impaired;
    if (verdicts.empty() || !any_impaired_truth) return cell;

    std::map<std::string, std::vector<ensemble::CheckupVerdict>> by_subject;
    for (const auto& v : verdicts) by_subject[v.subject_id].push_back(v);
    std::vector<ensemble::SubjectResult> results;
    results.reserve(by_subject.size());
    for (const auto& [id, vs] : by_subject) results.push_back(ensemble::aggregate_subject(vs, policy));

    try {
        const double acc = compute_accuracy(results);
        for (const auto& r : results)
            if (r.outcome != ensemble::SubjectOutcome::Omitted) ++cell.n;
        cell.accuracy = q9(acc);
    } catch (const NoDecidableSubjects&) {
        // all tied: leave the N/A shape
    }
    return cell;
}

Cell fp_cell(const std::vector<ensemble::CheckupVerdict>& sober_verdicts) {
    Cell cell;
    if (sober_verdicts.empty()) return cell;
    std::set<std::string> subjects;
    for (const auto& v : sober_verdicts) subjects.insert(v.subject_id);
    cell.n = static_cast<int>(subjects.size());
    cell.fp = q9(compute_fp_rate(sober_verdicts));
    return cell;
}

ResultsTable build_table(const std::vector<ensemble::CheckupVerdict>& regular,
                         const std::vector<ensemble::CheckupVerdict>& tot,
                         int tot_high_data_checkups) {
    ResultsTable table;
    const ensemble::ChannelId channels[] = {ensemble::ChannelId::Native, ensemble::ChannelId::Cloud,
                                            ensemble::ChannelId::Fused};
    for (const auto channel : channels) {
        const auto policy = channel == ensemble::ChannelId::Fused
                                ? ensemble::TiePolicy::ScoreMargin
                                : ensemble::TiePolicy::Omit;

        std::vector<ensemble::CheckupVerdict> all, sober, alcohol, thc, fatigue;
        for (const auto& v : regular) {
            if (v.channel != channel) continue;
            all.push_back(v);
            switch (v.condition) {
                case Condition::Sober: sober.push_back(v); break;
                case Condition::Alcohol: alcohol.push_back(v); break;
                case Condition::Thc: thc.push_back(v); break;
                case Condition::Fatigue: fatigue.push_back(v); break;
                case Condition::TimeOnTask: break; // not scheduled in regular shifts
            }
        }
        table.at(RowId::Overall, channel) = accuracy_cell(all, policy);
        table.at(RowId::BaselineFp, channel) = fp_cell(sober);
        table.at(RowId::Alcohol, channel) = accuracy_cell(alcohol, policy);
        table.at(RowId::Thc, channel) = accuracy_cell(thc, policy);
        table.at(RowId::Fatigue, channel) = accuracy_cell(fatigue, policy);

        std::vector<ensemble::CheckupVerdict> tot_all;
        std::map<std::string, std::pair<int, int>> window_counts; // early, late per subject
        for (const auto& v : tot) {
            if (v.channel != channel) continue;
            tot_all.push_back(v);
            auto& [early_n, late_n] = window_counts[v.subject_id];
            (v.truth_impaired ? late_n : early_n) += 1;
        }
        table.at(RowId::TimeOnTaskAll, channel) = accuracy_cell(tot_all, policy);

        std::vector<ensemble::CheckupVerdict> tot_high;
        for (const auto& v : tot_all) {
            const auto& [early_n, late_n] = window_counts[v.subject_id];
            if (early_n >= tot_high_data_checkups && late_n >= tot_high_data_checkups)
                tot_high.push_back(v);
        }
        table.at(RowId::TimeOnTaskHighData, channel) = accuracy_cell(tot_high, policy);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Study stages

struct SubjectData {
    SubjectPlan plan;
    // features[stream][shift][checkup]; stream 0 = Native, 1 = Cloud
    std::array<std::vector<std::vector<features::FeatureVector>>, 2> regular;
    std::array<std::vector<std::vector<features::FeatureVector>>, 2> tot;
    std::array<ensemble::DriverBaseline, 2> baseline;
    std::array<learners::GbtModel, 2> population;
    std::array<learners::GbtModel, 2> tot_model;
    bool tot_evaluable = false;
    // verdicts[channel] over scenario shifts; channel 0 Native, 1 Cloud, 2 Fused
    std::array<std::vector<ensemble::CheckupVerdict>, 3> verdicts;
    std::array<std::vector<ensemble::CheckupVerdict>, 3> tot_verdicts;
};

constexpr StreamId kStreams[2] = {StreamId::Native, StreamId::Cloud};
const char* stream_tag(size_t idx) { return idx == 0 ? "native" : "cloud"; }

learners::GbtModel prior_gbt(const learners::GbtConfig& cfg) {
    learners::GbtModel m; // no trees: P = 0.5 everywhere, never votes impaired
    m.config = cfg;
    m.n_features = static_cast<int>(features::kFeatureCount);
    return m;
}

std::vector<double> z_row(const features::FeatureVector& fv, const features::BaselineStats& stats) {
    const auto arr = features::normalize(fv, stats).to_array();
    return std::vector<double>(arr.begin(), arr.end());
}

// Simulates every session of one subject, extracts both streams' feature
// vectors, and calibrates the per-stream baselines. Traces are dropped as
// soon as each session's features exist.
void run_subject_stage_a(const StudyConfig& cfg, const fs::path& out_dir, SubjectData& d) {
    const auto& plan = d.plan;
    for (size_t i = 0; i < 2; ++i) {
        d.regular[i].resize(plan.shifts.size());
        d.tot[i].resize(plan.tot.size());
    }

    for (size_t s = 0; s < plan.shifts.size(); ++s) {
        const auto session = simulate_session(cfg, plan, plan.shifts[s], L("checkup"));
        auto fvs = session_features(session);
        for (size_t i = 0; i < 2; ++i) d.regular[i][s] = std::move(fvs[kStreams[i]]);
        if (cfg.write_artifacts) {
            char name[32];
            std::snprintf(name, sizeof(name), "shift_%02d", plan.shifts[s].shift_index);
            telemetry::write_session(session, out_dir / "sessions" / plan.id / name);
        }
    }
    for (size_t s = 0; s < plan.tot.size(); ++s) {
        const auto session = simulate_session(cfg, plan, plan.tot[s], L("tot.checkup"));
        auto fvs = session_features(session);
        for (size_t i = 0; i < 2; ++i) d.tot[i][s] = std::move(fvs[kStreams[i]]);
        if (cfg.write_artifacts) {
            char name[32];
            std::snprintf(name, sizeof(name), "tot_%02d", plan.tot[s].shift_index);
            telemetry::write_session(session, out_dir / "sessions" / plan.id / name);
        }
    }

    for (size_t i = 0; i < 2; ++i) {
        std::vector<features::FeatureVector> calib;
        for (int s = 0; s < cfg.calibration_shifts; ++s)
            calib.insert(calib.end(), d.regular[i][static_cast<size_t>(s)].begin(),
                         d.regular[i][static_cast<size_t>(s)].end());
        ensemble::CalibConfig cc = cfg.calib;
        cc.seed = child_seed(cfg.master_seed, {L("calib"), u(plan.index), u(int(i))});
        try {
            d.baseline[i] = ensemble::calibrate_driver(plan.id, calib, cc);
        } catch (...) {
            add_context(plan.id + " " + stream_tag(i) + " calibration");
        }
    }
}

std::vector<ensemble::LabeledRow> population_rows(const std::vector<SubjectData>& data,
                                                  size_t stream) {
    std::vector<ensemble::LabeledRow> rows;
    for (const auto& d : data) {
        for (size_t s = 0; s < d.plan.shifts.size(); ++s) {
            const auto& shift = d.plan.shifts[s];
            for (size_t k = 0; k < shift.checkups.size(); ++k) {
                rows.push_back({d.plan.id,
                                z_row(d.regular[stream][s][k], d.baseline[stream].stats),
                                shift.checkups[k].truth ? 1 : 0});
            }
        }
    }
    return rows;
}

void run_subject_verdicts(const StudyConfig& cfg, SubjectData& d) {
    const double shift_s = cfg.shift_hours * 3600.0;
    for (size_t i = 0; i < 2; ++i) {
        auto& out = d.verdicts[i];
        for (size_t s = static_cast<size_t>(cfg.calibration_shifts); s < d.plan.shifts.size();
             ++s) {
            const auto& shift = d.plan.shifts[s];
            for (size_t k = 0; k < shift.checkups.size(); ++k) {
                const auto& cp = shift.checkups[k];
                auto v = ensemble::run_checkup(d.regular[i][s][k], d.baseline[i], d.population[i]);
                v.subject_id = d.plan.id;
                v.shift_index = shift.shift_index;
                v.checkup_index = static_cast<int>(k);
                v.channel = i == 0 ? ensemble::ChannelId::Native : ensemble::ChannelId::Cloud;
                v.t = q9((shift.shift_index - 1) * shift_s + cp.t);
                v.truth_impaired = cp.truth;
                v.condition = shift.condition;
                v.severity = cp.lambda;
                out.push_back(std::move(v));
            }
        }
    }
    d.verdicts[2] = ensemble::fuse_streams(d.verdicts[0], d.verdicts[1]);
}

// Early/late-window labeled rows for the time-on-task classifier; raises
// InsufficientCheckups when a window is too thin to represent the subject.
std::vector<ensemble::LabeledRow> tot_rows_for(const StudyConfig& cfg, const SubjectData& d,
                                               size_t stream) {
    std::vector<ensemble::LabeledRow> rows;
    int early_n = 0, late_n = 0;
    for (size_t s = 0; s < d.plan.tot.size(); ++s) {
        const auto& sess = d.plan.tot[s];
        for (size_t k = 0; k < sess.checkups.size(); ++k) {
            const auto& cp = sess.checkups[k];
            if (cp.window == 1) continue; // mid-shift checkups stay out of the windows
            (cp.window == 2 ? late_n : early_n) += 1;
            rows.push_back({d.plan.id, z_row(d.tot[stream][s][k], d.baseline[stream].stats),
                            cp.window == 2 ? 1 : 0});
        }
    }
    if (early_n < cfg.tot_min_checkups || late_n < cfg.tot_min_checkups)
        throw InsufficientCheckups(d.plan.id + ": time-on-task windows have " +
                                   std::to_string(early_n) + "/" + std::to_string(late_n) +
                                   " checkups, need " + std::to_string(cfg.tot_min_checkups));
    return rows;
}

void run_subject_tot_verdicts(const StudyConfig& cfg, SubjectData& d) {
    const double shift_s = cfg.shift_hours * 3600.0;
    for (size_t i = 0; i < 2; ++i) {
        auto& out = d.tot_verdicts[i];
        for (size_t s = 0; s < d.plan.tot.size(); ++s) {
            const auto& sess = d.plan.tot[s];
            for (size_t k = 0; k < sess.checkups.size(); ++k) {
                const auto& cp = sess.checkups[k];
                if (cp.window == 1) continue;
                const double p =
                    learners::predict_gbt(d.tot_model[i],
                                          z_row(d.tot[i][s][k], d.baseline[i].stats));
                ensemble::CheckupVerdict v;
                v.subject_id = d.plan.id;
                v.shift_index = sess.shift_index;
                v.checkup_index = static_cast<int>(k);
                v.channel = i == 0 ? ensemble::ChannelId::Native : ensemble::ChannelId::Cloud;
                v.t = q9((sess.shift_index - 1) * shift_s + cp.t);
                v.has_votes = false;
                v.mean_score = q9(p);
                v.threshold = 0.5;
                v.impaired = p > 0.5; // classified as late-window
                v.truth_impaired = cp.truth;
                v.condition = sess.condition;
                v.severity = cp.lambda;
                out.push_back(std::move(v));
            }
        }
    }
    d.tot_verdicts[2] = ensemble::fuse_streams(d.tot_verdicts[0], d.tot_verdicts[1]);
}

// ---------------------------------------------------------------------------
// Artifact writers

void write_features_csv(const std::vector<SubjectData>& data, const fs::path& dir,
                        const StudyConfig& cfg) {
    const auto& names = features::feature_names();
    auto feature_cols = [&](const features::FeatureVector& fv) {
        std::string s;
        for (double v : fv.to_array()) s += ',' + fmt9(v);
        return s;
    };

    {
        std::ofstream out(dir / "checkups.csv");
        if (!out) throw IoError("cannot write " + (dir / "checkups.csv").string());
        out << "subject_id,shift_index,checkup_index,stream,t,condition,severity,truth_impaired";
        for (const auto& n : names) out << ',' << n;
        out << '\n';
        const double shift_s = cfg.shift_hours * 3600.0;
        for (const auto& d : data) {
            for (size_t i = 0; i < 2; ++i) {
                for (size_t s = 0; s < d.plan.shifts.size(); ++s) {
                    const auto& shift = d.plan.shifts[s];
                    for (size_t k = 0; k < shift.checkups.size(); ++k) {
                        const auto& cp = shift.checkups[k];
                        out << d.plan.id << ',' << shift.shift_index << ',' << k << ','
                            << telemetry::to_string(kStreams[i]) << ','
                            << fmt9((shift.shift_index - 1) * shift_s + cp.t) << ','
                            << telemetry::to_string(shift.condition) << ',' << fmt9(cp.lambda)
                            << ',' << (cp.truth ? 1 : 0) << feature_cols(d.regular[i][s][k])
                            << '\n';
                    }
                }
            }
        }
        if (!out) throw IoError("short write to checkups.csv");
    }

    std::ofstream out(dir / "tot_checkups.csv");
    if (!out) throw IoError("cannot write " + (dir / "tot_checkups.csv").string());
    out << "subject_id,session_index,checkup_index,stream,t,window,condition,severity,truth_late";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    const char* window_names[3] = {"early", "mid", "late"};
    const double shift_s = cfg.shift_hours * 3600.0;
    for (const auto& d : data) {
        for (size_t i = 0; i < 2; ++i) {
            for (size_t s = 0; s < d.plan.tot.size(); ++s) {
                const auto& sess = d.plan.tot[s];
                for (size_t k = 0; k < sess.checkups.size(); ++k) {
                    const auto& cp = sess.checkups[k];
                    out << d.plan.id << ',' << sess.shift_index << ',' << k << ','
                        << telemetry::to_string(kStreams[i]) << ','
                        << fmt9((sess.shift_index - 1) * shift_s + cp.t) << ','
                        << window_names[cp.window] << ',' << telemetry::to_string(sess.condition)
                        << ',' << fmt9(cp.lambda) << ',' << (cp.truth ? 1 : 0)
                        << feature_cols(d.tot[i][s][k]) << '\n';
                }
            }
        }
    }
    if (!out) throw IoError("short write to tot_checkups.csv");
}

void write_verdicts_csv(const std::vector<SubjectData>& data, const fs::path& dir) {
    {
        std::ofstream out(dir / "checkups.csv");
        if (!out) throw IoError("cannot write " + (dir / "checkups.csv").string());
        out << verdict_csv_header() << '\n';
        for (const auto& d : data)
            for (const auto& channel : d.verdicts)
                for (const auto& v : channel) out << verdict_csv_row(v) << '\n';
        if (!out) throw IoError("short write to verdicts/checkups.csv");
    }
    std::ofstream out(dir / "tot.csv");
    if (!out) throw IoError("cannot write " + (dir / "tot.csv").string());
    out << verdict_csv_header() << '\n';
    for (const auto& d : data)
        for (const auto& channel : d.tot_verdicts)
            for (const auto& v : channel) out << verdict_csv_row(v) << '\n';
    if (!out) throw IoError("short write to verdicts/tot.csv");
}

void write_models(const std::vector<SubjectData>& data, const fs::path& dir) {
    for (const auto& d : data) {
        for (size_t i = 0; i < 2; ++i) {
            const std::string base = d.plan.id + "_" + stream_tag(i);
            ensemble::save_baseline(d.baseline[i], dir / (base + "_baseline.json"));
            learners::save_gbt(d.population[i], dir / (base + "_gbt.json"));
            if (d.tot_evaluable)
                learners::save_gbt(d.tot_model[i], dir / (base + "_tot_gbt.json"));
        }
    }
}

void write_interventions(const std::vector<SubjectData>& data, const fs::path& path) {
    ensemble::JsonlSink sink(path);
    for (const auto& d : data)
        if (!d.verdicts[2].empty()) ensemble::emit_intervention(d.verdicts[2], &sink);
}

} // namespace

// ---------------------------------------------------------------------------
// Reports

std::string render_report_text(const ResultsTable& t) {
    const char* row_names[kRowCount] = {"Overall",           "Baseline FP", "Alcohol",
                                        "THC",               "Fatigue",     "TimeOnTask (all)",
                                        "TimeOnTask (high-data)"};
    auto num = [](const std::optional<double>& v) {
        if (!v) return std::string("N/A");
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", *v);
        return std::string(buf);
    };

    std::ostringstream out;
    out << "Checkup verdict summary (synthetic cohort)\n";
    out << "==========================================\n\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-24s %-20s %-20s %-20s\n", "", "Native", "Cloud", "Fused");
    out << line;
    std::snprintf(line, sizeof(line), "%-24s %4s %7s %7s %4s %7s %7s %4s %7s %7s\n", "Row", "n",
                  "Acc", "FP", "n", "Acc", "FP", "n", "Acc", "FP");
    out << line;
    for (int r = 0; r < kRowCount; ++r) {
        std::string cols;
        for (int c = 0; c < kColCount; ++c) {
            const Cell& cell = t.cells[static_cast<size_t>(r)][static_cast<size_t>(c)];
            char buf[64];
            std::snprintf(buf, sizeof(buf), " %4d %7s %7s", cell.n, num(cell.accuracy).c_str(),
                          num(cell.fp).c_str());
            cols += buf;
        }
        std::snprintf(line, sizeof(line), "%-24s%s\n", row_names[r], cols.c_str());
        out << line;
    }
    out << "\n"
           "n counts decidable subjects: a subject with as many wrong as right checkups is\n"
           "omitted from its row. The Fused column breaks such ties by the summed score\n"
           "margin, so only exact score equality still omits a subject. FP is the fraction\n"
           "of sober checkups flagged impaired. TimeOnTask rows are binary early-vs-late\n"
           "window classification (leave-one-subject-out), not anomaly verdicts.\n";
    return out.str();
}

void write_report_csv(const ResultsTable& t, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report " + path.string());
    out << "row";
    for (const char* stream : {"native", "cloud", "fused"})
        out << ',' << stream << "_n," << stream << "_acc," << stream << "_fp";
    out << '\n';
    auto cell_str = [](const std::optional<double>& v) { return v ? fmt9(*v) : std::string("NA"); };
    for (int r = 0; r < kRowCount; ++r) {
        out << to_string(static_cast<RowId>(r));
        for (int c = 0; c < kColCount; ++c) {
            const Cell& cell = t.cells[static_cast<size_t>(r)][static_cast<size_t>(c)];
            out << ',' << cell.n << ',' << cell_str(cell.accuracy) << ',' << cell_str(cell.fp);
        }
        out << '\n';
    }
    if (!out) throw IoError("short write to " + path.string());
}

ResultsTable parse_report_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile("cannot open report " + path.string());
    std::string line;
    if (!std::getline(in, line)) bad_csv(path, 1, "empty file");
    if (line != "row,native_n,native_acc,native_fp,cloud_n,cloud_acc,cloud_fp,"
                "fused_n,fused_acc,fused_fp")
        bad_csv(path, 1, "unexpected header");

    ResultsTable t;
    size_t line_no = 1;
    for (int r = 0; r < kRowCount; ++r) {
        if (!std::getline(in, line)) bad_csv(path, line_no + 1, "missing table row");
        ++line_no;
        const auto f = split_csv(line);
        if (f.size() != 10) bad_csv(path, line_no, "expected 10 fields");
        if (f[0] != to_string(static_cast<RowId>(r)))
            bad_csv(path, line_no, "expected row '" + to_string(static_cast<RowId>(r)) + "'");
        for (int c = 0; c < kColCount; ++c) {
            Cell& cell = t.cells[static_cast<size_t>(r)][static_cast<size_t>(c)];
            cell.n = parse_int_field(f[static_cast<size_t>(1 + 3 * c)], path, line_no);
            const auto& acc = f[static_cast<size_t>(2 + 3 * c)];
            const auto& fp = f[static_cast<size_t>(3 + 3 * c)];
            if (acc != "NA") cell.accuracy = parse_double_field(acc, path, line_no);
            if (fp != "NA") cell.fp = parse_double_field(fp, path, line_no);
        }
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty()) bad_csv(path, line_no, "trailing content after table rows");
    }
    return t;
}

// ---------------------------------------------------------------------------
// Entry points

ResultsTable run_study(const StudyConfig& config, const fs::path& out_dir) {
    validate_config(config);
    set_max_threads(config.jobs);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string());

    std::vector<SubjectData> data(static_cast<size_t>(config.n_subjects));
    for (int si = 0; si < config.n_subjects; ++si)
        data[static_cast<size_t>(si)].plan = plan_subject(config, si);

    if (config.write_artifacts) {
        for (const char* sub : {"sessions", "features", "models", "verdicts"})
            fs::create_directories(out_dir / sub);
        for (const auto& d : data) fs::create_directories(out_dir / "sessions" / d.plan.id);
    }

    // Stage A: per-subject simulation, feature extraction, calibration.
    parallel_items(data.size(), [&](size_t si) {
        try {
            run_subject_stage_a(config, out_dir, data[si]);
        } catch (...) {
            add_context(data[si].plan.id);
        }
    });

    // Stage B: leave-one-subject-out population models; the labeled row
    // list is assembled once per stream in fixed subject order.
    std::array<std::vector<ensemble::LabeledRow>, 2> rows{population_rows(data, 0),
                                                          population_rows(data, 1)};
    parallel_items(data.size() * 2, [&](size_t idx) {
        const size_t si = idx / 2, stream = idx % 2;
        try {
            data[si].population[stream] =
                ensemble::train_population(rows[stream], data[si].plan.id, config.gbt);
        } catch (const InsufficientData&) {
            // Nothing impaired (or nothing at all) to learn from; fall back
            // to an indifferent model so the one-class trio still votes.
            data[si].population[stream] = prior_gbt(config.gbt);
        } catch (const EmptyInput&) {
            data[si].population[stream] = prior_gbt(config.gbt);
        } catch (...) {
            add_context(data[si].plan.id + " " + stream_tag(stream) + " population model");
        }
    });

    // Stage C: checkup verdicts on the scenario shifts, plus stream fusion.
    parallel_items(data.size(), [&](size_t si) {
        try {
            run_subject_verdicts(config, data[si]);
        } catch (...) {
            add_context(data[si].plan.id + " verdicts");
        }
    });

    // Stage D: time-on-task windows, leave-one-subject-out per member.
    std::array<std::vector<ensemble::LabeledRow>, 2> tot_rows;
    std::vector<char> tot_member(data.size(), 0);
    for (size_t si = 0; si < data.size(); ++si) {
        if (data[si].plan.tot.empty()) continue;
        try {
            auto native_rows = tot_rows_for(config, data[si], 0);
            auto cloud_rows = tot_rows_for(config, data[si], 1);
            tot_member[si] = 1;
            std::move(native_rows.begin(), native_rows.end(), std::back_inserter(tot_rows[0]));
            std::move(cloud_rows.begin(), cloud_rows.end(), std::back_inserter(tot_rows[1]));
        } catch (const InsufficientCheckups&) {
            // The subject drove too few window checkups; the row simply
            // loses them, mirroring the field protocol's exclusions.
        }
    }
    parallel_items(data.size(), [&](size_t si) {
        if (!tot_member[si]) return;
        try {
            data[si].tot_model[0] =
                ensemble::train_population(tot_rows[0], data[si].plan.id, config.gbt);
            data[si].tot_model[1] =
                ensemble::train_population(tot_rows[1], data[si].plan.id, config.gbt);
            data[si].tot_evaluable = true;
            run_subject_tot_verdicts(config, data[si]);
        } catch (const InsufficientData&) {
            // Too few peers to train against; the subject drops out.
        } catch (const EmptyInput&) {
        } catch (...) {
            add_context(data[si].plan.id + " time-on-task");
        }
    });

    // Stage E: fixed-order aggregation and artifacts.
    std::vector<ensemble::CheckupVerdict> regular, tot;
    for (const auto& d : data) {
        for (const auto& channel : d.verdicts)
            regular.insert(regular.end(), channel.begin(), channel.end());
        for (const auto& channel : d.tot_verdicts)
            tot.insert(tot.end(), channel.begin(), channel.end());
    }
    const ResultsTable table = build_table(regular, tot, config.tot_high_data_checkups);

    if (config.write_artifacts) {
        write_features_csv(data, out_dir / "features", config);
        write_models(data, out_dir / "models");
        write_verdicts_csv(data, out_dir / "verdicts");
        write_interventions(data, out_dir / "verdicts" / "interventions.jsonl");
    }
    save_study_config(config, out_dir / "study_config.json");
    write_report_csv(table, out_dir / "report.csv");
    std::ofstream txt(out_dir / "report.txt");
    if (!txt) throw IoError("cannot write report.txt");
    txt << render_report_text(table);
    return table;
}

ResultsTable rebuild_report(const fs::path& study_dir) {
    const auto config = load_study_config(study_dir / "study_config.json");
    const auto regular = parse_verdicts_csv(study_dir / "verdicts" / "checkups.csv");
    const auto tot = parse_verdicts_csv(study_dir / "verdicts" / "tot.csv");
    return build_table(regular, tot, config.tot_high_data_checkups);
}

void simulate_cohort(const StudyConfig& config, const fs::path& out_dir) {
    validate_config(config);
    set_max_threads(config.jobs);
    std::error_code ec;
    fs::create_directories(out_dir / "sessions", ec);
    if (ec) throw IoError("cannot create " + out_dir.string());

    std::vector<SubjectPlan> plans(static_cast<size_t>(config.n_subjects));
    for (int si = 0; si < config.n_subjects; ++si)
        plans[static_cast<size_t>(si)] = plan_subject(config, si);
    for (const auto& p : plans) fs::create_directories(out_dir / "sessions" / p.id);

    parallel_items(plans.size(), [&](size_t si) {
        const auto& plan = plans[si];
        try {
            char name[32];
            for (const auto& shift : plan.shifts) {
                std::snprintf(name, sizeof(name), "shift_%02d", shift.shift_index);
                telemetry::write_session(simulate_session(config, plan, shift, L("checkup")),
                                         out_dir / "sessions" / plan.id / name);
            }
            for (const auto& sess : plan.tot) {
                std::snprintf(name, sizeof(name), "tot_%02d", sess.shift_index);
                telemetry::write_session(simulate_session(config, plan, sess, L("tot.checkup")),
                                         out_dir / "sessions" / plan.id / name);
            }
        } catch (...) {
            add_context(plan.id);
        }
    });
    save_study_config(config, out_dir / "study_config.json");
}

void calibrate_cohort(const fs::path& study_dir) {
    const auto config = load_study_config(study_dir / "study_config.json");
    set_max_threads(config.jobs);
    const fs::path sessions = study_dir / "sessions";
    if (!fs::is_directory(sessions)) throw MissingFile("no sessions directory in " + study_dir.string());

    std::vector<fs::path> subject_dirs;
    for (const auto& entry : fs::directory_iterator(sessions))
        if (entry.is_directory()) subject_dirs.push_back(entry.path());
    std::sort(subject_dirs.begin(), subject_dirs.end());
    if (subject_dirs.empty()) throw EmptyInput("no subject directories under " + sessions.string());

    struct SubjectSessions {
        std::string id;
        // calibration feature vectors and labeled rows per stream
        std::array<std::vector<features::FeatureVector>, 2> calib;
        std::array<std::vector<ensemble::LabeledRow>, 2> rows; // z filled after calibration
        std::array<ensemble::DriverBaseline, 2> baseline;
        std::array<std::vector<std::pair<features::FeatureVector, int>>, 2> labeled_raw;
    };
    std::vector<SubjectSessions> subjects(subject_dirs.size());

    parallel_items(subject_dirs.size(), [&](size_t si) {
        auto& subj = subjects[si];
        std::vector<fs::path> shift_dirs;
        for (const auto& entry : fs::directory_iterator(subject_dirs[si]))
            if (entry.is_directory() &&
                entry.path().filename().string().rfind("shift_", 0) == 0)
                shift_dirs.push_back(entry.path());
        std::sort(shift_dirs.begin(), shift_dirs.end());
        try {
            for (const auto& dir : shift_dirs) {
                const auto session = telemetry::read_session(dir / "manifest.json");
                subj.id = session.manifest.subject_id;
                auto fvs = session_features(session);
                for (size_t i = 0; i < 2; ++i) {
                    const auto& stream_fvs = fvs[kStreams[i]];
                    if (session.manifest.shift_index <= config.calibration_shifts)
                        subj.calib[i].insert(subj.calib[i].end(), stream_fvs.begin(),
                                             stream_fvs.end());
                    for (size_t k = 0; k < stream_fvs.size(); ++k) {
                        const bool truth =
                            session.manifest.checkup_severities[k] > config.truth_lambda;
                        subj.labeled_raw[i].emplace_back(stream_fvs[k], truth ? 1 : 0);
                    }
                }
            }
            if (subj.id.empty())
                throw EmptySession("no shift sessions under " + subject_dirs[si].string());
            for (size_t i = 0; i < 2; ++i) {
                ensemble::CalibConfig cc = config.calib;
                cc.seed = child_seed(config.master_seed, {L("calib.cohort"), u(int(si)), u(int(i))});
                subj.baseline[i] = ensemble::calibrate_driver(subj.id, subj.calib[i], cc);
                for (const auto& [fv, label] : subj.labeled_raw[i])
                    subj.rows[i].push_back({subj.id, z_row(fv, subj.baseline[i].stats), label});
            }
        } catch (...) {
            add_context(subject_dirs[si].filename().string());
        }
    });

    fs::create_directories(study_dir / "models");
    std::array<std::vector<ensemble::LabeledRow>, 2> rows;
    for (const auto& subj : subjects)
        for (size_t i = 0; i < 2; ++i)
            rows[i].insert(rows[i].end(), subj.rows[i].begin(), subj.rows[i].end());

    parallel_items(subjects.size(), [&](size_t si) {
        for (size_t i = 0; i < 2; ++i) {
            learners::GbtModel population;
            try {
                population = ensemble::train_population(rows[i], subjects[si].id, config.gbt);
            } catch (const InsufficientData&) {
                population = prior_gbt(config.gbt);
            } catch (const EmptyInput&) {
                population = prior_gbt(config.gbt);
            }
            const std::string base = subjects[si].id + "_" + stream_tag(i);
            ensemble::save_baseline(subjects[si].baseline[i],
                                    study_dir / "models" / (base + "_baseline.json"));
            learners::save_gbt(population, study_dir / "models" / (base + "_gbt.json"));
        }
    });
}

} // namespace vigil::evalharness
