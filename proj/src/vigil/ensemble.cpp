#include "vigil/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "vigil/learners/model_io.hpp"
#include "vigil/learners/model_json.hpp"

namespace vigil::ensemble {

using nlohmann::json;
using telemetry::q9;

double ScoreNorm::apply(double score) const {
    const double span = hi - lo;
    // Degenerate calibration range: everything at lo maps to 0, anything
    // above saturates.
    const double z = span > 0.0 ? (score - lo) / span : (score > lo ? 1.5 : 0.0);
    return std::clamp(z, 0.0, 1.5);
}

std::string to_string(ChannelId c) {
    switch (c) {
        case ChannelId::Native: return "Native";
        case ChannelId::Cloud: return "Cloud";
        case ChannelId::Fused: return "Fused";
    }
    return "Native";
}

ChannelId channel_from_string(const std::string& s) {
    if (s == "Native") return ChannelId::Native;
    if (s == "Cloud") return ChannelId::Cloud;
    if (s == "Fused") return ChannelId::Fused;
    throw ParseError("unknown channel '" + s + "'");
}

std::string to_string(SubjectOutcome o) {
    switch (o) {
        case SubjectOutcome::Correct: return "Correct";
        case SubjectOutcome::Wrong: return "Wrong";
        case SubjectOutcome::Omitted: return "Omitted";
    }
    return "Omitted";
}

std::string to_string(InterventionLevel level) {
    switch (level) {
        case InterventionLevel::Notify: return "Notify";
        case InterventionLevel::Alert: return "Alert";
        case InterventionLevel::Escalate: return "Escalate";
    }
    return "Notify";
}

namespace {

ScoreNorm norm_from_scores(const std::vector<double>& scores) {
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    return ScoreNorm{*lo, *hi};
}

} // namespace

DriverBaseline calibrate_driver(const std::string& subject_id,
                                const std::vector<features::FeatureVector>& sober,
                                const CalibConfig& config) {
    if (sober.size() < 10)
        throw TooFewCheckups("calibration needs at least 10 sober checkups, got " +
                             std::to_string(sober.size()));
    if (!(config.nu > 0.0 && config.nu <= 1.0)) throw ConfigError("nu must be in (0,1]");
    if (config.n_trees < 1) throw ConfigError("n_trees must be >= 1");
    if (config.lof_k < 0) throw ConfigError("lof_k must be >= 0");
    if (config.gamma < 0.0) throw ConfigError("gamma must be >= 0");

    DriverBaseline b;
    b.subject_id = subject_id;
    b.stats = features::baseline_stats(sober);

    const size_t n = sober.size();
    learners::Matrix Z(n);
    for (size_t i = 0; i < n; ++i) {
        const auto arr = features::normalize(sober[i], b.stats).to_array();
        Z[i].assign(arr.begin(), arr.end());
    }

    const double gamma = config.gamma > 0.0 ? config.gamma : learners::default_gamma(Z);
    b.ocsvm = learners::train_ocsvm(Z, config.nu, gamma);
    b.iforest = learners::train_iforest(Z, config.n_trees, config.psi, config.nu, config.seed);
    const int k = config.lof_k > 0 ? config.lof_k : learners::default_lof_k(n);
    b.lof = learners::train_lof(Z, k, config.nu);

    std::vector<double> s_oc(n), s_if(n);
    for (size_t i = 0; i < n; ++i) {
        s_oc[i] = learners::score_ocsvm(b.ocsvm, Z[i]);
        s_if[i] = learners::score_iforest(b.iforest, Z[i]);
    }
    b.norm_ocsvm = norm_from_scores(s_oc);
    b.norm_iforest = norm_from_scores(s_if);
    b.norm_lof = norm_from_scores(b.lof.train_lof);

    const double t_oc = b.norm_ocsvm.apply(0.0); // decision boundary d = 0
    const double t_if = b.norm_iforest.apply(b.iforest.score_threshold);
    const double t_lof = b.norm_lof.apply(b.lof.lof_threshold);
    b.score_threshold = q9((t_oc + t_if + t_lof + 0.5) / 4.0);
    return b;
}

learners::GbtModel train_population(const std::vector<LabeledRow>& rows,
                                    const std::string& holdout_subject,
                                    const learners::GbtConfig& config) {
    learners::Matrix X;
    std::vector<int> y;
    std::set<std::string> subjects;
    for (const auto& row : rows) {
        if (row.subject_id == holdout_subject) continue;
        X.push_back(row.z);
        y.push_back(row.label);
        subjects.insert(row.subject_id);
    }
    if (X.empty()) throw EmptyInput("no population rows left after holding out " + holdout_subject);
    if (subjects.size() < 2)
        throw DegenerateLabels("population model needs >= 2 training subjects, got " +
                               std::to_string(subjects.size()));
    return learners::train_gbt(X, y, config);
}

CheckupVerdict run_checkup(const features::FeatureVector& fv,
                           const DriverBaseline& baseline,
                           const learners::GbtModel& population) {
    const auto arr = features::normalize(fv, baseline.stats).to_array();
    const std::vector<double> z(arr.begin(), arr.end());

    const double d = learners::decision_ocsvm(baseline.ocsvm, z);
    const double s_if = learners::score_iforest(baseline.iforest, z);
    const double s_lof = learners::score_lof(baseline.lof, z);
    const double p = learners::predict_gbt(population, z);

    CheckupVerdict v;
    v.has_votes = true;
    v.votes.ocsvm = d < 0.0;
    v.votes.iforest = s_if > baseline.iforest.score_threshold;
    v.votes.lof = s_lof > baseline.lof.lof_threshold;
    v.votes.gbt = p > 0.5;
    v.impaired = v.votes.impaired_count() >= 2; // 2-2 splits fail safe
    v.mean_score = q9((baseline.norm_ocsvm.apply(-d) + baseline.norm_iforest.apply(s_if) +
                       baseline.norm_lof.apply(s_lof) + p) /
                      4.0);
    v.threshold = q9(baseline.score_threshold);
    return v;
}

SubjectResult aggregate_subject(const std::vector<CheckupVerdict>& verdicts, TiePolicy policy) {
    if (verdicts.empty()) throw EmptyInput("no verdicts to aggregate");
    SubjectResult r;
    r.subject_id = verdicts.front().subject_id;
    double margin = 0.0;
    for (const auto& v : verdicts) {
        if (v.subject_id != r.subject_id)
            throw InvariantViolation("aggregate_subject fed verdicts of " + v.subject_id +
                                     " and " + r.subject_id);
        if (v.impaired == v.truth_impaired)
            ++r.n_correct;
        else
            ++r.n_wrong;
        margin += (v.mean_score - v.threshold) * (v.truth_impaired ? 1.0 : -1.0);
    }
    if (r.n_correct > r.n_wrong) {
        r.outcome = SubjectOutcome::Correct;
    } else if (r.n_correct < r.n_wrong) {
        r.outcome = SubjectOutcome::Wrong;
    } else if (policy == TiePolicy::ScoreMargin && margin != 0.0) {
        r.outcome = margin > 0.0 ? SubjectOutcome::Correct : SubjectOutcome::Wrong;
    } else {
        r.outcome = SubjectOutcome::Omitted;
    }
    return r;
}

std::vector<CheckupVerdict> fuse_streams(const std::vector<CheckupVerdict>& native,
                                         const std::vector<CheckupVerdict>& cloud) {
    if (native.size() != cloud.size())
        throw KeyMismatch("stream sizes differ: " + std::to_string(native.size()) + " vs " +
                          std::to_string(cloud.size()));

    using Key = std::tuple<std::string, int, int>;
    std::map<Key, size_t> cloud_by_key;
    for (size_t i = 0; i < cloud.size(); ++i) {
        const auto [it, fresh] = cloud_by_key.emplace(
            Key{cloud[i].subject_id, cloud[i].shift_index, cloud[i].checkup_index}, i);
        if (!fresh)
            throw KeyMismatch("duplicate cloud checkup key " + cloud[i].subject_id + "/" +
                              std::to_string(cloud[i].shift_index) + "/" +
                              std::to_string(cloud[i].checkup_index));
    }

    std::vector<CheckupVerdict> fused;
    fused.reserve(native.size());
    for (const auto& a : native) {
        const auto it = cloud_by_key.find(Key{a.subject_id, a.shift_index, a.checkup_index});
        if (it == cloud_by_key.end())
            throw KeyMismatch("no cloud checkup pairs with " + a.subject_id + "/" +
                              std::to_string(a.shift_index) + "/" +
                              std::to_string(a.checkup_index));
        const CheckupVerdict& b = cloud[it->second];
        cloud_by_key.erase(it);

        CheckupVerdict f = a;
        f.channel = ChannelId::Fused;
        f.has_votes = false;
        f.votes = Votes{};
        f.mean_score = q9((a.mean_score + b.mean_score) / 2.0);
        f.threshold = q9((a.threshold + b.threshold) / 2.0);
        f.impaired = f.mean_score >= f.threshold; // boundary fails safe
        fused.push_back(std::move(f));
    }
    return fused;
}

JsonlSink::JsonlSink(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw IoError("cannot open intervention sink " + path.string());
}

void JsonlSink::emit(const InterventionEvent& e) {
    const json doc{{"t", q9(e.t)},
                   {"subject_id", e.subject_id},
                   {"level", to_string(e.level)},
                   {"consecutive", e.consecutive}};
    // Alerts are operational events: land on disk when they fire, not
    // whenever the stream buffer happens to drain.
    out_ << doc.dump() << '\n' << std::flush;
    if (!out_) throw IoError("short write to intervention sink");
}

std::vector<InterventionEvent> emit_intervention(const std::vector<CheckupVerdict>& verdicts,
                                                 InterventionSink* sink) {
    std::vector<CheckupVerdict> ordered = verdicts;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const CheckupVerdict& a, const CheckupVerdict& b) {
                         return std::tie(a.shift_index, a.t, a.checkup_index) <
                                std::tie(b.shift_index, b.t, b.checkup_index);
                     });

    std::vector<InterventionEvent> events;
    int consecutive = 0;
    for (const auto& v : ordered) {
        if (v.subject_id != ordered.front().subject_id)
            throw InvariantViolation("intervention ladder fed verdicts of " + v.subject_id +
                                     " and " + ordered.front().subject_id);
        if (!v.impaired) {
            consecutive = 0;
            continue;
        }
        ++consecutive;
        InterventionEvent e;
        e.t = v.t;
        e.subject_id = v.subject_id;
        e.consecutive = consecutive;
        e.level = consecutive == 1   ? InterventionLevel::Notify
                  : consecutive == 2 ? InterventionLevel::Alert
                                     : InterventionLevel::Escalate;
        if (sink) sink->emit(e);
        events.push_back(std::move(e));
    }
    return events;
}

namespace {

json stats_to_json(const features::BaselineStats& s) {
    return json{{"mean", s.mean}, {"sd", s.sd}, {"n_checkups", s.n_checkups}};
}

features::BaselineStats stats_from_json(const json& j) {
    features::BaselineStats s;
    j.at("mean").get_to(s.mean);
    j.at("sd").get_to(s.sd);
    j.at("n_checkups").get_to(s.n_checkups);
    return s;
}

json norm_to_json(const ScoreNorm& n) { return json{{"lo", n.lo}, {"hi", n.hi}}; }

ScoreNorm norm_from_json(const json& j) {
    return ScoreNorm{j.at("lo").get<double>(), j.at("hi").get<double>()};
}

} // namespace

void save_baseline(const DriverBaseline& b, const std::filesystem::path& path) {
    const json doc{{"v", 1},
                   {"kind", "driver_baseline"},
                   {"subject_id", b.subject_id},
                   {"stats", stats_to_json(b.stats)},
                   {"ocsvm", b.ocsvm},
                   {"iforest", b.iforest},
                   {"lof", b.lof},
                   {"norm_ocsvm", norm_to_json(b.norm_ocsvm)},
                   {"norm_iforest", norm_to_json(b.norm_iforest)},
                   {"norm_lof", norm_to_json(b.norm_lof)},
                   {"score_threshold", b.score_threshold}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write baseline " + path.string());
    out << doc.dump() << '\n';
    if (!out) throw IoError("short write to " + path.string());
}

DriverBaseline load_baseline(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile("cannot open baseline " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.is_object() || doc.value("v", -1) != 1 || doc.value("kind", "") != "driver_baseline")
        throw ModelFormatError(path.string() + ": not a v1 driver_baseline file");
    try {
        DriverBaseline b;
        b.subject_id = doc.at("subject_id").get<std::string>();
        b.stats = stats_from_json(doc.at("stats"));
        b.ocsvm = doc.at("ocsvm").get<learners::OcsvmModel>();
        b.iforest = doc.at("iforest").get<learners::IsoForestModel>();
        b.lof = doc.at("lof").get<learners::LofModel>();
        b.norm_ocsvm = norm_from_json(doc.at("norm_ocsvm"));
        b.norm_iforest = norm_from_json(doc.at("norm_iforest"));
        b.norm_lof = norm_from_json(doc.at("norm_lof"));
        b.score_threshold = doc.at("score_threshold").get<double>();
        return b;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

bool operator==(const ScoreNorm& a, const ScoreNorm& b) { return a.lo == b.lo && a.hi == b.hi; }

bool operator==(const DriverBaseline& a, const DriverBaseline& b) {
    return a.subject_id == b.subject_id && a.stats.mean == b.stats.mean &&
           a.stats.sd == b.stats.sd && a.stats.n_checkups == b.stats.n_checkups &&
           a.ocsvm == b.ocsvm && a.iforest == b.iforest && a.lof == b.lof &&
           a.norm_ocsvm == b.norm_ocsvm && a.norm_iforest == b.norm_iforest &&
           a.norm_lof == b.norm_lof && a.score_threshold == b.score_threshold;
}

} // namespace vigil::ensemble
