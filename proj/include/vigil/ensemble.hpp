#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "vigil/errors.hpp"
#include "vigil/features.hpp"
#include "vigil/learners/gbt.hpp"
#include "vigil/learners/iforest.hpp"
#include "vigil/learners/lof.hpp"
#include "vigil/learners/ocsvm.hpp"

namespace vigil::ensemble {

// Min-max normalization of one model's native score scale onto the
// calibration score distribution, clamped to [0, 1.5]. Needed because the
// four classifiers score on incompatible scales.
struct ScoreNorm {
    double lo = 0.0;
    double hi = 1.0;
    double apply(double score) const;
};

struct CalibConfig {
    double nu = 0.1;
    double gamma = 0.0; // 0 = default_gamma of the z-scored matrix
    int n_trees = 100;
    int psi = 256;      // capped at n
    int lof_k = 0;      // 0 = default_lof_k(n)
    uint64_t seed = 0;  // forest subsampling
};

// Per-driver sober calibration bundle: feature statistics plus the three
// one-class models trained on the identical z-scored sober matrix.
struct DriverBaseline {
    std::string subject_id;
    features::BaselineStats stats;
    learners::OcsvmModel ocsvm;
    learners::IsoForestModel iforest;
    learners::LofModel lof;
    ScoreNorm norm_ocsvm, norm_iforest, norm_lof;
    // Decision boundary on the normalized mean-score scale: the mean of
    // the four per-model thresholds after normalization (GBT's is 0.5).
    double score_threshold = 0.5;
};

enum class ChannelId { Native, Cloud, Fused };
std::string to_string(ChannelId c);
ChannelId channel_from_string(const std::string& s);

struct Votes {
    bool ocsvm = false; // true = Impaired
    bool iforest = false;
    bool lof = false;
    bool gbt = false;
    int impaired_count() const { return int(ocsvm) + int(iforest) + int(lof) + int(gbt); }
};

struct CheckupVerdict {
    std::string subject_id;
    int shift_index = 1;
    int checkup_index = 0;
    ChannelId channel = ChannelId::Native;
    double t = 0.0; // checkup onset, seconds on the subject's timeline
    bool has_votes = true; // fused verdicts carry no per-model votes
    Votes votes;
    double mean_score = 0.0;
    double threshold = 0.5; // on the mean_score scale
    bool impaired = false;  // the verdict
    bool truth_impaired = false;
    telemetry::Condition condition = telemetry::Condition::Sober;
    double severity = 0.0;
};

enum class SubjectOutcome { Correct, Wrong, Omitted };
std::string to_string(SubjectOutcome o);

struct SubjectResult {
    std::string subject_id;
    int n_correct = 0;
    int n_wrong = 0;
    SubjectOutcome outcome = SubjectOutcome::Omitted;
};

// How aggregate_subject resolves n_correct == n_wrong. Single streams omit
// the subject (the paper drops those subjects from its table); the fused
// channel decides by the sign of the summed truth-aligned score margins,
// so only exact score equality still omits.
enum class TiePolicy { Omit, ScoreMargin };

// Trains stats + the three one-class models on >= 10 sober checkup
// vectors (TooFewCheckups below). Score normalization ranges and the
// normalized decision threshold come from the calibration scores.
DriverBaseline calibrate_driver(const std::string& subject_id,
                                const std::vector<features::FeatureVector>& sober,
                                const CalibConfig& config = {});

// LOSO population model: GBT over z-scored rows of every subject except
// the holdout, labels sober = 0 / impaired = 1. Rows carry the owning
// subject's id. Requires >= 2 non-holdout subjects contributing both
// labels (DegenerateLabels otherwise).
struct LabeledRow {
    std::string subject_id;
    std::vector<double> z; // per-driver z-scored features
    int label = 0;
};
learners::GbtModel train_population(const std::vector<LabeledRow>& rows,
                                    const std::string& holdout_subject,
                                    const learners::GbtConfig& config = {});

// Z-scores the raw vector with the baseline stats, runs the four
// classifiers, and applies the equal-weight vote: Impaired on 3 or 4
// votes, Sober on 0 or 1, and Impaired on a 2-2 split (fail-safe policy).
// mean_score is the mean of the four normalized scores. Ids, t, truth and
// condition fields are left for the caller to fill.
CheckupVerdict run_checkup(const features::FeatureVector& fv,
                           const DriverBaseline& baseline,
                           const learners::GbtModel& population);

// Checkup correct iff verdict matches truth; Correct/Wrong by majority,
// ties per policy. EmptyInput on an empty list.
SubjectResult aggregate_subject(const std::vector<CheckupVerdict>& verdicts,
                                TiePolicy policy = TiePolicy::Omit);

// Score-level fusion of the two streams, matched by (subject, shift,
// checkup): fused mean_score is the average of the streams' mean_scores,
// fused threshold the midpoint of their thresholds, and the verdict is
// Impaired on score >= threshold (boundary fails safe). KeyMismatch when
// the two lists do not pair up exactly.
std::vector<CheckupVerdict> fuse_streams(const std::vector<CheckupVerdict>& native,
                                         const std::vector<CheckupVerdict>& cloud);

enum class InterventionLevel { Notify, Alert, Escalate };
std::string to_string(InterventionLevel level);

struct InterventionEvent {
    double t = 0.0;
    std::string subject_id;
    InterventionLevel level = InterventionLevel::Notify;
    int consecutive = 0; // impaired run length that triggered the event
};

class InterventionSink {
public:
    virtual ~InterventionSink() = default;
    virtual void emit(const InterventionEvent& e) = 0;
};

// Default sink: one JSON object per line, monotone t per subject.
class JsonlSink : public InterventionSink {
public:
    explicit JsonlSink(const std::filesystem::path& path);
    void emit(const InterventionEvent& e) override;

private:
    std::ofstream out_;
};

// Walks one subject's verdicts in time order and escalates on consecutive
// impaired checkups: 1st Notify, 2nd Alert, 3rd and later Escalate; a
// sober checkup resets the ladder. Returns the events and, when a sink is
// given, emits them in order.
std::vector<InterventionEvent> emit_intervention(const std::vector<CheckupVerdict>& verdicts,
                                                 InterventionSink* sink = nullptr);

void save_baseline(const DriverBaseline& b, const std::filesystem::path& path);
DriverBaseline load_baseline(const std::filesystem::path& path);

bool operator==(const ScoreNorm& a, const ScoreNorm& b);
bool operator==(const DriverBaseline& a, const DriverBaseline& b);

} // namespace vigil::ensemble
