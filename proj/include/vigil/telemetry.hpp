#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vigil/errors.hpp"
#include "vigil/probe.hpp"

namespace vigil::telemetry {

// The two monitoring streams a session records. The native stream is the
// in-cabin sensor; the cloud stream is the same response replayed through
// a second, lower-rate and noisier system.
enum class StreamId { Native, Cloud };

enum class Condition { Sober, Alcohol, Thc, Fatigue, TimeOnTask };

// Tracking quality of one sample. Interpolated marks samples whose gaze
// and pupil were filled in by clean_trace over a short invalid gap; they
// are usable downstream but are not raw measurements.
enum class SampleQuality : uint8_t { Valid, Invalid, Interpolated };

struct OcularSample {
    double t = 0.0;        // seconds since window start, strictly increasing
    double gaze_x = 0.0;   // degrees of visual angle, 0 = straight ahead
    double gaze_y = 0.0;
    double pupil = 3.5;    // millimeters, (0, 12) when tracked
    double eyelid = 1.0;   // aperture fraction in [0, 1]
    SampleQuality quality = SampleQuality::Valid;

    bool usable() const { return quality != SampleQuality::Invalid; }
};

struct Trace {
    double rate = 60.0; // nominal samples/second
    StreamId stream_id = StreamId::Native;
    std::vector<OcularSample> samples;
};

struct SessionManifest {
    std::string subject_id;
    int shift_index = 1; // 1..10
    Condition condition = Condition::Sober;
    double severity = 0.0; // headline impairment level: max over checkups
    std::vector<double> checkup_severities; // one per probe train
    std::vector<std::string> probe_train_refs;
    std::map<StreamId, std::vector<std::string>> trace_refs;
};

struct Session {
    SessionManifest manifest;
    std::vector<probe::ProbeTrain> trains;
    std::map<StreamId, std::vector<Trace>> traces; // per stream, one per checkup
};

std::string to_string(StreamId s);
StreamId stream_from_string(const std::string& s);
std::string to_string(Condition c);
Condition condition_from_string(const std::string& s);

// Every float that can reach a file goes through q9 at its source: format
// with 9 significant digits, parse back. Values produced this way survive
// serialize/deserialize bit-exactly.
double q9(double v);
std::string fmt9(double v);

void validate_sample(const OcularSample& s);
void validate_trace(const Trace& t);
void validate_manifest(const SessionManifest& m);
void validate_session(const Session& s);

// Trace files are JSONL: a header line carrying rate and stream_id, then
// one sample per line with fields t, gx, gy, pupil, lid, valid (plus
// interp:true on interpolated samples). Parse failures and invariant
// violations report the 1-based line number.
void write_trace(const Trace& t, const std::filesystem::path& path);
Trace read_trace(const std::filesystem::path& path);

void write_manifest(const SessionManifest& m, const std::filesystem::path& path);
SessionManifest read_manifest(const std::filesystem::path& path);

// Writes manifest.json plus the train and trace files it references under
// dir. read_session(write_session(s)) == s bit-exactly for valid sessions.
void write_session(const Session& s, const std::filesystem::path& dir);
Session read_session(const std::filesystem::path& manifest_path);

// Fills invalid gaps no longer than max_gap_s (gap measured between the
// bracketing valid samples) by linear interpolation of gaze and pupil.
// Filled samples are marked Interpolated; the eyelid channel is kept as
// recorded so blinks survive cleaning. Longer gaps and gaps touching the
// trace edges stay invalid. Idempotent.
Trace clean_trace(const Trace& t, double max_gap_s = 0.200);

bool operator==(const OcularSample& a, const OcularSample& b);
bool operator==(const Trace& a, const Trace& b);
bool operator==(const SessionManifest& a, const SessionManifest& b);
bool operator==(const Session& a, const Session& b);

} // namespace vigil::telemetry
