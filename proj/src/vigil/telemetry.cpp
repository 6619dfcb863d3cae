#include "vigil/telemetry.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace vigil::telemetry {

using nlohmann::json;

std::string to_string(StreamId s) {
    return s == StreamId::Native ? "Native" : "Cloud";
}

StreamId stream_from_string(const std::string& s) {
    if (s == "Native") return StreamId::Native;
    if (s == "Cloud") return StreamId::Cloud;
    throw ParseError("unknown stream_id '" + s + "'");
}

std::string to_string(Condition c) {
    switch (c) {
        case Condition::Sober: return "Sober";
        case Condition::Alcohol: return "Alcohol";
        case Condition::Thc: return "THC";
        case Condition::Fatigue: return "Fatigue";
        case Condition::TimeOnTask: return "TimeOnTask";
    }
    return "Sober";
}

Condition condition_from_string(const std::string& s) {
    if (s == "Sober") return Condition::Sober;
    if (s == "Alcohol") return Condition::Alcohol;
    if (s == "THC") return Condition::Thc;
    if (s == "Fatigue") return Condition::Fatigue;
    if (s == "TimeOnTask") return Condition::TimeOnTask;
    throw ParseError("unknown condition '" + s + "'");
}

std::string fmt9(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
    return std::string(buf, res.ptr);
}

double q9(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
    *res.ptr = '\0';
    return std::strtod(buf, nullptr);
}

namespace {

bool finite(double v) { return std::isfinite(v); }

[[noreturn]] void bad_line(const std::filesystem::path& path, size_t line, const std::string& what, bool parse) {
    std::string msg = path.string() + ": line " + std::to_string(line) + ": " + what;
    if (parse) throw ParseError(msg);
    throw InvariantViolation(msg);
}

} // namespace

void validate_sample(const OcularSample& s) {
    if (!finite(s.t) || !finite(s.gaze_x) || !finite(s.gaze_y) || !finite(s.pupil) || !finite(s.eyelid))
        throw InvariantViolation("sample has non-finite field at t=" + fmt9(s.t));
    if (s.t < 0.0) throw InvariantViolation("sample t is negative: " + fmt9(s.t));
    if (s.quality != SampleQuality::Invalid) {
        if (!(s.pupil > 0.0 && s.pupil < 12.0))
            throw InvariantViolation("pupil out of (0,12) mm at t=" + fmt9(s.t) + ": " + fmt9(s.pupil));
        if (!(s.eyelid >= 0.0 && s.eyelid <= 1.0))
            throw InvariantViolation("eyelid out of [0,1] at t=" + fmt9(s.t) + ": " + fmt9(s.eyelid));
    }
}

void validate_trace(const Trace& t) {
    if (!(t.rate > 0.0) || !finite(t.rate)) throw InvariantViolation("trace rate must be positive");
    const double max_dt = 2.0 / t.rate + 1e-9;
    for (size_t i = 0; i < t.samples.size(); ++i) {
        validate_sample(t.samples[i]);
        if (i > 0) {
            const auto& prev = t.samples[i - 1];
            const auto& cur = t.samples[i];
            if (!(cur.t > prev.t))
                throw InvariantViolation("trace t not strictly increasing at index " + std::to_string(i));
            if (prev.usable() && cur.usable() && cur.t - prev.t > max_dt)
                throw InvariantViolation("valid samples spaced " + fmt9(cur.t - prev.t) +
                                         " s apart, over 2x nominal at index " + std::to_string(i));
        }
    }
}

void validate_manifest(const SessionManifest& m) {
    if (m.subject_id.empty()) throw InvariantViolation("manifest subject_id empty");
    if (m.shift_index < 1 || m.shift_index > 10)
        throw InvariantViolation("shift_index out of 1..10: " + std::to_string(m.shift_index));
    if (!(m.severity >= 0.0 && m.severity <= 1.0))
        throw InvariantViolation("severity out of [0,1]: " + fmt9(m.severity));
    if (m.condition == Condition::Sober && m.severity != 0.0)
        throw InvariantViolation("Sober session must have severity 0, got " + fmt9(m.severity));
    if (m.condition != Condition::Sober && !(m.severity > 0.0))
        throw InvariantViolation("non-Sober session must have severity > 0");
    if (m.checkup_severities.size() != m.probe_train_refs.size())
        throw InvariantViolation("checkup_severities count does not match probe_train_refs");
    for (double lam : m.checkup_severities)
        if (!(lam >= 0.0 && lam <= 1.0)) throw InvariantViolation("checkup severity out of [0,1]");
    for (const auto& [stream, refs] : m.trace_refs) {
        (void)stream;
        if (refs.size() != m.probe_train_refs.size())
            throw InvariantViolation("per-stream trace count does not match probe train count");
    }
}

void validate_session(const Session& s) {
    validate_manifest(s.manifest);
    if (s.trains.empty() || s.traces.empty()) throw EmptySession("session has no trains or no traces");
    if (s.trains.size() != s.manifest.probe_train_refs.size())
        throw InvariantViolation("train count does not match manifest refs");
    for (const auto& [stream, traces] : s.traces) {
        if (traces.size() != s.trains.size())
            throw InvariantViolation("stream " + to_string(stream) + " trace count does not match train count");
        for (const auto& tr : traces) {
            if (tr.stream_id != stream)
                throw InvariantViolation("trace stream_id does not match its manifest slot");
            validate_trace(tr);
        }
    }
    for (const auto& tr : s.trains) probe::validate_train(tr);
}

// ---------------------------------------------------------------------------
// Trace JSONL

namespace {

void append_field(std::string& out, const char* key, double v) {
    out += '"';
    out += key;
    out += "\":";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
    out.append(buf, res.ptr);
}

} // namespace

void write_trace(const Trace& t, const std::filesystem::path& path) {
    std::string out;
    out.reserve(96 * (t.samples.size() + 1));
    out += "{\"rate\":";
    out += fmt9(t.rate);
    out += ",\"stream_id\":\"";
    out += to_string(t.stream_id);
    out += "\"}\n";
    for (const auto& s : t.samples) {
        out += '{';
        append_field(out, "t", s.t);
        out += ',';
        append_field(out, "gx", s.gaze_x);
        out += ',';
        append_field(out, "gy", s.gaze_y);
        out += ',';
        append_field(out, "pupil", s.pupil);
        out += ',';
        append_field(out, "lid", s.eyelid);
        out += s.quality == SampleQuality::Invalid ? ",\"valid\":false" : ",\"valid\":true";
        if (s.quality == SampleQuality::Interpolated) out += ",\"interp\":true";
        out += "}\n";
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

Trace read_trace(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingFile("cannot open trace file: " + path.string());
    Trace trace;
    std::string line;
    size_t line_no = 0;
    bool have_header = false;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            bad_line(path, line_no, std::string("malformed JSON: ") + e.what(), true);
        }
        if (!have_header) {
            if (!j.contains("rate") || !j.contains("stream_id"))
                bad_line(path, line_no, "header must carry rate and stream_id", true);
            trace.rate = j.at("rate").get<double>();
            trace.stream_id = stream_from_string(j.at("stream_id").get<std::string>());
            if (!(trace.rate > 0.0)) bad_line(path, line_no, "rate must be positive", false);
            have_header = true;
            continue;
        }
        OcularSample s;
        try {
            s.t = j.at("t").get<double>();
            s.gaze_x = j.at("gx").get<double>();
            s.gaze_y = j.at("gy").get<double>();
            s.pupil = j.at("pupil").get<double>();
            s.eyelid = j.at("lid").get<double>();
            const bool valid = j.at("valid").get<bool>();
            const bool interp = j.value("interp", false);
            s.quality = !valid ? SampleQuality::Invalid
                               : (interp ? SampleQuality::Interpolated : SampleQuality::Valid);
        } catch (const json::exception& e) {
            bad_line(path, line_no, std::string("bad sample fields: ") + e.what(), true);
        }
        try {
            validate_sample(s);
        } catch (const InvariantViolation& e) {
            bad_line(path, line_no, e.what(), false);
        }
        if (!trace.samples.empty() && !(s.t > trace.samples.back().t))
            bad_line(path, line_no, "t not strictly increasing", false);
        trace.samples.push_back(s);
    }
    if (!have_header) throw ParseError(path.string() + ": empty trace file (missing header line)");
    validate_trace(trace);
    return trace;
}

// ---------------------------------------------------------------------------
// Manifest JSON

void write_manifest(const SessionManifest& m, const std::filesystem::path& path) {
    validate_manifest(m);
    json j;
    j["v"] = 1;
    j["subject_id"] = m.subject_id;
    j["shift_index"] = m.shift_index;
    j["condition"] = to_string(m.condition);
    j["severity"] = m.severity;
    j["checkup_severities"] = m.checkup_severities;
    j["probe_trains"] = m.probe_train_refs;
    json traces = json::object();
    for (const auto& [stream, refs] : m.trace_refs) traces[to_string(stream)] = refs;
    j["traces"] = traces;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << j.dump(2) << "\n";
    if (!f) throw IoError("write failed: " + path.string());
}

SessionManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingFile("cannot open manifest: " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": malformed JSON: " + e.what());
    }
    SessionManifest m;
    try {
        if (j.value("v", 0) != 1)
            throw ParseError(path.string() + ": unsupported manifest schema version");
        m.subject_id = j.at("subject_id").get<std::string>();
        m.shift_index = j.at("shift_index").get<int>();
        m.condition = condition_from_string(j.at("condition").get<std::string>());
        m.severity = j.at("severity").get<double>();
        m.checkup_severities = j.at("checkup_severities").get<std::vector<double>>();
        m.probe_train_refs = j.at("probe_trains").get<std::vector<std::string>>();
        for (const auto& [key, refs] : j.at("traces").items())
            m.trace_refs[stream_from_string(key)] = refs.get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": bad manifest fields: " + e.what());
    }
    validate_manifest(m);
    return m;
}

// ---------------------------------------------------------------------------
// Session

void write_session(const Session& s, const std::filesystem::path& dir) {
    if (s.trains.empty() || s.traces.empty())
        throw EmptySession("refusing to write a session with no trains or no traces");
    validate_session(s);

    std::error_code ec;
    std::filesystem::create_directories(dir / "trains", ec);
    std::filesystem::create_directories(dir / "traces", ec);
    if (ec) throw IoError("cannot create session directories under " + dir.string());

    SessionManifest m = s.manifest;
    m.probe_train_refs.clear();
    m.trace_refs.clear();
    char name[64];
    for (size_t i = 0; i < s.trains.size(); ++i) {
        std::snprintf(name, sizeof(name), "trains/train_%03zu.json", i);
        m.probe_train_refs.emplace_back(name);
        probe::write_train(s.trains[i], dir / name);
    }
    for (const auto& [stream, traces] : s.traces) {
        const char* tag = stream == StreamId::Native ? "native" : "cloud";
        auto& refs = m.trace_refs[stream];
        for (size_t i = 0; i < traces.size(); ++i) {
            std::snprintf(name, sizeof(name), "traces/%s_%03zu.jsonl", tag, i);
            refs.emplace_back(name);
            write_trace(traces[i], dir / name);
        }
    }
    write_manifest(m, dir / "manifest.json");
}

Session read_session(const std::filesystem::path& manifest_path) {
    Session s;
    s.manifest = read_manifest(manifest_path);
    const auto base = manifest_path.parent_path();
    for (const auto& ref : s.manifest.probe_train_refs) {
        const auto p = base / ref;
        if (!std::filesystem::exists(p)) throw MissingFile("referenced train file missing: " + p.string());
        s.trains.push_back(probe::read_train(p));
    }
    for (const auto& [stream, refs] : s.manifest.trace_refs) {
        auto& traces = s.traces[stream];
        for (const auto& ref : refs) {
            const auto p = base / ref;
            if (!std::filesystem::exists(p)) throw MissingFile("referenced trace file missing: " + p.string());
            traces.push_back(read_trace(p));
        }
    }
    validate_session(s);
    return s;
}

// ---------------------------------------------------------------------------
// Cleaning

Trace clean_trace(const Trace& t, double max_gap_s) {
    Trace out = t;
    auto& smp = out.samples;
    const size_t n = smp.size();
    size_t i = 0;
    while (i < n) {
        if (smp[i].quality != SampleQuality::Invalid) {
            ++i;
            continue;
        }
        size_t run_begin = i;
        while (i < n && smp[i].quality == SampleQuality::Invalid) ++i;
        const size_t run_end = i; // one past
        if (run_begin == 0 || run_end == n) continue; // edge gap: nothing to bracket with
        const auto& prev = smp[run_begin - 1];
        const auto& next = smp[run_end];
        if (!prev.usable() || !next.usable()) continue;
        const double gap = next.t - prev.t;
        if (gap > max_gap_s + 1e-9) continue;
        for (size_t j = run_begin; j < run_end; ++j) {
            const double w = (smp[j].t - prev.t) / gap;
            smp[j].gaze_x = q9(prev.gaze_x + w * (next.gaze_x - prev.gaze_x));
            smp[j].gaze_y = q9(prev.gaze_y + w * (next.gaze_y - prev.gaze_y));
            smp[j].pupil = q9(prev.pupil + w * (next.pupil - prev.pupil));
            // eyelid left as recorded: blinks must survive cleaning
            smp[j].quality = SampleQuality::Interpolated;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Equality (bit-exact; round-trip contract)

bool operator==(const OcularSample& a, const OcularSample& b) {
    return a.t == b.t && a.gaze_x == b.gaze_x && a.gaze_y == b.gaze_y &&
           a.pupil == b.pupil && a.eyelid == b.eyelid && a.quality == b.quality;
}

bool operator==(const Trace& a, const Trace& b) {
    return a.rate == b.rate && a.stream_id == b.stream_id && a.samples == b.samples;
}

bool operator==(const SessionManifest& a, const SessionManifest& b) {
    return a.subject_id == b.subject_id && a.shift_index == b.shift_index &&
           a.condition == b.condition && a.severity == b.severity &&
           a.checkup_severities == b.checkup_severities &&
           a.probe_train_refs == b.probe_train_refs && a.trace_refs == b.trace_refs;
}

bool operator==(const Session& a, const Session& b) {
    return a.trains == b.trains && a.traces == b.traces &&
           a.manifest.subject_id == b.manifest.subject_id &&
           a.manifest.shift_index == b.manifest.shift_index &&
           a.manifest.condition == b.manifest.condition &&
           a.manifest.severity == b.manifest.severity &&
           a.manifest.checkup_severities == b.manifest.checkup_severities;
}

} // namespace vigil::telemetry
