#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "omnistream/event_log.hpp"
#include "omnistream/vad.hpp"
#include "omnistream/vision.hpp"

namespace omnistream {

inline constexpr int kFormatVersion = 1;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SchemaError : std::runtime_error {
    int line;
    SchemaError(int at_line, const std::string& what)
        : std::runtime_error(what + " (line " + std::to_string(at_line) + ")"), line(at_line) {}
};

enum class TraceRecordKind { AudioPacket, VideoFrame, SessionEnd };

struct TraceRecord {
    std::int64_t time_ms = 0;
    TraceRecordKind kind = TraceRecordKind::AudioPacket;
    // audio_packet payload
    int duration_ms = 1000;
    std::vector<SpeechRun> runs;
    // video_frame payload
    int width = 0;
    int height = 0;

    bool operator==(const TraceRecord& o) const;
};

struct Trace {
    std::vector<TraceRecord> records;

    bool operator==(const Trace& o) const = default;
};

struct TraceViolation {
    std::string code;  // "ordering", "frame count", "packet shape", "frame window"
    std::string message;
    std::int64_t time_ms = 0;
};

// Line-delimited JSON, UTF-8, mandatory header line carrying the version.
Trace read_trace(const std::string& path);
Trace parse_trace(const std::string& text);
std::string format_trace(const Trace& trace);
void write_trace(const Trace& trace, const std::string& path);

/// Packet shape, ordering/contiguity, two in-window video frames per packet,
/// strictly increasing frame timestamps. Violations come back as data.
std::vector<TraceViolation> validate_trace(const Trace& trace);

EventLog read_log(const std::string& path);
EventLog parse_log(const std::string& text);
std::string format_log(const EventLog& log);
void write_log(const EventLog& log, const std::string& path);

}  // namespace omnistream
