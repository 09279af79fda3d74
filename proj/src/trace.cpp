#include "omnistream/trace.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace omnistream {
namespace {

using nlohmann::json;

void append_escaped(std::string& out, std::string_view s) {
    out += '"';
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    out += '"';
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open file for writing: " + path);
    }
    out << text;
    if (!out) {
        throw IoError("write failed: " + path);
    }
}

json parse_line_json(const std::string& line, int line_no) {
    try {
        return json::parse(line);
    } catch (const json::parse_error&) {
        throw SchemaError(line_no, "line is not valid JSON");
    }
}

void check_header(const json& j, const char* expected_kind, int line_no) {
    if (!j.is_object() || j.value("kind", std::string()) != expected_kind) {
        throw SchemaError(line_no, std::string("first line must be a ") + expected_kind);
    }
    if (j.value("version", -1) != kFormatVersion) {
        throw SchemaError(line_no, "unsupported format version");
    }
}

std::int64_t require_time(const json& j, int line_no) {
    auto it = j.find("time_ms");
    if (it == j.end() || !it->is_number_integer()) {
        throw SchemaError(line_no, "record needs an integer time_ms");
    }
    const std::int64_t t = it->get<std::int64_t>();
    if (t < 0) {
        throw SchemaError(line_no, "time_ms must be non-negative");
    }
    return t;
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) {
            eol = text.size();
        }
        ++line_no;
        fn(text.substr(pos, eol - pos), line_no);
        pos = eol < text.size() ? eol + 1 : eol;
    }
    if (line_no == 0) {
        throw SchemaError(1, "file is empty; expected a header line");
    }
}

}  // namespace

bool TraceRecord::operator==(const TraceRecord& o) const {
    if (time_ms != o.time_ms || kind != o.kind) {
        return false;
    }
    switch (kind) {
        case TraceRecordKind::AudioPacket: {
            if (duration_ms != o.duration_ms || runs.size() != o.runs.size()) {
                return false;
            }
            for (std::size_t i = 0; i < runs.size(); ++i) {
                if (runs[i].offset_ms != o.runs[i].offset_ms ||
                    runs[i].duration_ms != o.runs[i].duration_ms ||
                    runs[i].speech != o.runs[i].speech) {
                    return false;
                }
            }
            return true;
        }
        case TraceRecordKind::VideoFrame:
            return width == o.width && height == o.height;
        case TraceRecordKind::SessionEnd:
            return true;
    }
    return false;
}

std::string format_trace(const Trace& trace) {
    std::string out = "{\"kind\":\"trace_header\",\"version\":1}\n";
    for (const TraceRecord& r : trace.records) {
        out += "{\"time_ms\":" + std::to_string(r.time_ms);
        switch (r.kind) {
            case TraceRecordKind::AudioPacket: {
                out += ",\"kind\":\"audio_packet\",\"duration_ms\":" + std::to_string(r.duration_ms);
                out += ",\"runs\":[";
                for (std::size_t i = 0; i < r.runs.size(); ++i) {
                    if (i) {
                        out += ',';
                    }
                    out += '[' + std::to_string(r.runs[i].duration_ms) + ',' +
                           (r.runs[i].speech ? "1" : "0") + ']';
                }
                out += "]}";
                break;
            }
            case TraceRecordKind::VideoFrame:
                out += ",\"kind\":\"video_frame\",\"width\":" + std::to_string(r.width) +
                       ",\"height\":" + std::to_string(r.height) + '}';
                break;
            case TraceRecordKind::SessionEnd:
                out += ",\"kind\":\"session_end\"}";
                break;
        }
        out += '\n';
    }
    return out;
}

Trace parse_trace(const std::string& text) {
    Trace trace;
    for_each_line(text, [&](const std::string& line, int line_no) {
        const json j = parse_line_json(line, line_no);
        if (line_no == 1) {
            check_header(j, "trace_header", line_no);
            return;
        }
        TraceRecord r;
        r.time_ms = require_time(j, line_no);
        const std::string kind = j.value("kind", std::string());
        if (kind == "audio_packet") {
            r.kind = TraceRecordKind::AudioPacket;
            if (!j.contains("duration_ms") || !j["duration_ms"].is_number_integer()) {
                throw SchemaError(line_no, "audio_packet needs integer duration_ms");
            }
            r.duration_ms = j["duration_ms"].get<int>();
            if (r.duration_ms <= 0) {
                throw SchemaError(line_no, "duration_ms must be positive");
            }
            auto runs = j.find("runs");
            if (runs == j.end() || !runs->is_array() || runs->empty()) {
                throw SchemaError(line_no, "audio_packet needs a non-empty runs array");
            }
            int offset = 0;
            for (const json& e : *runs) {
                if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
                    !e[1].is_number_integer()) {
                    throw SchemaError(line_no, "each run must be [duration_ms, speech01]");
                }
                SpeechRun run;
                run.offset_ms = offset;
                run.duration_ms = e[0].get<int>();
                const int flag = e[1].get<int>();
                if (run.duration_ms <= 0 || (flag != 0 && flag != 1)) {
                    throw SchemaError(line_no, "run duration must be positive and speech flag 0/1");
                }
                run.speech = flag == 1;
                offset += run.duration_ms;
                r.runs.push_back(run);
            }
        } else if (kind == "video_frame") {
            r.kind = TraceRecordKind::VideoFrame;
            if (!j.contains("width") || !j.contains("height") ||
                !j["width"].is_number_integer() || !j["height"].is_number_integer()) {
                throw SchemaError(line_no, "video_frame needs integer width and height");
            }
            r.width = j["width"].get<int>();
            r.height = j["height"].get<int>();
            if (r.width < 1 || r.height < 1) {
                throw SchemaError(line_no, "video_frame dimensions must be positive");
            }
        } else if (kind == "session_end") {
            r.kind = TraceRecordKind::SessionEnd;
        } else {
            throw SchemaError(line_no, "unknown record kind: '" + kind + "'");
        }
        trace.records.push_back(std::move(r));
    });
    return trace;
}

Trace read_trace(const std::string& path) {
    return parse_trace(read_file(path));
}

void write_trace(const Trace& trace, const std::string& path) {
    write_file(path, format_trace(trace));
}

std::vector<TraceViolation> validate_trace(const Trace& trace) {
    std::vector<TraceViolation> out;
    auto flag = [&](const char* code, std::int64_t t, std::string msg) {
        out.push_back({code, std::move(msg), t});
    };

    std::int64_t prev_time = -1;
    bool saw_end = false;
    for (const TraceRecord& r : trace.records) {
        if (saw_end) {
            flag("ordering", r.time_ms, "record after session_end");
        }
        if (r.time_ms < prev_time) {
            flag("ordering", r.time_ms, "records out of time order");
        }
        prev_time = r.time_ms;
        if (r.kind == TraceRecordKind::SessionEnd) {
            saw_end = true;
        }
    }

    struct PacketSpan {
        std::int64_t start;
        std::int64_t end;
        int frames = 0;
    };
    std::vector<PacketSpan> packets;
    for (const TraceRecord& r : trace.records) {
        if (r.kind != TraceRecordKind::AudioPacket) {
            continue;
        }
        if (r.duration_ms != 1000) {
            flag("packet shape", r.time_ms, "request packets carry exactly 1 second of audio");
        }
        int covered = 0;
        for (const SpeechRun& run : r.runs) {
            covered += run.duration_ms;
        }
        if (covered != r.duration_ms) {
            flag("packet shape", r.time_ms, "speech runs do not tile the packet window");
        }
        if (!packets.empty()) {
            const std::int64_t expect = packets.back().end;
            if (r.time_ms != expect) {
                flag("ordering", r.time_ms,
                     r.time_ms < expect ? "packets overlap" : "gap between packets");
            }
        }
        packets.push_back({r.time_ms, r.time_ms + r.duration_ms, 0});
    }

    std::int64_t prev_frame_time = -1;
    for (const TraceRecord& r : trace.records) {
        if (r.kind != TraceRecordKind::VideoFrame) {
            continue;
        }
        if (r.time_ms <= prev_frame_time) {
            flag("frame order", r.time_ms, "video frame timestamps must strictly increase");
        }
        prev_frame_time = r.time_ms;
        bool owned = false;
        for (PacketSpan& p : packets) {
            if (r.time_ms >= p.start && r.time_ms < p.end) {
                ++p.frames;
                owned = true;
                break;
            }
        }
        if (!owned) {
            flag("frame window", r.time_ms, "video frame outside every packet window");
        }
    }
    for (const PacketSpan& p : packets) {
        if (p.frames != 2) {
            flag("frame count", p.start,
                 "packet carries " + std::to_string(p.frames) + " video frames, expected 2");
        }
    }
    return out;
}

std::string format_log(const EventLog& log) {
    std::string out = "{\"kind\":\"log_header\",\"version\":1}\n";
    for (const EventRecord& e : log.events) {
        out += "{\"time_ms\":" + std::to_string(e.time_ms);
        out += ",\"stage\":\"";
        out += to_string(e.stage);
        out += "\",\"kind\":";
        append_escaped(out, e.kind);
        out += ",\"seq\":" + std::to_string(e.seq);
        out += ",\"payload\":{";
        bool first = true;
        for (const auto& [key, value] : e.payload) {
            if (!first) {
                out += ',';
            }
            first = false;
            append_escaped(out, key);
            out += ':';
            if (std::holds_alternative<std::int64_t>(value)) {
                out += std::to_string(std::get<std::int64_t>(value));
            } else {
                append_escaped(out, std::get<std::string>(value));
            }
        }
        out += "}}\n";
    }
    return out;
}

EventLog parse_log(const std::string& text) {
    EventLog log;
    for_each_line(text, [&](const std::string& line, int line_no) {
        const json j = parse_line_json(line, line_no);
        if (line_no == 1) {
            check_header(j, "log_header", line_no);
            return;
        }
        EventRecord e;
        e.time_ms = require_time(j, line_no);
        try {
            e.stage = stage_from_string(j.at("stage").get<std::string>());
            e.kind = j.at("kind").get<std::string>();
            e.seq = j.at("seq").get<std::uint64_t>();
            const json& payload = j.at("payload");
            if (!payload.is_object()) {
                throw SchemaError(line_no, "payload must be an object");
            }
            for (auto it = payload.begin(); it != payload.end(); ++it) {
                if (it->is_number_integer()) {
                    e.payload[it.key()] = it->get<std::int64_t>();
                } else if (it->is_string()) {
                    e.payload[it.key()] = it->get<std::string>();
                } else {
                    throw SchemaError(line_no, "payload values must be integers or strings");
                }
            }
        } catch (const json::exception&) {
            throw SchemaError(line_no, "malformed log record");
        } catch (const std::invalid_argument& ex) {
            throw SchemaError(line_no, ex.what());
        }
        log.events.push_back(std::move(e));
    });
    return log;
}

EventLog read_log(const std::string& path) {
    return parse_log(read_file(path));
}

void write_log(const EventLog& log, const std::string& path) {
    write_file(path, format_log(log));
}

}  // namespace omnistream
