#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace omnistream {

// Pipeline stages in tie-breaking priority order: events at the same time
// sort by stage, then by sequence number.
enum class Stage { Vad = 0, Encode = 1, Llm = 2, Sink = 3 };

const char* to_string(Stage stage);
Stage stage_from_string(const std::string& s);

using PayloadValue = std::variant<std::int64_t, std::string>;

struct EventRecord {
    std::int64_t time_ms = 0;
    Stage stage = Stage::Vad;
    std::string kind;
    std::uint64_t seq = 0;
    std::map<std::string, PayloadValue> payload;

    bool operator==(const EventRecord& o) const = default;
};

struct EventLog {
    std::vector<EventRecord> events;

    bool operator==(const EventLog& o) const = default;
};

// Per-stage virtual costs, microseconds internally. Event times are rounded
// up to whole milliseconds only at the log boundary.
struct ComputeModel {
    std::int64_t encode_cost_per_frame_us = 5000;
    std::int64_t encode_cost_per_audio_second_us = 10000;
    std::int64_t prefill_cost_per_token_us = 20;
    std::int64_t decode_step_us = 10000;
    std::int64_t audio_decode_cost_per_frame_us = 2000;
    std::int64_t sink_startup_cost_us = 0;

    void validate() const;
};

inline std::int64_t ceil_ms(std::int64_t us) {
    return (us + 999) / 1000;
}

}  // namespace omnistream
