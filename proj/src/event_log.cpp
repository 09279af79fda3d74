#include "omnistream/event_log.hpp"

#include <stdexcept>

namespace omnistream {

const char* to_string(Stage stage) {
    switch (stage) {
        case Stage::Vad: return "vad";
        case Stage::Encode: return "encode";
        case Stage::Llm: return "llm";
        case Stage::Sink: return "sink";
    }
    return "?";
}

Stage stage_from_string(const std::string& s) {
    if (s == "vad") return Stage::Vad;
    if (s == "encode") return Stage::Encode;
    if (s == "llm") return Stage::Llm;
    if (s == "sink") return Stage::Sink;
    throw std::invalid_argument("unknown stage: " + s);
}

void ComputeModel::validate() const {
    if (encode_cost_per_frame_us < 0 || encode_cost_per_audio_second_us < 0 ||
        prefill_cost_per_token_us < 0 || decode_step_us < 0 ||
        audio_decode_cost_per_frame_us < 0 || sink_startup_cost_us < 0) {
        throw std::invalid_argument("compute model costs must be non-negative");
    }
}

}  // namespace omnistream
