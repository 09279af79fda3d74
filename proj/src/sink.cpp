#include "omnistream/sink.hpp"

#include <algorithm>

#include "omnistream/text.hpp"

namespace omnistream {

const char* const kDefaultPunctuation = ".,!?;:。，！？；：";

std::int64_t codec_frame_start_ms(std::int64_t frame_index) {
    // round(k * 100000 / 16.67Hz) = floor((k * 200000 + 1667) / 3334)
    return (frame_index * 200000 + kCodecRateCentiHz) / (2 * kCodecRateCentiHz);
}

int codec_frame_duration_ms(std::int64_t frame_index) {
    return static_cast<int>(codec_frame_start_ms(frame_index + 1) -
                            codec_frame_start_ms(frame_index));
}

std::optional<std::int64_t> playable_time(const std::vector<CodecFrame>& frames, int index,
                                          std::int64_t decode_cost) {
    if (index < 0 || static_cast<std::size_t>(index) >= frames.size()) {
        throw IndexOutOfRangeError("frame index beyond the known frame list");
    }
    const std::size_t need = static_cast<std::size_t>(index) + kLookaheadFrames;
    if (need >= frames.size()) {
        return std::nullopt;
    }
    return frames[need].ready_at + decode_cost;
}

std::int64_t gate_delivery(DeliveryGate& gate, std::int64_t frame_playable_at) {
    if (!gate.endpoint_at) {
        throw GateNotArmedError("delivery requested before any endpoint fired");
    }
    const std::int64_t at = std::max(*gate.endpoint_at, frame_playable_at);
    gate.delivered_up_to = std::max(gate.delivered_up_to, at);
    return at;
}

TruncationResult truncate_on_interrupt(std::string_view text, std::size_t interrupt_cp_offset,
                                       const std::u32string& punctuation,
                                       std::int64_t total_frame_count) {
    TruncationResult result;
    std::size_t cp_index = 0;
    std::size_t kept_cp = 0;
    std::size_t kept_bytes = 0;
    std::size_t total_cp = 0;
    for (std::size_t pos = 0; pos < text.size();) {
        const DecodedCp d = utf8_decode(text, pos);
        if (cp_index < interrupt_cp_offset &&
            punctuation.find(d.cp) != std::u32string::npos) {
            kept_cp = cp_index + 1;
            kept_bytes = pos + d.bytes;
        }
        pos += d.bytes;
        ++cp_index;
        ++total_cp;
    }
    result.kept_text = std::string(text.substr(0, kept_bytes));
    result.cut_at_cp = kept_cp;
    if (total_cp > 0 && total_frame_count > 0) {
        result.kept_frame_count =
            total_frame_count * static_cast<std::int64_t>(kept_cp) /
            static_cast<std::int64_t>(total_cp);
    }
    return result;
}

std::u32string parse_punctuation(std::string_view utf8) {
    return to_u32(utf8);
}

}  // namespace omnistream
