#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace omnistream {

// Codec frames arrive at 16.67 Hz (exact period 100000/1667 ms); on the
// millisecond clock that is a nominal 60 ms with one short frame about every
// 83 frames. A frame becomes playable only once the three frames after it
// are ready.
inline constexpr int kLookaheadFrames = 3;
inline constexpr std::int64_t kCodecRateCentiHz = 1667;  // 16.67 Hz * 100

struct IndexOutOfRangeError : std::out_of_range {
    using std::out_of_range::out_of_range;
};
struct GateNotArmedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CodecFrame {
    int frame_index = 0;
    std::int64_t ready_at = 0;  // virtual time all four codebook tokens exist
};

/// Start of frame k on the playback clock, milliseconds, drift-exact
/// (round-to-nearest of k * 100000 / 1667).
std::int64_t codec_frame_start_ms(std::int64_t frame_index);

/// Playback duration of frame k in whole milliseconds (60 or 59).
int codec_frame_duration_ms(std::int64_t frame_index);

/// Time frame `index` can start playing: ready time of frame index+3 plus
/// the decode cost, or nullopt while the look-ahead is not yet ready. Time
/// units follow the caller (the arithmetic is unit-agnostic).
std::optional<std::int64_t> playable_time(const std::vector<CodecFrame>& frames, int index,
                                          std::int64_t decode_cost);

struct DeliveryGate {
    std::optional<std::int64_t> endpoint_at;
    std::int64_t delivered_up_to = 0;

    void arm(std::int64_t endpoint_time) { endpoint_at = endpoint_time; }
};

/// Delivery never precedes the endpoint: max(endpoint, playable). Throws
/// GateNotArmedError while no endpoint fired (rollback path: frames are
/// discarded, not delivered).
std::int64_t gate_delivery(DeliveryGate& gate, std::int64_t frame_playable_at);

struct TruncationResult {
    std::string kept_text;
    std::int64_t kept_frame_count = 0;
    std::size_t cut_at_cp = 0;  // code points kept
};

/// Default punctuation set (UTF-8): ASCII and CJK sentence marks.
extern const char* const kDefaultPunctuation;

/// Cuts `text` at the last punctuation mark within its first
/// `interrupt_cp_offset` code points; kept_frame_count maps the kept share
/// onto total_frame_count proportionally by code points.
TruncationResult truncate_on_interrupt(std::string_view text, std::size_t interrupt_cp_offset,
                                       const std::u32string& punctuation,
                                       std::int64_t total_frame_count = 0);

std::u32string parse_punctuation(std::string_view utf8);

}  // namespace omnistream
