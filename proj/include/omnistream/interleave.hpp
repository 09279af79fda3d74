#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace omnistream {

inline constexpr const char* kAudioStartToken = "<|audio-start-token|>";
inline constexpr const char* kAudioEndToken = "<|audio-end-token|>";

enum class ChunkMode { Dense, Sparse };

inline constexpr int kDenseChunkMs = 1000;
inline constexpr int kSparseChunkMs = 2000;
inline constexpr int kDenseFramesPerChunk = 2;
inline constexpr int kSparseFramesPerChunk = 1;

struct VideoGroup {
    std::int64_t timestamp_ms = 0;
    std::vector<std::uint32_t> token_ids;
};

// One synchronized audio-visual window. Chunks always start on a whole
// second and every video timestamp falls inside the window's first second;
// that keeps the window recoverable from the serialized text alone.
struct Chunk {
    std::int64_t start_ms = 0;
    int duration_ms = kDenseChunkMs;
    ChunkMode mode = ChunkMode::Dense;
    std::vector<VideoGroup> video_groups;
    std::vector<std::uint32_t> audio_feature_ids;
    bool is_first_of_turn = false;
    bool is_last_of_turn = false;

    /// Model-token accounting: one token per timestamp text, one per visual
    /// id, one per audio feature id, one per turn marker present.
    std::int64_t token_count() const;
};

using InterleavedSequence = std::vector<Chunk>;

struct WindowMismatchError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct FrameCountMismatchError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct FrameOutOfWindowError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
    std::size_t offset;  // byte offset of the first grammar violation
    ParseError(std::size_t at, const std::string& what)
        : std::runtime_error(what), offset(at) {}
};

/// Fractional-rate feature clock. Feature frames start every
/// 1000*rate_den/rate_num milliseconds; a window of W ms yields every frame
/// whose start falls inside it, with the remainder carried to the next
/// window. Defaults to 12.5 features per second (80 ms frames).
struct AudioFeatureClock {
    int rate_num = 25;
    int rate_den = 2;
    // ticks are milliseconds scaled by rate_num; one frame period is
    // 1000*rate_den ticks. carry = ticks until the next frame start.
    std::int64_t carry_ticks = 0;

    /// Consumes a window (multiple of 1000 ms) and returns the feature count.
    int advance(int window_ms);
};

Chunk build_chunk(std::vector<VideoGroup> groups,
                  std::vector<std::uint32_t> audio_ids,
                  std::int64_t window_start_ms,
                  std::int64_t window_end_ms,
                  ChunkMode mode);

/// Timestamp text: whole seconds bare ("Second3"), sub-second with the
/// shortest exact decimal ("Second0.5", "Second2.25").
std::string render_timestamp(std::int64_t ms);

/// One chunk per line; per video group "Second{t}:" glued to v-prefixed ids;
/// a-prefixed audio ids follow the groups, bracketed by the audio start/end
/// markers on the turn's first/last dense chunk. See docs/formats.md.
std::string serialize(std::span<const Chunk> seq);

/// Exact inverse of serialize on canonical sequences.
InterleavedSequence parse(std::string_view text);

/// Checks the sequence-level invariants (window ordering, per-mode shape,
/// marker discipline). Throws std::invalid_argument describing the first
/// violation.
void validate_sequence(std::span<const Chunk> seq);

}  // namespace omnistream
