#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace omnistream {

// Geometry rules for native-resolution visual input: output dimensions are
// multiples of 112, the 14px patch grid therefore comes in multiples of 8,
// the patch count must land in [576, 5832], and a 2x2 spatial unshuffle
// divides the token count by 4.
inline constexpr int kPatchSize = 14;
inline constexpr int kDimMultiple = 112;
inline constexpr int kGridMultiple = kDimMultiple / kPatchSize;  // 8
inline constexpr int kMinPatches = 576;
inline constexpr int kMaxPatches = 5832;
inline constexpr int kUnshuffleFactor = 4;

struct FrameSpec {
    int width = 0;
    int height = 0;
    std::int64_t timestamp_ms = 0;
};

struct ResizePlan {
    int out_width = 0;
    int out_height = 0;
    int patch_rows = 0;
    int patch_cols = 0;
    int tokens_after_unshuffle = 0;
    bool minimal_resize = false;  // true when rounding alone landed in range
};

struct SamplerConfig {
    int default_fps = 2;
    int min_frames = 16;
    int max_frames = 256;
    int per_frame_limit = 1458;     // 5832 / 4
    int sequence_limit = 16384;

    void validate() const;
};

struct SamplingPlan {
    std::vector<std::int64_t> frame_times_ms;
    // effective frame rate as an exact rational (frames per second)
    std::int64_t fps_num = 0;
    std::int64_t fps_den = 1;
    bool capped = false;
};

struct TokenBudget {
    int per_frame_limit = 1458;
    int sequence_limit = 16384;
};

/// Plans the output geometry for one frame.
///
/// If rounding each dimension to the nearest multiple of 112 (ties up)
/// yields a patch count already in [576, 5832], that rounded size is used
/// unchanged. Otherwise every valid 112-multiple grid is searched and the
/// winner minimizes, in order: aspect-ratio log-distortion vs the input,
/// then |log| of the area scale factor (smallest rescale), then prefers the
/// larger patch count, then the larger width. All comparisons are exact
/// integer fraction comparisons, so results are platform-independent.
ResizePlan plan_resize(int width, int height);

/// Frame-time selection: default_fps when that gives [min_frames, max_frames]
/// frames; otherwise exactly min_frames spread uniformly (clamped to one
/// frame per millisecond for very short inputs); otherwise exactly
/// max_frames uniformly, flagged capped.
SamplingPlan plan_sampling(std::int64_t duration_ms, const SamplerConfig& config);

/// Temporal stride-2 grouping; an odd tail repeats the last frame, so the
/// result is ceil(n / 2).
std::int64_t compress_temporal(std::int64_t frame_count);

/// Post-projection cap: min(token_count, budget.sequence_limit).
std::int64_t downsample_tokens(std::int64_t token_count, const TokenBudget& budget);

/// Indices kept by the uniform nearest-index downsample, strictly increasing.
std::vector<std::int64_t> downsample_indices(std::int64_t token_count, std::int64_t limit);

}  // namespace omnistream
