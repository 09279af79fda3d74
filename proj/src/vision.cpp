#include "omnistream/vision.hpp"

#include <numeric>

namespace omnistream {
namespace {

using i128 = __int128;

// |log(p/q)| ordered exactly: fold the fraction so it is >= 1, then compare
// by cross multiplication.
struct AbsLogFrac {
    std::int64_t num;  // >= den after folding
    std::int64_t den;

    AbsLogFrac(std::int64_t p, std::int64_t q) : num(p), den(q) {
        if (num < den) {
            std::swap(num, den);
        }
    }
    bool less_than(const AbsLogFrac& o) const {
        return static_cast<i128>(num) * o.den < static_cast<i128>(o.num) * den;
    }
    bool equals(const AbsLogFrac& o) const {
        return static_cast<i128>(num) * o.den == static_cast<i128>(o.num) * den;
    }
};

int round_to_multiple(int v, int m) {
    // nearest multiple, ties round up
    return (v + m / 2) / m * m;
}

ResizePlan plan_from_grid(int grid_w, int grid_h, bool minimal) {
    ResizePlan plan;
    plan.out_width = grid_w * kDimMultiple;
    plan.out_height = grid_h * kDimMultiple;
    plan.patch_cols = plan.out_width / kPatchSize;
    plan.patch_rows = plan.out_height / kPatchSize;
    plan.tokens_after_unshuffle = plan.patch_rows * plan.patch_cols / kUnshuffleFactor;
    plan.minimal_resize = minimal;
    return plan;
}

}  // namespace

void SamplerConfig::validate() const {
    if (default_fps < 1 || default_fps > 1000) {
        throw std::invalid_argument("sampler.default_fps must be in [1, 1000]");
    }
    if (min_frames < 1) {
        throw std::invalid_argument("sampler.min_frames must be positive");
    }
    if (max_frames < min_frames) {
        throw std::invalid_argument("sampler.max_frames must be >= sampler.min_frames");
    }
    if (per_frame_limit < 1 || sequence_limit < per_frame_limit) {
        throw std::invalid_argument("sampler token limits must satisfy 0 < per_frame <= sequence");
    }
}

ResizePlan plan_resize(int width, int height) {
    if (width < 1 || height < 1) {
        throw std::invalid_argument("plan_resize requires positive dimensions");
    }

    const int rounded_w = round_to_multiple(width, kDimMultiple);
    const int rounded_h = round_to_multiple(height, kDimMultiple);
    const std::int64_t rounded_patches =
        static_cast<std::int64_t>(rounded_w / kPatchSize) * (rounded_h / kPatchSize);
    if (rounded_patches >= kMinPatches && rounded_patches <= kMaxPatches) {
        return plan_from_grid(rounded_w / kDimMultiple, rounded_h / kDimMultiple, true);
    }

    // Grid units: a = out_width/112, b = out_height/112, patches = 64*a*b.
    const int min_cells = kMinPatches / (kGridMultiple * kGridMultiple);  // 9
    const int max_cells = kMaxPatches / (kGridMultiple * kGridMultiple);  // 91

    const std::int64_t in_area = static_cast<std::int64_t>(width) * height;
    const std::int64_t cell_area =
        static_cast<std::int64_t>(kDimMultiple) * kDimMultiple;  // 12544

    int best_a = 0;
    int best_b = 0;
    bool have_best = false;
    AbsLogFrac best_aspect(1, 1);
    AbsLogFrac best_scale(1, 1);
    for (int a = 1; a <= max_cells; ++a) {
        for (int b = (min_cells + a - 1) / a; static_cast<std::int64_t>(a) * b <= max_cells; ++b) {
            const AbsLogFrac aspect(static_cast<std::int64_t>(a) * height,
                                    static_cast<std::int64_t>(b) * width);
            const AbsLogFrac scale(cell_area * a * b, in_area);
            bool better = false;
            if (!have_best) {
                better = true;
            } else if (!aspect.equals(best_aspect)) {
                better = aspect.less_than(best_aspect);
            } else if (!scale.equals(best_scale)) {
                better = scale.less_than(best_scale);
            } else if (a * b != best_a * best_b) {
                better = a * b > best_a * best_b;
            } else {
                better = a > best_a;
            }
            if (better) {
                best_a = a;
                best_b = b;
                best_aspect = aspect;
                best_scale = scale;
                have_best = true;
            }
        }
    }
    return plan_from_grid(best_a, best_b, false);
}

SamplingPlan plan_sampling(std::int64_t duration_ms, const SamplerConfig& config) {
    if (duration_ms < 1) {
        throw std::invalid_argument("plan_sampling requires duration_ms >= 1");
    }
    config.validate();

    SamplingPlan plan;
    const std::int64_t at_default = duration_ms * config.default_fps / 1000;

    std::int64_t count = 0;
    if (at_default >= config.min_frames && at_default <= config.max_frames) {
        count = at_default;
        for (std::int64_t i = 0; i < count; ++i) {
            plan.frame_times_ms.push_back(i * 1000 / config.default_fps);
        }
    } else if (at_default < config.min_frames) {
        // raise the rate; never more than one frame per millisecond
        count = std::min<std::int64_t>(config.min_frames, duration_ms);
        for (std::int64_t i = 0; i < count; ++i) {
            plan.frame_times_ms.push_back(i * duration_ms / count);
        }
    } else {
        count = config.max_frames;
        plan.capped = true;
        for (std::int64_t i = 0; i < count; ++i) {
            plan.frame_times_ms.push_back(i * duration_ms / count);
        }
    }

    const std::int64_t g = std::gcd(count * 1000, duration_ms);
    plan.fps_num = count * 1000 / g;
    plan.fps_den = duration_ms / g;
    return plan;
}

std::int64_t compress_temporal(std::int64_t frame_count) {
    if (frame_count < 1) {
        throw std::invalid_argument("compress_temporal requires frame_count >= 1");
    }
    return (frame_count + 1) / 2;
}

std::int64_t downsample_tokens(std::int64_t token_count, const TokenBudget& budget) {
    if (token_count < 1) {
        throw std::invalid_argument("downsample_tokens requires token_count >= 1");
    }
    return std::min<std::int64_t>(token_count, budget.sequence_limit);
}

std::vector<std::int64_t> downsample_indices(std::int64_t token_count, std::int64_t limit) {
    const std::int64_t kept = std::min(token_count, limit);
    std::vector<std::int64_t> idx;
    idx.reserve(static_cast<std::size_t>(kept));
    for (std::int64_t i = 0; i < kept; ++i) {
        idx.push_back(i * token_count / kept);
    }
    return idx;
}

}  // namespace omnistream
