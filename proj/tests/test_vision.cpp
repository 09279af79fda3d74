#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "omnistream/vision.hpp"

using namespace omnistream;

namespace {

void check_plan_invariants(const ResizePlan& plan) {
    CHECK(plan.out_width % 112 == 0);
    CHECK(plan.out_height % 112 == 0);
    CHECK(plan.patch_cols == plan.out_width / 14);
    CHECK(plan.patch_rows == plan.out_height / 14);
    CHECK(plan.patch_rows % 8 == 0);
    CHECK(plan.patch_cols % 8 == 0);
    const int patches = plan.patch_rows * plan.patch_cols;
    CHECK(patches >= 576);
    CHECK(patches <= 5832);
    CHECK(plan.tokens_after_unshuffle * 4 == patches);
}

}  // namespace

TEST_CASE("plan_resize keeps an in-range rounded size unchanged") {
    const ResizePlan plan = plan_resize(448, 448);
    CHECK(plan.out_width == 448);
    CHECK(plan.out_height == 448);
    CHECK(plan.patch_rows == 32);
    CHECK(plan.patch_cols == 32);
    CHECK(plan.tokens_after_unshuffle == 256);
    CHECK(plan.minimal_resize);
    check_plan_invariants(plan);
}

TEST_CASE("plan_resize scales a tiny square up to the smallest valid square") {
    const ResizePlan plan = plan_resize(100, 100);
    CHECK(plan.out_width == 336);
    CHECK(plan.out_height == 336);
    CHECK(plan.patch_rows == 24);
    CHECK(plan.patch_cols == 24);
    CHECK(plan.tokens_after_unshuffle == 144);
    CHECK_FALSE(plan.minimal_resize);
}

TEST_CASE("plan_resize scales a huge square down to the largest valid square") {
    const ResizePlan plan = plan_resize(10000, 10000);
    CHECK(plan.out_width == 1008);
    CHECK(plan.out_height == 1008);
    CHECK(plan.patch_rows == 72);
    CHECK(plan.patch_cols == 72);
    CHECK(plan.patch_rows * plan.patch_cols == 5184);
    CHECK(plan.tokens_after_unshuffle == 1296);
    CHECK_FALSE(plan.minimal_resize);
}

TEST_CASE("plan_resize rejects degenerate input") {
    CHECK_THROWS_AS(plan_resize(0, 100), std::invalid_argument);
    CHECK_THROWS_AS(plan_resize(100, -1), std::invalid_argument);
}

TEST_CASE("plan_resize matches the exhaustive oracle on random inputs") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dim(1, 20000);
    for (int i = 0; i < 2000; ++i) {
        const int w = dim(rng);
        const int h = dim(rng);
        const ResizePlan plan = plan_resize(w, h);
        check_plan_invariants(plan);
        const testutil::OracleResize expect = testutil::oracle_plan_resize(w, h);
        CAPTURE(w);
        CAPTURE(h);
        REQUIRE(plan.out_width == expect.out_width);
        REQUIRE(plan.out_height == expect.out_height);
        REQUIRE(plan.minimal_resize == expect.minimal);
    }
}

TEST_CASE("integer upscaling never drops an in-range input below the patch floor") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> dim(1, 4000);
    std::uniform_int_distribution<int> factor(1, 5);
    int checked = 0;
    for (int i = 0; i < 20000 && checked < 500; ++i) {
        const int w = dim(rng);
        const int h = dim(rng);
        if (!plan_resize(w, h).minimal_resize) {
            continue;
        }
        const int k = factor(rng);
        if (static_cast<std::int64_t>(w) * k > 20000 || static_cast<std::int64_t>(h) * k > 20000) {
            continue;
        }
        const ResizePlan scaled = plan_resize(w * k, h * k);
        const auto round112 = [](std::int64_t v) { return (v + 56) / 112 * 112; };
        const std::int64_t patches = round112(static_cast<std::int64_t>(w) * k) / 14 *
                                     (round112(static_cast<std::int64_t>(h) * k) / 14);
        // the branch can flip only by exceeding the ceiling, never by
        // falling under the floor
        if (!scaled.minimal_resize) {
            CHECK(patches > 5832);
        }
        ++checked;
    }
    CHECK(checked == 500);
}

TEST_CASE("plan_sampling picks the default rate for mid-length input") {
    SamplerConfig cfg;
    const SamplingPlan plan = plan_sampling(30000, cfg);
    CHECK(plan.frame_times_ms.size() == 60);
    CHECK_FALSE(plan.capped);
    CHECK(plan.frame_times_ms[0] == 0);
    CHECK(plan.frame_times_ms[1] == 500);
    CHECK(plan.fps_num == 2);
    CHECK(plan.fps_den == 1);
}

TEST_CASE("plan_sampling raises the rate to reach the frame floor") {
    SamplerConfig cfg;
    const SamplingPlan plan = plan_sampling(5000, cfg);
    REQUIRE(plan.frame_times_ms.size() == 16);
    CHECK_FALSE(plan.capped);
    for (std::size_t i = 1; i < plan.frame_times_ms.size(); ++i) {
        CHECK(plan.frame_times_ms[i] > plan.frame_times_ms[i - 1]);
    }
    CHECK(plan.frame_times_ms.back() < 5000);
}

TEST_CASE("plan_sampling caps very long input uniformly") {
    SamplerConfig cfg;
    const SamplingPlan plan = plan_sampling(1000000, cfg);
    REQUIRE(plan.frame_times_ms.size() == 256);
    CHECK(plan.capped);
    const double spacing = 1000000.0 / 256.0;
    for (std::size_t i = 0; i < plan.frame_times_ms.size(); ++i) {
        CHECK(std::abs(static_cast<double>(plan.frame_times_ms[i]) -
                       static_cast<double>(i) * spacing) <= 1.0);
    }
}

TEST_CASE("plan_sampling rejects empty input and matches the oracle") {
    SamplerConfig cfg;
    CHECK_THROWS_AS(plan_sampling(0, cfg), std::invalid_argument);

    std::mt19937_64 rng(13);
    std::uniform_int_distribution<std::int64_t> dur(1, 2000000);
    for (int i = 0; i < 1000; ++i) {
        const std::int64_t d = dur(rng);
        const SamplingPlan plan = plan_sampling(d, cfg);
        const auto expect =
            testutil::oracle_plan_sampling(d, cfg.default_fps, cfg.min_frames, cfg.max_frames);
        CAPTURE(d);
        REQUIRE(plan.frame_times_ms == expect.times);
        REQUIRE(plan.capped == expect.capped);
        CHECK(plan.frame_times_ms.size() >=
              static_cast<std::size_t>(std::min<std::int64_t>(16, d)));
    }
}

TEST_CASE("compress_temporal halves with a repeated-last-frame tail") {
    CHECK(compress_temporal(16) == 8);
    CHECK(compress_temporal(1) == 1);
    CHECK(compress_temporal(17) == 9);
    CHECK_THROWS_AS(compress_temporal(0), std::invalid_argument);
}

TEST_CASE("compress_temporal is subadditive under the pad rule") {
    for (std::int64_t n = 1; n <= 64; ++n) {
        for (std::int64_t m = 1; m <= 64; ++m) {
            CHECK(compress_temporal(n) + compress_temporal(m) >= compress_temporal(n + m));
        }
    }
}

TEST_CASE("downsample_tokens clamps to the sequence budget") {
    TokenBudget budget;
    budget.sequence_limit = 1000;
    CHECK(downsample_tokens(1000, budget) == 1000);
    CHECK(downsample_tokens(1, budget) == 1);
    CHECK(downsample_tokens(2000, budget) == 1000);
    CHECK_THROWS_AS(downsample_tokens(0, budget), std::invalid_argument);
}

TEST_CASE("downsample_indices selects uniformly spaced positions") {
    const auto idx = downsample_indices(2000, 1000);
    REQUIRE(idx.size() == 1000);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        CHECK(idx[i] == static_cast<std::int64_t>(2 * i));
    }
    const auto all = downsample_indices(5, 10);
    REQUIRE(all.size() == 5);
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(all[i] == static_cast<std::int64_t>(i));
    }
}
