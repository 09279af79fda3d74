#include "omnistream/interleave.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace omnistream {

int AudioFeatureClock::advance(int window_ms) {
    if (window_ms <= 0 || window_ms % 1000 != 0) {
        throw std::invalid_argument("feature clock window must be a positive multiple of 1000 ms");
    }
    if (rate_num <= 0 || rate_den <= 0) {
        throw std::invalid_argument("feature clock rate must be positive");
    }
    const std::int64_t ticks = static_cast<std::int64_t>(window_ms) * rate_num;
    const std::int64_t period = 1000LL * rate_den;
    int count = 0;
    if (carry_ticks < ticks) {
        count = static_cast<int>((ticks - carry_ticks + period - 1) / period);
    }
    carry_ticks = carry_ticks + count * period - ticks;
    return count;
}

std::int64_t Chunk::token_count() const {
    std::int64_t n = static_cast<std::int64_t>(video_groups.size());
    for (const VideoGroup& g : video_groups) {
        n += static_cast<std::int64_t>(g.token_ids.size());
    }
    n += static_cast<std::int64_t>(audio_feature_ids.size());
    if (is_first_of_turn) {
        ++n;
    }
    if (is_last_of_turn) {
        ++n;
    }
    return n;
}

Chunk build_chunk(std::vector<VideoGroup> groups,
                  std::vector<std::uint32_t> audio_ids,
                  std::int64_t window_start_ms,
                  std::int64_t window_end_ms,
                  ChunkMode mode) {
    const int expect_ms = mode == ChunkMode::Dense ? kDenseChunkMs : kSparseChunkMs;
    if (window_end_ms - window_start_ms != expect_ms) {
        throw WindowMismatchError("window length does not match chunk mode");
    }
    if (window_start_ms < 0 || window_start_ms % 1000 != 0) {
        throw WindowMismatchError("chunk windows start on whole seconds");
    }
    const std::size_t expect_frames =
        mode == ChunkMode::Dense ? kDenseFramesPerChunk : kSparseFramesPerChunk;
    if (groups.size() != expect_frames) {
        throw FrameCountMismatchError("video frame count does not match chunk mode");
    }
    for (const VideoGroup& g : groups) {
        // first second of the window, so the window stays recoverable from text
        if (g.timestamp_ms < window_start_ms || g.timestamp_ms >= window_start_ms + 1000) {
            throw FrameOutOfWindowError("video timestamp outside the chunk window's first second");
        }
    }
    if (mode == ChunkMode::Dense && audio_ids.empty()) {
        throw std::invalid_argument("dense chunks carry at least one audio feature id");
    }
    if (mode == ChunkMode::Sparse && !audio_ids.empty()) {
        throw std::invalid_argument("sparse chunks carry no audio feature ids");
    }
    std::sort(groups.begin(), groups.end(),
              [](const VideoGroup& a, const VideoGroup& b) { return a.timestamp_ms < b.timestamp_ms; });

    Chunk c;
    c.start_ms = window_start_ms;
    c.duration_ms = expect_ms;
    c.mode = mode;
    c.video_groups = std::move(groups);
    c.audio_feature_ids = std::move(audio_ids);
    return c;
}

std::string render_timestamp(std::int64_t ms) {
    const std::int64_t secs = ms / 1000;
    const int frac = static_cast<int>(ms % 1000);
    char buf[40];
    if (frac == 0) {
        std::snprintf(buf, sizeof(buf), "Second%lld", static_cast<long long>(secs));
        return buf;
    }
    std::snprintf(buf, sizeof(buf), "Second%lld.%03d", static_cast<long long>(secs), frac);
    std::string out(buf);
    while (out.back() == '0') {
        out.pop_back();
    }
    return out;
}

std::string serialize(std::span<const Chunk> seq) {
    std::string out;
    char buf[24];
    for (const Chunk& c : seq) {
        bool first_token = true;
        auto put = [&](std::string_view tok) {
            if (!first_token) {
                out += ' ';
            }
            out += tok;
            first_token = false;
        };
        for (const VideoGroup& g : c.video_groups) {
            std::string head = render_timestamp(g.timestamp_ms);
            head += ':';
            bool glued = true;
            for (std::uint32_t id : g.token_ids) {
                std::snprintf(buf, sizeof(buf), "v%u", id);
                if (glued) {
                    head += buf;
                    put(head);
                    glued = false;
                } else {
                    put(buf);
                }
            }
            if (glued) {
                put(head);  // group without ids
            }
        }
        if (c.is_first_of_turn) {
            put(kAudioStartToken);
        }
        for (std::uint32_t id : c.audio_feature_ids) {
            std::snprintf(buf, sizeof(buf), "a%u", id);
            put(buf);
        }
        if (c.is_last_of_turn) {
            put(kAudioEndToken);
        }
        out += '\n';
    }
    return out;
}

namespace {

struct Token {
    std::string_view text;
    std::size_t offset;
};

bool parse_uint(std::string_view digits, std::uint64_t max, std::uint64_t& out) {
    if (digits.empty() || (digits.size() > 1 && digits[0] == '0')) {
        return false;
    }
    std::uint64_t v = 0;
    for (char ch : digits) {
        if (ch < '0' || ch > '9') {
            return false;
        }
        v = v * 10 + static_cast<std::uint64_t>(ch - '0');
        if (v > max) {
            return false;
        }
    }
    out = v;
    return true;
}

// "Second{t}:" possibly with the first visual id glued after the colon.
// Returns the timestamp and the glued remainder; throws ParseError.
std::int64_t parse_timestamp_head(const Token& tok, std::string_view& glued) {
    const std::string_view s = tok.text;
    constexpr std::string_view kPrefix = "Second";
    std::size_t p = kPrefix.size();
    std::size_t digits_begin = p;
    while (p < s.size() && s[p] >= '0' && s[p] <= '9') {
        ++p;
    }
    std::uint64_t secs = 0;
    if (!parse_uint(s.substr(digits_begin, p - digits_begin),
                    std::numeric_limits<std::int64_t>::max() / 1000 - 1, secs)) {
        throw ParseError(tok.offset + digits_begin, "expected seconds after 'Second'");
    }
    int frac_ms = 0;
    if (p < s.size() && s[p] == '.') {
        ++p;
        const std::size_t frac_begin = p;
        while (p < s.size() && s[p] >= '0' && s[p] <= '9') {
            ++p;
        }
        const std::string_view frac = s.substr(frac_begin, p - frac_begin);
        if (frac.empty() || frac.size() > 3 || frac.back() == '0') {
            throw ParseError(tok.offset + frac_begin, "fraction must be 1-3 digits without trailing zeros");
        }
        for (char ch : frac) {
            frac_ms = frac_ms * 10 + (ch - '0');
        }
        for (std::size_t i = frac.size(); i < 3; ++i) {
            frac_ms *= 10;
        }
    }
    if (p >= s.size() || s[p] != ':') {
        throw ParseError(tok.offset + p, "expected ':' after timestamp");
    }
    glued = s.substr(p + 1);
    return static_cast<std::int64_t>(secs) * 1000 + frac_ms;
}

std::uint32_t parse_id(std::string_view digits, std::size_t offset) {
    std::uint64_t v = 0;
    if (!parse_uint(digits, std::numeric_limits<std::uint32_t>::max(), v)) {
        throw ParseError(offset, "expected token id digits");
    }
    return static_cast<std::uint32_t>(v);
}

Chunk parse_line(const std::vector<Token>& toks, std::size_t line_offset) {
    Chunk c;
    bool in_audio = false;
    bool saw_end = false;
    auto require_video_section = [&](const Token& t) {
        if (in_audio) {
            throw ParseError(t.offset, "video tokens after the audio section");
        }
    };
    for (const Token& t : toks) {
        if (saw_end) {
            throw ParseError(t.offset, "tokens after the audio end marker");
        }
        if (t.text.rfind("Second", 0) == 0) {
            require_video_section(t);
            std::string_view glued;
            VideoGroup g;
            g.timestamp_ms = parse_timestamp_head(t, glued);
            if (!glued.empty()) {
                if (glued[0] != 'v') {
                    throw ParseError(t.offset + (t.text.size() - glued.size()),
                                     "expected visual token after ':'");
                }
                g.token_ids.push_back(
                    parse_id(glued.substr(1), t.offset + (t.text.size() - glued.size()) + 1));
            }
            c.video_groups.push_back(std::move(g));
        } else if (t.text == kAudioStartToken) {
            if (in_audio || c.is_first_of_turn) {
                throw ParseError(t.offset, "misplaced audio start marker");
            }
            c.is_first_of_turn = true;
            in_audio = true;
        } else if (t.text == kAudioEndToken) {
            c.is_last_of_turn = true;
            in_audio = true;
            saw_end = true;
        } else if (!t.text.empty() && t.text[0] == 'v') {
            require_video_section(t);
            if (c.video_groups.empty()) {
                throw ParseError(t.offset, "visual token before any timestamp");
            }
            c.video_groups.back().token_ids.push_back(parse_id(t.text.substr(1), t.offset + 1));
        } else if (!t.text.empty() && t.text[0] == 'a') {
            in_audio = true;
            c.audio_feature_ids.push_back(parse_id(t.text.substr(1), t.offset + 1));
        } else {
            throw ParseError(t.offset, "unrecognized token");
        }
    }

    if (c.video_groups.empty()) {
        throw ParseError(line_offset, "chunk line without video groups");
    }
    if (c.video_groups.size() == kDenseFramesPerChunk) {
        c.mode = ChunkMode::Dense;
        c.duration_ms = kDenseChunkMs;
        if (c.audio_feature_ids.empty()) {
            throw ParseError(line_offset, "dense chunk without audio feature ids");
        }
    } else if (c.video_groups.size() == kSparseFramesPerChunk && c.audio_feature_ids.empty() &&
               !c.is_first_of_turn && !c.is_last_of_turn) {
        c.mode = ChunkMode::Sparse;
        c.duration_ms = kSparseChunkMs;
    } else {
        throw ParseError(line_offset, "chunk shape matches neither dense nor sparse mode");
    }

    c.start_ms = c.video_groups.front().timestamp_ms / 1000 * 1000;
    for (std::size_t i = 0; i < c.video_groups.size(); ++i) {
        const VideoGroup& g = c.video_groups[i];
        if (g.timestamp_ms < c.start_ms || g.timestamp_ms >= c.start_ms + 1000) {
            throw ParseError(line_offset, "video timestamps span more than one second");
        }
        if (i > 0 && g.timestamp_ms < c.video_groups[i - 1].timestamp_ms) {
            throw ParseError(line_offset, "video groups out of order");
        }
    }
    return c;
}

}  // namespace

InterleavedSequence parse(std::string_view text) {
    InterleavedSequence seq;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t line_offset = pos;
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        std::vector<Token> toks;
        std::size_t p = pos;
        while (p < eol) {
            if (text[p] == ' ') {
                ++p;
                continue;
            }
            std::size_t q = p;
            while (q < eol && text[q] != ' ') {
                ++q;
            }
            toks.push_back(Token{text.substr(p, q - p), p});
            p = q;
        }
        if (toks.empty()) {
            throw ParseError(line_offset, "empty chunk line");
        }
        seq.push_back(parse_line(toks, line_offset));
        pos = eol < text.size() ? eol + 1 : eol;
    }
    return seq;
}

void validate_sequence(std::span<const Chunk> seq) {
    std::int64_t prev_start = -1;
    std::int64_t prev_end = 0;
    bool turn_open = false;
    for (const Chunk& c : seq) {
        if (c.start_ms <= prev_start) {
            throw std::invalid_argument("chunk start times must strictly increase");
        }
        if (c.start_ms < prev_end) {
            throw std::invalid_argument("chunk windows must not overlap");
        }
        const int expect_ms = c.mode == ChunkMode::Dense ? kDenseChunkMs : kSparseChunkMs;
        const std::size_t expect_frames =
            c.mode == ChunkMode::Dense ? kDenseFramesPerChunk : kSparseFramesPerChunk;
        if (c.duration_ms != expect_ms || c.video_groups.size() != expect_frames) {
            throw std::invalid_argument("chunk shape does not match its mode");
        }
        if (c.mode == ChunkMode::Dense && c.audio_feature_ids.empty()) {
            throw std::invalid_argument("dense chunk without audio feature ids");
        }
        if (c.mode == ChunkMode::Sparse &&
            (!c.audio_feature_ids.empty() || c.is_first_of_turn || c.is_last_of_turn)) {
            throw std::invalid_argument("sparse chunk carries audio or turn markers");
        }
        for (const VideoGroup& g : c.video_groups) {
            if (g.timestamp_ms < c.start_ms || g.timestamp_ms >= c.start_ms + 1000) {
                throw std::invalid_argument("video timestamp outside the chunk window's first second");
            }
        }
        if (c.mode == ChunkMode::Dense) {
            if (c.is_first_of_turn == turn_open) {
                throw std::invalid_argument(turn_open ? "nested turn start marker"
                                                      : "dense chunk outside any turn");
            }
            turn_open = !c.is_last_of_turn;
        } else if (turn_open) {
            throw std::invalid_argument("sparse chunk inside a user turn");
        }
        prev_start = c.start_ms;
        prev_end = c.start_ms + c.duration_ms;
    }
    // a still-open final turn is legal: the session may end mid-turn
}

}  // namespace omnistream
