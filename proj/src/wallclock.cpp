#include "omnistream/wallclock.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <thread>
#include <variant>
#include <vector>

#include "omnistream/backend.hpp"
#include "omnistream/interleave.hpp"
#include "omnistream/orchestrator.hpp"
#include "omnistream/sink.hpp"
#include "omnistream/text.hpp"
#include "omnistream/vad.hpp"
#include "omnistream/vision.hpp"

namespace omnistream {
namespace {

using Clock = std::chrono::steady_clock;

template <typename T>
class Channel {
  public:
    void send(T value) {
        {
            std::lock_guard<std::mutex> lock(mu_);
            items_.push_back(std::move(value));
        }
        cv_.notify_one();
    }
    void close() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            closed_ = true;
        }
        cv_.notify_one();
    }
    std::optional<T> recv() {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return !items_.empty() || closed_; });
        if (items_.empty()) {
            return std::nullopt;
        }
        T value = std::move(items_.front());
        items_.erase(items_.begin());
        return value;
    }

  private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::vector<T> items_;
    bool closed_ = false;
};

enum class CtlKind { BeginDecode, Rollback, Endpoint, BargeIn };

struct Ctl {
    CtlKind kind;
    int turn = 0;
    std::uint64_t gen = 0;
    bool marker = false;  // BeginDecode: a turn-end marker token joins first
};

struct ChunkJob {
    Chunk chunk;
};
struct FrameMsg {
    int frame = 0;
    std::uint64_t gen = 0;
    bool last = false;
};

using EncodeMsg = std::variant<ChunkJob, Ctl>;
using LlmMsg = std::variant<ChunkJob, Ctl>;
using SinkMsg = std::variant<FrameMsg, Ctl>;

class WallClockPipeline {
  public:
    WallClockPipeline(const Trace& trace, const SessionConfig& cfg, const WallClockOptions& opt)
        : cfg_(cfg),
          opt_(opt),
          vad_(cfg.vad),
          script_(cfg.script_path.empty() ? Script() : Script::load(cfg.script_path)),
          backend_(script_, cfg.seed) {
        clock_.rate_num = cfg.feature_rate_num;
        clock_.rate_den = cfg.feature_rate_den;
        auto violations = validate_trace(trace);
        if (!violations.empty()) {
            throw TraceFormatError("trace failed validation", std::move(violations));
        }
        for (const TraceRecord& r : trace.records) {
            if (r.kind == TraceRecordKind::AudioPacket) {
                AudioPacket p;
                p.start_ms = r.time_ms;
                p.duration_ms = r.duration_ms;
                p.runs = r.runs;
                packets_.push_back({p, {}});
            }
        }
        for (const TraceRecord& r : trace.records) {
            if (r.kind != TraceRecordKind::VideoFrame) {
                continue;
            }
            for (auto& [audio, frames] : packets_) {
                if (r.time_ms >= audio.start_ms && r.time_ms < audio.end_ms()) {
                    frames.push_back(FrameSpec{r.width, r.height, r.time_ms});
                    break;
                }
            }
        }
    }

    EventLog run() {
        start_ = Clock::now();
        std::thread encode([this] { encode_worker(); });
        std::thread llm([this] { llm_worker(); });
        std::thread sink([this] { sink_worker(); });
        vad_worker();
        encode.join();
        llm.join();
        sink.join();
        log_event(Stage::Vad, "session_end", {});
        return std::move(log_);
    }

  private:
    using Payload = std::map<std::string, PayloadValue>;

    std::int64_t elapsed_ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start_)
            .count();
    }

    void log_event(Stage stage, std::string kind, Payload payload) {
        std::lock_guard<std::mutex> lock(log_mu_);
        EventRecord e;
        e.time_ms = elapsed_ms();
        e.stage = stage;
        e.kind = std::move(kind);
        e.seq = log_.events.size();
        e.payload = std::move(payload);
        log_.events.push_back(std::move(e));
    }

    void sleep_model_ms(double ms) {
        if (ms > 0) {
            std::this_thread::sleep_for(
                std::chrono::duration<double, std::milli>(ms * opt_.time_scale));
        }
    }

    void wait_until_model_ms(std::int64_t t_ms) {
        std::this_thread::sleep_until(
            start_ + std::chrono::duration_cast<Clock::duration>(
                         std::chrono::duration<double, std::milli>(
                             static_cast<double>(t_ms) * opt_.time_scale)));
    }

    // ---- stage 1: VAD & frame sampling (drives the whole pipeline) ---------

    void vad_worker() {
        for (const auto& [audio, frames] : packets_) {
            wait_until_model_ms(audio.start_ms);
            log_event(Stage::Vad, "packet_arrival", {{"start_ms", audio.start_ms}});
            std::vector<VadEvent> events = vad_.feed(audio);
            for (std::size_t i = 0; i < events.size(); ++i) {
                const VadEvent& e = events[i];
                wait_until_model_ms(e.at_ms);
                handle_vad_event(e);
                if (e.kind == VadEventKind::BargeIn) {
                    vad_.reset_for_next_turn();
                    if (auto reopened = vad_.on_speech_at(e.at_ms)) {
                        handle_vad_event(*reopened);
                    }
                }
            }
            wait_until_model_ms(audio.end_ms());
            on_packet_complete(audio, frames);
        }
        to_encode_.close();
    }

    void handle_vad_event(const VadEvent& e) {
        log_event(Stage::Vad, to_string(e.kind), {{"turn", e.turn_index}, {"at_ms", e.at_ms}});
        switch (e.kind) {
            case VadEventKind::SpeechStart:
                turn_dense_sent_ = false;
                break;
            case VadEventKind::Speculative:
                to_encode_.send(Ctl{CtlKind::BeginDecode, e.turn_index,
                                    gen_.load(std::memory_order_relaxed), turn_dense_sent_});
                break;
            case VadEventKind::SpeculativeCancel:
                gen_.fetch_add(1, std::memory_order_relaxed);
                to_encode_.send(Ctl{CtlKind::Rollback, e.turn_index, 0, false});
                break;
            case VadEventKind::Endpoint:
                vad_.mark_responding();
                to_encode_.send(Ctl{CtlKind::Endpoint, e.turn_index, 0, false});
                break;
            case VadEventKind::BargeIn:
                gen_.fetch_add(1, std::memory_order_relaxed);
                to_encode_.send(Ctl{CtlKind::BargeIn, e.turn_index, 0, false});
                break;
            default:
                break;
        }
    }

    void on_packet_complete(const AudioPacket& audio, const std::vector<FrameSpec>& frames) {
        const int feature_count = clock_.advance(audio.duration_ms);
        const VadPhase phase = vad_.phase();
        if (phase != VadPhase::UserSpeaking && phase != VadPhase::SilencePending) {
            return;  // this mode skips response-period buffering
        }
        std::vector<VideoGroup> groups;
        for (const FrameSpec& f : frames) {
            const ResizePlan plan = plan_resize(f.width, f.height);
            const int tokens = std::min(plan.tokens_after_unshuffle, cfg_.sampler.per_frame_limit);
            VideoGroup g;
            g.timestamp_ms = f.timestamp_ms;
            for (int i = 0; i < tokens; ++i) {
                g.token_ids.push_back(static_cast<std::uint32_t>(
                    fnv1a64_u64(static_cast<std::uint64_t>(f.timestamp_ms * 1000 + i)) % 900000u +
                    1));
            }
            groups.push_back(std::move(g));
        }
        std::vector<std::uint32_t> audio_ids;
        for (int i = 0; i < feature_count; ++i) {
            audio_ids.push_back(static_cast<std::uint32_t>(
                fnv1a64_u64(static_cast<std::uint64_t>(audio.start_ms * 100 + i)) % 900000u + 1));
        }
        Chunk c = build_chunk(std::move(groups), std::move(audio_ids), audio.start_ms,
                              audio.end_ms(), ChunkMode::Dense);
        c.is_first_of_turn = !turn_dense_sent_;
        turn_dense_sent_ = true;
        to_encode_.send(ChunkJob{std::move(c)});
    }

    // ---- stage 2: audio-visual encoding -------------------------------------

    void encode_worker() {
        while (auto msg = to_encode_.recv()) {
            if (std::holds_alternative<Ctl>(*msg)) {
                to_llm_.send(std::get<Ctl>(*msg));
                continue;
            }
            ChunkJob job = std::move(std::get<ChunkJob>(*msg));
            const double frames = static_cast<double>(job.chunk.video_groups.size());
            double cost_ms = frames * static_cast<double>(cfg_.compute.encode_cost_per_frame_us) / 1000.0;
            cost_ms += static_cast<double>(cfg_.compute.encode_cost_per_audio_second_us) / 1000.0 *
                       job.chunk.duration_ms / 1000.0;
            sleep_model_ms(cost_ms);
            log_event(Stage::Encode, "encode_done",
                      {{"start_ms", job.chunk.start_ms},
                       {"tokens", job.chunk.token_count()}});
            to_llm_.send(std::move(job));
        }
        to_llm_.close();
    }

    // ---- stage 3: LLM prefill & decode ---------------------------------------

    void llm_worker() {
        while (auto msg = to_llm_.recv()) {
            if (std::holds_alternative<ChunkJob>(*msg)) {
                ChunkJob job = std::move(std::get<ChunkJob>(*msg));
                const std::int64_t tokens = job.chunk.token_count();
                sleep_model_ms(static_cast<double>(tokens) *
                               static_cast<double>(cfg_.compute.prefill_cost_per_token_us) /
                               1000.0);
                if (backend_.mode() == BackendMode::Prefill) {
                    backend_.prefill(job.chunk);
                    log_event(Stage::Llm, "prefill_done",
                              {{"tokens", tokens}, {"total", backend_.prefilled_token_count()}});
                }
                continue;
            }
            const Ctl ctl = std::get<Ctl>(*msg);
            switch (ctl.kind) {
                case CtlKind::BeginDecode:
                    run_decode(ctl);
                    break;
                case CtlKind::Rollback:
                    if (backend_.mode() == BackendMode::Decode) {
                        backend_.rollback();
                    }
                    log_event(Stage::Llm, "rollback", {{"turn", ctl.turn}});
                    break;
                case CtlKind::Endpoint:
                case CtlKind::BargeIn:
                    to_sink_.send(ctl);
                    break;
            }
        }
        to_sink_.close();
    }

    void run_decode(const Ctl& ctl) {
        if (backend_.mode() != BackendMode::Prefill) {
            return;
        }
        backend_.set_turn(ctl.turn);
        backend_.begin_decode();
        if (ctl.marker) {
            backend_.append_end_marker();
        }
        log_event(Stage::Llm, "begin_decode",
                  {{"turn", ctl.turn}, {"boundary", backend_.committed_boundary()}});
        const int n = static_cast<int>(cp_count(script_.line_for_turn(ctl.turn)));
        const int total = n > 0 ? n + 1 : 0;
        for (int k = 0; k < total; ++k) {
            if (gen_.load(std::memory_order_relaxed) != ctl.gen) {
                if (backend_.mode() == BackendMode::Decode) {
                    backend_.rollback();
                }
                log_event(Stage::Llm, "decode_terminated", {{"turn", ctl.turn}, {"step", k}});
                return;
            }
            sleep_model_ms(static_cast<double>(cfg_.compute.decode_step_us) / 1000.0);
            const GenStep step = backend_.decode_step();
            log_event(Stage::Llm, "decode_step", {{"turn", ctl.turn}, {"step", k}});
            if (step.acoustic) {
                to_sink_.send(FrameMsg{step.acoustic->source_step, ctl.gen, false});
            }
        }
        backend_.finish_turn();
        log_event(Stage::Llm, "turn_complete", {{"turn", ctl.turn}, {"steps", total}});
        to_sink_.send(FrameMsg{-1, ctl.gen, true});  // end of stream
    }

    // ---- stage 4: audio decoding & gated delivery ------------------------------

    void sink_worker() {
        int frames_ready = 0;
        int next_deliverable = 0;
        bool gated = false;
        bool stream_done = false;
        std::uint64_t cur_gen = 0;
        auto flush = [&](int upto) {
            for (; next_deliverable < upto; ++next_deliverable) {
                if (!gated) {
                    return;
                }
                sleep_model_ms(static_cast<double>(cfg_.compute.audio_decode_cost_per_frame_us) /
                               1000.0);
                log_event(Stage::Sink, "frame_delivered", {{"frame", next_deliverable}});
            }
        };
        while (auto msg = to_sink_.recv()) {
            if (std::holds_alternative<FrameMsg>(*msg)) {
                const FrameMsg f = std::get<FrameMsg>(*msg);
                if (f.gen != gen_.load(std::memory_order_relaxed)) {
                    continue;  // rolled back or interrupted stream
                }
                if (f.gen != cur_gen) {
                    cur_gen = f.gen;
                    frames_ready = 0;
                    next_deliverable = 0;
                    gated = false;
                    stream_done = false;
                }
                if (f.last) {
                    stream_done = true;
                    flush(frames_ready);
                } else {
                    frames_ready = f.frame + 1;
                    flush(std::max(0, frames_ready - kLookaheadFrames));
                }
                continue;
            }
            const Ctl ctl = std::get<Ctl>(*msg);
            if (ctl.kind == CtlKind::Endpoint) {
                log_event(Stage::Sink, "delivery_gate_open", {{"turn", ctl.turn}});
                gated = true;
                flush(stream_done ? frames_ready
                                  : std::max(0, frames_ready - kLookaheadFrames));
            } else if (ctl.kind == CtlKind::BargeIn) {
                const std::string text = script_.line_for_turn(ctl.turn);
                const TruncationResult cut =
                    truncate_on_interrupt(text, cp_count(text), parse_punctuation(cfg_.punctuation),
                                          static_cast<std::int64_t>(cp_count(text)));
                log_event(Stage::Sink, "truncation",
                          {{"turn", ctl.turn},
                           {"kept_cp", static_cast<std::int64_t>(cut.cut_at_cp)}});
                gated = false;
            }
        }
    }

    SessionConfig cfg_;
    WallClockOptions opt_;
    VadMachine vad_;
    Script script_;
    MockBackend backend_;
    AudioFeatureClock clock_;
    std::vector<std::pair<AudioPacket, std::vector<FrameSpec>>> packets_;

    Clock::time_point start_;
    std::mutex log_mu_;
    EventLog log_;

    Channel<EncodeMsg> to_encode_;
    Channel<LlmMsg> to_llm_;
    Channel<SinkMsg> to_sink_;
    std::atomic<std::uint64_t> gen_{0};
    bool turn_dense_sent_ = false;
};

}  // namespace

EventLog run_session_wall_clock(const Trace& trace, const SessionConfig& config,
                                const WallClockOptions& options) {
    config.validate();
    WallClockPipeline pipeline(trace, config, options);
    return pipeline.run();
}

}  // namespace omnistream
