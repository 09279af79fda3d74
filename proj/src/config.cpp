#include "omnistream/config.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace omnistream {
namespace {

using nlohmann::json;

std::int64_t cost_us_from_ms(const json& v, const char* key) {
    if (!v.is_number()) {
        throw ConfigError(std::string("compute.") + key + " must be a number (milliseconds)");
    }
    const double ms = v.get<double>();
    if (ms < 0) {
        throw ConfigError(std::string("compute.") + key + " must be non-negative");
    }
    return static_cast<std::int64_t>(ms * 1000.0 + 0.5);
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end()) {
        out = it->get<T>();
    }
}

}  // namespace

void SessionConfig::validate() const {
    try {
        vad.validate();
        sampler.validate();
        compute.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (feature_rate_num <= 0 || feature_rate_den <= 0) {
        throw ConfigError("interleave feature rate must be a positive rational");
    }
    if (punctuation.empty()) {
        throw ConfigError("sink.punctuation must not be empty");
    }
}

SessionConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) {
        throw ConfigError("config root must be a JSON object");
    }

    SessionConfig cfg;
    try {
        if (auto it = root.find("vad"); it != root.end()) {
            read_field(*it, "endpoint_silence_ms", cfg.vad.endpoint_silence_ms);
            read_field(*it, "speculative_silence_ms", cfg.vad.speculative_silence_ms);
        }
        if (auto it = root.find("sampler"); it != root.end()) {
            read_field(*it, "default_fps", cfg.sampler.default_fps);
            read_field(*it, "min_frames", cfg.sampler.min_frames);
            read_field(*it, "max_frames", cfg.sampler.max_frames);
            read_field(*it, "per_frame_limit", cfg.sampler.per_frame_limit);
            read_field(*it, "sequence_limit", cfg.sampler.sequence_limit);
        }
        if (auto it = root.find("interleave"); it != root.end()) {
            read_field(*it, "feature_rate_num", cfg.feature_rate_num);
            read_field(*it, "feature_rate_den", cfg.feature_rate_den);
        }
        if (auto it = root.find("sink"); it != root.end()) {
            read_field(*it, "punctuation", cfg.punctuation);
            if (auto c = it->find("startup_cost_ms"); c != it->end()) {
                cfg.compute.sink_startup_cost_us = cost_us_from_ms(*c, "sink.startup_cost_ms");
            }
        }
        if (auto it = root.find("compute"); it != root.end()) {
            const json& c = *it;
            if (auto f = c.find("encode_cost_per_frame_ms"); f != c.end()) {
                cfg.compute.encode_cost_per_frame_us = cost_us_from_ms(*f, "encode_cost_per_frame_ms");
            }
            if (auto f = c.find("encode_cost_per_audio_second_ms"); f != c.end()) {
                cfg.compute.encode_cost_per_audio_second_us =
                    cost_us_from_ms(*f, "encode_cost_per_audio_second_ms");
            }
            if (auto f = c.find("prefill_cost_per_token_us"); f != c.end()) {
                cfg.compute.prefill_cost_per_token_us = f->get<std::int64_t>();
            }
            if (auto f = c.find("decode_step_ms"); f != c.end()) {
                cfg.compute.decode_step_us = cost_us_from_ms(*f, "decode_step_ms");
            }
            if (auto f = c.find("audio_decode_cost_per_frame_ms"); f != c.end()) {
                cfg.compute.audio_decode_cost_per_frame_us =
                    cost_us_from_ms(*f, "audio_decode_cost_per_frame_ms");
            }
        }
        read_field(root, "script", cfg.script_path);
        read_field(root, "seed", cfg.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config value: ") + e.what());
    }

    if (!cfg.script_path.empty()) {
        const std::filesystem::path p(cfg.script_path);
        if (p.is_relative()) {
            cfg.script_path = (std::filesystem::path(path).parent_path() / p).string();
        }
    }
    cfg.validate();
    return cfg;
}

}  // namespace omnistream
