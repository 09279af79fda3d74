#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "omnistream/event_log.hpp"
#include "omnistream/vad.hpp"
#include "omnistream/vision.hpp"

namespace omnistream {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SessionConfig {
    VadConfig vad;
    SamplerConfig sampler;
    ComputeModel compute;

    // audio feature rate as an exact rational (features per second)
    int feature_rate_num = 25;
    int feature_rate_den = 2;

    std::string punctuation = ".,!?;:。，！？；：";
    std::string script_path;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Loads and validates a JSON session config; relative script paths resolve
/// against the config file's directory. Throws ConfigError.
SessionConfig load_config(const std::string& path);

}  // namespace omnistream
