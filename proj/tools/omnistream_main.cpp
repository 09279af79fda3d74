#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "omnistream/config.hpp"
#include "omnistream/metrics.hpp"
#include "omnistream/orchestrator.hpp"
#include "omnistream/trace.hpp"
#include "omnistream/wallclock.hpp"

namespace {

constexpr int kExitValidation = 2;

int cmd_run(const std::string& trace_path, const std::string& config_path,
            const std::string& out_path, bool wall_clock, double time_scale) {
    const omnistream::Trace trace = omnistream::read_trace(trace_path);
    const omnistream::SessionConfig config = omnistream::load_config(config_path);
    if (wall_clock) {
        omnistream::WallClockOptions options;
        options.time_scale = time_scale;
        const omnistream::EventLog log =
            omnistream::run_session_wall_clock(trace, config, options);
        if (!out_path.empty()) {
            omnistream::write_log(log, out_path);
        }
        std::cout << "wall-clock run: " << log.events.size() << " events\n";
        return 0;
    }
    const omnistream::SessionResult result = omnistream::run_session(trace, config);
    if (!out_path.empty()) {
        omnistream::write_log(result.log, out_path);
    }
    std::cout << omnistream::format_metrics(result.metrics);
    return 0;
}

int cmd_validate(const std::string& trace_path) {
    const omnistream::Trace trace = omnistream::read_trace(trace_path);
    const auto violations = omnistream::validate_trace(trace);
    if (violations.empty()) {
        std::cout << "ok: " << trace.records.size() << " records\n";
        return 0;
    }
    for (const auto& v : violations) {
        std::cerr << "violation (" << v.code << ") at " << v.time_ms << " ms: " << v.message
                  << "\n";
    }
    return kExitValidation;
}

int cmd_metrics(const std::string& log_path, const std::string& plot_path) {
    const omnistream::EventLog log = omnistream::read_log(log_path);
    const omnistream::MetricsReport report = omnistream::summarize(log);
    std::cout << omnistream::format_metrics(report);
    if (!plot_path.empty()) {
        std::ofstream out(plot_path, std::ios::binary | std::ios::trunc);
        if (!out) {
            std::cerr << "cannot write " << plot_path << "\n";
            return 1;
        }
        out << omnistream::format_latency_csv(report);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"omnistream: deterministic streaming audio-visual interaction pipeline"};
    app.require_subcommand(1);

    std::string trace_path;
    std::string config_path;
    std::string out_path;
    std::string plot_path;
    bool wall_clock = false;
    double time_scale = 1.0;

    CLI::App* run = app.add_subcommand("run", "simulate a session trace");
    run->add_option("--trace", trace_path, "input trace (JSONL)")->required();
    run->add_option("--config", config_path, "session config (JSON)")->required();
    run->add_option("--out", out_path, "event log output path");
    run->add_flag("--wall-clock", wall_clock,
                  "run the concurrent wall-clock pipeline instead of the deterministic engine");
    run->add_option("--time-scale", time_scale,
                    "wall-clock mode: scale factor on modeled durations");

    CLI::App* validate = app.add_subcommand("validate", "check a trace against the packet rules");
    validate->add_option("--trace", trace_path, "input trace (JSONL)")->required();

    CLI::App* metrics = app.add_subcommand("metrics", "summarize an event log");
    metrics->add_option("--log", trace_path, "event log (JSONL)")->required();
    metrics->add_option("--emit-plot-data", plot_path, "write latency-vs-turn CSV here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(trace_path, config_path, out_path, wall_clock, time_scale);
        }
        if (validate->parsed()) {
            return cmd_validate(trace_path);
        }
        if (metrics->parsed()) {
            return cmd_metrics(trace_path, plot_path);
        }
    } catch (const omnistream::TraceFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (const auto& v : e.violations) {
            std::cerr << "violation (" << v.code << ") at " << v.time_ms << " ms: " << v.message
                      << "\n";
        }
        return kExitValidation;
    } catch (const omnistream::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
