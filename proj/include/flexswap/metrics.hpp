#pragma once

#include "flexswap/policy_engine.hpp"
#include "flexswap/simulation.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace flexswap
{
    // Column order of metrics.csv.
    const std::vector<std::string> &metrics_columns();

    void write_metrics_csv(std::ostream &out, const std::vector<Sample> &samples);
    std::vector<Sample> read_metrics_csv(std::istream &in);

    // name,time_s
    void write_markers_csv(std::ostream &out, const std::vector<MarkerRecord> &markers);
    std::vector<MarkerRecord> read_markers_csv(std::istream &in);

    std::string summary_json(const RunResult &result, int indent = 2);
    std::string params_json(const ParameterRegistry &registry, int indent = 2);

    // Writes metrics.csv, markers.csv, summary.json, and params.json into `dir`.
    void write_run_outputs(const std::string &dir, const RunResult &result, const ParameterRegistry &registry);
    void write_event_log(const std::string &path, const std::vector<FiredEvent> &trace);

    class MissingSyncPoints : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct SyncedSeries
    {
        std::vector<Sample> samples;
        std::vector<MarkerRecord> markers;
        SimTime end = 0; // end of the run; defaults to the last sample time
    };

    // Fraction of memory the fast run saves against the slow one. The fast run is cut into
    // buckets of `bucket` simulated time; each bucket is mapped onto the slow run piecewise
    // linearly between the start, the named sync markers, and the end, and the time-weighted
    // mean resident memory of both sides is compared. Returns 1 - mean(fast / slow).
    double memory_saved(const SyncedSeries &fast, const SyncedSeries &slow, const std::vector<std::string> &sync,
                        SimTime bucket = 5 * kSecond);

    // Time-weighted mean resident_bytes over [a, b), treating samples as a step function where
    // each sample holds from the previous sample time up to its own time.
    double mean_resident(const std::vector<Sample> &samples, SimTime a, SimTime b);
} // namespace flexswap
