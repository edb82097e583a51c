#include "flexswap/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace flexswap
{
    namespace
    {
        std::vector<std::string> split_csv(const std::string &line)
        {
            std::vector<std::string> out;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ','))
            {
                out.push_back(cell);
            }
            if (!line.empty() && line.back() == ',')
            {
                out.emplace_back();
            }
            return out;
        }

        std::string fmt_seconds(SimTime t)
        {
            std::ostringstream os;
            os << std::fixed << std::setprecision(9) << to_seconds(t);
            return os.str();
        }

        std::string fmt_double(double v)
        {
            std::ostringstream os;
            os << std::setprecision(10) << v;
            return os.str();
        }

        SimTime parse_seconds(const std::string &s) { return from_seconds(std::stod(s)); }

        void open_or_throw(std::ofstream &out, const std::string &path)
        {
            out.open(path);
            if (!out)
            {
                throw std::runtime_error("cannot write " + path);
            }
        }

        // Piecewise-linear map between anchor lists of equal length.
        double map_time(const std::vector<double> &from, const std::vector<double> &to, double t)
        {
            for (std::size_t i = 1; i < from.size(); ++i)
            {
                if (t <= from[i] || i + 1 == from.size())
                {
                    const double span = from[i] - from[i - 1];
                    const double f = span > 0.0 ? (t - from[i - 1]) / span : 0.0;
                    return to[i - 1] + f * (to[i] - to[i - 1]);
                }
            }
            return to.back();
        }

        std::vector<double> anchors(const SyncedSeries &s, const std::vector<std::string> &sync, const char *side)
        {
            std::vector<double> out{0.0};
            for (const std::string &name : sync)
            {
                auto it = std::find_if(s.markers.begin(), s.markers.end(),
                                       [&](const MarkerRecord &m) { return m.name == name; });
                if (it == s.markers.end())
                {
                    throw MissingSyncPoints(std::string(side) + " run has no sync marker '" + name + "'");
                }
                out.push_back(static_cast<double>(it->time));
            }
            SimTime end = s.end;
            if (end == 0 && !s.samples.empty())
            {
                end = s.samples.back().time;
            }
            out.push_back(static_cast<double>(end));
            if (!std::is_sorted(out.begin(), out.end()))
            {
                throw std::invalid_argument(std::string(side) + " run: sync markers are not in time order");
            }
            return out;
        }
    } // namespace

    const std::vector<std::string> &metrics_columns()
    {
        static const std::vector<std::string> cols{
            "time_s",      "resident_bytes", "usage_bytes",  "limit_bytes",   "faults",
            "major_faults", "minor_faults",  "refaults",     "fault_rate",    "read_bytes",
            "written_bytes", "io_throughput", "accesses",    "prefetches_accepted", "reclaims_accepted"};
        return cols;
    }

    void write_metrics_csv(std::ostream &out, const std::vector<Sample> &samples)
    {
        const auto &cols = metrics_columns();
        for (std::size_t i = 0; i < cols.size(); ++i)
        {
            out << (i ? "," : "") << cols[i];
        }
        out << '\n';
        for (const Sample &s : samples)
        {
            out << fmt_seconds(s.time) << ',' << s.resident_bytes << ',' << s.usage_bytes << ',' << s.limit_bytes << ','
                << s.faults << ',' << s.major_faults << ',' << s.minor_faults << ',' << s.refaults << ','
                << fmt_double(s.fault_rate) << ',' << s.read_bytes << ',' << s.written_bytes << ','
                << fmt_double(s.io_throughput) << ',' << s.accesses << ',' << s.prefetches_accepted << ','
                << s.reclaims_accepted << '\n';
        }
    }

    std::vector<Sample> read_metrics_csv(std::istream &in)
    {
        std::string line;
        if (!std::getline(in, line))
        {
            throw std::invalid_argument("metrics csv: empty input");
        }
        const auto header = split_csv(line);
        const auto &cols = metrics_columns();
        auto col = [&](const std::string &name)
        {
            auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end())
            {
                throw std::invalid_argument("metrics csv: missing column " + name);
            }
            return static_cast<std::size_t>(it - header.begin());
        };
        std::vector<std::size_t> idx;
        for (const auto &c : cols)
        {
            idx.push_back(col(c));
        }
        std::vector<Sample> out;
        std::size_t lineno = 1;
        while (std::getline(in, line))
        {
            ++lineno;
            if (line.empty())
            {
                continue;
            }
            const auto f = split_csv(line);
            if (f.size() != header.size())
            {
                throw std::invalid_argument("metrics csv line " + std::to_string(lineno) + ": wrong field count");
            }
            auto u = [&](std::size_t k) { return std::stoull(f[idx[k]]); };
            Sample s;
            s.time = parse_seconds(f[idx[0]]);
            s.resident_bytes = u(1);
            s.usage_bytes = u(2);
            s.limit_bytes = u(3);
            s.faults = u(4);
            s.major_faults = u(5);
            s.minor_faults = u(6);
            s.refaults = u(7);
            s.fault_rate = std::stod(f[idx[8]]);
            s.read_bytes = u(9);
            s.written_bytes = u(10);
            s.io_throughput = std::stod(f[idx[11]]);
            s.accesses = u(12);
            s.prefetches_accepted = u(13);
            s.reclaims_accepted = u(14);
            out.push_back(s);
        }
        return out;
    }

    void write_markers_csv(std::ostream &out, const std::vector<MarkerRecord> &markers)
    {
        out << "name,time_s\n";
        for (const MarkerRecord &m : markers)
        {
            out << m.name << ',' << fmt_seconds(m.time) << '\n';
        }
    }

    std::vector<MarkerRecord> read_markers_csv(std::istream &in)
    {
        std::string line;
        std::getline(in, line);
        if (line != "name,time_s")
        {
            throw std::invalid_argument("markers csv: unexpected header");
        }
        std::vector<MarkerRecord> out;
        while (std::getline(in, line))
        {
            if (line.empty())
            {
                continue;
            }
            const auto f = split_csv(line);
            if (f.size() != 2)
            {
                throw std::invalid_argument("markers csv: bad line '" + line + "'");
            }
            out.push_back({f[0], parse_seconds(f[1])});
        }
        return out;
    }

    std::string summary_json(const RunResult &r, int indent)
    {
        nlohmann::ordered_json j;
        j["scenario"] = r.scenario;
        j["seed"] = r.seed;
        j["page_size"] = bytes_of(r.page_size);
        j["vm_bytes"] = r.vm_bytes;
        j["duration_s"] = to_seconds(r.duration);
        j["end_time_s"] = to_seconds(r.end_time);
        j["runtime_s"] = to_seconds(r.runtime);
        j["completed"] = r.completed;
        j["accesses"] = r.accesses;
        j["dropped_accesses"] = r.dropped_accesses;
        j["mean_access_latency_ns"] = r.mean_access_latency_ns;
        j["final_resident_bytes"] = r.final_resident_bytes;
        j["peak_resident_bytes"] = r.peak_resident_bytes;
        j["scanner_cpu_ns"] = r.scanner_cpu;
        j["ptes_scanned"] = r.ptes_scanned;
        const EngineStats &s = r.stats;
        j["engine"] = {
            {"faults", s.faults},
            {"major_faults", s.major_faults},
            {"minor_faults", s.minor_faults},
            {"first_touch_faults", s.first_touch_faults},
            {"refaults", s.refaults},
            {"prefetch_requests", s.prefetch_requests},
            {"prefetch_accepted", s.prefetch_accepted},
            {"reclaim_requests", s.reclaim_requests},
            {"reclaim_accepted", s.reclaim_accepted},
            {"forced_reclaims", s.forced_reclaims},
            {"deferred_admissions", s.deferred_admissions},
            {"noop_dequeues", s.noop_dequeues},
            {"swap_ins", s.swap_ins},
            {"swap_outs", s.swap_outs},
            {"device_reads", s.device_reads},
            {"device_writes", s.device_writes},
            {"zero_fills", s.zero_fills},
            {"bytes_read", s.bytes_read},
            {"bytes_written", s.bytes_written},
        };
        nlohmann::ordered_json markers = nlohmann::ordered_json::array();
        for (const MarkerRecord &m : r.markers)
        {
            markers.push_back({{"name", m.name}, {"time_s", to_seconds(m.time)}});
        }
        j["markers"] = markers;
        nlohmann::ordered_json pol = nlohmann::ordered_json::object();
        for (const auto &[name, counters] : r.policies)
        {
            nlohmann::ordered_json c = nlohmann::ordered_json::object();
            for (const auto &[k, v] : counters)
            {
                c[k] = v;
            }
            pol[name] = c;
        }
        j["policies"] = pol;
        j["samples"] = r.samples.size();
        return j.dump(indent);
    }

    std::string params_json(const ParameterRegistry &registry, int indent)
    {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const std::string &name : registry.names())
        {
            j[name] = registry.get(name);
        }
        return j.dump(indent);
    }

    void write_run_outputs(const std::string &dir, const RunResult &result, const ParameterRegistry &registry)
    {
        std::filesystem::create_directories(dir);
        const std::filesystem::path base(dir);
        std::ofstream metrics;
        open_or_throw(metrics, (base / "metrics.csv").string());
        write_metrics_csv(metrics, result.samples);
        std::ofstream markers;
        open_or_throw(markers, (base / "markers.csv").string());
        write_markers_csv(markers, result.markers);
        std::ofstream summary;
        open_or_throw(summary, (base / "summary.json").string());
        summary << summary_json(result) << '\n';
        std::ofstream params;
        open_or_throw(params, (base / "params.json").string());
        params << params_json(registry) << '\n';
    }

    void write_event_log(const std::string &path, const std::vector<FiredEvent> &trace)
    {
        std::ofstream out;
        open_or_throw(out, path);
        for (const FiredEvent &e : trace)
        {
            out << e.fire_at << ' ' << e.seq << ' ' << to_string(e.kind) << '\n';
        }
    }

    double mean_resident(const std::vector<Sample> &samples, SimTime a, SimTime b)
    {
        if (samples.empty())
        {
            return 0.0;
        }
        if (b <= a)
        {
            // Degenerate window: value in force at `a`.
            auto it = std::lower_bound(samples.begin(), samples.end(), a,
                                       [](const Sample &s, SimTime t) { return s.time < t; });
            return static_cast<double>(it == samples.end() ? samples.back().resident_bytes : it->resident_bytes);
        }
        double area = 0.0;
        SimTime prev = 0;
        for (const Sample &s : samples)
        {
            const SimTime lo = std::max(prev, a);
            const SimTime hi = std::min(s.time, b);
            if (hi > lo)
            {
                area += static_cast<double>(hi - lo) * static_cast<double>(s.resident_bytes);
            }
            prev = s.time;
            if (prev >= b)
            {
                break;
            }
        }
        if (prev < b)
        {
            const SimTime lo = std::max(prev, a);
            area += static_cast<double>(b - lo) * static_cast<double>(samples.back().resident_bytes);
        }
        return area / static_cast<double>(b - a);
    }

    double memory_saved(const SyncedSeries &fast, const SyncedSeries &slow, const std::vector<std::string> &sync,
                        SimTime bucket)
    {
        if (bucket == 0)
        {
            throw std::invalid_argument("memory_saved: bucket must be positive");
        }
        const auto fa = anchors(fast, sync, "fast");
        const auto sa = anchors(slow, sync, "slow");
        const double end = fa.back();
        if (end <= 0.0)
        {
            return 0.0;
        }
        double weighted = 0.0;
        double weight = 0.0;
        for (double a = 0.0; a < end; a += static_cast<double>(bucket))
        {
            const double b = std::min(end, a + static_cast<double>(bucket));
            const double fast_mean =
                mean_resident(fast.samples, static_cast<SimTime>(std::llround(a)), static_cast<SimTime>(std::llround(b)));
            const double sa_lo = map_time(fa, sa, a);
            const double sa_hi = map_time(fa, sa, b);
            const double slow_mean = mean_resident(slow.samples, static_cast<SimTime>(std::llround(sa_lo)),
                                                   static_cast<SimTime>(std::llround(sa_hi)));
            if (slow_mean <= 0.0)
            {
                continue;
            }
            weighted += (b - a) * (fast_mean / slow_mean);
            weight += b - a;
        }
        return weight > 0.0 ? 1.0 - weighted / weight : 0.0;
    }
} // namespace flexswap
