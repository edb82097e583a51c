#include "flexswap/sweep.hpp"

#include "flexswap/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iomanip>
#include <ostream>
#include <thread>

namespace flexswap
{
    namespace
    {
        SweepRow run_one(const std::string &text, std::vector<std::string> overrides, const std::string &param,
                         const std::string &value)
        {
            const bool config_path = param.find('.') != std::string::npos;
            if (config_path)
            {
                overrides.push_back(param + "=" + value);
            }
            Scenario s = load_scenario_string(text, overrides);
            if (!config_path)
            {
                s.parameters[param] = std::stod(value);
            }
            Simulation sim(s);
            SweepRow row;
            row.value = value;
            row.result = sim.run();
            const SimTime end = row.result.end_time;
            row.mean_resident_bytes = end > 0 ? mean_resident(row.result.samples, 0, end)
                                              : static_cast<double>(row.result.final_resident_bytes);
            return row;
        }
    } // namespace

    std::vector<SweepRow> sweep(const std::string &scenario_yaml, const std::vector<std::string> &overrides,
                                const std::string &param, const std::vector<std::string> &values, unsigned jobs)
    {
        if (param.empty())
        {
            throw std::invalid_argument("sweep: parameter name is empty");
        }
        std::vector<SweepRow> rows(values.size());
        std::vector<std::exception_ptr> errors(values.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&]
        {
            for (std::size_t i = next++; i < values.size(); i = next++)
            {
                try
                {
                    rows[i] = run_one(scenario_yaml, overrides, param, values[i]);
                }
                catch (...)
                {
                    errors[i] = std::current_exception();
                }
            }
        };
        const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(values.size())));
        std::vector<std::thread> threads;
        for (unsigned i = 1; i < n; ++i)
        {
            threads.emplace_back(worker);
        }
        worker();
        for (auto &t : threads)
        {
            t.join();
        }
        for (auto &e : errors)
        {
            if (e)
            {
                std::rethrow_exception(e);
            }
        }
        return rows;
    }

    void write_sweep_csv(std::ostream &out, const std::string &param, const std::vector<SweepRow> &rows)
    {
        out << "param,value,runtime_s,completed,accesses,mean_access_latency_ns,faults,major_faults,minor_faults,"
               "refaults,mean_resident_bytes,peak_resident_bytes,bytes_read,bytes_written\n";
        out << std::setprecision(10);
        for (const SweepRow &r : rows)
        {
            const RunResult &x = r.result;
            out << param << ',' << r.value << ',' << to_seconds(x.runtime) << ',' << (x.completed ? 1 : 0) << ','
                << x.accesses << ',' << x.mean_access_latency_ns << ',' << x.stats.faults << ','
                << x.stats.major_faults << ',' << x.stats.minor_faults << ',' << x.stats.refaults << ','
                << r.mean_resident_bytes << ',' << x.peak_resident_bytes << ',' << x.stats.bytes_read << ','
                << x.stats.bytes_written << '\n';
        }
    }
} // namespace flexswap
