// flexswap: run scenarios, sweep parameters, compare runs, and edit saved parameter dumps.

#include "flexswap/metrics.hpp"
#include "flexswap/scenario.hpp"
#include "flexswap/simulation.hpp"
#include "flexswap/sweep.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace flexswap;

namespace
{
    std::string read_file(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
        {
            throw std::runtime_error("cannot open " + path);
        }
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    SyncedSeries load_series(const std::string &metrics_path)
    {
        SyncedSeries s;
        std::ifstream in(metrics_path);
        if (!in)
        {
            throw std::runtime_error("cannot open " + metrics_path);
        }
        s.samples = read_metrics_csv(in);
        const fs::path markers = fs::path(metrics_path).parent_path() / "markers.csv";
        if (fs::exists(markers))
        {
            std::ifstream m(markers);
            s.markers = read_markers_csv(m);
        }
        if (!s.samples.empty())
        {
            s.end = s.samples.back().time;
        }
        return s;
    }

    std::vector<std::string> split_list(const std::vector<std::string> &items)
    {
        std::vector<std::string> out;
        for (const std::string &item : items)
        {
            std::stringstream ss(item);
            std::string part;
            while (std::getline(ss, part, ','))
            {
                if (!part.empty())
                {
                    out.push_back(part);
                }
            }
        }
        return out;
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"flexswap: discrete-event simulator for userspace VM memory overcommit"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    std::vector<std::string> param_sets;
    bool events = false;
    auto *run = app.add_subcommand("run", "Run one scenario and write metrics.csv, markers.csv, summary.json");
    run->add_option("config", config, "Scenario YAML file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--set", sets, "Config override key.path=value (repeatable)");
    run->add_option("--param", param_sets, "Policy parameter NAME=VALUE (repeatable)");
    run->add_flag("--events", events, "Also write events.log");

    std::string sweep_param;
    std::vector<std::string> sweep_values;
    unsigned jobs = 1;
    std::string sweep_out = "sweep.csv";
    auto *sw = app.add_subcommand("sweep", "Run a scenario once per parameter value");
    sw->add_option("config", config, "Scenario YAML file")->required()->check(CLI::ExistingFile);
    sw->add_option("--param", sweep_param, "Registered parameter or dotted config path")->required();
    sw->add_option("--values", sweep_values, "Values (space or comma separated)");
    sw->add_option("--set", sets, "Config override key.path=value (repeatable)");
    sw->add_option("--seed", seed, "Override the scenario seed");
    sw->add_option("--jobs,-j", jobs, "Parallel runs");
    sw->add_option("--out", sweep_out, "Output CSV ('-' for stdout)");

    std::string fast_csv;
    std::string slow_csv;
    std::vector<std::string> sync;
    double bucket_s = 5.0;
    auto *cmp = app.add_subcommand("compare", "Memory saved by the fast run relative to the slow run");
    cmp->add_option("fast", fast_csv, "metrics.csv of the faster run")->required()->check(CLI::ExistingFile);
    cmp->add_option("slow", slow_csv, "metrics.csv of the slower run")->required()->check(CLI::ExistingFile);
    cmp->add_option("--sync", sync, "Sync marker names shared by both runs (markers.csv beside each file)");
    cmp->add_option("--bucket", bucket_s, "Bucket length in seconds of the fast run");

    std::string action;
    std::string name;
    std::string registry = "params.json";
    std::optional<double> value;
    auto *param = app.add_subcommand("param", "Read or write a parameter in a saved registry dump");
    param->add_option("action", action, "get or set")->required()->check(CLI::IsMember({"get", "set"}));
    param->add_option("name", name, "Parameter name")->required();
    param->add_option("value", value, "New value (set)");
    param->add_option("--registry", registry, "params.json of a run")->check(CLI::ExistingFile);

    auto *heat = app.add_subcommand("heatmap", "Write the workload's access stream as guest-virtual and guest-physical pages");
    std::string heat_out = "heatmap.csv";
    std::uint64_t heat_limit = 100000;
    heat->add_option("config", config, "Scenario YAML file")->required()->check(CLI::ExistingFile);
    heat->add_option("--set", sets, "Config override key.path=value (repeatable)");
    heat->add_option("--limit", heat_limit, "Maximum accesses to write");
    heat->add_option("--out", heat_out, "Output CSV");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*run)
        {
            if (seed)
            {
                sets.push_back("seed=" + std::to_string(*seed));
            }
            Scenario s = load_scenario_file(config, sets);
            for (const std::string &p : param_sets)
            {
                const auto eq = p.find('=');
                if (eq == std::string::npos)
                {
                    throw std::invalid_argument("--param expects NAME=VALUE");
                }
                s.parameters[p.substr(0, eq)] = std::stod(p.substr(eq + 1));
            }
            SimulationOptions opt;
            opt.trace_events = events;
            Simulation sim(s, opt);
            RunResult r = sim.run();
            write_run_outputs(out_dir, r, sim.engine().parameters());
            if (events)
            {
                write_event_log((fs::path(out_dir) / "events.log").string(), sim.loop().trace());
            }
            std::cout << "faults " << r.stats.faults << " runtime_s " << to_seconds(r.runtime) << " -> " << out_dir
                      << '\n';
        }
        else if (*sw)
        {
            if (seed)
            {
                sets.push_back("seed=" + std::to_string(*seed));
            }
            const auto values = split_list(sweep_values);
            auto rows = sweep(read_file(config), sets, sweep_param, values, jobs);
            if (sweep_out == "-")
            {
                write_sweep_csv(std::cout, sweep_param, rows);
            }
            else
            {
                std::ofstream out(sweep_out);
                if (!out)
                {
                    throw std::runtime_error("cannot write " + sweep_out);
                }
                write_sweep_csv(out, sweep_param, rows);
                std::cout << rows.size() << " runs -> " << sweep_out << '\n';
            }
        }
        else if (*cmp)
        {
            const double saved = memory_saved(load_series(fast_csv), load_series(slow_csv), split_list(sync),
                                              from_seconds(bucket_s));
            std::cout << "memory_saved " << saved << '\n';
        }
        else if (*heat)
        {
            // Untimed walk of vCPU 0's stream through the scenario's guest page table.
            Simulation sim(load_scenario_file(config, sets));
            const Scenario &sc = sim.scenario();
            auto w = make_workload(sc.workload, 0, sc.vcpus);
            std::ofstream out(heat_out);
            if (!out)
            {
                throw std::runtime_error("cannot write " + heat_out);
            }
            out << "index,gva_page,gpa_page\n";
            std::uint64_t n = 0;
            while (n < heat_limit)
            {
                const auto step = w->next(0);
                if (!step)
                {
                    break;
                }
                const auto *a = std::get_if<Access>(&*step);
                if (a == nullptr)
                {
                    continue;
                }
                const auto gpa = sim.space().gva_to_gpa(a->ctx, a->gva);
                out << n++ << ',' << a->gva.value / (4 * kKiB) << ',';
                if (gpa)
                {
                    out << gpa->value / (4 * kKiB);
                }
                out << '\n';
            }
            std::cout << n << " accesses -> " << heat_out << '\n';
        }
        else if (*param)
        {
            nlohmann::ordered_json j = nlohmann::ordered_json::parse(read_file(registry));
            if (!j.contains(name))
            {
                std::cerr << "unknown parameter: " << name << '\n';
                return 2;
            }
            if (action == "get")
            {
                std::cout << j[name].get<double>() << '\n';
            }
            else
            {
                if (!value)
                {
                    std::cerr << "param set needs a value\n";
                    return 2;
                }
                j[name] = *value;
                std::ofstream out(registry);
                out << j.dump(2) << '\n';
            }
        }
    }
    catch (const MissingSyncPoints &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
