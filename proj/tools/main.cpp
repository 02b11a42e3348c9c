#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hbmtherm/scenario.hpp"

// Scenario-driven front end. Every subcommand takes a scenario JSON file;
// outputs land in -o/--out, which defaults to $HBMTHERM_OUT_DIR or ./out.
// Exit codes: 0 ok, 2 validation, 3 numerical, 4 I/O.

namespace {

std::string default_out_dir() {
    const char* env = std::getenv("HBMTHERM_OUT_DIR");
    return (env != nullptr && *env != '\0') ? std::string(env) : std::string("./out");
}

// Sweep values arrive as comma-separated literals; anything that is not
// valid JSON on its own (per_layer, say) is taken as a string.
std::vector<hbmtherm::Json> parse_sweep_values(const std::string& csv) {
    std::vector<hbmtherm::Json> values;
    std::size_t begin = 0;
    while (begin <= csv.size()) {
        const std::size_t end = std::min(csv.find(',', begin), csv.size());
        const std::string token = csv.substr(begin, end - begin);
        if (token.empty()) throw hbmtherm::DomainError("sweep: empty value in --values");
        try {
            values.push_back(hbmtherm::Json::parse(token));
        } catch (const hbmtherm::Json::parse_error&) {
            values.push_back(hbmtherm::Json(token));
        }
        begin = end + 1;
        if (end == csv.size()) break;
    }
    return values;
}

std::string format_number(double v) {
    std::string out;
    hbmtherm::detail::append_number(out, v);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transient thermal simulator for stacked-memory bank lattices"};
    app.require_subcommand(1);

    std::string run_scenario;
    std::string run_out = default_out_dir();
    CLI::App* run_cmd = app.add_subcommand("run", "Simulate a scenario and write its artifacts");
    run_cmd->add_option("scenario", run_scenario, "Scenario JSON file")->required();
    run_cmd->add_option("-o,--out", run_out, "Output directory");

    std::string plan_scenario;
    std::string plan_out = default_out_dir();
    CLI::App* plan_cmd = app.add_subcommand("plan", "Compute the attack plan and write plan.json");
    plan_cmd->add_option("scenario", plan_scenario, "Scenario JSON file")->required();
    plan_cmd->add_option("-o,--out", plan_out, "Output directory");

    std::string delays_scenario;
    int delays_src = 0;
    int delays_dst = 0;
    double delays_duration = 5e-3;
    double delays_amplitude = 1.0;
    double delays_horizon = 0.0;
    CLI::App* delays_cmd =
        app.add_subcommand("delays", "Measure the heat propagation delay between two banks");
    delays_cmd->add_option("scenario", delays_scenario, "Scenario JSON file")->required();
    delays_cmd->add_option("--src", delays_src, "Source bank id")->required();
    delays_cmd->add_option("--dst", delays_dst, "Destination bank id")->required();
    delays_cmd->add_option("--duration", delays_duration, "Probe pulse duration, s");
    delays_cmd->add_option("--amplitude", delays_amplitude, "Probe pulse amplitude, W");
    delays_cmd->add_option("--horizon", delays_horizon, "Observation horizon, s (0 = automatic)");

    std::string sweep_scenario;
    std::string sweep_param;
    std::string sweep_values;
    std::string sweep_out = default_out_dir();
    int sweep_jobs = 1;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "Run one scenario per value into numbered subdirectories");
    sweep_cmd->add_option("scenario", sweep_scenario, "Scenario JSON file")->required();
    sweep_cmd->add_option("--param", sweep_param, "Dotted field path, e.g. solver.dt")->required();
    sweep_cmd->add_option("--values", sweep_values, "Comma-separated values")->required();
    sweep_cmd->add_option("-o,--out", sweep_out, "Output root directory");
    sweep_cmd->add_option("--jobs", sweep_jobs, "Concurrent runs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run_cmd->parsed()) {
            const hbmtherm::Scenario scenario =
                hbmtherm::scenario_from_json(hbmtherm::load_json_file(run_scenario));
            const hbmtherm::RunArtifacts artifacts = hbmtherm::execute_scenario(scenario, run_out);
            std::printf("temperature_csv=%s\n", artifacts.temperature_csv.c_str());
            if (artifacts.sensor_csv.has_value()) {
                std::printf("sensor_csv=%s\n", artifacts.sensor_csv->c_str());
            }
            if (artifacts.plan_json.has_value()) {
                std::printf("plan_json=%s\n", artifacts.plan_json->c_str());
            }
            std::printf("summary_json=%s\n", artifacts.summary_json.c_str());
        } else if (plan_cmd->parsed()) {
            const hbmtherm::Scenario scenario =
                hbmtherm::scenario_from_json(hbmtherm::load_json_file(plan_scenario));
            const std::string path = hbmtherm::emit_plan(scenario, plan_out);
            std::printf("plan_json=%s\n", path.c_str());
        } else if (delays_cmd->parsed()) {
            const hbmtherm::Scenario scenario =
                hbmtherm::scenario_from_json(hbmtherm::load_json_file(delays_scenario));
            const hbmtherm::ThermalNetwork net =
                hbmtherm::build_network(scenario.geometry, scenario.material);
            const hbmtherm::PulseSpec probe{delays_src, 0.0, delays_duration, delays_amplitude};
            const double horizon = delays_horizon > 0.0
                                       ? delays_horizon
                                       : hbmtherm::detail::probe_horizon(net, delays_duration);
            const double delay = hbmtherm::propagation_delay(net, delays_src, delays_dst, probe,
                                                             horizon, scenario.solver);
            std::printf("%s\n", format_number(delay).c_str());
        } else if (sweep_cmd->parsed()) {
            const hbmtherm::Json base = hbmtherm::load_json_file(sweep_scenario);
            const std::vector<std::string> dirs = hbmtherm::run_sweep(
                base, sweep_param, parse_sweep_values(sweep_values), sweep_out, sweep_jobs);
            for (const std::string& dir : dirs) std::printf("run_dir=%s\n", dir.c_str());
        }
    } catch (const hbmtherm::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
