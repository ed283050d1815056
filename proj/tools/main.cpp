#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shortvid/app.hpp"
#include "shortvid/error.hpp"

namespace {

enum Exit { ok = 0, usage = 1, config = 2, infeasible = 3, runtime = 4 };

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::vector<std::string> sets;
};

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw shortvid::ConfigError("cannot read " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw shortvid::ConfigError(path + ": " + e.what());
    }
}

void run(const std::string& sub, const RunArgs& a) {
    using namespace shortvid::app;
    const auto scenario = load_scenario(resolve_config_path(a.config), a.sets, a.seed);
    const auto result = run_scenario(scenario, sub);
    const std::string report = a.out + "/" + sub + "_report.json";
    write_atomic(report, result.report.dump(2) + "\n");
    for (const auto& [stem, csv] : result.series) write_atomic(a.out + "/" + stem + ".csv", csv.text());
    std::cout << report << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Short-video streaming and publishing scenario runner"};
    cli.require_subcommand(1);
    cli.set_version_flag("--version", shortvid::app::kVersion);

    RunArgs args;
    std::string chosen;
    for (const char* name : {"playback", "cdn", "delivery", "uiae", "publish", "experiment", "full"}) {
        auto* sc = cli.add_subcommand(name, std::string("run the ") + name + " scenario");
        sc->add_option("--config", args.config,
                       std::string("scenario file; also looked up in $") + shortvid::app::kConfigDirEnv);
        sc->add_option("--seed", args.seed, "override the scenario seed");
        sc->add_option("--out", args.out, "output directory")->capture_default_str();
        sc->add_option("--set", args.sets, "override key=value (dotted path, repeatable)");
        sc->callback([&chosen, name] { chosen = name; });
    }

    std::string report_a, report_b, compare_out;
    auto* cmp = cli.add_subcommand("compare", "diff two reports");
    cmp->add_option("a", report_a, "first report")->required();
    cmp->add_option("b", report_b, "second report")->required();
    cmp->add_option("--out", compare_out, "write the diff here instead of stdout");
    cmp->callback([&chosen] { chosen = "compare"; });

    std::string series, method = "seasonal_naive", fc_out;
    int window = 12, horizon = 12, period = 288;
    auto* fc = cli.add_subcommand("forecast", "forecast a bandwidth series");
    fc->add_option("--input", series, "CSV with a value column")->required();
    fc->add_option("--method", method, "moving_average | seasonal_naive")->capture_default_str();
    fc->add_option("--window", window)->capture_default_str();
    fc->add_option("--horizon", horizon)->capture_default_str();
    fc->add_option("--period", period)->capture_default_str();
    fc->add_option("--out", fc_out, "write the forecast here instead of stdout");
    fc->callback([&chosen] { chosen = "forecast"; });

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        if (chosen == "compare") {
            const auto diff = shortvid::app::compare_runs(read_json(report_a), read_json(report_b)).dump(2) + "\n";
            if (compare_out.empty()) std::cout << diff;
            else shortvid::app::write_atomic(compare_out, diff);
        } else if (chosen == "forecast") {
            const auto r = shortvid::app::forecast_csv(series, method, window, horizon, period).dump(2) + "\n";
            if (fc_out.empty()) std::cout << r;
            else shortvid::app::write_atomic(fc_out, r);
        } else {
            run(chosen, args);
        }
    } catch (const shortvid::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config;
    } catch (const shortvid::InvalidParameter& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config;
    } catch (const shortvid::Infeasible& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return infeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return runtime;
    }
    return ok;
}
