// homtilt: runs one of the canonical tilt-sensing experiments and writes
// plot-ready CSV or JSON.
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "homtilt/harness/config.hpp"
#include "homtilt/harness/dataset.hpp"
#include "homtilt/harness/scenarios.hpp"

namespace
{

constexpr int exit_config = 2;
constexpr int exit_numeric = 3;

struct Options
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string out;
    std::string format;
};

int execute(homtilt::harness::Experiment experiment, const Options& opt)
{
    using namespace homtilt::harness;
    ScenarioConfig config;
    try
    {
        config = opt.config_path.empty() ? parse_config(Json::object(), experiment) : load_config(opt.config_path, experiment);
        if (opt.seed)
            config.seed = *opt.seed;
        if (opt.threads)
            config.threads = *opt.threads;
        if (!opt.out.empty())
            config.output_path = opt.out;
        if (!opt.format.empty())
            config.format = format_from(opt.format);
    }
    catch (const homtilt::Error& e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }

    Dataset data;
    try
    {
        data = run(config);
    }
    catch (const ConfigError& e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }
    catch (const homtilt::Error& e)
    {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return exit_numeric;
    }

    try
    {
        if (config.output_path.empty())
            write(std::cout, data, config.format);
        else
            write_file(config.output_path, data, config.format);
    }
    catch (const homtilt::Error& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    for (const auto& w : data.warnings)
        std::cerr << "warning: " << w << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    using homtilt::harness::Experiment;
    CLI::App app{"Tilt sensing with two-photon interference: simulation and estimation experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", homtilt::harness::tool_version);

    Options opt;
    std::optional<Experiment> chosen;
    auto add = [&](const char* name, const char* description, Experiment experiment) {
        CLI::App* sub = app.add_subcommand(name, description);
        sub->add_option("--config", opt.config_path, "JSON scenario file")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "RNG seed, overrides the config");
        sub->add_option("--threads", opt.threads, "worker threads (0 = all cores); results do not depend on it");
        sub->add_option("--out", opt.out, "output file (default stdout)");
        sub->add_option("--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->callback([&chosen, experiment] { chosen = experiment; });
    };
    add("hom-dip", "coincidences against the delay, with dip fits", Experiment::HomDip);
    add("tilt-scan", "normalized coincidences against the tilt, with Gaussian fit and calibration", Experiment::TiltScan);
    add("stability", "HOM and Sagnac traces under a shared path-length drift", Experiment::Stability);
    add("crlb", "Cramer-Rao bound against Monte Carlo estimator spread", Experiment::CrlbStudy);
    add("wva", "weak-value amplification factor against the phase", Experiment::WvaScan);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try
    {
        return execute(*chosen, opt);
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
