#ifndef HOMTILT_HARNESS_CONFIG_HPP
#define HOMTILT_HARNESS_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "../errors.hpp"
#include "../hom.hpp"
#include "../noise.hpp"
#include "../optics.hpp"

namespace homtilt::harness
{

using Json = nlohmann::ordered_json;

class ConfigError : public Error
{
public:
    using Error::Error;
};

enum class Experiment
{
    HomDip,
    TiltScan,
    Stability,
    CrlbStudy,
    WvaScan
};

inline const char* to_string(Experiment e)
{
    switch (e)
    {
    case Experiment::HomDip: return "hom-dip";
    case Experiment::TiltScan: return "tilt-scan";
    case Experiment::Stability: return "stability";
    case Experiment::CrlbStudy: return "crlb";
    case Experiment::WvaScan: return "wva";
    }
    return "unknown";
}

inline Experiment experiment_from(std::string_view name)
{
    for (Experiment e : {Experiment::HomDip, Experiment::TiltScan, Experiment::Stability, Experiment::CrlbStudy,
                         Experiment::WvaScan})
        if (name == to_string(e))
            return e;
    throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

enum class OutputFormat
{
    Csv,
    Json
};

inline OutputFormat format_from(std::string_view name)
{
    if (name == "csv")
        return OutputFormat::Csv;
    if (name == "json")
        return OutputFormat::Json;
    throw ConfigError("output format must be csv or json, got '" + std::string(name) + "'");
}

struct Range
{
    double min = 0.0;
    double max = 0.0;
    std::size_t steps = 1;

    std::vector<double> points() const
    {
        std::vector<double> out(steps);
        for (std::size_t i = 0; i < steps; ++i)
            out[i] = steps == 1 ? min : min + (max - min) * static_cast<double>(i) / static_cast<double>(steps - 1);
        return out;
    }
};

struct HomDipConfig
{
    Range delta{-1e-4, 1e-4, 41};
    double seconds_per_point = 10.0;
    double visibility = 0.96;
    double coherence_length = 0.0; // resolved: 130 lambda unless given or derived from a bandwidth
    std::optional<double> bandwidth;
    double proportionality = 1.0;
    bool noise_free = false;
};

struct TiltScanConfig
{
    Range theta; // resolved: +-4 s, 41 points
    double seconds_per_point = 10.0;
    std::size_t replicates = 1;
    bool noise_free = false;
};

struct StabilityConfig
{
    double theta_0 = 0.0; // resolved: s
    double duration = 8.0 * 3600.0;
    double filter_window = 600.0;
    double sagnac_visibility = 1.0;
};

struct CrlbConfig
{
    std::vector<double> nu{1e2, 1e4, 1e6};
    std::size_t replicates = 1000;
    double theta_0 = 0.0; // resolved: s
    double photons_per_trial = 1.0;
    double delta_z_jitter = 0.0;
};

struct WvaConfig
{
    Range phi{0.0, std::numbers::pi / 50.0, 21};
    double theta_ps = (1.0 + 1.0 / 80.0) * std::numbers::pi / 4.0;
};

struct ScenarioConfig
{
    Experiment experiment = Experiment::TiltScan;
    std::uint64_t seed = 1;
    unsigned threads = 1; // affects scheduling only, never results
    OpticalParams optics;
    noise::CountingConfig counting;
    std::size_t calibration_bins = 75;
    noise::OplProcess noise = noise::opl::Constant{0.0};
    HomDipConfig hom_dip;
    TiltScanConfig tilt_scan;
    StabilityConfig stability;
    CrlbConfig crlb;
    WvaConfig wva;
    std::string output_path;
    OutputFormat format = OutputFormat::Csv;
};

namespace detail
{

inline void check_keys(const Json& object, std::string_view section, std::initializer_list<std::string_view> allowed)
{
    if (!object.is_object())
        throw ConfigError(std::string(section) + " must be a JSON object");
    for (auto it = object.begin(); it != object.end(); ++it)
    {
        bool known = false;
        for (std::string_view key : allowed)
            known = known || it.key() == key;
        if (!known)
            throw ConfigError("unknown key '" + it.key() + "' in " + std::string(section));
    }
}

inline double number(const Json& object, std::string_view section, const char* key, double fallback)
{
    if (!object.contains(key))
        return fallback;
    const Json& v = object.at(key);
    if (!v.is_number())
        throw ConfigError(std::string(section) + "." + key + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x))
        throw ConfigError(std::string(section) + "." + key + " must be finite");
    return x;
}

inline std::uint64_t unsigned_integer(const Json& object, std::string_view section, const char* key, std::uint64_t fallback)
{
    if (!object.contains(key))
        return fallback;
    const Json& v = object.at(key);
    if (!v.is_number_unsigned())
        throw ConfigError(std::string(section) + "." + key + " must be a non-negative integer");
    return v.get<std::uint64_t>();
}

inline bool boolean(const Json& object, std::string_view section, const char* key, bool fallback)
{
    if (!object.contains(key))
        return fallback;
    const Json& v = object.at(key);
    if (!v.is_boolean())
        throw ConfigError(std::string(section) + "." + key + " must be true or false");
    return v.get<bool>();
}

inline std::string text(const Json& object, std::string_view section, const char* key, std::string fallback)
{
    if (!object.contains(key))
        return fallback;
    const Json& v = object.at(key);
    if (!v.is_string())
        throw ConfigError(std::string(section) + "." + key + " must be a string");
    return v.get<std::string>();
}

inline Range range(const Json& object, std::string_view section, const char* min_key, const char* max_key, Range fallback)
{
    Range r{number(object, section, min_key, fallback.min), number(object, section, max_key, fallback.max),
            unsigned_integer(object, section, "steps", fallback.steps)};
    if (r.steps == 0)
        throw ConfigError(std::string(section) + ".steps must be at least 1");
    if (r.steps > 1 && !(r.max > r.min))
        throw ConfigError(std::string(section) + ": " + max_key + " must exceed " + min_key);
    return r;
}

inline noise::OplProcess parse_noise(const Json& j)
{
    if (!j.is_object())
        throw ConfigError("noise must be a JSON object");
    const std::string kind = text(j, "noise", "kind", "");
    if (kind == "constant")
    {
        check_keys(j, "noise", {"kind", "value"});
        return noise::opl::Constant{number(j, "noise", "value", 0.0)};
    }
    if (kind == "jitter")
    {
        check_keys(j, "noise", {"kind", "sigma"});
        return noise::opl::GaussianJitter{number(j, "noise", "sigma", 0.0)};
    }
    if (kind == "random_walk")
    {
        check_keys(j, "noise", {"kind", "step_sigma", "bound"});
        return noise::opl::RandomWalk{number(j, "noise", "step_sigma", 0.0), number(j, "noise", "bound", 0.0)};
    }
    if (kind == "sinusoidal")
    {
        check_keys(j, "noise", {"kind", "amplitude", "period", "phase"});
        return noise::opl::Sinusoidal{number(j, "noise", "amplitude", 0.0), number(j, "noise", "period", 7200.0),
                                      number(j, "noise", "phase", 0.0)};
    }
    if (kind == "piecewise")
    {
        check_keys(j, "noise", {"kind", "breakpoints"});
        if (!j.contains("breakpoints") || !j.at("breakpoints").is_array())
            throw ConfigError("noise.breakpoints must be an array of {t, value}");
        noise::opl::PiecewiseDrift drift;
        for (const Json& b : j.at("breakpoints"))
        {
            check_keys(b, "noise.breakpoints[]", {"t", "value"});
            if (!b.contains("t") || !b.contains("value"))
                throw ConfigError("each breakpoint needs t and value");
            drift.breakpoints.push_back({number(b, "noise.breakpoints[]", "t", 0.0), number(b, "noise.breakpoints[]", "value", 0.0)});
        }
        return drift;
    }
    throw ConfigError("noise.kind must be one of constant, jitter, random_walk, sinusoidal, piecewise");
}

inline Json noise_to_json(const noise::OplProcess& process)
{
    struct Visitor
    {
        Json operator()(const noise::opl::Constant& p) const { return Json{{"kind", "constant"}, {"value", p.value}}; }
        Json operator()(const noise::opl::GaussianJitter& p) const { return Json{{"kind", "jitter"}, {"sigma", p.sigma}}; }
        Json operator()(const noise::opl::RandomWalk& p) const
        {
            return Json{{"kind", "random_walk"}, {"step_sigma", p.step_sigma}, {"bound", p.bound}};
        }
        Json operator()(const noise::opl::Sinusoidal& p) const
        {
            return Json{{"kind", "sinusoidal"}, {"amplitude", p.amplitude}, {"period", p.period}, {"phase", p.phase}};
        }
        Json operator()(const noise::opl::PiecewiseDrift& p) const
        {
            Json points = Json::array();
            for (const auto& b : p.breakpoints)
                points.push_back(Json{{"t", b.t}, {"value", b.value}});
            return Json{{"kind", "piecewise"}, {"breakpoints", points}};
        }
    };
    return std::visit(Visitor{}, process);
}

inline const Json& section(const Json& root, const char* key)
{
    static const Json empty = Json::object();
    return root.contains(key) ? root.at(key) : empty;
}

} // namespace detail

// Checks everything that can be checked before running; failures are ConfigError.
inline void validate(const ScenarioConfig& c)
{
    try
    {
        c.optics.validate();
        c.counting.validate();
        noise::validate(c.noise);
        if (c.calibration_bins == 0)
            throw ConfigError("counting.calibration_bins must be at least 1");

        const HomDipConfig& d = c.hom_dip;
        homtilt::detail::require_positive(d.seconds_per_point, "hom_dip.seconds_per_point");
        homtilt::detail::require_positive(d.coherence_length, "hom_dip.coherence_length");
        if (!(d.visibility >= 0.0 && d.visibility <= 1.0))
            throw ConfigError("hom_dip.visibility must lie in [0, 1]");

        const TiltScanConfig& t = c.tilt_scan;
        homtilt::detail::require_positive(t.seconds_per_point, "tilt_scan.seconds_per_point");
        if (t.replicates == 0)
            throw ConfigError("tilt_scan.replicates must be at least 1");
        if (t.theta.steps < 5)
            throw ConfigError("tilt_scan.steps must be at least 5 for the Gaussian fit");
        check_tilt(t.theta.min, c.optics);
        check_tilt(t.theta.max, c.optics);

        const StabilityConfig& s = c.stability;
        check_tilt(s.theta_0, c.optics);
        homtilt::detail::require_positive(s.duration, "stability.duration");
        homtilt::detail::require_positive(s.filter_window, "stability.filter_window");
        if (s.duration < c.counting.bin_seconds)
            throw ConfigError("stability.duration is shorter than one bin");
        if (s.filter_window < c.counting.bin_seconds)
            throw ConfigError("stability.filter_window must cover at least one bin");
        if (!(s.sagnac_visibility >= 0.0 && s.sagnac_visibility <= 1.0))
            throw ConfigError("stability.sagnac_visibility must lie in [0, 1]");

        const CrlbConfig& r = c.crlb;
        if (r.nu.empty())
            throw ConfigError("crlb.nu must not be empty");
        for (double nu : r.nu)
            if (!(nu >= 1.0) || nu != std::floor(nu) || nu > 1e15)
                throw ConfigError("crlb.nu entries must be whole numbers of at least 1");
        if (r.replicates < 10)
            throw ConfigError("crlb.replicates must be at least 10");
        check_tilt(r.theta_0, c.optics);
        homtilt::detail::require_positive(r.photons_per_trial, "crlb.photons_per_trial");
        if (r.delta_z_jitter < 0.0)
            throw ConfigError("crlb.delta_z_jitter must be non-negative");
        homtilt::detail::require_finite(c.wva.theta_ps, "wva.theta_ps");
    }
    catch (const ConfigError&)
    {
        throw;
    }
    catch (const Error& e)
    {
        throw ConfigError(e.what());
    }
}

inline ScenarioConfig parse_config(const Json& root, std::optional<Experiment> experiment = std::nullopt)
{
    detail::check_keys(root, "config",
                       {"experiment", "seed", "threads", "optics", "counting", "noise", "hom_dip", "tilt_scan", "stability",
                        "crlb", "wva", "output"});
    ScenarioConfig c;

    if (root.contains("experiment"))
    {
        const Experiment named = experiment_from(detail::text(root, "config", "experiment", ""));
        if (experiment && *experiment != named)
            throw ConfigError(std::string("config is for experiment '") + to_string(named) + "' but '" + to_string(*experiment) +
                              "' was requested");
        c.experiment = named;
    }
    else if (experiment)
        c.experiment = *experiment;
    else
        throw ConfigError("no experiment given");

    c.seed = detail::unsigned_integer(root, "config", "seed", c.seed);
    const std::uint64_t threads = detail::unsigned_integer(root, "config", "threads", c.threads);
    if (threads > 1024)
        throw ConfigError("threads must be at most 1024");
    c.threads = static_cast<unsigned>(threads);

    const Json& o = detail::section(root, "optics");
    detail::check_keys(o, "optics", {"lambda", "w_p", "omega_c", "z_sM", "delta_z"});
    c.optics.lambda = detail::number(o, "optics", "lambda", c.optics.lambda);
    c.optics.w_p = detail::number(o, "optics", "w_p", c.optics.w_p);
    c.optics.omega_c = detail::number(o, "optics", "omega_c", c.optics.omega_c);
    c.optics.z_sM = detail::number(o, "optics", "z_sM", c.optics.z_sM);
    c.optics.delta_z = detail::number(o, "optics", "delta_z", c.optics.delta_z);
    try
    {
        c.optics.validate();
    }
    catch (const Error& e)
    {
        throw ConfigError(e.what());
    }
    const double s = c.optics.tilt_width();

    const Json& n = detail::section(root, "counting");
    detail::check_keys(n, "counting", {"pair_rate", "single_rate", "bin_seconds", "efficiency_eta", "calibration_bins"});
    c.counting.pair_rate = detail::number(n, "counting", "pair_rate", c.counting.pair_rate);
    c.counting.single_rate = detail::number(n, "counting", "single_rate", c.counting.single_rate);
    c.counting.bin_seconds = detail::number(n, "counting", "bin_seconds", c.counting.bin_seconds);
    c.counting.efficiency_eta = detail::number(n, "counting", "efficiency_eta", c.counting.efficiency_eta);
    c.calibration_bins = detail::unsigned_integer(n, "counting", "calibration_bins", c.calibration_bins);

    if (root.contains("noise"))
        c.noise = detail::parse_noise(root.at("noise"));

    const Json& d = detail::section(root, "hom_dip");
    detail::check_keys(d, "hom_dip",
                       {"delta_min", "delta_max", "steps", "seconds_per_point", "visibility", "coherence_length", "bandwidth",
                        "proportionality", "noise_free"});
    c.hom_dip.delta = detail::range(d, "hom_dip", "delta_min", "delta_max", c.hom_dip.delta);
    c.hom_dip.seconds_per_point = detail::number(d, "hom_dip", "seconds_per_point", c.hom_dip.seconds_per_point);
    c.hom_dip.visibility = detail::number(d, "hom_dip", "visibility", c.hom_dip.visibility);
    c.hom_dip.proportionality = detail::number(d, "hom_dip", "proportionality", c.hom_dip.proportionality);
    c.hom_dip.noise_free = detail::boolean(d, "hom_dip", "noise_free", c.hom_dip.noise_free);
    if (d.contains("bandwidth"))
    {
        if (d.contains("coherence_length"))
            throw ConfigError("hom_dip: give either coherence_length or bandwidth, not both");
        c.hom_dip.bandwidth = detail::number(d, "hom_dip", "bandwidth", 0.0);
        try
        {
            c.hom_dip.coherence_length = hom::coherence_length(c.optics.lambda, *c.hom_dip.bandwidth, c.hom_dip.proportionality);
        }
        catch (const Error& e)
        {
            throw ConfigError(e.what());
        }
    }
    else
        c.hom_dip.coherence_length = detail::number(d, "hom_dip", "coherence_length", 130.0 * c.optics.lambda);

    const Json& t = detail::section(root, "tilt_scan");
    detail::check_keys(t, "tilt_scan", {"theta_min", "theta_max", "steps", "seconds_per_point", "replicates", "noise_free"});
    c.tilt_scan.theta = detail::range(t, "tilt_scan", "theta_min", "theta_max", Range{-4.0 * s, 4.0 * s, 41});
    c.tilt_scan.seconds_per_point = detail::number(t, "tilt_scan", "seconds_per_point", c.tilt_scan.seconds_per_point);
    c.tilt_scan.replicates = detail::unsigned_integer(t, "tilt_scan", "replicates", c.tilt_scan.replicates);
    c.tilt_scan.noise_free = detail::boolean(t, "tilt_scan", "noise_free", c.tilt_scan.noise_free);

    const Json& st = detail::section(root, "stability");
    detail::check_keys(st, "stability", {"theta_0", "duration", "filter_window", "sagnac_visibility"});
    c.stability.theta_0 = detail::number(st, "stability", "theta_0", s);
    c.stability.duration = detail::number(st, "stability", "duration", c.stability.duration);
    c.stability.filter_window = detail::number(st, "stability", "filter_window", c.stability.filter_window);
    c.stability.sagnac_visibility = detail::number(st, "stability", "sagnac_visibility", c.stability.sagnac_visibility);

    const Json& r = detail::section(root, "crlb");
    detail::check_keys(r, "crlb", {"nu", "replicates", "theta_0", "photons_per_trial", "delta_z_jitter"});
    if (r.contains("nu"))
    {
        if (!r.at("nu").is_array())
            throw ConfigError("crlb.nu must be an array of numbers");
        c.crlb.nu.clear();
        for (const Json& v : r.at("nu"))
        {
            if (!v.is_number())
                throw ConfigError("crlb.nu must be an array of numbers");
            c.crlb.nu.push_back(v.get<double>());
        }
    }
    c.crlb.replicates = detail::unsigned_integer(r, "crlb", "replicates", c.crlb.replicates);
    c.crlb.theta_0 = detail::number(r, "crlb", "theta_0", s);
    c.crlb.photons_per_trial = detail::number(r, "crlb", "photons_per_trial", c.crlb.photons_per_trial);
    c.crlb.delta_z_jitter = detail::number(r, "crlb", "delta_z_jitter", c.crlb.delta_z_jitter);

    const Json& w = detail::section(root, "wva");
    detail::check_keys(w, "wva", {"phi_min", "phi_max", "steps", "theta_ps"});
    c.wva.phi = detail::range(w, "wva", "phi_min", "phi_max", c.wva.phi);
    c.wva.theta_ps = detail::number(w, "wva", "theta_ps", c.wva.theta_ps);

    const Json& out = detail::section(root, "output");
    detail::check_keys(out, "output", {"path", "format"});
    c.output_path = detail::text(out, "output", "path", "");
    c.format = format_from(detail::text(out, "output", "format", "csv"));

    validate(c);
    return c;
}

inline ScenarioConfig parse_config_text(std::string_view text, std::optional<Experiment> experiment = std::nullopt)
{
    Json root;
    try
    {
        root = Json::parse(text.begin(), text.end());
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    return parse_config(root, experiment);
}

inline ScenarioConfig load_config(const std::string& path, std::optional<Experiment> experiment = std::nullopt)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read config file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), experiment);
}

// The fully resolved configuration, as embedded in every output. Thread count
// and output path are left out: they never change the results.
inline Json to_json(const ScenarioConfig& c)
{
    Json j;
    j["experiment"] = to_string(c.experiment);
    j["seed"] = c.seed;
    j["optics"] = Json{{"lambda", c.optics.lambda},
                       {"w_p", c.optics.w_p},
                       {"omega_c", c.optics.omega_c},
                       {"z_sM", c.optics.z_sM},
                       {"delta_z", c.optics.delta_z}};
    j["counting"] = Json{{"pair_rate", c.counting.pair_rate},
                         {"single_rate", c.counting.single_rate},
                         {"bin_seconds", c.counting.bin_seconds},
                         {"efficiency_eta", c.counting.efficiency_eta},
                         {"calibration_bins", c.calibration_bins}};
    j["noise"] = detail::noise_to_json(c.noise);
    switch (c.experiment)
    {
    case Experiment::HomDip:
    {
        Json d{{"delta_min", c.hom_dip.delta.min},
               {"delta_max", c.hom_dip.delta.max},
               {"steps", c.hom_dip.delta.steps},
               {"seconds_per_point", c.hom_dip.seconds_per_point},
               {"visibility", c.hom_dip.visibility},
               {"coherence_length", c.hom_dip.coherence_length}};
        if (c.hom_dip.bandwidth)
        {
            d["bandwidth"] = *c.hom_dip.bandwidth;
            d["proportionality"] = c.hom_dip.proportionality;
        }
        d["noise_free"] = c.hom_dip.noise_free;
        j["hom_dip"] = d;
        break;
    }
    case Experiment::TiltScan:
        j["tilt_scan"] = Json{{"theta_min", c.tilt_scan.theta.min},
                              {"theta_max", c.tilt_scan.theta.max},
                              {"steps", c.tilt_scan.theta.steps},
                              {"seconds_per_point", c.tilt_scan.seconds_per_point},
                              {"replicates", c.tilt_scan.replicates},
                              {"noise_free", c.tilt_scan.noise_free}};
        break;
    case Experiment::Stability:
        j["stability"] = Json{{"theta_0", c.stability.theta_0},
                              {"duration", c.stability.duration},
                              {"filter_window", c.stability.filter_window},
                              {"sagnac_visibility", c.stability.sagnac_visibility}};
        break;
    case Experiment::CrlbStudy:
        j["crlb"] = Json{{"nu", c.crlb.nu},
                         {"replicates", c.crlb.replicates},
                         {"theta_0", c.crlb.theta_0},
                         {"photons_per_trial", c.crlb.photons_per_trial},
                         {"delta_z_jitter", c.crlb.delta_z_jitter}};
        break;
    case Experiment::WvaScan:
        j["wva"] = Json{{"phi_min", c.wva.phi.min}, {"phi_max", c.wva.phi.max}, {"steps", c.wva.phi.steps}, {"theta_ps", c.wva.theta_ps}};
        break;
    }
    j["output"] = Json{{"format", c.format == OutputFormat::Csv ? "csv" : "json"}};
    return j;
}

} // namespace homtilt::harness

#endif
