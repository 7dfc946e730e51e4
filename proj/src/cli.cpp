#include "coopdet/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coopdet/dynamics.hpp"
#include "coopdet/error.hpp"
#include "coopdet/format.hpp"
#include "coopdet/metrics.hpp"
#include "coopdet/model.hpp"
#include "coopdet/optimize.hpp"
#include "coopdet/parallel.hpp"
#include "coopdet/scenarios.hpp"
#include "coopdet/steady_state.hpp"

namespace coopdet {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// A JSON object whose keys are checked against an allowed set up front.
class Section {
public:
    Section(const json& obj, std::string path, std::initializer_list<const char*> allowed)
        : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw SpecError(path_.empty() ? "config" : path_, "expected a JSON object");
        const std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [key, _] : obj_.items())
            if (!ok.count(key)) throw SpecError(where(key), "unknown key");
    }

    bool has(const char* key) const { return obj_.contains(key); }
    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& raw(const char* key) const {
        if (!has(key)) throw SpecError(where(key), "missing required key");
        return obj_.at(key);
    }
    double number(const char* key) const {
        const json& v = raw(key);
        if (!v.is_number()) throw SpecError(where(key), "expected a number");
        return v.get<double>();
    }
    double number(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }
    int integer(const char* key, int fallback) const {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_number_integer()) throw SpecError(where(key), "expected an integer");
        return v.get<int>();
    }
    bool boolean(const char* key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_boolean()) throw SpecError(where(key), "expected true or false");
        return v.get<bool>();
    }
    std::string string(const char* key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_string()) throw SpecError(where(key), "expected a string");
        return v.get<std::string>();
    }
    std::vector<double> numbers(const char* key) const {
        const json& v = raw(key);
        if (!v.is_array() || v.empty()) throw SpecError(where(key), "expected a nonempty array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw SpecError(where(key), "expected a nonempty array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }
    Section child(const char* key, std::initializer_list<const char*> allowed) const {
        return Section(raw(key), where(key), allowed);
    }

private:
    const json& obj_;
    std::string path_;
};

fs::path resolve(const RunContext& ctx, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : ctx.config_dir / path;
}

DetectorSpec read_spec(const Section& cfg, const char* key, const RunContext& ctx) {
    const json& v = cfg.raw(key);
    if (v.is_object()) return spec_from_json(v);
    if (!v.is_string()) throw SpecError(cfg.where(key), "expected a path or an inline spec object");
    const fs::path path = resolve(ctx, v.get<std::string>());
    if (!fs::exists(path)) throw SpecError(cfg.where(key), "file not found: " + path.string());
    return load_spec(path.string());
}

// Either an array of energies or {"start", "stop", "points"}; "design" selects
// the optimizer's evaluation grid for `spec`.
std::vector<double> read_grid(const Section& cfg, const char* key, const DetectorSpec& spec) {
    const json& v = cfg.raw(key);
    if (v.is_string()) {
        if (v.get<std::string>() != "design") throw SpecError(cfg.where(key), "unknown grid name");
        return evaluation_grid(spec);
    }
    if (v.is_array()) return cfg.numbers(key);
    const Section g = cfg.child(key, {"start", "stop", "points"});
    const double start = g.number("start"), stop = g.number("stop");
    const int points = g.integer("points", 0);
    if (points < 1) throw SpecError(g.where("points"), "must be at least 1");
    if (!(stop >= start)) throw SpecError(g.where("stop"), "must not be below start");
    std::vector<double> out;
    for (int k = 0; k < points; ++k)
        out.push_back(points == 1 ? start : start + (stop - start) * k / (points - 1));
    return out;
}

Section optimize_section(const Section& cfg) {
    return cfg.child("optimize", {"points_per_spacing", "temperatures", "upper_bound", "optimize_endcaps",
                                  "restarts", "max_iterations", "calibrate"});
}

OptimizeOptions read_optimize(const Section& cfg, const RunContext& ctx) {
    OptimizeOptions o;
    o.seed = ctx.seed;
    if (!cfg.has("optimize")) return o;
    const Section s = optimize_section(cfg);
    o.points_per_spacing = s.integer("points_per_spacing", o.points_per_spacing);
    if (s.has("temperatures")) o.temperatures = s.numbers("temperatures");
    o.upper_bound = s.number("upper_bound", o.upper_bound);
    o.optimize_endcaps = s.boolean("optimize_endcaps", o.optimize_endcaps);
    o.restarts = s.integer("restarts", o.restarts);
    o.lbfgsb.max_iterations = s.integer("max_iterations", o.lbfgsb.max_iterations);
    if (o.points_per_spacing < 1) throw SpecError(s.where("points_per_spacing"), "must be at least 1");
    if (o.restarts < 0) throw SpecError(s.where("restarts"), "must be non-negative");
    for (double t : o.temperatures)
        if (!(t > 0.0)) throw SpecError(s.where("temperatures"), "must be positive");
    return o;
}

struct CalibrateConfig {
    bool present = false;  // an optimize.calibrate section was given
    double delta_omega = 0.0;
    double floor = 0.99;
    CalibrateOptions options;
};

CalibrateConfig read_calibrate(const Section& cfg, const RunContext& ctx) {
    CalibrateConfig c;
    c.options.optimize = read_optimize(cfg, ctx);
    if (!cfg.has("optimize")) return c;
    const Section opt = optimize_section(cfg);
    if (!opt.has("calibrate")) return c;
    const Section s = opt.child("calibrate", {"delta_omega", "efficiency_floor", "bracket", "rel_width"});
    c.present = true;
    c.delta_omega = s.number("delta_omega", 0.0);
    c.floor = s.number("efficiency_floor", c.floor);
    if (s.has("bracket")) {
        const auto b = s.numbers("bracket");
        if (b.size() != 2) throw SpecError(s.where("bracket"), "expected [lo, hi]");
        c.options.bracket_lo = b[0];
        c.options.bracket_hi = b[1];
    }
    c.options.rel_width = s.number("rel_width", c.options.rel_width);
    return c;
}

JitterOptions read_jitter(const Section& cfg) {
    JitterOptions o;
    if (!cfg.has("jitter")) return o;
    const Section s = cfg.child("jitter", {"sigma0_schedule", "tolerance", "per_channel"});
    if (s.has("sigma0_schedule")) o.sigma0_schedule = s.numbers("sigma0_schedule");
    o.tolerance = s.number("tolerance", o.tolerance);
    o.per_channel = s.boolean("per_channel", o.per_channel);
    return o;
}

std::ofstream open_output(const RunContext& ctx, const char* name) {
    fs::create_directories(ctx.out_dir);
    std::ofstream os(ctx.out_dir / name);
    if (!os) throw std::runtime_error(std::string("cannot write ") + (ctx.out_dir / name).string());
    return os;
}

void write_json(const RunContext& ctx, const char* name, const json& doc) {
    open_output(ctx, name) << doc.dump(2) << '\n';
}

json response_json(const ChannelResponse& r, const CompiledModel& model) {
    json out = {{"omega0_eV", r.omega0}, {"P", r.total}, {"pi", r.pi},
                {"dominant_channel", r.dominant_channel()},
                {"dominant_probability", r.dominant_probability()}};
    if (r.total > 0.0) {
        const auto m = frequency_moments(r, model.channel_centers);
        out["omega_mu_eV"] = m.omega_mu;
        out["omega_sigma_eV"] = m.omega_sigma;
    } else {
        out["omega_mu_eV"] = nullptr;
        out["omega_sigma_eV"] = nullptr;
    }
    return out;
}

std::string csv_bool(bool b) { return b ? "1" : "0"; }

}  // namespace

void cmd_evaluate(const json& config, const RunContext& ctx) {
    const Section cfg(config, "", {"spec", "grid", "probes"});
    const DetectorSpec spec = read_spec(cfg, "spec", ctx);
    const CompiledModel model = compile_detector(spec);
    const auto grid = read_grid(cfg, "grid", spec);
    const std::vector<double> probes = cfg.has("probes") ? cfg.numbers("probes") : std::vector<double>{};

    const MetricsReport report = efficiency_curve(model, grid);
    {
        auto os = open_output(ctx, "efficiency.csv");
        write_csv(report, os);
    }
    json probe_rows = json::array();
    for (const auto& r : channel_probabilities(model, probes)) probe_rows.push_back(response_json(r, model));
    write_json(ctx, "probes.json",
               {{"grid_points", grid.size()},
                {"min_efficiency", report.min_efficiency()},
                {"worst_inefficiency", worst_case_inefficiency(model, grid)},
                {"probes", probe_rows}});
}

void cmd_optimize(const json& config, const RunContext& ctx) {
    const Section cfg(config, "", {"spec", "grid", "optimize"});
    const DetectorSpec spec = read_spec(cfg, "spec", ctx);
    const OptimizeOptions opts = read_optimize(cfg, ctx);
    const std::vector<double> grid =
        cfg.has("grid") ? read_grid(cfg, "grid", spec) : std::vector<double>{};

    OptimizationResult result;
    json calibration = nullptr;
    if (const auto cal = read_calibrate(cfg, ctx); cal.present) {
        CalibrateOptions copts = cal.options;
        copts.omega_grid = grid;
        const auto c = calibrate_gamma(spec, cal.delta_omega, cal.floor, copts);
        result = c.design;
        calibration = {{"gamma_cap_sq", c.gamma_cap_sq},
                       {"delta_omega", cal.delta_omega},
                       {"efficiency_floor", cal.floor},
                       {"probes", c.probes}};
    } else {
        result = grid.empty() ? optimize_weights(spec, opts) : optimize_weights(spec, grid, opts);
    }

    json doc = to_json(result);
    doc["calibration"] = calibration;
    doc["seed"] = ctx.seed;
    write_json(ctx, "optimization.json", doc);
    write_json(ctx, "optimized_spec.json", spec_to_json(result.spec));
    auto os = open_output(ctx, "objective_history.csv");
    os << "step,objective\n";
    for (std::size_t k = 0; k < result.objective_history.size(); ++k)
        os << k << ',' << format_number(result.objective_history[k]) << '\n';
}

void cmd_jitter(const json& config, const RunContext& ctx) {
    const Section cfg(config, "", {"spec", "omegas", "jitter", "trace"});
    const DetectorSpec spec = read_spec(cfg, "spec", ctx);
    const CompiledModel model = compile_detector(spec);
    const auto omegas = read_grid(cfg, "omegas", spec);
    const JitterOptions jopts = read_jitter(cfg);

    MetricsReport report = efficiency_curve(model, omegas);
    json rows = json::array();
    for (std::size_t k = 0; k < omegas.size(); ++k) {
        const JitterResult j = system_jitter(model, omegas[k], jopts);
        report.jitter_fs[k] = j.jitter_fs;
        json row = {{"omega0_eV", omegas[k]},
                    {"jitter_fs", j.jitter_fs},
                    {"convergence", j.convergence},
                    {"probability", j.probability},
                    {"sigma0", j.sigma0},
                    {"excess_variance", j.excess_variance}};
        if (jopts.per_channel) {
            json ch = json::array();
            for (double v : j.channel_jitter_fs) ch.push_back(std::isfinite(v) ? json(v) : json(nullptr));
            row["channel_jitter_fs"] = ch;
        }
        rows.push_back(std::move(row));
    }
    {
        auto os = open_output(ctx, "jitter.csv");
        write_csv(report, os);
    }
    write_json(ctx, "jitter.json", {{"points", rows}});

    if (cfg.has("trace")) {
        const Section t = cfg.child("trace", {"omega0", "sigma0", "points", "path"});
        const auto pulse = PulseSpec::gaussian(t.number("omega0"), t.number("sigma0"));
        const int points = t.integer("points", 400);
        if (points < 2) throw SpecError(t.where("points"), "must be at least 2");
        const auto grid = default_time_grid(model, pulse, static_cast<std::size_t>(points));
        const std::string path = t.string("path", "amplitude");
        TimeTrace trace;
        if (path == "amplitude")
            trace = evolve_single_excitation(model, pulse, grid);
        else if (path == "hierarchy")
            trace = evolve_fock_hierarchy(model, pulse, grid);
        else
            throw SpecError(t.where("path"), "expected \"amplitude\" or \"hierarchy\"");
        auto os = open_output(ctx, "trace.csv");
        write_csv(trace, os);
    }
}

void cmd_sweep(const json& config, const RunContext& ctx) {
    const Section cfg(config, "", {"spec", "delta_omegas", "optimize", "jitter"});
    const DetectorSpec spec = read_spec(cfg, "spec", ctx);
    const auto dws = cfg.numbers("delta_omegas");
    for (double dw : dws)
        if (!(dw >= 0.0)) throw SpecError("delta_omegas", "must be non-negative");

    TradeoffOptions opts;
    const auto cal = read_calibrate(cfg, ctx);
    opts.calibrate = cal.options;
    opts.efficiency_floor = cal.floor;
    opts.jitter = read_jitter(cfg);

    const auto points = resolution_jitter_tradeoff(spec, dws, opts);
    auto os = open_output(ctx, "tradeoff.csv");
    os << "delta_omega_eV,gamma_cap_sq_eV,min_efficiency,omega_sigma_eV,jitter_fs,error\n";
    for (const auto& p : points) {
        os << format_number(p.delta_omega) << ',';
        if (p.error) {
            std::string msg = *p.error;
            for (char& c : msg)
                if (c == ',' || c == '\n' || c == '"') c = ' ';
            os << ",,,," << msg << '\n';
        } else {
            os << format_number(p.gamma_cap_sq) << ',' << format_number(p.min_efficiency) << ','
               << format_number(p.omega_sigma) << ',' << format_number(p.jitter_fs) << ",\n";
        }
    }
}

void cmd_compare(const json& config, const RunContext& ctx) {
    const Section cfg(config, "", {"spec", "capped_spec", "probes", "grid"});
    const DetectorSpec spec = read_spec(cfg, "spec", ctx);
    const CompiledModel model = compile_detector(spec);
    const SequentialStack stack = split_into_stages(spec);
    const auto grid = read_grid(cfg, "grid", spec);

    {
        auto os = open_output(ctx, "sequential.csv");
        os << "omega0_eV,P_cooperative,P_sequential,omega_sigma_cooperative_eV,omega_sigma_sequential_eV\n";
        const auto coop = channel_probabilities(model, grid);
        const auto seq = parallel_map(grid.size(), [&](std::size_t k) { return sequential_chain(stack, grid[k]); });
        const auto centers = spec.bin_centers();
        auto sigma = [&](const ChannelResponse& r) {
            return r.total > 0.0 ? format_number(frequency_moments(r, centers).omega_sigma) : std::string();
        };
        for (std::size_t k = 0; k < grid.size(); ++k)
            os << format_number(grid[k]) << ',' << format_number(coop[k].total) << ','
               << format_number(seq[k].total) << ',' << sigma(coop[k]) << ',' << sigma(seq[k]) << '\n';
    }

    if (cfg.has("capped_spec")) {
        const DetectorSpec capped = read_spec(cfg, "capped_spec", ctx);
        const auto probes = cfg.numbers("probes");
        auto os = open_output(ctx, "endcaps.csv");
        os << "omega0_eV,out_of_band,P_base,P_capped,dominant_base,dominant_capped,capping_reduced\n";
        for (const auto& c : compare_endcaps(spec, capped, probes))
            os << format_number(c.omega0) << ',' << csv_bool(c.out_of_band) << ',' << format_number(c.p_base)
               << ',' << format_number(c.p_capped) << ',' << format_number(c.dominant_base) << ','
               << format_number(c.dominant_capped) << ',' << csv_bool(c.capping_reduced) << '\n';
    }
}

namespace {

json error_json(const std::exception& e) {
    json out = {{"status", "error"}, {"message", e.what()}};
    if (const auto* ce = dynamic_cast<const Error*>(&e)) {
        out["kind"] = ce->kind();
        if (const auto* se = dynamic_cast<const SpecError*>(&e)) {
            if (!se->key().empty()) out["key"] = se->key();
            out["violations"] = se->violations();
        } else if (const auto* ie = dynamic_cast<const InfeasibleError*>(&e)) {
            out["best_efficiency"] = ie->best_efficiency();
        } else if (const auto* ne = dynamic_cast<const NumericalError*>(&e)) {
            out["omega0_eV"] = ne->omega0();
        } else if (const auto* cv = dynamic_cast<const ConvergenceError*>(&e)) {
            out["partial"] = cv->partial();
        }
    } else if (dynamic_cast<const std::invalid_argument*>(&e)) {
        out["kind"] = "invalid_argument";
    } else {
        out["kind"] = "error";
    }
    return out;
}

json read_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("config", "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SpecError("config", std::string("malformed JSON: ") + e.what());
    }
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cooperative frequency-resolving single-photon detector toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    unsigned threads = 1;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file")->required();
        cmd->add_option("--out", out_dir, "Output directory");
        cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", seed, "Seed for randomized restarts");
    };
    using Handler = void (*)(const json&, const RunContext&);
    const std::vector<std::tuple<const char*, const char*, Handler>> commands = {
        {"evaluate", "Efficiency and frequency moments over a grid", cmd_evaluate},
        {"optimize", "Optimize bin weights (optionally calibrating the decay rate)", cmd_optimize},
        {"jitter", "System jitter at selected frequencies", cmd_jitter},
        {"sweep", "Resolution/jitter trade-off over dispersion widths", cmd_sweep},
        {"compare", "Cooperative vs sequential and capped vs uncapped tables", cmd_compare},
    };
    std::vector<std::pair<CLI::App*, Handler>> subs;
    for (const auto& [name, help, fn] : commands) {
        CLI::App* cmd = app.add_subcommand(name, help);
        add_common(cmd);
        subs.emplace_back(cmd, fn);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << json{{"status", "error"}, {"kind", "usage"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }

    try {
        set_thread_count(threads);
        const fs::path cfg_path = fs::absolute(config_path);
        RunContext ctx{cfg_path.parent_path(), fs::path(out_dir), seed};
        const json config = read_config(cfg_path);
        for (const auto& [cmd, fn] : subs)
            if (cmd->parsed()) fn(config, ctx);
        out << json{{"status", "ok"}, {"out", ctx.out_dir.string()}}.dump() << '\n';
        return 0;
    } catch (const std::exception& e) {
        err << error_json(e).dump() << '\n';
        return 1;
    }
}

}  // namespace coopdet
