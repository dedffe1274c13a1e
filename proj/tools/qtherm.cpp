// qtherm command-line driver: run / verify / presets.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <qtherm/qtherm.hpp>

namespace fs = std::filesystem;
using namespace qtherm;

namespace {

enum Exit { Ok = 0, GateFailure = 2, ConfigFailure = 3, NumericFailure = 4 };

int exit_code_for(ErrorCode c) {
    switch (c) {
        case ErrorCode::ConfigError:
        case ErrorCode::ParseError:
        case ErrorCode::UnknownPreset:
        case ErrorCode::InvalidParam:
        case ErrorCode::GridMismatch:
        case ErrorCode::UnsupportedChannelSet:
        case ErrorCode::TooLarge:
            return ConfigFailure;
        default:
            return NumericFailure;
    }
}

struct Gate {
    std::string name;
    bool pass;
    std::string detail;
};

int report(const std::vector<Gate>& gates) {
    bool ok = true;
    for (const auto& g : gates) {
        std::cout << (g.pass ? "[ok]   " : "[FAIL] ") << g.name << "  " << g.detail << '\n';
        ok = ok && g.pass;
    }
    return ok ? Ok : GateFailure;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    std::ofstream o(dir / name);
    if (!o) throw Error(ErrorCode::ConfigError, "cannot write " + (dir / name).string());
    return o;
}

std::string default_out_dir() {
    const char* env = std::getenv("QTHERM_OUT");
    return env && *env ? env : "qtherm_out";
}

int execute(RunConfig cfg) {
    if (!cfg.seed) throw Error(ErrorCode::ConfigError, "seed is mandatory (--seed or \"seed\" in the config)");
    if (cfg.out.empty()) cfg.out = default_out_dir();
    const std::string hash = config_hash(cfg);
    SystemModel m = build_model(cfg);
    const Scheme scheme = cfg.scheme.value_or(default_scheme(cfg.preset));
    std::vector<Gate> gates;

    auto val = validate_channel_set(m);
    gates.push_back({"channel set", val.ok(), "pairing residual " + format_double(val.max_pairing_residual)});
    if (!val.ok()) return report(gates);

    const int steps = step_count(m.protocol.tau, cfg.dt);
    auto instants = checkpoint_instants(steps, cfg.stride);
    Propagation oracle = lindblad_propagate(m, m.initial_state, cfg.dt, instants);
    gates.push_back({"oracle trace drift", oracle.max_trace_drift <= Tolerances::rk4_trace_drift * std::max(1.0, m.protocol.tau),
                     format_double(oracle.max_trace_drift)});

    TPMConfig tpm = make_tpm_config(m.initial_state, cfg.final_basis);
    Simulation sim = make_simulation(m, scheme, cfg.dt, tpm, oracle.states.back(), cfg.stride);
    SplitModel split;
    if (cfg.splits) split = analyze_split(m);

    EnsembleOptions eo;
    eo.trajectories = cfg.trajectories;
    eo.seed = *cfg.seed;
    eo.threads = cfg.threads;
    eo.snapshot_trajectory = 0;
    EnsembleResult res = run_ensemble(sim, cfg.splits ? &split : nullptr, eo);
    for (const auto& f : res.failure_messages) std::cerr << f << '\n';

    fs::path dir(cfg.out);
    fs::create_directories(dir);
    {
        auto o = open_out(dir, "config.json");
        o << canonical_json(cfg).dump(2) << '\n';
    }
    {
        auto o = open_out(dir, "records.csv");
        write_records(o, hash, res.rows);
    }
    {
        auto o = open_out(dir, "summary.csv");
        write_summary(o, hash, res.stats);
    }
    {
        auto o = open_out(dir, "consistency.csv");
        write_consistency(o, hash, res.checkpoint_instants, cfg.dt, res.mean_states, oracle.states);
    }
    std::vector<std::string> ep_quantities{"S_tot", "S_unc", "S_mar"};
    if (cfg.splits && split.applicable) {
        ep_quantities.push_back("S_ad");
        ep_quantities.push_back("S_na");
    }
    if (cfg.ft) {
        for (const auto& q : ep_quantities) {
            auto o = open_out(dir, "convergence_" + q + ".csv");
            write_convergence(o, hash, convergence_series(res.samples[q]));
        }
    }
    if (cfg.histograms) {
        for (const char* q : {"S_tot", "S_mar"}) {
            if (res.samples[q].empty()) continue;
            auto o = open_out(dir, std::string("histogram_") + q + ".csv");
            write_histogram(o, hash, histogram(res.samples[q]));
        }
    }
    if (res.sample_record) {
        Rng virtual_rng(*cfg.seed, ~std::uint64_t{0});
        auto o = open_out(dir, "timeseries.csv");
        write_timeseries(o, hash, partial_timeseries(*res.sample_record, oracle.states, instants, virtual_rng));
        auto s = open_out(dir, "snapshots.csv");
        write_snapshots(s, hash, *res.sample_record, oracle.states);
    }

    gates.push_back({"failed trajectories", res.failures == 0, std::to_string(res.failures)});
    gates.push_back({"S_unc bounds", res.unc_bound_violations == 0,
                     std::to_string(res.unc_bound_violations) + " violations"});
    double max_id = 0.0;
    for (const auto& r : res.rows)
        if (std::isfinite(r.S_tot)) max_id = std::max(max_id, std::abs(r.S_tot - r.S_unc - r.S_mar));
    gates.push_back({"S_tot = S_unc + S_mar", max_id <= Tolerances::identity, format_double(max_id)});
    if (scheme == Scheme::Diffusive) {
        bool zero = true;
        for (const auto& r : res.rows)
            for (double q : r.Q) zero = zero && q == 0.0;
        gates.push_back({"diffusive heat is zero", zero, ""});
    }
    if (cfg.ft) {
        for (const auto& q : ep_quantities) {
            auto it = res.stats.ft.find(q);
            if (it == res.stats.ft.end()) continue;
            std::cout << "  <exp(-" << q << ")> = " << format_double(it->second.mean()) << " +- "
                      << format_double(it->second.sem()) << '\n';
        }
    }
    std::cout << "  max trace distance to oracle: "
              << format_double(unconditional_consistency(res.mean_states, oracle.states)) << '\n';
    if (cfg.splits) std::cout << "  ad/na split: " << (split.applicable ? "applicable" : "not applicable (" + split.reason + ")") << '\n';
    std::cout << "  outputs in " << dir.string() << " (config_hash=" << hash << ")\n";
    if (res.failures > 0) {
        report(gates);
        return NumericFailure;
    }
    return report(gates);
}

int verify_enumeration(const RunConfig& base, int steps) {
    std::vector<Gate> gates;
    std::string out = base.out.empty() ? default_out_dir() : base.out;
    fs::create_directories(out);
    for (int level = 0; level < 3; ++level) {
        RunConfig cfg = base;
        cfg.dt = base.dt / (1 << level);
        cfg.tau = steps * cfg.dt;
        SystemModel m = build_model(cfg);
        TPMConfig tpm = make_tpm_config(m.initial_state, cfg.final_basis);
        Matrix rho_tau = lindblad_state_at_end(m, m.initial_state, cfg.dt);
        FinalSetup fsu = make_final_setup(tpm, rho_tau, hamiltonian_at(m, m.protocol.tau));
        Enumeration e = enumerate_jump_records(m, cfg.dt, tpm, fsu);
        const std::string hash = config_hash(cfg);
        auto o = open_out(out, "enumeration_dt" + std::to_string(level) + ".csv");
        write_enumeration(o, hash, e);
        const double c = e.max_residual / cfg.dt;
        std::cout << "dt = " << format_double(cfg.dt) << "  records = " << e.records.size()
                  << "  sum P_fwd = " << format_double(e.total_forward)
                  << "  max |log(Pf/Pb) - S_tot| = " << format_double(e.max_residual)
                  << "  C = " << format_double(c) << '\n';
        gates.push_back({"detailed FT residual <= dt at dt=" + format_double(cfg.dt), e.max_residual <= cfg.dt,
                         format_double(e.max_residual)});
        gates.push_back({"completeness deficit <= dt at dt=" + format_double(cfg.dt),
                         std::abs(1.0 - e.total_forward) <= cfg.dt, format_double(1.0 - e.total_forward)});
    }
    return report(gates);
}

int verify_model(const RunConfig& cfg) {
    SystemModel m = build_model(cfg);
    std::vector<Gate> gates;
    auto val = validate_channel_set(m);
    gates.push_back({"channel set", val.ok(), "max pairing residual " + format_double(val.max_pairing_residual)});
    if (val.energy_jump_relation)
        for (std::size_t k = 0; k < m.channels.size(); ++k)
            std::cout << "  dE[" << m.channels[k].name << "] = " << format_double(val.energy_jumps[k]) << '\n';
    SteadyState ss = steady_state(m, lambda_at(m, 0.0));
    gates.push_back({"steady state residual", ss.residual < Tolerances::steady_state_residual,
                     format_double(ss.residual) + " degeneracy " + std::to_string(ss.degeneracy) + " gap " +
                         format_double(ss.gap)});
    SplitModel split = analyze_split(m);
    std::cout << "  ad/na split: " << (split.applicable ? "applicable" : "not applicable (" + split.reason + ")")
              << '\n';
    return report(gates);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic thermodynamics of continuously monitored open quantum systems"};
    app.require_subcommand(1);

    std::string config_path, preset, model, scheme, final_basis, out;
    std::size_t n = 0;
    double dt = 0.0, tau = 0.0;
    std::uint64_t seed = 0;
    int threads = 0, stride = 0, steps = 3;
    bool enumerate = false;
    std::vector<std::string> params;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--preset", preset, "driven_qubit_thermal | dispersive_qubit");
        sub->add_option("--model", model, "explicit model file (JSON)");
        sub->add_option("--dt", dt, "time step (1/omega units)");
        sub->add_option("--tau", tau, "protocol duration");
        sub->add_option("--final-basis", final_basis, "rho_tau | energy");
        sub->add_option("--out", out, "output directory (default $QTHERM_OUT or ./qtherm_out)");
        sub->add_option("--param", params, "preset override key=value (repeatable)");
    };
    CLI::App* run = app.add_subcommand("run", "simulate an ensemble and write the CSV bundle");
    common(run);
    run->add_option("--scheme", scheme, "jump | diffusive");
    run->add_option("--n", n, "number of trajectories");
    run->add_option("--seed", seed, "base seed (mandatory)");
    run->add_option("--threads", threads, "worker threads");
    run->add_option("--stride", stride, "checkpoint stride in steps");
    CLI::App* verify = app.add_subcommand("verify", "oracle checks; --enumerate for the detailed FT table");
    common(verify);
    verify->add_flag("--enumerate", enumerate, "enumerate all jump records on a coarse grid");
    verify->add_option("--steps", steps, "grid steps for enumeration (<= 6)");
    CLI::App* presets = app.add_subcommand("presets", "list presets and their parameters");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? Ok : ConfigFailure;
    }

    try {
        if (presets->parsed()) {
            for (const auto& name : preset_names()) {
                SystemModel m = build_preset(name);
                std::cout << name << ": dim " << m.dim << ", channels";
                for (const auto& c : m.channels) std::cout << ' ' << c.name;
                std::cout << ", default scheme " << to_string(default_scheme(name)) << '\n';
            }
            std::cout << "override keys:";
            for (const auto& k : preset_keys()) std::cout << ' ' << k;
            std::cout << '\n';
            return Ok;
        }

        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (!preset.empty()) cfg.preset = preset;
        if (!model.empty()) cfg.model_file = model;
        for (const auto& kv : params) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "--param expects key=value, got " + kv);
            std::string key = kv.substr(0, eq);
            if (std::find(preset_keys().begin(), preset_keys().end(), key) == preset_keys().end())
                throw Error(ErrorCode::ConfigError, "unknown preset key '" + key + "'");
            try {
                cfg.params[key] = std::stod(kv.substr(eq + 1));
            } catch (const std::exception&) {
                throw Error(ErrorCode::ConfigError, "--param " + key + ": not a number");
            }
            if (key == "dt") cfg.dt = cfg.params[key];
        }
        if (dt > 0.0) cfg.dt = dt;
        if (tau > 0.0) cfg.tau = tau;
        if (!final_basis.empty()) cfg.final_basis = parse_final_basis(final_basis);
        if (!out.empty()) cfg.out = out;
        if (std::find(preset_names().begin(), preset_names().end(), cfg.preset) == preset_names().end() &&
            cfg.model_file.empty())
            throw Error(ErrorCode::ConfigError, "unknown preset '" + cfg.preset + "'");

        if (run->parsed()) {
            if (!scheme.empty()) cfg.scheme = parse_scheme(scheme);
            if (run->count("--n")) cfg.trajectories = n;
            if (run->count("--seed")) cfg.seed = seed;
            if (threads > 0) cfg.threads = threads;
            if (stride > 0) cfg.stride = stride;
            return execute(cfg);
        }
        if (enumerate) return verify_enumeration(cfg, steps);
        return verify_model(cfg);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return NumericFailure;
    }
}
