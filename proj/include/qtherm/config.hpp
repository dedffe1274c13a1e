#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tpm.hpp"

namespace qtherm {

using json = nlohmann::json;

struct RunConfig {
    std::string preset = "driven_qubit_thermal";
    std::string model_file;  // explicit model, overrides preset when set
    std::map<std::string, double> params;
    std::optional<Scheme> scheme;  // default: jump for thermal, diffusive for dispersive
    std::size_t trajectories = 1000;
    double dt = 0.01;
    std::optional<double> tau;
    std::optional<std::uint64_t> seed;
    FinalBasis final_basis = FinalBasis::RhoTau;
    std::string out;
    int stride = 100;
    int threads = 1;
    bool ft = true;
    bool splits = true;
    bool histograms = true;
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, where + ": expected an object");
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (!allowed.count(k)) throw Error(ErrorCode::ConfigError, where + ": unknown key '" + k + "'");
    }
}

template <class T>
T get_field(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, where + "." + key + ": " + e.what());
    }
}

}  // namespace detail

inline Scheme parse_scheme(const std::string& s) {
    if (s == "jump") return Scheme::Jump;
    if (s == "diffusive") return Scheme::Diffusive;
    throw Error(ErrorCode::ConfigError, "scheme must be jump or diffusive, got '" + s + "'");
}

inline FinalBasis parse_final_basis(const std::string& s) {
    if (s == "rho_tau") return FinalBasis::RhoTau;
    if (s == "energy") return FinalBasis::Energy;
    throw Error(ErrorCode::ConfigError, "final basis must be rho_tau or energy, got '" + s + "'");
}

inline Scheme default_scheme(const std::string& preset) {
    return preset == "dispersive_qubit" ? Scheme::Diffusive : Scheme::Jump;
}

inline RunConfig config_from_json(const json& j) {
    using detail::get_field;
    detail::reject_unknown(j,
                           {"preset", "model", "params", "scheme", "n", "dt", "tau", "seed", "final_basis", "out",
                            "stride", "threads", "analyses"},
                           "config");
    RunConfig c;
    if (j.contains("preset")) c.preset = get_field<std::string>(j, "preset", "config");
    if (j.contains("model")) c.model_file = get_field<std::string>(j, "model", "config");
    if (j.contains("params")) {
        const auto& p = j.at("params");
        if (!p.is_object()) throw Error(ErrorCode::ConfigError, "config.params: expected an object");
        for (const auto& [k, v] : p.items()) {
            if (std::find(preset_keys().begin(), preset_keys().end(), k) == preset_keys().end())
                throw Error(ErrorCode::ConfigError, "config.params: unknown key '" + k + "'");
            if (!v.is_number()) throw Error(ErrorCode::ConfigError, "config.params." + k + ": expected a number");
            c.params[k] = v.get<double>();
        }
        if (c.params.count("dt")) c.dt = c.params.at("dt");
    }
    if (j.contains("scheme")) c.scheme = parse_scheme(get_field<std::string>(j, "scheme", "config"));
    if (j.contains("n")) c.trajectories = get_field<std::size_t>(j, "n", "config");
    if (j.contains("dt")) c.dt = get_field<double>(j, "dt", "config");
    if (j.contains("tau")) c.tau = get_field<double>(j, "tau", "config");
    if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed", "config");
    if (j.contains("final_basis")) c.final_basis = parse_final_basis(get_field<std::string>(j, "final_basis", "config"));
    if (j.contains("out")) c.out = get_field<std::string>(j, "out", "config");
    if (j.contains("stride")) c.stride = get_field<int>(j, "stride", "config");
    if (j.contains("threads")) c.threads = get_field<int>(j, "threads", "config");
    if (j.contains("analyses")) {
        const auto& a = j.at("analyses");
        detail::reject_unknown(a, {"ft", "splits", "histograms"}, "config.analyses");
        if (a.contains("ft")) c.ft = get_field<bool>(a, "ft", "config.analyses");
        if (a.contains("splits")) c.splits = get_field<bool>(a, "splits", "config.analyses");
        if (a.contains("histograms")) c.histograms = get_field<bool>(a, "histograms", "config.analyses");
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ConfigError, path + ": " + e.what());
    }
    return config_from_json(j);
}

// Physics-relevant fields only; output directory and thread count do not change results.
inline json canonical_json(const RunConfig& c) {
    json j;
    j["preset"] = c.preset;
    j["model"] = c.model_file;
    j["params"] = c.params;
    j["scheme"] = to_string(c.scheme.value_or(default_scheme(c.preset)));
    j["n"] = c.trajectories;
    j["dt"] = c.dt;
    if (c.tau) j["tau"] = *c.tau;
    if (c.seed) j["seed"] = *c.seed;
    j["final_basis"] = to_string(c.final_basis);
    j["stride"] = c.stride;
    j["analyses"] = {{"ft", c.ft}, {"splits", c.splits}, {"histograms", c.histograms}};
    return j;
}

inline std::string config_hash(const RunConfig& c) {
    std::string s = canonical_json(c).dump();
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a(s.data(), s.size()));
    return buf;
}

// ---- explicit model files ----

inline Matrix matrix_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw Error(ErrorCode::ConfigError, where + ": expected a nested array");
    const int d = static_cast<int>(j.size());
    Matrix m(d, d);
    for (int r = 0; r < d; ++r) {
        if (!j[r].is_array() || static_cast<int>(j[r].size()) != d)
            throw Error(ErrorCode::ConfigError, where + ": row " + std::to_string(r) + " is not of length " +
                                                    std::to_string(d));
        for (int c = 0; c < d; ++c) {
            const auto& e = j[r][c];
            if (e.is_number())
                m(r, c) = e.get<double>();
            else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number())
                m(r, c) = cplx(e[0].get<double>(), e[1].get<double>());
            else
                throw Error(ErrorCode::ConfigError, where + ": entry must be a number or [re, im]");
        }
    }
    return m;
}

// Explicit model: matrices as nested arrays of [re, im]; drive terms carry real coefficients
// a cos(w t + phase), so the control parameter is time itself.
inline SystemModel model_from_json(const json& j) {
    using detail::get_field;
    if (j.contains("preset")) {
        detail::reject_unknown(j, {"preset", "params"}, "model");
        PresetParams p;
        if (j.contains("params"))
            for (const auto& [k, v] : j.at("params").items()) p.values[k] = v.get<double>();
        return build_preset(get_field<std::string>(j, "preset", "model"), p);
    }
    detail::reject_unknown(j, {"name", "bare", "drive", "channels", "reservoirs", "tau", "initial_state", "theta"},
                           "model");
    SystemModel m;
    m.name = j.value("name", std::string("explicit"));
    Matrix hs = matrix_from_json(j.at("bare"), "model.bare");
    m.dim = static_cast<int>(hs.rows());
    m.bare = ParametricOperator(hs);
    m.drive = ParametricOperator(Matrix::Zero(m.dim, m.dim));
    m.protocol.tau = get_field<double>(j, "tau", "model");
    m.protocol.fn = [](double t) { return cplx(t); };
    if (j.contains("drive")) {
        for (std::size_t i = 0; i < j.at("drive").size(); ++i) {
            const auto& d = j.at("drive")[i];
            std::string w = "model.drive[" + std::to_string(i) + "]";
            detail::reject_unknown(d, {"op", "amplitude", "frequency", "phase"}, w);
            Matrix op = matrix_from_json(d.at("op"), w + ".op");
            if (op.rows() != m.dim) throw Error(ErrorCode::ConfigError, w + ": dimension mismatch");
            double a = d.value("amplitude", 1.0), f = d.value("frequency", 0.0), ph = d.value("phase", 0.0);
            m.drive.add(op, [a, f, ph](cplx l) { return cplx(a * std::cos(f * l.real() + ph)); });
        }
    }
    for (const auto& r : j.at("reservoirs")) {
        detail::reject_unknown(r, {"id", "T", "potentials"}, "model.reservoirs");
        Reservoir res{get_field<int>(r, "id", "model.reservoirs"), get_field<double>(r, "T", "model.reservoirs"), {}};
        if (res.temperature <= 0.0) throw Error(ErrorCode::InvalidParam, "reservoir temperature must be positive");
        m.reservoirs.push_back(res);
    }
    const auto& chs = j.at("channels");
    for (std::size_t i = 0; i < chs.size(); ++i) {
        const auto& c = chs[i];
        std::string w = "model.channels[" + std::to_string(i) + "]";
        detail::reject_unknown(c, {"name", "op", "reservoir", "partner", "rate_plus", "rate_minus", "is_plus"}, w);
        Channel ch;
        ch.name = c.value("name", "L" + std::to_string(i));
        ch.op = ParametricOperator(matrix_from_json(c.at("op"), w + ".op"));
        ch.reservoir = c.value("reservoir", 0);
        if (c.contains("partner")) {
            ch.pairing = Pairing::Paired;
            ch.partner = get_field<int>(c, "partner", w);
            ch.rate_plus = get_field<double>(c, "rate_plus", w);
            ch.rate_minus = get_field<double>(c, "rate_minus", w);
            ch.is_plus = get_field<bool>(c, "is_plus", w);
        }
        m.channels.push_back(ch);
    }
    m.theta_unitary = j.contains("theta") ? matrix_from_json(j.at("theta"), "model.theta") : identity(m.dim);
    if (j.contains("initial_state") && j.at("initial_state").is_array()) {
        m.initial_state = matrix_from_json(j.at("initial_state"), "model.initial_state");
    } else {
        if (m.reservoirs.empty()) throw Error(ErrorCode::ConfigError, "model: Gibbs initial state needs a reservoir");
        m.initial_state = gibbs_state(hs, m.reservoirs.front().temperature);
    }
    return m;
}

inline SystemModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open model '" + path + "'");
    try {
        return model_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, path + ": " + e.what());
    }
}

inline SystemModel build_model(const RunConfig& c) {
    PresetParams p;
    p.values = c.params;
    if (c.tau) p.values["tau"] = *c.tau;
    p.values.erase("dt");
    SystemModel m;
    if (!c.model_file.empty()) {
        m = load_model_file(c.model_file);
        if (c.tau) m.protocol.tau = *c.tau;
    } else {
        m = build_preset(c.preset, p);
    }
    return m;
}

}  // namespace qtherm
