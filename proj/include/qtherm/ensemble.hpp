#pragma once

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "entropy.hpp"

namespace qtherm {

// Streaming mean/variance with Chan's parallel merge.
struct Welford {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();

    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
        min = std::min(min, x);
        max = std::max(max, x);
    }

    void merge(const Welford& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
        const double d = o.mean - mean;
        const double tot = na + nb;
        mean += d * nb / tot;
        m2 += o.m2 + d * d * na * nb / tot;
        n += o.n;
        min = std::min(min, o.min);
        max = std::max(max, o.max);
    }

    double variance() const { return n > 1 ? m2 / (n - 1.0) : 0.0; }
    double sem() const { return n > 1 ? std::sqrt(variance() / n) : 0.0; }
};

// log Σ e^{-S} and log Σ e^{-2S}, mergeable.
struct ExpAccumulator {
    std::size_t n = 0;
    double l1 = -std::numeric_limits<double>::infinity();
    double l2 = -std::numeric_limits<double>::infinity();

    static double lse(double a, double b) {
        if (a == -std::numeric_limits<double>::infinity()) return b;
        if (b == -std::numeric_limits<double>::infinity()) return a;
        double m = std::max(a, b);
        return m + std::log(std::exp(a - m) + std::exp(b - m));
    }

    void add(double s) {
        ++n;
        l1 = lse(l1, -s);
        l2 = lse(l2, -2.0 * s);
    }

    void merge(const ExpAccumulator& o) {
        n += o.n;
        l1 = lse(l1, o.l1);
        l2 = lse(l2, o.l2);
    }

    double mean() const { return n ? std::exp(l1 - std::log(static_cast<double>(n))) : 1.0; }
    double sem() const {
        if (n < 2) return 0.0;
        const double ln = std::log(static_cast<double>(n));
        const double m1 = std::exp(l1 - ln), m2 = std::exp(l2 - ln);
        return std::sqrt(std::max(0.0, (m2 - m1 * m1) * n / (n - 1.0)) / n);
    }
};

struct EnsembleStats {
    std::size_t count = 0;
    std::map<std::string, Welford> moments;
    std::map<std::string, ExpAccumulator> ft;
    std::map<std::string, std::size_t> excluded;

    void add(const std::string& q, double x) {
        if (!std::isfinite(x)) {
            ++excluded[q];
            return;
        }
        moments[q].add(x);
    }

    void add_ft(const std::string& q, double s) {
        if (!std::isfinite(s)) {
            ++excluded[q];
            return;
        }
        ft[q].add(s);
    }

    void merge(const EnsembleStats& o) {
        count += o.count;
        for (const auto& [k, v] : o.moments) moments[k].merge(v);
        for (const auto& [k, v] : o.ft) ft[k].merge(v);
        for (const auto& [k, v] : o.excluded) excluded[k] += v;
    }
};

// ---- histograms and convergence series ----

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::vector<double> density;  // count / (N * width)
    std::size_t total = 0;
    std::size_t atoms = 0;  // distinct sample values
};

inline std::size_t distinct_values(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    return static_cast<std::size_t>(std::unique(x.begin(), x.end()) - x.begin());
}

inline Histogram histogram_with_edges(const std::vector<double>& samples, std::vector<double> edges) {
    if (samples.empty()) throw Error(ErrorCode::EmptyInput, "histogram of no samples");
    if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()))
        throw Error(ErrorCode::InvalidParam, "histogram edges must be sorted, at least two");
    Histogram h;
    h.edges = std::move(edges);
    h.counts.assign(h.edges.size() - 1, 0);
    for (double s : samples) {
        if (!std::isfinite(s) || s < h.edges.front() || s > h.edges.back()) continue;
        auto it = std::upper_bound(h.edges.begin(), h.edges.end(), s);
        std::size_t i = static_cast<std::size_t>(it - h.edges.begin());
        i = i == 0 ? 0 : std::min(i - 1, h.counts.size() - 1);
        ++h.counts[i];
    }
    h.total = samples.size();
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        h.density.push_back(h.counts[i] / (static_cast<double>(h.total) * (h.edges[i + 1] - h.edges[i])));
    h.atoms = distinct_values(samples);
    return h;
}

// Automatic binning: Freedman–Diaconis width, capped to [1, 200] bins. Degenerate ranges get a
// single unit-width bin centered on the value.
inline Histogram histogram(const std::vector<double>& samples, int bins = 0) {
    std::vector<double> x;
    for (double s : samples)
        if (std::isfinite(s)) x.push_back(s);
    if (x.empty()) throw Error(ErrorCode::EmptyInput, "histogram of no finite samples");
    auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(lo))) {
        auto h = histogram_with_edges(x, {lo - 0.5, lo + 0.5});
        h.total = samples.size();
        return h;
    }
    if (bins <= 0) {
        std::vector<double> s = x;
        std::sort(s.begin(), s.end());
        double iqr = s[s.size() * 3 / 4] - s[s.size() / 4];
        double w = 2.0 * iqr / std::cbrt(static_cast<double>(s.size()));
        bins = w > 0.0 ? static_cast<int>(std::ceil((hi - lo) / w)) : 50;
        bins = std::clamp(bins, 1, 200);
    }
    std::vector<double> edges(bins + 1);
    for (int i = 0; i <= bins; ++i) edges[i] = lo + (hi - lo) * i / bins;
    auto h = histogram_with_edges(x, edges);
    h.total = x.size();
    return h;
}

// Running mean of e^{-S} in sample order; non-finite samples are skipped.
inline std::vector<std::pair<std::size_t, double>> convergence_series(const std::vector<double>& samples) {
    std::vector<std::pair<std::size_t, double>> out;
    double run = 0.0;
    std::size_t n = 0;
    for (double s : samples) {
        if (!std::isfinite(s)) continue;
        ++n;
        run += (std::exp(-s) - run) / static_cast<double>(n);
        out.emplace_back(n, run);
    }
    return out;
}

// ---- persisted record lines ----

struct RecordRow {
    Scheme scheme = Scheme::Jump;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    int n0 = 0;
    double p_n0 = 0.0;
    std::string events;  // "k@m;..." for jumps, "-" when none
    std::uint64_t digest = 0;
    std::uint64_t samples = 0;
    int ntau = 0;
    double p_ntau = 0.0;
    bool zero_probability = false;
    double dE = 0.0;
    std::vector<double> Q;
    std::vector<double> sigma;
    double W_drive = 0.0, W_chem = 0.0, W_meas = 0.0, W_int = 0.0, W_TPM = 0.0;
    double E_initial = 0.0, E_final = 0.0;
    double dS = 0.0, S_tot = 0.0, S_unc = 0.0, S_mar = 0.0;
    std::optional<double> S_ad, S_na;

    bool operator==(const RecordRow& o) const {
        auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
        auto same_opt = [&](const std::optional<double>& a, const std::optional<double>& b) {
            return a.has_value() == b.has_value() && (!a || same(*a, *b));
        };
        auto same_vec = [&](const std::vector<double>& a, const std::vector<double>& b) {
            if (a.size() != b.size()) return false;
            for (std::size_t i = 0; i < a.size(); ++i)
                if (!same(a[i], b[i])) return false;
            return true;
        };
        return scheme == o.scheme && same(dt, o.dt) && seed == o.seed && stream == o.stream && n0 == o.n0 &&
               same(p_n0, o.p_n0) && events == o.events && digest == o.digest && samples == o.samples &&
               ntau == o.ntau && same(p_ntau, o.p_ntau) && zero_probability == o.zero_probability &&
               same(dE, o.dE) && same_vec(Q, o.Q) && same_vec(sigma, o.sigma) && same(W_drive, o.W_drive) &&
               same(W_chem, o.W_chem) && same(W_meas, o.W_meas) && same(W_int, o.W_int) &&
               same(W_TPM, o.W_TPM) && same(E_initial, o.E_initial) && same(E_final, o.E_final) &&
               same(dS, o.dS) && same(S_tot, o.S_tot) && same(S_unc, o.S_unc) && same(S_mar, o.S_mar) &&
               same_opt(S_ad, o.S_ad) && same_opt(S_na, o.S_na);
    }
};

inline const char* record_header() {
    return "scheme,dt,seed,stream,n0,p_n0,events,digest,samples,n_tau,p_ntau,zero_prob,dE,Q,sigma,"
           "W_drive,W_chem,W_meas,W_int,W_TPM,E_initial,E_final,dS,S_tot,S_unc,S_mar,S_ad,S_na";
}

inline RecordRow make_row(const TrajectoryRecord& r, const EPRecord& ep) {
    RecordRow row;
    row.scheme = r.scheme;
    row.dt = r.dt;
    row.seed = r.seed;
    row.stream = r.stream;
    row.n0 = r.n0;
    row.p_n0 = r.p_n0;
    row.events = format_events(r.events);
    row.digest = r.current_digest;
    row.samples = r.current_count;
    row.ntau = r.ntau;
    row.p_ntau = r.p_ntau;
    row.zero_probability = r.zero_probability_final;
    const auto& l = r.ledger;
    row.dE = l.dE;
    row.Q = l.Q;
    row.sigma = l.sigma;
    row.W_drive = l.W_drive;
    row.W_chem = l.W_chem;
    row.W_meas = l.W_meas;
    row.W_int = l.W_int;
    row.W_TPM = l.W_TPM;
    row.E_initial = l.E_initial;
    row.E_final = l.E_final;
    row.dS = ep.dS;
    row.S_tot = ep.S_tot;
    row.S_unc = ep.S_unc;
    row.S_mar = ep.S_mar;
    row.S_ad = ep.S_ad;
    row.S_na = ep.S_na;
    return row;
}

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string serialize(const RecordRow& r) {
    auto join = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "|" : "") + format_double(v[i]);
        return s.empty() ? std::string("-") : s;
    };
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016" PRIx64, r.digest);
    std::ostringstream o;
    o << to_string(r.scheme) << ',' << format_double(r.dt) << ',' << r.seed << ',' << r.stream << ',' << r.n0
      << ',' << format_double(r.p_n0) << ',' << r.events << ',' << hex << ',' << r.samples << ',' << r.ntau << ','
      << format_double(r.p_ntau) << ',' << (r.zero_probability ? 1 : 0) << ',' << format_double(r.dE) << ','
      << join(r.Q) << ',' << join(r.sigma) << ',' << format_double(r.W_drive) << ',' << format_double(r.W_chem)
      << ',' << format_double(r.W_meas) << ',' << format_double(r.W_int) << ',' << format_double(r.W_TPM) << ','
      << format_double(r.E_initial) << ',' << format_double(r.E_final) << ',' << format_double(r.dS) << ','
      << format_double(r.S_tot) << ',' << format_double(r.S_unc) << ',' << format_double(r.S_mar) << ','
      << opt(r.S_ad) << ',' << opt(r.S_na);
    return o.str();
}

inline RecordRow parse_record(const std::string& line) {
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            f.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    f.push_back(cur);
    if (f.size() != 28) throw Error(ErrorCode::ParseError, "record line has " + std::to_string(f.size()) + " fields");
    auto num = [&](std::size_t i) {
        char* end = nullptr;
        double v = std::strtod(f[i].c_str(), &end);
        if (end == f[i].c_str() || *end != '\0') throw Error(ErrorCode::ParseError, "field " + std::to_string(i));
        return v;
    };
    auto u64 = [&](std::size_t i, int base) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(f[i].c_str(), &end, base);
        if (end == f[i].c_str() || *end != '\0') throw Error(ErrorCode::ParseError, "field " + std::to_string(i));
        return static_cast<std::uint64_t>(v);
    };
    auto list = [&](std::size_t i) {
        std::vector<double> v;
        if (f[i] == "-") return v;
        std::stringstream ss(f[i]);
        std::string part;
        while (std::getline(ss, part, '|')) v.push_back(std::strtod(part.c_str(), nullptr));
        return v;
    };
    auto opt = [&](std::size_t i) -> std::optional<double> {
        if (f[i] == "NA") return std::nullopt;
        return num(i);
    };
    RecordRow r;
    if (f[0] == "jump")
        r.scheme = Scheme::Jump;
    else if (f[0] == "diffusive")
        r.scheme = Scheme::Diffusive;
    else
        throw Error(ErrorCode::ParseError, "scheme '" + f[0] + "'");
    r.dt = num(1);
    r.seed = u64(2, 10);
    r.stream = u64(3, 10);
    r.n0 = static_cast<int>(num(4));
    r.p_n0 = num(5);
    r.events = f[6];
    r.digest = u64(7, 16);
    r.samples = u64(8, 10);
    r.ntau = static_cast<int>(num(9));
    r.p_ntau = num(10);
    r.zero_probability = f[11] == "1";
    r.dE = num(12);
    r.Q = list(13);
    r.sigma = list(14);
    r.W_drive = num(15);
    r.W_chem = num(16);
    r.W_meas = num(17);
    r.W_int = num(18);
    r.W_TPM = num(19);
    r.E_initial = num(20);
    r.E_final = num(21);
    r.dS = num(22);
    r.S_tot = num(23);
    r.S_unc = num(24);
    r.S_mar = num(25);
    r.S_ad = opt(26);
    r.S_na = opt(27);
    return r;
}

// ---- ensemble runner ----

struct EnsembleOptions {
    std::size_t trajectories = 1;
    std::uint64_t seed = 0;
    int threads = 1;
    std::size_t block = 64;  // fixed block size makes merged sums independent of thread count
    bool keep_rows = true;
    bool checkpoint_states = true;
    std::optional<std::size_t> snapshot_trajectory;  // keep snapshots and currents for this index
};

inline const std::vector<std::string>& sample_quantities() {
    static const std::vector<std::string> q{"dE",     "Q",     "W",     "W_drive", "W_chem", "W_meas",
                                            "W_int",  "W_TPM", "sigma", "dS",      "S_tot",  "S_unc",
                                            "S_mar",  "S_ad",  "S_na",  "closure", "jumps"};
    return q;
}

struct EnsembleResult {
    EnsembleStats stats;
    std::vector<RecordRow> rows;
    std::map<std::string, std::vector<double>> samples;  // trajectory order, failed ones absent
    std::vector<int> checkpoint_instants;
    std::vector<Matrix> mean_states;
    std::size_t failures = 0;
    std::vector<std::string> failure_messages;
    std::size_t unc_bound_violations = 0;
    std::optional<TrajectoryRecord> sample_record;
};

namespace detail {

struct BlockResult {
    std::vector<RecordRow> rows;
    std::vector<std::map<std::string, double>> values;
    CheckpointSums sums;
    std::vector<std::string> failures;
    std::size_t bound_violations = 0;
    std::optional<TrajectoryRecord> sample;
};

inline std::map<std::string, double> record_values(const TrajectoryRecord& r, const EPRecord& ep) {
    const auto& l = r.ledger;
    int jumps = 0;
    for (int j : l.jumps) jumps += j;
    std::map<std::string, double> v{{"dE", l.dE},
                                    {"Q", l.heat()},
                                    {"W", l.work()},
                                    {"W_drive", l.W_drive},
                                    {"W_chem", l.W_chem},
                                    {"W_meas", l.W_meas},
                                    {"W_int", l.W_int},
                                    {"W_TPM", l.W_TPM},
                                    {"sigma", ep.sigma},
                                    {"dS", ep.dS},
                                    {"S_tot", ep.S_tot},
                                    {"S_unc", ep.S_unc},
                                    {"S_mar", ep.S_mar},
                                    {"closure", l.closure_residual()},
                                    {"jumps", static_cast<double>(jumps)}};
    if (ep.S_ad) v["S_ad"] = *ep.S_ad;
    if (ep.S_na) v["S_na"] = *ep.S_na;
    return v;
}

}  // namespace detail

inline EnsembleResult run_ensemble(const Simulation& sim, const SplitModel* split, const EnsembleOptions& opt) {
    if (opt.trajectories < 1) throw Error(ErrorCode::InvalidParam, "N must be at least 1");
    const std::size_t block = std::max<std::size_t>(1, opt.block);
    const std::size_t nblocks = (opt.trajectories + block - 1) / block;
    std::vector<detail::BlockResult> blocks(nblocks);
    std::atomic<std::size_t> next{0};

    auto work = [&]() {
        for (;;) {
            std::size_t b = next.fetch_add(1);
            if (b >= nblocks) return;
            auto& out = blocks[b];
            if (opt.checkpoint_states) out.sums.init(sim.checkpoints.size(), sim.table.dim);
            const std::size_t lo = b * block, hi = std::min(opt.trajectories, lo + block);
            for (std::size_t i = lo; i < hi; ++i) {
                EngineOptions eo;
                eo.stride = sim.stride;
                const bool snap = opt.snapshot_trajectory && *opt.snapshot_trajectory == i;
                eo.keep_snapshots = snap;
                eo.keep_currents = snap;
                try {
                    TrajectoryRecord r =
                        run_trajectory(sim, opt.seed, i, eo, opt.checkpoint_states ? &out.sums : nullptr);
                    EPRecord ep = entropy_production(r, sim.final, split);
                    if (!ep.unc_bounds_ok) ++out.bound_violations;
                    out.values.push_back(detail::record_values(r, ep));
                    if (opt.keep_rows) out.rows.push_back(make_row(r, ep));
                    if (snap) out.sample = std::move(r);
                } catch (const Error& e) {
                    out.failures.push_back("trajectory " + std::to_string(i) + " (seed " + std::to_string(opt.seed) +
                                           "): " + e.what());
                }
            }
        }
    };

    const int threads = std::max(1, opt.threads);
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    EnsembleResult res;
    res.checkpoint_instants = sim.checkpoints;
    CheckpointSums total;
    for (auto& b : blocks) {
        for (auto& v : b.values) {
            res.stats.count += 1;
            for (const auto& q : sample_quantities()) {
                auto it = v.find(q);
                if (it == v.end()) continue;
                res.stats.add(q, it->second);
                res.samples[q].push_back(it->second);
            }
            for (const char* q : {"S_tot", "S_unc", "S_mar", "S_ad", "S_na"}) {
                auto it = v.find(q);
                if (it != v.end()) res.stats.add_ft(q, it->second);
            }
        }
        for (auto& r : b.rows) res.rows.push_back(std::move(r));
        for (auto& f : b.failures) res.failure_messages.push_back(std::move(f));
        res.unc_bound_violations += b.bound_violations;
        if (b.sample) res.sample_record = std::move(b.sample);
        if (opt.checkpoint_states) total.merge(b.sums);
    }
    res.failures = res.failure_messages.size();
    if (opt.checkpoint_states && total.count > 0)
        for (const auto& s : total.sums) res.mean_states.push_back(s / static_cast<double>(total.count));
    return res;
}

}  // namespace qtherm
