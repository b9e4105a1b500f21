#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdual/errors.hpp"
#include "qdual/grid.hpp"
#include "qdual/params.hpp"

namespace qdual {

enum class EquationFamily { modular, hj_classical, heat_forward, heat_backward, fokker_planck };
enum class PotentialKind { zero, harmonic, inverted_harmonic, quartic, custom_table };
enum class InitialKind { gaussian, plane_wave, eigenstate_guess, custom_table };
enum class DriftKind { none, linear, custom_table };
enum class DualityMap { none, quantum_to_heat, kappa_reduce, scale_entropy_shift,
                        hyperbolic_invariant };

/// Fully resolved run description, parsed from the key = value config file.
struct RunConfig {
    struct GridSec {
        std::size_t n = 1024;
        double x_min = -16.0, x_max = 16.0;
        Boundary boundary = Boundary::periodic;
    } grid;

    PhysicalParams physics;

    struct EquationSec {
        EquationFamily family = EquationFamily::modular;
        int hj_sign = +1;        // hj_classical: sign of V in the HJ equation
        double horizon = 1.0;    // heat_backward: declared interval [0, T]
        bool fp_exp_fitted = true;
    } equation;

    struct PotentialSec {
        PotentialKind kind = PotentialKind::zero;
        double omega = 1.0;
        double center = 0.0;
        double a4 = 0.25, a2 = 0.0, c0 = 0.0;
        bool flip_sign = false;  // build -V (scattering assignment)
        std::string path;
    } potential;

    struct DriftSec {
        DriftKind kind = DriftKind::none;
        double c = 1.0;  // b = -c x for the linear kind
        std::string path;
    } drift;

    struct InitialSec {
        InitialKind kind = InitialKind::gaussian;
        double sigma = 1.0;
        double x0 = 0.0, p0 = 0.0;
        int mode = 1;
        std::string path;
    } initial;

    struct TimeSec {
        double dt = 1e-3;
        double t_end = 1.0;
        std::size_t output_every = 10;
    } time;

    std::vector<std::string> checks = {"norm", "continuity"};

    struct DualitySec {
        DualityMap map = DualityMap::none;
        bool compare = false;
        double beta = 2.0;
        double alpha = 0.5;
    } duality;

    struct RunSec {
        unsigned seed = 0;
        std::string output_dir = "out";
        bool quiet = false;
    } run;

    nlohmann::json resolved_json() const;
    void validate() const;
};

namespace detail_config {

inline std::string trim(const std::string& s) {
    auto b = s.begin(), e = s.end();
    while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
    while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
    return std::string(b, e);
}

using SectionMap = std::map<std::string, std::map<std::string, std::string>>;

/// key = value sections, '#' or ';' comments, case-sensitive keys.
inline SectionMap parse_ini(std::istream& in, std::vector<std::string>& errors) {
    SectionMap out;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                errors.push_back("line " + std::to_string(lineno) + ": unterminated section");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            out[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        out[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

class Reader {
public:
    Reader(const SectionMap& map, std::vector<std::string>& errors)
        : map_(map), errors_(errors) {}

    template <typename T>
    void get(const std::string& section, const std::string& key, T& into) {
        const auto sec = map_.find(section);
        if (sec == map_.end()) return;
        const auto kv = sec->second.find(key);
        if (kv == sec->second.end()) return;
        parse(section + "." + key, kv->second, into);
        seen_.insert(section + "." + key);
    }

    /// Flags config keys that matched nothing; typos should not pass silently.
    void check_unknown() {
        for (const auto& [section, kvs] : map_)
            for (const auto& [key, value] : kvs) {
                (void)value;
                if (!seen_.count(section + "." + key))
                    errors_.push_back("unknown key '" + section + "." + key + "'");
            }
    }

private:
    void parse(const std::string& where, const std::string& raw, double& into) {
        try {
            std::size_t pos = 0;
            into = std::stod(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument(raw);
        } catch (const std::exception&) {
            errors_.push_back(where + ": not a number: '" + raw + "'");
        }
    }
    void parse(const std::string& where, const std::string& raw, std::size_t& into) {
        try {
            const long long v = std::stoll(raw);
            if (v < 0) throw std::invalid_argument(raw);
            into = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            errors_.push_back(where + ": not a nonnegative integer: '" + raw + "'");
        }
    }
    void parse(const std::string& where, const std::string& raw, unsigned& into) {
        std::size_t v = 0;
        parse(where, raw, v);
        into = static_cast<unsigned>(v);
    }
    void parse(const std::string& where, const std::string& raw, int& into) {
        try {
            into = std::stoi(raw);
        } catch (const std::exception&) {
            errors_.push_back(where + ": not an integer: '" + raw + "'");
        }
    }
    void parse(const std::string& where, const std::string& raw, bool& into) {
        if (raw == "true" || raw == "1" || raw == "yes") into = true;
        else if (raw == "false" || raw == "0" || raw == "no") into = false;
        else errors_.push_back(where + ": not a boolean: '" + raw + "'");
    }
    void parse(const std::string&, const std::string& raw, std::string& into) { into = raw; }

    const SectionMap& map_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

template <typename Enum>
bool pick(const std::string& raw, const std::vector<std::pair<std::string, Enum>>& table,
          Enum& into) {
    for (const auto& [name, value] : table)
        if (raw == name) {
            into = value;
            return true;
        }
    return false;
}

}  // namespace detail_config

inline RunConfig parse_config(std::istream& in) {
    std::vector<std::string> errors;
    const auto map = detail_config::parse_ini(in, errors);
    detail_config::Reader r(map, errors);
    RunConfig c;

    r.get("grid", "n", c.grid.n);
    r.get("grid", "x_min", c.grid.x_min);
    r.get("grid", "x_max", c.grid.x_max);
    std::string boundary = "periodic";
    r.get("grid", "boundary", boundary);
    if (!detail_config::pick<Boundary>(boundary,
                                       {{"periodic", Boundary::periodic},
                                        {"reflecting", Boundary::reflecting}},
                                       c.grid.boundary))
        errors.push_back("grid.boundary: unknown value '" + boundary + "'");

    r.get("physics", "hbar", c.physics.hbar);
    r.get("physics", "m", c.physics.m);
    r.get("physics", "kappa", c.physics.kappa);
    r.get("physics", "gamma", c.physics.gamma);
    r.get("physics", "kT", c.physics.kT);
    r.get("physics", "dl", c.physics.dl);
    r.get("physics", "density_floor", c.physics.density_floor);
    std::string conv = "quantum";
    r.get("physics", "d_convention", conv);
    if (!detail_config::pick<DConvention>(conv,
                                          {{"quantum", DConvention::quantum},
                                           {"smoluchowski", DConvention::smoluchowski}},
                                          c.physics.d_convention))
        errors.push_back("physics.d_convention: unknown value '" + conv + "'");

    std::string family = "modular";
    r.get("equation", "family", family);
    if (!detail_config::pick<EquationFamily>(
            family,
            {{"modular", EquationFamily::modular},
             {"hj_classical", EquationFamily::hj_classical},
             {"heat_forward", EquationFamily::heat_forward},
             {"heat_backward", EquationFamily::heat_backward},
             {"fokker_planck", EquationFamily::fokker_planck}},
            c.equation.family))
        errors.push_back("equation.family: unknown value '" + family + "'");
    r.get("equation", "hj_sign", c.equation.hj_sign);
    r.get("equation", "horizon", c.equation.horizon);
    std::string fp_scheme = "exp_fitted";
    r.get("equation", "fp_scheme", fp_scheme);
    if (fp_scheme == "exp_fitted") c.equation.fp_exp_fitted = true;
    else if (fp_scheme == "upwind_spectral") c.equation.fp_exp_fitted = false;
    else errors.push_back("equation.fp_scheme: unknown value '" + fp_scheme + "'");

    std::string pk = "zero";
    r.get("potential", "kind", pk);
    if (!detail_config::pick<PotentialKind>(pk,
                                            {{"zero", PotentialKind::zero},
                                             {"harmonic", PotentialKind::harmonic},
                                             {"inverted_harmonic", PotentialKind::inverted_harmonic},
                                             {"quartic", PotentialKind::quartic},
                                             {"custom_table", PotentialKind::custom_table}},
                                            c.potential.kind))
        errors.push_back("potential.kind: unknown value '" + pk + "'");
    r.get("potential", "omega", c.potential.omega);
    r.get("potential", "center", c.potential.center);
    r.get("potential", "a4", c.potential.a4);
    r.get("potential", "a2", c.potential.a2);
    r.get("potential", "c0", c.potential.c0);
    r.get("potential", "flip_sign", c.potential.flip_sign);
    r.get("potential", "path", c.potential.path);

    std::string dk = "none";
    r.get("drift", "kind", dk);
    if (!detail_config::pick<DriftKind>(dk,
                                        {{"none", DriftKind::none},
                                         {"linear", DriftKind::linear},
                                         {"custom_table", DriftKind::custom_table}},
                                        c.drift.kind))
        errors.push_back("drift.kind: unknown value '" + dk + "'");
    r.get("drift", "c", c.drift.c);
    r.get("drift", "path", c.drift.path);

    std::string ik = "gaussian";
    r.get("initial", "kind", ik);
    if (!detail_config::pick<InitialKind>(ik,
                                          {{"gaussian", InitialKind::gaussian},
                                           {"plane_wave", InitialKind::plane_wave},
                                           {"eigenstate_guess", InitialKind::eigenstate_guess},
                                           {"custom_table", InitialKind::custom_table}},
                                          c.initial.kind))
        errors.push_back("initial.kind: unknown value '" + ik + "'");
    r.get("initial", "sigma", c.initial.sigma);
    r.get("initial", "x0", c.initial.x0);
    r.get("initial", "p0", c.initial.p0);
    r.get("initial", "mode", c.initial.mode);
    r.get("initial", "path", c.initial.path);

    r.get("time", "dt", c.time.dt);
    r.get("time", "t_end", c.time.t_end);
    r.get("time", "output_every", c.time.output_every);

    std::string enable;
    r.get("checks", "enable", enable);
    if (!enable.empty()) {
        c.checks.clear();
        std::stringstream ss(enable);
        std::string item;
        while (std::getline(ss, item, ','))
            if (const auto name = detail_config::trim(item); !name.empty())
                c.checks.push_back(name);
    }

    std::string dm = "none";
    r.get("duality", "map", dm);
    if (!detail_config::pick<DualityMap>(
            dm,
            {{"none", DualityMap::none},
             {"quantum_to_heat", DualityMap::quantum_to_heat},
             {"kappa_reduce", DualityMap::kappa_reduce},
             {"scale_entropy_shift", DualityMap::scale_entropy_shift},
             {"hyperbolic_invariant", DualityMap::hyperbolic_invariant}},
            c.duality.map))
        errors.push_back("duality.map: unknown value '" + dm + "'");
    r.get("duality", "compare", c.duality.compare);
    r.get("duality", "beta", c.duality.beta);
    r.get("duality", "alpha", c.duality.alpha);

    r.get("run", "seed", c.run.seed);
    r.get("run", "output_dir", c.run.output_dir);
    r.get("run", "quiet", c.run.quiet);

    r.check_unknown();
    if (!errors.empty()) throw ConfigInvalid(std::move(errors));
    c.validate();
    return c;
}

inline RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid({"cannot open config file " + path.string()});
    return parse_config(in);
}

inline void RunConfig::validate() const {
    std::vector<std::string> errors;
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok) errors.push_back(msg);
    };

    need(grid.n >= 64 && std::has_single_bit(grid.n),
         "grid.n: must be a power of two >= 64");
    need(grid.x_max > grid.x_min, "grid: x_max must exceed x_min");
    try {
        physics.validate();
    } catch (const Error& e) {
        errors.push_back(e.what());
    }
    need(time.dt > 0.0, "time.dt: must be > 0");
    need(time.t_end >= 0.0, "time.t_end: must be >= 0");
    need(time.output_every >= 1, "time.output_every: must be >= 1");

    const bool spectral_family = equation.family != EquationFamily::hj_classical;
    if (spectral_family)
        need(grid.boundary == Boundary::periodic,
             "grid.boundary: spectral steppers require periodic (only hj_classical supports "
             "reflecting)");

    switch (equation.family) {
        case EquationFamily::hj_classical:
            need(physics.kappa == 1.0, "physics.kappa: hj_classical requires kappa = 1");
            need(equation.hj_sign == 1 || equation.hj_sign == -1,
                 "equation.hj_sign: must be +1 or -1");
            break;
        case EquationFamily::heat_forward:
        case EquationFamily::heat_backward:
            need(physics.kappa == 2.0,
                 "physics.kappa: heat equations live in the kappa = 2 sector");
            if (equation.family == EquationFamily::heat_backward)
                need(equation.horizon > 0.0 && time.t_end <= equation.horizon * (1 + 1e-12),
                     "equation.horizon: backward runs need 0 < t_end <= horizon");
            break;
        case EquationFamily::fokker_planck:
            need(physics.d_convention == DConvention::smoluchowski,
                 "physics.d_convention: fokker_planck requires the smoluchowski convention");
            break;
        case EquationFamily::modular:
            break;
    }

    // Modular stability: keep the kinetic phase per step below pi for
    // nonlinear couplings (split-step resonance bound).
    if (equation.family == EquationFamily::modular && physics.kappa > 0.0) {
        const double dx = (grid.x_max - grid.x_min) / static_cast<double>(grid.n);
        const double k_max = M_PI / dx;
        const double phase = physics.hbar * k_max * k_max * time.dt / (2.0 * physics.m);
        need(phase < M_PI,
             "time.dt: kinetic phase per step " + std::to_string(phase) +
                 " rad exceeds pi; nonlinear split-stepping is resonance-unstable there "
                 "(reduce dt or coarsen k_max)");
    }

    if (potential.kind == PotentialKind::custom_table)
        need(!potential.path.empty(), "potential.path: required for custom_table");
    if (initial.kind == InitialKind::custom_table)
        need(!initial.path.empty(), "initial.path: required for custom_table");
    if (initial.kind == InitialKind::plane_wave)
        need(grid.boundary == Boundary::periodic,
             "initial.kind: plane_wave requires a periodic grid");
    if (initial.kind == InitialKind::gaussian)
        need(initial.sigma > 0.0, "initial.sigma: must be > 0");
    if (drift.kind == DriftKind::custom_table)
        need(!drift.path.empty(), "drift.path: required for custom_table");

    if (duality.map == DualityMap::kappa_reduce)
        need(std::abs(physics.kappa - 1.0) > 1e-12,
             "duality.map: kappa_reduce is undefined at kappa = 1");
    need(duality.beta > 0.0, "duality.beta: must be > 0");

    if (!errors.empty()) throw ConfigInvalid(std::move(errors));
}

inline nlohmann::json RunConfig::resolved_json() const {
    nlohmann::json j;
    j["grid"] = {{"n", grid.n},
                 {"x_min", grid.x_min},
                 {"x_max", grid.x_max},
                 {"boundary", grid.boundary == Boundary::periodic ? "periodic" : "reflecting"}};
    j["physics"] = {{"hbar", physics.hbar},
                    {"m", physics.m},
                    {"kappa", physics.kappa},
                    {"gamma", physics.gamma},
                    {"kT", physics.kT},
                    {"dl", physics.dl},
                    {"D", physics.D()},
                    {"d_convention", to_string(physics.d_convention)},
                    {"density_floor", physics.density_floor}};
    static const char* family_names[] = {"modular", "hj_classical", "heat_forward",
                                         "heat_backward", "fokker_planck"};
    j["equation"] = {{"family", family_names[static_cast<int>(equation.family)]},
                     {"hj_sign", equation.hj_sign},
                     {"horizon", equation.horizon},
                     {"fp_scheme", equation.fp_exp_fitted ? "exp_fitted" : "upwind_spectral"}};
    static const char* pot_names[] = {"zero", "harmonic", "inverted_harmonic", "quartic",
                                      "custom_table"};
    j["potential"] = {{"kind", pot_names[static_cast<int>(potential.kind)]},
                      {"omega", potential.omega},
                      {"center", potential.center},
                      {"a4", potential.a4},
                      {"a2", potential.a2},
                      {"c0", potential.c0},
                      {"flip_sign", potential.flip_sign},
                      {"path", potential.path}};
    static const char* drift_names[] = {"none", "linear", "custom_table"};
    j["drift"] = {{"kind", drift_names[static_cast<int>(drift.kind)]},
                  {"c", drift.c},
                  {"path", drift.path}};
    static const char* init_names[] = {"gaussian", "plane_wave", "eigenstate_guess",
                                       "custom_table"};
    j["initial"] = {{"kind", init_names[static_cast<int>(initial.kind)]},
                    {"sigma", initial.sigma},
                    {"x0", initial.x0},
                    {"p0", initial.p0},
                    {"mode", initial.mode},
                    {"path", initial.path}};
    j["time"] = {{"dt", time.dt}, {"t_end", time.t_end}, {"output_every", time.output_every}};
    j["checks"] = checks;
    static const char* map_names[] = {"none", "quantum_to_heat", "kappa_reduce",
                                      "scale_entropy_shift", "hyperbolic_invariant"};
    j["duality"] = {{"map", map_names[static_cast<int>(duality.map)]},
                    {"compare", duality.compare},
                    {"beta", duality.beta},
                    {"alpha", duality.alpha}};
    j["run"] = {{"seed", run.seed}, {"output_dir", run.output_dir}, {"quiet", run.quiet}};
    return j;
}

}  // namespace qdual
