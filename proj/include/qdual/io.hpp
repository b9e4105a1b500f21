#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdual/fields.hpp"
#include "qdual/functionals.hpp"

namespace qdual {

/// Full-precision decimal rendering (17 significant digits round-trips a
/// double exactly).
inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    return out;
}

/// Field snapshot: one row per grid point, header
/// x,re_psi,im_psi,rho,s,v,u,Q. Hydrodynamic-only states write zero psi.
inline void write_snapshot_csv(const std::filesystem::path& path, const MadelungFields& f,
                               const ComplexField* psi = nullptr) {
    auto out = open_out(path);
    out << "x,re_psi,im_psi,rho,s,v,u,Q\n";
    for (std::size_t i = 0; i < f.grid.n(); ++i) {
        const double re = psi ? (*psi)[i].real() : 0.0;
        const double im = psi ? (*psi)[i].imag() : 0.0;
        out << fmt17(f.grid.x(i)) << ',' << fmt17(re) << ',' << fmt17(im) << ','
            << fmt17(f.rho[i]) << ',' << fmt17(f.s[i]) << ',' << fmt17(f.v[i]) << ','
            << fmt17(f.u[i]) << ',' << fmt17(f.Q[i]) << '\n';
    }
}

/// Euclidean pair snapshot: x,theta,theta_star,rho.
inline void write_dual_pair_csv(const std::filesystem::path& path, const DualPair& d) {
    auto out = open_out(path);
    out << "x,theta,theta_star,rho\n";
    for (std::size_t i = 0; i < d.grid.n(); ++i)
        out << fmt17(d.grid.x(i)) << ',' << fmt17(d.theta[i]) << ','
            << fmt17(d.theta_star[i]) << ',' << fmt17(d.theta[i] * d.theta_star[i]) << '\n';
}

/// One diagnostics row per output time, fixed column order.
class DiagnosticsWriter {
public:
    static const char* header() {
        return "t,norm,S,S_dot,mean_v2,mean_u2,mean_Q,H_kappa,K_kappa,H_plus,H_minus,"
               "H_cl_plus,H_cl_minus,F,Psi,U,H_c,S_dot_int,S_dot_ext,Z";
    }

    explicit DiagnosticsWriter(const std::filesystem::path& path) : out_(open_out(path)) {
        out_ << header() << '\n';
    }

    void write(const DiagnosticsRecord& r) {
        const double cols[] = {r.t, r.norm, r.S, r.S_dot, r.mean_v2, r.mean_u2, r.mean_Q,
                               r.H_kappa, r.K_kappa, r.H_plus, r.H_minus, r.H_cl_plus,
                               r.H_cl_minus, r.F, r.Psi, r.U, r.H_c, r.S_dot_int,
                               r.S_dot_ext, r.Z};
        bool first = true;
        for (double c : cols) {
            if (!first) out_ << ',';
            out_ << fmt17(c);
            first = false;
        }
        out_ << '\n';
    }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

/// Two-column (x, value) table, used by custom potentials and initial data.
struct Table {
    std::vector<double> x;
    std::vector<double> value;
};

inline Table read_table_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open table " + path.string());
    Table t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            // Allow a single header row.
            if (t.x.empty()) continue;
            throw Error("malformed table row in " + path.string() + ": " + line);
        }
        try {
            const double xv = std::stod(line.substr(0, comma));
            const double fv = std::stod(line.substr(comma + 1));
            t.x.push_back(xv);
            t.value.push_back(fv);
        } catch (const std::exception&) {
            if (t.x.empty()) continue;  // header row
            throw Error("malformed table row in " + path.string() + ": " + line);
        }
    }
    if (t.x.size() < 2) throw Error("table " + path.string() + " needs at least two rows");
    return t;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace qdual
