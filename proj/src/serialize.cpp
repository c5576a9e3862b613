#include "fwavg/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fwavg {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

nlohmann::json coefficients_to_json(const CoefficientSet& coeffs) {
    nlohmann::json edges = nlohmann::json::array();
    for (const EdgeCoefficients& c : coeffs.edges) {
        nlohmann::json e;
        e["edge"] = c.edge;
        e["h"] = c.h_grid;
        e["T"] = c.period;
        std::vector<double> a(c.h_grid.size()), b(c.h_grid.size()), u_prime(c.h_grid.size());
        for (std::size_t k = 0; k < c.h_grid.size(); ++k) {
            a[k] = c.a_bar[k] / c.period[k];
            b[k] = c.b_bar[k] / c.period[k];
            u_prime[k] = 1.0 / c.a_bar[k];
        }
        e["A"] = a;
        e["B"] = b;
        e["u_prime"] = u_prime;
        e["v_prime"] = c.period;  // v' = T by definition
        edges.push_back(std::move(e));
    }
    return nlohmann::json{{"edges", std::move(edges)}};
}

nlohmann::json gluing_to_json(const std::vector<GluingData>& gluing) {
    nlohmann::json out = nlohmann::json::array();
    for (const GluingData& g : gluing) {
        out.push_back(nlohmann::json{{"vertex", g.vertex},
                                     {"edges", g.edges},
                                     {"beta", g.beta},
                                     {"prob", g.prob},
                                     {"extrapolation_gap", g.extrapolation_gap}});
    }
    return nlohmann::json{{"vertices", std::move(out)}};
}

std::string path_to_csv(const PathRecord& rec) {
    std::string out = "t,q1,q2,h,edge\n";
    for (std::size_t k = 0; k < rec.t.size(); ++k) {
        out += fmt_double(rec.t[k]);
        out += ',';
        out += fmt_double(rec.z[k].x);
        out += ',';
        out += fmt_double(rec.z[k].y);
        out += ',';
        out += fmt_double(rec.h[k]);
        out += ',';
        out += std::to_string(k < rec.edge.size() ? rec.edge[k] : -1);
        out += '\n';
    }
    return out;
}

std::string graph_path_to_csv(const GraphPathResult& rec) {
    std::string out = "t,h,edge\n";
    for (std::size_t k = 0; k < rec.t.size(); ++k) {
        out += fmt_double(rec.t[k]);
        out += ',';
        out += fmt_double(rec.h[k]);
        out += ',';
        out += std::to_string(rec.edge[k]);
        out += '\n';
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace fwavg
