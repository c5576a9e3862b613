#include "fwavg/reeb_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fwavg/level_cycle.hpp"

namespace fwavg {

namespace {

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = ab.norm2();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + ab * t)).norm();
}

double point_polygon_distance(Vec2 p, const std::vector<Vec2>& poly) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++)
        best = std::min(best, point_segment_distance(p, poly[j], poly[i]));
    return best;
}

std::string fmt_point(Vec2 z) {
    std::ostringstream os;
    os << "(" << z.x << ", " << z.y << ")";
    return os.str();
}

}  // namespace

CriticalPointSearch find_critical_points(const HamiltonianSystem& sys, const Box& box,
                                         const FindCriticalOptions& opt) {
    CriticalPointSearch out;
    const int n = opt.grid_n;
    const double dx = box.width() / n;
    const double dy = box.height() / n;

    // Gradient components on grid nodes.
    std::vector<double> gx(static_cast<std::size_t>(n + 1) * (n + 1));
    std::vector<double> gy(gx.size());
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            const Vec2 g = sys.grad({box.x_lo + i * dx, box.y_lo + j * dy});
            gx[static_cast<std::size_t>(i) * (n + 1) + j] = g.x;
            gy[static_cast<std::size_t>(i) * (n + 1) + j] = g.y;
        }
    }
    const auto at = [n](const std::vector<double>& v, int i, int j) {
        return v[static_cast<std::size_t>(i) * (n + 1) + j];
    };

    std::vector<CriticalPoint> found;
    const double diag = std::hypot(dx, dy);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double gx_min = std::numeric_limits<double>::infinity(), gx_max = -gx_min;
            double gy_min = gx_min, gy_max = -gx_min;
            for (int di = 0; di <= 1; ++di) {
                for (int dj = 0; dj <= 1; ++dj) {
                    gx_min = std::min(gx_min, at(gx, i + di, j + dj));
                    gx_max = std::max(gx_max, at(gx, i + di, j + dj));
                    gy_min = std::min(gy_min, at(gy, i + di, j + dj));
                    gy_max = std::max(gy_max, at(gy, i + di, j + dj));
                }
            }
            if (gx_min > 0.0 || gx_max < 0.0 || gy_min > 0.0 || gy_max < 0.0) continue;

            Vec2 z{box.x_lo + (i + 0.5) * dx, box.y_lo + (j + 0.5) * dy};
            bool converged = false;
            for (int it = 0; it < opt.max_newton; ++it) {
                const Vec2 g = sys.grad(z);
                if (g.norm() <= opt.tol_grad * (1.0 + z.norm())) {
                    converged = true;
                    break;
                }
                const Mat2 hh = sys.hess(z);
                if (std::abs(hh.det()) < 1e-300) break;
                Vec2 step = hh.solve(g);
                const double cap = 2.0 * diag;
                const double sn = step.norm();
                if (sn > cap) step = step * (cap / sn);
                z -= step;
                if (!box.contains(z) && (z - Vec2{box.x_lo, box.y_lo}).norm() > 10.0 * (box.width() + box.height()))
                    break;
            }
            if (!converged) {
                out.warnings.push_back("Newton did not converge from cell (" + std::to_string(i) +
                                       "," + std::to_string(j) + ") near " +
                                       fmt_point({box.x_lo + (i + 0.5) * dx, box.y_lo + (j + 0.5) * dy}));
                continue;
            }
            if (!box.contains(z)) continue;

            bool duplicate = false;
            for (const CriticalPoint& c : found)
                if ((c.location - z).norm() <= 1e-6 * (1.0 + z.norm())) duplicate = true;
            if (duplicate) continue;

            const Mat2 hh = sys.hess(z);
            const double hscale = std::max({std::abs(hh.a11), std::abs(hh.a12), std::abs(hh.a21),
                                            std::abs(hh.a22), 1e-30});
            const double det = hh.det();
            // A Morse point keeps |hess| of the same order at z and a fixed
            // small distance away; curvature that vanishes at z itself (e.g. a
            // cubic monkey saddle) marks a non-Morse point even though the
            // determinant looks fine in relative terms.
            const double r0 = 1e-2 * std::hypot(box.width(), box.height());
            double kappa = hscale;
            for (const Vec2 d : {Vec2{r0, 0.0}, Vec2{-r0, 0.0}, Vec2{0.0, r0}, Vec2{0.0, -r0}}) {
                const Mat2 hp = sys.hess(z + d);
                kappa = std::max({kappa, std::abs(hp.a11), std::abs(hp.a12), std::abs(hp.a21),
                                  std::abs(hp.a22)});
            }
            if (std::abs(det) <= opt.tol_degenerate * hscale * hscale ||
                hscale <= opt.tol_flat * kappa)
                throw std::runtime_error("degenerate (non-Morse) critical point near " + fmt_point(z));
            CriticalPoint cp;
            cp.location = z;
            cp.value = sys.h(z);
            cp.kind = det < 0.0 ? CriticalKind::saddle
                                : (hh.trace() > 0.0 ? CriticalKind::minimum : CriticalKind::maximum);
            found.push_back(cp);
        }
    }
    std::sort(found.begin(), found.end(),
              [](const CriticalPoint& a, const CriticalPoint& b) { return a.value < b.value; });
    out.points = std::move(found);
    return out;
}

int ReebGraph::band_of(double h) const {
    if (band_bounds.size() < 2) return -1;
    if (h <= band_bounds.front() || h >= band_bounds.back()) return -1;
    const auto it = std::upper_bound(band_bounds.begin(), band_bounds.end(), h);
    return static_cast<int>(it - band_bounds.begin()) - 1;
}

const BandComponent* ReebGraph::component(int band, int edge) const {
    for (const BandComponent& bc : components)
        if (bc.band == band && bc.edge == edge) return &bc;
    return nullptr;
}

std::vector<int> ReebGraph::edges_at_vertex(int vertex) const {
    std::vector<int> out;
    for (const ReebEdge& e : edges)
        if (e.lower_vertex == vertex || e.upper_vertex == vertex) out.push_back(e.id);
    return out;
}

ReebGraph build_reeb_graph(const HamiltonianSystem& sys, const std::vector<CriticalPoint>& points,
                           double h_max, const Box& box, const BuildOptions& opt) {
    if (points.empty()) throw std::invalid_argument("reeb graph: no critical points supplied");
    if (points.size() > 64) throw std::invalid_argument("reeb graph: more than 64 critical points");

    ReebGraph graph;
    graph.critical_points = points;
    std::sort(graph.critical_points.begin(), graph.critical_points.end(),
              [](const CriticalPoint& a, const CriticalPoint& b) { return a.value < b.value; });
    graph.h_max = h_max;
    graph.domain = box;

    const auto& cps = graph.critical_points;
    if (!(h_max > cps.front().value)) throw std::invalid_argument("reeb graph: ceiling below the global minimum");
    // Tied critical values are tolerable between extrema only (symmetric
    // wells); a tie involving a saddle makes the level topology ambiguous.
    for (std::size_t i = 1; i < cps.size(); ++i) {
        if (cps[i].value - cps[i - 1].value > opt.value_distinct_tol) continue;
        if (cps[i].kind == CriticalKind::saddle || cps[i - 1].kind == CriticalKind::saddle)
            throw std::runtime_error("critical values are not distinct at a saddle");
    }

    for (const CriticalPoint& cp : cps) {
        if (cp.value >= h_max) continue;
        if (graph.band_bounds.empty() ||
            cp.value - graph.band_bounds.back() > opt.value_distinct_tol)
            graph.band_bounds.push_back(cp.value);
    }
    graph.band_bounds.push_back(h_max);
    const int n_bands = static_cast<int>(graph.band_bounds.size()) - 1;
    if (n_bands < 1) throw std::runtime_error("reeb graph: no level bands below the ceiling");

    // H on scan-grid nodes, reused for every band.
    const int gn = opt.grid_n;
    const double dx = box.width() / gn;
    const double dy = box.height() / gn;
    std::vector<double> hv(static_cast<std::size_t>(gn + 1) * (gn + 1));
    for (int i = 0; i <= gn; ++i)
        for (int j = 0; j <= gn; ++j)
            hv[static_cast<std::size_t>(i) * (gn + 1) + j] =
                sys.h({box.x_lo + i * dx, box.y_lo + j * dy});
    const auto hat = [gn, &hv](int i, int j) {
        return hv[static_cast<std::size_t>(i) * (gn + 1) + j];
    };

    const double cluster_tol = 2.0 * std::hypot(dx, dy);
    TraceOptions trace_opt;
    trace_opt.n_samples = opt.polygon_samples;

    for (int band = 0; band < n_bands; ++band) {
        const double mid = 0.5 * (graph.band_bounds[band] + graph.band_bounds[band + 1]);

        std::vector<Vec2> candidates;
        for (int i = 0; i <= gn; ++i) {
            for (int j = 0; j <= gn; ++j) {
                const double f0 = hat(i, j) - mid;
                if (i < gn) {
                    const double f1 = hat(i + 1, j) - mid;
                    if (f0 * f1 < 0.0)
                        candidates.push_back({box.x_lo + (i + f0 / (f0 - f1)) * dx, box.y_lo + j * dy});
                }
                if (j < gn) {
                    const double f1 = hat(i, j + 1) - mid;
                    if (f0 * f1 < 0.0)
                        candidates.push_back({box.x_lo + i * dx, box.y_lo + (j + f0 / (f0 - f1)) * dy});
                }
            }
        }
        if (candidates.empty())
            throw std::runtime_error("no level-set component found in a band; enlarge the search box");

        std::vector<bool> claimed(candidates.size(), false);
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            if (claimed[c]) continue;
            const Vec2 start = point_on_level(sys, candidates[c], mid);
            LevelCycle cyc = trace_orbit_from(sys, start, trace_opt);

            BandComponent bc;
            bc.band = band;
            bc.level = mid;
            bc.polygon = std::move(cyc.samples);
            for (std::size_t k = 0; k < cps.size(); ++k)
                if (point_in_polygon(cps[k].location, bc.polygon)) bc.enclosure |= (1ULL << k);
            for (std::size_t k = c; k < candidates.size(); ++k)
                if (!claimed[k] && point_polygon_distance(candidates[k], bc.polygon) <= cluster_tol)
                    claimed[k] = true;
            graph.components.push_back(std::move(bc));
        }
    }

    // Chain band components with identical enclosure sets into edges.
    std::map<std::uint64_t, std::vector<int>> chains;
    for (std::size_t i = 0; i < graph.components.size(); ++i)
        chains[graph.components[i].enclosure].push_back(static_cast<int>(i));

    struct ChainInfo {
        std::uint64_t enclosure;
        int first_band, last_band;
        std::vector<int> comp_indices;
    };
    std::vector<ChainInfo> chain_list;
    for (auto& [enc, idxs] : chains) {
        std::sort(idxs.begin(), idxs.end(), [&](int a, int b) {
            return graph.components[static_cast<std::size_t>(a)].band <
                   graph.components[static_cast<std::size_t>(b)].band;
        });
        for (std::size_t k = 1; k < idxs.size(); ++k)
            if (graph.components[static_cast<std::size_t>(idxs[k])].band !=
                graph.components[static_cast<std::size_t>(idxs[k - 1])].band + 1)
                throw std::runtime_error("level-set family is not contiguous across bands "
                                         "(possibly a missed critical point)");
        ChainInfo ci;
        ci.enclosure = enc;
        ci.first_band = graph.components[static_cast<std::size_t>(idxs.front())].band;
        ci.last_band = graph.components[static_cast<std::size_t>(idxs.back())].band;
        ci.comp_indices = idxs;
        chain_list.push_back(std::move(ci));
    }
    std::sort(chain_list.begin(), chain_list.end(), [&](const ChainInfo& a, const ChainInfo& b) {
        const double alo = graph.band_bounds[static_cast<std::size_t>(a.first_band)];
        const double blo = graph.band_bounds[static_cast<std::size_t>(b.first_band)];
        if (alo != blo) return alo < blo;
        return a.enclosure < b.enclosure;
    });

    // Vertices: one per critical point below the ceiling, then the ceiling.
    std::vector<int> vertex_of_cp(cps.size(), -1);
    for (std::size_t k = 0; k < cps.size(); ++k) {
        if (cps[k].value >= h_max) continue;
        ReebVertex v;
        v.id = static_cast<int>(graph.vertices.size());
        v.kind = cps[k].kind == CriticalKind::saddle ? VertexKind::interior : VertexKind::exterior;
        v.h = cps[k].value;
        v.location = cps[k].location;
        v.critical_index = static_cast<int>(k);
        vertex_of_cp[k] = v.id;
        graph.vertices.push_back(v);
    }
    ReebVertex ceiling;
    ceiling.id = static_cast<int>(graph.vertices.size());
    ceiling.kind = VertexKind::ceiling;
    ceiling.h = h_max;
    graph.vertices.push_back(ceiling);

    // Tied extremum values: the chain's enclosure set says which extremum a
    // cycle family actually surrounds.
    const auto vertex_at_value = [&](double value, std::uint64_t enclosure) {
        int fallback = -1;
        for (std::size_t k = 0; k < cps.size(); ++k) {
            if (std::abs(cps[k].value - value) > opt.value_distinct_tol || vertex_of_cp[k] < 0)
                continue;
            if (enclosure & (1ULL << k)) return vertex_of_cp[k];
            if (fallback < 0) fallback = vertex_of_cp[k];
        }
        if (fallback >= 0) return fallback;
        throw std::runtime_error("no critical point at a band boundary");
    };

    for (const ChainInfo& ci : chain_list) {
        ReebEdge e;
        e.id = static_cast<int>(graph.edges.size());
        e.h_lo = graph.band_bounds[static_cast<std::size_t>(ci.first_band)];
        e.h_hi = graph.band_bounds[static_cast<std::size_t>(ci.last_band) + 1];
        e.lower_vertex = vertex_at_value(e.h_lo, ci.enclosure);
        e.upper_vertex =
            (ci.last_band + 2 == static_cast<int>(graph.band_bounds.size()))
                ? ceiling.id
                : vertex_at_value(e.h_hi, ci.enclosure);
        const int mid_chain = ci.comp_indices[ci.comp_indices.size() / 2];
        e.seed = graph.components[static_cast<std::size_t>(mid_chain)].polygon.front();
        for (int idx : ci.comp_indices)
            graph.components[static_cast<std::size_t>(idx)].edge = e.id;
        graph.edges.push_back(e);
    }

    // Degree validation: saddles carry 3 edges, extrema 1, ceiling >= 1.
    for (const ReebVertex& v : graph.vertices) {
        const auto incident = graph.edges_at_vertex(v.id);
        const bool ok = (v.kind == VertexKind::interior && incident.size() == 3) ||
                        (v.kind == VertexKind::exterior && incident.size() == 1) ||
                        (v.kind == VertexKind::ceiling && !incident.empty());
        if (!ok)
            throw std::runtime_error("inconsistent level topology at vertex " + std::to_string(v.id) +
                                     " (possibly a missed critical point)");
    }
    return graph;
}

GraphPoint identify(const ReebGraph& graph, const HamiltonianSystem& sys, Vec2 z,
                    double vertex_snap) {
    const double h = sys.h(z);
    if (h > graph.h_max + vertex_snap)
        throw std::out_of_range("identify: point above the truncation ceiling");
    // Vertex snap; ties between equal-valued extrema break by proximity.
    const ReebVertex* snapped = nullptr;
    double snapped_d = std::numeric_limits<double>::infinity();
    for (const ReebVertex& v : graph.vertices) {
        if (std::abs(h - v.h) > vertex_snap) continue;
        const double d = v.kind == VertexKind::ceiling ? 0.0 : (z - v.location).norm();
        if (d < snapped_d) {
            snapped = &v;
            snapped_d = d;
        }
    }
    if (snapped) return GraphPoint{snapped->h, -1, snapped->id};
    const int band = graph.band_of(h);
    if (band < 0) throw std::out_of_range("identify: energy below the global minimum");

    std::vector<const BandComponent*> in_band;
    for (const BandComponent& bc : graph.components)
        if (bc.band == band) in_band.push_back(&bc);
    if (in_band.empty()) throw std::runtime_error("identify: band has no components");
    if (in_band.size() == 1) return GraphPoint{h, in_band.front()->edge, -1};

    // Slide to the band mid-level along the gradient flow (stays within the
    // same component) and pick the closest stored polygon.
    const Vec2 zm = point_on_level(sys, z, in_band.front()->level);
    const BandComponent* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const BandComponent* bc : in_band) {
        const double d = point_polygon_distance(zm, bc->polygon);
        if (d < best_d) {
            best_d = d;
            best = bc;
        }
    }
    return GraphPoint{h, best->edge, -1};
}

double graph_distance(const ReebGraph& graph, GraphPoint p, GraphPoint q) {
    // Anchor each point to its boundary vertices with the residual h-cost.
    struct Anchor {
        int vertex;
        double cost;
    };
    const auto anchors = [&](const GraphPoint& g) {
        std::vector<Anchor> out;
        if (g.is_vertex()) {
            out.push_back({g.vertex, 0.0});
        } else {
            const ReebEdge& e = graph.edge(g.edge);
            out.push_back({e.lower_vertex, std::abs(g.h - e.h_lo)});
            out.push_back({e.upper_vertex, std::abs(e.h_hi - g.h)});
        }
        return out;
    };

    double best = std::numeric_limits<double>::infinity();
    if (!p.is_vertex() && !q.is_vertex() && p.edge == q.edge) best = std::abs(p.h - q.h);

    // Dijkstra over the (tiny) vertex graph.
    const std::size_t nv = graph.vertices.size();
    for (const Anchor& ap : anchors(p)) {
        std::vector<double> dist(nv, std::numeric_limits<double>::infinity());
        dist[static_cast<std::size_t>(ap.vertex)] = 0.0;
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        heap.push({0.0, ap.vertex});
        while (!heap.empty()) {
            const auto [d, v] = heap.top();
            heap.pop();
            if (d > dist[static_cast<std::size_t>(v)]) continue;
            for (const ReebEdge& e : graph.edges) {
                int other = -1;
                if (e.lower_vertex == v) other = e.upper_vertex;
                else if (e.upper_vertex == v) other = e.lower_vertex;
                else continue;
                const double nd = d + (e.h_hi - e.h_lo);
                if (nd < dist[static_cast<std::size_t>(other)]) {
                    dist[static_cast<std::size_t>(other)] = nd;
                    heap.push({nd, other});
                }
            }
        }
        for (const Anchor& aq : anchors(q))
            best = std::min(best, ap.cost + dist[static_cast<std::size_t>(aq.vertex)] + aq.cost);
    }
    return best;
}

nlohmann::json graph_to_json(const ReebGraph& graph) {
    nlohmann::json j;
    j["h_max"] = graph.h_max;
    j["vertices"] = nlohmann::json::array();
    for (const ReebVertex& v : graph.vertices) {
        nlohmann::json vj;
        vj["id"] = v.id;
        vj["h"] = v.h;
        if (v.kind == VertexKind::ceiling) {
            vj["kind"] = "ceiling";
        } else {
            const CriticalPoint& cp = graph.critical_points[static_cast<std::size_t>(v.critical_index)];
            vj["kind"] = cp.kind == CriticalKind::saddle
                             ? "saddle"
                             : (cp.kind == CriticalKind::minimum ? "minimum" : "maximum");
            vj["location"] = {cp.location.x, cp.location.y};
        }
        j["vertices"].push_back(vj);
    }
    j["edges"] = nlohmann::json::array();
    for (const ReebEdge& e : graph.edges) {
        nlohmann::json ej;
        ej["id"] = e.id;
        ej["lower_vertex"] = e.lower_vertex;
        ej["upper_vertex"] = e.upper_vertex;
        ej["h_lo"] = e.h_lo;
        ej["h_hi"] = e.h_hi;
        ej["seed"] = {e.seed.x, e.seed.y};
        j["edges"].push_back(ej);
    }
    return j;
}

}  // namespace fwavg
