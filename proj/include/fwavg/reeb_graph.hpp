#pragma once

// Reeb graph of a proper planar Hamiltonian below a truncation ceiling.
//
// Vertices are critical points (plus one ceiling vertex); edges are maximal
// families of level-set components parameterized by the energy h.  The
// projection Pi(z) = (H(z), edge id) identifies where a phase point lives
// on the graph.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fwavg/geometry.hpp"
#include "fwavg/hamiltonian.hpp"

namespace fwavg {

enum class CriticalKind { minimum, maximum, saddle };

struct CriticalPoint {
    Vec2 location;
    double value = 0.0;
    CriticalKind kind = CriticalKind::minimum;
};

struct FindCriticalOptions {
    int grid_n = 96;
    double tol_grad = 1e-9;      // |grad H| at an accepted point, times (1 + |z|)
    double tol_degenerate = 1e-8;  // relative Hessian-determinant floor
    double tol_flat = 1e-2;  // Hessian magnitude at the point vs. curvature nearby
    int max_newton = 60;
};

struct CriticalPointSearch {
    std::vector<CriticalPoint> points;
    std::vector<std::string> warnings;  // e.g. Newton divergence on a seeded cell
};

CriticalPointSearch find_critical_points(const HamiltonianSystem& sys, const Box& box,
                                         const FindCriticalOptions& opt = {});

enum class VertexKind { exterior, interior, ceiling };  // extremum, saddle, truncation

struct ReebVertex {
    int id = -1;
    VertexKind kind = VertexKind::exterior;
    double h = 0.0;
    Vec2 location;       // critical point location; unused for the ceiling vertex
    int critical_index = -1;  // into ReebGraph::critical_points, -1 for ceiling
};

struct ReebEdge {
    int id = -1;
    int lower_vertex = -1;
    int upper_vertex = -1;
    double h_lo = 0.0;
    double h_hi = 0.0;
    Vec2 seed;  // a point on a mid-edge cycle
};

// Internal level-set geometry retained for point identification.
struct BandComponent {
    int band = -1;
    int edge = -1;
    double level = 0.0;          // band mid-level the polygon was traced at
    std::vector<Vec2> polygon;   // sampled cycle
    std::uint64_t enclosure = 0; // bitset over critical points inside the cycle
};

struct BuildOptions {
    int grid_n = 96;          // level-set scan resolution
    int polygon_samples = 256;
    double value_distinct_tol = 1e-9;  // critical values must differ by more
};

struct ReebGraph {
    std::vector<ReebVertex> vertices;
    std::vector<ReebEdge> edges;
    std::vector<CriticalPoint> critical_points;
    double h_max = 0.0;
    Box domain;
    std::vector<double> band_bounds;        // ascending critical values, then h_max
    std::vector<BandComponent> components;  // per (band, edge)

    int band_of(double h) const;  // -1 when h is outside (bottom, h_max)
    const BandComponent* component(int band, int edge) const;
    std::vector<int> edges_at_vertex(int vertex) const;
    const ReebEdge& edge(int id) const { return edges.at(static_cast<std::size_t>(id)); }
    double edge_span(int id) const { return edge(id).h_hi - edge(id).h_lo; }
};

ReebGraph build_reeb_graph(const HamiltonianSystem& sys, const std::vector<CriticalPoint>& points,
                           double h_max, const Box& box, const BuildOptions& opt = {});

// A point of the graph: energy plus edge, or a vertex (edge = -1).
struct GraphPoint {
    double h = 0.0;
    int edge = -1;
    int vertex = -1;

    bool is_vertex() const { return vertex >= 0; }
};

// Project a phase point onto the graph.  Energies within `vertex_snap` of a
// vertex level snap to that vertex.  Throws std::out_of_range above the
// ceiling or below the global minimum.
GraphPoint identify(const ReebGraph& graph, const HamiltonianSystem& sys, Vec2 z,
                    double vertex_snap = 1e-7);

// Shortest-path metric along the graph; edge length is its energy span.
double graph_distance(const ReebGraph& graph, GraphPoint p, GraphPoint q);

nlohmann::json graph_to_json(const ReebGraph& graph);

}  // namespace fwavg
