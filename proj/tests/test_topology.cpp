#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "fwavg/reeb_graph.hpp"

using namespace fwavg;

namespace {

const Box kBoxS1{-6.5, 6.5, -6.5, 6.5};
const Box kBoxS2{-2.5, 2.5, -2.5, 2.5};

ReebGraph build(const HamiltonianSystem& sys, const Box& box, double h_max) {
    const CriticalPointSearch search = find_critical_points(sys, box);
    return build_reeb_graph(sys, search.points, h_max, box);
}

// Independent oracle: flood-fill the sublevel set {H < level} on a fine grid
// and count its connected components.  For these Hamiltonians every sublevel
// component is bounded by a single level curve, so the count equals the number
// of connected components of the level set itself, which is the number of
// graph edges crossing that height.
int sublevel_components(const HamiltonianSystem& sys, const Box& box, double level,
                        int n = 400) {
    std::vector<int> mark(static_cast<std::size_t>(n) * n, 0);
    const auto at = [&](int i, int j) -> int& {
        return mark[static_cast<std::size_t>(i) * n + j];
    };
    const auto point = [&](int i, int j) {
        return Vec2{box.x_lo + (i + 0.5) * box.width() / n,
                    box.y_lo + (j + 0.5) * box.height() / n};
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            at(i, j) = sys.h(point(i, j)) < level ? 1 : 0;

    int components = 0;
    std::vector<std::pair<int, int>> stack;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (at(i, j) != 1) continue;
            ++components;
            stack.push_back({i, j});
            at(i, j) = 2;
            while (!stack.empty()) {
                const auto [a, b] = stack.back();
                stack.pop_back();
                const int di[4] = {1, -1, 0, 0};
                const int dj[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    const int x = a + di[k], y = b + dj[k];
                    if (x < 0 || y < 0 || x >= n || y >= n || at(x, y) != 1) continue;
                    at(x, y) = 2;
                    stack.push_back({x, y});
                }
            }
        }
    return components;
}

}  // namespace

TEST_CASE("critical points of the single well") {
    const HamiltonianSystem sys = make_builtin("harmonic", 0.1);
    const CriticalPointSearch search = find_critical_points(sys, kBoxS1);
    REQUIRE(search.points.size() == 1);
    CHECK(search.points[0].kind == CriticalKind::minimum);
    CHECK(search.points[0].location.norm() < 1e-9);
    CHECK(std::abs(search.points[0].value) < 1e-12);
}

TEST_CASE("critical points of the double well") {
    const HamiltonianSystem sys = make_builtin("duffing", 0.1);
    const CriticalPointSearch search = find_critical_points(sys, kBoxS2);
    REQUIRE(search.points.size() == 3);
    int minima = 0, saddles = 0;
    for (const CriticalPoint& p : search.points) {
        if (p.kind == CriticalKind::minimum) {
            ++minima;
            CHECK(std::abs(std::abs(p.location.x) - 1.0) < 1e-9);
            CHECK(std::abs(p.location.y) < 1e-9);
            CHECK(p.value == doctest::Approx(-0.25));
        } else {
            ++saddles;
            CHECK(p.location.norm() < 1e-9);
            CHECK(std::abs(p.value) < 1e-12);
        }
    }
    CHECK(minima == 2);
    CHECK(saddles == 1);
}

TEST_CASE("degenerate critical point is rejected") {
    // Monkey saddle: H = x^3 - 3xy^2 has a degenerate critical point at 0.
    ModelDefinition def;
    def.name = "monkey";
    def.hamiltonian = [](Vec2 z) { return z.x * z.x * z.x - 3.0 * z.x * z.y * z.y; };
    def.fast_field = [](Vec2 z) {
        return Vec2{-6.0 * z.x * z.y, -(3.0 * z.x * z.x - 3.0 * z.y * z.y)};
    };
    def.drift = [](Vec2) { return Vec2{0.0, 0.0}; };
    def.diffusion = [](Vec2) { return Mat2::identity(); };
    const HamiltonianSystem sys = make_system(std::move(def), 0.1);
    CHECK_THROWS(find_critical_points(sys, Box{-1.0, 1.0, -1.0, 1.0}));
}

TEST_CASE("single-well graph: one edge from the minimum to the ceiling") {
    const HamiltonianSystem sys = make_builtin("harmonic", 0.1);
    const ReebGraph g = build(sys, kBoxS1, 20.0);
    REQUIRE(g.edges.size() == 1);
    REQUIRE(g.vertices.size() == 2);
    CHECK(g.vertices[0].kind == VertexKind::exterior);
    CHECK(g.vertices[1].kind == VertexKind::ceiling);
    CHECK(g.edges[0].h_lo == doctest::Approx(0.0));
    CHECK(g.edges[0].h_hi == doctest::Approx(20.0));
    CHECK(g.h_max == doctest::Approx(20.0));
}

TEST_CASE("double-well graph: two lobes and an outer edge") {
    const HamiltonianSystem sys = make_builtin("duffing", 0.1);
    const ReebGraph g = build(sys, kBoxS2, 2.0);
    REQUIRE(g.edges.size() == 3);
    REQUIRE(g.vertices.size() == 4);

    // Edge census by level, against an independent flood-fill oracle.
    const auto edges_at = [&](double h) {
        int n = 0;
        for (const ReebEdge& e : g.edges)
            if (e.h_lo < h && h < e.h_hi) ++n;
        return n;
    };
    CHECK(edges_at(-0.125) == 2);
    CHECK(edges_at(0.125) == 1);
    CHECK(sublevel_components(sys, kBoxS2, -0.125) == 2);
    CHECK(sublevel_components(sys, kBoxS2, 0.125) == 1);

    // Saddle vertex joins exactly three edges; handshake over all vertices.
    int saddle = -1;
    for (const ReebVertex& v : g.vertices)
        if (v.kind == VertexKind::interior) saddle = v.id;
    REQUIRE(saddle >= 0);
    CHECK(g.edges_at_vertex(saddle).size() == 3);
    std::size_t endpoint_count = 0;
    for (const ReebVertex& v : g.vertices) endpoint_count += g.edges_at_vertex(v.id).size();
    CHECK(endpoint_count == 2 * g.edges.size());
}

TEST_CASE("projection identifies lobes, outer region, and vertices") {
    const HamiltonianSystem sys = make_builtin("duffing", 0.1);
    const ReebGraph g = build(sys, kBoxS2, 2.0);

    const GraphPoint right = identify(g, sys, {0.5, 0.0});
    CHECK(right.h == doctest::Approx(-0.109375));
    CHECK_FALSE(right.is_vertex());

    const GraphPoint left = identify(g, sys, {-0.5, 0.0});
    CHECK(left.h == doctest::Approx(-0.109375));
    CHECK_FALSE(left.is_vertex());
    CHECK(left.edge != right.edge);

    // The two lobe points sit on the two sub-saddle edges; an outer point
    // lands on the remaining edge.
    const GraphPoint outer = identify(g, sys, {1.8, 0.0});
    CHECK(outer.edge != left.edge);
    CHECK(outer.edge != right.edge);
    CHECK(outer.h == doctest::Approx(sys.h({1.8, 0.0})));

    // Points at vertex energy snap to the vertex.
    const GraphPoint at_min = identify(g, sys, {1.0, 0.0});
    CHECK(at_min.is_vertex());
    CHECK(g.vertices[static_cast<std::size_t>(at_min.vertex)].h == doctest::Approx(-0.25));

    // Above the ceiling or below the minimum the projection refuses.
    CHECK_THROWS_AS(identify(g, sys, {0.0, 10.0}), std::out_of_range);
}

TEST_CASE("projection is constant along fast orbits") {
    const HamiltonianSystem sys = make_builtin("duffing", 0.1);
    const ReebGraph g = build(sys, kBoxS2, 2.0);
    for (const Vec2 start : {Vec2{0.5, 0.0}, Vec2{-0.4, 0.1}, Vec2{1.6, 0.0}}) {
        const GraphPoint p0 = identify(g, sys, start);
        Vec2 z = start;
        for (int k = 0; k < 25; ++k) {
            z = hamiltonian_flow_step(sys, z, 0.2, 1e-12);
            const GraphPoint p = identify(g, sys, z);
            CHECK(p.edge == p0.edge);
            CHECK(p.h == doctest::Approx(p0.h).epsilon(1e-7));
        }
    }
}

TEST_CASE("graph distance is a metric adapted to the tree") {
    const HamiltonianSystem sys = make_builtin("duffing", 0.1);
    const ReebGraph g = build(sys, kBoxS2, 2.0);

    const GraphPoint left = identify(g, sys, {-0.55, 0.0});   // left lobe
    const GraphPoint right = identify(g, sys, {0.55, 0.0});   // right lobe, same level
    const GraphPoint outer = identify(g, sys, {1.75, 0.0});

    CHECK(left.h == doctest::Approx(right.h));
    // Lobe-to-lobe passes through the saddle at level 0.
    CHECK(graph_distance(g, left, right) == doctest::Approx(2.0 * std::abs(left.h)).epsilon(1e-6));
    // Lobe-to-outer: climb to the saddle, then up the outer edge.
    CHECK(graph_distance(g, left, outer) ==
          doctest::Approx(std::abs(left.h) + outer.h).epsilon(1e-6));
    CHECK(graph_distance(g, left, left) == doctest::Approx(0.0));
    // Symmetry and triangle inequality on this triple.
    CHECK(graph_distance(g, right, left) == doctest::Approx(graph_distance(g, left, right)));
    CHECK(graph_distance(g, left, outer) <=
          graph_distance(g, left, right) + graph_distance(g, right, outer) + 1e-12);

    // Same-edge distances reduce to the energy gap.
    const GraphPoint lo = identify(g, sys, {1.3, 0.0});
    CHECK(graph_distance(g, lo, outer) == doctest::Approx(outer.h - lo.h).epsilon(1e-6));
}

TEST_CASE("graph serialization carries the full structure") {
    const HamiltonianSystem sys = make_builtin("duffing", 0.1);
    const ReebGraph g = build(sys, kBoxS2, 2.0);
    const nlohmann::json j = graph_to_json(g);
    REQUIRE(j.contains("vertices"));
    REQUIRE(j.contains("edges"));
    CHECK(j["vertices"].size() == 4);
    CHECK(j["edges"].size() == 3);
    CHECK(j["h_max"].get<double>() == doctest::Approx(2.0));
    std::set<std::string> kinds;
    for (const auto& v : j["vertices"]) kinds.insert(v["kind"].get<std::string>());
    CHECK(kinds.count("saddle") == 1);
    CHECK(kinds.count("minimum") == 1);
    CHECK(kinds.count("ceiling") == 1);
    for (const auto& e : j["edges"]) {
        CHECK(e["h_lo"].get<double>() < e["h_hi"].get<double>());
        CHECK(e["lower_vertex"].get<int>() >= 0);
        CHECK(e["upper_vertex"].get<int>() >= 0);
    }
}

TEST_CASE("ceiling below a saddle truncates the graph to the well parts") {
    const HamiltonianSystem sys = make_builtin("duffing", 0.1);
    // Ceiling below the saddle level: only the two lobe edges survive.
    const ReebGraph g = build(sys, kBoxS2, -0.05);
    CHECK(g.edges.size() == 2);
    for (const ReebEdge& e : g.edges) {
        CHECK(e.h_hi == doctest::Approx(-0.05));
        CHECK(e.h_lo == doctest::Approx(-0.25));
    }
}
