#include <doctest.h>

#include <random>
#include <sstream>

#include "netsub/coverage.hpp"
#include "oracles.hpp"

using namespace netsub;

namespace {

CoverageTower tower_at(const ElevationGrid& g, double x, double y, double height, int month = 1,
                       std::uint64_t id = 1) {
    CoverageTower t;
    t.id = id;
    g.to_geo(x, y, t.lat, t.lon);
    t.antenna_height = height;
    t.activation_month = month;
    return t;
}

ElevationGrid random_terrain(std::mt19937_64& rng, int rows, int cols) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ElevationGrid g(rows, cols, 50.0);
    g.origin_lat = -2.0;
    g.origin_lon = 30.0;
    for (double& h : g.height) h = 100.0 + 60.0 * u(rng);
    return g;
}

}  // namespace

TEST_CASE("flat terrain is fully visible; a wall blocks") {
    ElevationGrid g(10, 20, 100.0, 50.0);
    const Point3 a{150.0, 500.0, 60.0}, b{1850.0, 500.0, 52.0};
    CHECK(line_of_sight(g, a, b));
    for (int r = 0; r < g.rows; ++r) g.at(r, 10) = 200.0;
    CHECK_FALSE(line_of_sight(g, a, b));
    CHECK_FALSE(line_of_sight(g, b, a));
    // Over the wall.
    CHECK(line_of_sight(g, {150.0, 500.0, 300.0}, {1850.0, 500.0, 300.0}));
    // A segment inside one cell only sees that cell.
    CHECK(line_of_sight(g, {10.0, 10.0, 51.0}, {20.0, 20.0, 51.0}));
    CHECK_THROWS_AS(line_of_sight(g, {-1.0, 0.0, 0.0}, b), InvalidArgument);
}

TEST_CASE("line of sight is symmetric and matches the brute-force oracle") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int visible = 0, blocked = 0;
    for (int k = 0; k < 6; ++k) {
        const ElevationGrid g = random_terrain(rng, 15 + k, 22 - k);
        for (int s = 0; s < 400; ++s) {
            Point3 a{u(rng) * g.width(), u(rng) * g.extent_north(), 0.0};
            Point3 b{u(rng) * g.width(), u(rng) * g.extent_north(), 0.0};
            a.z = g.terrain(a.x, a.y) + 5.0 + 80.0 * u(rng);
            b.z = g.terrain(b.x, b.y) + 1.5;
            const bool ab = line_of_sight(g, a, b);
            CHECK(ab == line_of_sight(g, b, a));
            CHECK(ab == oracle::brute_line_of_sight(g, a, b));
            (ab ? visible : blocked)++;
        }
    }
    CHECK(visible > 50);
    CHECK(blocked > 50);
}

TEST_CASE("axis-aligned segments along cell edges") {
    ElevationGrid g(4, 4, 10.0, 0.0);
    g.at(1, 1) = 100.0;
    // Running along the boundary x = 10 touches cell (1, 1) over positive length.
    const Point3 a{10.0, 5.0, 5.0}, b{10.0, 35.0, 5.0};
    CHECK(line_of_sight(g, a, b) == oracle::brute_line_of_sight(g, a, b));
    CHECK(line_of_sight(g, b, a) == line_of_sight(g, a, b));
}

TEST_CASE("coverage union and monthly maps") {
    ElevationGrid g(12, 24, 100.0, 0.0);
    for (int r = 0; r < g.rows; ++r) g.at(r, 12) = 500.0;
    const CoverageTower west = tower_at(g, 300.0, 600.0, 30.0, 1, 1);
    const CoverageTower east = tower_at(g, 2100.0, 600.0, 30.0, 3, 2);
    const CoverageRaster vw = tower_viewshed(g, west), ve = tower_viewshed(g, east);
    CHECK(vw.at(6, 0));
    CHECK_FALSE(vw.at(6, 20));
    CHECK(ve.at(6, 20));
    CHECK_FALSE(ve.at(6, 0));
    const CoverageRaster both = tower_coverage_map(g, {west, east}, 3);
    for (std::size_t k = 0; k < both.covered.size(); ++k)
        CHECK(both.covered[k] == (vw.covered[k] | ve.covered[k]));
    CHECK(tower_coverage_map(g, {west, east}, 2) == vw);
    const auto months = monthly_coverage(g, {east, west}, 4);
    REQUIRE(months.size() == 4);
    CHECK(months[0] == vw);
    CHECK(months[1] == vw);
    CHECK(months[2] == both);
    CHECK(months[3] == both);
    CHECK(both.covered_count() >= vw.covered_count());
    CHECK_THROWS_AS(tower_viewshed(g, tower_at(g, 300.0, 600.0, 0.0)), InvalidArgument);
    CHECK_THROWS_AS(tower_viewshed(g, tower_at(g, 1e6, 600.0, 30.0)), InvalidArgument);
}

TEST_CASE("agent coverage on a half-covered plane") {
    CoverageRaster r;
    r.rows = 40;
    r.cols = 40;
    r.cell_size = 100.0;
    r.covered.assign(1600, 0);
    for (int row = 0; row < 40; ++row)
        for (int col = 0; col < 20; ++col) r.covered[std::size_t(row) * 40 + col] = 1;
    const double cell_share = 1.0 / double(disk_cells(40, 40, 100.0, 2000.0, 2000.0, 1500.0).size());
    const AgentCoverage c = agent_coverage({{2000.0, 2000.0, 1.0}}, r, 1500.0);
    CHECK(std::abs(c.phi - 0.5) <= cell_share);
    CHECK(agent_coverage({{500.0, 2000.0, 1.0}}, r, 400.0).phi == 1.0);
    CHECK(agent_coverage({{3500.0, 2000.0, 1.0}}, r, 400.0).phi == 0.0);
    // Weights and off-grid locations.
    const AgentCoverage w = agent_coverage({{500.0, 2000.0, 3.0}, {3500.0, 2000.0, 1.0}, {-50.0, 0.0, 5.0}}, r, 400.0);
    CHECK(w.phi == doctest::Approx(0.75));
    CHECK(w.off_grid == 1);
    CHECK(agent_coverage({}, r).phi == 0.0);
}

TEST_CASE("disk cells") {
    const auto one = disk_cells(10, 10, 100.0, 50.0, 50.0, 10.0);
    CHECK(one == std::vector<std::uint32_t>{0});
    const auto plus = disk_cells(10, 10, 100.0, 150.0, 150.0, 100.0);
    CHECK(plus.size() == 5);
    CHECK(disk_cells(10, 10, 100.0, 5000.0, 5000.0, 100.0).empty());
}

TEST_CASE("ASCII grid round trips") {
    std::mt19937_64 rng(2);
    ElevationGrid g = random_terrain(rng, 5, 7);
    for (double& h : g.height) h = std::round(h * 100.0) / 100.0;
    std::stringstream ss;
    write_elevation_ascii(ss, g);
    const ElevationGrid back = read_elevation_ascii(ss);
    CHECK(back.rows == g.rows);
    CHECK(back.cols == g.cols);
    CHECK(back.cell_size == g.cell_size);
    CHECK(back.origin_lat == doctest::Approx(g.origin_lat));
    CHECK(back.origin_lon == doctest::Approx(g.origin_lon));
    for (std::size_t k = 0; k < g.height.size(); ++k) CHECK(back.height[k] == doctest::Approx(g.height[k]));

    const CoverageRaster r = tower_viewshed(g, tower_at(g, 100.0, 100.0, 20.0));
    std::stringstream rs;
    write_coverage_ascii(rs, r);
    CHECK(read_coverage_ascii(rs) == r);

    std::istringstream csv("1,2,3\n4,5,6\n");
    const ElevationGrid c = read_elevation_csv(csv, 10.0, 0.0, 0.0);
    CHECK(c.rows == 2);
    CHECK(c.at(0, 0) == 4.0);  // south row is the last line
    CHECK(c.at(1, 2) == 3.0);
    std::istringstream bad("ncols 2\nnrows 2\ncellsize 1\n1 2\n3\n");
    CHECK_THROWS(read_elevation_ascii(bad));
}
