#include "netsub/coverage.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <tuple>

namespace netsub {

namespace {
constexpr double kEarthRadius = 6371008.8;  // meters
constexpr double kDeg = std::numbers::pi / 180.0;
}  // namespace

ElevationGrid::ElevationGrid(int r, int c, double cs, double fill)
    : cell_size(cs), rows(r), cols(c), height(std::size_t(std::max(r, 0)) * std::max(c, 0), fill) {
    validate();
}

void ElevationGrid::validate() const {
    if (rows <= 0 || cols <= 0) throw InvalidArgument("elevation grid must be nonempty");
    if (!(cell_size > 0.0) || !std::isfinite(cell_size))
        throw InvalidArgument("cell size must be > 0");
    if (height.size() != std::size_t(rows) * cols)
        throw InvalidArgument("elevation grid is not rectangular");
    for (double h : height)
        if (!std::isfinite(h)) throw InvalidArgument("elevation heights must be finite");
}

int ElevationGrid::col_of(double x) const {
    return std::clamp(int(std::floor(x / cell_size)), 0, cols - 1);
}

int ElevationGrid::row_of(double y) const {
    return std::clamp(int(std::floor(y / cell_size)), 0, rows - 1);
}

double ElevationGrid::terrain(double x, double y) const { return at(row_of(y), col_of(x)); }

void ElevationGrid::to_local(double lat, double lon, double& x, double& y) const {
    x = (lon - origin_lon) * kDeg * kEarthRadius * std::cos(origin_lat * kDeg);
    y = (lat - origin_lat) * kDeg * kEarthRadius;
}

void ElevationGrid::to_geo(double x, double y, double& lat, double& lon) const {
    lat = origin_lat + y / (kDeg * kEarthRadius);
    lon = origin_lon + x / (kDeg * kEarthRadius * std::cos(origin_lat * kDeg));
}

bool line_of_sight(const ElevationGrid& grid, const Point3& p, const Point3& q) {
    if (!grid.contains(p.x, p.y) || !grid.contains(q.x, q.y))
        throw InvalidArgument("line of sight endpoint outside the grid");
    // Fixed endpoint order makes the traversal, and so the answer, symmetric.
    Point3 a = p, b = q;
    if (std::tie(b.x, b.y, b.z) < std::tie(a.x, a.y, a.z)) std::swap(a, b);

    const double cs = grid.cell_size;
    const double dx = b.x - a.x, dy = b.y - a.y, dz = b.z - a.z;
    constexpr double inf = std::numeric_limits<double>::infinity();
    int col = grid.col_of(a.x), row = grid.row_of(a.y);
    const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
    const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
    double next_x = inf, delta_x = inf, next_y = inf, delta_y = inf;
    if (step_x > 0) next_x = ((col + 1) * cs - a.x) / dx, delta_x = cs / dx;
    if (step_x < 0) next_x = (col * cs - a.x) / dx, delta_x = -cs / dx;
    if (step_y > 0) next_y = ((row + 1) * cs - a.y) / dy, delta_y = cs / dy;
    if (step_y < 0) next_y = (row * cs - a.y) / dy, delta_y = -cs / dy;

    double s = 0.0;
    while (true) {
        const double s_out = std::min({next_x, next_y, 1.0});
        const double z_low = std::min(a.z + s * dz, a.z + s_out * dz);
        if (z_low < grid.at(row, col)) return false;
        if (s_out >= 1.0) return true;
        if (next_x < next_y) {
            col += step_x;
            s = next_x;
            next_x += delta_x;
        } else if (next_y < next_x) {
            row += step_y;
            s = next_y;
            next_y += delta_y;
        } else {  // exact corner
            col += step_x;
            row += step_y;
            s = next_x;
            next_x += delta_x;
            next_y += delta_y;
        }
        if (col < 0 || col >= grid.cols || row < 0 || row >= grid.rows) return true;
    }
}

std::size_t CoverageRaster::covered_count() const {
    return std::size_t(std::count(covered.begin(), covered.end(), std::uint8_t(1)));
}

CoverageRaster empty_raster(const ElevationGrid& grid) {
    grid.validate();
    CoverageRaster r;
    r.rows = grid.rows;
    r.cols = grid.cols;
    r.cell_size = grid.cell_size;
    r.origin_lat = grid.origin_lat;
    r.origin_lon = grid.origin_lon;
    r.covered.assign(std::size_t(grid.rows) * grid.cols, 0);
    return r;
}

CoverageRaster tower_viewshed(const ElevationGrid& grid, const CoverageTower& tower,
                              double receiver_height) {
    if (!(tower.antenna_height > 0.0)) throw InvalidArgument("antenna height must be > 0");
    CoverageRaster r = empty_raster(grid);
    Point3 src;
    grid.to_local(tower.lat, tower.lon, src.x, src.y);
    if (!grid.contains(src.x, src.y))
        throw InvalidArgument("tower " + std::to_string(tower.id) + " lies outside the grid");
    src.z = grid.terrain(src.x, src.y) + tower.antenna_height;
    const long cells = long(r.covered.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (long k = 0; k < cells; ++k) {
        const int row = int(k / grid.cols), col = int(k % grid.cols);
        const Point3 dst{grid.cell_center_x(col), grid.cell_center_y(row),
                         grid.at(row, col) + receiver_height};
        r.covered[std::size_t(k)] = line_of_sight(grid, src, dst) ? 1 : 0;
    }
    return r;
}

CoverageRaster tower_coverage_map(const ElevationGrid& grid,
                                  const std::vector<CoverageTower>& towers, int month,
                                  double receiver_height) {
    CoverageRaster r = empty_raster(grid);
    for (const CoverageTower& t : towers) {
        if (t.activation_month > month) continue;
        const CoverageRaster v = tower_viewshed(grid, t, receiver_height);
        for (std::size_t k = 0; k < r.covered.size(); ++k) r.covered[k] |= v.covered[k];
    }
    return r;
}

std::vector<CoverageRaster> monthly_coverage(const ElevationGrid& grid,
                                             const std::vector<CoverageTower>& towers, int horizon,
                                             double receiver_height) {
    std::vector<CoverageTower> sorted = towers;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.activation_month < b.activation_month;
    });
    std::vector<CoverageRaster> out;
    CoverageRaster current = empty_raster(grid);
    std::size_t next = 0;
    for (int m = 1; m <= horizon; ++m) {
        for (; next < sorted.size() && sorted[next].activation_month <= m; ++next) {
            const CoverageRaster v = tower_viewshed(grid, sorted[next], receiver_height);
            for (std::size_t k = 0; k < current.covered.size(); ++k) current.covered[k] |= v.covered[k];
        }
        out.push_back(current);
    }
    return out;
}

std::vector<std::uint32_t> disk_cells(int rows, int cols, double cs, double x, double y,
                                      double radius) {
    std::vector<std::uint32_t> out;
    const int c0 = std::max(0, int(std::floor((x - radius) / cs)));
    const int c1 = std::min(cols - 1, int(std::floor((x + radius) / cs)));
    const int r0 = std::max(0, int(std::floor((y - radius) / cs)));
    const int r1 = std::min(rows - 1, int(std::floor((y + radius) / cs)));
    const double r2 = radius * radius;
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            const double ex = (c + 0.5) * cs - x, ey = (r + 0.5) * cs - y;
            if (ex * ex + ey * ey <= r2) out.push_back(std::uint32_t(r * cols + c));
        }
    return out;
}

AgentCoverage agent_coverage(const std::vector<WeightedLocation>& locations,
                             const CoverageRaster& raster, double radius) {
    if (!(radius > 0.0)) throw InvalidArgument("coverage radius must be > 0");
    AgentCoverage out;
    double num = 0.0, den = 0.0;
    const double w = raster.cols * raster.cell_size, h = raster.rows * raster.cell_size;
    for (const WeightedLocation& loc : locations) {
        if (!(loc.weight >= 0.0)) throw InvalidArgument("location weights must be >= 0");
        if (!(loc.x >= 0.0 && loc.y >= 0.0 && loc.x <= w && loc.y <= h)) {
            ++out.off_grid;
            continue;
        }
        const auto cells = disk_cells(raster.rows, raster.cols, raster.cell_size, loc.x, loc.y, radius);
        if (cells.empty()) {
            ++out.off_grid;
            continue;
        }
        std::size_t hit = 0;
        for (std::uint32_t k : cells) hit += raster.covered[k];
        num += loc.weight * double(hit) / double(cells.size());
        den += loc.weight;
    }
    out.phi = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
    return out;
}

namespace {

struct AsciiHeader {
    int ncols = -1, nrows = -1;
    double cellsize = 0.0;
    double origin_lat = 0.0, origin_lon = 0.0;
    bool has_nodata = false;
    double nodata = 0.0;
};

AsciiHeader read_header(std::istream& in) {
    AsciiHeader h;
    while (true) {
        const auto pos = in.tellg();
        std::string key;
        if (!(in >> key)) break;
        std::string lower = key;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return char(std::tolower(c)); });
        if (!lower.empty() && (std::isdigit((unsigned char)lower[0]) || lower[0] == '-' ||
                               lower[0] == '+' || lower[0] == '.')) {
            in.seekg(pos);
            break;
        }
        double v = 0.0;
        if (!(in >> v)) throw InvalidArgument("raster header value missing for " + key);
        if (lower == "ncols") h.ncols = int(v);
        else if (lower == "nrows") h.nrows = int(v);
        else if (lower == "cellsize") h.cellsize = v;
        else if (lower == "originlat") h.origin_lat = v;
        else if (lower == "originlon") h.origin_lon = v;
        else if (lower == "nodata_value") h.has_nodata = true, h.nodata = v;
        else if (lower == "xllcorner" || lower == "yllcorner" || lower == "xllcenter" ||
                 lower == "yllcenter") {
            if (v != 0.0) throw InvalidArgument("raster lower-left corner must be the local origin 0");
        } else {
            throw InvalidArgument("unknown raster header key " + key);
        }
    }
    if (h.ncols <= 0 || h.nrows <= 0 || !(h.cellsize > 0.0))
        throw InvalidArgument("raster header needs ncols, nrows and cellsize");
    return h;
}

template <class Put>
void read_body(std::istream& in, const AsciiHeader& h, Put put) {
    for (int r = h.nrows - 1; r >= 0; --r)
        for (int c = 0; c < h.ncols; ++c) {
            double v;
            if (!(in >> v)) throw InvalidArgument("raster body is short");
            if (h.has_nodata && v == h.nodata) throw InvalidArgument("raster contains NODATA cells");
            put(r, c, v);
        }
}

void write_header(std::ostream& out, int ncols, int nrows, double cs, double lat, double lon) {
    out.precision(17);
    out << "ncols " << ncols << "\nnrows " << nrows << "\nxllcorner 0\nyllcorner 0\ncellsize "
        << cs << "\noriginlat " << lat << "\noriginlon " << lon << "\n";
}

}  // namespace

ElevationGrid read_elevation_ascii(std::istream& in) {
    const AsciiHeader h = read_header(in);
    ElevationGrid g(h.nrows, h.ncols, h.cellsize);
    g.origin_lat = h.origin_lat;
    g.origin_lon = h.origin_lon;
    read_body(in, h, [&](int r, int c, double v) { g.at(r, c) = v; });
    g.validate();
    return g;
}

void write_elevation_ascii(std::ostream& out, const ElevationGrid& g) {
    write_header(out, g.cols, g.rows, g.cell_size, g.origin_lat, g.origin_lon);
    for (int r = g.rows - 1; r >= 0; --r) {
        for (int c = 0; c < g.cols; ++c) out << (c ? " " : "") << g.at(r, c);
        out << '\n';
    }
}

ElevationGrid read_elevation_csv(std::istream& in, double cell_size, double origin_lat,
                                 double origin_lon) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidArgument("empty elevation CSV");
    ElevationGrid g(int(rows.size()), int(rows[0].size()), cell_size);
    g.origin_lat = origin_lat;
    g.origin_lon = origin_lon;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].size() != std::size_t(g.cols)) throw InvalidArgument("elevation CSV is ragged");
        for (int c = 0; c < g.cols; ++c) g.at(g.rows - 1 - int(k), c) = rows[k][std::size_t(c)];
    }
    g.validate();
    return g;
}

CoverageRaster read_coverage_ascii(std::istream& in) {
    const AsciiHeader h = read_header(in);
    CoverageRaster r;
    r.rows = h.nrows;
    r.cols = h.ncols;
    r.cell_size = h.cellsize;
    r.origin_lat = h.origin_lat;
    r.origin_lon = h.origin_lon;
    r.covered.assign(std::size_t(r.rows) * r.cols, 0);
    read_body(in, h, [&](int row, int c, double v) {
        r.covered[std::size_t(row) * r.cols + c] = v != 0.0 ? 1 : 0;
    });
    return r;
}

void write_coverage_ascii(std::ostream& out, const CoverageRaster& r) {
    write_header(out, r.cols, r.rows, r.cell_size, r.origin_lat, r.origin_lon);
    for (int row = r.rows - 1; row >= 0; --row) {
        for (int c = 0; c < r.cols; ++c) out << (c ? " " : "") << int(r.at(row, c));
        out << '\n';
    }
}

}  // namespace netsub
