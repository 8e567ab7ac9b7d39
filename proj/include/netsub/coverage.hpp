#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "netsub/types.hpp"

namespace netsub {

/// Heights on a regular grid in a local equirectangular frame whose origin is
/// the south-west corner. Row 0 is the southernmost row.
struct ElevationGrid {
    double origin_lat = 0.0;
    double origin_lon = 0.0;
    double cell_size = 100.0;  // meters
    int rows = 0;
    int cols = 0;
    std::vector<double> height;  // row-major, meters above sea level

    ElevationGrid() = default;
    ElevationGrid(int rows, int cols, double cell_size, double fill = 0.0);

    void validate() const;
    double width() const { return cols * cell_size; }
    double extent_north() const { return rows * cell_size; }
    double at(int row, int col) const { return height[std::size_t(row) * cols + col]; }
    double& at(int row, int col) { return height[std::size_t(row) * cols + col]; }
    bool contains(double x, double y) const {
        return x >= 0.0 && y >= 0.0 && x <= width() && y <= extent_north();
    }
    /// Terrain height of the cell holding (x, y); points on the far edges
    /// belong to the last row/column.
    double terrain(double x, double y) const;
    int col_of(double x) const;
    int row_of(double y) const;
    double cell_center_x(int col) const { return (col + 0.5) * cell_size; }
    double cell_center_y(int row) const { return (row + 0.5) * cell_size; }

    void to_local(double lat, double lon, double& x, double& y) const;
    void to_geo(double x, double y, double& lat, double& lon) const;
};

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;  // meters above sea level
};

/// True iff the segment is at or above the terrain of every cell it crosses.
/// Cells are flat-topped, so the check is exact per cell.
bool line_of_sight(const ElevationGrid& grid, const Point3& a, const Point3& b);

struct CoverageTower {
    std::uint64_t id = 0;
    double lat = 0.0;
    double lon = 0.0;
    double antenna_height = 30.0;  // meters above terrain
    int activation_month = 1;
    bool rural = false;
};

struct CoverageRaster {
    int rows = 0;
    int cols = 0;
    double cell_size = 100.0;
    double origin_lat = 0.0;
    double origin_lon = 0.0;
    std::vector<std::uint8_t> covered;  // row-major, row 0 south

    bool at(int row, int col) const { return covered[std::size_t(row) * cols + col] != 0; }
    std::size_t covered_count() const;
    bool operator==(const CoverageRaster&) const = default;
};

CoverageRaster empty_raster(const ElevationGrid& grid);

/// Cells in line of sight from one tower; the receiver sits `receiver_height`
/// above the centre of each cell.
CoverageRaster tower_viewshed(const ElevationGrid& grid, const CoverageTower& tower,
                              double receiver_height = 1.5);

/// Union of the viewsheds of towers active by `month`.
CoverageRaster tower_coverage_map(const ElevationGrid& grid,
                                  const std::vector<CoverageTower>& towers, int month,
                                  double receiver_height = 1.5);

/// Per-month maps for months 1..horizon, computing each viewshed once.
std::vector<CoverageRaster> monthly_coverage(const ElevationGrid& grid,
                                             const std::vector<CoverageTower>& towers, int horizon,
                                             double receiver_height = 1.5);

struct WeightedLocation {
    double x = 0.0;  // local meters
    double y = 0.0;
    double weight = 1.0;
};

struct AgentCoverage {
    double phi = 0.0;
    std::size_t off_grid = 0;
};

/// Weighted mean over on-grid locations of the covered share of cells whose
/// centre lies within `radius` of the location.
AgentCoverage agent_coverage(const std::vector<WeightedLocation>& locations,
                             const CoverageRaster& raster, double radius = 5000.0);

/// Cell indices whose centres lie within `radius` of (x, y).
std::vector<std::uint32_t> disk_cells(int rows, int cols, double cell_size, double x, double y,
                                      double radius);

/// ESRI ASCII grid with the local origin at xllcorner/yllcorner = 0 and extra
/// `originlat`/`originlon` header keys. Rows are written north first.
ElevationGrid read_elevation_ascii(std::istream& in);
void write_elevation_ascii(std::ostream& out, const ElevationGrid& grid);
/// Comma-separated heights, north row first.
ElevationGrid read_elevation_csv(std::istream& in, double cell_size, double origin_lat,
                                 double origin_lon);
CoverageRaster read_coverage_ascii(std::istream& in);
void write_coverage_ascii(std::ostream& out, const CoverageRaster& raster);

}  // namespace netsub
