#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "geotracknet/cellmap/cellmap.hpp"
#include "geotracknet/core/rng.hpp"

using namespace geotracknet;
using cellmap::CellForm;
using cellmap::CellModel;
using cellmap::Grid;

namespace {

const Grid kUshantGrid{{47.5, 49.5, -7.0, -4.0}, 0.1};

std::vector<double> normal_samples(std::size_t n, double mu, double sigma, std::uint64_t seed) {
  core::Rng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = rng.normal(mu, sigma);
  return out;
}

}  // namespace

TEST_CASE("grid and cell_of") {
  REQUIRE(kUshantGrid.n_rows() == 20);
  REQUIRE(kUshantGrid.n_cols() == 30);

  SECTION("first cell") {
    REQUIRE(cellmap::cell_of(47.55, -6.95, kUshantGrid) == 0);
  }

  SECTION("hand-derived row 8, col 19") {
    REQUIRE(cellmap::cell_of(48.34, -5.01, kUshantGrid) == 8 * 30 + 19);
  }

  SECTION("lat_max clamps to the last row") {
    REQUIRE(cellmap::cell_of(49.5, -6.95, kUshantGrid) == 19 * 30 + 0);
  }

  SECTION("outside the roi throws") {
    REQUIRE_THROWS_AS(cellmap::cell_of(50.0, -5.0, kUshantGrid), ais::OutOfRoi);
  }
}

TEST_CASE("silverman bandwidth") {
  SECTION("identical samples hit the floor") {
    REQUIRE(cellmap::silverman_bandwidth({0.0, 0.0, 0.0, 0.0}) == 1e-3);
  }

  SECTION("standard normal samples land near the textbook value") {
    auto s = normal_samples(1000, 0.0, 1.0, 42);
    const double bw = cellmap::silverman_bandwidth(s);
    // 0.9 * 1 * 1000^(-1/5) = 0.2259, up to sampling noise in std/IQR
    REQUIRE(bw == Catch::Approx(0.226).margin(0.03));
  }

  SECTION("scale equivariance above the floor") {
    auto s = normal_samples(400, -3.0, 1.5, 7);
    const double bw = cellmap::silverman_bandwidth(s);
    std::vector<double> scaled = s;
    for (auto& v : scaled) v *= 2.5;
    REQUIRE(cellmap::silverman_bandwidth(scaled) == Catch::Approx(2.5 * bw).epsilon(1e-12));
  }
}

TEST_CASE("cell_cdf") {
  SECTION("gaussian at the mean is one half") {
    REQUIRE(cellmap::cell_cdf(cellmap::fit_gaussian({-6.0, -5.0, -4.0}), -5.0) ==
            Catch::Approx(0.5).margin(1e-12));
  }

  SECTION("kde symmetry point") {
    auto cell = cellmap::fit_kde({-1.0, 1.0});
    REQUIRE(cellmap::cell_cdf(cell, 0.0) == Catch::Approx(0.5).margin(1e-12));
  }

  SECTION("kde worked example with pinned bandwidth") {
    CellModel cell;
    cell.state = CellModel::State::kde;
    cell.samples = {-10.0, -8.0, -6.0};
    cell.count = 3;
    cell.bandwidth = 0.5;
    const double expect =
        (cellmap::detail::std_normal_cdf(2.0) + cellmap::detail::std_normal_cdf(-2.0) +
         cellmap::detail::std_normal_cdf(-6.0)) /
        3.0;
    REQUIRE(cellmap::cell_cdf(cell, -9.0) == Catch::Approx(expect).margin(1e-12));
    REQUIRE(expect == Catch::Approx(1.0 / 3.0).margin(1e-4));
  }

  SECTION("inactive cell throws") {
    REQUIRE_THROWS_AS(cellmap::cell_cdf(CellModel{}, 0.0), cellmap::InactiveCell);
  }

  SECTION("nondecreasing with saturating limits, both forms") {
    auto samples = normal_samples(300, -5.0, 2.0, 9);
    for (const CellModel& cell : {cellmap::fit_gaussian(samples), cellmap::fit_kde(samples)}) {
      double prev = -0.1;
      for (double l = -20.0; l <= 10.0; l += 0.25) {
        const double c = cellmap::cell_cdf(cell, l);
        REQUIRE(c >= prev);
        prev = c;
      }
      REQUIRE(cellmap::cell_cdf(cell, -1e6) == Catch::Approx(0.0).margin(1e-12));
      REQUIRE(cellmap::cell_cdf(cell, 1e6) == Catch::Approx(1.0).margin(1e-12));
    }
  }

  SECTION("kde with vanishing bandwidth converges to the empirical cdf") {
    auto samples = normal_samples(200, 0.0, 1.0, 11);
    CellModel cell;
    cell.state = CellModel::State::kde;
    cell.samples = samples;
    cell.count = samples.size();
    cell.bandwidth = 1e-6;
    const double m = static_cast<double>(samples.size());
    for (double l : {-1.3, -0.2, 0.4, 1.7}) {
      double below = 0.0;
      for (double s : samples) below += s < l ? 1.0 : 0.0;
      REQUIRE(std::fabs(cellmap::cell_cdf(cell, l) - below / m) <= 1.0 / m);
    }
  }

  SECTION("gaussian self-calibration band") {
    // fraction of own samples under the 0.1 quantile stays in [0.02, 0.25]
    auto samples = normal_samples(500, -4.0, 1.3, 13);
    auto cell = cellmap::fit_gaussian(samples);
    double under = 0.0;
    for (double s : samples) under += cellmap::cell_cdf(cell, s) < 0.1 ? 1.0 : 0.0;
    const double frac = under / static_cast<double>(samples.size());
    REQUIRE(frac >= 0.02);
    REQUIRE(frac <= 0.25);
  }
}

TEST_CASE("fitting rules") {
  SECTION("degenerate variance hits the sigma floor") {
    auto cell = cellmap::fit_gaussian({-5.0, -5.0, -5.0});
    REQUIRE(cell.mu == -5.0);
    REQUIRE(cell.sigma == 1e-6);
  }

  SECTION("fit_kde keeps raw samples") {
    auto cell = cellmap::fit_kde({1.0, 2.0, 3.0});
    REQUIRE(cell.samples == std::vector<double>{1.0, 2.0, 3.0});
    REQUIRE(cell.count == 3);
    REQUIRE(cell.bandwidth > 0.0);
  }
}

namespace {

// Minimal deterministic scorer stand-in: a zeroed model gives constant
// scores, so cell sample counts depend only on geometry.
vrnn::VrnnModel tiny_model_for_map() {
  fourhot::FourHotSpec spec;
  spec.roi = {47.5, 49.5, -7.0, -4.0};
  spec.res_lat = 0.1;
  spec.res_lon = 0.1;
  spec.res_sog = 10.0;
  spec.res_cog = 90.0;
  auto m = vrnn::VrnnModel::create(spec, 4, 6, 3);
  return m;
}

fourhot::EncodedTrack track_at(const vrnn::VrnnModel& m, double lat, double lon, std::size_t T,
                               const std::string& id) {
  fourhot::EncodedTrack t;
  t.spec = m.spec;
  t.id = id;
  t.mmsi = 1;
  t.dt = 600;
  for (std::size_t i = 0; i < T; ++i)
    t.states.push_back(fourhot::encode_state({lat, lon, 5.0, 45.0}, m.spec));
  return t;
}

}  // namespace

TEST_CASE("build_cell_map") {
  auto model = tiny_model_for_map();
  const Grid grid{{47.5, 49.5, -7.0, -4.0}, 0.5};

  std::vector<fourhot::EncodedTrack> validation;
  validation.push_back(track_at(model, 47.6, -6.9, 30, "a"));   // cell (0,0)
  validation.push_back(track_at(model, 47.6, -6.9, 25, "b"));   // cell (0,0)
  validation.push_back(track_at(model, 48.8, -5.2, 10, "c"));   // elsewhere, below m_min

  SECTION("threshold rule and conservation") {
    auto map = cellmap::build_cell_map(model, validation, grid, 20, CellForm::gaussian, 1, 5);
    REQUIRE(map.cells.size() == grid.n_cells());
    REQUIRE(map.total_samples() == 65);
    REQUIRE(map.active_count() == 1);
    const auto& active = map.cell(cellmap::cell_of(47.6, -6.9, grid));
    REQUIRE(active.state == CellModel::State::gaussian);
    REQUIRE(active.count == 55);
    const auto& inactive = map.cell(cellmap::cell_of(48.8, -5.2, grid));
    REQUIRE_FALSE(inactive.active());
    REQUIRE(inactive.count == 10);  // observed count kept, no fit
  }

  SECTION("deterministic given seed, forms differ only in payload") {
    auto a = cellmap::build_cell_map(model, validation, grid, 20, CellForm::kde, 2, 5);
    auto b = cellmap::build_cell_map(model, validation, grid, 20, CellForm::kde, 2, 5);
    const auto idx = cellmap::cell_of(47.6, -6.9, grid);
    REQUIRE(a.cell(idx).samples == b.cell(idx).samples);
    REQUIRE(a.cell(idx).bandwidth == b.cell(idx).bandwidth);
  }

  SECTION("empty validation set is rejected") {
    REQUIRE_THROWS_AS(cellmap::build_cell_map(model, {}, grid, 20, CellForm::kde, 1, 5),
                      cellmap::EmptyValidation);
  }
}

TEST_CASE("performance map export and persistence") {
  auto model = tiny_model_for_map();
  const Grid grid{{47.5, 49.5, -7.0, -4.0}, 0.5};
  std::vector<fourhot::EncodedTrack> validation{track_at(model, 47.6, -6.9, 40, "a"),
                                                track_at(model, 48.3, -5.7, 35, "b")};
  auto map = cellmap::build_cell_map(model, validation, grid, 20, CellForm::gaussian, 1, 5);

  const auto dir = std::filesystem::temp_directory_path() / "gtn_cellmap_test";
  std::filesystem::create_directories(dir);

  SECTION("csv is dense with one row per cell and exact values") {
    const std::string path = (dir / "perf.csv").string();
    cellmap::export_performance_map(map, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "cell_row,cell_col,lat_center,lon_center,count,mean,std");
    std::size_t rows = 0, active = 0;
    while (std::getline(in, line)) {
      ++rows;
      if (line.back() != ',') {
        ++active;
        // pull mean back out and compare bitwise via round trip
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        const std::size_t idx = std::stoul(fields[0]) * grid.n_cols() + std::stoul(fields[1]);
        REQUIRE(std::stod(fields[5]) == map.cell(idx).mu);
        REQUIRE(std::stod(fields[6]) == map.cell(idx).sigma);
      }
    }
    REQUIRE(rows == grid.n_cells());
    REQUIRE(active == 2);
  }

  SECTION("container round trip preserves both forms bitwise") {
    auto kde_map = cellmap::build_cell_map(model, validation, grid, 20, CellForm::kde, 1, 5);
    const std::string path = (dir / "map.cmap").string();
    cellmap::save_cellmap(path, kde_map);
    auto loaded = cellmap::load_cellmap(path);
    REQUIRE(loaded.grid == kde_map.grid);
    REQUIRE(loaded.m_min == kde_map.m_min);
    REQUIRE(loaded.cells.size() == kde_map.cells.size());
    for (std::size_t i = 0; i < loaded.cells.size(); ++i) {
      REQUIRE(loaded.cells[i].state == kde_map.cells[i].state);
      REQUIRE(loaded.cells[i].count == kde_map.cells[i].count);
      if (loaded.cells[i].state == CellModel::State::kde) {
        REQUIRE(loaded.cells[i].samples == kde_map.cells[i].samples);
        REQUIRE(loaded.cells[i].bandwidth == kde_map.cells[i].bandwidth);
        const double l = -400.0;
        REQUIRE(cellmap::cell_cdf(loaded.cells[i], l) == cellmap::cell_cdf(kde_map.cells[i], l));
      }
    }
  }
}
