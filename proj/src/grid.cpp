#include "scintikit/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scintikit/errors.hpp"

namespace scintikit {

Grid::Grid(std::vector<double> extents, std::vector<std::size_t> cells)
    : extents_(std::move(extents)), cells_(std::move(cells)) {
  if (extents_.empty() || extents_.size() > 2 || extents_.size() != cells_.size())
    throw ValidationError("grid: dimension must be 1 or 2 with one cell count per axis");
  count_ = 1;
  cell_volume_ = 1.0;
  for (std::size_t a = 0; a < extents_.size(); ++a) {
    if (!(extents_[a] > 0.0) || !std::isfinite(extents_[a]))
      throw ValidationError("grid: extent along axis " + std::to_string(a) +
                            " must be positive");
    if (cells_[a] < 2)
      throw ValidationError("grid: at least 2 cells per axis are required");
    spacing_.push_back(extents_[a] / static_cast<double>(cells_[a]));
    count_ *= cells_[a];
    cell_volume_ *= spacing_[a];
  }

  const std::size_t nx = cells_[0];
  const std::size_t ny = extents_.size() == 2 ? cells_[1] : 1;
  const double hx = spacing_[0];
  const double hy = extents_.size() == 2 ? spacing_[1] : 1.0;
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i + 1 < nx; ++i)
      faces_.push_back({index(i, j), index(i + 1, j), 0, hy, hx});
  if (extents_.size() == 2)
    for (std::size_t j = 0; j + 1 < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i)
        faces_.push_back({index(i, j), index(i, j + 1), 1, hx, hy});
}

std::shared_ptr<const Grid> Grid::interval(double length, std::size_t cells) {
  return std::make_shared<const Grid>(std::vector<double>{length},
                                      std::vector<std::size_t>{cells});
}

std::shared_ptr<const Grid> Grid::rectangle(double lx, double ly, std::size_t nx,
                                            std::size_t ny) {
  return std::make_shared<const Grid>(std::vector<double>{lx, ly},
                                      std::vector<std::size_t>{nx, ny});
}

double Grid::volume() const {
  double v = 1.0;
  for (double e : extents_) v *= e;
  return v;
}

double Grid::diameter() const {
  double s = 0.0;
  for (double e : extents_) s += e * e;
  return std::sqrt(s);
}

Point Grid::center(std::size_t cell) const {
  const std::size_t i = cell % cells_[0];
  const std::size_t j = cell / cells_[0];
  Point p{(static_cast<double>(i) + 0.5) * spacing_[0], 0.0};
  if (dimension() == 2) p[1] = (static_cast<double>(j) + 0.5) * spacing_[1];
  return p;
}

std::size_t Grid::locate(const Point& x) const {
  auto axis_index = [&](int a) {
    const double s = std::floor(x[a] / spacing_[a]);
    const double hi = static_cast<double>(cells_[a] - 1);
    return static_cast<std::size_t>(std::clamp(s, 0.0, hi));
  };
  return dimension() == 2 ? index(axis_index(0), axis_index(1)) : axis_index(0);
}

Field::Field(std::shared_ptr<const Grid> grid, double value)
    : grid_(std::move(grid)), values_(grid_->cell_count(), value) {}

Field::Field(std::shared_ptr<const Grid> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->cell_count())
    throw ValidationError("field: value count " + std::to_string(values_.size()) +
                          " does not match cell count " +
                          std::to_string(grid_->cell_count()));
}

Field Field::sample(std::shared_ptr<const Grid> grid,
                    const std::function<double(const Point&)>& f) {
  std::vector<double> v(grid->cell_count());
  for (std::size_t c = 0; c < v.size(); ++c) v[c] = f(grid->center(c));
  return Field(std::move(grid), std::move(v));
}

double Field::min() const { return *std::min_element(values_.begin(), values_.end()); }
double Field::max() const { return *std::max_element(values_.begin(), values_.end()); }
double Field::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double integrate_field(const Field& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s * f.grid().cell_volume();
}

double mean_field(const Field& f) { return integrate_field(f) / f.grid().volume(); }

double CarrierState::min_density() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& n : densities) m = std::min(m, n.min());
  return m;
}

std::vector<double> CarrierState::cell_densities(std::size_t cell) const {
  std::vector<double> out(densities.size());
  for (std::size_t i = 0; i < densities.size(); ++i) out[i] = densities[i][cell];
  return out;
}

}  // namespace scintikit
