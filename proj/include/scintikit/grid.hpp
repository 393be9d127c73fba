#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace scintikit {

/// Interior face between two cells. Boundary faces carry zero flux and are
/// not stored.
struct Face {
  std::size_t lower;  ///< cell on the low-coordinate side
  std::size_t upper;  ///< cell on the high-coordinate side
  int axis;
  double area;      ///< face measure (1 in 1D)
  double distance;  ///< center-to-center distance
};

using Point = std::array<double, 2>;

/// Uniform cell-centered mesh on an interval or a rectangle, in rescaled
/// nondimensional coordinates. Cells are numbered x-fastest.
class Grid {
 public:
  Grid(std::vector<double> extents, std::vector<std::size_t> cells);

  static std::shared_ptr<const Grid> interval(double length, std::size_t cells);
  static std::shared_ptr<const Grid> rectangle(double lx, double ly,
                                               std::size_t nx, std::size_t ny);

  int dimension() const { return static_cast<int>(extents_.size()); }
  double extent(int axis) const { return extents_.at(axis); }
  std::size_t cells(int axis) const { return cells_.at(axis); }
  double spacing(int axis) const { return spacing_.at(axis); }

  std::size_t cell_count() const { return count_; }
  double cell_volume() const { return cell_volume_; }
  double volume() const;
  /// Euclidean diameter (diagonal) of the domain.
  double diameter() const;

  std::size_t index(std::size_t i, std::size_t j = 0) const {
    return i + cells_[0] * j;
  }
  Point center(std::size_t cell) const;
  /// Cell containing a point (clamped to the domain).
  std::size_t locate(const Point& x) const;

  std::span<const Face> faces() const { return faces_; }

 private:
  std::vector<double> extents_;
  std::vector<std::size_t> cells_;
  std::vector<double> spacing_;
  std::size_t count_ = 0;
  double cell_volume_ = 0.0;
  std::vector<Face> faces_;
};

/// One scalar value per cell.
class Field {
 public:
  Field() = default;
  explicit Field(std::shared_ptr<const Grid> grid, double value = 0.0);
  Field(std::shared_ptr<const Grid> grid, std::vector<double> values);

  static Field sample(std::shared_ptr<const Grid> grid,
                      const std::function<double(const Point&)>& f);

  const Grid& grid() const { return *grid_; }
  const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double min() const;
  double max() const;
  double max_abs() const;

 private:
  std::shared_ptr<const Grid> grid_;
  std::vector<double> values_;
};

/// Sum over cells of value times cell volume.
double integrate_field(const Field& f);
/// integrate_field(f) / vol(Omega).
double mean_field(const Field& f);

/// k density fields, the potential, and the time.
struct CarrierState {
  std::vector<Field> densities;
  Field potential;
  double time = 0.0;

  std::size_t species() const { return densities.size(); }
  const Grid& grid() const { return potential.grid(); }
  double min_density() const;
  /// Densities of all species in one cell.
  std::vector<double> cell_densities(std::size_t cell) const;
};

}  // namespace scintikit
