#include "mgtad/grid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mgtad {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Grid::Grid(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Grid::Grid(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size()) {
    throw std::invalid_argument("grid shape " + shape_string() + " does not match " +
                                std::to_string(data_.size()) + " values");
  }
}

std::size_t Grid::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for grid " +
                            shape_string());
  }
  return shape_[axis];
}

std::span<double> Grid::row(std::size_t r) {
  const std::size_t n = shape_.back();
  return std::span<double>(data_).subspan(r * n, n);
}

std::span<const double> Grid::row(std::size_t r) const {
  const std::size_t n = shape_.back();
  return std::span<const double>(data_).subspan(r * n, n);
}

void Grid::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Grid& Grid::operator+=(const Grid& other) {
  if (other.shape_ != shape_) {
    throw std::invalid_argument("cannot add grid " + other.shape_string() + " to " +
                                shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Grid& Grid::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

bool Grid::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Grid::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

void fill_uniform(Grid& g, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : g.values()) v = dist(rng);
}

void fill_normal(Grid& g, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : g.values()) v = dist(rng);
}

}  // namespace mgtad
