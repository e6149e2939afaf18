#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mgtad {

/// Dense row-major grid of doubles. Rank-2 grids are laid out as
/// channels x time, i.e. element (c, t) lives at c * T + t.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<std::size_t> shape, double fill = 0.0);
  Grid(std::vector<std::size_t> shape, std::vector<double> data);

  static Grid zeros_like(const Grid& other) { return Grid(other.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // rank-2 convenience
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  void fill(double v);
  Grid& operator+=(const Grid& other);
  Grid& operator*=(double s);
  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Grid& a, const Grid& b) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// A learnable tensor and its gradient accumulator (same shape).
struct Param {
  Grid value;
  Grid grad;

  Param() = default;
  explicit Param(std::vector<std::size_t> shape) : value(shape), grad(shape) {}

  void zero_grad() { grad.fill(0.0); }
};

using NamedParams = std::vector<std::pair<std::string, Param*>>;

/// Fills with U(-bound, bound) draws.
void fill_uniform(Grid& g, double bound, std::mt19937_64& rng);
/// Fills with N(0, stddev^2) draws.
void fill_normal(Grid& g, double stddev, std::mt19937_64& rng);

}  // namespace mgtad
