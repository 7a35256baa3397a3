#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace s2v {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array. Rank-2 tensors are used as channels x length feature maps.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  std::vector<T>& storage() noexcept { return values_; }
  const std::vector<T>& storage() const noexcept { return values_; }

  T& operator[](std::size_t i) noexcept { return values_[i]; }
  const T& operator[](std::size_t i) const noexcept { return values_[i]; }

  // Feature-map view (rank 2).
  std::size_t channels() const { return dim(0); }
  std::size_t length() const { return dim(1); }
  T& at(std::size_t c, std::size_t n) { return values_[c * shape_[1] + n]; }
  const T& at(std::size_t c, std::size_t n) const { return values_[c * shape_[1] + n]; }
  std::span<T> row(std::size_t c) { return std::span<T>(values_).subspan(c * shape_[1], shape_[1]); }
  std::span<const T> row(std::size_t c) const {
    return std::span<const T>(values_).subspan(c * shape_[1], shape_[1]);
  }

  void fill(T value);
  void reshape(Shape shape);

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(values_.begin(), values_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<T> values_;
};

/// A channels x length map of samples; the container every layer consumes and produces.
template <typename T>
using FeatureMap = Tensor<T>;

template <typename T>
FeatureMap<T> feature_map(std::size_t channels, std::size_t length, std::vector<T> values) {
  return FeatureMap<T>({channels, length}, std::move(values));
}

template <typename T>
FeatureMap<T> feature_map(std::size_t channels, std::size_t length) {
  return FeatureMap<T>({channels, length});
}

/// Throws ShapeError unless `t` has exactly `expected` shape. `what` prefixes the message.
template <typename T>
void require_shape(const Tensor<T>& t, const Shape& expected, const char* what);

template <typename T>
bool all_finite(const Tensor<T>& t);

template <typename T>
double max_abs_difference(const Tensor<T>& a, const Tensor<T>& b);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace s2v
