#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mosaic {

using Shape = std::vector<std::size_t>;

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised when a forward pass produces NaN or Inf.
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass touches it
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

// Dense row-major array of doubles. Copies share storage; the autodiff tape
// keeps references to the shared implementation.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t dim(std::size_t axis) const;
  // 2-D accessors; a rank-1 tensor is treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return impl_->data; }
  // Only leaves (parameters, freshly built inputs) should be written through this.
  std::span<double> mutable_data() { return impl_->data; }
  std::vector<double> to_vector() const { return impl_->data; }
  double at(std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
  }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  void zero_grad() { impl_->grad.clear(); }

  // Deep copy without gradient tracking.
  Tensor clone() const;
  Tensor detach() const { return clone(); }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

bool all_finite(std::span<const double> values);
void check_finite(const Tensor& t, const std::string& where);

// Exact element-wise equality of shapes and values.
bool bit_equal(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace mosaic
