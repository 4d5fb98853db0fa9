#include "aevb/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "aevb/errors.hpp"

namespace aevb {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor() : data_(std::make_shared<std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<double>>(shape_numel(shape_), fill)) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("Tensor: zero extent in shape " + shape_str(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<double>>(std::move(values))) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("Tensor: zero extent in shape " + shape_str(shape_));
  if (shape_numel(shape_) != data_->size())
    throw ShapeError("Tensor: shape " + shape_str(shape_) + " does not hold " +
                     std::to_string(data_->size()) + " values");
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Tensor::matrix: ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(values));
}

std::span<double> Tensor::mutable_data() {
  if (data_.use_count() > 1) data_ = std::make_shared<std::vector<double>>(*data_);
  return {data_->data(), data_->size()};
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("Tensor::item on shape " + shape_str(shape_));
  return (*data_)[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("Tensor::at(row, col) on shape " + shape_str(shape_));
  return (*data_)[row * shape_[1] + col];
}

Tensor Tensor::detach() const {
  Tensor out = *this;
  out.requires_grad_ = false;
  out.node_ = {};
  return out;
}

Tensor Tensor::with_shape(Shape shape) const {
  if (shape_numel(shape) != numel())
    throw ShapeError("Tensor::with_shape: " + shape_str(shape_) + " -> " + shape_str(shape));
  Tensor out = detach();
  out.shape_ = std::move(shape);
  return out;
}

bool Tensor::same_values(const Tensor& other) const {
  return shape_ == other.shape_ && std::equal(data_->begin(), data_->end(), other.data_->begin());
}

}  // namespace aevb
