#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aevb {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Handle of a node on a particular Tape.
struct NodeRef {
  std::uint64_t tape_id = 0;  // 0 = not attached
  std::uint32_t index = 0;

  bool attached() const { return tape_id != 0; }
};

/// Dense row-major array of doubles. Storage is shared between copies and
/// copied on write, so passing tensors by value is cheap and tensors that are
/// not attached to a tape behave as immutable values.
class Tensor {
 public:
  /// Rank-0 zero.
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_->size(); }

  std::span<const double> data() const& { return {data_->data(), data_->size()}; }
  /// A span into a temporary would dangle.
  std::span<const double> data() const&& = delete;
  /// Mutable view; detaches shared storage first.
  std::span<double> mutable_data();

  double item() const;
  double operator[](std::size_t flat) const { return (*data_)[flat]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool flag) { requires_grad_ = flag; }
  const NodeRef& node() const { return node_; }
  void set_node(NodeRef ref) { node_ = ref; }
  /// Same values, no requires_grad flag and no tape attachment.
  Tensor detach() const;

  /// Same storage, new shape of equal element count (no tape recording).
  Tensor with_shape(Shape shape) const;

  bool same_values(const Tensor& other) const;

 private:
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  bool requires_grad_ = false;
  NodeRef node_{};
};

}  // namespace aevb
