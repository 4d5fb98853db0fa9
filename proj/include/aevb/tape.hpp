#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "aevb/tensor.hpp"

namespace aevb {

enum class Prim : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Exp,
  Log,
  Sum,
  SumAxis,
  Mean,
  Concat,
  Slice,
  Reshape,
  Transpose,
  Softplus,
  Sigmoid,
  Tanh,
  Relu,
  Softmax,
  LogSoftmax,
  LogSumExp,
  Dropout,
  Clamp,
  CbLogNormalizer,
  SolveRightUpper,
};

const char* prim_name(Prim kind);

class Gradients;

/// Append-only record of primitive applications. Nodes are appended in
/// evaluation order, which is a topological order of the graph.
///
/// A tape becomes the recording target for the current thread while a
/// Tape::Scope for it is alive. Primitives record a node only when at least
/// one input is attached to the active tape.
class Tape {
 public:
  struct Node {
    Prim kind = Prim::Leaf;
    std::vector<std::int64_t> inputs;  // node index or -1 for constants
    std::vector<Tensor> saved;         // input values (and extras) for backward
    Tensor value;
    Shape in_shape;                    // Reshape, SumAxis
    std::size_t axis = 0;
    std::size_t begin = 0, end = 0;    // Slice
    double lo = 0.0, hi = 0.0;         // Clamp
  };

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t index) const { return nodes_.at(index); }

  /// Registers `t` as a differentiable leaf on this tape (in place).
  void watch(Tensor& t);

  /// True when `t` is attached to this tape.
  bool owns(const Tensor& t) const { return t.node().tape_id == id_; }

  /// Appends a node; `inputs` holds the operand tensors in primitive order.
  std::size_t record(Node node, const std::vector<const Tensor*>& inputs);

  /// Reverse-mode sweep from a scalar loss.
  Gradients backward(const Tensor& loss) const;

 private:
  std::uint64_t id_;
  std::vector<Node> nodes_;
};

/// Gradients of a loss with respect to the leaves of a tape.
class Gradients {
 public:
  Gradients(std::uint64_t tape_id, std::unordered_map<std::uint32_t, Tensor> by_node)
      : tape_id_(tape_id), by_node_(std::move(by_node)) {}

  /// Gradient for a watched leaf; zeros when the loss does not depend on it.
  Tensor of(const Tensor& leaf) const;
  const std::unordered_map<std::uint32_t, Tensor>& by_node() const { return by_node_; }

 private:
  std::uint64_t tape_id_;
  std::unordered_map<std::uint32_t, Tensor> by_node_;
};

/// Convenience wrapper around Tape::backward using the active tape.
Gradients backward(const Tensor& loss);

}  // namespace aevb
