#include "aevb/tape.hpp"

#include <atomic>
#include <string>

#include "aevb/errors.hpp"
#include "kernels.hpp"

namespace aevb {
namespace {

thread_local Tape* g_active = nullptr;
std::atomic<std::uint64_t> g_next_tape_id{1};

void accumulate(std::vector<Tensor>& grads, std::vector<bool>& has, std::int64_t index, Tensor g) {
  if (index < 0) return;
  const auto i = static_cast<std::size_t>(index);
  if (!has[i]) {
    grads[i] = std::move(g);
    has[i] = true;
    return;
  }
  auto dst = grads[i].mutable_data();
  auto src = g.data();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

}  // namespace

const char* prim_name(Prim kind) {
  switch (kind) {
    case Prim::Leaf: return "leaf";
    case Prim::MatMul: return "matmul";
    case Prim::Add: return "add";
    case Prim::Sub: return "sub";
    case Prim::Mul: return "mul";
    case Prim::Div: return "div";
    case Prim::Neg: return "neg";
    case Prim::Exp: return "exp";
    case Prim::Log: return "log";
    case Prim::Sum: return "sum";
    case Prim::SumAxis: return "sum_axis";
    case Prim::Mean: return "mean";
    case Prim::Concat: return "concat";
    case Prim::Slice: return "slice";
    case Prim::Reshape: return "reshape";
    case Prim::Transpose: return "transpose";
    case Prim::Softplus: return "softplus";
    case Prim::Sigmoid: return "sigmoid";
    case Prim::Tanh: return "tanh";
    case Prim::Relu: return "relu";
    case Prim::Softmax: return "softmax";
    case Prim::LogSoftmax: return "log_softmax";
    case Prim::LogSumExp: return "logsumexp";
    case Prim::Dropout: return "dropout";
    case Prim::Clamp: return "clamp";
    case Prim::CbLogNormalizer: return "cb_log_normalizer";
    case Prim::SolveRightUpper: return "solve_right_upper";
  }
  return "?";
}

Tape::Scope::Scope(Tape& tape) : previous_(g_active) { g_active = &tape; }
Tape::Scope::~Scope() { g_active = previous_; }

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

Tape* Tape::active() { return g_active; }

void Tape::watch(Tensor& t) {
  Node leaf;
  leaf.kind = Prim::Leaf;
  leaf.value = t.detach();
  nodes_.push_back(std::move(leaf));
  t.set_requires_grad(true);
  t.set_node({id_, static_cast<std::uint32_t>(nodes_.size() - 1)});
}

std::size_t Tape::record(Node node, const std::vector<const Tensor*>& inputs) {
  node.inputs.clear();
  std::vector<Tensor> saved;
  saved.reserve(inputs.size() + node.saved.size());
  for (const Tensor* in : inputs) {
    node.inputs.push_back(owns(*in) ? static_cast<std::int64_t>(in->node().index) : -1);
    saved.push_back(in->detach());
  }
  for (auto& extra : node.saved) saved.push_back(std::move(extra));
  node.saved = std::move(saved);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

Gradients Tape::backward(const Tensor& loss) const {
  if (loss.numel() != 1)
    throw GraphError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  if (!owns(loss)) throw GraphError("backward: loss is not attached to this tape");

  const std::size_t root = loss.node().index;
  std::vector<Tensor> grads(root + 1);
  std::vector<bool> has(root + 1, false);
  grads[root] = Tensor(loss.shape(), 1.0);
  has[root] = true;

  std::unordered_map<std::uint32_t, Tensor> leaves;
  for (std::size_t i = root + 1; i-- > 0;) {
    if (!has[i]) continue;
    const Node& n = nodes_[i];
    if (n.kind == Prim::Leaf) {
      leaves.emplace(static_cast<std::uint32_t>(i), std::move(grads[i]));
      continue;
    }
    auto input_grads = kernels::backward(n, grads[i]);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      if (n.inputs[k] < 0) continue;
      accumulate(grads, has, n.inputs[k], std::move(input_grads[k]));
    }
    grads[i] = Tensor();  // release
  }
  // Leaves registered on this tape but unreachable from the loss get zeros.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind != Prim::Leaf) continue;
    leaves.try_emplace(static_cast<std::uint32_t>(i), Tensor::zeros_like(nodes_[i].value));
  }
  return Gradients(id_, std::move(leaves));
}

Tensor Gradients::of(const Tensor& leaf) const {
  if (leaf.node().tape_id != tape_id_)
    throw GraphError("Gradients::of: tensor is not a leaf of this tape");
  auto it = by_node_.find(leaf.node().index);
  if (it == by_node_.end()) throw GraphError("Gradients::of: tensor is not a leaf of this tape");
  return it->second;
}

Gradients backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (tape == nullptr) throw GraphError("backward: no active tape");
  return tape->backward(loss);
}

}  // namespace aevb
