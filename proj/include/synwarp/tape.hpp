#pragma once

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "synwarp/grad.hpp"

// A small explicit tape: values are created eagerly (forward runs at node
// construction), and backward() walks the recorded nodes in reverse, invoking
// the hand-written VJPs through the op dispatch in grad.hpp.

namespace synwarp {

template <typename T>
struct ValueT {
  TensorT<T> val;
  TensorT<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::string op;   // empty for leaves
  ops::OpAttrs attrs;
  std::vector<ValueT<T>*> inputs;

  bool has_grad() const { return grad.numel() > 0; }
  void accumulate(const TensorT<T>& g) {
    check_arg(g.shape() == val.shape(), "gradient shape mismatch for op '" + op + "'");
    if (!has_grad()) {
      grad = g;
      return;
    }
    for (long i = 0; i < grad.numel(); ++i) grad[i] += g[i];
  }
};

template <typename T>
class TapeT {
 public:
  ValueT<T>* leaf(TensorT<T> v, bool requires_grad) {
    ValueT<T>& n = arena_.emplace_back();
    n.val = std::move(v);
    n.requires_grad = requires_grad;
    order_.push_back(&n);
    return &n;
  }

  ValueT<T>* constant(TensorT<T> v) { return leaf(std::move(v), false); }

  ValueT<T>* apply(const std::string& op, std::vector<ValueT<T>*> inputs,
                   const ops::OpAttrs& attrs = {}) {
    std::vector<const TensorT<T>*> raw;
    raw.reserve(inputs.size());
    bool any = false;
    for (ValueT<T>* v : inputs) {
      raw.push_back(&v->val);
      any = any || v->requires_grad;
    }
    ValueT<T>& n = arena_.emplace_back();
    n.val = ops::op_forward<T>(op, std::span<const TensorT<T>* const>(raw.data(), raw.size()), attrs);
    n.requires_grad = any;
    n.op = op;
    n.attrs = attrs;
    n.inputs = std::move(inputs);
    order_.push_back(&n);
    return &n;
  }

  // Metadata-only view change; backward restores the source shape.
  ValueT<T>* reshape(ValueT<T>* x, const Shape& s) {
    ValueT<T>& n = arena_.emplace_back();
    n.val = x->val.reshaped(s);
    n.requires_grad = x->requires_grad;
    n.op = "reshape";
    n.inputs = {x};
    order_.push_back(&n);
    return &n;
  }

  void backward(ValueT<T>* loss) {
    check_arg(loss->val.numel() == 1, "backward: seed must be a scalar");
    loss->accumulate(TensorT<T>::full(loss->val.shape(), T(1)));
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      ValueT<T>* n = *it;
      if (n->op.empty() || !n->has_grad() || !n->requires_grad) continue;
      if (n->op == "reshape") {
        if (n->inputs[0]->requires_grad)
          n->inputs[0]->accumulate(n->grad.reshaped(n->inputs[0]->val.shape()));
        continue;
      }
      const size_t nin = n->inputs.size();
      std::vector<const TensorT<T>*> raw;
      raw.reserve(nin);
      std::unique_ptr<bool[]> needs(new bool[nin]);
      for (size_t i = 0; i < nin; ++i) {
        raw.push_back(&n->inputs[i]->val);
        needs[i] = n->inputs[i]->requires_grad;
      }
      std::vector<TensorT<T>> gs = ops::op_backward<T>(
          n->op, std::span<const TensorT<T>* const>(raw.data(), raw.size()), n->attrs, n->grad,
          std::span<const bool>(needs.get(), nin));
      for (size_t i = 0; i < gs.size(); ++i)
        if (needs[i] && gs[i].numel() > 0) n->inputs[i]->accumulate(gs[i]);
    }
  }

  size_t size() const { return order_.size(); }

 private:
  std::deque<ValueT<T>> arena_;
  std::vector<ValueT<T>*> order_;
};

using Value = ValueT<float>;
using Tape = TapeT<float>;

}  // namespace synwarp
