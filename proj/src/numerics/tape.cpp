#include "mosaic/numerics/tape.hpp"

namespace mosaic {

Tape& Tape::current() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(std::shared_ptr<TensorImpl> out, std::vector<std::shared_ptr<TensorImpl>> inputs,
                  BackwardFn fn) {
  entries_.push_back(Entry{std::move(out), std::move(inputs), std::move(fn)});
}

void Tape::backward(const Tensor& root) {
  if (root.size() != 1) throw ShapeError("backward() needs a scalar root, got " +
                                         shape_str(root.shape()));
  if (!root.requires_grad()) {
    entries_.clear();
    return;
  }
  root.impl()->ensure_grad();
  root.impl()->grad[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->out->grad.empty()) continue;  // nothing flowed into this node
    it->fn(*it->out);
  }
  // Interior nodes drop their gradients along with the tape entries; leaves keep theirs.
  entries_.clear();
}

void backward(const Tensor& root) { Tape::current().backward(root); }

Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                   Tape::BackwardFn fn) {
  Tensor out(std::move(shape), std::move(values));
  auto& tape = Tape::current();
  if (!tape.recording()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  out.set_requires_grad(true);
  std::vector<std::shared_ptr<TensorImpl>> ins;
  ins.reserve(inputs.size());
  for (const auto& in : inputs) ins.push_back(in.impl());
  tape.record(out.impl(), std::move(ins), std::move(fn));
  return out;
}

}  // namespace mosaic
