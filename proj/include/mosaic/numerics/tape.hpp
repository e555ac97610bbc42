#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mosaic/numerics/tensor.hpp"

namespace mosaic {

// Reverse-mode tape. Every differentiable op whose inputs require gradients
// appends one entry; backward() replays the entries in reverse order.
// There is one tape per thread.
class Tape {
 public:
  using BackwardFn = std::function<void(TensorImpl& out)>;

  static Tape& current();

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  void record(std::shared_ptr<TensorImpl> out, std::vector<std::shared_ptr<TensorImpl>> inputs,
              BackwardFn fn);
  void backward(const Tensor& root);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::shared_ptr<TensorImpl> out;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  bool recording_ = true;
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(Tape::current().recording()) { Tape::current().set_recording(false); }
  ~NoGradGuard() { Tape::current().set_recording(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Seeds d(root)/d(root) = 1, propagates through the current tape, and clears it.
void backward(const Tensor& root);

// Builds an op result. When recording and any input requires a gradient, the
// result is tracked and `fn` is called during backward with the result's impl
// (whose grad is populated). `fn` must accumulate into inputs whose
// requires_grad flag is set.
Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                   Tape::BackwardFn fn);

}  // namespace mosaic
