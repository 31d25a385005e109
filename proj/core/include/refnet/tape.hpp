#pragma once

#include <functional>
#include <vector>

#include "refnet/tensor.hpp"

namespace refnet {

// Ordered record of primitive operations. Nodes are appended in execution
// order, so inputs of every node precede it; the backward sweep is a single
// reverse pass that visits each node exactly once.
//
// Intermediate (node output) gradients are cleared at the start of every
// backward() call; leaf gradients (parameters, inputs) accumulate across
// calls until explicitly zeroed.
class Tape {
 public:
  void record(TensorPtr out, std::function<void()> backward_fn) {
    nodes_.push_back({std::move(out), std::move(backward_fn)});
  }

  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  friend void backward(Tape& tape, const TensorPtr& loss);

 private:
  struct Node {
    TensorPtr out;
    std::function<void()> back;
  };
  std::vector<Node> nodes_;
};

// Accumulates d(loss)/d(tensor) into the grad buffer of every tensor that
// requires gradients and is reachable from loss. Throws UsageError if loss
// is not scalar.
void backward(Tape& tape, const TensorPtr& loss);

}  // namespace refnet
