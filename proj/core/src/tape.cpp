#include "refnet/tape.hpp"

#include "refnet/error.hpp"

namespace refnet {

void backward(Tape& tape, const TensorPtr& loss) {
  if (!loss || !loss->is_scalar()) {
    throw UsageError("backward: loss must be a scalar tensor, got shape " +
                     (loss ? loss->shape_str() : std::string("null")));
  }
  // Reset adjoints of intermediates so repeated calls re-propagate from a
  // fresh seed while leaf grads keep accumulating. An empty grad buffer is
  // treated as all-zero, which also lets the sweep skip dead branches.
  for (auto& node : tape.nodes_) node.out->grad.clear();
  loss->ensure_grad();
  loss->grad[0] += 1.0;
  for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) {
    if (it->out->grad.empty()) continue;
    it->back();
  }
}

}  // namespace refnet
