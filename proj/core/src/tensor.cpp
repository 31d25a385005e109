#include "refnet/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "refnet/error.hpp"

namespace refnet {

Tensor::Tensor(std::vector<int> shape_in) : shape(std::move(shape_in)) {
  size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ConfigError("Tensor: non-positive dimension in shape " + shape_str());
    n *= static_cast<size_t>(d);
  }
  values.assign(n, 0.0);
}

void Tensor::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() { grad.assign(values.size(), 0.0); }

bool Tensor::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

TensorPtr make_tensor(std::vector<int> shape) {
  return std::make_shared<Tensor>(std::move(shape));
}

TensorPtr make_vector(std::vector<double> v) {
  auto t = std::make_shared<Tensor>(std::vector<int>{static_cast<int>(v.size())});
  t->values = std::move(v);
  return t;
}

TensorPtr make_scalar(double v) { return make_vector({v}); }

}  // namespace refnet
