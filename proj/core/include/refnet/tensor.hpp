#pragma once

#include <memory>
#include <string>
#include <vector>

namespace refnet {

// Dense row-major tensor of 64-bit reals with an optional gradient buffer.
// Rank is 1 (vector) or 2 (matrix); a scalar is a vector of size 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape_in);

  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until ensure_grad(); same size as values after
  bool requires_grad = false;

  int size() const { return static_cast<int>(values.size()); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  bool is_scalar() const { return size() == 1; }
  bool is_matrix() const { return shape.size() == 2; }

  double& at(int i) { return values[i]; }
  double at(int i) const { return values[i]; }
  double& at(int r, int c) { return values[static_cast<size_t>(r) * shape[1] + c]; }
  double at(int r, int c) const { return values[static_cast<size_t>(r) * shape[1] + c]; }

  void ensure_grad();
  void zero_grad();
  bool all_finite() const;
  std::string shape_str() const;
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape);
TensorPtr make_vector(std::vector<double> v);
TensorPtr make_scalar(double v);

}  // namespace refnet
