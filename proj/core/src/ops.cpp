#include "refnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "refnet/error.hpp"

namespace refnet {

namespace testing {
bool corrupt_tanh_backward = false;
}

namespace {

void check_same_shape(const char* op, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape) {
    throw ConfigError(std::string(op) + ": shape mismatch " + a->shape_str() + " vs " +
                      b->shape_str());
  }
}

void check_finite(const char* op, const Tensor& t) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite output");
}

bool wants_grad(Tape* tape, const TensorPtr& a) { return tape && a->requires_grad; }
bool wants_grad(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  return tape && (a->requires_grad || b->requires_grad);
}

void accumulate(const TensorPtr& t, int i, double g) {
  if (!t->requires_grad) return;
  t->ensure_grad();
  t->grad[i] += g;
}

}  // namespace

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape("add", a, b);
  auto out = make_tensor(a->shape);
  for (int i = 0; i < out->size(); ++i) out->values[i] = a->values[i] + b->values[i];
  check_finite("add", *out);
  if (wants_grad(tape, a, b)) {
    out->requires_grad = true;
    tape->record(out, [a, b, out] {
      for (int i = 0; i < out->size(); ++i) {
        accumulate(a, i, out->grad[i]);
        accumulate(b, i, out->grad[i]);
      }
    });
  }
  return out;
}

TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape("sub", a, b);
  auto out = make_tensor(a->shape);
  for (int i = 0; i < out->size(); ++i) out->values[i] = a->values[i] - b->values[i];
  check_finite("sub", *out);
  if (wants_grad(tape, a, b)) {
    out->requires_grad = true;
    tape->record(out, [a, b, out] {
      for (int i = 0; i < out->size(); ++i) {
        accumulate(a, i, out->grad[i]);
        accumulate(b, i, -out->grad[i]);
      }
    });
  }
  return out;
}

TensorPtr hadamard(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape("hadamard", a, b);
  auto out = make_tensor(a->shape);
  for (int i = 0; i < out->size(); ++i) out->values[i] = a->values[i] * b->values[i];
  check_finite("hadamard", *out);
  if (wants_grad(tape, a, b)) {
    out->requires_grad = true;
    tape->record(out, [a, b, out] {
      for (int i = 0; i < out->size(); ++i) {
        accumulate(a, i, b->values[i] * out->grad[i]);
        accumulate(b, i, a->values[i] * out->grad[i]);
      }
    });
  }
  return out;
}

TensorPtr minimum(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape("minimum", a, b);
  auto out = make_tensor(a->shape);
  for (int i = 0; i < out->size(); ++i) out->values[i] = std::min(a->values[i], b->values[i]);
  if (wants_grad(tape, a, b)) {
    out->requires_grad = true;
    tape->record(out, [a, b, out] {
      for (int i = 0; i < out->size(); ++i) {
        if (a->values[i] <= b->values[i]) {
          accumulate(a, i, out->grad[i]);
        } else {
          accumulate(b, i, out->grad[i]);
        }
      }
    });
  }
  return out;
}

TensorPtr tanh(Tape* tape, const TensorPtr& a) {
  auto out = make_tensor(a->shape);
  for (int i = 0; i < out->size(); ++i) out->values[i] = std::tanh(a->values[i]);
  if (wants_grad(tape, a)) {
    out->requires_grad = true;
    tape->record(out, [a, out] {
      const double skew = testing::corrupt_tanh_backward ? 1.01 : 1.0;
      for (int i = 0; i < out->size(); ++i) {
        double y = out->values[i];
        accumulate(a, i, skew * (1.0 - y * y) * out->grad[i]);
      }
    });
  }
  return out;
}

TensorPtr sigmoid(Tape* tape, const TensorPtr& a) {
  auto out = make_tensor(a->shape);
  for (int i = 0; i < out->size(); ++i) {
    double x = a->values[i];
    out->values[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  if (wants_grad(tape, a)) {
    out->requires_grad = true;
    tape->record(out, [a, out] {
      for (int i = 0; i < out->size(); ++i) {
        double y = out->values[i];
        accumulate(a, i, y * (1.0 - y) * out->grad[i]);
      }
    });
  }
  return out;
}

TensorPtr log(Tape* tape, const TensorPtr& a) {
  auto out = make_tensor(a->shape);
  for (int i = 0; i < out->size(); ++i) {
    if (a->values[i] <= 0.0) throw NumericError("log: non-positive input");
    out->values[i] = std::log(a->values[i]);
  }
  check_finite("log", *out);
  if (wants_grad(tape, a)) {
    out->requires_grad = true;
    tape->record(out, [a, out] {
      for (int i = 0; i < out->size(); ++i) accumulate(a, i, out->grad[i] / a->values[i]);
    });
  }
  return out;
}

TensorPtr scale(Tape* tape, const TensorPtr& a, const TensorPtr& s) {
  if (!s->is_scalar()) throw ConfigError("scale: scaling factor must be scalar, got " + s->shape_str());
  auto out = make_tensor(a->shape);
  double c = s->values[0];
  for (int i = 0; i < out->size(); ++i) out->values[i] = a->values[i] * c;
  check_finite("scale", *out);
  if (wants_grad(tape, a, s)) {
    out->requires_grad = true;
    tape->record(out, [a, s, out] {
      double c = s->values[0];
      double ds = 0.0;
      for (int i = 0; i < out->size(); ++i) {
        accumulate(a, i, c * out->grad[i]);
        ds += a->values[i] * out->grad[i];
      }
      accumulate(s, 0, ds);
    });
  }
  return out;
}

TensorPtr scale_const(Tape* tape, const TensorPtr& a, double c) {
  auto out = make_tensor(a->shape);
  for (int i = 0; i < out->size(); ++i) out->values[i] = a->values[i] * c;
  check_finite("scale_const", *out);
  if (wants_grad(tape, a)) {
    out->requires_grad = true;
    tape->record(out, [a, c, out] {
      for (int i = 0; i < out->size(); ++i) accumulate(a, i, c * out->grad[i]);
    });
  }
  return out;
}

TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  const bool a_mat = a->is_matrix();
  const bool b_mat = b->is_matrix();
  const int ar = a_mat ? a->shape[0] : 1;
  const int ak = a_mat ? a->shape[1] : a->shape[0];
  const int bk = b_mat ? b->shape[0] : b->shape[0];
  const int bc = b_mat ? b->shape[1] : 1;
  if (ak != bk) {
    throw ConfigError("matmul: inner dimensions differ, " + a->shape_str() + " vs " +
                      b->shape_str());
  }

  TensorPtr out;
  if (a_mat && b_mat) {
    out = make_tensor({ar, bc});
  } else if (a_mat) {
    out = make_tensor({ar});
  } else if (b_mat) {
    out = make_tensor({bc});
  } else {
    out = make_tensor({1});
  }

  for (int i = 0; i < ar; ++i) {
    for (int j = 0; j < bc; ++j) {
      double acc = 0.0;
      for (int k = 0; k < ak; ++k) {
        acc += a->values[static_cast<size_t>(i) * ak + k] *
               b->values[static_cast<size_t>(k) * bc + j];
      }
      out->values[static_cast<size_t>(i) * bc + j] = acc;
    }
  }
  check_finite("matmul", *out);

  if (wants_grad(tape, a, b)) {
    out->requires_grad = true;
    tape->record(out, [a, b, out, ar, ak, bc] {
      // dA = G B^T, dB = A^T G, specialized over the flattened layout so all
      // four shape cases share one rule.
      if (a->requires_grad) {
        a->ensure_grad();
        for (int i = 0; i < ar; ++i) {
          for (int k = 0; k < ak; ++k) {
            double acc = 0.0;
            for (int j = 0; j < bc; ++j) {
              acc += out->grad[static_cast<size_t>(i) * bc + j] *
                     b->values[static_cast<size_t>(k) * bc + j];
            }
            a->grad[static_cast<size_t>(i) * ak + k] += acc;
          }
        }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int k = 0; k < ak; ++k) {
          for (int j = 0; j < bc; ++j) {
            double acc = 0.0;
            for (int i = 0; i < ar; ++i) {
              acc += a->values[static_cast<size_t>(i) * ak + k] *
                     out->grad[static_cast<size_t>(i) * bc + j];
            }
            b->grad[static_cast<size_t>(k) * bc + j] += acc;
          }
        }
      }
    });
  }
  return out;
}

TensorPtr concat(Tape* tape, const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw ConfigError("concat: no inputs");
  int total = 0;
  bool need = false;
  for (const auto& p : parts) {
    if (p->is_matrix()) throw ConfigError("concat: expects vectors, got " + p->shape_str());
    total += p->size();
    need |= p->requires_grad;
  }
  auto out = make_tensor({total});
  int off = 0;
  for (const auto& p : parts) {
    std::copy(p->values.begin(), p->values.end(), out->values.begin() + off);
    off += p->size();
  }
  if (tape && need) {
    out->requires_grad = true;
    tape->record(out, [parts, out] {
      int off = 0;
      for (const auto& p : parts) {
        for (int i = 0; i < p->size(); ++i) accumulate(p, i, out->grad[off + i]);
        off += p->size();
      }
    });
  }
  return out;
}

TensorPtr slice(Tape* tape, const TensorPtr& v, int start, int len) {
  if (v->is_matrix()) throw ConfigError("slice: expects a vector, got " + v->shape_str());
  if (start < 0 || len <= 0 || start + len > v->size()) {
    throw UsageError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of bounds for " + v->shape_str());
  }
  auto out = make_tensor({len});
  std::copy(v->values.begin() + start, v->values.begin() + start + len, out->values.begin());
  if (wants_grad(tape, v)) {
    out->requires_grad = true;
    tape->record(out, [v, out, start, len] {
      for (int i = 0; i < len; ++i) accumulate(v, start + i, out->grad[i]);
    });
  }
  return out;
}

TensorPtr pad_to(Tape* tape, const TensorPtr& v, int new_len) {
  if (v->is_matrix()) throw ConfigError("pad_to: expects a vector, got " + v->shape_str());
  if (new_len < v->size()) throw UsageError("pad_to: new length shorter than input");
  auto out = make_tensor({new_len});
  std::copy(v->values.begin(), v->values.end(), out->values.begin());
  if (wants_grad(tape, v)) {
    out->requires_grad = true;
    tape->record(out, [v, out] {
      for (int i = 0; i < v->size(); ++i) accumulate(v, i, out->grad[i]);
    });
  }
  return out;
}

TensorPtr stack_rows(Tape* tape, const std::vector<TensorPtr>& rows) {
  if (rows.empty()) throw ConfigError("stack_rows: no rows");
  const int n = rows[0]->size();
  bool need = false;
  for (const auto& r : rows) {
    if (r->is_matrix() || r->size() != n) {
      throw ConfigError("stack_rows: row shape mismatch " + rows[0]->shape_str() + " vs " +
                        r->shape_str());
    }
    need |= r->requires_grad;
  }
  auto out = make_tensor({static_cast<int>(rows.size()), n});
  for (size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i]->values.begin(), rows[i]->values.end(), out->values.begin() + i * n);
  }
  if (tape && need) {
    out->requires_grad = true;
    tape->record(out, [rows, out, n] {
      for (size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < n; ++j) accumulate(rows[i], j, out->grad[i * n + j]);
      }
    });
  }
  return out;
}

TensorPtr row(Tape* tape, const TensorPtr& m, int i) {
  if (!m->is_matrix()) throw ConfigError("row: expects a matrix, got " + m->shape_str());
  if (i < 0 || i >= m->rows()) throw UsageError("row: index " + std::to_string(i) + " out of range");
  const int n = m->cols();
  auto out = make_tensor({n});
  std::copy(m->values.begin() + static_cast<size_t>(i) * n,
            m->values.begin() + static_cast<size_t>(i + 1) * n, out->values.begin());
  if (wants_grad(tape, m)) {
    out->requires_grad = true;
    tape->record(out, [m, out, i, n] {
      for (int j = 0; j < n; ++j) accumulate(m, i * n + j, out->grad[j]);
    });
  }
  return out;
}

TensorPtr mean_rows(Tape* tape, const TensorPtr& m) {
  if (!m->is_matrix()) throw ConfigError("mean_rows: expects a matrix, got " + m->shape_str());
  const int r = m->rows(), n = m->cols();
  auto out = make_tensor({n});
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < n; ++j) out->values[j] += m->at(i, j);
  }
  for (int j = 0; j < n; ++j) out->values[j] /= r;
  if (wants_grad(tape, m)) {
    out->requires_grad = true;
    tape->record(out, [m, out, r, n] {
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < n; ++j) accumulate(m, i * n + j, out->grad[j] / r);
      }
    });
  }
  return out;
}

TensorPtr max_rows(Tape* tape, const TensorPtr& m) {
  if (!m->is_matrix()) throw ConfigError("max_rows: expects a matrix, got " + m->shape_str());
  const int r = m->rows(), n = m->cols();
  auto out = make_tensor({n});
  std::vector<int> arg(n, 0);
  for (int j = 0; j < n; ++j) {
    double best = m->at(0, j);
    for (int i = 1; i < r; ++i) {
      if (m->at(i, j) > best) {
        best = m->at(i, j);
        arg[j] = i;
      }
    }
    out->values[j] = best;
  }
  if (wants_grad(tape, m)) {
    out->requires_grad = true;
    tape->record(out, [m, out, arg, n] {
      for (int j = 0; j < n; ++j) accumulate(m, arg[j] * n + j, out->grad[j]);
    });
  }
  return out;
}

TensorPtr broadcast_add_row(Tape* tape, const TensorPtr& m, const TensorPtr& v) {
  if (!m->is_matrix() || v->is_matrix() || v->size() != m->cols()) {
    throw ConfigError("broadcast_add_row: shape mismatch " + m->shape_str() + " vs " +
                      v->shape_str());
  }
  const int r = m->rows(), n = m->cols();
  auto out = make_tensor({r, n});
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < n; ++j) out->at(i, j) = m->at(i, j) + v->values[j];
  }
  check_finite("broadcast_add_row", *out);
  if (wants_grad(tape, m, v)) {
    out->requires_grad = true;
    tape->record(out, [m, v, out, r, n] {
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < n; ++j) {
          accumulate(m, i * n + j, out->grad[static_cast<size_t>(i) * n + j]);
          accumulate(v, j, out->grad[static_cast<size_t>(i) * n + j]);
        }
      }
    });
  }
  return out;
}

namespace {

TensorPtr softmax_impl(Tape* tape, const TensorPtr& v, const std::vector<uint8_t>* mask) {
  if (v->is_matrix()) throw ConfigError("softmax: expects a vector, got " + v->shape_str());
  const int n = v->size();
  if (mask && static_cast<int>(mask->size()) != n) {
    throw ConfigError("masked_softmax: mask length " + std::to_string(mask->size()) +
                      " vs input " + v->shape_str());
  }
  double hi = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    if (mask && !(*mask)[i]) continue;
    hi = std::max(hi, v->values[i]);
  }
  if (!std::isfinite(hi)) throw UsageError("masked_softmax: all positions masked");

  auto out = make_tensor({n});
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    if (mask && !(*mask)[i]) continue;
    out->values[i] = std::exp(v->values[i] - hi);
    z += out->values[i];
  }
  for (int i = 0; i < n; ++i) out->values[i] /= z;

  if (wants_grad(tape, v)) {
    out->requires_grad = true;
    tape->record(out, [v, out, n] {
      // dx_i = y_i (g_i - <g, y>); masked entries have y_i == 0 so the same
      // rule zeroes them out.
      double inner = 0.0;
      for (int i = 0; i < n; ++i) inner += out->grad[i] * out->values[i];
      for (int i = 0; i < n; ++i) {
        accumulate(v, i, out->values[i] * (out->grad[i] - inner));
      }
    });
  }
  return out;
}

}  // namespace

TensorPtr softmax(Tape* tape, const TensorPtr& v) { return softmax_impl(tape, v, nullptr); }

TensorPtr masked_softmax(Tape* tape, const TensorPtr& v, const std::vector<uint8_t>& mask) {
  return softmax_impl(tape, v, &mask);
}

TensorPtr sum(Tape* tape, const TensorPtr& a) {
  auto out = make_tensor({1});
  for (double x : a->values) out->values[0] += x;
  check_finite("sum", *out);
  if (wants_grad(tape, a)) {
    out->requires_grad = true;
    tape->record(out, [a, out] {
      for (int i = 0; i < a->size(); ++i) accumulate(a, i, out->grad[0]);
    });
  }
  return out;
}

TensorPtr embedding_lookup(Tape* tape, const TensorPtr& table, int id) {
  if (!table->is_matrix()) {
    throw ConfigError("embedding_lookup: table must be a matrix, got " + table->shape_str());
  }
  if (id < 0 || id >= table->rows()) {
    throw UsageError("embedding_lookup: id " + std::to_string(id) + " out of range [0, " +
                     std::to_string(table->rows()) + ")");
  }
  return row(tape, table, id);
}

TensorPtr scatter_sum(Tape* tape, const TensorPtr& w, const std::vector<int>& ids, int out_size) {
  if (w->is_matrix() || static_cast<int>(ids.size()) != w->size()) {
    throw ConfigError("scatter_sum: weights " + w->shape_str() + " vs " +
                      std::to_string(ids.size()) + " ids");
  }
  auto out = make_tensor({out_size});
  for (int i = 0; i < w->size(); ++i) {
    if (ids[i] < 0 || ids[i] >= out_size) throw UsageError("scatter_sum: id out of range");
    out->values[ids[i]] += w->values[i];
  }
  if (wants_grad(tape, w)) {
    out->requires_grad = true;
    tape->record(out, [w, out, ids] {
      for (int i = 0; i < w->size(); ++i) accumulate(w, i, out->grad[ids[i]]);
    });
  }
  return out;
}

TensorPtr negative_log_likelihood(Tape* tape, const TensorPtr& dist, int target) {
  if (dist->is_matrix()) throw ConfigError("negative_log_likelihood: expects a vector");
  if (target < 0 || target >= dist->size()) {
    throw UsageError("negative_log_likelihood: target " + std::to_string(target) +
                     " out of range for " + dist->shape_str());
  }
  const double p = dist->values[target];
  const bool floored = p < kProbFloor;
  auto out = make_scalar(-std::log(floored ? kProbFloor : p));
  check_finite("negative_log_likelihood", *out);
  if (wants_grad(tape, dist)) {
    out->requires_grad = true;
    tape->record(out, [dist, out, target, floored] {
      if (!floored) accumulate(dist, target, -out->grad[0] / dist->values[target]);
    });
  }
  return out;
}

}  // namespace refnet
