#include "refnet/attention.hpp"

#include "refnet/error.hpp"

namespace refnet {

AttentionParams make_attention(ParameterStore& store, const std::string& prefix, int query_dim,
                               int key_dim, int att_dim, std::mt19937_64& rng) {
  AttentionParams p;
  p.W_query = store.create(prefix + ".W_query", {att_dim, query_dim}, {Init::UniformFanIn}, rng);
  p.W_key = store.create(prefix + ".W_key", {key_dim, att_dim}, {Init::UniformFanIn}, rng);
  p.v = store.create(prefix + ".v", {att_dim}, {Init::UniformFanIn}, rng);
  return p;
}

PreparedKeys prepare_keys(Tape* tape, const AttentionParams& params, const TensorPtr& keys) {
  if (!keys->is_matrix()) throw ConfigError("prepare_keys: keys must be a matrix");
  return {keys, matmul(tape, keys, params.W_key)};
}

AttendResult attend_prepared(Tape* tape, const AttentionParams& params, const PreparedKeys& keys,
                             const TensorPtr& query, const std::vector<uint8_t>& mask) {
  auto q_proj = matmul(tape, params.W_query, query);
  auto scores = matmul(tape, tanh(tape, broadcast_add_row(tape, keys.proj, q_proj)), params.v);
  auto weights = masked_softmax(tape, scores, mask);
  auto context = matmul(tape, weights, keys.keys);
  return {weights, context};
}

AttendResult attend(Tape* tape, const TensorPtr& query, const TensorPtr& keys,
                    const std::vector<uint8_t>& mask, const AttentionParams& params) {
  return attend_prepared(tape, params, prepare_keys(tape, params, keys), query, mask);
}

}  // namespace refnet
