#pragma once

#include <functional>
#include <vector>

#include "lmkit/prng.hpp"
#include "lmkit/tensor.hpp"

namespace lmkit {

class Graph;

// Handle to a node in a Graph. Cheap to copy.
struct Value {
  Graph* g = nullptr;
  long idx = -1;
  const Tensor& tensor() const;
  long rows() const { return tensor().rows(); }
  long cols() const { return tensor().cols(); }
  double scalar() const;
};

// Dynamic reverse-mode tape. Nodes are created in topological order by
// construction; backward() walks them in reverse.
class Graph {
 public:
  explicit Graph(bool grads_enabled = true) : grads_(grads_enabled) {}

  bool grads_enabled() const { return grads_; }

  Value input(Tensor t);
  Value param(Parameter& p);

  Value matmul(Value a, Value b, bool trans_a = false, bool trans_b = false);
  Value affine(Value x, Value w, Value b);  // x*w + row-broadcast b
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);  // elementwise
  Value add_rowwise(Value x, Value b);
  Value scale(Value x, double c);
  Value add_const(Value x, const Tensor& c);  // c is a plain constant, no grad
  Value mul_const(Value x, const Tensor& c);

  Value tanh(Value x);
  Value sigmoid(Value x);
  Value relu(Value x);
  Value softplus(Value x);  // ln(1+e^x), stable

  Value concat_cols(const std::vector<Value>& xs);
  Value concat_rows(const std::vector<Value>& xs);
  Value slice_cols(Value x, long start, long len);

  // rows of `table` gathered in groups of `width` consecutive ids and
  // concatenated: ids.size() must be a multiple of width; output is
  // [ids.size()/width, width*d].
  Value lookup(Value table, std::vector<long> ids, long width = 1);

  // s[i][j] = h.row(i) dot e.row(ids[i*k+j]); output [n, k]
  Value gathered_scores(Value h, Value e, std::vector<long> ids, long k);

  // max over each group of `group` consecutive rows; ties route the gradient
  // to the first maximal row
  Value group_max(Value x, long group);

  Value log_softmax(Value x);  // row-wise
  Value pick(Value x, std::vector<long> col_ids);  // [n,1]
  Value sum_all(Value x);
  Value mean_all(Value x);

  Value dropout(Value x, double p, bool training, Rng& rng);

  // Seeds d(loss)/d(loss)=1 and accumulates into every reachable Parameter's
  // grad. `loss` must be 1x1.
  void backward(Value loss);

  const Tensor& value_of(long idx) const { return nodes_[static_cast<size_t>(idx)].val; }
  const Tensor& grad_of(Value v) const;
  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    std::function<void()> back;  // empty for leaves / grad-disabled graphs
  };

  Value emit(Tensor val, std::function<void()> back);
  Node& node(Value v) { return nodes_[static_cast<size_t>(v.idx)]; }

  bool grads_;
  std::vector<Node> nodes_;

  friend struct Value;
};

}  // namespace lmkit
