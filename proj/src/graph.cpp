#include "lmkit/graph.hpp"

#include <algorithm>
#include <cmath>

namespace lmkit {

const Tensor& Value::tensor() const { return g->value_of(idx); }

double Value::scalar() const {
  const Tensor& t = tensor();
  if (t.size() != 1) throw std::logic_error("Value::scalar on non-scalar " + t.shape_str());
  return t[0];
}

const Tensor& Graph::grad_of(Value v) const {
  if (!grads_) throw std::logic_error("grad_of: grads disabled on this graph");
  return nodes_[static_cast<size_t>(v.idx)].grad;
}

Value Graph::emit(Tensor val, std::function<void()> back) {
  Node n;
  n.val = std::move(val);
  if (grads_) {
    n.grad = Tensor(n.val.shape());
    n.back = std::move(back);
  }
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<long>(nodes_.size()) - 1};
}

Value Graph::input(Tensor t) { return emit(std::move(t), nullptr); }

Value Graph::param(Parameter& p) {
  Parameter* pp = &p;
  Value v = emit(p.value, nullptr);
  long i = v.idx;
  if (grads_ && !p.frozen) {
    nodes_.back().back = [this, i, pp]() {
      pp->grad.mat() += nodes_[static_cast<size_t>(i)].grad.mat();
    };
  }
  return v;
}

Value Graph::matmul(Value a, Value b, bool trans_a, bool trans_b) {
  const Tensor& A = a.tensor();
  const Tensor& B = b.tensor();
  long am = trans_a ? A.cols() : A.rows(), ak = trans_a ? A.rows() : A.cols();
  long bk = trans_b ? B.cols() : B.rows(), bn = trans_b ? B.rows() : B.cols();
  if (ak != bk)
    throw std::invalid_argument("matmul: inner dims " + A.shape_str() + " vs " + B.shape_str());
  Tensor out(am, bn);
  {
    auto Am = A.mat();
    auto Bm = B.mat();
    if (!trans_a && !trans_b) out.mat() = Am * Bm;
    else if (!trans_a && trans_b) out.mat() = Am * Bm.transpose();
    else if (trans_a && !trans_b) out.mat() = Am.transpose() * Bm;
    else out.mat() = Am.transpose() * Bm.transpose();
  }
  long ai = a.idx, bi = b.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, ai, bi, oi, trans_a, trans_b]() {
      auto G = nodes_[static_cast<size_t>(oi)].grad.mat();
      auto Am = nodes_[static_cast<size_t>(ai)].val.mat();
      auto Bm = nodes_[static_cast<size_t>(bi)].val.mat();
      auto Ag = nodes_[static_cast<size_t>(ai)].grad.mat();
      auto Bg = nodes_[static_cast<size_t>(bi)].grad.mat();
      if (!trans_a && !trans_b) {
        Ag += G * Bm.transpose();
        Bg += Am.transpose() * G;
      } else if (!trans_a && trans_b) {
        Ag += G * Bm;
        Bg += G.transpose() * Am;
      } else if (trans_a && !trans_b) {
        Ag += Bm * G.transpose();
        Bg += Am * G;
      } else {
        Ag += Bm.transpose() * G.transpose();
        Bg += G.transpose() * Am.transpose();
      }
    };
  return v;
}

Value Graph::add(Value a, Value b) {
  check_same_shape(a.tensor(), b.tensor(), "add");
  Tensor out(a.tensor().shape());
  out.mat() = a.tensor().mat() + b.tensor().mat();
  long ai = a.idx, bi = b.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, ai, bi, oi]() {
      auto& g = nodes_[static_cast<size_t>(oi)].grad;
      nodes_[static_cast<size_t>(ai)].grad.mat() += g.mat();
      nodes_[static_cast<size_t>(bi)].grad.mat() += g.mat();
    };
  return v;
}

Value Graph::sub(Value a, Value b) {
  check_same_shape(a.tensor(), b.tensor(), "sub");
  Tensor out(a.tensor().shape());
  out.mat() = a.tensor().mat() - b.tensor().mat();
  long ai = a.idx, bi = b.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, ai, bi, oi]() {
      auto& g = nodes_[static_cast<size_t>(oi)].grad;
      nodes_[static_cast<size_t>(ai)].grad.mat() += g.mat();
      nodes_[static_cast<size_t>(bi)].grad.mat() -= g.mat();
    };
  return v;
}

Value Graph::mul(Value a, Value b) {
  check_same_shape(a.tensor(), b.tensor(), "mul");
  Tensor out(a.tensor().shape());
  out.mat() = a.tensor().mat().cwiseProduct(b.tensor().mat());
  long ai = a.idx, bi = b.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, ai, bi, oi]() {
      auto& g = nodes_[static_cast<size_t>(oi)].grad;
      nodes_[static_cast<size_t>(ai)].grad.mat() +=
          g.mat().cwiseProduct(nodes_[static_cast<size_t>(bi)].val.mat());
      nodes_[static_cast<size_t>(bi)].grad.mat() +=
          g.mat().cwiseProduct(nodes_[static_cast<size_t>(ai)].val.mat());
    };
  return v;
}

Value Graph::add_rowwise(Value x, Value b) {
  const Tensor& X = x.tensor();
  const Tensor& B = b.tensor();
  if (B.rows() != 1 || B.cols() != X.cols())
    throw std::invalid_argument("add_rowwise: " + X.shape_str() + " vs " + B.shape_str());
  Tensor out(X.shape());
  out.mat() = X.mat().rowwise() + B.mat().row(0);
  long xi = x.idx, bi = b.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, bi, oi]() {
      auto& g = nodes_[static_cast<size_t>(oi)].grad;
      nodes_[static_cast<size_t>(xi)].grad.mat() += g.mat();
      nodes_[static_cast<size_t>(bi)].grad.mat().row(0) += g.mat().colwise().sum();
    };
  return v;
}

Value Graph::affine(Value x, Value w, Value b) { return add_rowwise(matmul(x, w), b); }

Value Graph::scale(Value x, double c) {
  Tensor out(x.tensor().shape());
  out.mat() = x.tensor().mat() * c;
  long xi = x.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, oi, c]() {
      nodes_[static_cast<size_t>(xi)].grad.mat() += nodes_[static_cast<size_t>(oi)].grad.mat() * c;
    };
  return v;
}

Value Graph::add_const(Value x, const Tensor& c) {
  check_same_shape(x.tensor(), c, "add_const");
  Tensor out(x.tensor().shape());
  out.mat() = x.tensor().mat() + c.mat();
  long xi = x.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, oi]() {
      nodes_[static_cast<size_t>(xi)].grad.mat() += nodes_[static_cast<size_t>(oi)].grad.mat();
    };
  return v;
}

Value Graph::mul_const(Value x, const Tensor& c) {
  check_same_shape(x.tensor(), c, "mul_const");
  Tensor out(x.tensor().shape());
  out.mat() = x.tensor().mat().cwiseProduct(c.mat());
  long xi = x.idx;
  Tensor csave = c;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, oi, csave = std::move(csave)]() {
      nodes_[static_cast<size_t>(xi)].grad.mat() +=
          nodes_[static_cast<size_t>(oi)].grad.mat().cwiseProduct(csave.mat());
    };
  return v;
}

Value Graph::tanh(Value x) {
  Tensor out(x.tensor().shape());
  out.mat() = x.tensor().mat().array().tanh().matrix();
  long xi = x.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, oi]() {
      auto& o = nodes_[static_cast<size_t>(oi)];
      nodes_[static_cast<size_t>(xi)].grad.mat().array() +=
          o.grad.mat().array() * (1.0 - o.val.mat().array().square());
    };
  return v;
}

Value Graph::sigmoid(Value x) {
  Tensor out(x.tensor().shape());
  out.mat().array() = 1.0 / (1.0 + (-x.tensor().mat().array()).exp());
  long xi = x.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, oi]() {
      auto& o = nodes_[static_cast<size_t>(oi)];
      nodes_[static_cast<size_t>(xi)].grad.mat().array() +=
          o.grad.mat().array() * o.val.mat().array() * (1.0 - o.val.mat().array());
    };
  return v;
}

Value Graph::relu(Value x) {
  Tensor out(x.tensor().shape());
  out.mat() = x.tensor().mat().cwiseMax(0.0);
  long xi = x.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, oi]() {
      auto& o = nodes_[static_cast<size_t>(oi)];
      nodes_[static_cast<size_t>(xi)].grad.mat().array() +=
          o.grad.mat().array() * (nodes_[static_cast<size_t>(xi)].val.mat().array() > 0.0).cast<double>();
    };
  return v;
}

Value Graph::softplus(Value x) {
  Tensor out(x.tensor().shape());
  const Tensor& X = x.tensor();
  for (long i = 0; i < X.size(); ++i) {
    double v = X[i];
    out[i] = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
  long xi = x.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, oi]() {
      auto& xn = nodes_[static_cast<size_t>(xi)];
      xn.grad.mat().array() += nodes_[static_cast<size_t>(oi)].grad.mat().array() /
                               (1.0 + (-xn.val.mat().array()).exp());
    };
  return v;
}

Value Graph::concat_cols(const std::vector<Value>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty");
  long r = xs[0].rows(), c = 0;
  for (auto& x : xs) {
    if (x.rows() != r) throw std::invalid_argument("concat_cols: row mismatch");
    c += x.cols();
  }
  Tensor out(r, c);
  long off = 0;
  std::vector<long> idxs, offs, widths;
  for (auto& x : xs) {
    out.mat().middleCols(off, x.cols()) = x.tensor().mat();
    idxs.push_back(x.idx);
    offs.push_back(off);
    widths.push_back(x.cols());
    off += x.cols();
  }
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, oi, idxs, offs, widths]() {
      auto& g = nodes_[static_cast<size_t>(oi)].grad;
      for (size_t j = 0; j < idxs.size(); ++j)
        nodes_[static_cast<size_t>(idxs[j])].grad.mat() += g.mat().middleCols(offs[j], widths[j]);
    };
  return v;
}

Value Graph::concat_rows(const std::vector<Value>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty");
  long c = xs[0].cols(), r = 0;
  for (auto& x : xs) {
    if (x.cols() != c) throw std::invalid_argument("concat_rows: col mismatch");
    r += x.rows();
  }
  Tensor out(r, c);
  long off = 0;
  std::vector<long> idxs, offs, heights;
  for (auto& x : xs) {
    out.mat().middleRows(off, x.rows()) = x.tensor().mat();
    idxs.push_back(x.idx);
    offs.push_back(off);
    heights.push_back(x.rows());
    off += x.rows();
  }
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, oi, idxs, offs, heights]() {
      auto& g = nodes_[static_cast<size_t>(oi)].grad;
      for (size_t j = 0; j < idxs.size(); ++j)
        nodes_[static_cast<size_t>(idxs[j])].grad.mat() += g.mat().middleRows(offs[j], heights[j]);
    };
  return v;
}

Value Graph::slice_cols(Value x, long start, long len) {
  const Tensor& X = x.tensor();
  if (start < 0 || len < 0 || start + len > X.cols())
    throw std::invalid_argument("slice_cols: out of range for " + X.shape_str());
  Tensor out(X.rows(), len);
  out.mat() = X.mat().middleCols(start, len);
  long xi = x.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, oi, start, len]() {
      nodes_[static_cast<size_t>(xi)].grad.mat().middleCols(start, len) +=
          nodes_[static_cast<size_t>(oi)].grad.mat();
    };
  return v;
}

Value Graph::lookup(Value table, std::vector<long> ids, long width) {
  const Tensor& T = table.tensor();
  if (width < 1 || ids.size() % static_cast<size_t>(width) != 0)
    throw std::invalid_argument("lookup: bad width");
  long n = static_cast<long>(ids.size()) / width;
  long d = T.cols();
  Tensor out(n, width * d);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < width; ++j) {
      long id = ids[static_cast<size_t>(i * width + j)];
      if (id < 0 || id >= T.rows())
        throw std::out_of_range("lookup: id " + std::to_string(id) + " out of range 0.." +
                                std::to_string(T.rows() - 1));
      out.mat().block(i, j * d, 1, d) = T.mat().row(id);
    }
  long ti = table.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, ti, oi, ids = std::move(ids), width, d]() {
      auto& g = nodes_[static_cast<size_t>(oi)].grad;
      auto& tg = nodes_[static_cast<size_t>(ti)].grad;
      long n = g.rows();
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < width; ++j)
          tg.mat().row(ids[static_cast<size_t>(i * width + j)]) += g.mat().block(i, j * d, 1, d);
    };
  return v;
}

Value Graph::gathered_scores(Value h, Value e, std::vector<long> ids, long k) {
  const Tensor& H = h.tensor();
  const Tensor& E = e.tensor();
  if (H.cols() != E.cols())
    throw std::invalid_argument("gathered_scores: dim mismatch " + H.shape_str() + " vs " +
                                E.shape_str());
  long n = H.rows();
  if (static_cast<long>(ids.size()) != n * k)
    throw std::invalid_argument("gathered_scores: ids size != n*k");
  Tensor out(n, k);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < k; ++j) {
      long id = ids[static_cast<size_t>(i * k + j)];
      if (id < 0 || id >= E.rows()) throw std::out_of_range("gathered_scores: id out of range");
      out.at(i, j) = H.mat().row(i).dot(E.mat().row(id));
    }
  long hi = h.idx, ei = e.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, hi, ei, oi, ids = std::move(ids), k]() {
      auto& g = nodes_[static_cast<size_t>(oi)].grad;
      auto& hn = nodes_[static_cast<size_t>(hi)];
      auto& en = nodes_[static_cast<size_t>(ei)];
      long n = g.rows();
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < k; ++j) {
          double gv = g.at(i, j);
          if (gv == 0.0) continue;
          long id = ids[static_cast<size_t>(i * k + j)];
          hn.grad.mat().row(i) += gv * en.val.mat().row(id);
          en.grad.mat().row(id) += gv * hn.val.mat().row(i);
        }
    };
  return v;
}

Value Graph::group_max(Value x, long group) {
  const Tensor& X = x.tensor();
  if (group < 1 || X.rows() % group != 0)
    throw std::invalid_argument("group_max: rows not divisible by group");
  long n = X.rows() / group, d = X.cols();
  Tensor out(n, d);
  std::vector<long> argmax(static_cast<size_t>(n * d));
  for (long i = 0; i < n; ++i)
    for (long c = 0; c < d; ++c) {
      long best = i * group;
      double bv = X.at(best, c);
      for (long r = i * group + 1; r < (i + 1) * group; ++r)
        if (X.at(r, c) > bv) {
          bv = X.at(r, c);
          best = r;
        }
      out.at(i, c) = bv;
      argmax[static_cast<size_t>(i * d + c)] = best;
    }
  long xi = x.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, oi, argmax = std::move(argmax)]() {
      auto& g = nodes_[static_cast<size_t>(oi)].grad;
      auto& xg = nodes_[static_cast<size_t>(xi)].grad;
      for (long i = 0; i < g.rows(); ++i)
        for (long c = 0; c < g.cols(); ++c)
          xg.at(argmax[static_cast<size_t>(i * g.cols() + c)], c) += g.at(i, c);
    };
  return v;
}

Value Graph::log_softmax(Value x) {
  const Tensor& X = x.tensor();
  Tensor out(X.shape());
  for (long i = 0; i < X.rows(); ++i) {
    double mx = X.mat().row(i).maxCoeff();
    double lse = std::log((X.mat().row(i).array() - mx).exp().sum()) + mx;
    out.mat().row(i) = X.mat().row(i).array() - lse;
  }
  long xi = x.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, oi]() {
      auto& o = nodes_[static_cast<size_t>(oi)];
      auto& xg = nodes_[static_cast<size_t>(xi)].grad;
      for (long i = 0; i < o.val.rows(); ++i) {
        double gs = o.grad.mat().row(i).sum();
        xg.mat().row(i).array() +=
            o.grad.mat().row(i).array() - o.val.mat().row(i).array().exp() * gs;
      }
    };
  return v;
}

Value Graph::pick(Value x, std::vector<long> col_ids) {
  const Tensor& X = x.tensor();
  if (static_cast<long>(col_ids.size()) != X.rows())
    throw std::invalid_argument("pick: one column id per row required");
  Tensor out(X.rows(), 1);
  for (long i = 0; i < X.rows(); ++i) {
    long c = col_ids[static_cast<size_t>(i)];
    if (c < 0 || c >= X.cols()) throw std::out_of_range("pick: column out of range");
    out.at(i, 0) = X.at(i, c);
  }
  long xi = x.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, oi, col_ids = std::move(col_ids)]() {
      auto& g = nodes_[static_cast<size_t>(oi)].grad;
      auto& xg = nodes_[static_cast<size_t>(xi)].grad;
      for (long i = 0; i < g.rows(); ++i) xg.at(i, col_ids[static_cast<size_t>(i)]) += g.at(i, 0);
    };
  return v;
}

Value Graph::sum_all(Value x) {
  Tensor out(1, 1);
  out[0] = x.tensor().mat().sum();
  long xi = x.idx;
  Value v = emit(std::move(out), nullptr);
  long oi = v.idx;
  if (grads_)
    node(v).back = [this, xi, oi]() {
      nodes_[static_cast<size_t>(xi)].grad.mat().array() +=
          nodes_[static_cast<size_t>(oi)].grad[0];
    };
  return v;
}

Value Graph::mean_all(Value x) {
  double n = static_cast<double>(x.tensor().size());
  return scale(sum_all(x), 1.0 / n);
}

Value Graph::dropout(Value x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
  if (!training || p == 0.0) return x;  // inference is bit-exact identity
  const Tensor& X = x.tensor();
  Tensor mask(X.shape());
  double keep = 1.0 / (1.0 - p);
  for (long i = 0; i < mask.size(); ++i) mask[i] = rng.bernoulli(p) ? 0.0 : keep;
  return mul_const(x, mask);
}

void Graph::backward(Value loss) {
  if (!grads_) throw std::logic_error("backward: grads disabled on this graph");
  Node& ln = node(loss);
  if (ln.val.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!std::isfinite(ln.val[0])) throw std::runtime_error("backward: non-finite loss");
  ln.grad[0] = 1.0;
  for (long i = loss.idx; i >= 0; --i) {
    auto& b = nodes_[static_cast<size_t>(i)].back;
    if (b) b();
  }
}

}  // namespace lmkit
