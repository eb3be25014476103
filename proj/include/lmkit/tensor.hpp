#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace lmkit {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

// Dense tensor, up to 3 axes, contiguous row-major doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<long> shape) : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 3)
      throw std::invalid_argument("Tensor: rank must be 1..3");
    long n = 1;
    for (long d : shape_) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dim");
      n *= d;
    }
    data_.assign(static_cast<size_t>(n), 0.0);
  }
  Tensor(long rows, long cols) : Tensor(std::vector<long>{rows, cols}) {}

  static Tensor zeros(long rows, long cols) { return Tensor(rows, cols); }
  static Tensor full(long rows, long cols, double v) {
    Tensor t(rows, cols);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }
  static Tensor from(std::initializer_list<std::initializer_list<double>> rows) {
    long r = static_cast<long>(rows.size());
    long c = r ? static_cast<long>(rows.begin()->size()) : 0;
    Tensor t(r, c);
    long i = 0;
    for (auto& row : rows) {
      if (static_cast<long>(row.size()) != c)
        throw std::invalid_argument("Tensor::from: ragged rows");
      for (double v : row) t.data_[static_cast<size_t>(i++)] = v;
    }
    return t;
  }
  static Tensor row(std::initializer_list<double> vals) {
    Tensor t(1, static_cast<long>(vals.size()));
    long i = 0;
    for (double v : vals) t.data_[static_cast<size_t>(i++)] = v;
    return t;
  }

  const std::vector<long>& shape() const { return shape_; }
  long size() const { return static_cast<long>(data_.size()); }
  // 2-d views; rank-1 tensors read as a single row.
  long rows() const { return shape_.size() >= 2 ? shape_[0] : 1; }
  long cols() const { return shape_.size() >= 2 ? shape_[1] : (shape_.empty() ? 0 : shape_[0]); }

  double& at(long r, long c) { return data_[static_cast<size_t>(r * cols() + c)]; }
  double at(long r, long c) const { return data_[static_cast<size_t>(r * cols() + c)]; }
  double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  MatMap mat() { return MatMap(data_.data(), rows(), cols()); }
  ConstMatMap mat() const { return ConstMatMap(data_.data(), rows(), cols()); }

  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape_[i]);
    return s + "]";
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::vector<long> shape_;
  std::vector<double> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
}

// Trainable tensor with paired gradient and Adagrad accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor accum;
  bool frozen = false;
  double lr_scale = 1.0;

  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), accum(value.shape()) {}
};

class ParameterStore {
 public:
  Parameter& add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    params_.push_back(std::make_unique<Parameter>(name, std::move(init)));
    index_[name] = params_.size() - 1;
    return *params_.back();
  }
  Parameter& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no such parameter: " + name);
    return *params_[it->second];
  }
  const Parameter& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no such parameter: " + name);
    return *params_[it->second];
  }
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  long total_values() const {
    long n = 0;
    for (auto& p : params_) n += p->value.size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace lmkit
