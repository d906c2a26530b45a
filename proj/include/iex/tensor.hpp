#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "iex/errors.hpp"

namespace iex {

using Scalar = float;
using ArrayX = Eigen::ArrayXf;
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<MatrixRM>;
using ConstMapMat = Eigen::Map<const MatrixRM>;
using MapVec = Eigen::Map<Eigen::VectorXf>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXf>;

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

// Dense row-major float tensor. Rank is small (<= 4 in practice); all math on
// the flat storage goes through Eigen maps.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_ = ArrayX::Zero(count(shape_));
  }

  Tensor(std::vector<int> shape, ArrayX data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_))
      throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, Scalar v) {
    Tensor t(std::move(shape));
    t.data_.setConstant(v);
    return t;
  }

  static Tensor from(std::vector<int> shape, std::initializer_list<Scalar> vals) {
    Tensor t(std::move(shape));
    if (static_cast<Eigen::Index>(vals.size()) != t.size())
      throw ConfigError("initializer length does not match shape " + shape_str(t.shape_));
    Eigen::Index i = 0;
    for (const Scalar v : vals) t.data_[i++] = v;
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  ArrayX& array() { return data_; }
  const ArrayX& array() const { return data_; }

  Scalar& operator[](Eigen::Index i) { return data_[i]; }
  Scalar operator[](Eigen::Index i) const { return data_[i]; }

  // Reshaping views; row/col product must equal size().
  MapMat mat(Eigen::Index rows, Eigen::Index cols) {
    check_view(rows * cols);
    return MapMat(data_.data(), rows, cols);
  }
  ConstMapMat mat(Eigen::Index rows, Eigen::Index cols) const {
    check_view(rows * cols);
    return ConstMapMat(data_.data(), rows, cols);
  }
  MapVec vec() { return MapVec(data_.data(), data_.size()); }
  ConstMapVec vec() const { return ConstMapVec(data_.data(), data_.size()); }

  Tensor reshaped(std::vector<int> shape) const {
    if (count(shape) != size())
      throw ConfigError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                        " changes element count");
    return Tensor(std::move(shape), data_);
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const { return data_.isFinite().all(); }

  void set_zero() { data_.setZero(); }

  static Eigen::Index count(const std::vector<int>& shape) {
    Eigen::Index n = 1;
    for (const int d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  void check_view(Eigen::Index n) const {
    if (n != data_.size())
      throw ConfigError("matrix view of " + std::to_string(n) + " elements over tensor " +
                        shape_str(shape_));
  }

  std::vector<int> shape_;
  ArrayX data_;
};

// Weights + bias and their gradient accumulators. Gradients always mirror the
// parameter shapes; ops accumulate with += so shared parameters just work.
struct LayerParams {
  Tensor w;
  Tensor b;
  Tensor gw;
  Tensor gb;

  LayerParams() = default;
  LayerParams(std::vector<int> w_shape, std::vector<int> b_shape)
      : w(Tensor::zeros(w_shape)),
        b(Tensor::zeros(b_shape)),
        gw(Tensor::zeros(std::move(w_shape))),
        gb(Tensor::zeros(std::move(b_shape))) {}

  void zero_grad() {
    gw.set_zero();
    gb.set_zero();
  }
};

}  // namespace iex
