#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace textclf {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);

// Dense row-major double tensor with an optional gradient buffer.
// Doubles everywhere: gradient verification needs 64-bit precision and the
// models here are small enough that speed is not a concern.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  Tensor(const Tensor& other);
  Tensor& operator=(const Tensor& other);
  Tensor(Tensor&&) noexcept = default;
  Tensor& operator=(Tensor&&) noexcept = default;

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator()(int i) { return data_[static_cast<size_t>(i)]; }
  double operator()(int i) const { return data_[static_cast<size_t>(i)]; }
  double& operator()(int i, int j);
  double operator()(int i, int j) const;
  double& operator()(int i, int j, int k);
  double operator()(int i, int j, int k) const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool flag) { requires_grad_ = flag; }

  bool has_grad() const { return grad_ != nullptr; }
  Tensor& grad();              // creates a zero buffer on first use
  const Tensor& grad() const;  // throws if absent
  void zero_grad();
  void drop_grad();

  double item() const;  // scalar value; throws unless size() == 1
  bool all_finite() const;
  bool same_values(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<double> data_;
  std::unique_ptr<Tensor> grad_;
  bool requires_grad_ = false;
};

enum class EltwiseKind { add, sub, hadamard, tanh, sigmoid };

// Define-by-run computation tape. Each builder computes the forward value
// immediately and records what backward() needs; the tape is rebuilt per
// forward pass, which keeps variable-length recurrences trivial. One
// backward() per tape; reset() to reuse the storage.
//
// Binary elementwise ops require exactly equal shapes. The single sanctioned
// broadcast is add_row_bias (bias vector over matrix rows); everything else
// is a shape error.
class Tape {
 public:
  using NodeId = int;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf bound to a parameter; after backward() its gradient is accumulated
  // into t.grad() when t.requires_grad().
  NodeId param(Tensor& t);
  // Leaf that reads `value` but accumulates gradient into `grad_sink`
  // (used by data-parallel batch workers; sink shape must match).
  NodeId param(const Tensor& value, Tensor& grad_sink);
  NodeId constant(Tensor value);

  // Routes gradients of the listed parameters into external sinks instead of
  // their own grad buffers. Data-parallel workers use this so shared
  // parameter tensors are never written during concurrent forwards.
  void redirect_grads(std::vector<std::pair<const Tensor*, Tensor*>> table);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId elementwise(EltwiseKind kind, NodeId a, NodeId b = -1);

  NodeId scale(NodeId a, double factor);
  NodeId sum(NodeId a);
  NodeId mean(const std::vector<NodeId>& scalars);

  NodeId matmul(NodeId a, NodeId b);
  NodeId vecmat(NodeId v, NodeId m);
  NodeId add_row_bias(NodeId m, NodeId bias);
  NodeId row(NodeId m, int index);
  NodeId concat(const std::vector<NodeId>& vectors);

  NodeId softmax(NodeId logits);
  NodeId conv1d_temporal(NodeId input, NodeId filters, NodeId bias);
  NodeId max_over_time(NodeId feature_map);
  NodeId embedding_lookup(NodeId weights, const std::vector<int>& indices,
                          bool mask_pad_row);
  NodeId cross_entropy(NodeId probs, int label);

  const Tensor& value(NodeId id) const;
  const Tensor& grad(NodeId id) const;  // valid after backward()

  void backward(NodeId loss);
  void reset();
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  enum class Op : uint8_t {
    leaf,
    add,
    sub,
    hadamard,
    tanh,
    sigmoid,
    scale,
    sum,
    mean,
    matmul,
    vecmat,
    add_row_bias,
    row,
    concat,
    softmax,
    conv1d,
    max_over_time,
    embedding,
    cross_entropy,
  };

  struct Node {
    Op op = Op::leaf;
    std::vector<NodeId> parents;
    std::vector<int> iaux;  // row index / label / argmaxes / token indices / offsets
    double daux = 0.0;      // scale factor
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    Tensor* grad_sink = nullptr;  // leaves only
    bool mask_pad = false;        // embedding only
  };

  const Node& node(NodeId id) const;
  NodeId push(Node node, const char* op_name);
  bool parents_need_grad(const Node& node) const;
  void accumulate_parent(Node& parent, const Tensor& contribution);

  std::vector<Node> nodes_;
  std::vector<std::pair<const Tensor*, Tensor*>> redirects_;
  bool consumed_ = false;
};

// Max relative finite-difference error over every coordinate of `params`.
// `build_loss` must rebuild the full forward pass from the current parameter
// values on the given tape and return a scalar node. Relative error is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const std::function<Tape::NodeId(Tape&)>& build_loss,
                  const std::vector<Tensor*>& params, double eps = 1e-5);

}  // namespace textclf
