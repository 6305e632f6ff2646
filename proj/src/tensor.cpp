#include "textclf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "textclf/errors.hpp"

namespace textclf {

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

namespace {

int64_t checked_size(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must be non-empty");
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0)
      throw std::invalid_argument("tensor dimensions must be positive, got " +
                                  shape_str(shape));
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(checked_size(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (checked_size(shape_) != static_cast<int64_t>(data_.size()))
    throw std::invalid_argument("tensor data length " +
                                std::to_string(data_.size()) +
                                " does not match shape " + shape_str(shape_));
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor::Tensor(const Tensor& other)
    : shape_(other.shape_),
      data_(other.data_),
      requires_grad_(other.requires_grad_) {
  if (other.grad_) grad_ = std::make_unique<Tensor>(*other.grad_);
}

Tensor& Tensor::operator=(const Tensor& other) {
  if (this == &other) return *this;
  shape_ = other.shape_;
  data_ = other.data_;
  requires_grad_ = other.requires_grad_;
  grad_ = other.grad_ ? std::make_unique<Tensor>(*other.grad_) : nullptr;
  return *this;
}

double& Tensor::operator()(int i, int j) {
  return data_[static_cast<size_t>(i) * dim(1) + j];
}

double Tensor::operator()(int i, int j) const {
  return data_[static_cast<size_t>(i) * dim(1) + j];
}

double& Tensor::operator()(int i, int j, int k) {
  return data_[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
}

double Tensor::operator()(int i, int j, int k) const {
  return data_[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
}

Tensor& Tensor::grad() {
  if (!grad_) grad_ = std::make_unique<Tensor>(shape_);
  return *grad_;
}

const Tensor& Tensor::grad() const {
  if (!grad_) throw std::logic_error("tensor has no gradient buffer");
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->data_.begin(), grad_->data_.end(), 0.0);
}

void Tensor::drop_grad() { grad_.reset(); }

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("item() requires a scalar, got shape " +
                                shape_str(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Tensor::same_values(const Tensor& other) const {
  return shape_ == other.shape_ && data_ == other.data_;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

const Tape::Node& Tape::node(NodeId id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("node " + std::to_string(id) +
                                " is not on this tape");
  return nodes_[static_cast<size_t>(id)];
}

Tape::NodeId Tape::push(Node n, const char* op_name) {
  if (consumed_)
    throw std::logic_error(
        "tape already consumed by backward(); reset() before reuse");
  if (!n.value.all_finite())
    throw NumericError(std::string("non-finite values produced by ") + op_name);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

bool Tape::parents_need_grad(const Node& n) const {
  for (NodeId p : n.parents)
    if (nodes_[static_cast<size_t>(p)].needs_grad) return true;
  return false;
}

void Tape::redirect_grads(std::vector<std::pair<const Tensor*, Tensor*>> table) {
  redirects_ = std::move(table);
}

Tape::NodeId Tape::param(Tensor& t) {
  if (t.requires_grad())
    for (const auto& [src, sink] : redirects_)
      if (src == &t) return param(t, *sink);
  if (t.requires_grad()) return param(t, t.grad());
  Node n;
  n.value = t;
  return push(std::move(n), "param");
}

Tape::NodeId Tape::param(const Tensor& value, Tensor& grad_sink) {
  if (grad_sink.shape() != value.shape())
    throw std::invalid_argument("gradient sink shape " +
                                shape_str(grad_sink.shape()) +
                                " does not match parameter shape " +
                                shape_str(value.shape()));
  Node n;
  n.value = value;
  n.needs_grad = true;
  n.grad_sink = &grad_sink;
  return push(std::move(n), "param");
}

Tape::NodeId Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n), "constant");
}

Tape::NodeId Tape::elementwise(EltwiseKind kind, NodeId a, NodeId b) {
  switch (kind) {
    case EltwiseKind::add: return add(a, b);
    case EltwiseKind::sub: return sub(a, b);
    case EltwiseKind::hadamard: return hadamard(a, b);
    case EltwiseKind::tanh: return tanh(a);
    case EltwiseKind::sigmoid: return sigmoid(a);
  }
  throw std::invalid_argument("unknown elementwise kind");
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + " shape mismatch: " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

}  // namespace

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  require_same_shape("add", va, vb);
  Node n;
  n.op = Op::add;
  n.parents = {a, b};
  n.value = Tensor(va.shape());
  for (int64_t i = 0; i < va.size(); ++i)
    n.value.data()[i] = va.data()[i] + vb.data()[i];
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "add");
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  require_same_shape("sub", va, vb);
  Node n;
  n.op = Op::sub;
  n.parents = {a, b};
  n.value = Tensor(va.shape());
  for (int64_t i = 0; i < va.size(); ++i)
    n.value.data()[i] = va.data()[i] - vb.data()[i];
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "sub");
}

Tape::NodeId Tape::hadamard(NodeId a, NodeId b) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  require_same_shape("hadamard", va, vb);
  Node n;
  n.op = Op::hadamard;
  n.parents = {a, b};
  n.value = Tensor(va.shape());
  for (int64_t i = 0; i < va.size(); ++i)
    n.value.data()[i] = va.data()[i] * vb.data()[i];
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "hadamard");
}

Tape::NodeId Tape::tanh(NodeId a) {
  const Tensor& va = node(a).value;
  Node n;
  n.op = Op::tanh;
  n.parents = {a};
  n.value = Tensor(va.shape());
  for (int64_t i = 0; i < va.size(); ++i)
    n.value.data()[i] = std::tanh(va.data()[i]);
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "tanh");
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  const Tensor& va = node(a).value;
  Node n;
  n.op = Op::sigmoid;
  n.parents = {a};
  n.value = Tensor(va.shape());
  for (int64_t i = 0; i < va.size(); ++i) {
    double x = va.data()[i];
    // split by sign so exp never overflows
    n.value.data()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                 : std::exp(x) / (1.0 + std::exp(x));
  }
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "sigmoid");
}

Tape::NodeId Tape::scale(NodeId a, double factor) {
  const Tensor& va = node(a).value;
  Node n;
  n.op = Op::scale;
  n.parents = {a};
  n.daux = factor;
  n.value = Tensor(va.shape());
  for (int64_t i = 0; i < va.size(); ++i)
    n.value.data()[i] = factor * va.data()[i];
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "scale");
}

Tape::NodeId Tape::sum(NodeId a) {
  const Tensor& va = node(a).value;
  double total = 0.0;
  for (int64_t i = 0; i < va.size(); ++i) total += va.data()[i];
  Node n;
  n.op = Op::sum;
  n.parents = {a};
  n.value = Tensor::scalar(total);
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "sum");
}

Tape::NodeId Tape::mean(const std::vector<NodeId>& scalars) {
  if (scalars.empty())
    throw std::invalid_argument("mean requires at least one input");
  double total = 0.0;
  for (NodeId id : scalars) {
    const Tensor& v = node(id).value;
    if (v.size() != 1)
      throw std::invalid_argument("mean inputs must be scalars, got shape " +
                                  shape_str(v.shape()));
    total += v(0);
  }
  Node n;
  n.op = Op::mean;
  n.parents = scalars;
  n.value = Tensor::scalar(total / static_cast<double>(scalars.size()));
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "mean");
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& va = node(a).value;
  const Tensor& vb = node(b).value;
  if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(0))
    throw std::invalid_argument("matmul shape mismatch: " +
                                shape_str(va.shape()) + " x " +
                                shape_str(vb.shape()));
  const int m = va.dim(0), p = va.dim(1), q = vb.dim(1);
  Node n;
  n.op = Op::matmul;
  n.parents = {a, b};
  n.value = Tensor({m, q});
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < p; ++k) {
      const double aik = va(i, k);
      for (int j = 0; j < q; ++j) n.value(i, j) += aik * vb(k, j);
    }
  }
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "matmul");
}

Tape::NodeId Tape::vecmat(NodeId v, NodeId m) {
  const Tensor& vv = node(v).value;
  const Tensor& vm = node(m).value;
  if (vv.rank() != 1 || vm.rank() != 2 || vv.dim(0) != vm.dim(0))
    throw std::invalid_argument("vecmat shape mismatch: " +
                                shape_str(vv.shape()) + " x " +
                                shape_str(vm.shape()));
  const int p = vm.dim(0), q = vm.dim(1);
  Node n;
  n.op = Op::vecmat;
  n.parents = {v, m};
  n.value = Tensor({q});
  for (int i = 0; i < p; ++i) {
    const double vi = vv(i);
    for (int j = 0; j < q; ++j) n.value(j) += vi * vm(i, j);
  }
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "vecmat");
}

Tape::NodeId Tape::add_row_bias(NodeId m, NodeId bias) {
  const Tensor& vm = node(m).value;
  const Tensor& vb = node(bias).value;
  if (vm.rank() != 2 || vb.rank() != 1 || vb.dim(0) != vm.dim(1))
    throw std::invalid_argument("add_row_bias shape mismatch: " +
                                shape_str(vm.shape()) + " + " +
                                shape_str(vb.shape()));
  Node n;
  n.op = Op::add_row_bias;
  n.parents = {m, bias};
  n.value = Tensor(vm.shape());
  const int rows = vm.dim(0), cols = vm.dim(1);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) n.value(i, j) = vm(i, j) + vb(j);
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "add_row_bias");
}

Tape::NodeId Tape::row(NodeId m, int index) {
  const Tensor& vm = node(m).value;
  if (vm.rank() != 2)
    throw std::invalid_argument("row requires a matrix, got shape " +
                                shape_str(vm.shape()));
  if (index < 0 || index >= vm.dim(0))
    throw std::invalid_argument("row index " + std::to_string(index) +
                                " out of range for shape " +
                                shape_str(vm.shape()));
  const int cols = vm.dim(1);
  Node n;
  n.op = Op::row;
  n.parents = {m};
  n.iaux = {index};
  n.value = Tensor({cols});
  for (int j = 0; j < cols; ++j) n.value(j) = vm(index, j);
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "row");
}

Tape::NodeId Tape::concat(const std::vector<NodeId>& vectors) {
  if (vectors.empty())
    throw std::invalid_argument("concat requires at least one input");
  int total = 0;
  for (NodeId id : vectors) {
    const Tensor& v = node(id).value;
    if (v.rank() != 1)
      throw std::invalid_argument("concat inputs must be vectors, got shape " +
                                  shape_str(v.shape()));
    total += v.dim(0);
  }
  Node n;
  n.op = Op::concat;
  n.parents = vectors;
  n.value = Tensor({total});
  int offset = 0;
  for (NodeId id : vectors) {
    const Tensor& v = node(id).value;
    n.iaux.push_back(offset);
    for (int j = 0; j < v.dim(0); ++j) n.value(offset + j) = v(j);
    offset += v.dim(0);
  }
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "concat");
}

Tape::NodeId Tape::softmax(NodeId logits) {
  const Tensor& v = node(logits).value;
  if (v.rank() != 1 || v.dim(0) < 2)
    throw std::invalid_argument(
        "softmax requires a vector of at least 2 logits, got shape " +
        shape_str(v.shape()));
  if (!v.all_finite()) throw NumericError("softmax input is not finite");
  const int c = v.dim(0);
  double max_logit = v(0);
  for (int i = 1; i < c; ++i) max_logit = std::max(max_logit, v(i));
  Node n;
  n.op = Op::softmax;
  n.parents = {logits};
  n.value = Tensor({c});
  double denom = 0.0;
  for (int i = 0; i < c; ++i) {
    n.value(i) = std::exp(v(i) - max_logit);
    denom += n.value(i);
  }
  for (int i = 0; i < c; ++i) n.value(i) /= denom;
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "softmax");
}

Tape::NodeId Tape::conv1d_temporal(NodeId input, NodeId filters, NodeId bias) {
  const Tensor& in = node(input).value;
  const Tensor& w = node(filters).value;
  const Tensor& b = node(bias).value;
  if (in.rank() != 2 || w.rank() != 3)
    throw std::invalid_argument("conv1d_temporal expects input [k x d] and "
                                "filters [F x n x d], got " +
                                shape_str(in.shape()) + " and " +
                                shape_str(w.shape()));
  const int k = in.dim(0), d = in.dim(1);
  const int F = w.dim(0), order = w.dim(1);
  if (w.dim(2) != d)
    throw std::invalid_argument("conv1d_temporal filter depth " +
                                std::to_string(w.dim(2)) +
                                " does not match embedding dimension " +
                                std::to_string(d));
  if (b.rank() != 1 || b.dim(0) != F)
    throw std::invalid_argument("conv1d_temporal bias shape " +
                                shape_str(b.shape()) + " does not match " +
                                std::to_string(F) + " filters");
  if (k < order)
    throw std::invalid_argument("conv1d_temporal sequence too short: k=" +
                                std::to_string(k) + " < filter order n=" +
                                std::to_string(order));
  const int out_len = k - order + 1;
  Node n;
  n.op = Op::conv1d;
  n.parents = {input, filters, bias};
  n.value = Tensor({out_len, F});
  for (int t = 0; t < out_len; ++t) {
    for (int f = 0; f < F; ++f) {
      double acc = b(f);
      for (int i = 0; i < order; ++i) {
        const double* in_row = in.data() + static_cast<size_t>(t + i) * d;
        const double* w_row =
            w.data() + (static_cast<size_t>(f) * order + i) * d;
        for (int j = 0; j < d; ++j) acc += in_row[j] * w_row[j];
      }
      n.value(t, f) = acc;
    }
  }
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "conv1d_temporal");
}

Tape::NodeId Tape::max_over_time(NodeId feature_map) {
  const Tensor& v = node(feature_map).value;
  if (v.rank() != 2)
    throw std::invalid_argument(
        "max_over_time requires a [t x F] feature map, got shape " +
        shape_str(v.shape()));
  const int t_len = v.dim(0), F = v.dim(1);
  Node n;
  n.op = Op::max_over_time;
  n.parents = {feature_map};
  n.value = Tensor({F});
  n.iaux.assign(static_cast<size_t>(F), 0);  // earliest argmax per filter
  for (int f = 0; f < F; ++f) {
    double best = v(0, f);
    int best_t = 0;
    for (int t = 1; t < t_len; ++t) {
      if (v(t, f) > best) {
        best = v(t, f);
        best_t = t;
      }
    }
    n.value(f) = best;
    n.iaux[static_cast<size_t>(f)] = best_t;
  }
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "max_over_time");
}

Tape::NodeId Tape::embedding_lookup(NodeId weights,
                                    const std::vector<int>& indices,
                                    bool mask_pad_row) {
  const Tensor& w = node(weights).value;
  if (w.rank() != 2)
    throw std::invalid_argument("embedding_lookup weights must be [V x d], "
                                "got shape " + shape_str(w.shape()));
  if (indices.empty())
    throw std::invalid_argument("embedding_lookup requires a non-empty index list");
  const int V = w.dim(0), d = w.dim(1);
  Node n;
  n.op = Op::embedding;
  n.parents = {weights};
  n.mask_pad = mask_pad_row;
  n.iaux = indices;
  n.value = Tensor({static_cast<int>(indices.size()), d});
  for (size_t t = 0; t < indices.size(); ++t) {
    const int idx = indices[t];
    if (idx < 0 || idx >= V)
      throw std::invalid_argument("embedding index " + std::to_string(idx) +
                                  " out of range for vocabulary of " +
                                  std::to_string(V));
    if (mask_pad_row && idx == 0) continue;  // pad row stays zero
    for (int j = 0; j < d; ++j)
      n.value(static_cast<int>(t), j) = w(idx, j);
  }
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "embedding_lookup");
}

Tape::NodeId Tape::cross_entropy(NodeId probs, int label) {
  const Tensor& p = node(probs).value;
  if (p.rank() != 1)
    throw std::invalid_argument("cross_entropy expects a probability vector, "
                                "got shape " + shape_str(p.shape()));
  if (label < 0 || label >= p.dim(0))
    throw std::invalid_argument("cross_entropy label " + std::to_string(label) +
                                " out of range for " + std::to_string(p.dim(0)) +
                                " classes");
  Node n;
  n.op = Op::cross_entropy;
  n.parents = {probs};
  n.iaux = {label};
  n.value = Tensor::scalar(-std::log(std::max(p(label), 1e-12)));
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n), "cross_entropy");
}

const Tensor& Tape::value(NodeId id) const { return node(id).value; }

const Tensor& Tape::grad(NodeId id) const {
  const Node& n = node(id);
  if (n.grad.size() == 0)
    throw std::logic_error("node has no gradient; run backward() first");
  return n.grad;
}

void Tape::accumulate_parent(Node& parent, const Tensor& contribution) {
  for (int64_t i = 0; i < contribution.size(); ++i)
    parent.grad.data()[i] += contribution.data()[i];
}

void Tape::backward(NodeId loss) {
  const Node& loss_node = node(loss);
  if (loss_node.value.size() != 1)
    throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                shape_str(loss_node.value.shape()));
  if (consumed_)
    throw std::logic_error("tape already consumed by backward()");
  consumed_ = true;

  for (NodeId id = 0; id <= loss; ++id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.needs_grad) n.grad = Tensor(n.value.shape());
  }
  if (!nodes_[static_cast<size_t>(loss)].needs_grad) return;  // all leaves frozen
  nodes_[static_cast<size_t>(loss)].grad(0) = 1.0;

  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad) continue;
    const Tensor& g = n.grad;
    if (!g.all_finite())
      throw NumericError("non-finite gradient encountered during backward");

    auto parent = [&](size_t i) -> Node& {
      return nodes_[static_cast<size_t>(n.parents[i])];
    };
    auto parent_needs = [&](size_t i) { return parent(i).needs_grad; };

    switch (n.op) {
      case Op::leaf:
        break;  // flushed into grad_sink below
      case Op::add:
        if (parent_needs(0)) accumulate_parent(parent(0), g);
        if (parent_needs(1)) accumulate_parent(parent(1), g);
        break;
      case Op::sub:
        if (parent_needs(0)) accumulate_parent(parent(0), g);
        if (parent_needs(1)) {
          Node& p = parent(1);
          for (int64_t i = 0; i < g.size(); ++i) p.grad.data()[i] -= g.data()[i];
        }
        break;
      case Op::hadamard: {
        const Tensor& va = parent(0).value;
        const Tensor& vb = parent(1).value;
        if (parent_needs(0)) {
          Node& p = parent(0);
          for (int64_t i = 0; i < g.size(); ++i)
            p.grad.data()[i] += g.data()[i] * vb.data()[i];
        }
        if (parent_needs(1)) {
          Node& p = parent(1);
          for (int64_t i = 0; i < g.size(); ++i)
            p.grad.data()[i] += g.data()[i] * va.data()[i];
        }
        break;
      }
      case Op::tanh:
        if (parent_needs(0)) {
          Node& p = parent(0);
          for (int64_t i = 0; i < g.size(); ++i) {
            const double y = n.value.data()[i];
            p.grad.data()[i] += g.data()[i] * (1.0 - y * y);
          }
        }
        break;
      case Op::sigmoid:
        if (parent_needs(0)) {
          Node& p = parent(0);
          for (int64_t i = 0; i < g.size(); ++i) {
            const double y = n.value.data()[i];
            p.grad.data()[i] += g.data()[i] * y * (1.0 - y);
          }
        }
        break;
      case Op::scale:
        if (parent_needs(0)) {
          Node& p = parent(0);
          for (int64_t i = 0; i < g.size(); ++i)
            p.grad.data()[i] += n.daux * g.data()[i];
        }
        break;
      case Op::sum:
        if (parent_needs(0)) {
          Node& p = parent(0);
          for (int64_t i = 0; i < p.grad.size(); ++i) p.grad.data()[i] += g(0);
        }
        break;
      case Op::mean: {
        const double share = g(0) / static_cast<double>(n.parents.size());
        for (size_t i = 0; i < n.parents.size(); ++i)
          if (parent_needs(i)) parent(i).grad(0) += share;
        break;
      }
      case Op::matmul: {
        const Tensor& va = parent(0).value;
        const Tensor& vb = parent(1).value;
        const int m = va.dim(0), p_dim = va.dim(1), q = vb.dim(1);
        if (parent_needs(0)) {
          Node& p = parent(0);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < q; ++j) {
              const double gij = g(i, j);
              for (int k = 0; k < p_dim; ++k) p.grad(i, k) += gij * vb(k, j);
            }
        }
        if (parent_needs(1)) {
          Node& p = parent(1);
          for (int i = 0; i < m; ++i)
            for (int k = 0; k < p_dim; ++k) {
              const double aik = va(i, k);
              for (int j = 0; j < q; ++j) p.grad(k, j) += aik * g(i, j);
            }
        }
        break;
      }
      case Op::vecmat: {
        const Tensor& vv = parent(0).value;
        const Tensor& vm = parent(1).value;
        const int p_dim = vm.dim(0), q = vm.dim(1);
        if (parent_needs(0)) {
          Node& p = parent(0);
          for (int i = 0; i < p_dim; ++i) {
            double acc = 0.0;
            for (int j = 0; j < q; ++j) acc += vm(i, j) * g(j);
            p.grad(i) += acc;
          }
        }
        if (parent_needs(1)) {
          Node& p = parent(1);
          for (int i = 0; i < p_dim; ++i) {
            const double vi = vv(i);
            for (int j = 0; j < q; ++j) p.grad(i, j) += vi * g(j);
          }
        }
        break;
      }
      case Op::add_row_bias: {
        const int rows = n.value.dim(0), cols = n.value.dim(1);
        if (parent_needs(0)) accumulate_parent(parent(0), g);
        if (parent_needs(1)) {
          Node& p = parent(1);
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) p.grad(j) += g(i, j);
        }
        break;
      }
      case Op::row:
        if (parent_needs(0)) {
          Node& p = parent(0);
          const int index = n.iaux[0];
          for (int j = 0; j < n.value.dim(0); ++j) p.grad(index, j) += g(j);
        }
        break;
      case Op::concat:
        for (size_t i = 0; i < n.parents.size(); ++i) {
          if (!parent_needs(i)) continue;
          Node& p = parent(i);
          const int offset = n.iaux[i];
          for (int j = 0; j < p.value.dim(0); ++j) p.grad(j) += g(offset + j);
        }
        break;
      case Op::softmax:
        if (parent_needs(0)) {
          Node& p = parent(0);
          const int c = n.value.dim(0);
          double dot = 0.0;
          for (int i = 0; i < c; ++i) dot += g(i) * n.value(i);
          for (int i = 0; i < c; ++i)
            p.grad(i) += n.value(i) * (g(i) - dot);
        }
        break;
      case Op::conv1d: {
        const Tensor& in = parent(0).value;
        const Tensor& w = parent(1).value;
        const int d = in.dim(1);
        const int F = w.dim(0), order = w.dim(1);
        const int out_len = n.value.dim(0);
        if (parent_needs(0)) {
          Node& p = parent(0);
          for (int t = 0; t < out_len; ++t)
            for (int f = 0; f < F; ++f) {
              const double gtf = g(t, f);
              for (int i = 0; i < order; ++i) {
                double* dst = p.grad.data() + static_cast<size_t>(t + i) * d;
                const double* w_row =
                    w.data() + (static_cast<size_t>(f) * order + i) * d;
                for (int j = 0; j < d; ++j) dst[j] += gtf * w_row[j];
              }
            }
        }
        if (parent_needs(1)) {
          Node& p = parent(1);
          for (int t = 0; t < out_len; ++t)
            for (int f = 0; f < F; ++f) {
              const double gtf = g(t, f);
              for (int i = 0; i < order; ++i) {
                const double* in_row =
                    in.data() + static_cast<size_t>(t + i) * d;
                double* dst =
                    p.grad.data() + (static_cast<size_t>(f) * order + i) * d;
                for (int j = 0; j < d; ++j) dst[j] += gtf * in_row[j];
              }
            }
        }
        if (parent_needs(2)) {
          Node& p = parent(2);
          for (int t = 0; t < out_len; ++t)
            for (int f = 0; f < F; ++f) p.grad(f) += g(t, f);
        }
        break;
      }
      case Op::max_over_time:
        if (parent_needs(0)) {
          Node& p = parent(0);
          for (int f = 0; f < n.value.dim(0); ++f)
            p.grad(n.iaux[static_cast<size_t>(f)], f) += g(f);
        }
        break;
      case Op::embedding:
        if (parent_needs(0)) {
          Node& p = parent(0);
          const int d = n.value.dim(1);
          for (size_t t = 0; t < n.iaux.size(); ++t) {
            const int idx = n.iaux[t];
            if (n.mask_pad && idx == 0) continue;
            for (int j = 0; j < d; ++j)
              p.grad(idx, j) += g(static_cast<int>(t), j);
          }
        }
        break;
      case Op::cross_entropy:
        if (parent_needs(0)) {
          Node& p = parent(0);
          const int label = n.iaux[0];
          p.grad(label) += -g(0) / std::max(p.value(label), 1e-12);
        }
        break;
    }
  }

  // Flush leaf gradients into their bound tensors.
  for (NodeId id = 0; id <= loss; ++id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.op == Op::leaf && n.grad_sink && n.grad.size() > 0) {
      for (int64_t i = 0; i < n.grad.size(); ++i)
        n.grad_sink->data()[i] += n.grad.data()[i];
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

double grad_check(const std::function<Tape::NodeId(Tape&)>& build_loss,
                  const std::vector<Tensor*>& params, double eps) {
  for (Tensor* p : params) {
    p->set_requires_grad(true);
    p->grad();  // ensure buffer exists
    p->zero_grad();
  }
  {
    Tape tape;
    Tape::NodeId loss = build_loss(tape);
    tape.backward(loss);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Tensor* p : params) analytic.push_back(p->grad());

  auto eval = [&]() {
    Tape tape;
    return tape.value(build_loss(tape)).item();
  };

  double max_rel_err = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    for (int64_t i = 0; i < p.size(); ++i) {
      const double original = p.data()[i];
      p.data()[i] = original + eps;
      const double up = eval();
      p.data()[i] = original - eps;
      const double down = eval();
      p.data()[i] = original;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[pi].data()[i];
      const double rel = std::fabs(a - numeric) /
                         std::max(1e-8, std::fabs(a) + std::fabs(numeric));
      max_rel_err = std::max(max_rel_err, rel);
    }
  }
  return max_rel_err;
}

}  // namespace textclf
