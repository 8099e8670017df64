#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lee::tensor {

/// All tensors are 2-D, row-major, double precision. Vectors are 1 x n.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows in
  bool is_param = false;
  bool requires_grad = false;
  std::string name;
  std::vector<NodePtr> inputs;
  std::vector<char> input_wants;  // which inputs receive gradient from this node
  std::function<void(Node&)> backward_fn;

  bool wants(std::size_t i) const { return input_wants[i] != 0; }
  void accumulate(const Matrix& g);
  template <typename Expr>
  void accumulate_expr(const Expr& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

  /// Leaf that never receives gradient.
  static Tensor constant(Matrix value);
  static Tensor scalar(double v);
  /// Trainable leaf.
  static Tensor parameter(Matrix value, std::string name = {});
  /// Leaf that receives gradient but is not a model parameter (e.g. a latent
  /// being refined).
  static Tensor variable(Matrix value, std::string name = {});

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  double item() const;
  bool is_param() const { return node_->is_param; }
  const std::string& name() const { return node_->name; }
  /// Whether an op consuming this tensor right now would propagate into it.
  bool requires_grad() const;
  std::string shape_str() const;
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Reverse sweep from a 1 x 1 loss. Gradients accumulate into every reachable
/// node that wants them. Throws std::invalid_argument on a non-scalar or
/// detached loss.
void backward(const Tensor& loss);

bool grad_enabled();
bool params_frozen();

/// Disables graph recording on this thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Parameters behave like constants on this thread; other leaves still get
/// gradients. Lets several threads differentiate w.r.t. their own inputs
/// through shared weights.
class FreezeParamsGuard {
 public:
  FreezeParamsGuard();
  ~FreezeParamsGuard();
  FreezeParamsGuard(const FreezeParamsGuard&) = delete;
  FreezeParamsGuard& operator=(const FreezeParamsGuard&) = delete;

 private:
  bool prev_;
};

using BackwardFn = std::function<void(Node&)>;

/// Builds an op result. The backward closure is kept only when some input
/// requires gradient under the current thread's modes.
Tensor make_result(Matrix value, std::vector<Tensor> inputs, BackwardFn fn);

std::string shape_of(const Matrix& m);

}  // namespace lee::tensor
