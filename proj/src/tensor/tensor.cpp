#include "lee/tensor/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace lee::tensor {

namespace {
thread_local bool tls_grad_enabled = true;
thread_local bool tls_params_frozen = false;

NodePtr make_leaf(Matrix value, bool param, bool wants, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->is_param = param;
  n->requires_grad = wants;
  n->name = std::move(name);
  return n;
}

bool node_requires_grad(const Node& n) {
  if (!n.requires_grad) return false;
  return !(n.is_param && tls_params_frozen);
}
}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

std::string shape_of(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + " x " + std::to_string(m.cols()) + "]";
}

Tensor Tensor::constant(Matrix value) { return Tensor(make_leaf(std::move(value), false, false, {})); }

Tensor Tensor::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Tensor Tensor::parameter(Matrix value, std::string name) {
  return Tensor(make_leaf(std::move(value), true, true, std::move(name)));
}

Tensor Tensor::variable(Matrix value, std::string name) {
  return Tensor(make_leaf(std::move(value), false, true, std::move(name)));
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str());
  return value()(0, 0);
}

bool Tensor::requires_grad() const { return tls_grad_enabled && node_ && node_requires_grad(*node_); }

std::string Tensor::shape_str() const { return shape_of(node_->value); }

bool grad_enabled() { return tls_grad_enabled; }
bool params_frozen() { return tls_params_frozen; }

NoGradGuard::NoGradGuard() : prev_(tls_grad_enabled) { tls_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { tls_grad_enabled = prev_; }
FreezeParamsGuard::FreezeParamsGuard() : prev_(tls_params_frozen) { tls_params_frozen = true; }
FreezeParamsGuard::~FreezeParamsGuard() { tls_params_frozen = prev_; }

Tensor make_result(Matrix value, std::vector<Tensor> inputs, BackwardFn fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (!tls_grad_enabled) return Tensor(n);
  bool any = false;
  std::vector<char> wants(inputs.size(), 0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    wants[i] = inputs[i].defined() && inputs[i].requires_grad();
    any |= wants[i] != 0;
  }
  if (!any) return Tensor(n);
  n->requires_grad = true;
  n->inputs.reserve(inputs.size());
  for (auto& t : inputs) n->inputs.push_back(t.node());
  n->input_wants = std::move(wants);
  n->backward_fn = std::move(fn);
  return Tensor(n);
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a 1 x 1 tensor, got " +
                                (loss.defined() ? loss.shape_str() : std::string("undefined")));
  }
  Node* root = loss.node().get();
  if (!root->requires_grad) throw std::invalid_argument("backward: loss is detached from every trainable input");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const std::size_t i = next++;
      Node* child = node->inputs[i].get();
      if (node->wants(i) && child->backward_fn && visited.insert(child).second) stack.push_back({child, 0});
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  root->grad = Matrix::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->grad.size() == 0 || !n->backward_fn) continue;
    n->backward_fn(*n);
  }
}

}  // namespace lee::tensor
