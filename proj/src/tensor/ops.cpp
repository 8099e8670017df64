#include "lee/tensor/ops.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace lee::tensor {

namespace {

enum class Bcast { Same, Row, Scalar };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Bcast::Same;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::Row;
  if (b.rows() == 1 && b.cols() == 1) return Bcast::Scalar;
  throw std::invalid_argument(std::string(op) + ": cannot broadcast " + b.shape_str() + " onto " + a.shape_str());
}

// Reduces an output-shaped gradient to the shape of a broadcast operand.
Matrix reduce_to(const Matrix& g, Bcast kind) {
  switch (kind) {
    case Bcast::Same: return g;
    case Bcast::Row: return g.colwise().sum();
    case Bcast::Scalar: {
      Matrix s(1, 1);
      s(0, 0) = g.sum();
      return s;
    }
  }
  return g;
}

Matrix expand(const Matrix& b, Bcast kind, Index rows, Index cols) {
  switch (kind) {
    case Bcast::Same: return b;
    case Bcast::Row: return b.replicate(rows, 1);
    case Bcast::Scalar: return Matrix::Constant(rows, cols, b(0, 0));
  }
  return b;
}

template <typename F, typename D>
Tensor pointwise(const Tensor& a, F f, D df) {
  Matrix out = a.value().unaryExpr(f);
  return make_result(std::move(out), {a}, [df](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    n.inputs[0]->accumulate_expr(n.grad.cwiseProduct(x.binaryExpr(n.value, df)));
  });
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const Bcast kind = broadcast_kind(a, b, "add");
  Matrix out = a.value() + expand(b.value(), kind, a.rows(), a.cols());
  return make_result(std::move(out), {a, b}, [kind](Node& n) {
    if (n.wants(0)) n.inputs[0]->accumulate(n.grad);
    if (n.wants(1)) n.inputs[1]->accumulate(reduce_to(n.grad, kind));
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Bcast kind = broadcast_kind(a, b, "sub");
  Matrix out = a.value() - expand(b.value(), kind, a.rows(), a.cols());
  return make_result(std::move(out), {a, b}, [kind](Node& n) {
    if (n.wants(0)) n.inputs[0]->accumulate(n.grad);
    if (n.wants(1)) n.inputs[1]->accumulate(-reduce_to(n.grad, kind));
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Bcast kind = broadcast_kind(a, b, "mul");
  Matrix bx = expand(b.value(), kind, a.rows(), a.cols());
  Matrix out = a.value().cwiseProduct(bx);
  return make_result(std::move(out), {a, b}, [kind, bx = std::move(bx)](Node& n) {
    if (n.wants(0)) n.inputs[0]->accumulate_expr(n.grad.cwiseProduct(bx));
    if (n.wants(1)) n.inputs[1]->accumulate(reduce_to(n.grad.cwiseProduct(n.inputs[0]->value), kind));
  });
}

Tensor scale(const Tensor& a, double s) {
  return make_result(a.value() * s, {a}, [s](Node& n) { n.inputs[0]->accumulate_expr(n.grad * s); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return make_result(a.value().array() + s, {a}, [](Node& n) { n.inputs[0]->accumulate(n.grad); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Matrix out;
  kernels::gemm(a.value(), b.value(), out);
  return make_result(std::move(out), {a, b}, [](Node& n) {
    Matrix g;
    if (n.wants(0)) {
      kernels::gemm_nt(n.grad, n.inputs[1]->value, g);
      n.inputs[0]->accumulate(g);
    }
    if (n.wants(1)) {
      kernels::gemm_tn(n.inputs[0]->value, n.grad, g);
      n.inputs[1]->accumulate(g);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(b.rows() == 1 && b.cols() == w.cols(),
          "linear: bias " + b.shape_str() + " does not match weight " + w.shape_str());
  Matrix out;
  kernels::gemm(x.value(), w.value(), out);
  out.rowwise() += b.value().row(0);
  return make_result(std::move(out), {x, w, b}, [](Node& n) {
    Matrix g;
    if (n.wants(0)) {
      kernels::gemm_nt(n.grad, n.inputs[1]->value, g);
      n.inputs[0]->accumulate(g);
    }
    if (n.wants(1)) {
      kernels::gemm_tn(n.inputs[0]->value, n.grad, g);
      n.inputs[1]->accumulate(g);
    }
    if (n.wants(2)) n.inputs[2]->accumulate_expr(n.grad.colwise().sum());
  });
}

Tensor silu(const Tensor& a) {
  return pointwise(
      a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

Tensor exp(const Tensor& a) {
  return pointwise(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& a) {
  return pointwise(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
  return pointwise(
      a, [](double x) { return std::fabs(x); }, [](double x, double) { return x > 0 ? 1.0 : x < 0 ? -1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return pointwise(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return pointwise(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor signed_log1p(const Tensor& a) {
  return pointwise(
      a, [](double x) { return std::copysign(std::log1p(std::fabs(x)), x); },
      [](double x, double) { return 1.0 / (1.0 + std::fabs(x)); });
}

Tensor signed_expm1(const Tensor& a) {
  return pointwise(
      a, [](double x) { return std::copysign(std::expm1(std::fabs(x)), x); },
      [](double x, double) { return std::exp(std::fabs(x)); });
}

Tensor stop_gradient(const Tensor& a) { return Tensor::constant(a.value()); }

Tensor dropout(const Tensor& a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  Matrix keep(a.rows(), a.cols());
  for (Index i = 0; i < keep.size(); ++i) keep.data()[i] = rng.bernoulli(p) ? 0.0 : 1.0 / (1.0 - p);
  Matrix out = a.value().cwiseProduct(keep);
  return make_result(std::move(out), {a},
                     [keep = std::move(keep)](Node& n) { n.inputs[0]->accumulate_expr(n.grad.cwiseProduct(keep)); });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {a}, [](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    n.inputs[0]->accumulate_expr(Matrix::Constant(x.rows(), x.cols(), n.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  require(a.size() > 0, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor row_sum(const Tensor& a) {
  Matrix out = a.value().rowwise().sum();
  return make_result(std::move(out), {a}, [](Node& n) {
    n.inputs[0]->accumulate_expr(n.grad.replicate(1, n.inputs[0]->value.cols()));
  });
}

Tensor softmax_rows(const Tensor& a) {
  Matrix out = a.value();
  for (Index i = 0; i < out.rows(); ++i) {
    const double mx = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return make_result(std::move(out), {a}, [](Node& n) {
    const Matrix& y = n.value;
    Matrix gy = n.grad.cwiseProduct(y);
    const Eigen::VectorXd dot = gy.rowwise().sum();
    n.inputs[0]->accumulate_expr(gy - y.cwiseProduct(dot.replicate(1, y.cols())));
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require(gamma.rows() == 1 && gamma.cols() == x.cols() && beta.rows() == 1 && beta.cols() == x.cols(),
          "layer_norm: gain " + gamma.shape_str() + " / bias " + beta.shape_str() + " do not match input " +
              x.shape_str());
  const Index d = x.cols();
  Matrix xhat(x.rows(), d);
  Eigen::VectorXd inv_std(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mu = x.value().row(i).mean();
    const double var = (x.value().row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.value().row(i).array() - mu) * inv_std(i);
  }
  Matrix out = xhat.array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return make_result(std::move(out), {x, gamma, beta}, [xhat = std::move(xhat), inv_std](Node& n) {
    const Matrix& g = n.grad;
    if (n.wants(1)) n.inputs[1]->accumulate_expr(g.cwiseProduct(xhat).colwise().sum());
    if (n.wants(2)) n.inputs[2]->accumulate_expr(g.colwise().sum());
    if (n.wants(0)) {
      const Matrix gh = g.array().rowwise() * n.inputs[1]->value.row(0).array();
      const double d = static_cast<double>(gh.cols());
      Matrix dx(gh.rows(), gh.cols());
      for (Index i = 0; i < gh.rows(); ++i) {
        const double m1 = gh.row(i).sum() / d;
        const double m2 = gh.row(i).dot(xhat.row(i)) / d;
        dx.row(i) = (gh.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std(i);
      }
      n.inputs[0]->accumulate(dx);
    }
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, const std::vector<char>& mask) {
  const Index rows = logits.rows(), v = logits.cols();
  require(static_cast<Index>(targets.size()) == rows && static_cast<Index>(mask.size()) == rows,
          "cross_entropy: " + std::to_string(targets.size()) + " targets / " + std::to_string(mask.size()) +
              " mask entries for logits " + logits.shape_str());
  Matrix probs(rows, v);
  double total = 0.0;
  Index count = 0;
  for (Index i = 0; i < rows; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const int t = targets[static_cast<std::size_t>(i)];
    require(t >= 0 && t < v, "cross_entropy: target id out of range");
    const double mx = logits.value().row(i).maxCoeff();
    probs.row(i) = (logits.value().row(i).array() - mx).exp();
    const double z = probs.row(i).sum();
    probs.row(i) /= z;
    total += -(logits.value()(i, t) - mx - std::log(z));
    ++count;
  }
  require(count > 0, "cross_entropy: every target position is masked");
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(count);
  return make_result(std::move(out), {logits}, [probs = std::move(probs), targets, mask, count](Node& n) {
    const double g = n.grad(0, 0) / static_cast<double>(count);
    Matrix d = Matrix::Zero(probs.rows(), probs.cols());
    for (Index i = 0; i < probs.rows(); ++i) {
      if (!mask[static_cast<std::size_t>(i)]) continue;
      d.row(i) = probs.row(i) * g;
      d(i, targets[static_cast<std::size_t>(i)]) -= g;
    }
    n.inputs[0]->accumulate(d);
  });
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  std::vector<Index> idx(ids.begin(), ids.end());
  for (Index i : idx) require(i >= 0 && i < table.rows(), "embedding: id out of range for table " + table.shape_str());
  return gather_rows(table, idx);
}

Tensor gather_rows(const Tensor& a, const std::vector<Index>& idx) {
  Matrix out(static_cast<Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < a.rows(), "gather_rows: index out of range for " + a.shape_str());
    out.row(static_cast<Index>(i)) = a.value().row(idx[i]);
  }
  return make_result(std::move(out), {a}, [idx](Node& n) {
    Matrix g = Matrix::Zero(n.inputs[0]->value.rows(), n.inputs[0]->value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += n.grad.row(static_cast<Index>(i));
    n.inputs[0]->accumulate(g);
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == parts[0].cols(),
            "concat_rows: column mismatch " + p.shape_str() + " vs " + parts[0].shape_str());
    rows += p.rows();
  }
  Matrix out(rows, parts[0].cols());
  std::vector<Index> offs;
  Index r = 0;
  for (const auto& p : parts) {
    offs.push_back(r);
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_result(std::move(out), parts, [offs](Node& n) {
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      if (n.wants(i)) n.inputs[i]->accumulate_expr(n.grad.middleRows(offs[i], n.inputs[i]->value.rows()));
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == parts[0].rows(), "concat_cols: row mismatch " + p.shape_str() + " vs " + parts[0].shape_str());
    cols += p.cols();
  }
  Matrix out(parts[0].rows(), cols);
  std::vector<Index> offs;
  Index c = 0;
  for (const auto& p : parts) {
    offs.push_back(c);
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make_result(std::move(out), parts, [offs](Node& n) {
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      if (n.wants(i)) n.inputs[i]->accumulate_expr(n.grad.middleCols(offs[i], n.inputs[i]->value.cols()));
    }
  });
}

Tensor slice_rows(const Tensor& a, Index begin, Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= a.rows(),
          "slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") out of " + a.shape_str());
  return make_result(a.value().middleRows(begin, count), {a}, [begin](Node& n) {
    Matrix g = Matrix::Zero(n.inputs[0]->value.rows(), n.inputs[0]->value.cols());
    g.middleRows(begin, n.grad.rows()) = n.grad;
    n.inputs[0]->accumulate(g);
  });
}

Tensor slice_cols(const Tensor& a, Index begin, Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= a.cols(),
          "slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") out of " + a.shape_str());
  return make_result(a.value().middleCols(begin, count), {a}, [begin](Node& n) {
    Matrix g = Matrix::Zero(n.inputs[0]->value.rows(), n.inputs[0]->value.cols());
    g.middleCols(begin, n.grad.cols()) = n.grad;
    n.inputs[0]->accumulate(g);
  });
}

Tensor reshape(const Tensor& a, Index rows, Index cols) {
  require(rows * cols == a.size(),
          "reshape: cannot view " + a.shape_str() + " as [" + std::to_string(rows) + " x " + std::to_string(cols) + "]");
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return make_result(std::move(out), {a}, [](Node& n) {
    const Matrix& x = n.inputs[0]->value;
    n.inputs[0]->accumulate_expr(Eigen::Map<const Matrix>(n.grad.data(), x.rows(), x.cols()));
  });
}

Tensor segment_mean(const Tensor& x, const std::vector<Index>& offsets, const std::vector<char>& include) {
  require(offsets.size() >= 2 && offsets.front() == 0 && offsets.back() == x.rows(),
          "segment_mean: offsets do not cover " + x.shape_str());
  require(include.empty() || static_cast<Index>(include.size()) == x.rows(),
          "segment_mean: mask length does not match " + x.shape_str());
  const Index segs = static_cast<Index>(offsets.size()) - 1;
  Matrix out = Matrix::Zero(segs, x.cols());
  std::vector<double> inv(static_cast<std::size_t>(segs), 0.0);
  for (Index s = 0; s < segs; ++s) {
    Index n = 0;
    for (Index r = offsets[s]; r < offsets[s + 1]; ++r) {
      if (!include.empty() && !include[static_cast<std::size_t>(r)]) continue;
      out.row(s) += x.value().row(r);
      ++n;
    }
    if (n > 0) {
      inv[static_cast<std::size_t>(s)] = 1.0 / static_cast<double>(n);
      out.row(s) *= inv[static_cast<std::size_t>(s)];
    }
  }
  return make_result(std::move(out), {x}, [offsets, include, inv](Node& n) {
    Matrix g = Matrix::Zero(n.inputs[0]->value.rows(), n.inputs[0]->value.cols());
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
      for (Index r = offsets[s]; r < offsets[s + 1]; ++r) {
        if (!include.empty() && !include[static_cast<std::size_t>(r)]) continue;
        g.row(r) = n.grad.row(static_cast<Index>(s)) * inv[s];
      }
    }
    n.inputs[0]->accumulate(g);
  });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, const kernels::AttentionLayout& layout) {
  auto cache = std::make_shared<kernels::AttentionCache>();
  Matrix out;
  const bool track = grad_enabled() && (q.requires_grad() || k.requires_grad() || v.requires_grad());
  kernels::attention_forward(q.value(), k.value(), v.value(), heads, layout, out, track ? cache.get() : nullptr);
  return make_result(std::move(out), {q, k, v}, [cache, heads, layout](Node& n) {
    Matrix dq, dk, dv;
    kernels::attention_backward(n.inputs[0]->value, n.inputs[1]->value, n.inputs[2]->value, heads, layout, *cache,
                                n.grad, n.wants(0) ? &dq : nullptr, n.wants(1) ? &dk : nullptr,
                                n.wants(2) ? &dv : nullptr);
    if (n.wants(0)) n.inputs[0]->accumulate(dq);
    if (n.wants(1)) n.inputs[1]->accumulate(dk);
    if (n.wants(2)) n.inputs[2]->accumulate(dv);
  });
}

}  // namespace lee::tensor
