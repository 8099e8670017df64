#include "lee/tensor/kernels.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lee::tensor::kernels {

namespace {

constexpr Index kRowBlock = 64;

void check_inner(Index a, Index b, const Matrix& x, const Matrix& y, const char* op) {
  if (a != b) throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_of(x) + " vs " + shape_of(y));
}

template <typename Fn>
void for_row_blocks(Index rows, Fn&& fn) {
  const Index blocks = (rows + kRowBlock - 1) / kRowBlock;
  if (blocks <= 1) {
    if (rows > 0) fn(Index{0}, rows);
    return;
  }
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index r0 = b * kRowBlock;
    fn(r0, std::min(kRowBlock, rows - r0));
  }
}

std::vector<Index> valid_keys(const AttentionLayout& layout, Index k0, Index nk) {
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(nk));
  for (Index j = 0; j < nk; ++j) {
    if (layout.key_valid.empty() || layout.key_valid[static_cast<std::size_t>(k0 + j)]) idx.push_back(j);
  }
  return idx;
}

}  // namespace

void gemm_serial(const Matrix& a, const Matrix& b, Matrix& c) {
  check_inner(a.cols(), b.rows(), a, b, "gemm");
  c.setZero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      for (Index j = 0; j < b.cols(); ++j) c(i, j) += aip * b(p, j);
    }
  }
}

void gemm(const Matrix& a, const Matrix& b, Matrix& c) {
  check_inner(a.cols(), b.rows(), a, b, "gemm");
  c.resize(a.rows(), b.cols());
  for_row_blocks(a.rows(), [&](Index r0, Index n) { c.middleRows(r0, n).noalias() = a.middleRows(r0, n) * b; });
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  check_inner(a.rows(), b.rows(), a, b, "gemm_tn");
  c.resize(a.cols(), b.cols());
  // Output rows are columns of A; block over them.
  for_row_blocks(a.cols(), [&](Index r0, Index n) {
    c.middleRows(r0, n).noalias() = a.middleCols(r0, n).transpose() * b;
  });
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  check_inner(a.cols(), b.cols(), a, b, "gemm_nt");
  c.resize(a.rows(), b.rows());
  for_row_blocks(a.rows(), [&](Index r0, Index n) {
    c.middleRows(r0, n).noalias() = a.middleRows(r0, n) * b.transpose();
  });
}

void AttentionLayout::validate(Index q_rows, Index k_rows) const {
  if (q_offsets.size() < 2 || q_offsets.size() != k_offsets.size()) {
    throw std::invalid_argument("attention: query/key offsets must describe the same number of segments");
  }
  if (q_offsets.front() != 0 || q_offsets.back() != q_rows || k_offsets.front() != 0 || k_offsets.back() != k_rows) {
    throw std::invalid_argument("attention: offsets do not cover [" + std::to_string(q_rows) + " x *] queries and [" +
                                std::to_string(k_rows) + " x *] keys");
  }
  for (std::size_t s = 1; s < q_offsets.size(); ++s) {
    if (q_offsets[s] < q_offsets[s - 1] || k_offsets[s] < k_offsets[s - 1]) {
      throw std::invalid_argument("attention: offsets must be non-decreasing");
    }
  }
  if (!key_valid.empty() && static_cast<Index>(key_valid.size()) != k_rows) {
    throw std::invalid_argument("attention: key mask length does not match key rows");
  }
}

void attention_forward(const Matrix& q, const Matrix& k, const Matrix& v, int heads, const AttentionLayout& layout,
                       Matrix& out, AttentionCache* cache) {
  if (q.cols() != k.cols() || k.cols() != v.cols() || k.rows() != v.rows() || heads < 1 || q.cols() % heads != 0) {
    throw std::invalid_argument("attention: incompatible shapes q" + shape_of(q) + " k" + shape_of(k) + " v" +
                                shape_of(v) + " heads=" + std::to_string(heads));
  }
  layout.validate(q.rows(), k.rows());
  const Index dh = q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Index segs = layout.segments();
  out.setZero(q.rows(), q.cols());
  if (cache) cache->probs.assign(static_cast<std::size_t>(segs * heads), Matrix());

  const Index tasks = segs * heads;
#pragma omp parallel for schedule(dynamic)
  for (Index t = 0; t < tasks; ++t) {
    const Index s = t / heads, h = t % heads;
    const Index q0 = layout.q_offsets[s], nq = layout.q_offsets[s + 1] - q0;
    const Index k0 = layout.k_offsets[s], nk = layout.k_offsets[s + 1] - k0;
    if (nq == 0) continue;
    const auto keys = valid_keys(layout, k0, nk);
    const Index nv = static_cast<Index>(keys.size());
    Matrix kc(nv, dh), vc(nv, dh);
    for (Index j = 0; j < nv; ++j) {
      kc.row(j) = k.block(k0 + keys[j], h * dh, 1, dh);
      vc.row(j) = v.block(k0 + keys[j], h * dh, 1, dh);
    }
    Matrix p(nq, nv);
    if (nv > 0) p.noalias() = q.block(q0, h * dh, nq, dh) * kc.transpose();
    for (Index i = 0; i < nq; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      Index visible = nv;
      if (layout.causal) {
        visible = 0;
        while (visible < nv && keys[visible] <= i) ++visible;
      }
      for (Index j = 0; j < visible; ++j) {
        p(i, j) *= scale;
        mx = std::max(mx, p(i, j));
      }
      double sum = 0.0;
      for (Index j = 0; j < visible; ++j) {
        p(i, j) = std::exp(p(i, j) - mx);
        sum += p(i, j);
      }
      for (Index j = 0; j < visible; ++j) p(i, j) /= sum;
      for (Index j = visible; j < nv; ++j) p(i, j) = 0.0;
    }
    if (nv > 0) out.block(q0, h * dh, nq, dh).noalias() = p * vc;
    if (cache) cache->probs[static_cast<std::size_t>(t)] = std::move(p);
  }
}

void attention_forward_serial(const Matrix& q, const Matrix& k, const Matrix& v, int heads,
                              const AttentionLayout& layout, Matrix& out) {
  layout.validate(q.rows(), k.rows());
  const Index dh = q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  out.setZero(q.rows(), q.cols());
  for (Index s = 0; s < layout.segments(); ++s) {
    const Index q0 = layout.q_offsets[s], q1 = layout.q_offsets[s + 1];
    const Index k0 = layout.k_offsets[s], k1 = layout.k_offsets[s + 1];
    for (int h = 0; h < heads; ++h) {
      for (Index i = q0; i < q1; ++i) {
        std::vector<double> w;
        std::vector<Index> idx;
        for (Index j = k0; j < k1; ++j) {
          if (!layout.key_valid.empty() && !layout.key_valid[static_cast<std::size_t>(j)]) continue;
          if (layout.causal && j - k0 > i - q0) continue;
          double dot = 0.0;
          for (Index c = 0; c < dh; ++c) dot += q(i, h * dh + c) * k(j, h * dh + c);
          w.push_back(dot * scale);
          idx.push_back(j);
        }
        if (w.empty()) continue;
        double mx = w[0];
        for (double x : w) mx = std::max(mx, x);
        double sum = 0.0;
        for (double& x : w) sum += (x = std::exp(x - mx));
        for (std::size_t n = 0; n < w.size(); ++n) {
          for (Index c = 0; c < dh; ++c) out(i, h * dh + c) += w[n] / sum * v(idx[n], h * dh + c);
        }
      }
    }
  }
}

void attention_backward(const Matrix& q, const Matrix& k, const Matrix& v, int heads, const AttentionLayout& layout,
                        const AttentionCache& cache, const Matrix& grad_out, Matrix* dq, Matrix* dk, Matrix* dv) {
  const Index dh = q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Index segs = layout.segments();
  if (dq) dq->setZero(q.rows(), q.cols());
  if (dk) dk->setZero(k.rows(), k.cols());
  if (dv) dv->setZero(v.rows(), v.cols());
  const Index tasks = segs * heads;
  // Each task writes a disjoint (segment rows, head columns) block.
#pragma omp parallel for schedule(dynamic)
  for (Index t = 0; t < tasks; ++t) {
    const Index s = t / heads, h = t % heads;
    const Index q0 = layout.q_offsets[s], nq = layout.q_offsets[s + 1] - q0;
    const Index k0 = layout.k_offsets[s], nk = layout.k_offsets[s + 1] - k0;
    if (nq == 0) continue;
    const auto keys = valid_keys(layout, k0, nk);
    const Index nv = static_cast<Index>(keys.size());
    if (nv == 0) continue;
    const Matrix& p = cache.probs[static_cast<std::size_t>(t)];
    Matrix kc(nv, dh), vc(nv, dh);
    for (Index j = 0; j < nv; ++j) {
      kc.row(j) = k.block(k0 + keys[j], h * dh, 1, dh);
      vc.row(j) = v.block(k0 + keys[j], h * dh, 1, dh);
    }
    const auto go = grad_out.block(q0, h * dh, nq, dh);
    if (dv) {
      Matrix dvc = p.transpose() * go;
      for (Index j = 0; j < nv; ++j) dv->block(k0 + keys[j], h * dh, 1, dh) += dvc.row(j);
    }
    if (!dq && !dk) continue;
    Matrix dp = go * vc.transpose();
    Matrix ds = p.cwiseProduct(dp);
    const Eigen::VectorXd rs = ds.rowwise().sum();
    ds -= p.cwiseProduct(rs.replicate(1, nv));
    ds *= scale;
    if (dq) dq->block(q0, h * dh, nq, dh).noalias() += ds * kc;
    if (dk) {
      Matrix dkc = ds.transpose() * q.block(q0, h * dh, nq, dh);
      for (Index j = 0; j < nv; ++j) dk->block(k0 + keys[j], h * dh, 1, dh) += dkc.row(j);
    }
  }
}

}  // namespace lee::tensor::kernels
