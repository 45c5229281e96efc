#pragma once

// Pooling operators over an S x M embedding matrix (one row per instance).

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "cmil/numeric.hpp"

namespace cmil {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace detail {

template <typename Derived>
void require_nonempty(const Eigen::MatrixBase<Derived>& h, const char* op) {
  if (h.rows() < 1) throw std::invalid_argument(std::string(op) + ": bag has no instances");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Element-wise max / mean / log-mean-exp

template <typename Derived>
Vector<typename Derived::Scalar> max_pool(const Eigen::MatrixBase<Derived>& h) {
  detail::require_nonempty(h, "max_pool");
  return h.colwise().maxCoeff().transpose();
}

template <typename Derived>
Vector<typename Derived::Scalar> mean_pool(const Eigen::MatrixBase<Derived>& h) {
  detail::require_nonempty(h, "mean_pool");
  return h.colwise().mean().transpose();
}

/// Per column log((1/S) sum_j exp(h_jm)).
template <typename Derived>
Vector<typename Derived::Scalar> logsumexp_pool(const Eigen::MatrixBase<Derived>& h) {
  detail::require_nonempty(h, "logsumexp_pool");
  Vector<typename Derived::Scalar> z(h.cols());
  for (Eigen::Index m = 0; m < h.cols(); ++m) z(m) = log_mean_exp(h.col(m));
  return z;
}

// ---------------------------------------------------------------------------
// ABMIL attention: a = softmax_j(u^T tanh(U h_j)), z = sum_j a_j h_j

template <typename Scalar>
struct ABMILParams {
  Matrix<Scalar> U;  // L x M
  Vector<Scalar> u;  // L

  Eigen::Index hidden_dim() const { return U.rows(); }
};

template <typename Scalar>
struct AttentionPooled {
  Vector<Scalar> pooled;
  Vector<Scalar> weights;
};

template <typename Derived>
Vector<typename Derived::Scalar> abmil_weights(
    const Eigen::MatrixBase<Derived>& h, const ABMILParams<typename Derived::Scalar>& p) {
  detail::require_nonempty(h, "abmil_pool");
  if (p.U.rows() < 1 || p.U.cols() != h.cols() || p.u.size() != p.U.rows())
    throw std::invalid_argument("abmil_pool: parameter shapes do not match the embedding");
  // (L x M)(M x S) -> L x S, then u^T -> S logits.
  const Matrix<typename Derived::Scalar> hidden = (p.U * h.transpose()).array().tanh().matrix();
  return softmax((p.u.transpose() * hidden).transpose());
}

template <typename Derived>
AttentionPooled<typename Derived::Scalar> abmil_pool(
    const Eigen::MatrixBase<Derived>& h, const ABMILParams<typename Derived::Scalar>& p) {
  AttentionPooled<typename Derived::Scalar> out;
  out.weights = abmil_weights(h, p);
  out.pooled = h.transpose() * out.weights;
  return out;
}

// ---------------------------------------------------------------------------
// smAP smoothing: argmin_g alpha * E_D(g) + (1 - alpha) * ||h - g||_F^2,
// i.e. (alpha * L + (1 - alpha) I) g = (1 - alpha) h with L = D - A.

struct SmoothConfig {
  double alpha = 0.5;
  /// Symmetric 0/1 adjacency over instances. Absent means the chain graph
  /// (A_jk = 1 iff |j - k| = 1), which is solved in O(S) per column.
  std::optional<Matrix<double>> adjacency;
};

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("smooth: alpha must lie in [0, 1)");
}

}  // namespace detail

/// Solves (alpha * L_chain + (1 - alpha) I) X = rhs for every column of rhs
/// with the Thomas algorithm. The matrix is symmetric positive definite and
/// diagonally dominant, so no pivoting is needed.
template <typename Derived>
Matrix<typename Derived::Scalar> solve_chain_system(double alpha,
                                                    const Eigen::MatrixBase<Derived>& rhs) {
  using Scalar = typename Derived::Scalar;
  detail::check_alpha(alpha);
  const Eigen::Index S = rhs.rows();
  Matrix<Scalar> x = rhs;
  if (S == 0) return x;
  const Scalar a = static_cast<Scalar>(alpha);
  const Scalar keep = Scalar(1) - a;
  const Scalar off = -a;
  auto diag = [&](Eigen::Index j) {
    const Scalar degree = (S == 1) ? Scalar(0) : ((j == 0 || j == S - 1) ? Scalar(1) : Scalar(2));
    return a * degree + keep;
  };

  // Forward sweep; c holds the modified super-diagonal.
  Vector<Scalar> c(S);
  Scalar denom = diag(0);
  c(0) = off / denom;
  x.row(0) /= denom;
  for (Eigen::Index j = 1; j < S; ++j) {
    denom = diag(j) - off * c(j - 1);
    c(j) = off / denom;
    x.row(j) = (x.row(j) - off * x.row(j - 1)) / denom;
  }
  for (Eigen::Index j = S - 2; j >= 0; --j) x.row(j) -= c(j) * x.row(j + 1);
  return x;
}

template <typename Scalar>
Matrix<Scalar> graph_laplacian(const Matrix<Scalar>& adjacency) {
  Matrix<Scalar> lap = -adjacency;
  lap.diagonal() += adjacency.rowwise().sum();
  return lap;
}

template <typename Scalar>
Matrix<Scalar> chain_adjacency(Eigen::Index S) {
  Matrix<Scalar> a = Matrix<Scalar>::Zero(S, S);
  for (Eigen::Index j = 0; j + 1 < S; ++j) a(j, j + 1) = a(j + 1, j) = Scalar(1);
  return a;
}

/// Applies (alpha * L + (1 - alpha) I)^{-1} to every column of rhs.
template <typename Derived>
Matrix<typename Derived::Scalar> solve_smoothing_system(const SmoothConfig& cfg,
                                                        const Eigen::MatrixBase<Derived>& rhs) {
  using Scalar = typename Derived::Scalar;
  if (!cfg.adjacency) return solve_chain_system(cfg.alpha, rhs);
  detail::check_alpha(cfg.alpha);
  const Matrix<Scalar> adj = cfg.adjacency->template cast<Scalar>();
  if (adj.rows() != rhs.rows() || adj.cols() != rhs.rows())
    throw std::invalid_argument("smooth: adjacency size differs from the number of instances");
  const Scalar a = static_cast<Scalar>(cfg.alpha);
  Matrix<Scalar> system = a * graph_laplacian(adj);
  system.diagonal().array() += Scalar(1) - a;
  return system.ldlt().solve(rhs);
}

template <typename Derived>
Matrix<typename Derived::Scalar> smooth(const Eigen::MatrixBase<Derived>& h,
                                        const SmoothConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  detail::require_nonempty(h, "smooth");
  detail::check_alpha(cfg.alpha);
  return solve_smoothing_system(cfg, (Scalar(1) - static_cast<Scalar>(cfg.alpha)) * h);
}

// ---------------------------------------------------------------------------
// Single-head self-attention over [class token; instances].

template <typename Scalar>
struct AttnParams {
  Matrix<Scalar> W_Q;        // d x M
  Matrix<Scalar> W_K;        // d x M
  Matrix<Scalar> W_V;        // d x M
  Vector<Scalar> class_token;  // M

  Eigen::Index head_dim() const { return W_Q.rows(); }
};

template <typename Scalar>
struct SelfAttentionOutput {
  Vector<Scalar> class_output;  // d
  Matrix<Scalar> attention;     // (S+1) x (S+1), row-stochastic
};

template <typename Derived>
SelfAttentionOutput<typename Derived::Scalar> self_attention_forward(
    const Eigen::MatrixBase<Derived>& h, const AttnParams<typename Derived::Scalar>& p) {
  using Scalar = typename Derived::Scalar;
  detail::require_nonempty(h, "self_attention_forward");
  const Eigen::Index M = h.cols();
  const Eigen::Index d = p.W_Q.rows();
  if (d < 1 || p.W_Q.cols() != M || p.W_K.rows() != d || p.W_K.cols() != M ||
      p.W_V.rows() != d || p.W_V.cols() != M || p.class_token.size() != M)
    throw std::invalid_argument("self_attention_forward: parameter shapes do not match");

  const Eigen::Index S = h.rows();
  Matrix<Scalar> x(S + 1, M);
  x.row(0) = p.class_token.transpose();
  x.bottomRows(S) = h;

  const Matrix<Scalar> q = x * p.W_Q.transpose();
  const Matrix<Scalar> k = x * p.W_K.transpose();
  const Matrix<Scalar> v = x * p.W_V.transpose();

  SelfAttentionOutput<Scalar> out;
  out.attention = (q * k.transpose()) / std::sqrt(static_cast<Scalar>(d));
  for (Eigen::Index r = 0; r < S + 1; ++r)
    out.attention.row(r) = softmax(out.attention.row(r).transpose()).transpose();
  out.class_output = (out.attention.row(0) * v).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// 1-D convolution along the instance axis, per feature column, zero padded:
// out_j = sum_{t=-T}^{T} kernel[t + T] * h_{j + t}.

template <typename Derived, typename KernelDerived>
Matrix<typename Derived::Scalar> conv_over_instances(const Eigen::MatrixBase<Derived>& h,
                                                     const Eigen::MatrixBase<KernelDerived>& kernel) {
  using Scalar = typename Derived::Scalar;
  detail::require_nonempty(h, "conv_over_instances");
  const Eigen::Index len = kernel.size();
  const Eigen::Index S = h.rows();
  if (len < 1 || len % 2 == 0)
    throw std::invalid_argument("conv_over_instances: kernel length must be odd");
  if (len > 2 * S - 1)
    throw std::invalid_argument("conv_over_instances: kernel longer than 2S - 1");
  const Eigen::Index T = len / 2;
  Matrix<Scalar> out = Matrix<Scalar>::Zero(S, h.cols());
  for (Eigen::Index t = -T; t <= T; ++t) {
    const Scalar w = static_cast<Scalar>(kernel(t + T));
    if (w == Scalar(0)) continue;
    // Rows j with 0 <= j + t < S.
    const Eigen::Index first = std::max<Eigen::Index>(0, -t);
    const Eigen::Index last = std::min<Eigen::Index>(S, S - t);
    if (last <= first) continue;
    out.middleRows(first, last - first) += w * h.middleRows(first + t, last - first);
  }
  return out;
}

}  // namespace cmil
