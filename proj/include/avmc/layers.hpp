#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "avmc/rng.hpp"
#include "avmc/types.hpp"

namespace avmc {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// View over one named tensor of a model; value/grad point into storage owned
// by the layer. Non-trainable tensors (batch-norm running stats) have a null
// grad.
template <typename S>
struct ParamView {
  std::string name;
  S* value = nullptr;
  S* grad = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool trainable = true;

  Eigen::Index size() const { return rows * cols; }
};

namespace detail {

template <typename S, int R, int C, int O>
ParamView<S> view(const std::string& name, Eigen::Matrix<S, R, C, O>& value,
                  Eigen::Matrix<S, R, C, O>* grad, bool trainable = true) {
  return ParamView<S>{name, value.data(), grad ? grad->data() : nullptr, value.rows(),
                      value.cols(), trainable};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename S>
inline void apply_activation(Activation act, Mat<S>& x) {
  switch (act) {
    case Activation::relu:
      x = x.array().max(S(0)).matrix();
      break;
    case Activation::tanh:
      x = x.array().tanh().matrix();
      break;
    case Activation::leaky_relu:
      x = x.unaryExpr([](S v) { return v > S(0) ? v : S(0.01) * v; });
      break;
    case Activation::identity:
      break;
  }
}

// Derivative w.r.t. the pre-activation, given both pre- and post-activation.
template <typename S>
inline Mat<S> activation_grad(Activation act, const Mat<S>& pre, const Mat<S>& post) {
  switch (act) {
    case Activation::relu:
      return pre.unaryExpr([](S v) { return v > S(0) ? S(1) : S(0); });
    case Activation::tanh:
      return (S(1) - post.array().square()).matrix();
    case Activation::leaky_relu:
      return pre.unaryExpr([](S v) { return v > S(0) ? S(1) : S(0.01); });
    case Activation::identity:
      return Mat<S>::Ones(pre.rows(), pre.cols());
  }
  return Mat<S>::Ones(pre.rows(), pre.cols());
}

// ---------------------------------------------------------------------------
// Dense layer: y = act(W x + b), batches as columns
// ---------------------------------------------------------------------------

template <typename S>
struct Dense {
  Mat<S> W;
  Vec<S> b;
  Mat<S> dW;
  Vec<S> db;
  Activation act = Activation::identity;

  struct Cache {
    Mat<S> x;     // [in x B]
    Mat<S> pre;   // [out x B]
    Mat<S> post;  // [out x B]
  };

  void init(int out_dim, int in_dim, Activation activation, RandomSource& rng) {
    act = activation;
    W.resize(out_dim, in_dim);
    b.resize(out_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = S(rng.uniform(-bound, bound));
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = S(rng.uniform(-bound, bound));
    zero_grad();
  }

  void zero_grad() {
    dW = Mat<S>::Zero(W.rows(), W.cols());
    db = Vec<S>::Zero(b.size());
  }

  Mat<S> forward(const Mat<S>& x, Cache* cache = nullptr) const {
    if (x.rows() != W.cols()) {
      throw ShapeError("Dense: input has " + std::to_string(x.rows()) + " rows, expected " +
                       std::to_string(W.cols()));
    }
    Mat<S> pre = (W * x).colwise() + b;
    Mat<S> post = pre;
    apply_activation(act, post);
    if (cache) {
      cache->x = x;
      cache->pre = pre;
      cache->post = post;
    }
    return post;
  }

  // Accumulates dW/db, returns the gradient w.r.t. the input.
  Mat<S> backward(const Cache& cache, const Mat<S>& dy) {
    const Mat<S> dpre = dy.cwiseProduct(activation_grad(act, cache.pre, cache.post));
    dW.noalias() += dpre * cache.x.transpose();
    db.noalias() += dpre.rowwise().sum();
    return W.transpose() * dpre;
  }

  void visit(const std::string& prefix, std::vector<ParamView<S>>& out) {
    out.push_back(detail::view(prefix + ".W", W, &dW));
    out.push_back(detail::view(prefix + ".b", b, &db));
  }
};

// ---------------------------------------------------------------------------
// Batch normalization over features, batches as columns
// ---------------------------------------------------------------------------

template <typename S>
struct BatchNorm {
  Vec<S> gamma, beta;
  Vec<S> dgamma, dbeta;
  Vec<S> running_mean, running_var;
  S eps = S(1e-5);
  S momentum = S(0.1);

  struct Cache {
    Mat<S> xhat;     // [D x B]
    Mat<S> xc;       // centered input
    Vec<S> inv_std;  // 1/sqrt(var + eps)
    bool training = false;
  };

  void init(int dim) {
    gamma = Vec<S>::Ones(dim);
    beta = Vec<S>::Zero(dim);
    running_mean = Vec<S>::Zero(dim);
    running_var = Vec<S>::Ones(dim);
    zero_grad();
  }

  void zero_grad() {
    dgamma = Vec<S>::Zero(gamma.size());
    dbeta = Vec<S>::Zero(beta.size());
  }

  // Training mode normalizes with batch statistics and updates the running
  // stats (biased variance for normalization, unbiased for the running
  // estimate). Eval mode is a per-instance affine map.
  Mat<S> forward(const Mat<S>& x, bool training, Cache* cache = nullptr) {
    if (x.rows() != gamma.size()) {
      throw ShapeError("BatchNorm: input has " + std::to_string(x.rows()) + " rows, expected " +
                       std::to_string(gamma.size()));
    }
    const auto n = static_cast<S>(x.cols());
    Mat<S> xc, xhat;
    Vec<S> inv_std;
    if (training) {
      const Vec<S> mean = x.rowwise().mean();
      xc = x.colwise() - mean;
      const Vec<S> var = xc.array().square().matrix().rowwise().mean();
      inv_std = (var.array() + eps).rsqrt().matrix();
      xhat = xc.array().colwise() * inv_std.array();
      const S unbias = x.cols() > 1 ? n / (n - S(1)) : S(1);
      running_mean = (S(1) - momentum) * running_mean + momentum * mean;
      running_var = (S(1) - momentum) * running_var + momentum * (unbias * var);
    } else {
      xc = x.colwise() - running_mean;
      inv_std = (running_var.array() + eps).rsqrt().matrix();
      xhat = xc.array().colwise() * inv_std.array();
    }
    if (cache) {
      cache->xhat = xhat;
      cache->xc = xc;
      cache->inv_std = inv_std;
      cache->training = training;
    }
    return (xhat.array().colwise() * gamma.array()).matrix().colwise() + beta;
  }

  Mat<S> backward(const Cache& cache, const Mat<S>& dy) {
    dgamma.noalias() += dy.cwiseProduct(cache.xhat).rowwise().sum();
    dbeta.noalias() += dy.rowwise().sum();
    const Mat<S> dxhat = dy.array().colwise() * gamma.array();
    if (!cache.training) {
      return dxhat.array().colwise() * cache.inv_std.array();
    }
    // Backprop through the batch mean and variance.
    const auto n = static_cast<S>(dy.cols());
    const Vec<S> sum_dxhat = dxhat.rowwise().sum();
    const Vec<S> sum_dxhat_xhat = dxhat.cwiseProduct(cache.xhat).rowwise().sum();
    Mat<S> dx = n * dxhat;
    dx.colwise() -= sum_dxhat;
    dx -= (cache.xhat.array().colwise() * sum_dxhat_xhat.array()).matrix();
    dx.array().colwise() *= (cache.inv_std.array() / n);
    return dx;
  }

  void visit(const std::string& prefix, std::vector<ParamView<S>>& out) {
    out.push_back(detail::view(prefix + ".gamma", gamma, &dgamma));
    out.push_back(detail::view(prefix + ".beta", beta, &dbeta));
    out.push_back(detail::view(prefix + ".running_mean", running_mean,
                               static_cast<Vec<S>*>(nullptr), false));
    out.push_back(detail::view(prefix + ".running_var", running_var,
                               static_cast<Vec<S>*>(nullptr), false));
  }
};

// ---------------------------------------------------------------------------
// LSTM, one direction. Gate order i, f, g, o.
// ---------------------------------------------------------------------------

template <typename S>
struct LstmCell {
  Mat<S> W_ih;  // [4H x in]
  Mat<S> W_hh;  // [4H x H]
  Vec<S> b;     // [4H]
  Mat<S> dW_ih, dW_hh;
  Vec<S> db;
  int hidden = 0;

  struct Cache {
    Mat<S> x;  // [in x T]
    Mat<S> gi, gf, gg, go;  // post-activation gates, [H x T]
    Mat<S> c;               // cell states, [H x T]
    Mat<S> tc;              // tanh(c), [H x T]
    Mat<S> h;               // outputs, [H x T]
  };

  void init(int hidden_dim, int in_dim, RandomSource& rng) {
    hidden = hidden_dim;
    W_ih.resize(4 * hidden, in_dim);
    W_hh.resize(4 * hidden, hidden);
    b.resize(4 * hidden);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (Eigen::Index i = 0; i < W_ih.size(); ++i) W_ih.data()[i] = S(rng.uniform(-bound, bound));
    for (Eigen::Index i = 0; i < W_hh.size(); ++i) W_hh.data()[i] = S(rng.uniform(-bound, bound));
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = S(rng.uniform(-bound, bound));
    zero_grad();
  }

  void zero_grad() {
    dW_ih = Mat<S>::Zero(W_ih.rows(), W_ih.cols());
    dW_hh = Mat<S>::Zero(W_hh.rows(), W_hh.cols());
    db = Vec<S>::Zero(b.size());
  }

  static Vec<S> sigmoid(const Vec<S>& v) {
    return v.unaryExpr([](S x) { return S(1) / (S(1) + std::exp(-x)); });
  }

  // Consumes x as [in x T] in scan order; the caller reverses columns for
  // the backward direction.
  Mat<S> forward(const Mat<S>& x, Cache* cache) const {
    const auto T = x.cols();
    const int H = hidden;
    Cache local;
    Cache& c = cache ? *cache : local;
    c.x = x;
    c.gi.resize(H, T);
    c.gf.resize(H, T);
    c.gg.resize(H, T);
    c.go.resize(H, T);
    c.c.resize(H, T);
    c.tc.resize(H, T);
    c.h.resize(H, T);

    Vec<S> h_prev = Vec<S>::Zero(H);
    Vec<S> c_prev = Vec<S>::Zero(H);
    for (Eigen::Index t = 0; t < T; ++t) {
      const Vec<S> pre = W_ih * x.col(t) + W_hh * h_prev + b;
      const Vec<S> i = sigmoid(pre.segment(0, H));
      const Vec<S> f = sigmoid(pre.segment(H, H));
      const Vec<S> g = pre.segment(2 * H, H).array().tanh().matrix();
      const Vec<S> o = sigmoid(pre.segment(3 * H, H));
      const Vec<S> ct = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
      const Vec<S> tct = ct.array().tanh().matrix();
      const Vec<S> ht = o.cwiseProduct(tct);
      c.gi.col(t) = i;
      c.gf.col(t) = f;
      c.gg.col(t) = g;
      c.go.col(t) = o;
      c.c.col(t) = ct;
      c.tc.col(t) = tct;
      c.h.col(t) = ht;
      h_prev = ht;
      c_prev = ct;
    }
    return c.h;
  }

  // dh holds per-step output gradients [H x T]; accumulates parameter grads,
  // optionally fills dx [in x T].
  void backward(const Cache& cache, const Mat<S>& dh_steps, Mat<S>* dx) {
    const auto T = cache.h.cols();
    const int H = hidden;
    if (dx) *dx = Mat<S>::Zero(cache.x.rows(), T);
    Vec<S> dh_next = Vec<S>::Zero(H);
    Vec<S> dc_next = Vec<S>::Zero(H);
    Vec<S> dpre(4 * H);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const Vec<S> dh = dh_steps.col(t) + dh_next;
      const auto& i = cache.gi.col(t);
      const auto& f = cache.gf.col(t);
      const auto& g = cache.gg.col(t);
      const auto& o = cache.go.col(t);
      const auto& tc = cache.tc.col(t);
      const Vec<S> do_ = dh.cwiseProduct(tc);
      const Vec<S> dc =
          dh.cwiseProduct(o).cwiseProduct((S(1) - tc.array().square()).matrix()) + dc_next;
      const Vec<S> c_prev = t > 0 ? Vec<S>(cache.c.col(t - 1)) : Vec<S>::Zero(H);
      const Vec<S> h_prev = t > 0 ? Vec<S>(cache.h.col(t - 1)) : Vec<S>::Zero(H);
      dpre.segment(0, H) =
          dc.cwiseProduct(g).cwiseProduct(i.cwiseProduct((S(1) - i.array()).matrix()));
      dpre.segment(H, H) =
          dc.cwiseProduct(c_prev).cwiseProduct(f.cwiseProduct((S(1) - f.array()).matrix()));
      dpre.segment(2 * H, H) = dc.cwiseProduct(i).cwiseProduct((S(1) - g.array().square()).matrix());
      dpre.segment(3 * H, H) =
          do_.cwiseProduct(o.cwiseProduct((S(1) - o.array()).matrix()));
      dW_ih.noalias() += dpre * cache.x.col(t).transpose();
      dW_hh.noalias() += dpre * h_prev.transpose();
      db.noalias() += dpre;
      if (dx) dx->col(t) = W_ih.transpose() * dpre;
      dh_next.noalias() = W_hh.transpose() * dpre;
      dc_next = dc.cwiseProduct(f);
    }
  }

  void visit(const std::string& prefix, std::vector<ParamView<S>>& out) {
    out.push_back(detail::view(prefix + ".W_ih", W_ih, &dW_ih));
    out.push_back(detail::view(prefix + ".W_hh", W_hh, &dW_hh));
    out.push_back(detail::view(prefix + ".b", b, &db));
  }
};

}  // namespace avmc
