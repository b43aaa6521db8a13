#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "polish/common.hpp"
#include "polish/rng.hpp"

namespace polish {

// Fixed-topology dense net: affine -> ReLU -> ... -> affine. Templated on the
// scalar so training runs in float while gradient checks run in double.
template <typename S>
struct Mlp {
  using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  std::vector<int> sizes;     // {in, hidden..., out}
  std::vector<Matrix> W;      // W[l]: sizes[l+1] x sizes[l]
  std::vector<Vector> b;

  int layers() const { return static_cast<int>(W.size()); }
  int input_dim() const { return sizes.front(); }
  int output_dim() const { return sizes.back(); }

  static Mlp zeros(std::vector<int> sizes_in) {
    if (sizes_in.size() < 2) throw ConfigError("mlp needs input and output sizes");
    Mlp m;
    m.sizes = std::move(sizes_in);
    for (std::size_t l = 0; l + 1 < m.sizes.size(); ++l) {
      m.W.emplace_back(Matrix::Zero(m.sizes[l + 1], m.sizes[l]));
      m.b.emplace_back(Vector::Zero(m.sizes[l + 1]));
    }
    return m;
  }

  // Uniform fan-in init (+-1/sqrt(fan_in)); the last layer can be scaled
  // down (used for policy heads).
  static Mlp random(std::vector<int> sizes_in, Rng& rng, double final_scale = 1.0) {
    Mlp m = zeros(std::move(sizes_in));
    for (int l = 0; l < m.layers(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(m.sizes[l]));
      const double scale = (l == m.layers() - 1) ? final_scale : 1.0;
      for (int j = 0; j < m.W[l].cols(); ++j)
        for (int i = 0; i < m.W[l].rows(); ++i)
          m.W[l](i, j) = static_cast<S>(scale * rng.uniform(-bound, bound));
      for (int i = 0; i < m.b[l].size(); ++i)
        m.b[l](i) = static_cast<S>(scale * rng.uniform(-bound, bound));
    }
    return m;
  }

  // Batched forward; columns are samples. When cache is given, the layer
  // inputs are kept for backward(). Cache buffers are reused across calls of
  // the same batch shape, keeping the update loop allocation-free.
  struct Cache {
    std::vector<Matrix> acts;  // acts[l] = input of layer l; acts[L] = output
    Matrix scratch_a, scratch_b;
  };

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const {
    if (x.rows() != input_dim()) throw ConfigError("mlp forward: input size mismatch");
    if (!cache) {
      Matrix a = x;
      for (int l = 0; l < layers(); ++l) {
        Matrix z = (W[l] * a).colwise() + b[l];
        if (l + 1 < layers()) z = z.cwiseMax(S(0));
        a = std::move(z);
      }
      return a;
    }
    cache->acts.resize(W.size() + 1);
    cache->acts[0] = x;
    for (int l = 0; l < layers(); ++l) {
      Matrix& out = cache->acts[l + 1];
      out.resize(W[l].rows(), x.cols());
      out.noalias() = W[l] * cache->acts[l];
      out.colwise() += b[l];
      if (l + 1 < layers()) out = out.cwiseMax(S(0));
    }
    return cache->acts.back();
  }

  Vector forward(const Vector& x) const {
    const Matrix out = forward(Matrix(x));
    return out.col(0);
  }

  struct Grads {
    std::vector<Matrix> dW;
    std::vector<Vector> db;

    void init_like(const Mlp& m) {
      if (static_cast<int>(dW.size()) == m.layers()) {
        bool ok = true;
        for (int l = 0; l < m.layers(); ++l)
          if (dW[l].rows() != m.W[l].rows() || dW[l].cols() != m.W[l].cols()) ok = false;
        if (ok) return;  // buffers already shaped; backward overwrites them
      }
      dW.clear();
      db.clear();
      for (int l = 0; l < m.layers(); ++l) {
        dW.emplace_back(Matrix::Zero(m.W[l].rows(), m.W[l].cols()));
        db.emplace_back(Vector::Zero(m.b[l].size()));
      }
    }

    bool all_finite() const {
      for (const auto& m : dW)
        if (!m.allFinite()) return false;
      for (const auto& v : db)
        if (!v.allFinite()) return false;
      return true;
    }
  };

  // Exact reverse-mode gradients. dY is the gradient at the output; returns
  // the gradient at the input (empty when need_input_grad is false). grads
  // may be null when only the input gradient is needed.
  Matrix backward(Cache& cache, const Matrix& dy, Grads* grads = nullptr,
                  bool need_input_grad = true) const {
    if (static_cast<int>(cache.acts.size()) != layers() + 1)
      throw UsageError("mlp backward: forward cache missing or stale");
    Matrix* delta = &cache.scratch_a;
    Matrix* next = &cache.scratch_b;
    *delta = dy;
    if (grads) grads->init_like(*this);
    for (int l = layers() - 1; l >= 0; --l) {
      // cache.acts[l+1] holds post-ReLU activations for hidden layers
      if (l + 1 < layers())
        delta->array() *= (cache.acts[l + 1].array() > S(0)).template cast<S>();
      if (grads) {
        grads->dW[l].noalias() = *delta * cache.acts[l].transpose();
        grads->db[l] = delta->rowwise().sum();
      }
      if (l == 0 && !need_input_grad) return Matrix();
      next->resize(W[l].cols(), delta->cols());
      next->noalias() = W[l].transpose() * *delta;
      std::swap(delta, next);
    }
    return *delta;  // gradient w.r.t. the input
  }

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (int l = 0; l < layers(); ++l) n += W[l].size() + b[l].size();
    return n;
  }

  template <typename F>
  void for_each_param(F&& f) {
    for (int l = 0; l < layers(); ++l) {
      f(W[l]);
      f(b[l]);
    }
  }

  template <typename F>
  void for_each_param(F&& f) const {
    for (int l = 0; l < layers(); ++l) {
      f(W[l]);
      f(b[l]);
    }
  }
};

// target <- (1 - xi) target + xi source
template <typename S>
void polyak_update(Mlp<S>& target, const Mlp<S>& source, S xi) {
  if (target.sizes != source.sizes)
    throw ConfigError("polyak: architecture mismatch");
  for (int l = 0; l < target.layers(); ++l) {
    target.W[l] = (S(1) - xi) * target.W[l] + xi * source.W[l];
    target.b[l] = (S(1) - xi) * target.b[l] + xi * source.b[l];
  }
}

// Standard bias-corrected Adam over an Mlp's parameters. Skips (and flags)
// updates whose gradients are non-finite.
template <typename S>
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp<S>& net, double lr) : lr_(lr) {
    m_.init_like(net);
    v_.init_like(net);
  }

  bool update(Mlp<S>& net, const typename Mlp<S>::Grads& g) {
    if (!g.all_finite()) {
      diag::warn("adam: non-finite gradient, update skipped");
      ++skipped_;
      return false;
    }
    ++step_;
    const S bc1 = S(1) - static_cast<S>(std::pow(beta1_, step_));
    const S bc2 = S(1) - static_cast<S>(std::pow(beta2_, step_));
    for (int l = 0; l < net.layers(); ++l) {
      update_block(net.W[l], g.dW[l], m_.dW[l], v_.dW[l], bc1, bc2);
      update_block(net.b[l], g.db[l], m_.db[l], v_.db[l], bc1, bc2);
    }
    return true;
  }

  long step() const { return step_; }
  long skipped() const { return skipped_; }
  double learning_rate() const { return lr_; }

  typename Mlp<S>::Grads& moments_m() { return m_; }
  typename Mlp<S>::Grads& moments_v() { return v_; }
  void set_step(long s) { step_ = s; }

 private:
  template <typename M, typename G>
  void update_block(M& p, const G& g, G& m, G& v, S bc1, S bc2) {
    m = static_cast<S>(beta1_) * m + static_cast<S>(1 - beta1_) * g;
    v = static_cast<S>(beta2_) * v + static_cast<S>(1 - beta2_) * g.cwiseProduct(g);
    p.array() -= static_cast<S>(lr_) * (m.array() / bc1) /
                 ((v.array() / bc2).sqrt() + static_cast<S>(eps_));
  }

  double lr_ = 3e-4;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long step_ = 0;
  long skipped_ = 0;
  typename Mlp<S>::Grads m_, v_;
};

// Adam on a single scalar (used for the entropy temperature).
class AdamScalar {
 public:
  explicit AdamScalar(double lr = 3e-4) : lr_(lr) {}

  bool update(double& p, double g) {
    if (!std::isfinite(g)) {
      diag::warn("adam-scalar: non-finite gradient, update skipped");
      return false;
    }
    ++step_;
    m_ = 0.9 * m_ + 0.1 * g;
    v_ = 0.999 * v_ + 0.001 * g * g;
    const double mh = m_ / (1.0 - std::pow(0.9, step_));
    const double vh = v_ / (1.0 - std::pow(0.999, step_));
    p -= lr_ * mh / (std::sqrt(vh) + 1e-8);
    return true;
  }

  double m() const { return m_; }
  double v() const { return v_; }
  long step() const { return step_; }
  void restore(double m, double v, long step) {
    m_ = m;
    v_ = v;
    step_ = step;
  }

 private:
  double lr_;
  double m_ = 0.0, v_ = 0.0;
  long step_ = 0;
};

}  // namespace polish
