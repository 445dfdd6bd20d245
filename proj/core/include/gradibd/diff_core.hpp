#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace gradibd::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kCosineEps = 1e-12;
inline constexpr double kLayerNormEps = 1e-5;

class Tape;

/// Handle to a value recorded on a Tape. Vectors are 1 x d rows; a matrix
/// with n rows is a batch of n row vectors.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Gradient after Tape::backward; a zero matrix if nothing reached it.
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records a forward computation and replays it in reverse. One tape per
/// forward pass; tapes are not shared between threads.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf that receives a gradient. The value is copied onto the tape.
  Var variable(Matrix value);
  /// Leaf that receives a gradient and borrows `value`; the matrix must
  /// outlive the tape and stay unmodified while it is alive.
  Var parameter(const Matrix& value);

  /// Records an op output. `backward` runs only when some parent requires a
  /// gradient.
  Var record(Matrix value, std::span<const Var> parents, BackwardFn backward);
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward));
  }

  void backward(Var loss);

  const Matrix& value(std::size_t id) const;
  const Matrix& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Adds `delta` into the gradient of node `id`; no-op for constants.
  template <typename Expr>
  void accumulate(std::size_t id, const Expr& delta) {
    auto& node = nodes_[id];
    if (!node.requires_grad) return;
    ensure_grad(id);
    node.grad += delta;
  }
  /// Direct access for sparse updates (allocates a zero gradient first).
  Matrix* grad_buffer(std::size_t id);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* borrowed = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;

    const Matrix& value() const { return borrowed ? *borrowed : owned; }
  };

  void ensure_grad(std::size_t id);
  Var push(Node node);

  // deque keeps value references stable while new nodes are recorded.
  std::deque<Node> nodes_;
  mutable Matrix empty_grad_;
};

void backward(Var loss);

// Elementwise and structural ops.
Var add(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double constant);
Var relu(Var x);
Var sum(Var x);
Var matmul(Var a, Var b);
/// Multiplies column j of `a` by the constant factors[j].
Var scale_cols(Var a, const Vector& factors);
/// Divides every row by its sum.
Var normalize_rows(Var x);
Var slice_rows(Var x, Eigen::Index begin, Eigen::Index count);
Var vstack(std::span<const Var> parts);
Var gather_rows(Var table, std::span<const std::int32_t> rows);

// Network ops.
/// y = x W^T + b for each row of x. W is d_out x d_in, b is 1 x d_out.
Var linear(Var x, Var weight, Var bias);
/// Row-wise standardization with population variance, then gamma * xhat + beta.
Var layer_norm(Var x, Var gamma, Var beta);
/// a . b / (|a| |b| + 1e-12) for two 1 x d rows.
Var cosine_sim(Var a, Var b);
/// Pairwise cosine similarity: out(i, j) = cos(a_i, b_j).
Var cosine_matrix(Var a, Var b);
/// Mean over rows; n x d -> 1 x d. Throws EmptyInput for n = 0.
Var mean_pool(Var rows);
/// Stable binary cross-entropy on a 1 x 1 logit.
Var bce_with_logit(Var logit, int label);

double sigmoid(double logit) noexcept;

// Optimizer.

struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// One bias-corrected Adam update. Moments are created on the first call.
/// Throws ShapeMismatch, or NonFiniteGradient (naming the parameter) before
/// anything is modified.
void adam_step(std::span<const ParamRef> params, std::span<const Matrix> grads, AdamState& state);

}  // namespace gradibd::ad
