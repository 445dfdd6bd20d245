#include "gradibd/diff_core.hpp"

#include <cmath>
#include <string>

#include "gradibd/error.hpp"

namespace gradibd::ad {

namespace {

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_tape(Var a, Var b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    fail(ErrorCode::ShapeMismatch, "operands recorded on different tapes");
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::ShapeMismatch, std::string(op) + ": " + shape_of(a) + " vs " + shape_of(b));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Var / Tape

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Matrix value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(const Matrix& value) {
  Node n;
  n.borrowed = &value;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::span<const Var> parents, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  for (const auto& p : parents) {
    if (p.tape() != this) fail(ErrorCode::ShapeMismatch, "operand recorded on a different tape");
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Matrix& Tape::value(std::size_t id) const { return nodes_[id].value(); }

const Matrix& Tape::grad(std::size_t id) const {
  const auto& node = nodes_[id];
  if (node.has_grad) return node.grad;
  const auto& v = node.value();
  if (empty_grad_.rows() != v.rows() || empty_grad_.cols() != v.cols()) {
    empty_grad_ = Matrix::Zero(v.rows(), v.cols());
  }
  return empty_grad_;
}

void Tape::ensure_grad(std::size_t id) {
  auto& node = nodes_[id];
  if (!node.has_grad) {
    node.grad = Matrix::Zero(node.value().rows(), node.value().cols());
    node.has_grad = true;
  }
}

Matrix* Tape::grad_buffer(std::size_t id) {
  if (!nodes_[id].requires_grad) return nullptr;
  ensure_grad(id);
  return &nodes_[id].grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) fail(ErrorCode::ShapeMismatch, "loss recorded on a different tape");
  const auto& v = value(loss.id());
  if (v.rows() != 1 || v.cols() != 1) {
    fail(ErrorCode::NotScalar, "backward requires a 1x1 loss, got " + shape_of(v));
  }
  for (auto& node : nodes_) {
    node.has_grad = false;
    node.grad.resize(0, 0);
  }
  if (!nodes_[loss.id()].requires_grad) return;
  ensure_grad(loss.id());
  nodes_[loss.id()].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.has_grad && node.backward) node.backward(*this, node.grad);
  }
}

void backward(Var loss) {
  if (!loss.valid()) fail(ErrorCode::NotScalar, "backward on an empty value");
  loss.tape()->backward(loss);
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var scale(Var a, double factor) {
  const auto ia = a.id();
  return a.tape()->record(a.value() * factor, {a},
                          [ia, factor](Tape& t, const Matrix& g) { t.accumulate(ia, g * factor); });
}

Var add_scalar(Var a, double constant) {
  const auto ia = a.id();
  Matrix out = a.value().array() + constant;
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g); });
}

Var relu(Var x) {
  const auto ix = x.id();
  Matrix out = x.value().cwiseMax(0.0);
  return x.tape()->record(std::move(out), {x}, [ix](Tape& t, const Matrix& g) {
    const auto& in = t.value(ix);
    t.accumulate(ix, (in.array() > 0.0).select(g, 0.0).matrix());
  });
}

Var sum(Var x) {
  const auto ix = x.id();
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape()->record(std::move(out), {x}, [ix](Tape& t, const Matrix& g) {
    const auto& in = t.value(ix);
    t.accumulate(ix, Matrix::Constant(in.rows(), in.cols(), g(0, 0)));
  });
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  if (a.cols() != b.rows()) {
    fail(ErrorCode::ShapeMismatch, "matmul: " + shape_of(a.value()) + " * " + shape_of(b.value()));
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var scale_cols(Var a, const Vector& factors) {
  if (factors.size() != a.cols()) {
    fail(ErrorCode::ShapeMismatch, "scale_cols: " + std::to_string(factors.size()) +
                                       " factors for " + shape_of(a.value()));
  }
  const auto ia = a.id();
  Matrix out = a.value() * factors.asDiagonal();
  return a.tape()->record(std::move(out), {a}, [ia, factors](Tape& t, const Matrix& g) {
    t.accumulate(ia, g * factors.asDiagonal());
  });
}

Var normalize_rows(Var x) {
  const auto ix = x.id();
  Vector sums = x.value().rowwise().sum();
  Matrix out = sums.cwiseInverse().asDiagonal() * x.value();
  return x.tape()->record(out, {x}, [ix, sums, out](Tape& t, const Matrix& g) {
    // d/dx_ij of x_ik / s_i = (delta_jk - y_ik) / s_i
    const Vector dot = (g.array() * out.array()).rowwise().sum();
    Matrix dx = g;
    dx.colwise() -= dot;
    t.accumulate(ix, sums.cwiseInverse().asDiagonal() * dx);
  });
}

Var slice_rows(Var x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > x.rows()) {
    fail(ErrorCode::ShapeMismatch, "slice_rows out of range for " + shape_of(x.value()));
  }
  const auto ix = x.id();
  return x.tape()->record(x.value().middleRows(begin, count), {x},
                          [ix, begin, count](Tape& t, const Matrix& g) {
                            if (Matrix* buf = t.grad_buffer(ix)) buf->middleRows(begin, count) += g;
                          });
}

Var vstack(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::EmptyInput, "vstack of nothing");
  Tape* tape = parts.front().tape();
  const auto cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.tape() != tape) fail(ErrorCode::ShapeMismatch, "vstack operands on different tapes");
    if (p.cols() != cols) fail(ErrorCode::ShapeMismatch, "vstack column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(at);
    at += p.rows();
  }
  return tape->record(std::move(out), parts, [ids, offsets](Tape& t, const Matrix& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      const auto n = t.value(ids[k]).rows();
      t.accumulate(ids[k], g.middleRows(offsets[k], n));
    }
  });
}

Var gather_rows(Var table, std::span<const std::int32_t> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix out(n, table.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= table.rows()) fail(ErrorCode::ShapeMismatch, "gather_rows index out of range");
    out.row(i) = table.value().row(r);
  }
  const auto it = table.id();
  std::vector<std::int32_t> idx(rows.begin(), rows.end());
  return table.tape()->record(std::move(out), {table}, [it, idx](Tape& t, const Matrix& g) {
    Matrix* buf = t.grad_buffer(it);
    if (!buf) return;
    for (std::size_t i = 0; i < idx.size(); ++i) buf->row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

// ---------------------------------------------------------------------------
// Network ops

Var linear(Var x, Var weight, Var bias) {
  require_same_tape(x, weight);
  require_same_tape(x, bias);
  const auto& W = weight.value();
  const auto& b = bias.value();
  if (x.cols() != W.cols() || b.rows() != 1 || b.cols() != W.rows()) {
    fail(ErrorCode::ShapeMismatch, "linear: x " + shape_of(x.value()) + ", W " + shape_of(W) + ", b " +
                                       shape_of(b));
  }
  Matrix out = x.value() * W.transpose();
  out.rowwise() += b.row(0);
  const auto ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape()->record(std::move(out), {x, weight, bias}, [ix, iw, ib](Tape& t, const Matrix& g) {
    if (t.requires_grad(ix)) t.accumulate(ix, g * t.value(iw));
    if (t.requires_grad(iw)) t.accumulate(iw, g.transpose() * t.value(ix));
    if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
  });
}

Var layer_norm(Var x, Var gamma, Var beta) {
  require_same_tape(x, gamma);
  require_same_tape(x, beta);
  const auto d = x.cols();
  if (d < 2) fail(ErrorCode::ShapeMismatch, "layer_norm needs at least 2 features");
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d) {
    fail(ErrorCode::ShapeMismatch, "layer_norm affine parameters must be 1x" + std::to_string(d));
  }
  const auto& in = x.value();
  const Vector mean = in.rowwise().mean();
  Matrix centered = in.colwise() - mean;
  const Vector var = centered.array().square().rowwise().mean();
  const Vector inv_std = (var.array() + kLayerNormEps).rsqrt();
  Matrix xhat = inv_std.asDiagonal() * centered;
  Matrix out = xhat.array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);

  const auto ix = x.id(), ig = gamma.id(), ibeta = beta.id();
  return x.tape()->record(std::move(out), {x, gamma, beta},
                          [ix, ig, ibeta, xhat, inv_std](Tape& t, const Matrix& g) {
                            if (t.requires_grad(ig)) t.accumulate(ig, (g.array() * xhat.array()).colwise().sum().matrix());
                            if (t.requires_grad(ibeta)) t.accumulate(ibeta, g.colwise().sum());
                            if (!t.requires_grad(ix)) return;
                            const Matrix dxhat = g.array().rowwise() * t.value(ig).row(0).array();
                            const Vector mean_d = dxhat.rowwise().mean();
                            const Vector mean_dx = (dxhat.array() * xhat.array()).rowwise().mean();
                            Matrix dx = dxhat;
                            dx.colwise() -= mean_d;
                            dx -= mean_dx.asDiagonal() * xhat;
                            t.accumulate(ix, inv_std.asDiagonal() * dx);
                          });
}

Var cosine_matrix(Var a, Var b) {
  require_same_tape(a, b);
  if (a.cols() != b.cols()) {
    fail(ErrorCode::ShapeMismatch, "cosine: " + shape_of(a.value()) + " vs " + shape_of(b.value()));
  }
  const auto& A = a.value();
  const auto& B = b.value();
  const Vector na = A.rowwise().norm();
  const Vector nb = B.rowwise().norm();
  const Matrix dots = A * B.transpose();
  const Matrix denom = ((na * nb.transpose()).array() + kCosineEps).matrix();
  Matrix out = dots.cwiseQuotient(denom);

  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib, na, nb, dots, denom](Tape& t, const Matrix& g) {
    const Matrix q = g.cwiseQuotient(denom);
    // Derivative of the denominator: d(|a_i||b_j|)/da_i = |b_j| a_i / |a_i|.
    const Matrix r = (g.array() * dots.array() / denom.array().square()).matrix();
    if (t.requires_grad(ia)) {
      const auto& A = t.value(ia);
      const auto& B = t.value(ib);
      const Vector coef = r * nb;
      Vector scale_a(na.size());
      for (Eigen::Index i = 0; i < na.size(); ++i) scale_a(i) = na(i) > 0.0 ? coef(i) / na(i) : 0.0;
      t.accumulate(ia, q * B - scale_a.asDiagonal() * A);
    }
    if (t.requires_grad(ib)) {
      const auto& A = t.value(ia);
      const auto& B = t.value(ib);
      const Vector coef = r.transpose() * na;
      Vector scale_b(nb.size());
      for (Eigen::Index j = 0; j < nb.size(); ++j) scale_b(j) = nb(j) > 0.0 ? coef(j) / nb(j) : 0.0;
      t.accumulate(ib, q.transpose() * A - scale_b.asDiagonal() * B);
    }
  });
}

Var cosine_sim(Var a, Var b) {
  if (a.rows() != 1 || b.rows() != 1) fail(ErrorCode::ShapeMismatch, "cosine_sim expects two row vectors");
  return cosine_matrix(a, b);
}

Var mean_pool(Var rows) {
  const auto n = rows.rows();
  if (n == 0) fail(ErrorCode::EmptyInput, "mean_pool over zero rows");
  const auto ix = rows.id();
  Matrix out = rows.value().colwise().mean();
  return rows.tape()->record(std::move(out), {rows}, [ix, n](Tape& t, const Matrix& g) {
    t.accumulate(ix, g.replicate(n, 1) / static_cast<double>(n));
  });
}

double sigmoid(double logit) noexcept {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

Var bce_with_logit(Var logit, int label) {
  if (logit.rows() != 1 || logit.cols() != 1) fail(ErrorCode::NotScalar, "bce_with_logit expects a 1x1 logit");
  const double l = logit.scalar();
  const double y = label == 1 ? 1.0 : 0.0;
  Matrix out(1, 1);
  out(0, 0) = std::max(l, 0.0) - l * y + std::log1p(std::exp(-std::abs(l)));
  const auto il = logit.id();
  const double dl = sigmoid(l) - y;
  return logit.tape()->record(std::move(out), {logit},
                              [il, dl](Tape& t, const Matrix& g) { t.accumulate(il, g * dl); });
}

// ---------------------------------------------------------------------------
// Adam

void adam_step(std::span<const ParamRef> params, std::span<const Matrix> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    fail(ErrorCode::ShapeMismatch, "adam_step: " + std::to_string(params.size()) + " parameters, " +
                                       std::to_string(grads.size()) + " gradients");
  }
  const bool fresh = state.first_moment.empty();
  if (!fresh && (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())) {
    fail(ErrorCode::ShapeMismatch, "adam_step: optimizer state does not match parameter set");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i].value;
    require_same_shape(p, grads[i], "adam_step");
    if (!fresh) require_same_shape(p, state.first_moment[i], "adam_step moments");
    if (!grads[i].allFinite()) {
      fail(ErrorCode::NonFiniteGradient, "non-finite gradient for parameter '" + std::string(params[i].name) + "'");
    }
  }
  if (fresh) {
    for (const auto& p : params) {
      state.first_moment.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      state.second_moment.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i].cwiseAbs2();
    params[i].value->array() -=
        state.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
  }
}

}  // namespace gradibd::ad
