#include "uvrec/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace uvrec {

namespace {

Tensor as_matrix(const Tensor& t) {
  return Tensor({t.rows(), t.cols()}, t.raw());
}

[[noreturn]] void shape_error(std::string_view op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument("tape: " + std::string(op) + " shape mismatch " +
                              shape_string({a.rows(), a.cols()}) + " vs " +
                              shape_string({b.rows(), b.cols()}));
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_slope(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// c[n,m] += a[n,k] * b[k,m]
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  const double* A = a.raw().data();
  const double* B = b.raw().data();
  double* C = c.raw().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B + p * m;
      double* crow = C + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[n,k] += g[n,m] * b[k,m]^T
void gemm_nt(const Tensor& g, const Tensor& b, Tensor& c) {
  const std::size_t n = g.rows(), m = g.cols(), k = b.rows();
  std::vector<double> bt(m * k);
  const double* B = b.raw().data();
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < m; ++j) bt[j * k + p] = B[p * m + j];
  }
  const double* G = g.raw().data();
  double* C = c.raw().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = C + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double gv = G[i * m + j];
      if (gv == 0.0) continue;
      const double* btrow = bt.data() + j * k;
      for (std::size_t p = 0; p < k; ++p) crow[p] += gv * btrow[p];
    }
  }
}

// c[k,m] += a[n,k]^T * g[n,m]
void gemm_tn(const Tensor& a, const Tensor& g, Tensor& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = g.cols();
  const double* A = a.raw().data();
  const double* G = g.raw().data();
  double* C = c.raw().data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* grow = G + i * m;
      double* crow = C + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * grow[j];
    }
  }
}

}  // namespace

Var Tape::push(Node node, std::string_view op_name) {
  if (!node.value.all_finite()) {
    throw std::runtime_error("tape: op '" + std::string(op_name) +
                             "' produced non-finite values");
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Leaf;
  n.value = as_matrix(value);
  return push(std::move(n), "constant");
}

Var Tape::param(std::size_t index) {
  if (params_ == nullptr) throw std::logic_error("tape: no parameter store bound");
  Node n;
  n.op = Op::Param;
  n.param_index = index;
  n.value = as_matrix(params_->at(index).value);
  return push(std::move(n), "param");
}

Var Tape::param(std::string_view full_name) {
  if (params_ == nullptr) throw std::logic_error("tape: no parameter store bound");
  return param(params_->index(full_name));
}

double Tape::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.size() != 1) throw std::invalid_argument("tape: value is not a scalar");
  return t[0];
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  Node n;
  n.op = Op::MatMul;
  n.value = Tensor::matrix(A.rows(), B.cols());
  gemm_nn(A, B, n.value);
  n.inputs = {a.id, b.id};
  return push(std::move(n), "matmul");
}

Var Tape::affine(Var x, Var w, Var b) {
  const Tensor& X = node(x).value;
  const Tensor& W = node(w).value;
  const Tensor& Bv = node(b).value;
  if (X.cols() != W.rows()) shape_error("affine", X, W);
  if (Bv.rows() != 1 || Bv.cols() != W.cols()) shape_error("affine bias", W, Bv);
  Node n;
  n.op = Op::Affine;
  n.value = Tensor::matrix(X.rows(), W.cols());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t j = 0; j < W.cols(); ++j) n.value(i, j) = Bv[j];
  }
  gemm_nn(X, W, n.value);
  n.inputs = {x.id, w.id, b.id};
  return push(std::move(n), "affine");
}

Var Tape::add(Var a, Var b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  if (!A.same_shape(B)) shape_error("add", A, B);
  Node n;
  n.op = Op::Add;
  n.value = A;
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] += B[i];
  n.inputs = {a.id, b.id};
  return push(std::move(n), "add");
}

Var Tape::sub(Var a, Var b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  if (!A.same_shape(B)) shape_error("sub", A, B);
  Node n;
  n.op = Op::Sub;
  n.value = A;
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] -= B[i];
  n.inputs = {a.id, b.id};
  return push(std::move(n), "sub");
}

Var Tape::mul(Var a, Var b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  if (!A.same_shape(B)) shape_error("mul", A, B);
  Node n;
  n.op = Op::Mul;
  n.value = A;
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] *= B[i];
  n.inputs = {a.id, b.id};
  return push(std::move(n), "mul");
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::Scale;
  n.value = node(a).value;
  for (double& v : n.value.raw()) v *= s;
  n.scalar = s;
  n.inputs = {a.id};
  return push(std::move(n), "scale");
}

Var Tape::gelu(Var a) {
  Node n;
  n.op = Op::Gelu;
  n.value = node(a).value;
  for (double& v : n.value.raw()) v = gelu_value(v);
  n.inputs = {a.id};
  return push(std::move(n), "gelu");
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::Relu;
  n.value = node(a).value;
  for (double& v : n.value.raw()) v = std::max(v, 0.0);
  n.inputs = {a.id};
  return push(std::move(n), "relu");
}

Var Tape::sum(Var a) {
  const Tensor& A = node(a).value;
  double acc = 0.0;
  for (double v : A.raw()) acc += v;
  Node n;
  n.op = Op::Sum;
  n.value = Tensor::scalar(acc);
  n.inputs = {a.id};
  return push(std::move(n), "sum");
}

Var Tape::mean(Var a) {
  const Tensor& A = node(a).value;
  if (A.size() == 0) throw std::invalid_argument("tape: mean of empty tensor");
  double acc = 0.0;
  for (double v : A.raw()) acc += v;
  Node n;
  n.op = Op::Mean;
  n.value = Tensor::scalar(acc / static_cast<double>(A.size()));
  n.inputs = {a.id};
  return push(std::move(n), "mean");
}

Var Tape::mean_rows(Var a) {
  const Tensor& A = node(a).value;
  if (A.rows() == 0) throw std::invalid_argument("tape: mean_rows of empty tensor");
  Node n;
  n.op = Op::MeanRows;
  n.value = Tensor::matrix(1, A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) n.value[j] += A(i, j);
  }
  for (double& v : n.value.raw()) v /= static_cast<double>(A.rows());
  n.inputs = {a.id};
  return push(std::move(n), "mean_rows");
}

Var Tape::concat_cols(Var a, Var b) {
  const Tensor& A = node(a).value;
  const Tensor& B = node(b).value;
  if (A.rows() != B.rows()) shape_error("concat_cols", A, B);
  Node n;
  n.op = Op::ConcatCols;
  n.value = Tensor::matrix(A.rows(), A.cols() + B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) n.value(i, j) = A(i, j);
    for (std::size_t j = 0; j < B.cols(); ++j) n.value(i, A.cols() + j) = B(i, j);
  }
  n.inputs = {a.id, b.id};
  return push(std::move(n), "concat_cols");
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("tape: concat_rows of nothing");
  const std::size_t cols = node(parts[0]).value.cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    const Tensor& P = node(p).value;
    if (P.cols() != cols) shape_error("concat_rows", node(parts[0]).value, P);
    rows += P.rows();
  }
  Node n;
  n.op = Op::ConcatRows;
  n.value = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const auto& src = node(p).value.raw();
    std::copy(src.begin(), src.end(), n.value.raw().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += src.size();
    n.inputs.push_back(p.id);
  }
  return push(std::move(n), "concat_rows");
}

Var Tape::l2_normalize_rows(Var a) {
  const Tensor& A = node(a).value;
  Node n;
  n.op = Op::L2NormRows;
  n.value = A;
  n.aux = Tensor::matrix(A.rows(), 1);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < A.cols(); ++j) ss += A(i, j) * A(i, j);
    const double norm = std::sqrt(ss);
    if (!(norm > 0.0)) throw std::runtime_error("tape: l2_normalize_rows on a zero row");
    n.aux[i] = norm;
    for (std::size_t j = 0; j < A.cols(); ++j) n.value(i, j) /= norm;
  }
  n.inputs = {a.id};
  return push(std::move(n), "l2_normalize_rows");
}

Var Tape::transpose(Var a) {
  const Tensor& A = node(a).value;
  Node n;
  n.op = Op::Transpose;
  n.value = Tensor::matrix(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) n.value(j, i) = A(i, j);
  }
  n.inputs = {a.id};
  return push(std::move(n), "transpose");
}

Var Tape::tile_rows(Var a, std::size_t count) {
  const Tensor& A = node(a).value;
  if (A.rows() != 1) {
    throw std::invalid_argument("tape: tile_rows expects a single row, got " +
                                shape_string({A.rows(), A.cols()}));
  }
  Node n;
  n.op = Op::TileRows;
  n.value = Tensor::matrix(count, A.cols());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) n.value(i, j) = A[j];
  }
  n.inputs = {a.id};
  return push(std::move(n), "tile_rows");
}

Var Tape::gather_rows(Var a, std::vector<std::size_t> rows) {
  const Tensor& A = node(a).value;
  Node n;
  n.op = Op::GatherRows;
  n.value = Tensor::matrix(rows.size(), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= A.rows()) {
      throw std::out_of_range("tape: gather_rows index " + std::to_string(rows[i]) +
                              " outside " + shape_string({A.rows(), A.cols()}));
    }
    for (std::size_t j = 0; j < A.cols(); ++j) n.value(i, j) = A(rows[i], j);
  }
  n.index.assign(rows.begin(), rows.end());
  n.inputs = {a.id};
  return push(std::move(n), "gather_rows");
}

Var Tape::gather(Var a, std::vector<std::ptrdiff_t> index, std::size_t rows, std::size_t cols) {
  const Tensor& A = node(a).value;
  if (index.size() != rows * cols) {
    throw std::invalid_argument("tape: gather index length " + std::to_string(index.size()) +
                                " does not match output " + shape_string({rows, cols}));
  }
  Node n;
  n.op = Op::Gather;
  n.value = Tensor::matrix(rows, cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const std::ptrdiff_t k = index[i];
    if (k >= static_cast<std::ptrdiff_t>(A.size())) {
      throw std::out_of_range("tape: gather index " + std::to_string(k) + " outside " +
                              shape_string({A.rows(), A.cols()}));
    }
    if (k >= 0) n.value[i] = A[static_cast<std::size_t>(k)];
  }
  n.index = std::move(index);
  n.inputs = {a.id};
  return push(std::move(n), "gather");
}

Var Tape::softmax_xent_diag(Var logits) {
  const Tensor& S = node(logits).value;
  if (S.rows() != S.cols() || S.rows() == 0) {
    throw std::invalid_argument("tape: softmax_xent_diag needs square logits, got " +
                                shape_string({S.rows(), S.cols()}));
  }
  const std::size_t rows = S.rows();
  Node n;
  n.op = Op::SoftmaxXentDiag;
  n.aux = Tensor::matrix(rows, rows);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = S(i, 0);
    for (std::size_t j = 1; j < rows; ++j) mx = std::max(mx, S(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < rows; ++j) z += std::exp(S(i, j) - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t j = 0; j < rows; ++j) n.aux(i, j) = std::exp(S(i, j) - log_z);
    total += log_z - S(i, i);
  }
  n.value = Tensor::scalar(total / static_cast<double>(rows));
  n.inputs = {logits.id};
  return push(std::move(n), "softmax_xent_diag");
}

Tensor& Tape::grad_of(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor::matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (backward_done_) throw std::logic_error("tape: backward already ran; re-run forward first");
  if (value(loss).size() != 1) throw std::invalid_argument("tape: backward needs a scalar loss");
  backward_done_ = true;
  if (params_ != nullptr) params_->zero_grad();
  grad_of(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].grad.size() == 0) continue;
    backprop_node(nodes_[i]);
  }
}

void Tape::backprop_node(const Node& n) {
  const Tensor& g = n.grad;
  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::Param: {
      auto& pg = params_->at(n.param_index).grad.raw();
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[i];
      break;
    }
    case Op::MatMul: {
      const Tensor& A = nodes_[n.inputs[0]].value;
      const Tensor& B = nodes_[n.inputs[1]].value;
      gemm_nt(g, B, grad_of(n.inputs[0]));
      gemm_tn(A, g, grad_of(n.inputs[1]));
      break;
    }
    case Op::Affine: {
      const Tensor& X = nodes_[n.inputs[0]].value;
      const Tensor& W = nodes_[n.inputs[1]].value;
      gemm_nt(g, W, grad_of(n.inputs[0]));
      gemm_tn(X, g, grad_of(n.inputs[1]));
      Tensor& gb = grad_of(n.inputs[2]);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
      }
      break;
    }
    case Op::Add: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      Tensor& gb = grad_of(n.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      break;
    }
    case Op::Sub: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      Tensor& gb = grad_of(n.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      break;
    }
    case Op::Mul: {
      const Tensor& A = nodes_[n.inputs[0]].value;
      const Tensor& B = nodes_[n.inputs[1]].value;
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
      Tensor& gb = grad_of(n.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
      break;
    }
    case Op::Scale: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.scalar;
      break;
    }
    case Op::Gelu: {
      const Tensor& A = nodes_[n.inputs[0]].value;
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * gelu_slope(A[i]);
      break;
    }
    case Op::Relu: {
      const Tensor& A = nodes_[n.inputs[0]].value;
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += A[i] > 0.0 ? g[i] : 0.0;
      break;
    }
    case Op::Sum: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (double& v : ga.raw()) v += g[0];
      break;
    }
    case Op::Mean: {
      Tensor& ga = grad_of(n.inputs[0]);
      const double s = g[0] / static_cast<double>(ga.size());
      for (double& v : ga.raw()) v += s;
      break;
    }
    case Op::MeanRows: {
      Tensor& ga = grad_of(n.inputs[0]);
      const double inv = 1.0 / static_cast<double>(ga.rows());
      for (std::size_t i = 0; i < ga.rows(); ++i) {
        for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g[j] * inv;
      }
      break;
    }
    case Op::ConcatCols: {
      Tensor& ga = grad_of(n.inputs[0]);
      Tensor& gb = grad_of(n.inputs[1]);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, j);
        for (std::size_t j = 0; j < gb.cols(); ++j) gb(i, j) += g(i, ga.cols() + j);
      }
      break;
    }
    case Op::ConcatRows: {
      std::size_t offset = 0;
      for (std::uint32_t in : n.inputs) {
        Tensor& gi = grad_of(in);
        for (std::size_t k = 0; k < gi.size(); ++k) gi[k] += g[offset + k];
        offset += gi.size();
      }
      break;
    }
    case Op::L2NormRows: {
      const Tensor& Y = n.value;
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < Y.rows(); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < Y.cols(); ++j) dot += Y(i, j) * g(i, j);
        for (std::size_t j = 0; j < Y.cols(); ++j) {
          ga(i, j) += (g(i, j) - Y(i, j) * dot) / n.aux[i];
        }
      }
      break;
    }
    case Op::Transpose: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < ga.rows(); ++i) {
        for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(j, i);
      }
      break;
    }
    case Op::TileRows: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) ga[j] += g(i, j);
      }
      break;
    }
    case Op::GatherRows: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < n.index.size(); ++i) {
        const auto r = static_cast<std::size_t>(n.index[i]);
        for (std::size_t j = 0; j < g.cols(); ++j) ga(r, j) += g(i, j);
      }
      break;
    }
    case Op::Gather: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t i = 0; i < n.index.size(); ++i) {
        if (n.index[i] >= 0) ga[static_cast<std::size_t>(n.index[i])] += g[i];
      }
      break;
    }
    case Op::SoftmaxXentDiag: {
      Tensor& ga = grad_of(n.inputs[0]);
      const std::size_t rows = n.aux.rows();
      const double s = g[0] / static_cast<double>(rows);
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < rows; ++j) {
          ga(i, j) += s * (n.aux(i, j) - (i == j ? 1.0 : 0.0));
        }
      }
      break;
    }
  }
}

}  // namespace uvrec
