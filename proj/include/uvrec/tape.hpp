#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "uvrec/params.hpp"
#include "uvrec/tensor.hpp"

namespace uvrec {

// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = 0;
};

// Eager reverse-mode tape over a fixed whitelist of matrix operations.
// Every op evaluates immediately, checks its output is finite, and records
// what backward() needs. All values are treated as matrices; rank-1 tensors
// are single rows.
class Tape {
 public:
  explicit Tape(ModelParams* params = nullptr) : params_(params) {}

  Var constant(Tensor value);
  Var param(std::size_t index);
  Var param(std::string_view full_name);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

  // x[n,k] * w[k,m]
  Var matmul(Var a, Var b);
  // x[n,k] * w[k,m] + b[1,m] (bias broadcast over rows)
  Var affine(Var x, Var w, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var gelu(Var a);
  Var relu(Var a);
  Var sum(Var a);
  Var mean(Var a);
  // [n,m] -> [1,m]
  Var mean_rows(Var a);
  Var concat_cols(Var a, Var b);
  Var concat_rows(std::span<const Var> parts);
  Var l2_normalize_rows(Var a);
  Var transpose(Var a);
  // [1,m] -> [n,m]
  Var tile_rows(Var a, std::size_t n);
  Var gather_rows(Var a, std::vector<std::size_t> rows);
  // Output element i is a.flat[index[i]], or 0 where index[i] < 0.
  Var gather(Var a, std::vector<std::ptrdiff_t> index, std::size_t rows, std::size_t cols);
  // Mean over rows of -log softmax(row)[row index]; logits must be square.
  Var softmax_xent_diag(Var logits);

  // Writes d(loss)/d(param) into every parameter gradient; parameters that
  // the loss does not reach get zero. May run once per tape.
  void backward(Var loss);

 private:
  enum class Op : std::uint8_t {
    Leaf, Param, MatMul, Affine, Add, Sub, Mul, Scale, Gelu, Relu, Sum, Mean, MeanRows,
    ConcatCols, ConcatRows, L2NormRows, Transpose, TileRows, GatherRows, Gather, SoftmaxXentDiag
  };

  struct Node {
    Op op = Op::Leaf;
    Tensor value;
    Tensor grad;
    std::vector<std::uint32_t> inputs;
    double scalar = 0.0;
    std::size_t param_index = 0;
    std::vector<std::ptrdiff_t> index;
    Tensor aux;
  };

  Var push(Node node, std::string_view op_name);
  const Node& node(Var v) const { return nodes_.at(v.id); }
  void backprop_node(const Node& n);
  Tensor& grad_of(std::uint32_t id);

  ModelParams* params_;
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace uvrec
