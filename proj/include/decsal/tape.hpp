#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "decsal/matrix.hpp"

namespace decsal {

struct NodeId {
  std::int32_t index = -1;
  bool valid() const { return index >= 0; }
};

/// Reverse-mode differentiation record over dense matrices. Nodes are
/// appended in evaluation order, so creation order is a topological order
/// and every node's inputs precede it. Recording is single-writer; a
/// finished tape is read-only and may be queried from multiple threads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  NodeId leaf(Matrix value);

  NodeId matmul(NodeId a, NodeId b);
  // a * b^T without materializing the transpose.
  NodeId matmul_nt(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  // a (n x m) plus a 1 x m row broadcast over every row.
  NodeId add_row(NodeId a, NodeId row);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId softmax_rows(NodeId a);
  NodeId layer_norm(NodeId a, NodeId gain, NodeId bias, double eps);
  NodeId gelu(NodeId a);
  NodeId relu(NodeId a);
  // out row r = a[rows[r], :]; duplicate indices accumulate in reverse.
  NodeId gather_rows(NodeId a, std::vector<std::int32_t> rows);
  NodeId slice_cols(NodeId a, std::size_t c0, std::size_t c1);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  // 1x1 sum of all entries.
  NodeId sum(NodeId a);
  // n x 1 per-row sums.
  NodeId row_sum(NodeId a);
  // 1x1 element pick.
  NodeId pick(NodeId a, std::size_t i, std::size_t j);
  // Mean of -log softmax(logits[r])[targets[r]] over rows listed in
  // `active`; rows not listed contribute nothing and receive no gradient.
  NodeId cross_entropy(NodeId logits, std::vector<std::int32_t> targets,
                       std::vector<std::int32_t> active);

  const Matrix& value(NodeId id) const;
  std::size_t node_count() const { return nodes_.size(); }

  /// Gradient of a 1x1 scalar node with respect to any node in the record.
  /// Returns a matrix shaped like `wrt`'s output; all-zero when `wrt` is
  /// not an ancestor of `scalar`.
  Matrix gradient(NodeId scalar, NodeId wrt) const;

  /// One full reverse sweep; adjoints for every ancestor of `scalar`.
  class Adjoints {
   public:
    // Zero matrix of the node's shape when the node received no gradient.
    Matrix get(NodeId id) const;
    bool touched(NodeId id) const;

   private:
    friend class Tape;
    const Tape* tape_ = nullptr;
    std::vector<Matrix> adj_;
  };
  Adjoints backward(NodeId scalar) const;

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatMul,
    kMatMulNT,
    kAdd,
    kAddRow,
    kMul,
    kScale,
    kSoftmaxRows,
    kLayerNorm,
    kGelu,
    kRelu,
    kGatherRows,
    kSliceCols,
    kConcatCols,
    kSum,
    kRowSum,
    kPick,
    kCrossEntropy,
  };

  struct Node {
    Op op;
    std::vector<std::int32_t> inputs;
    Matrix value;
    double scalar = 0.0;                // Scale factor or layer-norm eps.
    std::vector<std::int32_t> indices;  // Gather rows, CE targets, pick coords, slice bounds.
    Matrix aux;                         // CE active-row probabilities.
  };

  NodeId push(Node n);
  const Node& node(NodeId id) const;
  void check_id(NodeId id, const char* op) const;
  void backprop_node(std::int32_t idx, std::vector<Matrix>& adj) const;
  static void accumulate(std::vector<Matrix>& adj, std::int32_t idx, const Matrix& delta);
  static Matrix& adj_slot(std::vector<Matrix>& adj, std::int32_t idx, std::size_t rows,
                          std::size_t cols);

  std::vector<Node> nodes_;
};

double gelu_scalar(double x);
double gelu_grad_scalar(double x);

}  // namespace decsal
