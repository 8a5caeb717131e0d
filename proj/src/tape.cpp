#include "decsal/tape.hpp"

#include <algorithm>
#include <cmath>

#include "decsal/errors.hpp"

namespace decsal {

namespace {
constexpr double kGeluCoeff = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;
}  // namespace

double gelu_scalar(double x) {
  const double u = kGeluCoeff * (x + kGeluCubic * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad_scalar(double x) {
  const double u = kGeluCoeff * (x + kGeluCubic * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluCoeff * (1.0 + 3.0 * kGeluCubic * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Tape::check_id(NodeId id, const char* op) const {
  if (!id.valid() || static_cast<std::size_t>(id.index) >= nodes_.size()) {
    throw DimensionError(std::string(op) + ": node " + std::to_string(id.index) +
                         " is not in this graph (size " + std::to_string(nodes_.size()) + ")");
  }
}

const Tape::Node& Tape::node(NodeId id) const { return nodes_[static_cast<std::size_t>(id.index)]; }

const Matrix& Tape::value(NodeId id) const {
  check_id(id, "value");
  return node(id).value;
}

NodeId Tape::leaf(Matrix value) {
  return push(Node{Op::kLeaf, {}, std::move(value)});
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  check_id(a, "matmul");
  check_id(b, "matmul");
  const Matrix& va = node(a).value;
  const Matrix& vb = node(b).value;
  check_inner(va, vb, "matmul");
  Matrix out(va.rows(), vb.cols());
  matmul_into(va, vb, out);
  return push(Node{Op::kMatMul, {a.index, b.index}, std::move(out)});
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  check_id(a, "matmul_nt");
  check_id(b, "matmul_nt");
  const Matrix& va = node(a).value;
  const Matrix& vb = node(b).value;
  if (va.cols() != vb.cols()) {
    throw DimensionError("matmul_nt: inner dimensions disagree, " + va.shape_str() + " by " +
                         vb.shape_str() + "^T");
  }
  Matrix out(va.rows(), vb.rows());
  matmul_nt_into(va, vb, out);
  return push(Node{Op::kMatMulNT, {a.index, b.index}, std::move(out)});
}

NodeId Tape::add(NodeId a, NodeId b) {
  check_id(a, "add");
  check_id(b, "add");
  return push(Node{Op::kAdd, {a.index, b.index}, decsal::add(node(a).value, node(b).value)});
}

NodeId Tape::add_row(NodeId a, NodeId row) {
  check_id(a, "add_row");
  check_id(row, "add_row");
  const Matrix& va = node(a).value;
  const Matrix& vr = node(row).value;
  if (vr.rows() != 1 || vr.cols() != va.cols()) {
    throw DimensionError("add_row: row must be 1x" + std::to_string(va.cols()) + ", got " +
                         vr.shape_str());
  }
  Matrix out = va;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* o = out.row(i);
    const double* r = vr.row(0);
    for (std::size_t j = 0; j < out.cols(); ++j) o[j] += r[j];
  }
  return push(Node{Op::kAddRow, {a.index, row.index}, std::move(out)});
}

NodeId Tape::mul(NodeId a, NodeId b) {
  check_id(a, "mul");
  check_id(b, "mul");
  return push(Node{Op::kMul, {a.index, b.index}, mul_elem(node(a).value, node(b).value)});
}

NodeId Tape::scale(NodeId a, double s) {
  check_id(a, "scale");
  Node n{Op::kScale, {a.index}, decsal::scale(node(a).value, s)};
  n.scalar = s;
  return push(std::move(n));
}

NodeId Tape::softmax_rows(NodeId a) {
  check_id(a, "softmax_rows");
  return push(Node{Op::kSoftmaxRows, {a.index}, decsal::softmax_rows(node(a).value)});
}

NodeId Tape::layer_norm(NodeId a, NodeId gain, NodeId bias, double eps) {
  check_id(a, "layer_norm");
  check_id(gain, "layer_norm");
  check_id(bias, "layer_norm");
  Node n{Op::kLayerNorm,
         {a.index, gain.index, bias.index},
         decsal::layer_norm(node(a).value, node(gain).value, node(bias).value, eps)};
  n.scalar = eps;
  return push(std::move(n));
}

NodeId Tape::gelu(NodeId a) {
  check_id(a, "gelu");
  Matrix out = node(a).value;
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = gelu_scalar(p[i]);
  return push(Node{Op::kGelu, {a.index}, std::move(out)});
}

NodeId Tape::relu(NodeId a) {
  check_id(a, "relu");
  return push(Node{Op::kRelu, {a.index}, decsal::relu(node(a).value)});
}

NodeId Tape::gather_rows(NodeId a, std::vector<std::int32_t> rows) {
  check_id(a, "gather_rows");
  const Matrix& va = node(a).value;
  Matrix out(rows.size(), va.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = rows[r];
    if (src < 0 || static_cast<std::size_t>(src) >= va.rows()) {
      throw DimensionError("gather_rows: row index " + std::to_string(src) + " out of " +
                           va.shape_str());
    }
    std::copy_n(va.row(static_cast<std::size_t>(src)), va.cols(), out.row(r));
  }
  Node n{Op::kGatherRows, {a.index}, std::move(out)};
  n.indices = std::move(rows);
  return push(std::move(n));
}

NodeId Tape::slice_cols(NodeId a, std::size_t c0, std::size_t c1) {
  check_id(a, "slice_cols");
  const Matrix& va = node(a).value;
  if (c0 >= c1 || c1 > va.cols()) {
    throw DimensionError("slice_cols: bad column range [" + std::to_string(c0) + "," +
                         std::to_string(c1) + ") for " + va.shape_str());
  }
  Matrix out(va.rows(), c1 - c0);
  for (std::size_t i = 0; i < va.rows(); ++i)
    std::copy(va.row(i) + c0, va.row(i) + c1, out.row(i));
  Node n{Op::kSliceCols, {a.index}, std::move(out)};
  n.indices = {static_cast<std::int32_t>(c0), static_cast<std::int32_t>(c1)};
  return push(std::move(n));
}

NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  std::size_t total = 0;
  const std::size_t rows = node(parts[0]).value.rows();
  std::vector<std::int32_t> in;
  for (NodeId p : parts) {
    check_id(p, "concat_cols");
    const Matrix& v = node(p).value;
    if (v.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + v.shape_str() + " vs " +
                           std::to_string(rows) + " rows");
    }
    total += v.cols();
    in.push_back(p.index);
  }
  Matrix out(rows, total);
  std::size_t off = 0;
  for (NodeId p : parts) {
    const Matrix& v = node(p).value;
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(v.row(i), v.cols(), out.row(i) + off);
    off += v.cols();
  }
  return push(Node{Op::kConcatCols, std::move(in), std::move(out)});
}

NodeId Tape::sum(NodeId a) {
  check_id(a, "sum");
  const Matrix& va = node(a).value;
  double acc = 0.0;
  const double* p = va.data();
  for (std::size_t i = 0; i < va.size(); ++i) acc += p[i];
  return push(Node{Op::kSum, {a.index}, Matrix{{acc}}});
}

NodeId Tape::row_sum(NodeId a) {
  check_id(a, "row_sum");
  const Matrix& va = node(a).value;
  Matrix out(va.rows(), 1);
  auto sums = decsal::row_sums(va);
  for (std::size_t i = 0; i < va.rows(); ++i) out(i, 0) = sums[i];
  return push(Node{Op::kRowSum, {a.index}, std::move(out)});
}

NodeId Tape::pick(NodeId a, std::size_t i, std::size_t j) {
  check_id(a, "pick");
  const Matrix& va = node(a).value;
  if (i >= va.rows() || j >= va.cols()) {
    throw DimensionError("pick: (" + std::to_string(i) + "," + std::to_string(j) +
                         ") out of " + va.shape_str());
  }
  Node n{Op::kPick, {a.index}, Matrix{{va(i, j)}}};
  n.indices = {static_cast<std::int32_t>(i), static_cast<std::int32_t>(j)};
  return push(std::move(n));
}

NodeId Tape::cross_entropy(NodeId logits, std::vector<std::int32_t> targets,
                           std::vector<std::int32_t> active) {
  check_id(logits, "cross_entropy");
  const Matrix& vl = node(logits).value;
  if (targets.size() != vl.rows()) {
    throw DimensionError("cross_entropy: need one target per logit row, got " +
                         std::to_string(targets.size()) + " for " + vl.shape_str());
  }
  if (active.empty()) throw DimensionError("cross_entropy: no active rows");
  // Cache the softmax of active rows only; the backward rule needs them and
  // inactive rows carry no gradient.
  Matrix probs(active.size(), vl.cols());
  double loss = 0.0;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const auto r = active[k];
    if (r < 0 || static_cast<std::size_t>(r) >= vl.rows()) {
      throw DimensionError("cross_entropy: active row " + std::to_string(r) + " out of " +
                           vl.shape_str());
    }
    const auto t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || static_cast<std::size_t>(t) >= vl.cols()) {
      throw DimensionError("cross_entropy: target " + std::to_string(t) + " out of " +
                           std::to_string(vl.cols()) + " classes");
    }
    const double* in = vl.row(static_cast<std::size_t>(r));
    double mx = in[0];
    for (std::size_t j = 1; j < vl.cols(); ++j) mx = std::max(mx, in[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < vl.cols(); ++j) denom += std::exp(in[j] - mx);
    const double log_denom = std::log(denom);
    loss += -(in[static_cast<std::size_t>(t)] - mx - log_denom);
    double* pr = probs.row(k);
    const double inv = 1.0 / denom;
    for (std::size_t j = 0; j < vl.cols(); ++j) pr[j] = std::exp(in[j] - mx) * inv;
  }
  loss /= static_cast<double>(active.size());
  Node n{Op::kCrossEntropy, {logits.index}, Matrix{{loss}}};
  n.aux = std::move(probs);
  n.indices.reserve(targets.size() + active.size() + 1);
  n.indices.push_back(static_cast<std::int32_t>(active.size()));
  n.indices.insert(n.indices.end(), active.begin(), active.end());
  n.indices.insert(n.indices.end(), targets.begin(), targets.end());
  return push(std::move(n));
}

Matrix& Tape::adj_slot(std::vector<Matrix>& adj, std::int32_t idx, std::size_t rows,
                       std::size_t cols) {
  Matrix& slot = adj[static_cast<std::size_t>(idx)];
  if (slot.empty()) slot = Matrix(rows, cols);
  return slot;
}

void Tape::accumulate(std::vector<Matrix>& adj, std::int32_t idx, const Matrix& delta) {
  Matrix& slot = adj_slot(adj, idx, delta.rows(), delta.cols());
  add_in_place(slot, delta);
}

void Tape::backprop_node(std::int32_t idx, std::vector<Matrix>& adj) const {
  const Node& n = nodes_[static_cast<std::size_t>(idx)];
  const Matrix& g = adj[static_cast<std::size_t>(idx)];
  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatMul: {
      const Matrix& a = nodes_[n.inputs[0]].value;
      const Matrix& b = nodes_[n.inputs[1]].value;
      Matrix da(a.rows(), a.cols());
      matmul_nt_into(g, b, da);  // dA = G B^T
      accumulate(adj, n.inputs[0], da);
      Matrix db(b.rows(), b.cols());
      matmul_tn_into(a, g, db);  // dB = A^T G
      accumulate(adj, n.inputs[1], db);
      break;
    }
    case Op::kMatMulNT: {
      // C = A B^T: dA = G B, dB = G^T A
      const Matrix& a = nodes_[n.inputs[0]].value;
      const Matrix& b = nodes_[n.inputs[1]].value;
      Matrix da(a.rows(), a.cols());
      matmul_into(g, b, da);
      accumulate(adj, n.inputs[0], da);
      Matrix db(b.rows(), b.cols());
      matmul_tn_into(g, a, db);
      accumulate(adj, n.inputs[1], db);
      break;
    }
    case Op::kAdd:
      accumulate(adj, n.inputs[0], g);
      accumulate(adj, n.inputs[1], g);
      break;
    case Op::kAddRow: {
      accumulate(adj, n.inputs[0], g);
      Matrix drow(1, g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) drow(0, j) += g(i, j);
      accumulate(adj, n.inputs[1], drow);
      break;
    }
    case Op::kMul: {
      accumulate(adj, n.inputs[0], mul_elem(g, nodes_[n.inputs[1]].value));
      accumulate(adj, n.inputs[1], mul_elem(g, nodes_[n.inputs[0]].value));
      break;
    }
    case Op::kScale:
      accumulate(adj, n.inputs[0], decsal::scale(g, n.scalar));
      break;
    case Op::kSoftmaxRows: {
      const Matrix& p = n.value;
      Matrix dx(p.rows(), p.cols());
      for (std::size_t i = 0; i < p.rows(); ++i) {
        const double* pr = p.row(i);
        const double* gr = g.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < p.cols(); ++j) dot += gr[j] * pr[j];
        double* dr = dx.row(i);
        for (std::size_t j = 0; j < p.cols(); ++j) dr[j] = pr[j] * (gr[j] - dot);
      }
      accumulate(adj, n.inputs[0], dx);
      break;
    }
    case Op::kLayerNorm: {
      const Matrix& x = nodes_[n.inputs[0]].value;
      const Matrix& gain = nodes_[n.inputs[1]].value;
      const double eps = n.scalar;
      const std::size_t c = x.cols();
      Matrix dx(x.rows(), c);
      Matrix dgain(1, c);
      Matrix dbias(1, c);
      for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* xr = x.row(i);
        const double* gr = g.row(i);
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += xr[j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double d = xr[j] - mean;
          var += d * d;
        }
        var /= static_cast<double>(c);
        const double inv_std = 1.0 / std::sqrt(var + eps);
        double mean_gg = 0.0, mean_ggx = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double xhat = (xr[j] - mean) * inv_std;
          const double gg = gr[j] * gain(0, j);
          mean_gg += gg;
          mean_ggx += gg * xhat;
          dgain(0, j) += gr[j] * xhat;
          dbias(0, j) += gr[j];
        }
        mean_gg /= static_cast<double>(c);
        mean_ggx /= static_cast<double>(c);
        double* dr = dx.row(i);
        for (std::size_t j = 0; j < c; ++j) {
          const double xhat = (xr[j] - mean) * inv_std;
          const double gg = gr[j] * gain(0, j);
          dr[j] = (gg - mean_gg - xhat * mean_ggx) * inv_std;
        }
      }
      accumulate(adj, n.inputs[0], dx);
      accumulate(adj, n.inputs[1], dgain);
      accumulate(adj, n.inputs[2], dbias);
      break;
    }
    case Op::kGelu: {
      const Matrix& x = nodes_[n.inputs[0]].value;
      Matrix dx = g;
      double* p = dx.data();
      const double* px = x.data();
      for (std::size_t i = 0; i < dx.size(); ++i) p[i] *= gelu_grad_scalar(px[i]);
      accumulate(adj, n.inputs[0], dx);
      break;
    }
    case Op::kRelu: {
      const Matrix& x = nodes_[n.inputs[0]].value;
      Matrix dx = g;
      double* p = dx.data();
      const double* px = x.data();
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (px[i] <= 0.0) p[i] = 0.0;
      accumulate(adj, n.inputs[0], dx);
      break;
    }
    case Op::kGatherRows: {
      const Matrix& a = nodes_[n.inputs[0]].value;
      Matrix& slot = adj_slot(adj, n.inputs[0], a.rows(), a.cols());
      for (std::size_t r = 0; r < n.indices.size(); ++r) {
        const double* gr = g.row(r);
        double* dst = slot.row(static_cast<std::size_t>(n.indices[r]));
        for (std::size_t j = 0; j < g.cols(); ++j) dst[j] += gr[j];
      }
      break;
    }
    case Op::kSliceCols: {
      const Matrix& a = nodes_[n.inputs[0]].value;
      const auto c0 = static_cast<std::size_t>(n.indices[0]);
      Matrix& slot = adj_slot(adj, n.inputs[0], a.rows(), a.cols());
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double* gr = g.row(i);
        double* dst = slot.row(i) + c0;
        for (std::size_t j = 0; j < g.cols(); ++j) dst[j] += gr[j];
      }
      break;
    }
    case Op::kConcatCols: {
      std::size_t off = 0;
      for (std::int32_t in : n.inputs) {
        const Matrix& part = nodes_[in].value;
        Matrix dpart(part.rows(), part.cols());
        for (std::size_t i = 0; i < part.rows(); ++i)
          std::copy_n(g.row(i) + off, part.cols(), dpart.row(i));
        accumulate(adj, in, dpart);
        off += part.cols();
      }
      break;
    }
    case Op::kSum: {
      const Matrix& a = nodes_[n.inputs[0]].value;
      accumulate(adj, n.inputs[0], Matrix(a.rows(), a.cols(), g(0, 0)));
      break;
    }
    case Op::kRowSum: {
      const Matrix& a = nodes_[n.inputs[0]].value;
      Matrix dx(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.rows(); ++i) {
        double* dr = dx.row(i);
        const double gi = g(i, 0);
        for (std::size_t j = 0; j < a.cols(); ++j) dr[j] = gi;
      }
      accumulate(adj, n.inputs[0], dx);
      break;
    }
    case Op::kPick: {
      const Matrix& a = nodes_[n.inputs[0]].value;
      Matrix& slot = adj_slot(adj, n.inputs[0], a.rows(), a.cols());
      slot(static_cast<std::size_t>(n.indices[0]), static_cast<std::size_t>(n.indices[1])) +=
          g(0, 0);
      break;
    }
    case Op::kCrossEntropy: {
      const Matrix& logits = nodes_[n.inputs[0]].value;
      const auto n_active = static_cast<std::size_t>(n.indices[0]);
      const std::int32_t* active = n.indices.data() + 1;
      const std::int32_t* targets = n.indices.data() + 1 + n_active;
      const double w = g(0, 0) / static_cast<double>(n_active);
      Matrix& slot = adj_slot(adj, n.inputs[0], logits.rows(), logits.cols());
      for (std::size_t k = 0; k < n_active; ++k) {
        const auto r = static_cast<std::size_t>(active[k]);
        const double* pr = n.aux.row(k);
        double* dst = slot.row(r);
        for (std::size_t j = 0; j < logits.cols(); ++j) dst[j] += w * pr[j];
        dst[static_cast<std::size_t>(targets[r])] -= w;
      }
      break;
    }
  }
}

Tape::Adjoints Tape::backward(NodeId scalar) const {
  check_id(scalar, "gradient");
  const Matrix& s = node(scalar).value;
  if (s.rows() != 1 || s.cols() != 1) {
    throw DimensionError("gradient: source node must be 1x1, got " + s.shape_str());
  }
  Adjoints out;
  out.tape_ = this;
  out.adj_.resize(nodes_.size());
  out.adj_[static_cast<std::size_t>(scalar.index)] = Matrix{{1.0}};
  for (std::int32_t i = scalar.index; i >= 0; --i) {
    if (out.adj_[static_cast<std::size_t>(i)].empty()) continue;
    backprop_node(i, out.adj_);
  }
  return out;
}

Matrix Tape::gradient(NodeId scalar, NodeId wrt) const {
  check_id(wrt, "gradient");
  return backward(scalar).get(wrt);
}

Matrix Tape::Adjoints::get(NodeId id) const {
  tape_->check_id(id, "adjoint");
  const Matrix& m = adj_[static_cast<std::size_t>(id.index)];
  if (!m.empty()) return m;
  const Matrix& v = tape_->node(id).value;
  return Matrix(v.rows(), v.cols());
}

bool Tape::Adjoints::touched(NodeId id) const {
  tape_->check_id(id, "adjoint");
  return !adj_[static_cast<std::size_t>(id.index)].empty();
}

}  // namespace decsal
