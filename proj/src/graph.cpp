#include "crossloc/graph.hpp"

#include <algorithm>
#include <cmath>

#include "crossloc/errors.hpp"

namespace crossloc::diff {

namespace {

/// C = op(A) * op(B) with optional transposes, plain triple loop.
Tensor matmul_raw(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  const std::size_t m = ta ? a.cols() : a.rows();
  const std::size_t k = ta ? a.rows() : a.cols();
  const std::size_t n = tb ? b.rows() : b.cols();
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ta ? a.at(p, i) : a.at(i, p);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = tb ? b.at(j, p) : b.at(p, j);
        out.at(i, j) += av * bv;
      }
    }
  }
  return out;
}

void add_into(Tensor& dst, const Tensor& src) {
  if (!dst.same_shape(src)) {
    throw ShapeError("gradient accumulation shape mismatch: " + dst.shape_str() +
                     " vs " + src.shape_str());
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

void ParamStore::add(const std::string& name, Tensor value) {
  if (values_.count(name)) {
    throw ConfigError("parameter '" + name + "' already registered");
  }
  values_.emplace(name, std::move(value));
}

bool ParamStore::has(const std::string& name) const {
  return values_.count(name) != 0;
}

Tensor& ParamStore::value(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::value(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::grad(const std::string& name) {
  const Tensor& v = value(name);
  auto it = grads_.find(name);
  if (it == grads_.end()) {
    it = grads_.emplace(name, Tensor(v.rows(), v.cols())).first;
  }
  return it->second;
}

const Tensor& ParamStore::grad(const std::string& name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) {
    throw ConfigError("no gradient recorded for parameter '" + name + "'");
  }
  return it->second;
}

void ParamStore::zero_grads() {
  for (const auto& [name, v] : values_) {
    auto it = grads_.find(name);
    if (it == grads_.end()) {
      grads_.emplace(name, Tensor(v.rows(), v.cols()));
    } else {
      it->second.fill(0.0);
    }
  }
}

void ParamStore::accumulate_grad(const std::string& name, const Tensor& delta) {
  Tensor& g = grad(name);
  if (!g.same_shape(delta)) {
    throw ShapeError("gradient shape " + delta.shape_str() +
                     " does not match parameter '" + name + "' shape " +
                     g.shape_str());
  }
  add_into(g, delta);
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(values_.size());
  for (const auto& [name, v] : values_) out.push_back(name);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : values_) n += v.size();
  return n;
}

// ---------------------------------------------------------------------------
// Graph building
// ---------------------------------------------------------------------------

Value Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Value{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Value Graph::constant(Tensor t) {
  Node n;
  n.op = Op::kConstant;
  n.rows = t.rows();
  n.cols = t.cols();
  n.literal = std::move(t);
  return push(std::move(n));
}

Value Graph::input(const std::string& name, std::size_t rows,
                   std::size_t cols) {
  Node n;
  n.op = Op::kInput;
  n.name = name;
  n.rows = rows;
  n.cols = cols;
  return push(std::move(n));
}

Value Graph::param(const std::string& name, std::size_t rows,
                   std::size_t cols) {
  Node n;
  n.op = Op::kParam;
  n.name = name;
  n.rows = rows;
  n.cols = cols;
  return push(std::move(n));
}

Value Graph::matmul(Value a, Value b, bool trans_a, bool trans_b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  const std::size_t am = trans_a ? na.cols : na.rows;
  const std::size_t ak = trans_a ? na.rows : na.cols;
  const std::size_t bk = trans_b ? nb.cols : nb.rows;
  const std::size_t bn = trans_b ? nb.rows : nb.cols;
  if (ak != bk) {
    throw ShapeError("matmul: inner dimensions do not agree, " +
                     std::to_string(na.rows) + "x" + std::to_string(na.cols) +
                     (trans_a ? "^T" : "") + " * " + std::to_string(nb.rows) +
                     "x" + std::to_string(nb.cols) + (trans_b ? "^T" : ""));
  }
  Node n;
  n.op = Op::kMatMul;
  n.args = {a.id, b.id};
  n.arity = 2;
  n.trans_a = trans_a;
  n.trans_b = trans_b;
  n.rows = am;
  n.cols = bn;
  return push(std::move(n));
}

Value Graph::add(Value a, Value b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  const bool same = na.rows == nb.rows && na.cols == nb.cols;
  const bool row_bcast = nb.rows == 1 && nb.cols == na.cols;
  if (!same && !row_bcast) {
    throw ShapeError("add: cannot combine " + std::to_string(na.rows) + "x" +
                     std::to_string(na.cols) + " with " +
                     std::to_string(nb.rows) + "x" + std::to_string(nb.cols));
  }
  Node n;
  n.op = Op::kAdd;
  n.args = {a.id, b.id};
  n.arity = 2;
  n.rows = na.rows;
  n.cols = na.cols;
  return push(std::move(n));
}

Value Graph::affine(Value x, double scale, double offset) {
  const Node& nx = node(x);
  Node n;
  n.op = Op::kAffine;
  n.args = {x.id, 0};
  n.arity = 1;
  n.a = scale;
  n.b = offset;
  n.rows = nx.rows;
  n.cols = nx.cols;
  return push(std::move(n));
}

Value Graph::scale_rows(Value x, Value s) {
  const Node& nx = node(x);
  const Node& ns = node(s);
  if (ns.cols != 1 || ns.rows != nx.rows) {
    throw ShapeError("scale_rows: scale must be " + std::to_string(nx.rows) +
                     "x1, got " + std::to_string(ns.rows) + "x" +
                     std::to_string(ns.cols));
  }
  Node n;
  n.op = Op::kScaleRows;
  n.args = {x.id, s.id};
  n.arity = 2;
  n.rows = nx.rows;
  n.cols = nx.cols;
  return push(std::move(n));
}

Value Graph::relu(Value x) {
  Node n;
  n.op = Op::kRelu;
  n.args = {x.id, 0};
  n.arity = 1;
  n.rows = node(x).rows;
  n.cols = node(x).cols;
  return push(std::move(n));
}

Value Graph::softmax_rows(Value x) {
  Node n;
  n.op = Op::kSoftmaxRows;
  n.args = {x.id, 0};
  n.arity = 1;
  n.rows = node(x).rows;
  n.cols = node(x).cols;
  return push(std::move(n));
}

Value Graph::normalize_rows(Value x) {
  Node n;
  n.op = Op::kNormalizeRows;
  n.args = {x.id, 0};
  n.arity = 1;
  n.rows = node(x).rows;
  n.cols = node(x).cols;
  return push(std::move(n));
}

Value Graph::l2_norm(Value x) {
  Node n;
  n.op = Op::kL2Norm;
  n.args = {x.id, 0};
  n.arity = 1;
  n.rows = 1;
  n.cols = 1;
  return push(std::move(n));
}

Value Graph::square(Value x) {
  Node n;
  n.op = Op::kSquare;
  n.args = {x.id, 0};
  n.arity = 1;
  n.rows = node(x).rows;
  n.cols = node(x).cols;
  return push(std::move(n));
}

Value Graph::smooth_l1(Value x) {
  Node n;
  n.op = Op::kSmoothL1;
  n.args = {x.id, 0};
  n.arity = 1;
  n.rows = node(x).rows;
  n.cols = node(x).cols;
  return push(std::move(n));
}

Value Graph::col_max(Value x) {
  Node n;
  n.op = Op::kColMax;
  n.args = {x.id, 0};
  n.arity = 1;
  n.rows = 1;
  n.cols = node(x).cols;
  return push(std::move(n));
}

Value Graph::sum(Value x) {
  Node n;
  n.op = Op::kSum;
  n.args = {x.id, 0};
  n.arity = 1;
  n.rows = 1;
  n.cols = 1;
  return push(std::move(n));
}

Value Graph::col_sum(Value x) {
  Node n;
  n.op = Op::kColSum;
  n.args = {x.id, 0};
  n.arity = 1;
  n.rows = 1;
  n.cols = node(x).cols;
  return push(std::move(n));
}

Value Graph::mean(Value x) {
  Node n;
  n.op = Op::kMean;
  n.args = {x.id, 0};
  n.arity = 1;
  n.rows = 1;
  n.cols = 1;
  return push(std::move(n));
}

Value Graph::gather(Value x, std::vector<std::int64_t> index, std::size_t rows,
                    std::size_t cols) {
  if (index.size() != rows * cols) {
    throw ShapeError("gather: index length " + std::to_string(index.size()) +
                     " does not match output shape " + std::to_string(rows) +
                     "x" + std::to_string(cols));
  }
  const auto limit = static_cast<std::int64_t>(node(x).rows * node(x).cols);
  for (std::int64_t idx : index) {
    if (idx < -1 || idx >= limit) {
      throw ShapeError("gather: index " + std::to_string(idx) +
                       " out of range for source of " + std::to_string(limit) +
                       " elements");
    }
  }
  Node n;
  n.op = Op::kGather;
  n.args = {x.id, 0};
  n.arity = 1;
  n.rows = rows;
  n.cols = cols;
  n.index = std::move(index);
  return push(std::move(n));
}

Value Graph::reshape(Value x, std::size_t rows, std::size_t cols) {
  const Node& nx = node(x);
  if (rows * cols != nx.rows * nx.cols) {
    throw ShapeError("reshape: cannot view " + std::to_string(nx.rows) + "x" +
                     std::to_string(nx.cols) + " as " + std::to_string(rows) +
                     "x" + std::to_string(cols));
  }
  Node n;
  n.op = Op::kReshape;
  n.args = {x.id, 0};
  n.arity = 1;
  n.rows = rows;
  n.cols = cols;
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Forward evaluation
// ---------------------------------------------------------------------------

void Graph::eval_forward(std::vector<Tensor>& vals, const Bindings& inputs,
                         const ParamStore& params, std::uint32_t upto) const {
  for (std::uint32_t id = 0; id <= upto; ++id) {
    if (vals[id].size() != 0) continue;  // reachability mask left it empty
    const Node& n = nodes_[id];
    switch (n.op) {
      case Op::kConstant:
        vals[id] = n.literal;
        break;
      case Op::kInput: {
        auto it = inputs.find(n.name);
        if (it == inputs.end()) {
          throw ConfigError("no binding for input '" + n.name + "'");
        }
        if (it->second.rows() != n.rows || it->second.cols() != n.cols) {
          throw ShapeError("input '" + n.name + "': bound tensor is " +
                           it->second.shape_str() + ", declared " +
                           std::to_string(n.rows) + "x" +
                           std::to_string(n.cols));
        }
        vals[id] = it->second;
        break;
      }
      case Op::kParam: {
        const Tensor& p = params.value(n.name);
        if (p.rows() != n.rows || p.cols() != n.cols) {
          throw ShapeError("param '" + n.name + "': stored tensor is " +
                           p.shape_str() + ", declared " +
                           std::to_string(n.rows) + "x" +
                           std::to_string(n.cols));
        }
        vals[id] = p;
        break;
      }
      case Op::kMatMul:
        vals[id] = matmul_raw(vals[n.args[0]], vals[n.args[1]], n.trans_a,
                              n.trans_b);
        break;
      case Op::kAdd: {
        const Tensor& x = vals[n.args[0]];
        const Tensor& y = vals[n.args[1]];
        Tensor out = x;
        if (x.same_shape(y)) {
          add_into(out, y);
        } else {  // row broadcast
          for (std::size_t i = 0; i < out.rows(); ++i)
            for (std::size_t j = 0; j < out.cols(); ++j)
              out.at(i, j) += y.at(0, j);
        }
        vals[id] = std::move(out);
        break;
      }
      case Op::kAffine: {
        Tensor out = vals[n.args[0]];
        for (double& v : out.data()) v = n.a * v + n.b;
        vals[id] = std::move(out);
        break;
      }
      case Op::kScaleRows: {
        const Tensor& x = vals[n.args[0]];
        const Tensor& s = vals[n.args[1]];
        Tensor out = x;
        for (std::size_t i = 0; i < out.rows(); ++i)
          for (std::size_t j = 0; j < out.cols(); ++j)
            out.at(i, j) *= s.at(i, 0);
        vals[id] = std::move(out);
        break;
      }
      case Op::kRelu: {
        Tensor out = vals[n.args[0]];
        for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
        vals[id] = std::move(out);
        break;
      }
      case Op::kSoftmaxRows: {
        const Tensor& x = vals[n.args[0]];
        Tensor out(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i) {
          double mx = x.at(i, 0);
          for (std::size_t j = 1; j < x.cols(); ++j)
            mx = std::max(mx, x.at(i, j));
          double denom = 0.0;
          for (std::size_t j = 0; j < x.cols(); ++j) {
            const double e = std::exp(x.at(i, j) - mx);
            out.at(i, j) = e;
            denom += e;
          }
          for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) /= denom;
        }
        vals[id] = std::move(out);
        break;
      }
      case Op::kNormalizeRows: {
        const Tensor& x = vals[n.args[0]];
        Tensor out(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i) {
          double sq = 0.0;
          for (std::size_t j = 0; j < x.cols(); ++j)
            sq += x.at(i, j) * x.at(i, j);
          const double norm = std::sqrt(sq);
          if (norm > kNormEps) {
            for (std::size_t j = 0; j < x.cols(); ++j)
              out.at(i, j) = x.at(i, j) / norm;
          }
          // else: row stays zero
        }
        vals[id] = std::move(out);
        break;
      }
      case Op::kL2Norm: {
        const Tensor& x = vals[n.args[0]];
        double sq = 0.0;
        for (double v : x.data()) sq += v * v;
        vals[id] = Tensor::scalar(std::sqrt(sq));
        break;
      }
      case Op::kSquare: {
        Tensor out = vals[n.args[0]];
        for (double& v : out.data()) v = v * v;
        vals[id] = std::move(out);
        break;
      }
      case Op::kSmoothL1: {
        Tensor out = vals[n.args[0]];
        for (double& v : out.data()) {
          const double t = std::abs(v);
          v = t < kSmoothL1Beta ? 0.5 * v * v : t - 0.5 * kSmoothL1Beta;
        }
        vals[id] = std::move(out);
        break;
      }
      case Op::kColMax: {
        const Tensor& x = vals[n.args[0]];
        Tensor out(1, x.cols());
        for (std::size_t j = 0; j < x.cols(); ++j) {
          double mx = x.at(0, j);
          for (std::size_t i = 1; i < x.rows(); ++i)
            mx = std::max(mx, x.at(i, j));
          out.at(0, j) = mx;
        }
        vals[id] = std::move(out);
        break;
      }
      case Op::kSum: {
        double total = 0.0;
        for (double v : vals[n.args[0]].data()) total += v;
        vals[id] = Tensor::scalar(total);
        break;
      }
      case Op::kColSum: {
        const Tensor& x = vals[n.args[0]];
        Tensor out(1, x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j)
            out.at(0, j) += x.at(i, j);
        vals[id] = std::move(out);
        break;
      }
      case Op::kMean: {
        const Tensor& x = vals[n.args[0]];
        double total = 0.0;
        for (double v : x.data()) total += v;
        vals[id] = Tensor::scalar(total / static_cast<double>(x.size()));
        break;
      }
      case Op::kGather: {
        const Tensor& x = vals[n.args[0]];
        Tensor out(n.rows, n.cols);
        for (std::size_t i = 0; i < n.index.size(); ++i) {
          const std::int64_t src = n.index[i];
          out[i] = src < 0 ? 0.0 : x[static_cast<std::size_t>(src)];
        }
        vals[id] = std::move(out);
        break;
      }
      case Op::kReshape: {
        const Tensor& x = vals[n.args[0]];
        vals[id] = Tensor(n.rows, n.cols, x.data());
        break;
      }
    }
  }
}

namespace {

/// Marks the subgraph reachable from root so unrelated nodes are skipped.
std::vector<char> reachability(
    const std::vector<std::pair<std::array<std::uint32_t, 2>, std::uint8_t>>&
        edges,
    std::uint32_t root) {
  std::vector<char> mark(edges.size(), 0);
  std::vector<std::uint32_t> stack{root};
  while (!stack.empty()) {
    const std::uint32_t id = stack.back();
    stack.pop_back();
    if (mark[id]) continue;
    mark[id] = 1;
    for (std::uint8_t k = 0; k < edges[id].second; ++k)
      stack.push_back(edges[id].first[k]);
  }
  return mark;
}

}  // namespace

Tensor Graph::forward(Value root, const Bindings& inputs,
                      const ParamStore& params) const {
  std::vector<std::pair<std::array<std::uint32_t, 2>, std::uint8_t>> edges;
  edges.reserve(nodes_.size());
  for (const Node& n : nodes_) edges.emplace_back(n.args, n.arity);
  const std::vector<char> mark = reachability(edges, root.id);

  std::vector<Tensor> vals(nodes_.size());
  // Pre-fill unreachable slots with a sentinel so eval skips them.
  for (std::uint32_t id = 0; id <= root.id; ++id) {
    if (!mark[id]) vals[id] = Tensor::scalar(0.0);
  }
  eval_forward(vals, inputs, params, root.id);
  return vals[root.id];
}

Tensor Graph::forward_backward(Value root, const Bindings& inputs,
                               ParamStore& params,
                               const std::vector<Value>& watch,
                               std::vector<Tensor>* watch_out) const {
  const Node& root_node = nodes_[root.id];
  if (root_node.rows != 1 || root_node.cols != 1) {
    throw NumericError("backward root must be a 1x1 scalar, got " +
                       std::to_string(root_node.rows) + "x" +
                       std::to_string(root_node.cols));
  }

  std::vector<std::pair<std::array<std::uint32_t, 2>, std::uint8_t>> edges;
  edges.reserve(nodes_.size());
  for (const Node& n : nodes_) edges.emplace_back(n.args, n.arity);
  const std::vector<char> mark = reachability(edges, root.id);

  std::vector<Tensor> vals(nodes_.size());
  for (std::uint32_t id = 0; id <= root.id; ++id) {
    if (!mark[id]) vals[id] = Tensor::scalar(0.0);
  }
  eval_forward(vals, inputs, params, root.id);

  if (watch_out != nullptr) {
    watch_out->clear();
    for (Value w : watch) {
      if (w.id > root.id || !mark[w.id]) {
        throw ConfigError("watched node is not part of the root's subgraph");
      }
      watch_out->push_back(vals[w.id]);
    }
  }

  params.zero_grads();

  std::vector<Tensor> adj(nodes_.size());
  auto adj_of = [&](std::uint32_t id) -> Tensor& {
    if (adj[id].size() == 0) adj[id] = Tensor(nodes_[id].rows, nodes_[id].cols);
    return adj[id];
  };
  adj_of(root.id)[0] = 1.0;

  for (std::uint32_t id = root.id + 1; id-- > 0;) {
    if (!mark[id] || adj[id].size() == 0) continue;
    const Node& n = nodes_[id];
    const Tensor& dy = adj[id];
    switch (n.op) {
      case Op::kConstant:
      case Op::kInput:
        break;
      case Op::kParam:
        params.accumulate_grad(n.name, dy);
        break;
      case Op::kMatMul: {
        const std::uint32_t ia = n.args[0], ib = n.args[1];
        const Tensor& a = vals[ia];
        const Tensor& b = vals[ib];
        // dA and dB for Y = op(A) * op(B)
        Tensor da = n.trans_a ? matmul_raw(b, dy, n.trans_b, true)
                              : matmul_raw(dy, b, false, !n.trans_b);
        Tensor db = n.trans_b ? matmul_raw(dy, a, true, n.trans_a)
                              : matmul_raw(a, dy, !n.trans_a, false);
        add_into(adj_of(ia), da);
        add_into(adj_of(ib), db);
        break;
      }
      case Op::kAdd: {
        const std::uint32_t ia = n.args[0], ib = n.args[1];
        add_into(adj_of(ia), dy);
        Tensor& db = adj_of(ib);
        if (db.same_shape(dy)) {
          add_into(db, dy);
        } else {  // row broadcast: accumulate column sums
          for (std::size_t i = 0; i < dy.rows(); ++i)
            for (std::size_t j = 0; j < dy.cols(); ++j)
              db.at(0, j) += dy.at(i, j);
        }
        break;
      }
      case Op::kAffine: {
        Tensor& dx = adj_of(n.args[0]);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += n.a * dy[i];
        break;
      }
      case Op::kScaleRows: {
        const Tensor& x = vals[n.args[0]];
        const Tensor& s = vals[n.args[1]];
        Tensor& dx = adj_of(n.args[0]);
        Tensor& ds = adj_of(n.args[1]);
        for (std::size_t i = 0; i < x.rows(); ++i) {
          for (std::size_t j = 0; j < x.cols(); ++j) {
            dx.at(i, j) += dy.at(i, j) * s.at(i, 0);
            ds.at(i, 0) += dy.at(i, j) * x.at(i, j);
          }
        }
        break;
      }
      case Op::kRelu: {
        const Tensor& x = vals[n.args[0]];
        Tensor& dx = adj_of(n.args[0]);
        for (std::size_t i = 0; i < x.size(); ++i)
          if (x[i] > 0.0) dx[i] += dy[i];
        break;
      }
      case Op::kSoftmaxRows: {
        const Tensor& y = vals[id];
        Tensor& dx = adj_of(n.args[0]);
        for (std::size_t i = 0; i < y.rows(); ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < y.cols(); ++j)
            dot += dy.at(i, j) * y.at(i, j);
          for (std::size_t j = 0; j < y.cols(); ++j)
            dx.at(i, j) += y.at(i, j) * (dy.at(i, j) - dot);
        }
        break;
      }
      case Op::kNormalizeRows: {
        const Tensor& x = vals[n.args[0]];
        const Tensor& y = vals[id];
        Tensor& dx = adj_of(n.args[0]);
        for (std::size_t i = 0; i < x.rows(); ++i) {
          double sq = 0.0;
          for (std::size_t j = 0; j < x.cols(); ++j)
            sq += x.at(i, j) * x.at(i, j);
          const double norm = std::sqrt(sq);
          if (norm <= kNormEps) continue;  // flat zero region
          double dot = 0.0;
          for (std::size_t j = 0; j < x.cols(); ++j)
            dot += dy.at(i, j) * y.at(i, j);
          for (std::size_t j = 0; j < x.cols(); ++j)
            dx.at(i, j) += (dy.at(i, j) - y.at(i, j) * dot) / norm;
        }
        break;
      }
      case Op::kL2Norm: {
        const Tensor& x = vals[n.args[0]];
        Tensor& dx = adj_of(n.args[0]);
        const double norm = vals[id][0];
        const double denom = std::max(norm, kNormEps);
        for (std::size_t i = 0; i < x.size(); ++i)
          dx[i] += dy[0] * x[i] / denom;
        break;
      }
      case Op::kSquare: {
        const Tensor& x = vals[n.args[0]];
        Tensor& dx = adj_of(n.args[0]);
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] += 2.0 * x[i] * dy[i];
        break;
      }
      case Op::kSmoothL1: {
        const Tensor& x = vals[n.args[0]];
        Tensor& dx = adj_of(n.args[0]);
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double d = std::clamp(x[i], -kSmoothL1Beta, kSmoothL1Beta);
          dx[i] += d * dy[i];
        }
        break;
      }
      case Op::kColMax: {
        const Tensor& x = vals[n.args[0]];
        Tensor& dx = adj_of(n.args[0]);
        for (std::size_t j = 0; j < x.cols(); ++j) {
          std::size_t arg = 0;
          for (std::size_t i = 1; i < x.rows(); ++i)
            if (x.at(i, j) > x.at(arg, j)) arg = i;
          dx.at(arg, j) += dy.at(0, j);
        }
        break;
      }
      case Op::kSum: {
        Tensor& dx = adj_of(n.args[0]);
        for (double& v : dx.data()) v += dy[0];
        break;
      }
      case Op::kColSum: {
        Tensor& dx = adj_of(n.args[0]);
        for (std::size_t i = 0; i < dx.rows(); ++i)
          for (std::size_t j = 0; j < dx.cols(); ++j)
            dx.at(i, j) += dy.at(0, j);
        break;
      }
      case Op::kMean: {
        Tensor& dx = adj_of(n.args[0]);
        const double scale = 1.0 / static_cast<double>(dx.size());
        for (double& v : dx.data()) v += dy[0] * scale;
        break;
      }
      case Op::kGather: {
        Tensor& dx = adj_of(n.args[0]);
        for (std::size_t i = 0; i < n.index.size(); ++i) {
          const std::int64_t src = n.index[i];
          if (src >= 0) dx[static_cast<std::size_t>(src)] += dy[i];
        }
        break;
      }
      case Op::kReshape: {
        Tensor& dx = adj_of(n.args[0]);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
        break;
      }
    }
  }
  return vals[root.id];
}

double Graph::gradient_check(Value root, const Bindings& inputs,
                             const ParamStore& params, double epsilon) const {
  if (!(epsilon > 0.0) || epsilon > 1e-3) {
    throw ConfigError("gradient_check: epsilon must lie in (0, 1e-3], got " +
                      std::to_string(epsilon));
  }
  ParamStore work;
  for (const auto& [name, v] : params.values()) work.add(name, v);
  forward_backward(root, inputs, work);

  double max_rel = 0.0;
  for (const std::string& name : work.names()) {
    Tensor& theta = work.value(name);
    const Tensor& analytic = work.grad(name);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + epsilon;
      const double up = forward(root, inputs, work).scalar_value();
      theta[i] = saved - epsilon;
      const double down = forward(root, inputs, work).scalar_value();
      theta[i] = saved;
      const double fd = (up - down) / (2.0 * epsilon);
      const double rel =
          std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace crossloc::diff
