#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crossloc/tensor.hpp"

namespace crossloc::diff {

/// Named trainable parameters with matching gradient slots.
///
/// Gradients are allocated lazily (zero-filled, parameter-shaped) and must
/// be cleared between optimization steps. Iteration order is the sorted
/// parameter name order, which keeps every downstream computation
/// deterministic.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value);
  bool has(const std::string& name) const;

  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;

  Tensor& grad(const std::string& name);
  const Tensor& grad(const std::string& name) const;

  void zero_grads();
  void accumulate_grad(const std::string& name, const Tensor& delta);

  std::vector<std::string> names() const;
  std::size_t size() const { return values_.size(); }
  std::size_t scalar_count() const;

  std::map<std::string, Tensor>& values() { return values_; }
  const std::map<std::string, Tensor>& values() const { return values_; }

 private:
  std::map<std::string, Tensor> values_;
  std::map<std::string, Tensor> grads_;
};

/// Handle to a node in a Graph.
struct Value {
  std::uint32_t id = 0;
};

/// Runtime bindings for named input nodes.
using Bindings = std::map<std::string, Tensor>;

/// A composition of the core differentiable ops, built once and then
/// evaluated forward (and optionally backward) against concrete inputs and
/// parameters.
///
/// Nodes only ever reference earlier nodes, so insertion order is a valid
/// evaluation order. Shapes are resolved while the graph is built; shape
/// mismatches throw immediately with the op name and shapes involved.
class Graph {
 public:
  // -- leaf nodes -----------------------------------------------------------
  Value constant(Tensor t);
  Value input(const std::string& name, std::size_t rows, std::size_t cols);
  Value param(const std::string& name, std::size_t rows, std::size_t cols);

  // -- core ops -------------------------------------------------------------
  Value matmul(Value a, Value b, bool trans_a = false, bool trans_b = false);
  /// Elementwise add; b may also be a 1 x n row broadcast over the rows of a.
  Value add(Value a, Value b);
  /// Elementwise scale * x + offset.
  Value affine(Value x, double scale, double offset);
  /// Row i of x scaled by s[i]; s must be m x 1.
  Value scale_rows(Value x, Value s);
  Value sub(Value a, Value b) { return add(a, affine(b, -1.0, 0.0)); }
  Value relu(Value x);
  Value softmax_rows(Value x);
  /// Rows normalized to unit L2 norm; rows with norm <= kNormEps become zero.
  Value normalize_rows(Value x);
  /// Frobenius norm of all elements, as a 1 x 1 scalar (eps-guarded gradient).
  Value l2_norm(Value x);
  Value square(Value x);
  /// Elementwise smooth-L1 with beta = 1: 0.5 t^2 for |t| < 1, |t| - 0.5 else.
  Value smooth_l1(Value x);
  /// Column-wise max over rows -> 1 x n (gradient routed to first argmax).
  Value col_max(Value x);
  Value sum(Value x);      // -> 1 x 1
  Value col_sum(Value x);  // -> 1 x n
  Value mean(Value x);     // -> 1 x 1

  // -- structural ops (pure data movement, exact scatter-add gradients) -----
  /// out[i] = x[index[i]] over row-major data; index -1 yields 0.0.
  Value gather(Value x, std::vector<std::int64_t> index, std::size_t rows,
               std::size_t cols);
  Value reshape(Value x, std::size_t rows, std::size_t cols);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t rows(Value v) const { return nodes_[v.id].rows; }
  std::size_t cols(Value v) const { return nodes_[v.id].cols; }

  // -- execution ------------------------------------------------------------
  /// Evaluates the subgraph rooted at root. Pure; deterministic.
  Tensor forward(Value root, const Bindings& inputs,
                 const ParamStore& params) const;

  /// Forward pass plus exact reverse-mode gradients of the scalar root,
  /// accumulated into params (grads are zeroed first). Throws NumericError
  /// if root is not 1 x 1. Nodes listed in watch must lie in the subgraph of
  /// root; their forward values are copied to watch_out.
  Tensor forward_backward(Value root, const Bindings& inputs, ParamStore& params,
                          const std::vector<Value>& watch = {},
                          std::vector<Tensor>* watch_out = nullptr) const;

  /// Central finite-difference verification of every parameter gradient.
  /// Returns max over components of |analytic - fd| / max(1, |fd|).
  /// epsilon must lie in (0, 1e-3].
  double gradient_check(Value root, const Bindings& inputs,
                        const ParamStore& params, double epsilon) const;

  static constexpr double kNormEps = 1e-12;
  static constexpr double kSmoothL1Beta = 1.0;

 private:
  enum class Op : std::uint8_t {
    kConstant,
    kInput,
    kParam,
    kMatMul,
    kAdd,
    kAffine,
    kScaleRows,
    kRelu,
    kSoftmaxRows,
    kNormalizeRows,
    kL2Norm,
    kSquare,
    kSmoothL1,
    kColMax,
    kSum,
    kColSum,
    kMean,
    kGather,
    kReshape,
  };

  struct Node {
    Op op;
    std::array<std::uint32_t, 2> args{0, 0};
    std::uint8_t arity = 0;
    std::size_t rows = 0, cols = 0;
    double a = 1.0, b = 0.0;  // affine payload
    bool trans_a = false, trans_b = false;
    std::string name;               // input / param
    Tensor literal;                 // constant
    std::vector<std::int64_t> index;  // gather
  };

  Value push(Node node);
  const Node& node(Value v) const { return nodes_[v.id]; }
  void eval_forward(std::vector<Tensor>& vals, const Bindings& inputs,
                    const ParamStore& params, std::uint32_t upto) const;

  std::vector<Node> nodes_;
};

}  // namespace crossloc::diff
