#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "fnn/tensor.hpp"

namespace fnn {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients of a scalar loss with respect to the requires_grad leaves of a tape.
class Gradients {
 public:
  bool contains(Var v) const { return grads_.count(v.id()) != 0; }
  /// Throws ContractError if v is not a requires_grad leaf of the tape.
  const Tensor& operator[](Var v) const&;
  Tensor operator[](Var v) && { return static_cast<const Gradients&>(*this)[v]; }

 private:
  friend class Tape;
  std::unordered_map<std::size_t, Tensor> grads_;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node list
/// is always topologically sorted. Confined to one thread.
class Tape {
 public:
  /// Accumulates the node's incoming gradient into its parents' gradients.
  /// `value` is the node's own forward output. Entries of `parent_grads` are
  /// null for parents that need no gradient.
  using BackwardFn =
      std::function<void(const Tensor& grad_out, const Tensor& value, std::span<Tensor* const> parent_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records the result of a custom operation. `backward` is dropped when no
  /// parent needs a gradient.
  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

  /// Reverse sweep from a scalar loss.
  Gradients backward(Var loss);

  bool needs_grad(Var v) const { return nodes_.at(v.id()).needs_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool needs_grad = false;
    bool is_leaf = false;
  };
  std::deque<Node> nodes_;  // deque keeps value references stable
};

/// Overflow-free log(sum(exp(values))) over a strided slice.
double logsumexp(const double* first, std::size_t count, std::size_t stride = 1);

enum class Padding { Same, Valid };

/// Differentiable operations. Every op takes its tape from its first operand.
namespace ad {

/// a + b, where b broadcasts against a (trailing-aligned; each extent equal or 1).
Var add(Var a, Var b);
/// Elementwise product of equal shapes.
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var exp(Var a);
/// log(max(a, floor)); gradient is zero where the floor is active.
Var log_floor(Var a, double floor);
/// Sum of all entries as a rank-0 tensor.
Var sum(Var a);
/// Sum along one axis, removing it.
Var sum(Var a, std::size_t axis);
Var reshape(Var a, Shape shape);
Var transpose(Var a);
Var matmul(Var a, Var b);
/// Constant-value padding of the spatial axes of an N×H×W×C tensor.
Var pad2d(Var x, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right, double value);
/// Cross-correlation of x (H×W×C or N×H×W×C) with filters V×R×S×C.
/// Same padding zero-pads floor((R-1)/2) rows and floor((S-1)/2) columns on each side.
Var conv2d(Var x, Var filters, std::size_t stride, Padding pad);
/// log-sum-exp along an axis, removing it.
Var logsumexp(Var x, std::size_t axis);
/// x - logsumexp(x) over consecutive blocks of `group` entries of the last axis
/// (group = 0 means the whole last axis).
Var lnorm(Var x, std::size_t group = 0);
/// exp(lnorm(x, group)).
Var softmax(Var x, std::size_t group = 0);
/// log of the uniform mixture over each r×s window of an N×H×W×C tensor.
Var pool_logmeanexp(Var x, std::size_t r, std::size_t s, std::size_t stride);
/// Arithmetic mean over each r×s window of an N×H×W×C tensor.
Var pool_mean(Var x, std::size_t r, std::size_t s, std::size_t stride);
/// -(1/N) sum_n x[n, labels[n]] for x of shape N×V.
Var nll(Var logpost, std::span<const int> labels);

}  // namespace ad
}  // namespace fnn
