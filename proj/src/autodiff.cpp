#include "fnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fnn/errors.hpp"

namespace fnn {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an empty Var");
  return tape_->nodes_.at(id_).value;
}

const Tensor& Gradients::operator[](Var v) const& {
  auto it = grads_.find(v.id());
  if (it == grads_.end()) throw ContractError("no gradient recorded for node " + std::to_string(v.id()));
  return it->second;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = requires_grad;
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& p : parents) {
    if (&p.tape() != this) throw ContractError("operands recorded on different tapes");
    node.parents.push_back(p.id());
    node.needs_grad = node.needs_grad || nodes_[p.id()].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("loss belongs to a different tape");
  const Tensor& lv = loss.value();
  if (lv.size() != 1) throw ContractError("backward requires a scalar loss, got shape " + shape_str(lv.shape()));

  const std::size_t count = loss.id() + 1;
  std::vector<Tensor> grads(count);
  std::vector<char> has_grad(count, 0);
  grads[loss.id()] = Tensor(lv.shape(), 1.0);
  has_grad[loss.id()] = 1;

  std::vector<Tensor*> parent_ptrs;
  for (std::size_t i = count; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.is_leaf || !has_grad[i] || !node.backward) continue;
    parent_ptrs.assign(node.parents.size(), nullptr);
    for (std::size_t k = 0; k < node.parents.size(); ++k) {
      const std::size_t p = node.parents[k];
      if (!nodes_[p].needs_grad) continue;
      if (!has_grad[p]) {
        grads[p] = Tensor(nodes_[p].value.shape(), 0.0);
        has_grad[p] = 1;
      }
      parent_ptrs[k] = &grads[p];
    }
    node.backward(grads[i], node.value, parent_ptrs);
    grads[i] = Tensor();
  }

  Gradients out;
  for (std::size_t i = 0; i < count; ++i) {
    const Node& node = nodes_[i];
    if (!node.is_leaf || !node.needs_grad) continue;
    if (!has_grad[i]) grads[i] = Tensor(node.value.shape(), 0.0);
    out.grads_.emplace(i, std::move(grads[i]));
  }
  return out;
}

namespace {

// Dot products evaluated as if in twice the working precision (Ogita, Rump &
// Oishi's Dot2). Keeps forward values smooth enough for finite-difference
// checks when activations are large log-probabilities.
//
// Products are split with Veltkamp/Dekker rather than fma: baseline x86-64 has
// no fma instruction and the libm call dominated the convolution. Both give
// the exact product error, so results are identical.

// Veltkamp split: a = hi + lo with each half fitting in 26 bits.
inline void split(double a, double& hi, double& lo) {
  const double t = 134217729.0 * a;  // 2^27 + 1
  hi = t - (t - a);
  lo = a - hi;
}

// Row of n independent Dot2 accumulators sharing the left operand; the inner
// loop runs across accumulators so it vectorizes.
class Dot2Row {
 public:
  explicit Dot2Row(std::size_t n) : s_(n), c_(n) {}

  void reset() {
    std::fill(s_.begin(), s_.end(), 0.0);
    std::fill(c_.begin(), c_.end(), 0.0);
  }

  // acc[j] += a * b[j]; bh/bl are the precomputed splits of b.
  void add(double a, const double* __restrict b, const double* __restrict bh, const double* __restrict bl) {
    double ah, al;
    split(a, ah, al);
    double* __restrict s = s_.data();
    double* __restrict c = c_.data();
    const std::size_t n = s_.size();
    for (std::size_t j = 0; j < n; ++j) {
      const double p = a * b[j];
      const double pe = al * bl[j] - (((p - ah * bh[j]) - al * bh[j]) - ah * bl[j]);
      const double t = s[j] + p;
      const double z = t - s[j];
      c[j] += ((s[j] - (t - z)) + (p - z)) + pe;
      s[j] = t;
    }
  }

  double value(std::size_t j) const { return s_[j] + c_[j]; }

 private:
  std::vector<double> s_, c_;
};

// Splits of every element of v.
void split_all(const std::vector<double>& v, std::vector<double>& hi, std::vector<double>& lo) {
  hi.resize(v.size());
  lo.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) split(v[i], hi[i], lo[i]);
}

}  // namespace

double logsumexp(const double* first, std::size_t count, std::size_t stride) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) m = std::max(m, first[i * stride]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i) s += std::exp(first[i * stride] - m);
  return m + std::log(s);
}

namespace ad {
namespace {

// Row-major strides of `shape`.
std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> st(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) st[i - 1] = st[i] * shape[i];
  return st;
}

void require_rank(const Var& v, std::size_t rank, const char* op) {
  if (v.shape().size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(v.shape()));
  }
}

// Maps every flat index of `out_shape` to a flat index into the broadcast operand.
std::vector<std::size_t> broadcast_index(const Shape& out_shape, const Shape& b_shape) {
  const std::size_t rank = out_shape.size();
  if (b_shape.size() > rank) {
    throw DimensionError("cannot broadcast " + shape_str(b_shape) + " to " + shape_str(out_shape));
  }
  Shape padded(rank - b_shape.size(), 1);
  padded.insert(padded.end(), b_shape.begin(), b_shape.end());
  auto b_strides = strides_of(padded);
  for (std::size_t i = 0; i < rank; ++i) {
    if (padded[i] == out_shape[i]) continue;
    if (padded[i] != 1) {
      throw DimensionError("cannot broadcast " + shape_str(b_shape) + " to " + shape_str(out_shape));
    }
    b_strides[i] = 0;
  }
  const std::size_t n = shape_size(out_shape);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    map[flat] = off;
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      off += b_strides[ax];
      if (idx[ax] < out_shape[ax]) break;
      off -= b_strides[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  return map;
}

}  // namespace

Var add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out = av;
  if (av.shape() == bv.shape()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return a.tape().record(std::move(out), {a, b}, [](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
      for (Tensor* t : pg)
        if (t)
          for (std::size_t i = 0; i < g.size(); ++i) (*t)[i] += g[i];
    });
  }
  auto map = broadcast_index(av.shape(), bv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[map[i]];
  return a.tape().record(std::move(out), {a, b},
                         [map = std::move(map)](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
                           if (pg[0])
                             for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                           if (pg[1])
                             for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[map[i]] += g[i];
                         });
}

Var mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) {
    throw DimensionError("mul: shapes " + shape_str(av.shape()) + " and " + shape_str(bv.shape()));
  }
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape().record(std::move(out), {a, b}, [&av, &bv](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * bv[i];
    if (pg[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * av[i];
  });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  for (double& v : out.vec()) v *= c;
  return a.tape().record(std::move(out), {a}, [c](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
    for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += c * g[i];
  });
}

Var exp(Var a) {
  Tensor out = a.value();
  for (double& v : out.vec()) v = std::exp(v);
  // Re-record with a backward that reads the saved output.
  return a.tape().record(std::move(out), {a}, [](const Tensor& g, const Tensor& y, std::span<Tensor* const> pg) {
    for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * y[i];
  });
}

Var log_floor(Var a, double floor) {
  const Tensor& av = a.value();
  Tensor out = av;
  for (double& v : out.vec()) v = std::log(std::max(v, floor));
  return a.tape().record(std::move(out), {a}, [&av, floor](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (av[i] > floor) (*pg[0])[i] += g[i] / av[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape().record(Tensor::scalar(s), {a}, [](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
    for (double& v : pg[0]->vec()) v += g[0];
  });
}

Var sum(Var a, std::size_t axis) {
  const Shape& in = a.shape();
  if (axis >= in.size()) throw DimensionError("sum: axis " + std::to_string(axis) + " for " + shape_str(in));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
  const std::size_t n = in[axis];
  Shape out_shape = in;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape, 0.0);
  const Tensor& av = a.value();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += av[(o * n + k) * inner + i];
  return a.tape().record(std::move(out), {a}, [outer, inner, n](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < inner; ++i) (*pg[0])[(o * n + k) * inner + i] += g[o * inner + i];
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
    for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
  });
}

Var transpose(Var a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  const Tensor& av = a.value();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return a.tape().record(std::move(out), {a}, [m, n](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) (*pg[0])[i * n + j] += g[j * m + i];
  });
}

Var matmul(Var a, Var b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(as) + " and " + shape_str(bs));
  }
  const std::size_t m = as[0], k = as[1], n = bs[1];
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out({m, n}, 0.0);
  std::vector<double> bh, bl;
  split_all(bv.vec(), bh, bl);
  Dot2Row acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    acc.reset();
    for (std::size_t p = 0; p < k; ++p) acc.add(av[i * k + p], &bv[p * n], &bh[p * n], &bl[p * n]);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = acc.value(j);
  }
  return a.tape().record(std::move(out), {a, b}, [&av, &bv, m, k, n](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
    if (pg[0])  // dA = G B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          (*pg[0])[i * k + p] += acc;
        }
    if (pg[1])  // dB = A^T G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) (*pg[1])[p * n + j] += aip * g[i * n + j];
        }
  });
}

Var pad2d(Var x, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right, double value) {
  require_rank(x, 4, "pad2d");
  const Shape& s = x.shape();
  const std::size_t N = s[0], H = s[1], W = s[2], C = s[3];
  const std::size_t Hp = H + top + bottom, Wp = W + left + right;
  const Tensor& xv = x.value();
  Tensor out({N, Hp, Wp, C}, value);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t h = 0; h < H; ++h) {
      const double* src = &xv[((n * H + h) * W) * C];
      std::copy(src, src + W * C, &out[((n * Hp + h + top) * Wp + left) * C]);
    }
  return x.tape().record(std::move(out), {x}, [=](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t h = 0; h < H; ++h) {
        const double* src = &g[((n * Hp + h + top) * Wp + left) * C];
        double* dst = &(*pg[0])[((n * H + h) * W) * C];
        for (std::size_t i = 0; i < W * C; ++i) dst[i] += src[i];
      }
  });
}

namespace {

Var conv2d_valid(Var x, Var f, std::size_t stride) {
  const Shape& xs = x.shape();
  const Shape& fs = f.shape();
  const std::size_t N = xs[0], H = xs[1], W = xs[2], C = xs[3];
  const std::size_t V = fs[0], R = fs[1], S = fs[2];
  if (R > H || S > W) {
    throw DimensionError("conv2d: kernel " + shape_str(fs) + " larger than padded input " + shape_str(xs));
  }
  const std::size_t Ho = (H - R) / stride + 1, Wo = (W - S) / stride + 1;
  const std::size_t row = S * C;  // contiguous span of one kernel row
  const Tensor& xv = x.value();
  const Tensor& fv = f.value();
  Tensor out({N, Ho, Wo, V}, 0.0);
  // Filters transposed to K×V so one patch element feeds all V accumulators.
  const std::size_t K = R * row;
  std::vector<double> ft(K * V), fh, fl;
  for (std::size_t v = 0; v < V; ++v)
    for (std::size_t q = 0; q < K; ++q) ft[q * V + v] = fv[v * K + q];
  split_all(ft, fh, fl);
  Dot2Row acc(V);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t oh = 0; oh < Ho; ++oh)
      for (std::size_t ow = 0; ow < Wo; ++ow) {
        acc.reset();
        for (std::size_t r = 0; r < R; ++r) {
          const double* xp = &xv[((n * H + oh * stride + r) * W + ow * stride) * C];
          for (std::size_t i = 0; i < row; ++i) {
            const std::size_t q = (r * row + i) * V;
            acc.add(xp[i], &ft[q], &fh[q], &fl[q]);
          }
        }
        double* o = &out[((n * Ho + oh) * Wo + ow) * V];
        for (std::size_t v = 0; v < V; ++v) o[v] = acc.value(v);
      }
  return x.tape().record(std::move(out), {x, f}, [=, &xv, &fv](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t oh = 0; oh < Ho; ++oh)
        for (std::size_t ow = 0; ow < Wo; ++ow) {
          const double* go = &g[((n * Ho + oh) * Wo + ow) * V];
          for (std::size_t v = 0; v < V; ++v) {
            const double gv = go[v];
            if (gv == 0.0) continue;
            for (std::size_t r = 0; r < R; ++r) {
              const std::size_t xoff = ((n * H + oh * stride + r) * W + ow * stride) * C;
              const std::size_t foff = (v * R + r) * row;
              if (pg[0]) {
                double* gx = &(*pg[0])[xoff];
                const double* fp = &fv[foff];
                for (std::size_t i = 0; i < row; ++i) gx[i] += gv * fp[i];
              }
              if (pg[1]) {
                double* gf = &(*pg[1])[foff];
                const double* xp = &xv[xoff];
                for (std::size_t i = 0; i < row; ++i) gf[i] += gv * xp[i];
              }
            }
          }
        }
  });
}

}  // namespace

Var conv2d(Var x, Var filters, std::size_t stride, Padding pad) {
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  const bool batched = x.shape().size() == 4;
  if (!batched && x.shape().size() != 3) {
    throw DimensionError("conv2d: input must be H×W×C or N×H×W×C, got " + shape_str(x.shape()));
  }
  require_rank(filters, 4, "conv2d");
  Var xb = batched ? x : reshape(x, {1, x.shape()[0], x.shape()[1], x.shape()[2]});
  if (xb.shape()[3] != filters.shape()[3]) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) + " and filters " + shape_str(filters.shape()) +
                         " disagree on channels");
  }
  if (pad == Padding::Same) {
    const std::size_t ph = (filters.shape()[1] - 1) / 2, pw = (filters.shape()[2] - 1) / 2;
    if (ph || pw) xb = pad2d(xb, ph, ph, pw, pw, 0.0);
  }
  Var out = conv2d_valid(xb, filters, stride);
  if (batched) return out;
  const Shape& os = out.shape();
  return reshape(out, {os[1], os[2], os[3]});
}

Var logsumexp(Var x, std::size_t axis) {
  const Shape& in = x.shape();
  if (axis >= in.size()) throw DimensionError("logsumexp: axis " + std::to_string(axis) + " for " + shape_str(in));
  const std::size_t n = in[axis];
  if (n == 0) throw DimensionError("logsumexp: empty axis in " + shape_str(in));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
  Shape out_shape = in;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const Tensor& xv = x.value();
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] = fnn::logsumexp(&xv[o * n * inner + i], n, inner);
  return x.tape().record(std::move(out), {x}, [&xv, outer, inner, n](const Tensor& g, const Tensor& y, std::span<Tensor* const> pg) {
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        const double lse = y[o * inner + i], go = g[o * inner + i];
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t idx = (o * n + k) * inner + i;
          (*pg[0])[idx] += go * std::exp(xv[idx] - lse);
        }
      }
  });
}

namespace {

std::size_t group_size(const Var& x, std::size_t group, const char* op) {
  if (x.shape().empty()) throw DimensionError(std::string(op) + ": scalar input");
  const std::size_t last = x.shape().back();
  if (group == 0) group = last;
  if (group == 0 || last % group != 0) {
    throw DimensionError(std::string(op) + ": group " + std::to_string(group) + " does not divide last axis of " +
                         shape_str(x.shape()));
  }
  return group;
}

}  // namespace

Var lnorm(Var x, std::size_t group) {
  const std::size_t D = group_size(x, group, "lnorm");
  Tensor out = x.value();
  const std::size_t blocks = out.size() / D;
  for (std::size_t b = 0; b < blocks; ++b) {
    double* p = &out[b * D];
    const double lse = fnn::logsumexp(p, D);
    for (std::size_t d = 0; d < D; ++d) p[d] -= lse;
  }
  // d/dx: g - softmax * sum(g) per block.
  return x.tape().record(std::move(out), {x}, [D, blocks](const Tensor& g, const Tensor& y, std::span<Tensor* const> pg) {
    for (std::size_t b = 0; b < blocks; ++b) {
      double gs = 0.0;
      for (std::size_t d = 0; d < D; ++d) gs += g[b * D + d];
      for (std::size_t d = 0; d < D; ++d) {
        const std::size_t i = b * D + d;
        (*pg[0])[i] += g[i] - std::exp(y[i]) * gs;
      }
    }
  });
}

Var softmax(Var x, std::size_t group) {
  const std::size_t D = group_size(x, group, "softmax");
  Tensor out = x.value();
  const std::size_t blocks = out.size() / D;
  for (std::size_t b = 0; b < blocks; ++b) {
    double* p = &out[b * D];
    const double lse = fnn::logsumexp(p, D);
    for (std::size_t d = 0; d < D; ++d) p[d] = std::exp(p[d] - lse);
  }
  return x.tape().record(std::move(out), {x}, [D, blocks](const Tensor& g, const Tensor& y, std::span<Tensor* const> pg) {
    for (std::size_t b = 0; b < blocks; ++b) {
      double dot = 0.0;
      for (std::size_t d = 0; d < D; ++d) dot += g[b * D + d] * y[b * D + d];
      for (std::size_t d = 0; d < D; ++d) {
        const std::size_t i = b * D + d;
        (*pg[0])[i] += y[i] * (g[i] - dot);
      }
    }
  });
}

namespace {

struct PoolGeometry {
  std::size_t N, H, W, C, Ho, Wo;
};

PoolGeometry pool_geometry(const Var& x, std::size_t r, std::size_t s, std::size_t stride, const char* op) {
  require_rank(x, 4, op);
  if (r == 0 || s == 0 || stride == 0) throw ContractError(std::string(op) + ": window and stride must be positive");
  const Shape& xs = x.shape();
  if (r > xs[1] || s > xs[2]) {
    throw DimensionError(std::string(op) + ": window " + std::to_string(r) + "x" + std::to_string(s) +
                         " exceeds input " + shape_str(xs));
  }
  return {xs[0], xs[1], xs[2], xs[3], (xs[1] - r) / stride + 1, (xs[2] - s) / stride + 1};
}

}  // namespace

Var pool_logmeanexp(Var x, std::size_t r, std::size_t s, std::size_t stride) {
  const PoolGeometry p = pool_geometry(x, r, s, stride, "lpool");
  const double log_n = std::log(static_cast<double>(r * s));
  const Tensor& xv = x.value();
  Tensor out({p.N, p.Ho, p.Wo, p.C});
  std::vector<double> window(r * s);
  for (std::size_t n = 0; n < p.N; ++n)
    for (std::size_t oh = 0; oh < p.Ho; ++oh)
      for (std::size_t ow = 0; ow < p.Wo; ++ow)
        for (std::size_t c = 0; c < p.C; ++c) {
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < s; ++j)
              window[i * s + j] = xv[((n * p.H + oh * stride + i) * p.W + ow * stride + j) * p.C + c];
          out[((n * p.Ho + oh) * p.Wo + ow) * p.C + c] = fnn::logsumexp(window.data(), window.size()) - log_n;
        }
  // Each window entry receives g * exp(x - y) / n.
  return x.tape().record(std::move(out), {x}, [&xv, p, r, s, stride, log_n](const Tensor& g, const Tensor& y, std::span<Tensor* const> pg) {
    for (std::size_t n = 0; n < p.N; ++n)
      for (std::size_t oh = 0; oh < p.Ho; ++oh)
        for (std::size_t ow = 0; ow < p.Wo; ++ow)
          for (std::size_t c = 0; c < p.C; ++c) {
            const std::size_t o = ((n * p.Ho + oh) * p.Wo + ow) * p.C + c;
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < s; ++j) {
                const std::size_t idx = ((n * p.H + oh * stride + i) * p.W + ow * stride + j) * p.C + c;
                (*pg[0])[idx] += g[o] * std::exp(xv[idx] - y[o] - log_n);
              }
          }
  });
}

Var pool_mean(Var x, std::size_t r, std::size_t s, std::size_t stride) {
  const PoolGeometry p = pool_geometry(x, r, s, stride, "avgpool");
  const double inv_n = 1.0 / static_cast<double>(r * s);
  const Tensor& xv = x.value();
  Tensor out({p.N, p.Ho, p.Wo, p.C}, 0.0);
  for (std::size_t n = 0; n < p.N; ++n)
    for (std::size_t oh = 0; oh < p.Ho; ++oh)
      for (std::size_t ow = 0; ow < p.Wo; ++ow)
        for (std::size_t c = 0; c < p.C; ++c) {
          double acc = 0.0;
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < s; ++j)
              acc += xv[((n * p.H + oh * stride + i) * p.W + ow * stride + j) * p.C + c];
          out[((n * p.Ho + oh) * p.Wo + ow) * p.C + c] = acc * inv_n;
        }
  return x.tape().record(std::move(out), {x}, [p, r, s, stride, inv_n](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
    for (std::size_t n = 0; n < p.N; ++n)
      for (std::size_t oh = 0; oh < p.Ho; ++oh)
        for (std::size_t ow = 0; ow < p.Wo; ++ow)
          for (std::size_t c = 0; c < p.C; ++c) {
            const double go = g[((n * p.Ho + oh) * p.Wo + ow) * p.C + c] * inv_n;
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < s; ++j)
                (*pg[0])[((n * p.H + oh * stride + i) * p.W + ow * stride + j) * p.C + c] += go;
          }
  });
}

Var nll(Var logpost, std::span<const int> labels) {
  require_rank(logpost, 2, "nll");
  const std::size_t N = logpost.shape()[0], V = logpost.shape()[1];
  if (labels.size() != N) {
    throw DimensionError("nll: " + std::to_string(labels.size()) + " labels for batch " + shape_str(logpost.shape()));
  }
  if (N == 0) throw ContractError("nll: empty batch");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= V) {
      throw ContractError("nll: label " + std::to_string(l) + " outside [0, " + std::to_string(V) + ")");
    }
  const Tensor& xv = logpost.value();
  double acc = 0.0;
  for (std::size_t n = 0; n < N; ++n) acc += xv[n * V + static_cast<std::size_t>(labels[n])];
  std::vector<int> saved(labels.begin(), labels.end());
  return logpost.tape().record(Tensor::scalar(-acc / static_cast<double>(N)), {logpost},
                               [saved = std::move(saved), N, V](const Tensor& g, const Tensor&, std::span<Tensor* const> pg) {
                                 const double w = -g[0] / static_cast<double>(N);
                                 for (std::size_t n = 0; n < N; ++n)
                                   (*pg[0])[n * V + static_cast<std::size_t>(saved[n])] += w;
                               });
}

}  // namespace ad
}  // namespace fnn
