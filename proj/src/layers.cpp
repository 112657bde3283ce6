#include "fnn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fnn/errors.hpp"

namespace fnn {

bool LogPmfTensor::is_normalized(double tol) const {
  const std::size_t D = states();
  for (std::size_t b = 0; b + D <= values.size(); b += D) {
    double total = 0.0;
    for (std::size_t d = 0; d < D; ++d) total += std::exp(values[b + d]);
    if (!(std::abs(total - 1.0) <= tol)) return false;
  }
  return true;
}

Tensor LogPmfTensor::flat_channels() const {
  return values.reshaped({batch(), height(), width(), groups() * states()});
}

namespace {

Shape with_last(const Shape& s, std::size_t last) {
  Shape out = s;
  out.push_back(last);
  return out;
}

void require_image(const Tensor& image, const char* op) {
  if (image.rank() != 3 && image.rank() != 4) {
    throw DimensionError(std::string(op) + ": image must be H×W×C or N×H×W×C, got " + shape_str(image.shape()));
  }
}

}  // namespace

LogPmfTensor encode_binary(const Tensor& image) {
  require_image(image, "encode_binary");
  Tensor out(with_last(image.shape(), 2));
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double p = image[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw IngestionError("encode_binary: pixel value " + std::to_string(p) + " outside [0, 1] at flat index " +
                           std::to_string(i));
    }
    const double c = std::clamp(p, kPixelClamp, 1.0 - kPixelClamp);
    out[2 * i] = std::log1p(-c);
    out[2 * i + 1] = std::log(c);
  }
  return {std::move(out)};
}

LogPmfTensor encode_channel_simplex(const Tensor& image) {
  require_image(image, "encode_channel_simplex");
  if (!image.all_finite()) throw IngestionError("encode_channel_simplex: non-finite pixel value");
  Shape shape = image.shape();
  const std::size_t C = shape.back();
  shape.back() = 1;
  shape.push_back(C);
  Tensor out = image.reshaped(shape);
  for (std::size_t b = 0; b < out.size(); b += C) {
    const double lse = logsumexp(&out[b], C);
    for (std::size_t c = 0; c < C; ++c) out[b + c] -= lse;
  }
  return {std::move(out)};
}

Var link(Var seeds, LinkMode mode) {
  const Tensor& theta = seeds.value();
  if (theta.rank() == 0) throw DimensionError("link: scalar seed");
  const std::size_t D = theta.shape().back();
  Tensor out(theta.shape());
  for (std::size_t b = 0; b < theta.size(); b += D) {
    link_into(theta.data().subspan(b, D), mode, out.data().subspan(b, D));
  }
  return seeds.tape().record(std::move(out), {seeds},
                             [&theta, mode, D](const Tensor& g, const Tensor& y, std::span<Tensor* const> pg) {
                               for (std::size_t b = 0; b < theta.size(); b += D) {
                                 link_vjp_accumulate(theta.data().subspan(b, D), y.data().subspan(b, D), mode,
                                                     g.data().subspan(b, D), pg[0]->data().subspan(b, D));
                               }
                             });
}

LinkedBank link_bank(Var seeds, Var bias_seed, LinkMode mode) {
  const Shape& s = seeds.shape();
  if (s.size() < 2) throw DimensionError("filter seeds must be V×...×D, got " + shape_str(s));
  const std::size_t V = s[0];
  if (bias_seed.shape() != Shape{V}) {
    throw DimensionError("bias seed " + shape_str(bias_seed.shape()) + " does not match " + std::to_string(V) +
                         " filters");
  }
  LinkedBank bank;
  bank.probs = link(seeds, mode);
  bank.log_probs = ad::log_floor(bank.probs, kProbFloor);
  const std::size_t K = shape_size(s) / V;
  Var plogp = ad::reshape(ad::mul(bank.probs, bank.log_probs), {V, K});
  bank.entropy = ad::scale(ad::sum(plogp, 1), -1.0);
  bank.log_bias = ad::log_floor(link(bias_seed, mode), kProbFloor);
  return bank;
}

namespace {

void check_states(const Var& x, const LinkedBank& bank, std::size_t states, const char* op) {
  const Shape& fs = bank.probs.shape();
  if (states == 0 || fs.back() != states) {
    throw DimensionError(std::string(op) + ": filter states " + std::to_string(fs.back()) + " vs input states " +
                         std::to_string(states));
  }
  if (x.shape().back() % states != 0) {
    throw DimensionError(std::string(op) + ": input " + shape_str(x.shape()) + " is not a multiple of " +
                         std::to_string(states) + " states");
  }
}

}  // namespace

Var klconv(Var x, const LinkedBank& bank, std::size_t states, Divergence div, double alpha, ConvGeometry geom) {
  if (x.shape().size() != 4) throw DimensionError("klconv: input must be N×H×W×(G·D), got " + shape_str(x.shape()));
  check_states(x, bank, states, "klconv");
  const Shape& fs = bank.probs.shape();
  if (fs.size() != 5) throw DimensionError("klconv: filters must be V×R×S×G×D, got " + shape_str(fs));
  const std::size_t V = fs[0], R = fs[1], S = fs[2], GD = fs[3] * fs[4];
  if (GD != x.shape()[3]) {
    throw DimensionError("klconv: input " + shape_str(x.shape()) + " does not match filters " + shape_str(fs));
  }
  Tape& tape = x.tape();

  Var xp = x;
  if (geom.pad == Padding::Same) {
    const std::size_t ph = (R - 1) / 2, pw = (S - 1) / 2;
    // Uniform pmf is the neutral padding element; zero is not a log-probability.
    const double fill = div == Divergence::M ? -std::log(static_cast<double>(states)) : 1.0 / states;
    if (ph || pw) xp = ad::pad2d(x, ph, ph, pw, pw, fill);
  }

  Var scores;
  if (div == Divergence::M) {
    Var f = ad::reshape(bank.probs, {V, R, S, GD});
    Var cross = ad::conv2d(xp, f, geom.stride, Padding::Valid);
    scores = ad::add(cross, bank.entropy);
  } else {
    Var f = ad::reshape(bank.log_probs, {V, R, S, GD});
    Var cross = ad::conv2d(xp, f, geom.stride, Padding::Valid);
    const Shape& ps = xp.shape();
    Var plogp = ad::sum(ad::mul(xp, ad::log_floor(xp, kProbFloor)), 3);
    Var ones = tape.constant(Tensor({1, R, S, 1}, 1.0));
    Var patch_neg_entropy = ad::conv2d(ad::reshape(plogp, {ps[0], ps[1], ps[2], 1}), ones, geom.stride, Padding::Valid);
    scores = ad::add(cross, ad::scale(patch_neg_entropy, -1.0));
  }
  return ad::add(ad::scale(scores, alpha), bank.log_bias);
}

Var divg_dense(Var x, const LinkedBank& bank, std::size_t states, Divergence div, double alpha) {
  if (x.shape().size() != 2) throw DimensionError("divg_dense: input must be N×K, got " + shape_str(x.shape()));
  check_states(x, bank, states, "divg_dense");
  const std::size_t V = bank.probs.shape()[0];
  const std::size_t K = shape_size(bank.probs.shape()) / V;
  if (K != x.shape()[1]) {
    throw DimensionError("divg_dense: input " + shape_str(x.shape()) + " does not match filters " +
                         shape_str(bank.probs.shape()));
  }
  Var scores;
  if (div == Divergence::M) {
    Var w = ad::transpose(ad::reshape(bank.probs, {V, K}));
    scores = ad::add(ad::matmul(x, w), bank.entropy);
  } else {
    Var w = ad::transpose(ad::reshape(bank.log_probs, {V, K}));
    Var neg_h = ad::sum(ad::mul(x, ad::log_floor(x, kProbFloor)), 1);
    scores = ad::add(ad::matmul(x, w), ad::scale(ad::reshape(neg_h, {x.shape()[0], 1}), -1.0));
  }
  return ad::add(ad::scale(scores, alpha), bank.log_bias);
}

namespace {

LinkedBank constant_bank(Tape& tape, const FilterBank& bank) {
  return link_bank(tape.constant(bank.seeds), tape.constant(bank.bias_seed), bank.mode);
}

Tensor unbatch(Tensor t, bool batched) {
  if (batched) return t;
  Shape s(t.shape().begin() + 1, t.shape().end());
  return std::move(t).reshaped(std::move(s));
}

}  // namespace

Tensor divg_dense(const LogPmfTensor& x, const FilterBank& bank) {
  const std::size_t N = x.batch();
  const std::size_t K = x.values.size() / N;
  const std::size_t V = bank.filters();
  if (bank.seeds.size() != V * K) {
    throw DimensionError("divg_dense: filters " + shape_str(bank.seeds.shape()) + " do not cover input " +
                         shape_str(x.values.shape()));
  }
  Tape tape;
  FilterBank flat = bank;
  flat.seeds = bank.seeds.reshaped({V, K / x.states(), x.states()});
  LinkedBank linked = constant_bank(tape, flat);
  Tensor input = x.values.reshaped({N, K});
  if (bank.divergence == Divergence::I) {
    for (double& v : input.vec()) v = std::exp(v);
  }
  Var out = divg_dense(tape.constant(std::move(input)), linked, x.states(), bank.divergence, bank.alpha);
  return unbatch(out.value(), x.batched());
}

Tensor klconv_m(const LogPmfTensor& x, const FilterBank& bank, std::size_t stride, Padding pad) {
  if (bank.divergence != Divergence::M) throw ContractError("klconv_m requires an M-divergence filter bank");
  Tape tape;
  LinkedBank linked = constant_bank(tape, bank);
  Var out = klconv(tape.constant(x.flat_channels()), linked, x.states(), Divergence::M, bank.alpha, {stride, pad});
  return unbatch(out.value(), x.batched());
}

Tensor klconv_i(const Tensor& probs, const FilterBank& bank, std::size_t stride, Padding pad) {
  if (bank.divergence != Divergence::I) throw ContractError("klconv_i requires an I-divergence filter bank");
  const LogPmfTensor shaped{probs};
  if (probs.rank() != 4 && probs.rank() != 5) {
    throw DimensionError("klconv_i: input must be H×W×G×D or N×H×W×G×D, got " + shape_str(probs.shape()));
  }
  Tape tape;
  LinkedBank linked = constant_bank(tape, bank);
  Var out = klconv(tape.constant(shaped.flat_channels()), linked, shaped.states(), Divergence::I, bank.alpha,
                   {stride, pad});
  return unbatch(out.value(), shaped.batched());
}

Tensor lnorm(const Tensor& x) {
  Tape tape;
  return ad::lnorm(tape.constant(x)).value();
}

Tensor softmax_nl(const Tensor& x) {
  Tape tape;
  return ad::softmax(tape.constant(x)).value();
}

LogPmfTensor lpool(const LogPmfTensor& x, std::size_t r, std::size_t s, std::size_t stride) {
  Tape tape;
  Var out = ad::pool_logmeanexp(tape.constant(x.flat_channels()), r, s, stride);
  const Shape& os = out.shape();
  Tensor v = out.value().reshaped({os[0], os[1], os[2], x.groups(), x.states()});
  return {unbatch(std::move(v), x.batched())};
}

Tensor avgpool_prob(const Tensor& x, std::size_t r, std::size_t s, std::size_t stride) {
  if (x.rank() != 3 && x.rank() != 4) {
    throw DimensionError("avgpool: input must be H×W×C or N×H×W×C, got " + shape_str(x.shape()));
  }
  const bool batched = x.rank() == 4;
  Tape tape;
  Var in = tape.constant(batched ? x : x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)}));
  return unbatch(ad::pool_mean(in, r, s, stride).value(), batched);
}

}  // namespace fnn
