#include "fnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fnn/errors.hpp"
#include "fnn/simplex.hpp"

namespace fnn {

std::string layer_name(const LayerSpec& l) {
  auto div = [&] { return std::string(l.divergence == Divergence::M ? "m" : "i"); };
  switch (l.kind) {
    case LayerKind::KLConv:
      return "klconv v=" + std::to_string(l.filters) + " r=" + std::to_string(l.r) + " s=" + std::to_string(l.s) +
             " mode=" + div() + " link=" + std::string(to_string(l.link));
    case LayerKind::DivgDense:
      return "dense v=" + std::to_string(l.filters) + " mode=" + div() + " link=" + std::string(to_string(l.link));
    case LayerKind::LNorm: return "lnorm";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::LPool: return "lpool r=" + std::to_string(l.r) + " s=" + std::to_string(l.s);
    case LayerKind::AvgPool: return "avgpool r=" + std::to_string(l.r) + " s=" + std::to_string(l.s);
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

namespace {

const char* domain_name(Domain d) {
  switch (d) {
    case Domain::Input: return "input pmf";
    case Domain::LogPmf: return "log-pmf";
    case Domain::ProbPmf: return "probability pmf";
    case Domain::Scores: return "unnormalized scores";
  }
  return "?";
}

}  // namespace

std::vector<ResolvedLayer> resolve(const NetworkSpec& spec) {
  if (spec.height == 0 || spec.width == 0 || spec.channels == 0) throw SpecError("input extents must be positive");
  if (spec.layers.empty()) throw SpecError("network has no layers");
  ActivationShape cur{spec.height, spec.width, spec.encoding == InputEncoding::Binary ? spec.channels : 1,
                      spec.encoding == InputEncoding::Binary ? 2 : spec.channels, Domain::Input};
  if (cur.states < 2) throw SpecError("input encoding yields fewer than 2 states per factor");

  std::vector<ResolvedLayer> out;
  std::string prev = "input";
  std::optional<Divergence> pending;  // divergence of the KL layer awaiting its nonlinearity
  std::size_t param_index = 0;

  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string name = "layer " + std::to_string(i) + " (" + layer_name(l) + ")";
    auto reject = [&](const std::string& why) {
      throw SpecError(name + " cannot follow " + prev + ": " + why);
    };
    ResolvedLayer r{l, cur, cur, 0, {}};
    switch (l.kind) {
      case LayerKind::KLConv:
      case LayerKind::DivgDense: {
        const bool m = l.divergence == Divergence::M;
        const Domain need = m ? Domain::LogPmf : Domain::ProbPmf;
        if (cur.domain != Domain::Input && cur.domain != need) {
          reject(std::string(m ? "M" : "I") + "-divergence layers need a " + domain_name(need) + " input, got " +
                 domain_name(cur.domain));
        }
        if (l.filters < 2) reject("needs at least 2 filters");
        if (!(l.alpha >= 0.0)) reject("alpha must be non-negative");
        if (l.gamma && !(*l.gamma >= 1.0)) reject("gamma must be at least 1");
        if (l.kind == LayerKind::KLConv) {
          if (l.r == 0 || l.s == 0 || l.stride == 0) reject("kernel and stride must be positive");
          const std::size_t ph = l.pad == Padding::Same ? (l.r - 1) / 2 : 0;
          const std::size_t pw = l.pad == Padding::Same ? (l.s - 1) / 2 : 0;
          if (l.r > cur.height + 2 * ph || l.s > cur.width + 2 * pw) {
            reject("kernel " + std::to_string(l.r) + "x" + std::to_string(l.s) + " exceeds input " +
                   std::to_string(cur.height) + "x" + std::to_string(cur.width));
          }
          r.seed_shape = {l.filters, l.r, l.s, cur.groups, cur.states};
          r.out = {(cur.height + 2 * ph - l.r) / l.stride + 1, (cur.width + 2 * pw - l.s) / l.stride + 1, 1,
                   l.filters, Domain::Scores};
        } else {
          r.seed_shape = {l.filters, cur.height, cur.width, cur.groups, cur.states};
          r.out = {1, 1, 1, l.filters, Domain::Scores};
        }
        r.param_index = param_index++;
        pending = l.divergence;
        break;
      }
      case LayerKind::LNorm:
      case LayerKind::Softmax: {
        const bool ln = l.kind == LayerKind::LNorm;
        if (cur.domain != Domain::Scores) reject(std::string("expects unnormalized scores, got ") + domain_name(cur.domain));
        if (pending != (ln ? Divergence::M : Divergence::I)) {
          reject(ln ? "LNorm pairs with M-divergence layers" : "Softmax pairs with I-divergence layers");
        }
        r.out.domain = ln ? Domain::LogPmf : Domain::ProbPmf;
        pending.reset();
        break;
      }
      case LayerKind::LPool:
      case LayerKind::AvgPool: {
        const bool lp = l.kind == LayerKind::LPool;
        const Domain need = lp ? Domain::LogPmf : Domain::ProbPmf;
        if (cur.domain != Domain::Input && cur.domain != need) {
          reject(std::string(lp ? "LPool" : "average pooling") + " expects a " + domain_name(need) + ", got " +
                 domain_name(cur.domain));
        }
        if (l.r == 0 || l.s == 0 || l.stride == 0) reject("window and stride must be positive");
        if (l.r > cur.height || l.s > cur.width) reject("pooling window exceeds input");
        r.out = {(cur.height - l.r) / l.stride + 1, (cur.width - l.s) / l.stride + 1, cur.groups, cur.states, need};
        break;
      }
      case LayerKind::Flatten:
        if (cur.domain == Domain::Scores) reject("cannot flatten unnormalized scores");
        r.out = {1, 1, cur.height * cur.width * cur.groups, cur.states, cur.domain};
        break;
    }
    out.push_back(r);
    cur = r.out;
    prev = name;
  }
  if ((cur.domain != Domain::LogPmf && cur.domain != Domain::ProbPmf) || cur.height != 1 || cur.width != 1 ||
      cur.groups != 1 || cur.states != spec.classes) {
    throw SpecError("network must end in a single normalized distribution over " + std::to_string(spec.classes) +
                    " classes; " + prev + " yields " + std::to_string(cur.height) + "x" + std::to_string(cur.width) +
                    "x" + std::to_string(cur.groups) + "x" + std::to_string(cur.states) + " " + domain_name(cur.domain));
  }
  return out;
}

TrainState build(const NetworkSpec& spec, std::uint64_t seed) {
  const auto layers = resolve(spec);
  TrainState state{spec, {}, 0, Rng(seed), 1.0, {}};
  for (const ResolvedLayer& r : layers) {
    if (!r.spec.has_params()) continue;
    const std::size_t V = r.spec.filters;
    const std::size_t D = r.seed_shape.back();
    LayerParams p{Tensor(r.seed_shape), Tensor({V}, 0.0)};
    const double gamma = r.spec.gamma.value_or(default_gamma(V));
    for (std::size_t b = 0; b < p.seeds.size(); b += D) {
      const SeedVector s = r.spec.link == LinkMode::LogSimplex ? init_dirichlet_flat(D, gamma, state.rng)
                                                               : init_sphere_uniform(D, state.rng);
      std::copy(s.theta.begin(), s.theta.end(), &p.seeds[b]);
    }
    if (r.spec.link == LinkMode::Spherical) {
      const SeedVector s = init_sphere_uniform(V, state.rng);
      std::copy(s.theta.begin(), s.theta.end(), &p.bias_seed[0]);
    }
    state.params.push_back(std::move(p));
  }
  return state;
}

LogPmfTensor encode(const NetworkSpec& spec, const Tensor& images) {
  if (images.rank() != 4 || images.dim(1) != spec.height || images.dim(2) != spec.width ||
      images.dim(3) != spec.channels) {
    throw DimensionError("images " + shape_str(images.shape()) + " do not match network input " +
                         std::to_string(spec.height) + "x" + std::to_string(spec.width) + "x" +
                         std::to_string(spec.channels));
  }
  return spec.encoding == InputEncoding::Binary ? encode_binary(images) : encode_channel_simplex(images);
}

Var forward_graph(const NetworkSpec& spec, std::span<const Var> params, Var input, ForwardTrace* trace) {
  const auto layers = resolve(spec);
  const Shape& is = input.shape();
  if (is.empty()) throw DimensionError("forward: scalar input");
  const std::size_t N = is[0];
  const ActivationShape& first = layers.front().in;
  if (shape_size(is) != N * first.height * first.width * first.groups * first.states) {
    throw DimensionError("forward: input " + shape_str(is) + " does not match network input");
  }
  Var cur = ad::reshape(input, {N, first.height, first.width, first.groups * first.states});
  Domain dom = Domain::Input;

  auto to_prob = [&] {
    if (dom == Domain::Input) {
      cur = ad::exp(cur);
      dom = Domain::ProbPmf;
    }
  };

  for (std::size_t i = 0; i < layers.size(); ++i) {
    const ResolvedLayer& r = layers[i];
    const LayerSpec& l = r.spec;
    switch (l.kind) {
      case LayerKind::KLConv:
      case LayerKind::DivgDense: {
        if (l.divergence == Divergence::I) to_prob();
        if (trace) {
          trace->layer_inputs.push_back(cur);
          trace->input_domains.push_back(l.divergence == Divergence::I ? Domain::ProbPmf : Domain::LogPmf);
        }
        if (2 * r.param_index + 1 >= params.size()) throw ContractError("forward: missing parameters");
        LinkedBank bank = link_bank(params[2 * r.param_index], params[2 * r.param_index + 1], l.link);
        if (l.kind == LayerKind::KLConv) {
          cur = klconv(cur, bank, r.in.states, l.divergence, l.alpha, {l.stride, l.pad});
        } else {
          const std::size_t K = r.in.height * r.in.width * r.in.groups * r.in.states;
          Var dense = divg_dense(ad::reshape(cur, {N, K}), bank, r.in.states, l.divergence, l.alpha);
          cur = ad::reshape(dense, {N, 1, 1, l.filters});
        }
        dom = Domain::Scores;
        break;
      }
      case LayerKind::LNorm:
        cur = ad::lnorm(cur);
        dom = Domain::LogPmf;
        break;
      case LayerKind::Softmax:
        if (i + 1 == layers.size()) {
          // log(softmax(x)) computed directly keeps the posterior exact.
          cur = ad::lnorm(cur);
          dom = Domain::LogPmf;
        } else {
          cur = ad::softmax(cur);
          dom = Domain::ProbPmf;
        }
        break;
      case LayerKind::LPool:
        cur = ad::pool_logmeanexp(cur, l.r, l.s, l.stride);
        dom = Domain::LogPmf;
        break;
      case LayerKind::AvgPool:
        to_prob();
        cur = ad::pool_mean(cur, l.r, l.s, l.stride);
        break;
      case LayerKind::Flatten:
        cur = ad::reshape(cur, {N, 1, 1, r.in.height * r.in.width * r.in.groups * r.in.states});
        break;
    }
  }
  if (dom == Domain::ProbPmf) cur = ad::log_floor(cur, kProbFloor);
  return ad::reshape(cur, {N, spec.classes});
}

namespace {

std::vector<Var> param_vars(Tape& tape, const TrainState& state, bool requires_grad) {
  std::vector<Var> vars;
  for (const LayerParams& p : state.params) {
    vars.push_back(tape.leaf(p.seeds, requires_grad));
    vars.push_back(tape.leaf(p.bias_seed, requires_grad));
  }
  return vars;
}

}  // namespace

Tensor forward(const TrainState& state, const LogPmfTensor& batch) {
  Tape tape;
  auto params = param_vars(tape, state, false);
  return forward_graph(state.spec, params, tape.constant(batch.values)).value();
}

double loss_nll(const Tensor& logpost, std::span<const int> labels) {
  Tape tape;
  return ad::nll(tape.constant(logpost), labels).value()[0];
}

StepGradients compute_gradients(const TrainState& state, const LogPmfTensor& batch, std::span<const int> labels) {
  Tape tape;
  auto params = param_vars(tape, state, true);
  Var logpost = forward_graph(state.spec, params, tape.constant(batch.values));
  Var loss = ad::nll(logpost, labels);
  Gradients g = tape.backward(loss);
  StepGradients out{loss.value()[0], logpost.value(), {}};
  for (std::size_t k = 0; k < state.params.size(); ++k) {
    out.grads.push_back({g[params[2 * k]], g[params[2 * k + 1]]});
  }
  return out;
}

void sgd_step(TrainState& state, const std::vector<LayerParams>& grads, double lr) {
  if (grads.size() != state.params.size()) throw ContractError("sgd_step: gradient count mismatch");
  std::size_t k = 0;
  for (std::size_t i = 0; i < state.spec.layers.size(); ++i) {
    if (!state.spec.layers[i].has_params()) continue;
    if (!grads[k].seeds.all_finite() || !grads[k].bias_seed.all_finite()) {
      throw NumericError("non-finite gradient in layer " + std::to_string(i) + " (" +
                         layer_name(state.spec.layers[i]) + ")");
    }
    ++k;
  }
  for (std::size_t p = 0; p < state.params.size(); ++p) {
    auto update = [lr](Tensor& theta, const Tensor& g) {
      if (theta.shape() != g.shape()) throw DimensionError("sgd_step: gradient shape mismatch");
      for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= lr * g[j];
    };
    update(state.params[p].seeds, grads[p].seeds);
    update(state.params[p].bias_seed, grads[p].bias_seed);
  }
}

namespace {

double mean_factor_entropy(const Tensor& probs, std::size_t D) {
  const std::size_t factors = probs.size() / D;
  if (factors == 0) return 0.0;
  double total = 0.0;
  for (std::size_t b = 0; b < probs.size(); b += D) total += entropy(probs.data().subspan(b, D));
  return std::min(total / static_cast<double>(factors), std::log(static_cast<double>(D)));
}

}  // namespace

EntropyReport measure_entropy(const TrainState& state, const LogPmfTensor& probe) {
  Tape tape;
  auto params = param_vars(tape, state, false);
  ForwardTrace trace;
  forward_graph(state.spec, params, tape.constant(probe.values), &trace);

  EntropyReport report;
  std::size_t k = 0;
  for (std::size_t i = 0; i < state.spec.layers.size(); ++i) {
    const LayerSpec& l = state.spec.layers[i];
    if (!l.has_params()) continue;
    const LayerParams& p = state.params[k];
    const std::size_t D = p.seeds.shape().back();
    Tensor probs(p.seeds.shape());
    for (std::size_t b = 0; b < probs.size(); b += D) {
      link_into(p.seeds.data().subspan(b, D), l.link, probs.data().subspan(b, D));
    }
    std::vector<double> bias(p.bias_seed.size());
    link_into(p.bias_seed.data(), l.link, bias);

    Tensor in = trace.layer_inputs[k].value();
    if (trace.input_domains[k] == Domain::LogPmf) {
      for (double& v : in.vec()) v = std::exp(v);
    }
    report.push_back({i, mean_factor_entropy(probs, D), entropy(bias), mean_factor_entropy(in, D)});
    ++k;
  }
  return report;
}

Accuracy accuracy(const Tensor& logpost, std::span<const int> labels) {
  if (logpost.rank() != 2 || logpost.dim(0) != labels.size()) {
    throw DimensionError("accuracy: posteriors " + shape_str(logpost.shape()) + " for " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t N = labels.size(), V = logpost.dim(1);
  if (N == 0) throw ContractError("accuracy of an empty dataset");
  std::size_t hit1 = 0, hit5 = 0;
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t y = static_cast<std::size_t>(labels[n]);
    if (y >= V) throw ContractError("label " + std::to_string(labels[n]) + " outside [0, " + std::to_string(V) + ")");
    const double* row = &logpost[n * V];
    std::size_t rank = 0;
    for (std::size_t c = 0; c < V; ++c)
      if (row[c] > row[y] || (row[c] == row[y] && c < y)) ++rank;
    hit1 += rank < 1;
    hit5 += rank < 5;
  }
  return {100.0 * static_cast<double>(hit1) / N, 100.0 * static_cast<double>(hit5) / N};
}

Accuracy evaluate(const TrainState& state, const LabeledImageSet& data, std::size_t batch_size) {
  if (data.size() == 0) throw ContractError("evaluate: empty dataset");
  Tensor all({data.size(), state.spec.classes});
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const LabeledImageSet chunk = data.slice(begin, begin + batch_size);
    const Tensor lp = forward(state, encode(state.spec, chunk.images));
    std::copy(lp.data().begin(), lp.data().end(), &all[begin * state.spec.classes]);
  }
  return accuracy(all, data.labels);
}

EpochStats train_epoch(TrainState& state, const LabeledImageSet& train, std::size_t batch_size) {
  if (train.size() == 0) throw ContractError("train_epoch: empty dataset");
  BatchIterator batches(train, batch_size, state.rng.next_u64());
  double loss_sum = 0.0;
  while (auto batch = batches.next()) {
    const StepGradients step = compute_gradients(state, encode(state.spec, batch->images), batch->labels);
    if (!std::isfinite(step.loss)) throw NumericError("non-finite loss at epoch " + std::to_string(state.epoch));
    sgd_step(state, step.grads, state.lr);
    loss_sum += step.loss * static_cast<double>(batch->labels.size());
  }
  ++state.epoch;
  return {loss_sum / static_cast<double>(train.size())};
}

}  // namespace fnn
