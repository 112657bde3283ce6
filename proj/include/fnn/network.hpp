#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fnn/autodiff.hpp"
#include "fnn/data.hpp"
#include "fnn/layers.hpp"
#include "fnn/rng.hpp"

namespace fnn {

enum class LayerKind { KLConv, LNorm, Softmax, LPool, AvgPool, Flatten, DivgDense };

struct LayerSpec {
  LayerKind kind = LayerKind::LNorm;
  std::size_t filters = 0;  // V, for KLConv and DivgDense
  std::size_t r = 1;        // window rows (KLConv kernel, pooling window)
  std::size_t s = 1;        // window columns
  std::size_t stride = 1;
  Padding pad = Padding::Same;
  Divergence divergence = Divergence::M;
  LinkMode link = LinkMode::LogSimplex;
  std::optional<double> gamma;  // defaults to max(1, ln V)
  double alpha = 1.0;

  bool has_params() const { return kind == LayerKind::KLConv || kind == LayerKind::DivgDense; }
};

enum class InputEncoding { Binary, ChannelSimplex };

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  InputEncoding encoding = InputEncoding::Binary;
  std::size_t height = 0, width = 0, channels = 0;
  std::size_t classes = 0;
};

/// How activations between layers are represented.
enum class Domain { Input, LogPmf, ProbPmf, Scores };

struct ActivationShape {
  std::size_t height = 0, width = 0, groups = 0, states = 0;
  Domain domain = Domain::Input;
};

/// Shape-checked view of a NetworkSpec.
struct ResolvedLayer {
  LayerSpec spec;
  ActivationShape in, out;
  std::size_t param_index = 0;  // valid when spec.has_params()
  Shape seed_shape;             // V×R×S×G×D for parameterized layers
};

/// Validates the layer chain. Throws SpecError naming the offending pair.
std::vector<ResolvedLayer> resolve(const NetworkSpec& spec);

std::string layer_name(const LayerSpec& layer);

struct LayerParams {
  Tensor seeds;      // V×R×S×G×D
  Tensor bias_seed;  // V
};

/// Per parameterized layer entropy summary in nats.
struct LayerEntropy {
  std::size_t layer = 0;        // index into NetworkSpec::layers
  double filter_entropy = 0.0;  // mean over factors of H(F[v,r,s,g,:])
  double bias_entropy = 0.0;    // H(linked bias)
  double input_entropy = 0.0;   // mean per-factor entropy of the layer input
};

struct EntropyRecord {
  std::size_t epoch = 0;
  LayerEntropy entry;
};

using EntropyReport = std::vector<LayerEntropy>;

struct TrainState {
  NetworkSpec spec;
  std::vector<LayerParams> params;  // one per parameterized layer, in order
  std::size_t epoch = 0;
  Rng rng;
  double lr = 1.0;
  std::vector<EntropyRecord> diagnostics;
};

/// Initializes every filter by its link's rule and every bias to the uniform
/// distribution (zero seeds for log-simplex, a unit-sphere draw for spherical).
TrainState build(const NetworkSpec& spec, std::uint64_t seed);

/// Encodes a batch of images per the spec's input encoding.
LogPmfTensor encode(const NetworkSpec& spec, const Tensor& images);

/// Intermediate values captured by forward_graph.
struct ForwardTrace {
  std::vector<Var> layer_inputs;  // input of each parameterized layer, N×H×W×(G·D)
  std::vector<Domain> input_domains;
};

/// Records the network on `tape`. `params` holds (seeds, bias_seed) per
/// parameterized layer; `input` is the encoded batch. Returns N×V log-posteriors.
Var forward_graph(const NetworkSpec& spec, std::span<const Var> params, Var input, ForwardTrace* trace = nullptr);

/// Class log-posteriors N×V for an encoded batch.
Tensor forward(const TrainState& state, const LogPmfTensor& batch);

/// -(1/N) sum_n logpost[n, label_n].
double loss_nll(const Tensor& logpost, std::span<const int> labels);

struct StepGradients {
  double loss = 0.0;
  Tensor logpost;
  std::vector<LayerParams> grads;
};

StepGradients compute_gradients(const TrainState& state, const LogPmfTensor& batch, std::span<const int> labels);

/// theta <- theta - lr * g for every seed. Throws NumericError naming the layer
/// when a gradient is not finite.
void sgd_step(TrainState& state, const std::vector<LayerParams>& grads, double lr);

EntropyReport measure_entropy(const TrainState& state, const LogPmfTensor& probe);

struct Accuracy {
  double top1 = 0.0;  // percent
  double top5 = 0.0;  // percent
};

/// Ranks classes by (-score, index); the lowest index wins ties.
Accuracy accuracy(const Tensor& logpost, std::span<const int> labels);
Accuracy evaluate(const TrainState& state, const LabeledImageSet& data, std::size_t batch_size = 256);

struct EpochStats {
  double train_loss = 0.0;  // mean over samples of the per-batch NLL
};

/// One pass of SGD over `train` in a shuffled order drawn from state.rng.
EpochStats train_epoch(TrainState& state, const LabeledImageSet& train, std::size_t batch_size);

}  // namespace fnn
