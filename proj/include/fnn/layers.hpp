#pragma once

#include <cstddef>

#include "fnn/autodiff.hpp"
#include "fnn/simplex.hpp"
#include "fnn/tensor.hpp"

namespace fnn {

/// Orientation of the divergence a KL layer computes.
enum class Divergence {
  M,  ///< D(filter || input); input carried as log-probabilities
  I,  ///< D(input || filter); input carried as probabilities
};

/// Per-pixel factorized pmfs stored as logs, shape H×W×G×D or N×H×W×G×D.
struct LogPmfTensor {
  Tensor values;

  bool batched() const { return values.rank() == 5; }
  std::size_t batch() const { return batched() ? values.dim(0) : 1; }
  std::size_t height() const { return values.dim(values.rank() - 4); }
  std::size_t width() const { return values.dim(values.rank() - 3); }
  std::size_t groups() const { return values.dim(values.rank() - 2); }
  std::size_t states() const { return values.dim(values.rank() - 1); }

  /// Every factor satisfies sum(exp) = 1 within `tol`.
  bool is_normalized(double tol = 1e-7) const;
  /// Rank-4 view N×H×W×(G·D) consumed by the convolutional layers.
  Tensor flat_channels() const;
};

/// V factorized filter distributions plus a bias distribution over V states,
/// stored as seeds behind a link function.
struct FilterBank {
  Tensor seeds;      ///< V×R×S×G×D
  Tensor bias_seed;  ///< V
  LinkMode mode = LinkMode::LogSimplex;
  double alpha = 1.0;
  Divergence divergence = Divergence::M;

  std::size_t filters() const { return seeds.dim(0); }
};

/// Clamp applied to pixel intensities before the binary encoding.
inline constexpr double kPixelClamp = 1e-6;

/// Each pixel-channel value p in [0, 1] becomes the binary pmf (1-p, p), clamped
/// to [1e-6, 1-1e-6]. Image H×W×C or N×H×W×C; result has G = C, D = 2.
LogPmfTensor encode_binary(const Tensor& image);
/// Channel values are unnormalized log-probabilities over C states; G = 1, D = C.
LogPmfTensor encode_channel_simplex(const Tensor& image);

// ---------------------------------------------------------------------------
// Differentiable layer pieces.

/// Link applied to every length-D row of the last axis.
Var link(Var seeds, LinkMode mode);

/// A FilterBank mapped through its link, with the derived quantities every KL
/// layer consumes.
struct LinkedBank {
  Var probs;      ///< V×R×S×G×D filter probabilities
  Var log_probs;  ///< log(max(probs, 1e-12))
  Var entropy;    ///< V, total factorized entropy per filter
  Var log_bias;   ///< V, log of the linked bias distribution
};

LinkedBank link_bank(Var seeds, Var bias_seed, LinkMode mode);

struct ConvGeometry {
  std::size_t stride = 1;
  Padding pad = Padding::Same;
};

/// alpha * (cross-term + entropy-term) + log bias over every kernel position.
/// x is N×H×W×(G·D): log-probabilities for M, probabilities for I. Padding
/// uses the uniform pmf over D states.
Var klconv(Var x, const LinkedBank& bank, std::size_t states, Divergence div, double alpha, ConvGeometry geom);

/// Dense Divg: x is N×K (K = total groups × D), filters flatten to V×K.
Var divg_dense(Var x, const LinkedBank& bank, std::size_t states, Divergence div, double alpha);

// ---------------------------------------------------------------------------
// Value-level conveniences running the differentiable path once.

/// Output V (or N×V) for a bank of V filters covering all of x.
Tensor divg_dense(const LogPmfTensor& x, const FilterBank& bank);
/// Output H'×W'×V (or N×H'×W'×V).
Tensor klconv_m(const LogPmfTensor& x, const FilterBank& bank, std::size_t stride, Padding pad);
/// `probs` holds probabilities shaped like a LogPmfTensor.
Tensor klconv_i(const Tensor& probs, const FilterBank& bank, std::size_t stride, Padding pad);
/// x - logsumexp(x) along the last axis.
Tensor lnorm(const Tensor& x);
/// exp(lnorm(x)) along the last axis.
Tensor softmax_nl(const Tensor& x);
/// Log of the uniform spatial mixture over each r×s window.
LogPmfTensor lpool(const LogPmfTensor& x, std::size_t r, std::size_t s, std::size_t stride);
/// Mean over each r×s window of an H×W×C or N×H×W×C probability tensor.
Tensor avgpool_prob(const Tensor& x, std::size_t r, std::size_t s, std::size_t stride);

}  // namespace fnn
