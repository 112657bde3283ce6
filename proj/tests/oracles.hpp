#pragma once

// Reference implementations used to check the library. They deliberately share
// no code with it: plain loops over std::vector, textbook formulas.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline double entropy(const Vec& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

/// D(p || q) = sum p log(p / q), terms with p = 0 dropped.
inline double kld(const Vec& p, const Vec& q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) d += p[i] * (std::log(p[i]) - std::log(q[i]));
  return d;
}

inline Vec softmax(const Vec& t) {
  double m = t[0];
  for (double v : t) m = std::max(m, v);
  Vec out(t.size());
  double z = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) z += out[i] = std::exp(t[i] - m);
  for (double& v : out) v /= z;
  return out;
}

inline Vec log_of(const Vec& p) {
  Vec out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::log(p[i]);
  return out;
}

/// Random point in the interior of the D-simplex.
inline Vec random_pmf(std::size_t D, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Vec p(D);
  double z = 0.0;
  for (double& v : p) z += v = u(gen);
  for (double& v : p) v /= z;
  return p;
}

/// Explicit patch loop for a factorized KL convolution.
///   x       H×W×G×D probabilities
///   filters V×R×S×G×D probabilities
///   bias    V probabilities
/// Out-of-image positions hold the uniform pmf. Returns Ho×Wo×V.
struct KlConvProblem {
  std::size_t H, W, G, D, V, R, S, stride = 1;
  bool same = true;
  bool m_divergence = true;  // D(F || x) when true, D(x || F) otherwise
  double alpha = 1.0;
  Vec x, filters, bias;
};

inline Vec klconv_patches(const KlConvProblem& pb, std::size_t& Ho, std::size_t& Wo) {
  const std::size_t ph = pb.same ? (pb.R - 1) / 2 : 0, pw = pb.same ? (pb.S - 1) / 2 : 0;
  const std::size_t Hp = pb.H + 2 * ph, Wp = pb.W + 2 * pw;
  Ho = (Hp - pb.R) / pb.stride + 1;
  Wo = (Wp - pb.S) / pb.stride + 1;
  Vec out(Ho * Wo * pb.V);
  for (std::size_t oh = 0; oh < Ho; ++oh)
    for (std::size_t ow = 0; ow < Wo; ++ow)
      for (std::size_t v = 0; v < pb.V; ++v) {
        double div = 0.0;
        for (std::size_t r = 0; r < pb.R; ++r)
          for (std::size_t s = 0; s < pb.S; ++s)
            for (std::size_t g = 0; g < pb.G; ++g) {
              const long ih = static_cast<long>(oh * pb.stride + r) - static_cast<long>(ph);
              const long iw = static_cast<long>(ow * pb.stride + s) - static_cast<long>(pw);
              Vec patch(pb.D, 1.0 / static_cast<double>(pb.D));
              if (ih >= 0 && iw >= 0 && ih < static_cast<long>(pb.H) && iw < static_cast<long>(pb.W)) {
                for (std::size_t d = 0; d < pb.D; ++d)
                  patch[d] = pb.x[((static_cast<std::size_t>(ih) * pb.W + static_cast<std::size_t>(iw)) * pb.G + g) * pb.D + d];
              }
              Vec f(pb.D);
              for (std::size_t d = 0; d < pb.D; ++d) f[d] = pb.filters[(((v * pb.R + r) * pb.S + s) * pb.G + g) * pb.D + d];
              div += pb.m_divergence ? kld(f, patch) : kld(patch, f);
            }
        out[(oh * Wo + ow) * pb.V + v] = -pb.alpha * div + std::log(pb.bias[v]);
      }
  return out;
}

/// Cross-correlation through an explicit im2col matrix (zero padding).
/// x H×W×C, f V×R×S×C; returns Ho×Wo×V.
inline Vec conv_im2col(const Vec& x, std::size_t H, std::size_t W, std::size_t C, const Vec& f, std::size_t V,
                       std::size_t R, std::size_t S, std::size_t stride, bool same, std::size_t& Ho, std::size_t& Wo) {
  const std::size_t ph = same ? (R - 1) / 2 : 0, pw = same ? (S - 1) / 2 : 0;
  Ho = (H + 2 * ph - R) / stride + 1;
  Wo = (W + 2 * pw - S) / stride + 1;
  const std::size_t K = R * S * C;
  std::vector<Vec> cols(Ho * Wo, Vec(K, 0.0));
  for (std::size_t oh = 0; oh < Ho; ++oh)
    for (std::size_t ow = 0; ow < Wo; ++ow)
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t s = 0; s < S; ++s)
          for (std::size_t c = 0; c < C; ++c) {
            const long ih = static_cast<long>(oh * stride + r) - static_cast<long>(ph);
            const long iw = static_cast<long>(ow * stride + s) - static_cast<long>(pw);
            if (ih < 0 || iw < 0 || ih >= static_cast<long>(H) || iw >= static_cast<long>(W)) continue;
            cols[oh * Wo + ow][(r * S + s) * C + c] = x[(static_cast<std::size_t>(ih) * W + static_cast<std::size_t>(iw)) * C + c];
          }
  Vec out(Ho * Wo * V, 0.0);
  for (std::size_t p = 0; p < Ho * Wo; ++p)
    for (std::size_t v = 0; v < V; ++v)
      for (std::size_t k = 0; k < K; ++k) out[p * V + v] += cols[p][k] * f[v * K + k];
  return out;
}

/// Central differences of a scalar function.
inline Vec numeric_gradient(const std::function<double(const Vec&)>& fn, Vec x, double h = 1e-6) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = fn(x);
    x[i] = x0 - h;
    const double down = fn(x);
    x[i] = x0;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

}  // namespace oracle
