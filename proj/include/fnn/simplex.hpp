#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "fnn/rng.hpp"

namespace fnn {

/// How unconstrained seed parameters map onto the probability simplex.
enum class LinkMode {
  LogSimplex,  ///< softmax(theta)
  Spherical,   ///< theta^2 / |theta|^2
};

std::string_view to_string(LinkMode mode);

/// Floor applied to probabilities before taking logs.
inline constexpr double kProbFloor = 1e-12;

/// Point of the probability simplex: entries >= 0 summing to 1 within 1e-9.
class ProbVector {
 public:
  /// Throws ContractError if the entries are not a distribution.
  explicit ProbVector(std::vector<double> p);

  std::span<const double> values() const& noexcept { return p_; }
  std::span<const double> values() const&& = delete;  // would dangle
  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }

 private:
  std::vector<double> p_;
};

/// Point of the logarithmic simplex: sum(exp(l)) = 1 within 1e-9.
class LogProbVector {
 public:
  explicit LogProbVector(std::vector<double> l);
  static LogProbVector log_of(const ProbVector& p);

  std::span<const double> values() const& noexcept { return l_; }
  std::span<const double> values() const&& = delete;
  std::size_t size() const noexcept { return l_.size(); }
  double operator[](std::size_t i) const { return l_[i]; }

 private:
  std::vector<double> l_;
};

/// Unconstrained parameters behind a link function.
struct SeedVector {
  std::vector<double> theta;
  LinkMode mode = LinkMode::LogSimplex;
};

// Span kernels shared with the differentiable layer ops. `out` has the size of `theta`.
void link_into(std::span<const double> theta, LinkMode mode, std::span<double> out);
/// Adds upstream^T * d(link)/d(theta) to `grad`. `probs` is link(theta).
void link_vjp_accumulate(std::span<const double> theta, std::span<const double> probs, LinkMode mode,
                         std::span<const double> upstream, std::span<double> grad);

ProbVector link_logsimplex(std::span<const double> theta);
/// Throws DegenerateSeedError for the zero vector.
ProbVector link_spherical(std::span<const double> theta);
ProbVector link(const SeedVector& seed);

/// Cotangent of the seed given a cotangent of the linked distribution.
std::vector<double> link_jacobian_vjp(const SeedVector& seed, std::span<const double> upstream);

/// Shannon entropy in nats, 0 log 0 = 0, clamped to its bounds [0, ln n].
double entropy(std::span<const double> p);
inline double entropy(const ProbVector& p) { return entropy(p.values()); }

/// D(q || exp(x)).
double kld_m(const ProbVector& q, const LogProbVector& x);
/// D(x || exp(q)).
double kld_i(const ProbVector& x, const LogProbVector& q);

/// Mixing entropy H(sum_v p_v pi_v) - sum_v p_v H(pi_v).
double jsd(std::span<const ProbVector> filters, const ProbVector& p);

/// theta = gamma * log(u), u ~ Dirichlet(1, ..., 1).
SeedVector init_dirichlet_flat(std::size_t dim, double gamma, Rng& rng);
/// theta uniform on the unit sphere S^{dim-1}.
SeedVector init_sphere_uniform(std::size_t dim, Rng& rng);

/// Initial seed scaling for a layer with `filters` filters: max(1, ln filters).
double default_gamma(std::size_t filters);

}  // namespace fnn
