#include "fnn/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fnn/autodiff.hpp"
#include "fnn/errors.hpp"

namespace fnn {

std::string_view to_string(LinkMode mode) {
  return mode == LinkMode::LogSimplex ? "logsimplex" : "spherical";
}

ProbVector::ProbVector(std::vector<double> p) : p_(std::move(p)) {
  double total = 0.0;
  for (double v : p_) {
    if (!(v >= 0.0)) throw ContractError("probability entry " + std::to_string(v) + " is negative or NaN");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("probabilities sum to " + std::to_string(total));
}

LogProbVector::LogProbVector(std::vector<double> l) : l_(std::move(l)) {
  double total = 0.0;
  for (double v : l_) {
    if (std::isnan(v) || v > 1e-9) throw ContractError("log-probability entry " + std::to_string(v) + " above 0");
    total += std::exp(v);
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("exp(log-probabilities) sum to " + std::to_string(total));
}

LogProbVector LogProbVector::log_of(const ProbVector& p) {
  std::vector<double> l(p.size());
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = std::log(p[i]);
  return LogProbVector(std::move(l));
}

void link_into(std::span<const double> theta, LinkMode mode, std::span<double> out) {
  if (mode == LinkMode::LogSimplex) {
    const double lse = logsumexp(theta.data(), theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) out[i] = std::exp(theta[i] - lse);
    return;
  }
  double norm2 = 0.0;
  for (double t : theta) norm2 += t * t;
  if (!(norm2 > 0.0)) throw DegenerateSeedError("spherical link of a zero seed vector");
  for (std::size_t i = 0; i < theta.size(); ++i) out[i] = theta[i] * theta[i] / norm2;
}

void link_vjp_accumulate(std::span<const double> theta, std::span<const double> probs, LinkMode mode,
                         std::span<const double> upstream, std::span<double> grad) {
  double mean = 0.0;  // E_pi[upstream]
  for (std::size_t i = 0; i < probs.size(); ++i) mean += upstream[i] * probs[i];
  if (mode == LinkMode::LogSimplex) {
    for (std::size_t j = 0; j < probs.size(); ++j) grad[j] += probs[j] * (upstream[j] - mean);
    return;
  }
  double norm2 = 0.0;
  for (double t : theta) norm2 += t * t;
  if (!(norm2 > 0.0)) throw DegenerateSeedError("spherical link of a zero seed vector");
  for (std::size_t j = 0; j < probs.size(); ++j) grad[j] += 2.0 * theta[j] / norm2 * (upstream[j] - mean);
}

ProbVector link_logsimplex(std::span<const double> theta) {
  std::vector<double> p(theta.size());
  link_into(theta, LinkMode::LogSimplex, p);
  return ProbVector(std::move(p));
}

ProbVector link_spherical(std::span<const double> theta) {
  std::vector<double> p(theta.size());
  link_into(theta, LinkMode::Spherical, p);
  return ProbVector(std::move(p));
}

ProbVector link(const SeedVector& seed) {
  return seed.mode == LinkMode::LogSimplex ? link_logsimplex(seed.theta) : link_spherical(seed.theta);
}

std::vector<double> link_jacobian_vjp(const SeedVector& seed, std::span<const double> upstream) {
  if (upstream.size() != seed.theta.size()) {
    throw DimensionError("link vjp: upstream length " + std::to_string(upstream.size()) + " vs seed length " +
                         std::to_string(seed.theta.size()));
  }
  std::vector<double> probs(seed.theta.size());
  link_into(seed.theta, seed.mode, probs);
  std::vector<double> grad(seed.theta.size(), 0.0);
  link_vjp_accumulate(seed.theta, probs, seed.mode, upstream, grad);
  return grad;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  // Rounding in the sum can step a few ulps past the exact bounds [0, ln n].
  return p.empty() ? 0.0 : std::clamp(h, 0.0, std::log(static_cast<double>(p.size())));
}

namespace {

// -sum w_i l_i, skipping zero weights so log(0) entries contribute nothing.
double cross_entropy(std::span<const double> w, std::span<const double> l) {
  if (w.size() != l.size()) {
    throw DimensionError("divergence of vectors of length " + std::to_string(w.size()) + " and " +
                         std::to_string(l.size()));
  }
  double ce = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] > 0.0) ce -= w[i] * l[i];
  return ce;
}

}  // namespace

double kld_m(const ProbVector& q, const LogProbVector& x) {
  return std::max(0.0, cross_entropy(q.values(), x.values()) - entropy(q));
}

double kld_i(const ProbVector& x, const LogProbVector& q) {
  return std::max(0.0, cross_entropy(x.values(), q.values()) - entropy(x));
}

double jsd(std::span<const ProbVector> filters, const ProbVector& p) {
  if (filters.size() != p.size()) {
    throw DimensionError("jsd: " + std::to_string(filters.size()) + " filters but " + std::to_string(p.size()) +
                         " mixture weights");
  }
  if (filters.empty()) return 0.0;
  const std::size_t dim = filters.front().size();
  std::vector<double> mixture(dim, 0.0);
  double mean_entropy = 0.0;
  for (std::size_t v = 0; v < filters.size(); ++v) {
    if (filters[v].size() != dim) throw DimensionError("jsd: filters of unequal dimension");
    for (std::size_t d = 0; d < dim; ++d) mixture[d] += p[v] * filters[v][d];
    mean_entropy += p[v] * entropy(filters[v]);
  }
  return entropy(mixture) - mean_entropy;
}

SeedVector init_dirichlet_flat(std::size_t dim, double gamma, Rng& rng) {
  if (dim < 2) throw ContractError("dirichlet init needs dim >= 2");
  if (!(gamma >= 1.0)) throw ContractError("dirichlet init needs gamma >= 1");
  std::vector<double> e(dim);
  double total = 0.0;
  for (double& v : e) {
    v = rng.exponential();
    total += v;
  }
  SeedVector seed{std::vector<double>(dim), LinkMode::LogSimplex};
  for (std::size_t i = 0; i < dim; ++i) seed.theta[i] = gamma * std::log(std::max(e[i] / total, 1e-300));
  return seed;
}

SeedVector init_sphere_uniform(std::size_t dim, Rng& rng) {
  if (dim < 2) throw ContractError("sphere init needs dim >= 2");
  SeedVector seed{std::vector<double>(dim), LinkMode::Spherical};
  double norm2 = 0.0;
  while (norm2 == 0.0) {
    norm2 = 0.0;
    for (double& v : seed.theta) {
      v = rng.normal();
      norm2 += v * v;
    }
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : seed.theta) v *= inv;
  return seed;
}

double default_gamma(std::size_t filters) {
  return std::max(1.0, std::log(static_cast<double>(filters)));
}

}  // namespace fnn
