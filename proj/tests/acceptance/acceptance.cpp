// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fnn/commands.hpp"
#include "fnn/config.hpp"
#include "fnn/data.hpp"
#include "fnn/gradcheck.hpp"
#include "fnn/layers.hpp"
#include "fnn/network.hpp"
#include "fnn/spec_text.hpp"
#include "oracles.hpp"

using namespace fnn;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool g_all_ok = true;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << detail << std::endl;
  g_all_ok = g_all_ok && ok;
}

// Independent link oracles.
oracle::Vec spherical_probs(const oracle::Vec& t) {
  double n = 0.0;
  for (double v : t) n += v * v;
  oracle::Vec p;
  for (double v : t) p.push_back(v * v / n);
  return p;
}

oracle::Vec linked(const oracle::Vec& seeds, std::size_t D, LinkMode mode) {
  oracle::Vec out;
  for (std::size_t i = 0; i < seeds.size(); i += D) {
    const oracle::Vec row(seeds.begin() + i, seeds.begin() + i + D);
    const oracle::Vec p = mode == LinkMode::Spherical ? spherical_probs(row) : oracle::softmax(row);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

oracle::Vec random_factors(std::size_t count, std::size_t D, std::mt19937_64& gen) {
  oracle::Vec out;
  for (std::size_t i = 0; i < count; ++i) {
    const oracle::Vec p = oracle::random_pmf(D, gen);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

oracle::Vec random_seeds(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> nd(0.0, 1.5);
  oracle::Vec s(n);
  for (double& v : s) v = nd(gen);
  return s;
}

// ---------------------------------------------------------------------------

void criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> ua(0.1, 3.0);
  const std::size_t Ds[] = {2, 3, 10};
  double worst = 0.0;
  std::size_t pairs = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t D = Ds[i % 3];
    const std::size_t G = 1 + static_cast<std::size_t>(gen() % 3);
    const std::size_t V = 1 + static_cast<std::size_t>(gen() % 4);
    const LinkMode mode = (i / 3) % 2 ? LinkMode::Spherical : LinkMode::LogSimplex;
    FilterBank bank;
    bank.seeds = Tensor({V, 1, 1, G, D}, random_seeds(V * G * D, gen));
    bank.bias_seed = Tensor::vector(random_seeds(V, gen));
    bank.mode = mode;
    bank.alpha = ua(gen);
    const oracle::Vec x = random_factors(G, D, gen);
    const Tensor got = divg_dense(LogPmfTensor{Tensor({1, 1, G, D}, oracle::log_of(x))}, bank);

    const oracle::Vec filt = linked(bank.seeds.vec(), D, mode);
    const oracle::Vec bias = linked(bank.bias_seed.vec(), V, mode);
    for (std::size_t v = 0; v < V; ++v) {
      double kld = 0.0;
      for (std::size_t g = 0; g < G; ++g) {
        const oracle::Vec m(filt.begin() + (v * G + g) * D, filt.begin() + (v * G + g + 1) * D);
        const oracle::Vec xg(x.begin() + g * D, x.begin() + (g + 1) * D);
        kld += oracle::kld(m, xg);
      }
      const double expect = -bank.alpha * kld + std::log(bias[v]);
      worst = std::max(worst, std::abs(got[v] - expect));
      ++pairs;
    }
  }
  const double secs = seconds_since(t0);
  report(1, "kld-linearity", worst < 1e-9 && secs < 5.0,
         std::to_string(pairs) + " filter/input pairs, max|d|=" + fmt("%.3e", worst) + ", " + fmt("%.2f", secs) + " s");
}

void criterion2() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(202);
  std::uniform_real_distribution<double> ua(0.1, 2.0);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(gen() % (hi - lo + 1)); };
  double worst = 0.0;
  int instances = 0;
  for (int i = 0; i < 600; ++i) {
    oracle::KlConvProblem pb{};
    pb.H = pick(1, 8);
    pb.W = pick(1, 8);
    pb.G = pick(1, 2);
    pb.D = pick(2, 4);
    pb.V = pick(1, 4);
    pb.R = pick(1, std::min<std::size_t>(3, pb.H));
    pb.S = pick(1, std::min<std::size_t>(3, pb.W));
    pb.stride = pick(1, 2);
    pb.same = i % 2 == 0;
    pb.m_divergence = (i / 2) % 2 == 0;
    pb.alpha = ua(gen);
    pb.x = random_factors(pb.H * pb.W * pb.G, pb.D, gen);
    const LinkMode mode = (i / 4) % 2 ? LinkMode::Spherical : LinkMode::LogSimplex;
    FilterBank bank;
    bank.seeds = Tensor({pb.V, pb.R, pb.S, pb.G, pb.D}, random_seeds(pb.V * pb.R * pb.S * pb.G * pb.D, gen));
    bank.bias_seed = Tensor::vector(random_seeds(pb.V, gen));
    bank.mode = mode;
    bank.alpha = pb.alpha;
    bank.divergence = pb.m_divergence ? Divergence::M : Divergence::I;
    pb.filters = linked(bank.seeds.vec(), pb.D, mode);
    pb.bias = linked(bank.bias_seed.vec(), pb.V, mode);

    std::size_t Ho = 0, Wo = 0;
    const oracle::Vec ref = oracle::klconv_patches(pb, Ho, Wo);
    const Padding pad = pb.same ? Padding::Same : Padding::Valid;
    const Tensor got = pb.m_divergence
                           ? klconv_m(LogPmfTensor{Tensor({pb.H, pb.W, pb.G, pb.D}, oracle::log_of(pb.x))}, bank, pb.stride, pad)
                           : klconv_i(Tensor({pb.H, pb.W, pb.G, pb.D}, pb.x), bank, pb.stride, pad);
    if (got.shape() != Shape{Ho, Wo, pb.V}) {
      worst = INFINITY;
      break;
    }
    for (std::size_t k = 0; k < ref.size(); ++k) worst = std::max(worst, std::abs(got[k] - ref[k]));
    ++instances;
  }
  const double secs = seconds_since(t0);
  report(2, "klconv-patch-oracle", worst < 1e-9 && secs < 10.0,
         std::to_string(instances) + " instances (M and I, both links), max|d|=" + fmt("%.3e", worst) + ", " +
             fmt("%.2f", secs) + " s");
}

void criterion3() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t entries = 0;
  for (const auto& [name, spec] : gradcheck_suite()) {
    const GradCheckReport r = gradcheck_network(spec, 1);
    worst = std::max(worst, r.max_rel_error());
    entries += r.entries.size();
  }
  const double secs = seconds_since(t0);
  report(3, "gradient-suite", worst < kGradCheckTolerance && secs < 60.0,
         std::to_string(entries) + " parameter tensors, max_rel_err=" + fmt("%.3e", worst) + ", " + fmt("%.2f", secs) +
             " s");
}

void criterion4() {
  std::mt19937_64 gen(404);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(gen() % (hi - lo + 1)); };
  double worst_norm = 0.0, worst_bound = 0.0;
  std::size_t rows = 0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t H = pick(1, 6), W = pick(1, 6), G = pick(1, 3), D = pick(2, 6);
    const double scale = std::pow(10.0, static_cast<double>(pick(0, 3)) - 1.0);  // 0.1 .. 100
    Tensor raw({H, W, G, D});
    for (double& v : raw.vec()) v = scale * nd(gen);

    const Tensor ln = lnorm(raw);
    for (std::size_t i = 0; i < ln.size(); i += D) {
      double s = 0.0;
      for (std::size_t k = 0; k < D; ++k) s += std::exp(ln[i + k]);
      worst_norm = std::max(worst_norm, std::abs(s - 1.0));
      ++rows;
    }

    const std::size_t r = pick(1, H), s = pick(1, W), stride = pick(1, 2);
    const LogPmfTensor pooled = lpool(LogPmfTensor{ln}, r, s, stride);
    const std::size_t Ho = pooled.height(), Wo = pooled.width(), C = G * D;
    for (std::size_t i = 0; i < pooled.values.size(); i += D) {
      double sum = 0.0;
      for (std::size_t k = 0; k < D; ++k) sum += std::exp(pooled.values[i + k]);
      worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
      ++rows;
    }
    const double log_n = std::log(static_cast<double>(r * s));
    for (std::size_t oh = 0; oh < Ho; ++oh)
      for (std::size_t ow = 0; ow < Wo; ++ow)
        for (std::size_t c = 0; c < C; ++c) {
          double mx = -INFINITY;
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < s; ++j) mx = std::max(mx, ln[((oh * stride + i) * W + ow * stride + j) * C + c]);
          const double y = pooled.values[(oh * Wo + ow) * C + c];
          // Positive values measure how far outside [max - ln n, max] the output lies.
          worst_bound = std::max({worst_bound, y - mx, (mx - log_n) - y});
        }
  }
  report(4, "normalization-closure", worst_norm < 1e-7 && worst_bound <= 0.0,
         std::to_string(rows) + " normalized rows from 10000 tensors, max|sum exp - 1|=" + fmt("%.3e", worst_norm) +
             ", max bound violation=" + fmt("%.3e", std::max(worst_bound, 0.0)));
}

// ---------------------------------------------------------------------------

NetworkSpec desk_like_spec(const char* layers, std::size_t classes) {
  NetworkSpec s;
  s.layers = parse_layers(layers);
  s.height = s.width = 8;
  s.channels = 1;
  s.classes = classes;
  return s;
}

std::vector<std::size_t> argmax_rows(const Tensor& lp) {
  std::vector<std::size_t> out;
  const std::size_t V = lp.dim(1);
  for (std::size_t n = 0; n < lp.dim(0); ++n) {
    std::size_t best = 0;
    for (std::size_t v = 1; v < V; ++v)
      if (lp[n * V + v] > lp[n * V + best]) best = v;
    out.push_back(best);
  }
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void criterion5() {
  Rng data_rng(505);
  const LabeledImageSet data = synth_fsd({3, 40, 8, 8, 2, 0.5}, data_rng);
  const char* kLog = "klconv v=6 r=3 s=3; lnorm; lpool r=2 s=2; klconv v=4 r=2 s=2 mode=m; lnorm; flatten; dense v=3; lnorm";
  const char* kSph =
      "klconv v=6 r=3 s=3 link=spherical; lnorm; lpool r=2 s=2; klconv v=4 r=2 s=2 link=spherical; lnorm; flatten;"
      "dense v=3 link=spherical; lnorm";

  // (a) per-row constant shifts of log-simplex seeds.
  const NetworkSpec log_spec = desk_like_spec(kLog, 3);
  TrainState ls = build(log_spec, 51);
  const LogPmfTensor x = encode(log_spec, data.images);
  const auto base_log = argmax_rows(forward(ls, x));
  std::mt19937_64 gen(55);
  std::uniform_real_distribution<double> shift(-20.0, 20.0);
  for (LayerParams& p : ls.params) {
    const std::size_t D = p.seeds.dim(p.seeds.rank() - 1);
    for (std::size_t i = 0; i < p.seeds.size(); i += D) {
      const double c = shift(gen);
      for (std::size_t k = 0; k < D; ++k) p.seeds[i + k] += c;
    }
    const double c = shift(gen);
    for (double& v : p.bias_seed.vec()) v += c;
  }
  const bool shift_ok = argmax_rows(forward(ls, x)) == base_log;

  // (b) spherical seeds scaled by -3.7.
  const NetworkSpec sph_spec = desk_like_spec(kSph, 3);
  TrainState ss = build(sph_spec, 52);
  const auto base_sph = argmax_rows(forward(ss, x));
  TrainState scaled = ss;
  for (LayerParams& p : scaled.params) {
    for (double& v : p.seeds.vec()) v *= -3.7;
    for (double& v : p.bias_seed.vec()) v *= -3.7;
  }
  const bool scale_ok = argmax_rows(forward(scaled, x)) == base_sph;

  // (c) orthogonality and (d) norm growth over 100 SGD steps.
  double worst_cos = 0.0;
  bool growing = true, nonzero = true;
  auto total_norm2 = [](const TrainState& s) {
    double n = 0.0;
    for (const LayerParams& p : s.params) n += dot(p.seeds, p.seeds) + dot(p.bias_seed, p.bias_seed);
    return n;
  };
  double prev = total_norm2(ss);
  const double start = std::sqrt(prev);
  // Labels independent of the images keep the loss, and so every step's
  // lr^2 |g|^2 norm increase, far above the rounding floor of |t|^2.
  const LabeledImageSet noise = synth_fsd({3, 40, 8, 8, 2, 0.0}, data_rng);
  double worst_pythagoras = 0.0;
  BatchIterator batches(noise, 16, 57);
  for (int step = 0; step < 100; ++step) {
    auto b = batches.next();
    if (!b) {
      batches = BatchIterator(noise, 16, 58 + static_cast<std::uint64_t>(step));
      b = batches.next();
    }
    const StepGradients g = compute_gradients(ss, encode(sph_spec, b->images), b->labels);
    double gnorm2 = 0.0;
    for (std::size_t k = 0; k < ss.params.size(); ++k) {
      const std::pair<const Tensor*, const Tensor*> parts[] = {{&g.grads[k].seeds, &ss.params[k].seeds},
                                                               {&g.grads[k].bias_seed, &ss.params[k].bias_seed}};
      for (const auto& [gt, th] : parts) {
        const double gg = dot(*gt, *gt), tt = dot(*th, *th);
        gnorm2 += gg;
        if (gg > 0.0) worst_cos = std::max(worst_cos, std::abs(dot(*gt, *th)) / std::sqrt(gg * tt));
      }
    }
    nonzero = nonzero && gnorm2 > 0.0;
    sgd_step(ss, g.grads, 1.0);
    const double now = total_norm2(ss);
    growing = growing && now > prev;
    // Orthogonal steps: |t - g|^2 = |t|^2 + |g|^2.
    if (gnorm2 > 0.0) worst_pythagoras = std::max(worst_pythagoras, std::abs((now - prev) - gnorm2) / gnorm2);
    prev = now;
  }
  report(5, "parameterization-invariances", shift_ok && scale_ok && worst_cos < 1e-8 && growing && nonzero && worst_pythagoras < 1e-6,
         std::string("log-simplex shift argmax ") + (shift_ok ? "kept" : "changed") + ", spherical x(-3.7) argmax " +
             (scale_ok ? "kept" : "changed") + ", max|g.t|/(|g||t|)=" + fmt("%.3e", worst_cos) + ", |t| " +
             fmt("%.6f", start) + " -> " + fmt("%.6f", std::sqrt(prev)) + (growing ? " strictly increasing" : " NOT increasing") +
             " over 100 steps, max rel. deviation of the increase from |g|^2 " + fmt("%.1e", worst_pythagoras));
}

// ---------------------------------------------------------------------------

struct CliRun {
  int code;
  std::string out, err;
  double seconds;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fnn");
  std::ostringstream out, err;
  const auto t0 = Clock::now();
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str(), seconds_since(t0)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

const char* kDeskLayers = "klconv v=8 r=3 s=3; lnorm; lpool r=2 s=2; dense v=2; lnorm";

std::string desk_config() {
  return std::string("dataset.kind = synthetic\n"
                     "dataset.classes = 2\n"
                     "dataset.per_class = 500\n"
                     "dataset.test_per_class = 200\n"
                     "dataset.height = 8\n"
                     "dataset.width = 8\n"
                     "dataset.separation = 0.8\n"
                     "dataset.seed = 7\n"
                     "model.layers = ") +
         kDeskLayers +
         "\n"
         "train.epochs = 200\n"
         "train.batch = 64\n"
         "train.lr = 1\n"
         "train.seed = 3\n"
         "diag.probe = 256\n";
}

constexpr std::size_t kDeskEpochs = 200;

void criterion6(const fs::path& work, const CliRun& run) {
  const auto metrics = read_csv(work / "desk_a" / "metrics.csv");
  std::size_t reached = 0;
  std::string last;
  for (const auto& row : metrics) {
    if (row.size() != 5) break;
    const double train = std::stod(row[2]), test = std::stod(row[3]);
    if (!reached && train >= 99.0 && test >= 95.0) reached = std::stoul(row[0]);
    last = "train " + row[2] + "%, test " + row[3] + "%";
  }
  const bool synth_ok = run.code == 0 && metrics.size() == kDeskEpochs && reached > 0 && reached <= kDeskEpochs &&
                        run.seconds < 300.0;
  std::string detail = run.code != 0 ? "train exited " + std::to_string(run.code) + ": " + run.err
                                     : (reached ? "reached >=99% train / >=95% test at epoch " + std::to_string(reached)
                                                : std::string("never reached >=99% train / >=95% test")) +
                                           ", final " + last + ", " + fmt("%.1f", run.seconds) + " s for " +
                                           std::to_string(kDeskEpochs) + " epochs";

  bool cifar_ok = true;
  const char* cifar_dir = std::getenv("FNN_CIFAR10_DIR");
  if (!cifar_dir || !*cifar_dir) {
    detail += "; CIFAR-10 subset skipped (FNN_CIFAR10_DIR not set)";
  } else {
    const fs::path dir(cifar_dir);
    std::ofstream(work / "cifar.cfg", std::ios::binary)
        << "dataset.kind = cifar10\n"
        << "dataset.path = " << (dir / "data_batch_1.bin").string() << "\n"
        << "dataset.test_path = " << (dir / "test_batch.bin").string() << "\n"
        << "dataset.limit = 2000\n"
        << "dataset.test_limit = 2000\n"
        << "model.layers = klconv v=16 r=3 s=3; lnorm; lpool r=2 s=2; klconv v=16 r=3 s=3; lnorm; lpool r=2 s=2;"
           " klconv v=16 r=3 s=3; lnorm; lpool r=2 s=2; dense v=10; lnorm\n"
        << "train.epochs = 30\ntrain.batch = 32\ntrain.lr = 1\ntrain.seed = 1\n";
    const CliRun c = cli({"train", "--config", (work / "cifar.cfg").string(), "--out", (work / "cifar").string()});
    double best = 0.0;
    if (c.code == 0)
      for (const auto& row : read_csv(work / "cifar" / "metrics.csv"))
        if (row.size() == 5 && !row[3].empty()) best = std::max(best, std::stod(row[3]));
    cifar_ok = c.code == 0 && best > 30.0 && c.seconds < 1800.0;
    detail += "; CIFAR-10 2000-image subset best test top-1 " + fmt("%.2f", best) + "% in 30 epochs, " +
              fmt("%.0f", c.seconds) + " s" + (c.code ? " (exit " + std::to_string(c.code) + ": " + c.err + ")" : "");
  }
  report(6, "desk-scale-learning", synth_ok && cifar_ok, detail);
}

void criterion7(const fs::path& work) {
  const auto rows = read_csv(work / "desk_a" / "entropy.csv");
  // Input states D and filter count V per parameterized layer of the desk net.
  const auto resolved = resolve(desk_like_spec(kDeskLayers, 2));
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> dims;
  for (std::size_t i = 0; i < resolved.size(); ++i)
    if (resolved[i].spec.has_params())
      dims[i] = {resolved[i].seed_shape.back(), resolved[i].seed_shape.front()};

  std::map<std::size_t, std::size_t> per_epoch;
  bool in_range = true;
  for (const auto& row : rows) {
    if (row.size() != 5) {
      in_range = false;
      continue;
    }
    const std::size_t epoch = std::stoul(row[0]), layer = std::stoul(row[1]);
    ++per_epoch[epoch];
    const auto it = dims.find(layer);
    if (it == dims.end()) {
      in_range = false;
      continue;
    }
    const double lnD = std::log(static_cast<double>(it->second.first));
    const double lnV = std::log(static_cast<double>(it->second.second));
    const double hf = std::stod(row[2]), hb = std::stod(row[3]), hi = std::stod(row[4]);
    in_range = in_range && hf >= 0.0 && hf <= lnD && hi >= 0.0 && hi <= lnD && hb >= 0.0 && hb <= lnV;
  }
  bool every_epoch = per_epoch.size() == kDeskEpochs + 1;
  for (std::size_t e = 0; e <= kDeskEpochs; ++e) every_epoch = every_epoch && per_epoch[e] == dims.size();

  // gamma = ln 8 versus gamma = 1 on an 8-filter layer, same seeds.
  Rng probe_rng(77);
  const LabeledImageSet probe_set = synth_fsd({2, 32, 8, 8, 2, 0.8}, probe_rng);
  const std::string ln8 = fmt("%.17g", std::log(8.0));
  const NetworkSpec g8 = desk_like_spec(("klconv v=8 r=3 s=3 gamma=" + ln8 + "; lnorm; lpool r=2 s=2; dense v=2; lnorm").c_str(), 2);
  const NetworkSpec g1 = desk_like_spec("klconv v=8 r=3 s=3 gamma=1; lnorm; lpool r=2 s=2; dense v=2; lnorm", 2);
  const LogPmfTensor probe = encode(g8, probe_set.images);
  bool lower = true;
  double sum8 = 0.0, sum1 = 0.0;
  const int kSeeds = 10;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const double h8 = measure_entropy(build(g8, seed), probe)[0].filter_entropy;
    const double h1 = measure_entropy(build(g1, seed), probe)[0].filter_entropy;
    lower = lower && h8 < h1;
    sum8 += h8;
    sum1 += h1;
  }
  report(7, "entropy-diagnostics", every_epoch && in_range && lower,
         std::to_string(per_epoch.size()) + " epochs logged (0.." + std::to_string(kDeskEpochs) + ")" +
             (every_epoch ? "" : " INCOMPLETE") + ", entropies " + (in_range ? "within" : "OUTSIDE") +
             " [0, ln D], mean filter entropy gamma=ln8 " + fmt("%.4f", sum8 / kSeeds) + " vs gamma=1 " +
             fmt("%.4f", sum1 / kSeeds) + (lower ? " (lower for all " : " (NOT lower for all ") +
             std::to_string(kSeeds) + " seeds)");
}

void criterion8(const fs::path& work, const CliRun& first) {
  const CliRun second = cli({"train", "--config", (work / "desk.cfg").string(), "--out", (work / "desk_b").string()});
  bool same = first.code == 0 && second.code == 0;
  std::string detail;
  for (const char* f : {"metrics.csv", "entropy.csv", "checkpoint.fsd"}) {
    const std::string a = slurp(work / "desk_a" / f), b = slurp(work / "desk_b" / f);
    const bool eq = !a.empty() && a == b;
    same = same && eq;
    detail += std::string(detail.empty() ? "" : ", ") + f + (eq ? " identical" : " DIFFER") + " (" +
              std::to_string(a.size()) + " bytes)";
  }
  report(8, "determinism", same, "two train invocations: " + detail);
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "fnn_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();

  std::ofstream(work / "desk.cfg", std::ios::binary) << desk_config();
  const CliRun desk = cli({"train", "--config", (work / "desk.cfg").string(), "--out", (work / "desk_a").string()});
  criterion6(work, desk);
  criterion7(work);
  criterion8(work, desk);

  fs::remove_all(work);
  std::cout << (g_all_ok ? "ALL CRITERIA PASS" : "SOME CRITERIA FAILED") << std::endl;
  return g_all_ok ? 0 : 1;
}
