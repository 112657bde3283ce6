#include "fnn/commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <system_error>

#include "fnn/checkpoint.hpp"
#include "fnn/config.hpp"
#include "fnn/errors.hpp"
#include "fnn/gradcheck.hpp"
#include "fnn/spec_text.hpp"

namespace fnn {
namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string real(double v) { return fmt("%.17g", v); }

// Runs `body`, translating exceptions into exit codes.
int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SpecError& e) {
    err << "network spec error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const IngestionError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

RunConfig require_config(const CommandOptions& opts) {
  if (!opts.config) throw ConfigError("--config is required");
  RunConfig cfg = load_config(*opts.config);
  if (opts.seed) cfg.seed = *opts.seed;
  return cfg;
}

TrainState require_checkpoint(const CommandOptions& opts) {
  if (!opts.checkpoint) throw ConfigError("--checkpoint is required");
  return load_checkpoint(*opts.checkpoint);
}

std::ofstream open_csv(const std::filesystem::path& path, const char* header) {
  // Binary mode keeps LF line endings on every platform.
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::filesystem::filesystem_error("cannot write", path, std::make_error_code(std::errc::io_error));
  f << header << '\n';
  return f;
}

// Samples used for entropy probes: the first `probe` training images.
LogPmfTensor probe_batch(const TrainState& state, const LabeledImageSet& set, std::size_t probe) {
  return encode(state.spec, set.slice(0, std::min(probe, set.size())).images);
}

void write_entropy_rows(std::ostream& csv, std::size_t epoch, const EntropyReport& report) {
  for (const LayerEntropy& e : report) {
    csv << epoch << ',' << e.layer << ',' << real(e.filter_entropy) << ',' << real(e.bias_entropy) << ','
        << real(e.input_entropy) << '\n';
  }
}

// The held-out split if there is one, otherwise the training split.
const LabeledImageSet& eval_split(const DataSplit& split) {
  return split.test.size() > 0 ? split.test : split.train;
}

}  // namespace

int cmd_train(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = require_config(opts);
    const DataSplit data = load_data(cfg.dataset);
    if (data.train.size() == 0) throw ConfigError("training set is empty");
    const NetworkSpec spec = network_spec(cfg, data.train);

    TrainState state = build(spec, cfg.seed);
    state.lr = cfg.lr;

    const std::filesystem::path dir = opts.out.value_or(cfg.diag_out);
    std::filesystem::create_directories(dir);
    std::ofstream metrics = open_csv(dir / "metrics.csv", kMetricsHeader);
    std::ofstream entropy = open_csv(dir / "entropy.csv", kEntropyHeader);
    const LogPmfTensor probe = probe_batch(state, data.train, cfg.probe);
    const bool has_test = data.test.size() > 0;

    write_entropy_rows(entropy, 0, measure_entropy(state, probe));
    entropy.flush();
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      const EpochStats stats = train_epoch(state, data.train, cfg.batch);
      const Accuracy train_acc = evaluate(state, data.train);
      metrics << state.epoch << ',' << real(stats.train_loss) << ',' << fmt("%.4f", train_acc.top1);
      if (has_test) {
        const Accuracy test_acc = evaluate(state, data.test);
        metrics << ',' << fmt("%.4f", test_acc.top1) << ',' << fmt("%.4f", test_acc.top5);
      } else {
        metrics << ",,";
      }
      metrics << '\n';
      metrics.flush();

      const EntropyReport report = measure_entropy(state, probe);
      for (const LayerEntropy& le : report) state.diagnostics.push_back({state.epoch, le});
      write_entropy_rows(entropy, state.epoch, report);
      entropy.flush();

      out << "epoch " << state.epoch << " loss=" << fmt("%.6f", stats.train_loss)
          << " train_top1=" << fmt("%.2f", train_acc.top1) << '\n';
    }
    save_checkpoint(state, dir / "checkpoint.fsd");
    out << "wrote " << (dir / "checkpoint.fsd").string() << '\n';
    return kExitOk;
  });
}

int cmd_eval(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const TrainState state = require_checkpoint(opts);
    const RunConfig cfg = require_config(opts);
    const DataSplit data = load_data(cfg.dataset);
    const LabeledImageSet& set = eval_split(data);
    if (set.size() == 0) throw ConfigError("evaluation dataset is empty");
    const Accuracy acc = evaluate(state, set);
    out << "top1=" << fmt("%.2f", acc.top1) << " top5=" << fmt("%.2f", acc.top5) << '\n';
    return kExitOk;
  });
}

int cmd_gradcheck(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<std::pair<std::string, NetworkSpec>> nets;
    std::uint64_t seed = opts.seed.value_or(1);
    if (opts.config) {
      const RunConfig cfg = require_config(opts);
      DatasetConfig dc = cfg.dataset;
      if (dc.kind == DatasetKind::Synthetic) {
        dc.synth.per_class = 1;  // only the extents matter
        dc.test_per_class = 0;
      }
      const DataSplit data = load_data(dc);
      nets.emplace_back("config", network_spec(cfg, data.train));
      seed = cfg.seed;
    } else {
      nets = gradcheck_suite();
    }

    double worst = 0.0;
    for (const auto& [name, spec] : nets) {
      const GradCheckReport report = gradcheck_network(spec, seed, 2);
      for (const GradCheckEntry& e : report.entries) {
        out << name << ": " << e.name << " checked=" << e.checked << " max_rel_err=" << fmt("%.3e", e.max_rel_error)
            << '\n';
      }
      worst = std::max(worst, report.max_rel_error());
    }
    const bool ok = worst < kGradCheckTolerance;
    out << "max_rel_err=" << fmt("%.3e", worst) << ' ' << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? kExitOk : kExitNumeric;
  });
}

int cmd_entropy(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const TrainState state = require_checkpoint(opts);
    const RunConfig cfg = require_config(opts);
    const DataSplit data = load_data(cfg.dataset);
    if (data.train.size() == 0) throw ConfigError("probe dataset is empty");
    const EntropyReport report = measure_entropy(state, probe_batch(state, data.train, cfg.probe));
    if (opts.out) {
      std::filesystem::create_directories(*opts.out);
      std::ofstream csv = open_csv(*opts.out / "entropy_report.csv", kEntropyHeader);
      write_entropy_rows(csv, state.epoch, report);
    } else {
      out << kEntropyHeader << '\n';
      write_entropy_rows(out, state.epoch, report);
    }
    return kExitOk;
  });
}

int cmd_selftest(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::uint64_t seed = opts.seed.value_or(1);
    bool all_ok = true;
    auto line = [&](const std::string& name, bool ok, const std::string& detail) {
      out << (ok ? "PASS " : "FAIL ") << name << ' ' << detail << '\n';
      all_ok = all_ok && ok;
    };

    double worst = 0.0;
    for (const auto& [name, spec] : gradcheck_suite()) worst = std::max(worst, gradcheck_network(spec, seed).max_rel_error());
    line("gradcheck", worst < kGradCheckTolerance, "max_rel_err=" + fmt("%.3e", worst));

    Rng rng(seed);
    const LabeledImageSet train = synth_fsd({2, 50, 6, 6, 2, 1.0}, rng);
    NetworkSpec spec;
    spec.layers = parse_layers("klconv v=4 r=3 s=3; lnorm; lpool r=2 s=2; dense v=2; lnorm");
    spec.height = spec.width = 6;
    spec.channels = 1;
    spec.classes = 2;
    TrainState state = build(spec, seed);
    for (int e = 0; e < 10; ++e) train_epoch(state, train, 16);
    const Accuracy acc = evaluate(state, train);
    line("synthetic-fit", acc.top1 == 100.0, "train_top1=" + fmt("%.2f", acc.top1));

    return all_ok ? kExitOk : kExitNumeric;
  });
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finite neural networks: train, evaluate and inspect KL-divergence classifiers"};
  app.name("fnn");
  app.require_subcommand(1);
  CommandOptions opts;
  std::string config, checkpoint, outdir;
  std::uint64_t seed = 0;

  using Command = int (*)(const CommandOptions&, std::ostream&, std::ostream&);
  struct Sub {
    const char* name;
    const char* help;
    Command fn;
  };
  const Sub subs[] = {
      {"train", "train a network from a config", cmd_train},
      {"eval", "report top-1/top-5 accuracy of a checkpoint", cmd_eval},
      {"gradcheck", "compare analytic and finite-difference gradients", cmd_gradcheck},
      {"entropy", "report filter, bias and input entropies of a checkpoint", cmd_entropy},
      {"selftest", "run built-in gradient and learning checks", cmd_selftest},
  };
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config, "run configuration file");
    sub->add_option("--checkpoint", checkpoint, "checkpoint file");
    sub->add_option("--out", outdir, "output directory");
    sub->add_option("--seed", seed, "seed, overrides train.seed");
  }

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << "run with --help for usage\n";
    return kExitConfig;
  }

  for (const Sub& s : subs) {
    CLI::App* sub = app.get_subcommand(s.name);
    if (!sub->parsed()) continue;
    if (sub->count("--config")) opts.config = config;
    if (sub->count("--checkpoint")) opts.checkpoint = checkpoint;
    if (sub->count("--out")) opts.out = outdir;
    if (sub->count("--seed")) opts.seed = seed;
    return s.fn(opts, out, err);
  }
  return kExitConfig;
}

}  // namespace fnn
