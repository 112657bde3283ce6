#include "fnn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include "fnn/errors.hpp"
#include "fnn/spec_text.hpp"

namespace fnn {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_uint(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "' needs a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError("'" + key + "' needs a number, got '" + v + "'");
  return out;
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  auto size_of = [](std::size_t& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = parse_uint<std::size_t>(k, v); };
  };
  auto path_of = [](std::filesystem::path& field) -> Setter {
    return [&field](const std::string&, const std::string& v) { field = v; };
  };
  DatasetConfig& d = cfg.dataset;
  const std::map<std::string, Setter> setters = {
      {"dataset.kind",
       [&](const std::string&, const std::string& v) {
         if (v == "synthetic") d.kind = DatasetKind::Synthetic;
         else if (v == "cifar10") d.kind = DatasetKind::Cifar10;
         else if (v == "cifar100") d.kind = DatasetKind::Cifar100;
         else if (v == "mnist") d.kind = DatasetKind::Mnist;
         else throw ConfigError("unknown dataset.kind '" + v + "'");
       }},
      {"dataset.path", path_of(d.path)},
      {"dataset.labels", path_of(d.labels)},
      {"dataset.test_path", path_of(d.test_path)},
      {"dataset.test_labels", path_of(d.test_labels)},
      {"dataset.limit", size_of(d.limit)},
      {"dataset.test_limit", size_of(d.test_limit)},
      {"dataset.classes", size_of(d.synth.classes)},
      {"dataset.per_class", size_of(d.synth.per_class)},
      {"dataset.test_per_class", size_of(d.test_per_class)},
      {"dataset.height", size_of(d.synth.height)},
      {"dataset.width", size_of(d.synth.width)},
      {"dataset.states", size_of(d.synth.states)},
      {"dataset.separation",
       [&](const std::string& k, const std::string& v) { d.synth.separation = parse_double(k, v); }},
      {"dataset.seed", [&](const std::string& k, const std::string& v) { d.seed = parse_uint<std::uint64_t>(k, v); }},
      {"model.layers", [&](const std::string&, const std::string& v) { cfg.layers = v; }},
      {"model.encoding",
       [&](const std::string&, const std::string& v) {
         if (v == "binary") cfg.encoding = InputEncoding::Binary;
         else if (v == "channel") cfg.encoding = InputEncoding::ChannelSimplex;
         else throw ConfigError("model.encoding must be binary or channel, got '" + v + "'");
       }},
      {"train.epochs", size_of(cfg.epochs)},
      {"train.batch", size_of(cfg.batch)},
      {"train.lr", [&](const std::string& k, const std::string& v) { cfg.lr = parse_double(k, v); }},
      {"train.seed", [&](const std::string& k, const std::string& v) { cfg.seed = parse_uint<std::uint64_t>(k, v); }},
      {"diag.out", path_of(cfg.diag_out)},
      {"diag.probe", size_of(cfg.probe)},
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + line + "'", lineno);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown key '" + key + "'", lineno);
    try {
      it->second(key, value);
      if (key == "model.layers") parse_layers(value);  // reject bad descriptors at their line
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), lineno);
    }
  }
  if (cfg.layers.empty()) throw ConfigError("model.layers is required");
  if (cfg.batch == 0) throw ConfigError("train.batch must be at least 1");
  if (cfg.probe == 0) throw ConfigError("diag.probe must be at least 1");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

namespace {

LabeledImageSet limited(LabeledImageSet set, std::size_t limit) {
  if (limit == 0 || limit >= set.size()) return set;
  return set.slice(0, limit);
}

}  // namespace

DataSplit load_data(const DatasetConfig& cfg) {
  DataSplit split;
  switch (cfg.kind) {
    case DatasetKind::Synthetic: {
      Rng rng(cfg.seed);
      SynthFsdParams p = cfg.synth;
      const std::size_t train_n = p.classes * p.per_class;
      p.per_class += cfg.test_per_class;
      LabeledImageSet all = synth_fsd(p, rng);
      split.train = all.slice(0, train_n);
      split.test = all.slice(train_n, all.size());
      break;
    }
    case DatasetKind::Cifar10:
    case DatasetKind::Cifar100: {
      auto read = cfg.kind == DatasetKind::Cifar10 ? read_cifar10 : read_cifar100;
      split.train = read(cfg.path);
      if (!cfg.test_path.empty()) split.test = read(cfg.test_path);
      break;
    }
    case DatasetKind::Mnist:
      split.train = read_mnist_idx(cfg.path, cfg.labels);
      if (!cfg.test_path.empty()) split.test = read_mnist_idx(cfg.test_path, cfg.test_labels);
      break;
  }
  split.train = limited(std::move(split.train), cfg.limit);
  if (split.test.images.rank() == 4) split.test = limited(std::move(split.test), cfg.test_limit);
  return split;
}

NetworkSpec network_spec(const RunConfig& cfg, const LabeledImageSet& train) {
  NetworkSpec spec;
  spec.layers = parse_layers(cfg.layers);
  spec.encoding = cfg.encoding;
  spec.height = train.height();
  spec.width = train.width();
  spec.channels = train.channels();
  spec.classes = train.class_count;
  return spec;
}

}  // namespace fnn
