#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "fnn/data.hpp"
#include "fnn/network.hpp"

namespace fnn {

enum class DatasetKind { Synthetic, Cifar10, Cifar100, Mnist };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::Synthetic;
  std::filesystem::path path;         // training records (MNIST: images)
  std::filesystem::path labels;       // MNIST training labels
  std::filesystem::path test_path;    // optional held-out records
  std::filesystem::path test_labels;  // MNIST held-out labels
  std::size_t limit = 0;              // keep the first `limit` training samples; 0 keeps all
  std::size_t test_limit = 0;
  SynthFsdParams synth;
  std::size_t test_per_class = 100;
  std::uint64_t seed = 1;
};

/// Flat key=value run configuration. See README for the grammar.
struct RunConfig {
  DatasetConfig dataset;
  std::string layers;
  InputEncoding encoding = InputEncoding::Binary;
  std::size_t epochs = 10;
  std::size_t batch = 64;
  double lr = 1.0;
  std::uint64_t seed = 0;
  std::filesystem::path diag_out = ".";
  std::size_t probe = 256;
};

/// Throws ConfigError carrying the 1-based line number of the offending line.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

struct DataSplit {
  LabeledImageSet train;
  LabeledImageSet test;  // may be empty
};

/// Reads or generates the configured data. Dataset errors propagate as
/// FormatError / ContractError.
DataSplit load_data(const DatasetConfig& cfg);

/// NetworkSpec for the configured layer chain over the given data.
NetworkSpec network_spec(const RunConfig& cfg, const LabeledImageSet& train);

}  // namespace fnn
