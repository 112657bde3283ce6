#include "fnn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "fnn/errors.hpp"
#include "fnn/spec_text.hpp"

namespace fnn {
namespace {

constexpr char kMagic[4] = {'F', 'S', 'D', '1'};

template <typename U>
void put_le(std::ostream& out, U v) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(U));
}

void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

template <typename U>
U get_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in, const char* what) { return std::bit_cast<double>(get_le<std::uint64_t>(in, what)); }

void put_array(std::ostream& out, const Tensor& t) {
  put_le<std::uint64_t>(out, t.size());
  for (double v : t.data()) put_f64(out, v);
}

Tensor get_array(std::istream& in, const Shape& shape) {
  const auto count = get_le<std::uint64_t>(in, "array length");
  if (count != shape_size(shape)) {
    throw FormatError("checkpoint array of " + std::to_string(count) + " values does not fit shape " +
                      shape_str(shape));
  }
  Tensor t(shape);
  for (double& v : t.vec()) v = get_f64(in, "seed values");
  return t;
}

}  // namespace

void save_checkpoint(const TrainState& state, std::ostream& out) {
  out.write(kMagic, 4);
  const std::string spec = serialize_spec(state.spec);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec.size()));
  out.write(spec.data(), static_cast<std::streamsize>(spec.size()));
  put_le<std::uint64_t>(out, state.epoch);
  for (std::uint64_t w : state.rng.state()) put_le(out, w);
  put_f64(out, state.lr);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(2 * state.params.size()));
  for (const LayerParams& p : state.params) {
    put_array(out, p.seeds);
    put_array(out, p.bias_seed);
  }
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  save_checkpoint(state, out);
}

TrainState load_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw FormatError("checkpoint truncated while reading magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("checkpoint version mismatch: expected magic FSD1, found '" + std::string(magic, 4) + "'");
  }
  const auto spec_len = get_le<std::uint32_t>(in, "spec length");
  std::string spec_text(spec_len, '\0');
  if (!in.read(spec_text.data(), spec_len)) throw FormatError("checkpoint truncated while reading spec");

  TrainState state;
  state.spec = parse_spec(spec_text);
  state.epoch = get_le<std::uint64_t>(in, "epoch");
  std::array<std::uint64_t, 4> rng_state{};
  for (auto& w : rng_state) w = get_le<std::uint64_t>(in, "rng state");
  state.rng.set_state(rng_state);
  state.lr = get_f64(in, "learning rate");

  const auto layers = resolve(state.spec);
  std::size_t expected = 0;
  for (const auto& r : layers) expected += r.spec.has_params() ? 2 : 0;
  const auto arrays = get_le<std::uint32_t>(in, "array count");
  if (arrays != expected) {
    throw FormatError("checkpoint holds " + std::to_string(arrays) + " seed arrays, spec needs " +
                      std::to_string(expected));
  }
  for (const auto& r : layers) {
    if (!r.spec.has_params()) continue;
    LayerParams p;
    p.seeds = get_array(in, r.seed_shape);
    p.bias_seed = get_array(in, {r.spec.filters});
    state.params.push_back(std::move(p));
  }
  return state;
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace fnn
