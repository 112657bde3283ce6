#include "fnn/spec_text.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "fnn/errors.hpp"

namespace fnn {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || out == 0) {
    throw ConfigError("'" + std::string(key) + "' needs a positive integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ConfigError("'" + std::string(key) + "' needs a number, got '" + s + "'");
  }
  return out;
}

std::string real_str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

LayerSpec parse_layer(std::string_view desc) {
  std::vector<std::string_view> tokens;
  for (auto t : split(desc, ' '))
    if (!trim(t).empty()) tokens.push_back(trim(t));
  if (tokens.empty()) throw ConfigError("empty layer descriptor");

  static const std::map<std::string_view, LayerKind> kinds = {
      {"klconv", LayerKind::KLConv},   {"lnorm", LayerKind::LNorm},     {"softmax", LayerKind::Softmax},
      {"lpool", LayerKind::LPool},     {"avgpool", LayerKind::AvgPool}, {"flatten", LayerKind::Flatten},
      {"dense", LayerKind::DivgDense},
  };
  auto it = kinds.find(tokens[0]);
  if (it == kinds.end()) throw ConfigError("unknown layer kind '" + std::string(tokens[0]) + "'");
  LayerSpec l;
  l.kind = it->second;
  const bool kl = l.kind == LayerKind::KLConv || l.kind == LayerKind::DivgDense;
  const bool pool = l.kind == LayerKind::LPool || l.kind == LayerKind::AvgPool;
  bool stride_set = false;

  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("layer option '" + std::string(tokens[i]) + "' is not key=value");
    }
    const auto key = tokens[i].substr(0, eq);
    const auto val = tokens[i].substr(eq + 1);
    auto bad = [&] {
      return ConfigError("layer '" + std::string(tokens[0]) + "' does not accept '" + std::string(key) + "'");
    };
    if (key == "v" && kl) {
      l.filters = parse_count(key, val);
    } else if ((key == "r" || key == "s") && (l.kind == LayerKind::KLConv || pool)) {
      (key == "r" ? l.r : l.s) = parse_count(key, val);
    } else if (key == "stride" && (l.kind == LayerKind::KLConv || pool)) {
      l.stride = parse_count(key, val);
      stride_set = true;
    } else if (key == "pad" && l.kind == LayerKind::KLConv) {
      if (val == "same") l.pad = Padding::Same;
      else if (val == "valid") l.pad = Padding::Valid;
      else throw ConfigError("pad must be same or valid, got '" + std::string(val) + "'");
    } else if (key == "mode" && kl) {
      if (val == "m") l.divergence = Divergence::M;
      else if (val == "i") l.divergence = Divergence::I;
      else throw ConfigError("mode must be m or i, got '" + std::string(val) + "'");
    } else if (key == "link" && kl) {
      if (val == "logsimplex") l.link = LinkMode::LogSimplex;
      else if (val == "spherical") l.link = LinkMode::Spherical;
      else throw ConfigError("link must be logsimplex or spherical, got '" + std::string(val) + "'");
    } else if (key == "gamma" && kl) {
      l.gamma = parse_real(key, val);
    } else if (key == "alpha" && kl) {
      l.alpha = parse_real(key, val);
    } else {
      throw bad();
    }
  }
  if (kl && l.filters == 0) throw ConfigError("layer '" + std::string(tokens[0]) + "' needs v=<filters>");
  if (pool) {
    if (!stride_set) l.stride = l.r;
  }
  return l;
}

}  // namespace

std::vector<LayerSpec> parse_layers(std::string_view text) {
  std::vector<LayerSpec> out;
  for (auto part : split(text, ';')) {
    if (trim(part).empty()) continue;
    out.push_back(parse_layer(part));
  }
  if (out.empty()) throw ConfigError("no layers given");
  return out;
}

std::string format_layers(const std::vector<LayerSpec>& layers) {
  std::string out;
  for (const LayerSpec& l : layers) {
    if (!out.empty()) out += "; ";
    const std::string div = l.divergence == Divergence::M ? "m" : "i";
    const std::string tail = " mode=" + div + " link=" + std::string(to_string(l.link)) +
                             (l.gamma ? " gamma=" + real_str(*l.gamma) : "") + " alpha=" + real_str(l.alpha);
    switch (l.kind) {
      case LayerKind::KLConv:
        out += "klconv v=" + std::to_string(l.filters) + " r=" + std::to_string(l.r) + " s=" + std::to_string(l.s) +
               " stride=" + std::to_string(l.stride) + " pad=" + (l.pad == Padding::Same ? "same" : "valid") + tail;
        break;
      case LayerKind::DivgDense: out += "dense v=" + std::to_string(l.filters) + tail; break;
      case LayerKind::LNorm: out += "lnorm"; break;
      case LayerKind::Softmax: out += "softmax"; break;
      case LayerKind::Flatten: out += "flatten"; break;
      case LayerKind::LPool:
      case LayerKind::AvgPool:
        out += std::string(l.kind == LayerKind::LPool ? "lpool" : "avgpool") + " r=" + std::to_string(l.r) +
               " s=" + std::to_string(l.s) + " stride=" + std::to_string(l.stride);
        break;
    }
  }
  return out;
}

std::string serialize_spec(const NetworkSpec& spec) {
  std::ostringstream os;
  os << "encoding=" << (spec.encoding == InputEncoding::Binary ? "binary" : "channel") << '\n'
     << "input=" << spec.height << 'x' << spec.width << 'x' << spec.channels << '\n'
     << "classes=" << spec.classes << '\n'
     << "layers=" << format_layers(spec.layers) << '\n';
  return os.str();
}

NetworkSpec parse_spec(std::string_view text) try {
  NetworkSpec spec;
  bool have_layers = false;
  for (auto line : split(text, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("malformed spec line '" + std::string(line) + "'");
    const auto key = line.substr(0, eq);
    const auto val = line.substr(eq + 1);
    if (key == "encoding") {
      if (val == "binary") spec.encoding = InputEncoding::Binary;
      else if (val == "channel") spec.encoding = InputEncoding::ChannelSimplex;
      else throw FormatError("unknown encoding '" + std::string(val) + "'");
    } else if (key == "input") {
      const auto dims = split(val, 'x');
      if (dims.size() != 3) throw FormatError("malformed input shape '" + std::string(val) + "'");
      spec.height = parse_count("input", dims[0]);
      spec.width = parse_count("input", dims[1]);
      spec.channels = parse_count("input", dims[2]);
    } else if (key == "classes") {
      spec.classes = parse_count("classes", val);
    } else if (key == "layers") {
      spec.layers = parse_layers(val);
      have_layers = true;
    } else {
      throw FormatError("unknown spec key '" + std::string(key) + "'");
    }
  }
  if (!have_layers) throw FormatError("spec text has no layers");
  return spec;
} catch (const ConfigError& e) {
  throw FormatError(std::string("stored network spec: ") + e.what());
}

}  // namespace fnn
