#include "fnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fnn/spec_text.hpp"

namespace fnn {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradCheckScaleFloor});
  return std::abs(analytic - numeric) / scale;
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

GradCheckReport check_gradients(const Objective& objective, const std::vector<Tensor>& inputs,
                                const std::vector<std::string>& names, double h) {
  auto evaluate = [&](const std::vector<Tensor>& values) {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& t : values) leaves.push_back(tape.constant(t));
    return objective(tape, leaves).value()[0];
  };

  Tape tape;
  std::vector<Var> leaves;
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t, true));
  const Gradients grads = tape.backward(objective(tape, leaves));

  GradCheckReport report;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    GradCheckEntry entry{k < names.size() ? names[k] : "input " + std::to_string(k), 0, 0.0};
    const Tensor& analytic = grads[leaves[k]];
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k][i];
      probe[k][i] = x0 + h;
      const double up = evaluate(probe);
      probe[k][i] = x0 - h;
      const double down = evaluate(probe);
      probe[k][i] = x0;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[i], numeric);
      entry.max_rel_error = std::isnan(err) ? INFINITY : std::max(entry.max_rel_error, err);
      ++entry.checked;
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

GradCheckReport gradcheck_network(const NetworkSpec& spec, std::uint64_t seed, std::size_t batch) {
  TrainState state = build(spec, seed);
  Rng rng(seed ^ 0x5eedULL);
  Tensor images({batch, spec.height, spec.width, spec.channels});
  for (double& v : images.vec()) v = spec.encoding == InputEncoding::Binary ? rng.uniform() : 4.0 * rng.uniform() - 2.0;
  std::vector<int> labels(batch);
  for (int& l : labels) l = static_cast<int>(rng.below(spec.classes));
  const Tensor input = encode(spec, images).values;

  std::vector<Tensor> params;
  std::vector<std::string> names;
  std::size_t k = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (!spec.layers[i].has_params()) continue;
    const std::string name = "layer " + std::to_string(i) + " (" + layer_name(spec.layers[i]) + ")";
    params.push_back(state.params[k].seeds);
    names.push_back(name + " filters");
    params.push_back(state.params[k].bias_seed);
    names.push_back(name + " bias");
    ++k;
  }
  Objective loss = [&](Tape& tape, std::span<const Var> p) {
    return ad::nll(forward_graph(spec, p, tape.constant(input)), labels);
  };
  return check_gradients(loss, params, names);
}

std::vector<std::pair<std::string, NetworkSpec>> gradcheck_suite() {
  auto net = [](InputEncoding enc, std::size_t side, std::size_t channels, std::size_t classes, const char* layers) {
    NetworkSpec s;
    s.encoding = enc;
    s.height = s.width = side;
    s.channels = channels;
    s.classes = classes;
    s.layers = parse_layers(layers);
    return s;
  };
  constexpr auto B = InputEncoding::Binary;
  constexpr auto C = InputEncoding::ChannelSimplex;
  return {
      {"m-logsimplex", net(B, 5, 1, 3,
                           "klconv v=3 r=3 s=3 link=logsimplex; lnorm; lpool r=2 s=2 stride=1;"
                           "klconv v=3 r=2 s=2 stride=2 pad=valid; lnorm; flatten; dense v=3; lnorm")},
      {"m-spherical", net(B, 5, 1, 3,
                          "klconv v=3 r=3 s=3 link=spherical alpha=0.7; lnorm; lpool r=2 s=2 stride=1;"
                          "klconv v=3 r=2 s=2 stride=2 pad=valid link=spherical; lnorm; flatten;"
                          "dense v=3 link=spherical; lnorm")},
      {"i-logsimplex", net(B, 5, 1, 3,
                           "klconv v=3 r=3 s=3 mode=i; softmax; avgpool r=2 s=2 stride=1;"
                           "dense v=3 mode=i; softmax")},
      {"i-spherical", net(B, 5, 1, 3,
                          "klconv v=3 r=3 s=3 mode=i link=spherical alpha=1.3; softmax; avgpool r=2 s=2 stride=2;"
                          "flatten; dense v=3 mode=i link=spherical; softmax")},
      {"channel-mixed", net(C, 4, 3, 2,
                            "klconv v=4 r=2 s=2 stride=2 pad=valid link=logsimplex; lnorm;"
                            "dense v=2 link=spherical; lnorm")},
  };
}

}  // namespace fnn
