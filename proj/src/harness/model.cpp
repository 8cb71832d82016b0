#include "ibp/harness/model.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

namespace ibp::harness {

namespace {

std::size_t parse_count(const std::string& field, std::string_view value) {
  std::size_t n = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
  if (ec != std::errc() || ptr != value.data() + value.size() || n == 0)
    throw std::invalid_argument("architecture field '" + field + "': expected a positive integer");
  return n;
}

}  // namespace

std::size_t ArchSpec::class_count() const {
  if (layers.empty() || layers.back().kind != nn::LayerKind::Linear)
    throw std::invalid_argument("architecture must end with a linear layer");
  return layers.back().out;
}

std::string ArchSpec::to_string() const {
  std::ostringstream s;
  if (owns_embedding())
    s << "vocab=" << vocab << " embed=" << embed;
  else
    s << "input=" << input;
  for (const auto& l : layers) {
    switch (l.kind) {
      case nn::LayerKind::Conv1d: s << " conv=" << l.out << 'x' << l.width; break;
      case nn::LayerKind::Relu: s << " relu"; break;
      case nn::LayerKind::AvgPool: s << " avgpool"; break;
      case nn::LayerKind::Linear: s << " linear=" << l.out; break;
      case nn::LayerKind::Embedding: throw std::logic_error("embedding inside the layer list");
    }
  }
  return s.str();
}

ArchSpec ArchSpec::parse(const std::string& descriptor) {
  ArchSpec spec;
  std::istringstream in(descriptor);
  std::string field;
  while (in >> field) {
    const auto eq = field.find('=');
    const std::string key = field.substr(0, eq);
    const std::string_view value =
        eq == std::string::npos ? std::string_view{} : std::string_view(field).substr(eq + 1);
    if (key == "relu" && eq == std::string::npos) {
      spec.layers.push_back({nn::LayerKind::Relu, 0, 0});
    } else if (key == "avgpool" && eq == std::string::npos) {
      spec.layers.push_back({nn::LayerKind::AvgPool, 0, 0});
    } else if (eq == std::string::npos) {
      throw std::invalid_argument("architecture field '" + field + "' is not recognised");
    } else if (key == "vocab" || key == "embed" || key == "input") {
      if (!spec.layers.empty())
        throw std::invalid_argument("architecture field '" + field + "' must precede the layers");
      (key == "vocab"   ? spec.vocab
       : key == "embed" ? spec.embed
                        : spec.input) = parse_count(field, value);
    } else if (key == "conv") {
      const auto x = value.find('x');
      if (x == std::string_view::npos)
        throw std::invalid_argument("architecture field '" + field + "': expected conv=OUTxWIDTH");
      spec.layers.push_back({nn::LayerKind::Conv1d, parse_count(field, value.substr(0, x)),
                             parse_count(field, value.substr(x + 1))});
    } else if (key == "linear") {
      spec.layers.push_back({nn::LayerKind::Linear, parse_count(field, value), 0});
    } else {
      throw std::invalid_argument("architecture field '" + field + "' is not recognised");
    }
  }
  if ((spec.vocab > 0) != (spec.embed > 0))
    throw std::invalid_argument("architecture needs both vocab= and embed= for an owned table");
  if (spec.vocab > 0 && spec.input > 0)
    throw std::invalid_argument("architecture cannot set both input= and an owned table");
  if (spec.vocab == 0 && spec.input == 0)
    throw std::invalid_argument("architecture needs input= or vocab= and embed=");
  spec.class_count();
  return spec;
}

const std::vector<std::string>& architecture_names() {
  static const std::vector<std::string> names = {"sst-word", "sst-char", "ag-char"};
  return names;
}

ArchSpec named_architecture(const std::string& name, std::size_t vocab_size,
                            std::size_t input_dim) {
  using K = nn::LayerKind;
  ArchSpec s;
  if (name == "sst-word") {
    s.input = input_dim ? input_dim : 300;
    s.layers = {{K::Conv1d, 100, 5}, {K::Relu}, {K::AvgPool}, {K::Linear, 2}};
  } else if (name == "sst-char" || name == "ag-char") {
    if (vocab_size == 0) throw std::invalid_argument(name + " needs a vocabulary size");
    s.vocab = vocab_size;
    s.embed = 150;
    if (name == "sst-char")
      s.layers = {{K::Conv1d, 100, 5}, {K::Relu}, {K::AvgPool}, {K::Linear, 2}};
    else
      s.layers = {{K::Conv1d, 100, 10}, {K::Relu}, {K::AvgPool},  {K::Linear, 100}, {K::Relu},
                  {K::Linear, 100},     {K::Relu}, {K::Linear, 4}};
  } else {
    std::string valid;
    for (const auto& n : architecture_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument(
        "unknown architecture '" + name + "' (valid: " + valid +
        ", or a descriptor such as 'input=300 conv=100x5 relu avgpool linear=2')");
  }
  return s;
}

ArchSpec resolve_architecture(const std::string& name_or_descriptor, std::size_t vocab_size,
                              std::size_t input_dim) {
  if (name_or_descriptor.find('=') != std::string::npos) {
    std::string d = name_or_descriptor;
    const bool has_vocab = d.find("vocab=") != std::string::npos;
    const bool has_embed = d.find("embed=") != std::string::npos;
    const bool has_input = d.find("input=") != std::string::npos;
    if (has_embed && !has_vocab && vocab_size > 0)
      d = "vocab=" + std::to_string(vocab_size) + " " + d;
    else if (!has_embed && !has_vocab && !has_input && input_dim > 0)
      d = "input=" + std::to_string(input_dim) + " " + d;
    return ArchSpec::parse(d);
  }
  return named_architecture(name_or_descriptor, vocab_size, input_dim);
}

template <typename T>
nn::Network<T> build_network(const ArchSpec& spec) {
  nn::Network<T> net;
  net.input_dim = spec.input_dim();
  net.class_count = spec.class_count();
  if (spec.owns_embedding()) net.layers.push_back(nn::make_embedding<T>(spec.vocab, spec.embed));
  bool sequence = true;
  std::size_t channels = spec.input_dim();
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case nn::LayerKind::Conv1d:
        net.layers.push_back(nn::make_conv1d<T>(channels, l.out, l.width));
        channels = l.out;
        break;
      case nn::LayerKind::Relu: net.layers.push_back(nn::make_relu<T>()); break;
      case nn::LayerKind::AvgPool:
        net.layers.push_back(nn::make_avg_pool<T>());
        sequence = false;
        break;
      case nn::LayerKind::Linear:
        if (sequence) throw std::invalid_argument("linear layer needs a pooled input");
        net.layers.push_back(nn::make_linear<T>(channels, l.out));
        channels = l.out;
        break;
      case nn::LayerKind::Embedding: throw std::invalid_argument("embedding inside the layer list");
    }
  }
  net.validate();
  return net;
}

template <typename T>
nn::Network<T> build_model(const std::string& name_or_descriptor, std::size_t vocab_size,
                           std::size_t input_dim, std::uint64_t seed) {
  auto net = build_network<T>(resolve_architecture(name_or_descriptor, vocab_size, input_dim));
  nn::initialize(net, seed);
  return net;
}

template <typename T>
ArchSpec describe(const nn::Network<T>& net) {
  ArchSpec s;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& l = net.layers[k];
    if (l.kind == nn::LayerKind::Embedding) {
      s.vocab = l.in;
      s.embed = l.out;
    } else {
      s.layers.push_back(
          {l.kind, l.kind == nn::LayerKind::Conv1d || l.kind == nn::LayerKind::Linear ? l.out : 0,
           l.kind == nn::LayerKind::Conv1d ? l.width : 0});
    }
  }
  if (!s.owns_embedding()) s.input = net.input_dim;
  return s;
}

template nn::Network<float> build_network<float>(const ArchSpec&);
template nn::Network<double> build_network<double>(const ArchSpec&);
template nn::Network<float> build_model<float>(const std::string&, std::size_t, std::size_t,
                                               std::uint64_t);
template nn::Network<double> build_model<double>(const std::string&, std::size_t, std::size_t,
                                                 std::uint64_t);
template ArchSpec describe<float>(const nn::Network<float>&);
template ArchSpec describe<double>(const nn::Network<double>&);

}  // namespace ibp::harness
