#include "splitstream/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "splitstream/bytes.hpp"
#include "splitstream/rng.hpp"

namespace splitstream {

using nlohmann::json;

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::kCovidCnn: return "covid_cnn";
    case ModelKind::kVgg19Lite: return "vgg19_lite";
    case ModelKind::kCholesterolMlp: return "cholesterol_mlp";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "covid_cnn") return ModelKind::kCovidCnn;
  if (name == "vgg19_lite") return ModelKind::kVgg19Lite;
  if (name == "cholesterol_mlp") return ModelKind::kCholesterolMlp;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::size_t ModelSpec::client_layer_count(std::size_t split) const {
  if (split > block_ends.size()) {
    throw ConfigError("split index " + std::to_string(split) + " out of range [0, " +
                      std::to_string(block_ends.size()) + "]");
  }
  return split == 0 ? 0 : block_ends[split - 1];
}

namespace {

constexpr std::uint64_t kInitStream = 0x494E4954;  // "INIT"

std::size_t scaled_width(std::size_t base, double scale) {
  return std::max<std::size_t>(4, static_cast<std::size_t>(std::lround(base * scale)));
}

// Incrementally builds a layer list while tracking the running shape.
class Builder {
 public:
  explicit Builder(Shape input) : input_(input), shape_(std::move(input)) {}

  void conv(std::size_t kernel, std::size_t out) {
    add(ConvLayer::zeros(kernel, shape_[2], out));
  }
  // Kernel 3 while the map is large enough to keep shrinking, else 1.
  void conv_auto(std::size_t out) { conv(shape_[0] >= 5 && shape_[1] >= 5 ? 3 : 1, out); }
  void pool_if_even(PoolMode mode) {
    if (shape_[0] >= 2 && shape_[1] >= 2 && shape_[0] % 2 == 0 && shape_[1] % 2 == 0) {
      add(PoolLayer{2, mode});
    }
  }
  void activation(ActivationKind kind) { add(ActivationLayer{kind, kDefaultLeakySlope}); }
  void flatten() { add(FlattenLayer{}); }
  void dense(std::size_t out) { add(DenseLayer::zeros(shape_[0], out)); }
  void end_block() { block_ends_.push_back(layers_.size()); }

  const Shape& shape() const { return shape_; }
  std::vector<std::size_t> block_ends() const { return block_ends_; }
  Network finish() { return Network(input_, std::move(layers_)); }

 private:
  void add(Layer layer) {
    shape_ = output_shape<float>(layer, shape_);
    layers_.push_back(std::move(layer));
  }

  Shape input_;
  Shape shape_;
  std::vector<Layer> layers_;
  std::vector<std::size_t> block_ends_;
};

void check_scale(double scale) {
  for (double allowed : {1.0, 0.5, 0.25, 0.125}) {
    if (scale == allowed) return;
  }
  throw ConfigError("scale must be one of 1, 1/2, 1/4, 1/8; got " + std::to_string(scale));
}

}  // namespace

void initialize_parameters(Network& net, std::uint64_t seed, std::size_t first, std::size_t last) {
  Xorshift64Star rng(derive_seed(seed, kInitStream));
  last = std::min(last, net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Layer& layer = net.layer(i);
    if (!has_parameters(layer)) continue;
    double fan_in = 0;
    double fan_out = 0;
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      const double area = static_cast<double>(c->kernel_size * c->kernel_size);
      fan_in = area * c->in_channels;
      fan_out = area * c->out_channels;
    } else {
      const auto& d = std::get<DenseLayer>(layer);
      fan_in = static_cast<double>(d.in_features);
      fan_out = static_cast<double>(d.out_features);
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor& w = net.parameter(parameter_name(i, false));
    Tensor& b = net.parameter(parameter_name(i, true));
    // Draws happen for every layer so that re-initializing a sub-range yields
    // the same values as a full initialization.
    for (std::size_t k = 0; k < w.size(); ++k) {
      const auto v = static_cast<float>(rng.uniform(-limit, limit));
      if (i >= first && i < last) w[k] = v;
    }
    if (i >= first && i < last) std::fill(b.data().begin(), b.data().end(), 0.f);
  }
}

ModelSpec build_model(ModelKind kind, double scale, std::uint64_t seed,
                      const ModelOptions& options) {
  check_scale(scale);
  if (options.privacy_channels == 0) throw ConfigError("privacy_channels must be positive");
  ModelSpec spec;
  spec.kind = kind;
  spec.scale = scale;
  spec.seed = seed;
  spec.split_index = options.split_index;
  const auto act = options.hidden_activation;

  switch (kind) {
    case ModelKind::kCovidCnn: {
      const auto side = static_cast<std::size_t>(std::lround(64 * scale));
      Builder b({side, side, 1});
      // Client block: 1x1 conv keeps the map at exactly half resolution after pooling.
      b.conv(1, options.privacy_channels);
      b.activation(act);
      b.pool_if_even(options.pool_mode);
      b.end_block();
      for (std::size_t width : {32, 64, 128, 256}) {
        b.conv_auto(scaled_width(width, scale));
        b.activation(act);
        b.pool_if_even(options.pool_mode);
        b.end_block();
      }
      b.flatten();
      b.dense(1);
      b.activation(ActivationKind::kSigmoid);
      spec.name = "covid_cnn";
      spec.loss = LossKind::kBinaryCrossentropy;
      spec.default_epochs = 100;
      spec.default_batch = 64;
      spec.default_learning_rate = 0.1;
      spec.block_ends = b.block_ends();
      spec.network = b.finish();
      break;
    }
    case ModelKind::kVgg19Lite: {
      const auto side = static_cast<std::size_t>(std::lround(224 * scale));
      Builder b({side, side, 1});
      b.conv(1, options.privacy_channels);
      b.activation(act);
      b.pool_if_even(options.pool_mode);
      b.end_block();
      // 16 further conv layers in VGG19's 2-2-4-4-4 grouping: 17 in total.
      const std::pair<std::size_t, std::size_t> groups[] = {
          {2, 64}, {2, 128}, {4, 256}, {4, 512}, {4, 512}};
      for (const auto& [count, width] : groups) {
        for (std::size_t i = 0; i < count; ++i) {
          b.conv_auto(scaled_width(width, scale));
          b.activation(act);
        }
        b.pool_if_even(options.pool_mode);
        b.end_block();
      }
      b.flatten();
      b.dense(1);
      b.activation(ActivationKind::kSigmoid);
      spec.name = "vgg19_lite";
      spec.loss = LossKind::kBinaryCrossentropy;
      spec.default_epochs = 50;
      spec.default_batch = 128;
      spec.default_learning_rate = 0.05;
      spec.block_ends = b.block_ends();
      spec.network = b.finish();
      break;
    }
    case ModelKind::kCholesterolMlp: {
      // age, sex, height, weight, TC, HDL-C, TG
      Builder b({7});
      b.dense(64);
      b.activation(ActivationKind::kLeakyRelu);
      b.end_block();
      b.dense(32);
      b.activation(ActivationKind::kLeakyRelu);
      b.end_block();
      b.dense(1);
      spec.name = "cholesterol_mlp";
      spec.loss = LossKind::kMse;
      spec.default_epochs = 200;
      spec.default_batch = 2048;
      spec.default_learning_rate = 0.001;
      spec.block_ends = b.block_ends();
      spec.network = b.finish();
      break;
    }
  }
  spec.client_layer_count(spec.split_index);  // range check
  initialize_parameters(spec.network, seed);
  return spec;
}

SplitModel split_model(const ModelSpec& spec) {
  const std::size_t cut = spec.client_layer_count(spec.split_index);
  SplitModel split;
  split.client_part = spec.network.slice(0, cut);
  split.server_part = spec.network.slice(cut, spec.network.size());
  split.config_hash = config_hash(spec);
  return split;
}

json layers_to_json(const Network& net) {
  json layers = json::array();
  for (const auto& layer : net.layers()) {
    json d;
    d["type"] = layer_type_name(layer);
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, ConvLayer>) {
            d["kernel"] = l.kernel_size;
            d["in"] = l.in_channels;
            d["out"] = l.out_channels;
          } else if constexpr (std::is_same_v<L, PoolLayer>) {
            d["window"] = l.window;
            d["mode"] = to_string(l.mode);
          } else if constexpr (std::is_same_v<L, ActivationLayer>) {
            d["kind"] = to_string(l.kind);
            if (l.kind == ActivationKind::kLeakyRelu) d["slope"] = l.slope;
          } else if constexpr (std::is_same_v<L, DenseLayer>) {
            d["in"] = l.in_features;
            d["out"] = l.out_features;
          }
        },
        layer);
    layers.push_back(std::move(d));
  }
  return layers;
}

Network network_from_json(const Shape& input_shape, const json& layers) {
  std::vector<Layer> out;
  for (const auto& d : layers) {
    const std::string type = d.at("type");
    if (type == "conv") {
      out.push_back(ConvLayer::zeros(d.at("kernel"), d.at("in"), d.at("out")));
    } else if (type == "pool") {
      out.push_back(PoolLayer{d.at("window"), parse_pool_mode(d.at("mode").get<std::string>())});
    } else if (type == "activation") {
      out.push_back(ActivationLayer{parse_activation(d.at("kind").get<std::string>()),
                                    d.value("slope", kDefaultLeakySlope)});
    } else if (type == "flatten") {
      out.push_back(FlattenLayer{});
    } else if (type == "dense") {
      out.push_back(DenseLayer::zeros(d.at("in"), d.at("out")));
    } else {
      throw ConfigError("unknown layer type '" + type + "'");
    }
  }
  return Network(input_shape, std::move(out));
}

json canonical_spec(const ModelSpec& spec) {
  json doc;
  doc["format"] = "splitstream-model/1";
  doc["name"] = spec.name;
  doc["kind"] = to_string(spec.kind);
  doc["scale"] = spec.scale;
  doc["seed"] = spec.seed;
  doc["loss"] = to_string(spec.loss);
  doc["input_shape"] = spec.network.input_shape();
  doc["layers"] = layers_to_json(spec.network);
  doc["block_ends"] = spec.block_ends;
  doc["split_index"] = spec.split_index;
  doc["default_epochs"] = spec.default_epochs;
  doc["default_batch"] = spec.default_batch;
  return doc;
}

ModelSpec spec_from_canonical(const json& doc) {
  if (doc.value("format", "") != "splitstream-model/1") {
    throw ConfigError("unrecognized model format");
  }
  ModelSpec spec;
  spec.name = doc.at("name");
  spec.kind = parse_model_kind(doc.at("kind").get<std::string>());
  spec.scale = doc.at("scale");
  spec.seed = doc.at("seed");
  spec.loss = parse_loss(doc.at("loss").get<std::string>());
  spec.network = network_from_json(doc.at("input_shape").get<Shape>(), doc.at("layers"));
  spec.block_ends = doc.at("block_ends").get<std::vector<std::size_t>>();
  spec.split_index = doc.at("split_index");
  spec.default_epochs = doc.at("default_epochs");
  spec.default_batch = doc.at("default_batch");
  spec.client_layer_count(spec.split_index);
  return spec;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t config_hash(const ModelSpec& spec) { return fnv1a64(canonical_spec(spec).dump()); }

void save_weights(const std::filesystem::path& path, const ModelSpec& spec) {
  json header = canonical_spec(spec);
  json manifest = json::array();
  Bytes payload;
  for (const auto& name : spec.network.parameter_names()) {
    const Tensor& t = spec.network.parameter(name);
    manifest.push_back({{"name", name}, {"count", t.size()}});
    for (float v : t.data()) put_f32(payload, v);
  }
  header["parameters"] = std::move(manifest);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

ModelSpec load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open weights file " + path.string());
  std::string line;
  std::getline(in, line);
  const json header = json::parse(line);
  ModelSpec spec = spec_from_canonical(header);
  const Bytes payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t offset = 0;
  for (const auto& entry : header.at("parameters")) {
    Tensor& t = spec.network.parameter(entry.at("name"));
    if (entry.at("count").get<std::size_t>() != t.size()) {
      throw DataError("weights file parameter count mismatch for " +
                      entry.at("name").get<std::string>());
    }
    if (offset + 4 * t.size() > payload.size()) throw DataError("weights file truncated");
    for (std::size_t k = 0; k < t.size(); ++k, offset += 4) t[k] = get_f32(payload, offset);
  }
  if (offset != payload.size()) throw DataError("weights file has trailing bytes");
  return spec;
}

}  // namespace splitstream
