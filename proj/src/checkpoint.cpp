#include "tfoc/checkpoint.hpp"

#include <fstream>

#include "byte_io.hpp"

namespace tfoc {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'T', 'F', 'O', 'C'};

json layer_to_json(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::dropout: return {{"type", "dropout"}, {"rate", l.rate}};
    case LayerKind::conv: return {{"type", "conv3x3"}, {"filters", l.units}, {"max_norm", l.max_norm}};
    case LayerKind::flatten: return {{"type", "flatten"}};
    case LayerKind::dense:
      return {{"type", "dense"},
              {"units", l.units},
              {"activation", l.softmax ? "softmax" : "relu"},
              {"max_norm", l.max_norm}};
  }
  return {};
}

LayerSpec layer_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  LayerSpec l{LayerKind::flatten};
  if (type == "dropout") {
    l.kind = LayerKind::dropout;
    l.rate = j.at("rate").get<double>();
  } else if (type == "conv3x3") {
    l.kind = LayerKind::conv;
    l.units = j.at("filters").get<int>();
    l.max_norm = j.at("max_norm").get<bool>();
  } else if (type == "dense") {
    l.kind = LayerKind::dense;
    l.units = j.at("units").get<int>();
    l.softmax = j.at("activation").get<std::string>() == "softmax";
    l.max_norm = j.at("max_norm").get<bool>();
  } else if (type != "flatten") {
    throw CheckpointError("unknown layer type '" + type + "'");
  }
  return l;
}

// Bounds-checked reader over the encoded bytes.
class Reader {
 public:
  explicit Reader(std::span<const uint8_t> b) : b_(b) {}

  const uint8_t* take(std::size_t n) {
    if (b_.size() - pos_ < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
    const uint8_t* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  uint8_t u8() { return *take(1); }
  uint16_t u16() { return byte_io::get_u16(take(2)); }
  uint32_t u32() { return byte_io::get_u32(take(4)); }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const uint8_t> b_;
  std::size_t pos_{0};
};

}  // namespace

Network Checkpoint::network() const {
  Network net = Network::zeros(input, arch);
  auto& dst = net.params();
  if (dst.size() != params.size())
    throw CheckpointError("checkpoint has " + std::to_string(params.size()) + " parameter tensors, architecture needs " +
                          std::to_string(dst.size()));
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].shape.name != params[i].shape.name || dst[i].shape.dims != params[i].shape.dims)
      throw CheckpointError("parameter " + params[i].shape.name + " " + dims_to_string(params[i].shape.dims) +
                            " does not match expected " + dst[i].shape.name + " " +
                            dims_to_string(dst[i].shape.dims));
    dst[i].value = params[i].value;
  }
  return net;
}

Checkpoint make_checkpoint(const Network& net) {
  Checkpoint c;
  c.input = net.input_dims();
  c.arch = net.architecture();
  c.params = net.params();
  return c;
}

std::vector<uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  json layers = json::array();
  for (const auto& l : ckpt.arch.layers) layers.push_back(layer_to_json(l));
  const json header = {
      {"input", {ckpt.input.height, ckpt.input.width, ckpt.input.depth}},
      {"layers", layers},
      {"train_config", ckpt.train_config},
      {"pipeline", ckpt.pipeline},
      {"best_epoch", ckpt.best_epoch},
      {"val_accuracy", ckpt.val_accuracy},
  };
  const std::string text = header.dump();

  std::vector<uint8_t> out(kMagic, kMagic + 4);
  byte_io::put_u32(out, Checkpoint::kVersion);
  byte_io::put_u32(out, static_cast<uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& p : ckpt.params) {
    if (p.shape.name.size() > UINT16_MAX) throw CheckpointError("parameter name too long");
    if (p.shape.dims.size() > UINT8_MAX) throw CheckpointError("parameter rank too large");
    if (p.value.size() != p.shape.size()) throw CheckpointError("parameter " + p.shape.name + " size mismatch");
    byte_io::put_u16(out, static_cast<uint16_t>(p.shape.name.size()));
    out.insert(out.end(), p.shape.name.begin(), p.shape.name.end());
    byte_io::put_u8(out, static_cast<uint8_t>(p.shape.dims.size()));
    for (auto d : p.shape.dims) byte_io::put_u32(out, static_cast<uint32_t>(d));
    for (float v : p.value) byte_io::put_f32(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  const uint8_t* magic = r.take(4);
  if (!std::equal(magic, magic + 4, kMagic)) throw CheckpointError("not a checkpoint (bad magic)");
  const uint32_t version = r.u32();
  if (version != Checkpoint::kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const uint32_t header_len = r.u32();
  const auto* h = reinterpret_cast<const char*>(r.take(header_len));

  Checkpoint c;
  try {
    const json header = json::parse(h, h + header_len);
    const auto input = header.at("input").get<std::vector<std::size_t>>();
    if (input.size() != 3) throw CheckpointError("input dims must have 3 entries");
    c.input = {input[0], input[1], input[2]};
    for (const auto& l : header.at("layers")) c.arch.layers.push_back(layer_from_json(l));
    c.train_config = header.at("train_config");
    c.pipeline = header.at("pipeline");
    c.best_epoch = header.at("best_epoch").get<int>();
    c.val_accuracy = header.at("val_accuracy").get<double>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }

  const auto plan = plan_network(c.input, c.arch);
  for (std::size_t i = 0; i < plan.params.size(); ++i) {
    Param<float> p;
    const uint16_t name_len = r.u16();
    const auto* name = reinterpret_cast<const char*>(r.take(name_len));
    p.shape.name.assign(name, name_len);
    const uint8_t ndim = r.u8();
    for (uint8_t d = 0; d < ndim; ++d) p.shape.dims.push_back(r.u32());
    const auto& want = plan.params[i];
    if (p.shape.name != want.name || p.shape.dims != want.dims)
      throw CheckpointError("parameter " + p.shape.name + " " + dims_to_string(p.shape.dims) + " does not match " +
                            want.name + " " + dims_to_string(want.dims));
    p.shape = want;
    const std::size_t n = want.size();
    const uint8_t* data = r.take(4 * n);
    p.value.resize(n);
    for (std::size_t k = 0; k < n; ++k) p.value[k] = byte_io::get_f32(data + 4 * k);
    c.params.push_back(std::move(p));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after the last parameter");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::vector<uint8_t> bytes;
  if (!byte_io::read_file(path, bytes)) throw IoError("cannot open " + path.string());
  return decode_checkpoint(bytes);
}

Prediction predict(const Network& net, const Tensor& inputs) {
  Prediction out;
  out.probs = net.predict_probs(inputs);
  const std::size_t n = inputs.dims[0];
  const std::size_t k = out.probs.dims[1];
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.labels[i] = argmax_row(std::span<const float>(out.probs.data.data() + i * k, k));
  return out;
}

Prediction predict(const Checkpoint& ckpt, const Tensor& inputs) {
  if (inputs.rank() != 4 || inputs.dims[1] != ckpt.input.height || inputs.dims[2] != ckpt.input.width ||
      inputs.dims[3] != ckpt.input.depth)
    throw ShapeError("inputs " + dims_to_string(inputs.dims) + " do not match checkpoint input (N, " +
                     std::to_string(ckpt.input.height) + ", " + std::to_string(ckpt.input.width) + ", " +
                     std::to_string(ckpt.input.depth) + ")");
  return predict(ckpt.network(), inputs);
}

}  // namespace tfoc
