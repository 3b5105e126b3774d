#include "motionguide/bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "motionguide/errors.hpp"

namespace mg {
namespace {

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void text(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string text(std::size_t limit = 1u << 26) {
    const std::uint32_t n = u32();
    if (n > limit) throw format_error("bundle string length " + std::to_string(n) + " is implausible");
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw format_error("bundle is truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_params(Writer& w, const std::string& prefix, const nd::ParameterSet& params) {
  for (const auto& [name, p] : params) {
    w.text(prefix + name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.u64(d);
    for (double v : p.value.data()) w.f64(v);
  }
}

nd::ParameterSet* route(const std::string& name, ModelBundle& b, std::string& local) {
  const auto slash = name.find('/');
  if (slash == std::string::npos) return nullptr;
  const std::string head = name.substr(0, slash);
  local = name.substr(slash + 1);
  if (head == "classifier") return &b.classifier.network().params();
  if (head == "encoder") return &b.autoencoder.encoder().params();
  if (head == "decoder") return &b.autoencoder.decoder().params();
  return nullptr;
}

}  // namespace

nlohmann::json layers_to_json(const std::vector<nd::LayerSpec>& layers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json j{{"kind", nd::to_string(l.kind)}};
    if (!l.name.empty()) j["name"] = l.name;
    if (l.kind == nd::LayerKind::dense || l.kind == nd::LayerKind::conv1d) {
      j["in"] = l.in;
      j["out"] = l.out;
    }
    if (l.kind == nd::LayerKind::conv1d) {
      j["kernel"] = l.kernel;
      j["padding"] = l.padding;
    }
    if (l.kind == nd::LayerKind::conv1d || l.kind == nd::LayerKind::mean_pool) j["stride"] = l.stride;
    if (l.kind == nd::LayerKind::mean_pool || l.kind == nd::LayerKind::upsample) j["window"] = l.window;
    if (l.kind == nd::LayerKind::reshape) j["shape"] = l.shape;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<nd::LayerSpec> layers_from_json(const nlohmann::json& arr) {
  std::vector<nd::LayerSpec> layers;
  for (const auto& j : arr) {
    nd::LayerSpec l;
    l.kind = nd::layer_kind_from_string(j.at("kind").get<std::string>());
    l.name = j.value("name", std::string{});
    l.in = j.value("in", std::size_t{0});
    l.out = j.value("out", std::size_t{0});
    l.kernel = j.value("kernel", std::size_t{0});
    l.stride = j.value("stride", std::size_t{1});
    l.padding = j.value("padding", std::size_t{0});
    l.window = j.value("window", std::size_t{0});
    l.shape = j.value("shape", nd::Shape{});
    layers.push_back(std::move(l));
  }
  return layers;
}

std::vector<std::uint8_t> serialize_bundle(const ModelBundle& b) {
  const std::size_t channels = b.schema.channels();
  if (b.normalizer.mean.size() != channels || b.normalizer.scale.size() != channels) {
    throw structural_error("bundle normalizer does not match the schema channel count");
  }
  nlohmann::json header;
  header["schema"] = {{"frames", b.schema.frames},
                      {"joints", b.schema.joints},
                      {"frame_rate", b.schema.frame_rate},
                      {"joint_names", b.schema.joint_names},
                      {"latent_dim", b.autoencoder.latent_dim()}};
  header["classifier"] = {{"kind", to_string(b.classifier.kind())},
                          {"layers", layers_to_json(b.classifier.network().layers())}};
  header["encoder"] = layers_to_json(b.autoencoder.encoder().layers());
  header["decoder"] = layers_to_json(b.autoencoder.decoder().layers());
  header["normalizer_clamped"] = b.normalizer.clamped_channels;
  header["manifest"] = b.manifest;

  Writer w;
  w.bytes(kBundleMagic, sizeof kBundleMagic);
  w.u32(kBundleVersion);
  w.text(header.dump());
  w.u32(static_cast<std::uint32_t>(channels));
  for (double v : b.normalizer.mean) w.f64(v);
  for (double v : b.normalizer.scale) w.f64(v);
  const std::size_t count = b.classifier.network().params().size() + b.autoencoder.encoder().params().size() +
                            b.autoencoder.decoder().params().size();
  w.u32(static_cast<std::uint32_t>(count));
  write_params(w, "classifier/", b.classifier.network().params());
  write_params(w, "encoder/", b.autoencoder.encoder().params());
  write_params(w, "decoder/", b.autoencoder.decoder().params());
  const std::uint64_t checksum = fnv1a(w.buffer());
  w.u64(checksum);
  return std::move(w.buffer());
}

ModelBundle deserialize_bundle(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kBundleMagic + 4 + 8) throw format_error("bundle is truncated (too short)");
  if (std::memcmp(bytes.data(), kBundleMagic, sizeof kBundleMagic) != 0) throw format_error("not a model bundle (bad magic)");
  const auto body = bytes.first(bytes.size() - 8);
  Reader tail(bytes.subspan(bytes.size() - 8));
  Reader r(body);
  char magic[8];
  r.raw(magic, sizeof magic);
  const std::uint32_t version = r.u32();
  if (version != kBundleVersion) {
    throw format_error("bundle format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kBundleVersion) + ")");
  }
  if (fnv1a(body) != tail.u64()) throw format_error("bundle checksum mismatch (corrupt or truncated file)");

  ModelBundle b;
  try {
    const nlohmann::json header = nlohmann::json::parse(r.text());
    const auto& schema = header.at("schema");
    b.schema.frames = schema.at("frames").get<std::size_t>();
    b.schema.joints = schema.at("joints").get<std::size_t>();
    b.schema.frame_rate = schema.at("frame_rate").get<double>();
    b.schema.joint_names = schema.at("joint_names").get<std::vector<std::string>>();
    const auto latent = schema.at("latent_dim").get<std::size_t>();
    const std::size_t channels = b.schema.channels();
    b.classifier = Classifier(parse_classifier_kind(header.at("classifier").at("kind").get<std::string>()),
                              b.schema.frames, channels,
                              nd::Sequential(layers_from_json(header.at("classifier").at("layers"))));
    b.autoencoder = Autoencoder(b.schema.frames, channels, latent, nd::Sequential(layers_from_json(header.at("encoder"))),
                                nd::Sequential(layers_from_json(header.at("decoder"))));
    b.normalizer.clamped_channels = header.value("normalizer_clamped", std::vector<std::size_t>{});
    b.manifest = header.at("manifest");

    if (r.u32() != channels) throw format_error("bundle normalizer channel count does not match schema");
    b.normalizer.mean.resize(channels);
    b.normalizer.scale.resize(channels);
    for (double& v : b.normalizer.mean) v = r.f64();
    for (double& v : b.normalizer.scale) v = r.f64();

    const std::uint32_t count = r.u32();
    std::size_t expected = b.classifier.network().params().size() + b.autoencoder.encoder().params().size() +
                           b.autoencoder.decoder().params().size();
    if (count != expected) {
      throw format_error("bundle holds " + std::to_string(count) + " tensors, architecture needs " +
                         std::to_string(expected));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::string name = r.text(4096);
      std::string local;
      nd::ParameterSet* target = route(name, b, local);
      if (!target || !target->contains(local)) throw format_error("bundle tensor '" + name + "' is not part of the architecture");
      nd::Parameter& p = target->at(local);
      const std::uint32_t rank = r.u32();
      nd::Shape shape(rank);
      for (auto& d : shape) d = r.u64();
      if (shape != p.value.shape()) {
        throw format_error("bundle tensor '" + name + "' has shape " + nd::shape_string(shape) + ", expected " +
                           nd::shape_string(p.value.shape()));
      }
      for (double& v : p.value.data()) v = r.f64();
    }
    if (r.remaining() != 0) throw format_error("bundle has trailing bytes");
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("bundle header is malformed: ") + e.what());
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::format) throw;
    throw format_error(std::string("bundle is inconsistent: ") + e.what());
  }
  return b;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = serialize_bundle(bundle);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("failed writing bundle '" + path.string() + "'");
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open bundle '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_bundle(bytes);
}

}  // namespace mg
