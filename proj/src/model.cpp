#include "birdsed/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "birdsed/rng.hpp"

namespace birdsed {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'B', 'S', 'E', 'D', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kKindBird = 1;
constexpr std::uint32_t kKindBinary = 2;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string canonical_config(const BackboneConfig& config) {
  std::string s = "k3;ch:";
  for (const int c : config.channels) s += std::to_string(c) + ",";
  return s;
}

std::uint64_t bird_digest(const BirdModel& m) {
  std::string s = "bird;" + canonical_config(m.config);
  s += ";classes:" + std::to_string(m.n_classes);
  s += ";gem_eps:" + std::to_string(m.gem.eps);
  s += ";gem_trainable:" + std::to_string(m.gem.trainable ? 1 : 0);
  return fnv1a(s);
}

std::uint64_t binary_digest(const BinaryModel& m) {
  return fnv1a("binary;" + canonical_config(m.config));
}

void fill_uniform_fan_in(std::vector<float>& w, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (float& v : w) v = static_cast<float>(rng.uniform(-bound, bound));
}

void init_backbone(BackboneT<float>& bb, Rng& rng) {
  for (auto& blk : bb.blocks) {
    fill_uniform_fan_in(blk.weight, static_cast<std::size_t>(blk.in_c) * kConvKernel * kConvKernel,
                        rng);
    // biases stay zero
  }
}

struct Writer {
  std::ofstream out;

  explicit Writer(const std::filesystem::path& path) : out(path, std::ios::binary) {
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
  }
  void raw(const void* p, std::size_t n) { out.write(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void tensor(const float* data, std::initializer_list<std::uint32_t> dims) {
    u32(static_cast<std::uint32_t>(dims.size()));
    std::size_t n = 1;
    for (const std::uint32_t d : dims) {
      u32(d);
      n *= d;
    }
    raw(data, n * sizeof(float));
  }
};

struct Reader {
  std::ifstream in;
  std::filesystem::path path;

  explicit Reader(const std::filesystem::path& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw DataError("cannot open checkpoint: " + p.string());
  }
  void raw(void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw DataError("truncated checkpoint: " + path.string());
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  void tensor(float* data, std::initializer_list<std::uint32_t> dims) {
    const std::uint32_t rank = u32();
    if (rank != dims.size()) throw DataError("checkpoint tensor rank mismatch: " + path.string());
    std::size_t n = 1;
    for (const std::uint32_t d : dims) {
      if (u32() != d) throw DataError("checkpoint tensor shape mismatch: " + path.string());
      n *= d;
    }
    raw(data, n * sizeof(float));
  }
};

void write_backbone(Writer& w, const BackboneT<float>& bb) {
  for (const auto& blk : bb.blocks) {
    w.tensor(blk.weight.data(),
             {static_cast<std::uint32_t>(blk.out_c), static_cast<std::uint32_t>(blk.in_c),
              kConvKernel, kConvKernel});
    w.tensor(blk.bias.data(), {static_cast<std::uint32_t>(blk.out_c)});
  }
}

void read_backbone(Reader& r, BackboneT<float>& bb) {
  for (auto& blk : bb.blocks) {
    r.tensor(blk.weight.data(),
             {static_cast<std::uint32_t>(blk.out_c), static_cast<std::uint32_t>(blk.in_c),
              kConvKernel, kConvKernel});
    r.tensor(blk.bias.data(), {static_cast<std::uint32_t>(blk.out_c)});
  }
}

BackboneConfig read_header(Reader& r, std::uint32_t expected_kind) {
  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError("not a model checkpoint: " + r.path.string());
  }
  const std::uint32_t kind = r.u32();
  if (kind != expected_kind) {
    throw DataError("checkpoint holds a different model kind: " + r.path.string());
  }
  BackboneConfig config;
  config.channels.resize(r.u32());
  for (int& c : config.channels) c = static_cast<int>(r.u32());
  config.validate();
  return config;
}

}  // namespace

void BackboneConfig::validate() const {
  if (channels.empty()) throw ConfigError("backbone: need at least one conv block");
  for (const int c : channels) {
    if (c < 1) throw ConfigError("backbone: channel counts must be positive");
  }
}

void GeMConfig::validate() const {
  if (p < 1.0) throw ConfigError("gem: p must be >= 1");
  if (eps <= 0.0) throw ConfigError("gem: eps must be positive");
}

BirdModel init_bird_model(const BackboneConfig& config, const GeMConfig& gem, int n_classes,
                          std::uint64_t seed) {
  config.validate();
  gem.validate();
  if (n_classes < 1) throw ConfigError("bird model: need at least one class");
  BirdModel m = make_zero_bird<float>(config, gem, n_classes);
  Rng rng(mix_seed(seed, 0x62697264));  // independent of other streams
  init_backbone(m.backbone, rng);
  m.gem_p = static_cast<float>(gem.p);
  fill_uniform_fan_in(m.head_weight, config.feature_channels(), rng);
  return m;
}

BinaryModel init_binary_model(const BackboneConfig& config, std::uint64_t seed) {
  config.validate();
  BinaryModel m = make_zero_binary<float>(config);
  Rng rng(mix_seed(seed, 0x62696e61));
  init_backbone(m.backbone, rng);
  fill_uniform_fan_in(m.attn_weight, config.feature_channels(), rng);
  fill_uniform_fan_in(m.head_weight, config.feature_channels(), rng);
  return m;
}

void save_bird_model(const std::filesystem::path& path, const BirdModel& m) {
  Writer w(path);
  w.raw(kMagic, 8);
  w.u32(kKindBird);
  w.u32(static_cast<std::uint32_t>(m.config.channels.size()));
  for (const int c : m.config.channels) w.u32(static_cast<std::uint32_t>(c));
  w.u64(bird_digest(m));
  w.u32(static_cast<std::uint32_t>(m.n_classes));
  w.u32(m.gem.trainable ? 1 : 0);
  const double eps = m.gem.eps;
  w.raw(&eps, 8);
  write_backbone(w, m.backbone);
  w.tensor(&m.gem_p, {1});
  w.tensor(m.head_weight.data(), {static_cast<std::uint32_t>(m.n_classes),
                                  static_cast<std::uint32_t>(m.config.feature_channels())});
  w.tensor(m.head_bias.data(), {static_cast<std::uint32_t>(m.n_classes)});
  if (!w.out) throw DataError("short write on checkpoint: " + path.string());
}

BirdModel load_bird_model(const std::filesystem::path& path) {
  Reader r(path);
  const BackboneConfig config = read_header(r, kKindBird);
  const std::uint64_t digest = r.u64();
  const int n_classes = static_cast<int>(r.u32());
  GeMConfig gem;
  gem.trainable = r.u32() != 0;
  r.raw(&gem.eps, 8);
  BirdModel m = make_zero_bird<float>(config, gem, n_classes);
  read_backbone(r, m.backbone);
  r.tensor(&m.gem_p, {1});
  r.tensor(m.head_weight.data(), {static_cast<std::uint32_t>(n_classes),
                                  static_cast<std::uint32_t>(config.feature_channels())});
  r.tensor(m.head_bias.data(), {static_cast<std::uint32_t>(n_classes)});
  m.gem.p = static_cast<double>(m.gem_p);
  if (digest != bird_digest(m)) {
    throw DataError("checkpoint config digest mismatch: " + path.string());
  }
  return m;
}

void save_binary_model(const std::filesystem::path& path, const BinaryModel& m) {
  Writer w(path);
  w.raw(kMagic, 8);
  w.u32(kKindBinary);
  w.u32(static_cast<std::uint32_t>(m.config.channels.size()));
  for (const int c : m.config.channels) w.u32(static_cast<std::uint32_t>(c));
  w.u64(binary_digest(m));
  write_backbone(w, m.backbone);
  const std::uint32_t C = static_cast<std::uint32_t>(m.config.feature_channels());
  w.tensor(m.attn_weight.data(), {C});
  w.tensor(m.head_weight.data(), {C});
  w.tensor(&m.head_bias, {1});
  if (!w.out) throw DataError("short write on checkpoint: " + path.string());
}

BinaryModel load_binary_model(const std::filesystem::path& path) {
  Reader r(path);
  const BackboneConfig config = read_header(r, kKindBinary);
  const std::uint64_t digest = r.u64();
  BinaryModel m = make_zero_binary<float>(config);
  read_backbone(r, m.backbone);
  const std::uint32_t C = static_cast<std::uint32_t>(config.feature_channels());
  r.tensor(m.attn_weight.data(), {C});
  r.tensor(m.head_weight.data(), {C});
  r.tensor(&m.head_bias, {1});
  if (digest != binary_digest(m)) {
    throw DataError("checkpoint config digest mismatch: " + path.string());
  }
  return m;
}

std::vector<float> gem_pool(const Mat<float>& per_channel_maps, int channels,
                            const GeMConfig& cfg) {
  cfg.validate();
  if (per_channel_maps.rows() != channels) throw DataError("gem_pool: channel count mismatch");
  return gem_pool(per_channel_maps.data(), channels,
                  static_cast<std::size_t>(per_channel_maps.cols()), cfg.p, cfg.eps);
}

std::vector<float> forward_bird_infer(const BirdModel& m, const Mat<float>& spec) {
  std::vector<float> image(spec.data(), spec.data() + spec.size());
  BirdForwardTrace<float> tr;
  forward_bird(m, std::move(image), 1, 1, spec.rows(), spec.cols(), tr);
  std::vector<float> probs(m.n_classes);
  for (int k = 0; k < m.n_classes; ++k) probs[k] = kernels::sigmoid(tr.logits[k]);
  return probs;
}

float forward_binary(const BinaryModel& m, const Mat<float>& spec) {
  std::vector<float> image(spec.data(), spec.data() + spec.size());
  BinaryForwardTrace<float> tr;
  forward_binary_batch(m, std::move(image), 1, spec.rows(), spec.cols(), tr);
  return kernels::sigmoid(tr.logits[0]);
}

}  // namespace birdsed
