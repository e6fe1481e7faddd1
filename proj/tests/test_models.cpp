#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "birdsed/model.hpp"
#include "birdsed/rng.hpp"

using namespace birdsed;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

Mat<float> random_spec(int mel, int frames, Rng& rng) {
  Mat<float> m(mel, frames);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<float>(rng.uniform(-40.0, 10.0));
  }
  return m;
}

}  // namespace

TEST_CASE("gem_pool identities") {
  GeMConfig cfg;
  SUBCASE("p = 1 is the arithmetic mean") {
    const std::vector<float> features = {1.0f, 3.0f, 5.0f, 7.0f};
    const auto out = gem_pool(features.data(), 1, 4, 1.0, 1e-6);
    CHECK(out[0] == doctest::Approx(4.0f).epsilon(1e-6));
  }
  SUBCASE("constant input is a fixed point for any p") {
    const std::vector<float> features(12, 0.7f);
    for (const double p : {1.0, 2.0, 3.0, 10.0}) {
      const auto out = gem_pool(features.data(), 1, 12, p, 1e-6);
      CHECK(out[0] == doctest::Approx(0.7f).epsilon(1e-6));
    }
  }
  SUBCASE("p = 100 approaches the max") {
    const std::vector<float> features = {0.1f, 1.0f};
    const auto out = gem_pool(features.data(), 1, 2, 100.0, 1e-6);
    // oracle: (0.5*(0.1^100 + 1))^(1/100)
    const double expect = std::pow(0.5 * (std::pow(0.1, 100.0) + 1.0), 0.01);
    CHECK(out[0] == doctest::Approx(expect).epsilon(1e-4));
    CHECK(std::abs(out[0] - 1.0f) < 0.01f);
  }
  SUBCASE("monotone in p for nonnegative inputs") {
    Rng rng(5);
    std::vector<float> features(64);
    for (float& x : features) x = static_cast<float>(rng.uniform(0.0, 2.0));
    double prev = 0.0;
    for (const double p : {1.0, 1.5, 2.0, 4.0, 8.0, 32.0}) {
      const auto out = gem_pool(features.data(), 1, features.size(), p, 1e-6);
      CHECK(out[0] >= prev - 1e-6);
      prev = out[0];
    }
  }
  SUBCASE("multi-channel layout") {
    Mat<float> maps(2, 6);
    for (int i = 0; i < 6; ++i) {
      maps(0, i) = 2.0f;
      maps(1, i) = static_cast<float>(i);
    }
    const auto out = gem_pool(maps, 2, cfg);  // p = 3 default
    CHECK(out.size() == 2);
    CHECK(out[0] == doctest::Approx(2.0f).epsilon(1e-6));
  }
  SUBCASE("validation") {
    const std::vector<float> f = {1.0f};
    CHECK_THROWS_AS(gem_pool(f.data(), 1, 1, 0.5, 1e-6), ConfigError);
    CHECK_THROWS_AS(gem_pool(f.data(), 0, 1, 2.0, 1e-6), DataError);
  }
}

TEST_CASE("init is seeded and reproducible") {
  const BackboneConfig bb{{8, 16}};
  const GeMConfig gem;
  const BirdModel a = init_bird_model(bb, gem, 5, 42);
  const BirdModel b = init_bird_model(bb, gem, 5, 42);
  const BirdModel c = init_bird_model(bb, gem, 5, 43);

  CHECK(a.gem_p == 3.0f);
  CHECK(a.backbone.blocks[0].weight == b.backbone.blocks[0].weight);
  CHECK(a.head_weight == b.head_weight);
  CHECK(a.backbone.blocks[0].weight != c.backbone.blocks[0].weight);
  for (const float v : a.backbone.blocks[0].bias) CHECK(v == 0.0f);
  for (const float v : a.head_bias) CHECK(v == 0.0f);
  // scaled uniform fan-in bound for the first block (fan_in = 9)
  for (const float v : a.backbone.blocks[0].weight) CHECK(std::abs(v) <= 1.0f / 3.0f);
}

TEST_CASE("bird forward shape contract at production size") {
  const BirdModel m = init_bird_model(BackboneConfig{{16, 32, 64}}, GeMConfig{}, 397, 1);
  Rng rng(2);
  const int B = 2, mel = 256, frames = 500;
  std::vector<float> segments =
      random_vec(static_cast<std::size_t>(B) * 6 * mel * frames, rng, -40.0, 10.0);
  BirdForwardTrace<float> tr;
  forward_bird(m, std::move(segments), B, 6, mel, frames, tr);
  CHECK(tr.logits.size() == static_cast<std::size_t>(B) * 397);
  for (const float v : tr.logits) CHECK(std::isfinite(v));
}

TEST_CASE("six repeated segments equal the single-segment forward") {
  const BirdModel m = init_bird_model(BackboneConfig{{8, 16}}, GeMConfig{}, 7, 3);
  Rng rng(4);
  const int mel = 32, frames = 24;
  const Mat<float> spec = random_spec(mel, frames, rng);

  std::vector<float> six(static_cast<std::size_t>(6) * mel * frames);
  for (int s = 0; s < 6; ++s) {
    std::copy(spec.data(), spec.data() + spec.size(),
              six.data() + static_cast<std::size_t>(s) * spec.size());
  }
  BirdForwardTrace<float> tr6, tr1;
  forward_bird(m, std::move(six), 1, 6, mel, frames, tr6);
  std::vector<float> one(spec.data(), spec.data() + spec.size());
  forward_bird(m, std::move(one), 1, 1, mel, frames, tr1);
  REQUIRE(tr6.logits.size() == tr1.logits.size());
  for (std::size_t i = 0; i < tr6.logits.size(); ++i) {
    CHECK(tr6.logits[i] == doctest::Approx(tr1.logits[i]).epsilon(1e-5));
  }

  // and forward_bird_infer applies the sigmoid to the same logits
  const std::vector<float> probs = forward_bird_infer(m, spec);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    CHECK(probs[i] == doctest::Approx(kernels::sigmoid(tr1.logits[i])).epsilon(1e-6));
  }
}

TEST_CASE("inference probabilities are in (0,1) and a zero head gives 0.5") {
  BirdModel m = init_bird_model(BackboneConfig{{8}}, GeMConfig{}, 5, 9);
  Rng rng(6);
  const Mat<float> spec = random_spec(16, 20, rng);
  const std::vector<float> probs = forward_bird_infer(m, spec);
  REQUIRE(probs.size() == 5);
  for (const float p : probs) {
    CHECK(p > 0.0f);
    CHECK(p < 1.0f);
  }

  std::fill(m.head_weight.begin(), m.head_weight.end(), 0.0f);
  std::fill(m.head_bias.begin(), m.head_bias.end(), 0.0f);
  for (const float p : forward_bird_infer(m, spec)) CHECK(p == 0.5f);
}

TEST_CASE("too few frames for the downsampling is an error") {
  const BirdModel m = init_bird_model(BackboneConfig{{8, 16, 32}}, GeMConfig{}, 3, 1);
  Rng rng(8);
  const Mat<float> spec = random_spec(32, 3, rng);  // 3 frames can't survive three pools
  CHECK_THROWS_AS(forward_bird_infer(m, spec), DataError);
}

TEST_CASE("binary attention pooling") {
  const BackboneConfig bb{{8, 16}};
  BinaryModel m = init_binary_model(bb, 11);
  Rng rng(12);
  const Mat<float> spec = random_spec(32, 40, rng);

  SUBCASE("output is a probability and weights form a distribution") {
    CHECK(forward_binary(m, spec) > 0.0f);
    CHECK(forward_binary(m, spec) < 1.0f);

    BinaryForwardTrace<float> tr;
    std::vector<float> img(spec.data(), spec.data() + spec.size());
    forward_binary_batch(m, std::move(img), 1, spec.rows(), spec.cols(), tr);
    float sum = 0.0f;
    for (const float a : tr.attn) {
      CHECK(a > 0.0f);
      CHECK(a < 1.0f);
      sum += a;
    }
    CHECK(sum == doctest::Approx(1.0f).epsilon(1e-5));
  }

  SUBCASE("a time-constant feature map gives uniform attention") {
    // zero conv weights with nonzero biases make the features constant
    for (auto& blk : m.backbone.blocks) {
      std::fill(blk.weight.begin(), blk.weight.end(), 0.0f);
      std::fill(blk.bias.begin(), blk.bias.end(), 0.5f);
    }
    BinaryForwardTrace<float> tr;
    std::vector<float> img(spec.data(), spec.data() + spec.size());
    forward_binary_batch(m, std::move(img), 1, spec.rows(), spec.cols(), tr);
    const float uniform = 1.0f / static_cast<float>(tr.attn.size());
    for (const float a : tr.attn) CHECK(a == doctest::Approx(uniform).epsilon(1e-5));
  }

  SUBCASE("permuting time frames permutes weights and keeps the pooled vector") {
    const int C = 4, T = 7;
    Rng r2(77);
    std::vector<float> h = random_vec(static_cast<std::size_t>(C) * T, r2);
    std::vector<float> w = random_vec(C, r2);
    std::vector<float> attn(T), pooled(C);
    attention_pool(h.data(), C, T, w.data(), attn.data(), pooled.data());

    std::vector<int> perm = {3, 0, 6, 1, 5, 2, 4};
    std::vector<float> hp(h.size());
    for (int c = 0; c < C; ++c) {
      for (int t = 0; t < T; ++t) hp[c * T + t] = h[c * T + perm[t]];
    }
    std::vector<float> attn_p(T), pooled_p(C);
    attention_pool(hp.data(), C, T, w.data(), attn_p.data(), pooled_p.data());
    for (int t = 0; t < T; ++t) CHECK(attn_p[t] == doctest::Approx(attn[perm[t]]).epsilon(1e-6));
    for (int c = 0; c < C; ++c) CHECK(pooled_p[c] == doctest::Approx(pooled[c]).epsilon(1e-5));
  }
}

TEST_CASE("all forwards stay finite on random inputs") {
  Rng rng(31);
  const BirdModel bird = init_bird_model(BackboneConfig{{8, 16}}, GeMConfig{}, 11, 5);
  const BinaryModel bin = init_binary_model(BackboneConfig{{8, 16}}, 6);
  for (int trial = 0; trial < 5; ++trial) {
    const int mel = 16 + static_cast<int>(rng.uniform_int(16));
    const int frames = 16 + static_cast<int>(rng.uniform_int(30));
    const Mat<float> spec = random_spec(mel, frames, rng);
    for (const float p : forward_bird_infer(bird, spec)) CHECK(std::isfinite(p));
    CHECK(std::isfinite(forward_binary(bin, spec)));
  }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "birdsed_ckpt_test";
  fs::create_directories(dir);

  GeMConfig gem;
  gem.trainable = true;
  const BirdModel bird = init_bird_model(BackboneConfig{{4, 8}}, gem, 13, 77);
  save_bird_model(dir / "bird.bsm", bird);
  const BirdModel back = load_bird_model(dir / "bird.bsm");
  CHECK(back.n_classes == 13);
  CHECK(back.gem.trainable);
  CHECK(back.gem_p == bird.gem_p);
  CHECK(back.head_weight == bird.head_weight);
  CHECK(back.head_bias == bird.head_bias);
  for (std::size_t i = 0; i < bird.backbone.blocks.size(); ++i) {
    CHECK(back.backbone.blocks[i].weight == bird.backbone.blocks[i].weight);
    CHECK(back.backbone.blocks[i].bias == bird.backbone.blocks[i].bias);
  }

  const BinaryModel bin = init_binary_model(BackboneConfig{{4, 8}}, 78);
  save_binary_model(dir / "bin.bsm", bin);
  const BinaryModel bin_back = load_binary_model(dir / "bin.bsm");
  CHECK(bin_back.attn_weight == bin.attn_weight);
  CHECK(bin_back.head_weight == bin.head_weight);
  CHECK(bin_back.head_bias == bin.head_bias);

  SUBCASE("kind mismatch and truncation are rejected") {
    CHECK_THROWS_AS(load_bird_model(dir / "bin.bsm"), DataError);
    CHECK_THROWS_AS(load_binary_model(dir / "bird.bsm"), DataError);

    std::ifstream in(dir / "bird.bsm", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() / 2);
    std::ofstream out(dir / "cut.bsm", std::ios::binary);
    out << bytes;
    out.close();
    CHECK_THROWS_AS(load_bird_model(dir / "cut.bsm"), DataError);
  }
}
