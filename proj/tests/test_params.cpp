#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dagnn/params.hpp"

using namespace dagnn::num;

namespace {
std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("adam leaves parameters alone on zero gradient", "[params]") {
  ParamStore<double> store;
  Rng rng(1);
  store.create_gaussian("w", 3, 3, 1.0, rng);
  const Mat<double> before = store.value("w");
  store.zero_grad();
  store.adam_step({});
  REQUIRE(store.value("w").isApprox(before));
}

TEST_CASE("adam first step equals -lr on unit gradient", "[params]") {
  ParamStore<double> store;
  store.create("w", 1, 1);
  store.grad("w")(0, 0) = 1.0;
  AdamConfig cfg;
  cfg.lr = 0.1;
  store.adam_step(cfg);
  // bias-corrected: mhat = 1, vhat = 1, delta = -lr / (1 + eps)
  REQUIRE(store.value("w")(0, 0) == Catch::Approx(-0.1).margin(1e-8));
}

TEST_CASE("adam converges on a quadratic", "[params]") {
  ParamStore<double> store;
  store.create("w", 1, 1);
  AdamConfig cfg;
  cfg.lr = 0.1;
  for (int i = 0; i < 200; ++i) {
    store.zero_grad();
    store.grad("w")(0, 0) = 2.0 * (store.value("w")(0, 0) - 3.0);
    store.adam_step(cfg);
  }
  REQUIRE(std::abs(store.value("w")(0, 0) - 3.0) < 0.1);
}

TEST_CASE("buffers are not touched by adam", "[params]") {
  ParamStore<double> store;
  Rng rng(2);
  store.create_gaussian("buf", 2, 2, 1.0, rng, /*trainable=*/false);
  const Mat<double> before = store.value("buf");
  store.grad("buf").setOnes();
  store.adam_step({});
  REQUIRE(store.value("buf").isApprox(before));
}

TEST_CASE("checkpoint round-trip is bit-exact", "[params]") {
  ParamStore<double> store;
  Rng rng(3);
  store.create_gaussian("a.weight", 4, 7, 1.37, rng);
  store.create_gaussian("b.bias", 1, 7, 0.01, rng);
  store.create_gaussian("z.buffer", 3, 3, 2.0, rng, false);

  const std::string path = temp_path("dagnn_ckpt_test.bin");
  store.save(path);
  const auto loaded = ParamStore<double>::load(path);

  REQUIRE(loaded.size() == store.size());
  for (const auto& name : store.names()) {
    REQUIRE(loaded.has(name));
    REQUIRE(loaded.trainable(name) == store.trainable(name));
    const auto& a = store.value(name);
    const auto& b = loaded.value(name);
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    for (Index r = 0; r < a.rows(); ++r)
      for (Index c = 0; c < a.cols(); ++c)
        REQUIRE(std::memcmp(&a(r, c), &b(r, c), sizeof(double)) == 0);
  }

  // saving the loaded store reproduces the file byte for byte
  const std::string path2 = temp_path("dagnn_ckpt_test2.bin");
  loaded.save(path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  REQUIRE(s1 == s2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("load rejects corrupt files", "[params]") {
  const std::string path = temp_path("dagnn_ckpt_bad.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint";
  }
  REQUIRE_THROWS_AS(ParamStore<double>::load(path), std::invalid_argument);
  std::remove(path.c_str());
}

TEST_CASE("duplicate parameter names are rejected", "[params]") {
  ParamStore<double> store;
  store.create("w", 1, 1);
  REQUIRE_THROWS_AS(store.create("w", 2, 2), std::invalid_argument);
}
