#include <doctest.h>
#include <torch/torch.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hallab/archive.hpp"

using hallab::Archive;

namespace {
std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("archive round-trips tensors bit-exactly") {
  Archive a;
  torch::manual_seed(1);
  torch::Tensor f32 = torch::randn({3, 4, 5});
  torch::Tensor f64 = torch::randn({7}, torch::kFloat64);
  torch::Tensor i64 = torch::randint(-1000, 1000, {6}, torch::kInt64);
  torch::Tensor u8 = torch::randint(0, 256, {2, 2}, torch::kUInt8);
  a.put("f32", f32);
  a.put("f64", f64);
  a.put("i64", i64);
  a.put("u8", u8);
  a.put_string("task", "navigate");
  const std::string path = tmp_path("hallab_archive_test.bin");
  a.save(path);
  Archive b = Archive::load(path);
  CHECK(torch::equal(b.tensor("f32"), f32));
  CHECK(torch::equal(b.tensor("f64"), f64));
  CHECK(torch::equal(b.tensor("i64"), i64));
  CHECK(torch::equal(b.tensor("u8"), u8));
  CHECK(b.str("task") == "navigate");
  CHECK(b.tensor("f32").dtype() == torch::kFloat32);
  std::remove(path.c_str());
}

TEST_CASE("archive missing names and bad files throw") {
  Archive a;
  CHECK_FALSE(a.has("x"));
  CHECK_THROWS(a.tensor("x"));
  CHECK_THROWS(a.str("x"));
  CHECK_THROWS(Archive::load(tmp_path("definitely_missing.bin")));
}

TEST_CASE("saving twice produces identical bytes") {
  Archive a;
  a.put("t", torch::arange(10, torch::kFloat32));
  a.put_string("k", "v");
  const std::string p1 = tmp_path("hallab_arch_a.bin");
  const std::string p2 = tmp_path("hallab_arch_b.bin");
  a.save(p1);
  a.save(p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
  CHECK(!s1.empty());
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}
