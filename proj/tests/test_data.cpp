#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "sdprop/data.hpp"
#include "sdprop/error.hpp"

using namespace sdprop;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / "sdprop-data-test";
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
  return s;
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void be32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>((v >> 24) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>(v & 0xff));
}

}  // namespace

TEST_CASE("idx files decode, scale to [0,1], and re-encode byte-for-byte") {
  TempDir tmp;
  std::string images;
  be32(images, 2051);
  be32(images, 2);
  be32(images, 2);
  be32(images, 2);
  for (int b : {0, 255, 128, 64, 7, 9, 11, 13}) {
    images.push_back(static_cast<char>(b));
  }
  std::string labels;
  be32(labels, 2049);
  be32(labels, 2);
  labels.push_back(static_cast<char>(3));
  labels.push_back(static_cast<char>(1));

  const auto img = tmp.path / "imgs";
  const auto lbl = tmp.path / "lbls";
  spit(img, images);
  spit(lbl, labels);

  const Dataset ds = load_idx(img.string(), lbl.string());
  CHECK(ds.rows() == 2);
  CHECK(ds.cols() == 4);
  CHECK(ds.features(0, 0) == 0.0);
  CHECK(ds.features(0, 1) == 1.0);
  CHECK(ds.features(0, 2) == 128.0 / 255.0);
  CHECK(ds.features(1, 3) == 13.0 / 255.0);
  CHECK(ds.labels == std::vector<int>({3, 1}));
  CHECK(ds.num_classes == 4);  // one past the largest label seen

  const auto img2 = tmp.path / "imgs2";
  const auto lbl2 = tmp.path / "lbls2";
  save_idx(ds, img2.string(), lbl2.string(), 2);
  CHECK(slurp(img2) == images);
  CHECK(slurp(lbl2) == labels);
}

TEST_CASE("malformed idx input names what was expected and found") {
  TempDir tmp;
  std::string labels;
  be32(labels, 2049);
  be32(labels, 1);
  labels.push_back(static_cast<char>(0));
  const auto lbl = tmp.path / "l";
  spit(lbl, labels);

  // A labels file where image data should be: wrong magic.
  try {
    load_idx(lbl.string(), lbl.string());
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(!e.expected().empty());
    CHECK(!e.found().empty());
  }

  // Truncated header.
  const auto stub = tmp.path / "stub";
  spit(stub, std::string("\x00\x00\x08", 3));
  CHECK_THROWS_AS(load_idx(stub.string(), lbl.string()), FormatError);
}

TEST_CASE("save_idx validates its inputs") {
  Dataset ds;
  ds.features = Tensor::Zero(2, 6);
  ds.labels = {0, 1};
  ds.num_classes = 2;
  TempDir tmp;
  // 6 pixels cannot form rows of 4.
  CHECK_THROWS_AS(
      save_idx(ds, (tmp.path / "i").string(), (tmp.path / "l").string(), 4),
      DimensionError);
  ds.labels = {0, 300};
  CHECK_THROWS_AS(
      save_idx(ds, (tmp.path / "i").string(), (tmp.path / "l").string(), 0),
      ConfigError);
}

TEST_CASE("synthetic data is deterministic, bounded, and balanced") {
  const Dataset a = synthetic_classification(60, 10, 3, 3.0, 99);
  const Dataset b = synthetic_classification(60, 10, 3, 3.0, 99);
  const Dataset c = synthetic_classification(60, 10, 3, 3.0, 100);

  CHECK(a.rows() == 60);
  CHECK(a.cols() == 10);
  CHECK(a.num_classes == 3);
  CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.features - c.features).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.features.minCoeff() >= 0.0);
  CHECK(a.features.maxCoeff() <= 1.0);

  // Labels cycle through the classes, so counts differ by at most one.
  std::vector<int> counts(3, 0);
  for (int l : a.labels) counts[static_cast<std::size_t>(l)]++;
  CHECK(counts == std::vector<int>({20, 20, 20}));
}

TEST_CASE("take_prefix keeps the leading rows") {
  const Dataset a = synthetic_classification(20, 4, 2, 3.0, 7);
  const Dataset head = take_prefix(a, 5);
  CHECK(head.rows() == 5);
  CHECK((head.features - a.features.topRows(5)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(head.num_classes == a.num_classes);
}

TEST_CASE("epoch permutations cover every index exactly once") {
  BatchSampler sampler(4, 2024);
  const std::vector<int> perm = sampler.epoch_permutation(11, 0);
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> iota(11);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(sorted == iota);

  // Same epoch twice: identical. Different epoch: (overwhelmingly) not.
  CHECK(sampler.epoch_permutation(11, 0) == perm);
  CHECK(sampler.epoch_permutation(11, 1) != perm);

  // A second sampler with the same seed shuffles identically.
  BatchSampler twin(4, 2024);
  CHECK(twin.epoch_permutation(11, 3) == sampler.epoch_permutation(11, 3));
}

TEST_CASE("batches partition an epoch, short tail included") {
  BatchSampler sampler(4, 5);
  CHECK(sampler.num_batches(11) == 3);
  std::set<int> seen;
  std::size_t total = 0;
  for (int s = 0; s < 3; ++s) {
    const auto idx = sampler.batch_indices(11, 2, s);
    total += idx.size();
    seen.insert(idx.begin(), idx.end());
    if (s < 2) CHECK(idx.size() == 4);
    if (s == 2) CHECK(idx.size() == 3);
  }
  CHECK(total == 11);
  CHECK(seen.size() == 11);

  CHECK_THROWS_AS(sampler.batch_indices(11, 0, 3), ConfigError);
  CHECK_THROWS_AS(sampler.batch_indices(2, 0, 0), ConfigError);  // batch > n
  CHECK_THROWS_AS(BatchSampler(0, 1), ConfigError);
}
