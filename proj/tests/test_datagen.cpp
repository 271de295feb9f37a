#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "fglab/datagen.hpp"
#include "fglab/error.hpp"
#include "support.hpp"

using namespace fglab;
namespace fs = std::filesystem;

namespace {

void put32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>((v >> s) & 0xff));
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

struct IdxFixture {
  fs::path dir = fs::temp_directory_path() / "fglab_idx_fixture";
  fs::path images = dir / "images.idx3";
  fs::path labels = dir / "labels.idx1";

  // Three 2x2 images with labels 7, 0, 9.
  IdxFixture(std::uint32_t image_magic = 0x803, std::uint32_t label_count = 3, std::size_t drop = 0) {
    fs::create_directories(dir);
    std::vector<unsigned char> img;
    put32(img, image_magic);
    put32(img, 3);
    put32(img, 2);
    put32(img, 2);
    for (int i = 0; i < 12; ++i) img.push_back(static_cast<unsigned char>(i * 20));
    img.resize(img.size() - drop);
    write_bytes(images, img);
    std::vector<unsigned char> lab;
    put32(lab, 0x801);
    put32(lab, label_count);
    for (unsigned char l : {7, 0, 9}) lab.push_back(l);
    write_bytes(labels, lab);
  }
};

}  // namespace

TEST_SUITE("datagen") {
  TEST_CASE("power-law sizes respect the clamp") {
    RngStream r(1, 1);
    PowerLawOptions o;
    const auto s = power_law_sizes(500, r, o);
    std::size_t above_scale = 0;
    for (auto v : s) {
      CHECK(v >= o.lo);
      CHECK(v <= o.hi);
      above_scale += v > 2 * static_cast<std::size_t>(o.scale);
    }
    CHECK(above_scale > 0);  // heavy tail is present
    CHECK_THROWS_AS(power_law_sizes(3, r, PowerLawOptions{1.5, 50, 20, 10}), InvalidArgument);
  }

  TEST_CASE("train/test split keeps at least one example on each side") {
    CHECK(test_count_for(2) == 1);
    CHECK(test_count_for(10) == 1);
    CHECK(test_count_for(100) == 10);
    CHECK(test_count_for(1000) == 100);
    CHECK_THROWS_AS(test_count_for(1), InvalidArgument);
  }

  TEST_CASE("synthetic generator shapes and determinism") {
    RngStream a(3, 3), b(3, 3);
    const auto d1 = generate_synthetic(1.0, 1.0, 12, a);
    const auto d2 = generate_synthetic(1.0, 1.0, 12, b);
    REQUIRE(d1.num_clients() == 12);
    CHECK(d1.input_dim == 60);
    CHECK(d1.num_classes == 10);
    for (std::size_t k = 0; k < 12; ++k) {
      CHECK(d1.shards[k].train.features == d2.shards[k].train.features);
      CHECK(d1.shards[k].client_id == static_cast<int>(k));
      CHECK(d1.shards[k].test.size() >= 1);
      for (int y : d1.shards[k].train.labels) CHECK((y >= 0 && y < 10));
    }
  }

  TEST_CASE("digit surrogate") {
    RngStream r(4, 4);
    const auto pool = generate_digits(20, r);
    CHECK(pool.features.rows() == 200);
    CHECK(pool.features.cols() == 64);
    std::vector<int> counts(10, 0);
    for (int y : pool.labels) ++counts[static_cast<std::size_t>(y)];
    for (int c : counts) CHECK(c == 20);
    for (double v : pool.features.data()) CHECK((v >= 0.0 && v <= 1.0));
  }

  TEST_CASE("label-limited partition") {
    RngStream r(5, 5);
    const auto pool = generate_digits(200, r);
    for (std::size_t cpc : {1u, 2u, 5u, 10u}) {
      RngStream pr(6, cpc);
      const auto data = partition_noniid(pool.features, pool.labels, 40, cpc, pr);
      REQUIRE(data.num_clients() == 40);
      std::size_t used = 0;
      for (const auto& s : data.shards) {
        std::set<int> classes(s.train.labels.begin(), s.train.labels.end());
        classes.insert(s.test.labels.begin(), s.test.labels.end());
        CHECK(classes.size() <= cpc);
        CHECK(s.train.size() >= 1);
        CHECK(s.test.size() >= 1);
        used += s.train.size() + s.test.size();
      }
      CHECK(used <= pool.labels.size());
    }
    RngStream pr(7, 7);
    CHECK_THROWS_AS(partition_noniid(pool.features, pool.labels, 4, 11, pr), InvalidArgument);
    CHECK_THROWS_AS(partition_noniid(pool.features, pool.labels, 5000, 1, pr), InvalidArgument);
  }

  TEST_CASE("label skew shrinks as classes per client grow") {
    const auto one = testsupport::small_digits(30, 1, 8, 200);
    const auto five = testsupport::small_digits(30, 5, 8, 200);
    const auto all = testsupport::small_digits(30, 10, 8, 200);
    CHECK(mean_label_tv_distance(one) > mean_label_tv_distance(five));
    CHECK(mean_label_tv_distance(five) > mean_label_tv_distance(all));
  }

  TEST_CASE("planted populations rotate labels") {
    auto data = testsupport::small_digits(6, 10, 9);
    const auto before = data;
    plant_populations(data, 2);
    for (std::size_t k = 0; k < 6; ++k)
      for (std::size_t i = 0; i < data.shards[k].train.size(); ++i) {
        const int shift = k % 2 == 0 ? 0 : 5;
        CHECK(data.shards[k].train.labels[i] == (before.shards[k].train.labels[i] + shift) % 10);
      }
    CHECK(population_of(3, 2) == 1);
    CHECK(population_of(3, 1) == 0);
  }

  TEST_CASE("IDX ingestion") {
    {
      IdxFixture f;
      const auto pool = load_idx(f.images, f.labels);
      REQUIRE(pool.features.rows() == 3);
      CHECK(pool.features.cols() == 4);
      CHECK(pool.labels == std::vector<int>{7, 0, 9});
      CHECK(pool.features(1, 0) == doctest::Approx(80.0 / 255.0));
    }
    {
      IdxFixture f(0x802);
      CHECK_THROWS_AS(load_idx(f.images, f.labels), IdxError);
      try {
        load_idx(f.images, f.labels);
      } catch (const IdxError& e) {
        CHECK(e.idx_kind() == IdxError::Kind::MagicMismatch);
      }
    }
    {
      IdxFixture f(0x803, 3, 5);
      try {
        load_idx(f.images, f.labels);
        FAIL("expected truncation");
      } catch (const IdxError& e) {
        CHECK(e.idx_kind() == IdxError::Kind::Truncated);
      }
    }
    {
      IdxFixture f(0x803, 2);
      try {
        load_idx(f.images, f.labels);
        FAIL("expected count mismatch");
      } catch (const IdxError& e) {
        CHECK(e.idx_kind() == IdxError::Kind::CountMismatch);
      }
    }
    try {
      load_idx("/nonexistent/a", "/nonexistent/b");
      FAIL("expected io error");
    } catch (const IdxError& e) {
      CHECK(e.idx_kind() == IdxError::Kind::Io);
    }
  }

  TEST_CASE("dataset cache round trip is exact") {
    RngStream r(10, 10);
    const auto data = generate_synthetic(0.5, 0.5, 5, r);
    const fs::path p = fs::temp_directory_path() / "fglab_cache_test.jsonl";
    write_dataset_jsonl(data, p);
    const auto back = read_dataset_jsonl(p);
    REQUIRE(back.num_clients() == data.num_clients());
    CHECK(back.num_classes == data.num_classes);
    CHECK(back.input_dim == data.input_dim);
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(back.shards[k].train.features == data.shards[k].train.features);
      CHECK(back.shards[k].test.labels == data.shards[k].test.labels);
    }
  }
}
