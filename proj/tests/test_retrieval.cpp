#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <vector>

#include "crossloc/errors.hpp"
#include "crossloc/retrieval.hpp"
#include "crossloc/rng.hpp"
#include "test_util.hpp"

using crossloc::ConfigError;
using crossloc::DataError;
using crossloc::Embedder;
using crossloc::EmbeddingIndex;
using crossloc::EncoderConfig;
using crossloc::Image;
using crossloc::IndexEntry;
using crossloc::LoadedSample;
using crossloc::Modality;
using crossloc::PointCloud;
using crossloc::QueryHit;
using crossloc::QueryResult;
using crossloc::Rng;
using crossloc::diff::ParamStore;
using testutil::TempDir;

namespace {

IndexEntry make_entry(std::uint64_t id, std::vector<double> ev) {
  IndexEntry e;
  e.sample_id = id;
  e.pose = crossloc::make_pose(static_cast<double>(id), 0.0, 0.0, 0.0, 0.0,
                               0.0, id);
  e.ev = std::move(ev);
  return e;
}

std::vector<IndexEntry> random_entries(std::size_t n, std::size_t dim,
                                       Rng& rng) {
  std::vector<IndexEntry> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> ev(dim);
    for (double& v : ev) v = rng.normal();
    entries.push_back(make_entry(i, std::move(ev)));
  }
  return entries;
}

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Oracle: full scan sorted by (distance, sample_id).
QueryResult brute_force(const std::vector<IndexEntry>& entries,
                        const std::vector<double>& query, std::size_t k) {
  std::vector<std::pair<double, const IndexEntry*>> scored;
  scored.reserve(entries.size());
  for (const IndexEntry& e : entries) {
    scored.emplace_back(euclid(e.ev, query), &e);
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first < b.first;
              return a.second->sample_id < b.second->sample_id;
            });
  QueryResult out;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
    QueryHit hit;
    hit.sample_id = scored[i].second->sample_id;
    hit.pose = scored[i].second->pose;
    hit.modality = scored[i].second->modality;
    hit.distance = scored[i].first;
    out.push_back(hit);
  }
  return out;
}

bool same_ranking(const QueryResult& a, const QueryResult& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].sample_id != b[i].sample_id) return false;
    if (a[i].distance != b[i].distance) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("index rejects empty and inconsistent input") {
  CHECK_THROWS_AS(EmbeddingIndex::build({}), DataError);
  std::vector<IndexEntry> mixed;
  mixed.push_back(make_entry(0, {1.0, 2.0}));
  mixed.push_back(make_entry(1, {1.0, 2.0, 3.0}));
  CHECK_THROWS_AS(EmbeddingIndex::build(std::move(mixed)), DataError);
}

TEST_CASE("knn validates its arguments") {
  std::vector<IndexEntry> entries;
  entries.push_back(make_entry(0, {0.0, 0.0}));
  const EmbeddingIndex index = EmbeddingIndex::build(std::move(entries));
  CHECK_THROWS_AS(index.knn({0.0, 0.0}, 0), ConfigError);
  CHECK_THROWS_AS(index.knn({0.0}, 1), ConfigError);
}

TEST_CASE("nearest neighbor on a hand-built line") {
  std::vector<IndexEntry> entries;
  for (std::uint64_t i = 0; i < 5; ++i) {
    entries.push_back(make_entry(i, {static_cast<double>(i) * 2.0}));
  }
  const EmbeddingIndex index = EmbeddingIndex::build(std::move(entries));
  const QueryResult hits = index.knn({4.9}, 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].sample_id == 2);  // ev 4.0, distance 0.9
  CHECK(hits[1].sample_id == 3);  // ev 6.0, distance 1.1
  CHECK(hits[2].sample_id == 1);  // ev 2.0, distance 2.9
  CHECK(hits[0].distance == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("ties break toward the smaller sample id") {
  std::vector<IndexEntry> entries;
  entries.push_back(make_entry(7, {1.0, 0.0}));
  entries.push_back(make_entry(3, {1.0, 0.0}));  // identical EV
  entries.push_back(make_entry(5, {-1.0, 0.0}));  // same distance from origin
  const EmbeddingIndex index = EmbeddingIndex::build(std::move(entries));
  const QueryResult hits = index.knn({0.0, 0.0}, 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].sample_id == 3);
  CHECK(hits[1].sample_id == 5);
  CHECK(hits[2].sample_id == 7);
}

TEST_CASE("k beyond the index size returns everything") {
  Rng rng(80);
  const EmbeddingIndex index = EmbeddingIndex::build(random_entries(6, 3, rng));
  std::vector<double> q = {0.0, 0.0, 0.0};
  CHECK(index.knn(q, 100).size() == 6);
  CHECK(index.knn(q, 6).size() == 6);
  CHECK(index.knn(q, 2).size() == 2);
}

TEST_CASE("kd-tree results equal brute force on random instances") {
  Rng rng(81);
  for (const std::size_t dim : {2ul, 8ul, 16ul}) {
    const std::vector<IndexEntry> entries = random_entries(200, dim, rng);
    const EmbeddingIndex index = EmbeddingIndex::build(entries);
    for (int q = 0; q < 20; ++q) {
      std::vector<double> query(dim);
      for (double& v : query) v = rng.normal();
      for (const std::size_t k : {1ul, 5ul, 32ul}) {
        CHECK(same_ranking(index.knn(query, k),
                           brute_force(entries, query, k)));
      }
    }
  }
}

TEST_CASE("branch and bound prunes most of a clustered index") {
  // Two well-separated blobs: a query inside one blob should not need to
  // visit much of the other.
  Rng rng(82);
  std::vector<IndexEntry> entries;
  for (std::size_t i = 0; i < 512; ++i) {
    std::vector<double> ev(8);
    const double center = i < 256 ? 0.0 : 100.0;
    for (double& v : ev) v = center + 0.1 * rng.normal();
    entries.push_back(make_entry(i, std::move(ev)));
  }
  const EmbeddingIndex index = EmbeddingIndex::build(std::move(entries));
  std::vector<double> query(8, 0.0);
  std::size_t visited = 0;
  const QueryResult hits = index.knn(query, 5, &visited);
  REQUIRE(hits.size() == 5);
  for (const QueryHit& hit : hits) CHECK(hit.sample_id < 256);
  CHECK(visited < 512);
  CHECK(visited >= 5);
}

TEST_CASE("duplicate points all surface in order") {
  std::vector<IndexEntry> entries;
  for (std::uint64_t i = 0; i < 10; ++i) {
    entries.push_back(make_entry(i, {1.0, 1.0}));
  }
  const EmbeddingIndex index = EmbeddingIndex::build(std::move(entries));
  const QueryResult hits = index.knn({1.0, 1.0}, 10);
  REQUIRE(hits.size() == 10);
  for (std::uint64_t i = 0; i < 10; ++i) {
    CHECK(hits[i].sample_id == i);
    CHECK(hits[i].distance == 0.0);
  }
}

TEST_CASE("queries are euclidean regardless of any training distance") {
  // A cosine-near but euclidean-far entry must lose to a euclidean-near one.
  std::vector<IndexEntry> entries;
  entries.push_back(make_entry(0, {10.0, 0.0}));  // same direction, far
  entries.push_back(make_entry(1, {0.9, 0.5}));   // different direction, near
  const EmbeddingIndex index = EmbeddingIndex::build(std::move(entries));
  const QueryResult hits = index.knn({1.0, 0.0}, 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].sample_id == 1);
}

TEST_CASE("embed samples preserves order and tags the modality") {
  EncoderConfig cfg;
  cfg.image_width = 16;
  cfg.image_height = 16;
  cfg.conv_channels = 2;
  cfg.feature_dim = 3;
  cfg.clusters = 2;
  cfg.mlp_hidden = 3;
  cfg.n_pts = 8;
  ParamStore params;
  Rng rng(83);
  crossloc::init_params(cfg, params, rng);
  const Embedder embedder(cfg);
  std::vector<LoadedSample> samples(3);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].meta.sample_id = 100 + i;
    samples[i].meta.pose = crossloc::make_pose(5.0 * i, 0, 0, 0, 0, 0, i);
    samples[i].image = Image(16, 16);
    for (double& v : samples[i].image.pixels) v = rng.uniform(0.0, 1.0);
    for (int p = 0; p < 12; ++p) {
      samples[i].cloud.points.push_back(
          {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(0.0, 4.0)});
    }
  }
  const std::vector<IndexEntry> img_entries =
      crossloc::embed_samples(samples, Modality::kImage, embedder, params);
  const std::vector<IndexEntry> cld_entries =
      crossloc::embed_samples(samples, Modality::kCloud, embedder, params);
  REQUIRE(img_entries.size() == 3);
  REQUIRE(cld_entries.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(img_entries[i].sample_id == 100 + i);
    CHECK(img_entries[i].modality == Modality::kImage);
    CHECK(cld_entries[i].modality == Modality::kCloud);
    CHECK(img_entries[i].ev.size() ==
          static_cast<std::size_t>(crossloc::ev_length(cfg)));
    CHECK(img_entries[i].ev != cld_entries[i].ev);
    CHECK(img_entries[i].pose.x == samples[i].meta.pose.x);
  }
  // Self-query: the sample's own embedding is its nearest neighbor.
  const EmbeddingIndex index = EmbeddingIndex::build(img_entries);
  const QueryResult hits = index.knn(img_entries[1].ev, 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].sample_id == 101);
  CHECK(hits[0].distance == 0.0);

  // The four-pairing entry point agrees with a manual embed-and-search.
  const QueryResult cross = crossloc::cross_modal_query(
      samples, samples[1], Modality::kImage, Modality::kImage, embedder,
      params, 1);
  REQUIRE(cross.size() == 1);
  CHECK(cross[0].sample_id == 101);
  const QueryResult c2 = crossloc::cross_modal_query(
      samples, samples[1], Modality::kCloud, Modality::kImage, embedder,
      params, 2);
  CHECK(c2.size() == 2);
  CHECK(c2[0].modality == Modality::kCloud);
}

TEST_CASE("evdb round trip preserves every field bit for bit") {
  Rng rng(84);
  std::vector<IndexEntry> entries = random_entries(5, 4, rng);
  entries[2].modality = Modality::kCloud;
  entries[2].pose = crossloc::make_pose(1.25, -2.5, 0.75, 0.5, -0.25, 0.125, 9);
  // EVDB stores f32 components; write f32-representable values so the round
  // trip is exact.
  for (IndexEntry& e : entries) {
    for (double& v : e.ev) v = static_cast<double>(static_cast<float>(v));
  }
  TempDir dir;
  const std::string path = dir.str("test.evdb");
  crossloc::write_evdb(path, entries);
  const std::vector<IndexEntry> loaded = crossloc::read_evdb(path);
  REQUIRE(loaded.size() == entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CHECK(loaded[i].sample_id == entries[i].sample_id);
    CHECK(loaded[i].modality == entries[i].modality);
    CHECK(loaded[i].pose.x == entries[i].pose.x);
    CHECK(loaded[i].pose.y == entries[i].pose.y);
    CHECK(loaded[i].pose.z == entries[i].pose.z);
    CHECK(loaded[i].pose.yaw == entries[i].pose.yaw);
    CHECK(loaded[i].pose.pitch == entries[i].pose.pitch);
    CHECK(loaded[i].pose.roll == entries[i].pose.roll);
    CHECK(loaded[i].ev == entries[i].ev);
  }
}

TEST_CASE("evdb rejects corrupt files") {
  Rng rng(85);
  const std::vector<IndexEntry> entries = random_entries(3, 4, rng);
  TempDir dir;
  const std::string path = dir.str("test.evdb");
  crossloc::write_evdb(path, entries);
  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  in.close();
  {
    std::ofstream out(dir.str("magic.evdb"), std::ios::binary);
    std::vector<char> bad = bytes;
    bad[0] = 'Q';
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_AS(crossloc::read_evdb(dir.str("magic.evdb")), DataError);
  {
    std::ofstream out(dir.str("short.evdb"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
  }
  CHECK_THROWS_AS(crossloc::read_evdb(dir.str("short.evdb")), DataError);
  CHECK_THROWS_AS(crossloc::read_evdb(dir.str("absent.evdb")), DataError);
}

TEST_CASE("evdb rejects inconsistent entry widths on write") {
  std::vector<IndexEntry> entries;
  entries.push_back(make_entry(0, {1.0, 2.0}));
  entries.push_back(make_entry(1, {1.0}));
  TempDir dir;
  CHECK_THROWS_AS(crossloc::write_evdb(dir.str("bad.evdb"), entries), DataError);
}

}  // TEST_SUITE
