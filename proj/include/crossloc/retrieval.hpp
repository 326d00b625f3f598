#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crossloc/dataset.hpp"
#include "crossloc/encoders.hpp"
#include "crossloc/geometry.hpp"

namespace crossloc {

struct IndexEntry {
  std::uint64_t sample_id = 0;
  Pose pose;
  Modality modality = Modality::kImage;
  std::vector<double> ev;
};

struct QueryHit {
  std::uint64_t sample_id = 0;
  Pose pose;
  Modality modality = Modality::kImage;
  double distance = 0.0;
};

// Ranked ascending by (distance, sample_id), length min(k, index size).
using QueryResult = std::vector<QueryHit>;

// Immutable exact nearest-neighbor index over EV space: a median-split
// KD-tree splitting each node on its widest-spread dimension. Queries are
// branch-and-bound and always equal a brute-force scan, with ties broken by
// sample_id ascending.
class EmbeddingIndex {
 public:
  // Throws DataError on an empty list or mixed dimensions.
  static EmbeddingIndex build(std::vector<IndexEntry> entries);

  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const { return dim_; }
  const IndexEntry& entry(std::size_t i) const { return entries_[i]; }
  const std::vector<IndexEntry>& entries() const { return entries_; }

  // Exact k nearest entries by Euclidean EV distance. visited, when given,
  // receives the number of entries whose distance was computed. Throws
  // ConfigError for k < 1 or a query of the wrong dimension.
  QueryResult knn(const std::vector<double>& query, std::size_t k,
                  std::size_t* visited = nullptr) const;

 private:
  struct KdNode {
    std::size_t split_dim = 0;
    double split_value = 0.0;
    int left = -1;
    int right = -1;
    std::size_t begin = 0, end = 0;  // leaf range into order_
    bool leaf = false;
  };

  int build_node(std::size_t begin, std::size_t end);

  std::size_t dim_ = 0;
  std::vector<IndexEntry> entries_;
  std::vector<std::size_t> order_;
  std::vector<KdNode> nodes_;
  int root_ = -1;
};

// Embeds every loaded sample of a run with the encoder of the requested
// database modality and returns index entries in sample order.
std::vector<IndexEntry> embed_samples(const std::vector<LoadedSample>& samples,
                                      Modality modality, const Embedder& embedder,
                                      const diff::ParamStore& params);

// Embeds the database samples with db_modality and the query sample with
// query_modality, then runs an exact knn. Realizes all four pairings
// (2D-to-2D, 2D-to-3D, 3D-to-2D, 3D-to-3D).
QueryResult cross_modal_query(const std::vector<LoadedSample>& db_samples,
                              const LoadedSample& query, Modality db_modality,
                              Modality query_modality, const Embedder& embedder,
                              const diff::ParamStore& params, std::size_t k);

// Embedding database file: magic "EVDB", version byte 1, little-endian
// u32 K and u32 count, then per entry u64 sample_id, 6 x f64 pose fields
// (x, y, z, yaw, pitch, roll), u8 modality, K x f32 EV. Round trips are bit
// exact. read_evdb throws DataError on bad magic or truncation.
void write_evdb(const std::string& path, const std::vector<IndexEntry>& entries);
std::vector<IndexEntry> read_evdb(const std::string& path);

}  // namespace crossloc
