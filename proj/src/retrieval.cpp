#include "crossloc/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <queue>

#include "binary_io.hpp"
#include "crossloc/errors.hpp"

namespace crossloc {

namespace {

constexpr std::size_t kLeafSize = 8;

}  // namespace

EmbeddingIndex EmbeddingIndex::build(std::vector<IndexEntry> entries) {
  if (entries.empty()) {
    throw DataError("cannot build an index from zero embeddings");
  }
  EmbeddingIndex index;
  index.dim_ = entries.front().ev.size();
  if (index.dim_ == 0) throw DataError("index entries must have non-empty EVs");
  for (const IndexEntry& e : entries) {
    if (e.ev.size() != index.dim_) {
      throw DataError("index EV dimension mismatch: " +
                      std::to_string(e.ev.size()) + " vs " +
                      std::to_string(index.dim_));
    }
  }
  index.entries_ = std::move(entries);
  index.order_.resize(index.entries_.size());
  for (std::size_t i = 0; i < index.order_.size(); ++i) index.order_[i] = i;
  index.root_ = index.build_node(0, index.order_.size());
  return index;
}

int EmbeddingIndex::build_node(std::size_t begin, std::size_t end) {
  KdNode node;
  if (end - begin <= kLeafSize) {
    node.leaf = true;
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size() - 1);
  }
  // Split on the widest-spread dimension of this node's entries.
  std::size_t best_dim = 0;
  double best_spread = -1.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    double lo = entries_[order_[begin]].ev[d];
    double hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      const double v = entries_[order_[i]].ev[d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = d;
    }
  }
  if (best_spread <= 0.0) {
    // All entries identical; recursing would never terminate.
    node.leaf = true;
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size() - 1);
  }
  std::sort(order_.begin() + begin, order_.begin() + end,
            [&](std::size_t a, std::size_t b) {
              const double va = entries_[a].ev[best_dim];
              const double vb = entries_[b].ev[best_dim];
              if (va != vb) return va < vb;
              return entries_[a].sample_id < entries_[b].sample_id;
            });
  const std::size_t mid = begin + (end - begin) / 2;
  node.split_dim = best_dim;
  node.split_value = entries_[order_[mid]].ev[best_dim];
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build_node(begin, mid);
  const int right = build_node(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

namespace {

struct Cand {
  double d2 = 0.0;
  std::uint64_t id = 0;
  std::size_t idx = 0;
};

// Orders by goodness, so a max-heap ordered by this keeps the worst on top.
struct Better {
  bool operator()(const Cand& a, const Cand& b) const {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    return a.id < b.id;
  }
};

using CandHeap = std::priority_queue<Cand, std::vector<Cand>, Better>;

bool better_than(const Cand& a, const Cand& b) { return Better{}(a, b); }

}  // namespace

QueryResult EmbeddingIndex::knn(const std::vector<double>& query, std::size_t k,
                                std::size_t* visited) const {
  if (k < 1) throw ConfigError("knn requires k >= 1");
  if (query.size() != dim_) {
    throw ConfigError("query dimension " + std::to_string(query.size()) +
                      " does not match index dimension " + std::to_string(dim_));
  }
  if (visited != nullptr) *visited = 0;
  CandHeap heap;

  auto scan_leaf = [&](const KdNode& node) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const IndexEntry& e = entries_[order_[i]];
      double d2 = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) {
        const double diff = query[d] - e.ev[d];
        d2 += diff * diff;
      }
      if (visited != nullptr) ++(*visited);
      const Cand c{d2, e.sample_id, order_[i]};
      if (heap.size() < k) {
        heap.push(c);
      } else if (better_than(c, heap.top())) {
        heap.pop();
        heap.push(c);
      }
    }
  };

  // Branch and bound: descend to the near child first, then visit the far
  // child unless its slab distance strictly exceeds the current worst.
  auto visit = [&](auto&& self, int node_id) -> void {
    const KdNode& node = nodes_[node_id];
    if (node.leaf) {
      scan_leaf(node);
      return;
    }
    const double diff = query[node.split_dim] - node.split_value;
    const int near = diff <= 0.0 ? node.left : node.right;
    const int far = diff <= 0.0 ? node.right : node.left;
    self(self, near);
    if (heap.size() < k || diff * diff <= heap.top().d2) {
      self(self, far);
    }
  };
  visit(visit, root_);

  std::vector<Cand> ranked;
  ranked.reserve(heap.size());
  while (!heap.empty()) {
    ranked.push_back(heap.top());
    heap.pop();
  }
  std::sort(ranked.begin(), ranked.end(), better_than);
  QueryResult result;
  result.reserve(ranked.size());
  for (const Cand& c : ranked) {
    const IndexEntry& e = entries_[c.idx];
    result.push_back(QueryHit{e.sample_id, e.pose, e.modality, std::sqrt(c.d2)});
  }
  return result;
}

std::vector<IndexEntry> embed_samples(const std::vector<LoadedSample>& samples,
                                      Modality modality, const Embedder& embedder,
                                      const diff::ParamStore& params) {
  std::vector<IndexEntry> entries;
  entries.reserve(samples.size());
  for (const LoadedSample& s : samples) {
    EmbeddingVector ev;
    if (modality == Modality::kImage) {
      if (s.image.width <= 0) {
        throw DataError("sample " + std::to_string(s.meta.sample_id) +
                        " has no image media");
      }
      ev = embedder.embed_image(s.image, params);
    } else {
      if (s.cloud.empty()) {
        throw DataError("sample " + std::to_string(s.meta.sample_id) +
                        " has no cloud media");
      }
      ev = embedder.embed_cloud(s.cloud, params);
    }
    entries.push_back(
        IndexEntry{s.meta.sample_id, s.meta.pose, modality, std::move(ev.values)});
  }
  return entries;
}

QueryResult cross_modal_query(const std::vector<LoadedSample>& db_samples,
                              const LoadedSample& query, Modality db_modality,
                              Modality query_modality, const Embedder& embedder,
                              const diff::ParamStore& params, std::size_t k) {
  EmbeddingIndex index =
      EmbeddingIndex::build(embed_samples(db_samples, db_modality, embedder, params));
  EmbeddingVector qev;
  if (query_modality == Modality::kImage) {
    if (query.image.width <= 0) {
      throw DataError("query sample has no image media");
    }
    qev = embedder.embed_image(query.image, params);
  } else {
    if (query.cloud.empty()) throw DataError("query sample has no cloud media");
    qev = embedder.embed_cloud(query.cloud, params);
  }
  return index.knn(qev.values, k);
}

void write_evdb(const std::string& path, const std::vector<IndexEntry>& entries) {
  if (entries.empty()) throw DataError("refusing to write an empty EVDB");
  const std::size_t k = entries.front().ev.size();
  for (const IndexEntry& e : entries) {
    if (e.ev.size() != k) {
      throw DataError("EVDB entries must share one EV dimension");
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open EVDB for writing: " + path);
  f.write("EVDB", 4);
  io::put_le<std::uint8_t>(f, 1);
  io::put_le<std::uint32_t>(f, static_cast<std::uint32_t>(k));
  io::put_le<std::uint32_t>(f, static_cast<std::uint32_t>(entries.size()));
  for (const IndexEntry& e : entries) {
    io::put_le<std::uint64_t>(f, e.sample_id);
    io::put_f64(f, e.pose.x);
    io::put_f64(f, e.pose.y);
    io::put_f64(f, e.pose.z);
    io::put_f64(f, e.pose.yaw);
    io::put_f64(f, e.pose.pitch);
    io::put_f64(f, e.pose.roll);
    io::put_le<std::uint8_t>(f, static_cast<std::uint8_t>(e.modality));
    for (double v : e.ev) io::put_f32(f, static_cast<float>(v));
  }
  if (!f) throw DataError("failed writing EVDB: " + path);
}

std::vector<IndexEntry> read_evdb(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open EVDB: " + path);
  char magic[4];
  f.read(magic, 4);
  if (f.gcount() != 4 || std::memcmp(magic, "EVDB", 4) != 0) {
    throw DataError("bad EVDB magic: " + path);
  }
  const auto version = io::get_le<std::uint8_t>(f, path);
  if (version != 1) {
    throw DataError("unsupported EVDB version " + std::to_string(version) +
                    ": " + path);
  }
  const auto k = io::get_le<std::uint32_t>(f, path);
  const auto count = io::get_le<std::uint32_t>(f, path);
  if (k == 0 || count == 0) throw DataError("EVDB has empty geometry: " + path);
  std::vector<IndexEntry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    IndexEntry e;
    e.sample_id = io::get_le<std::uint64_t>(f, path);
    e.pose.x = io::get_f64(f, path);
    e.pose.y = io::get_f64(f, path);
    e.pose.z = io::get_f64(f, path);
    e.pose.yaw = io::get_f64(f, path);
    e.pose.pitch = io::get_f64(f, path);
    e.pose.roll = io::get_f64(f, path);
    const auto modality = io::get_le<std::uint8_t>(f, path);
    if (modality > 1) throw DataError("EVDB entry with bad modality: " + path);
    e.modality = static_cast<Modality>(modality);
    e.ev.resize(k);
    for (std::uint32_t d = 0; d < k; ++d) {
      e.ev[d] = static_cast<double>(io::get_f32(f, path));
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace crossloc
