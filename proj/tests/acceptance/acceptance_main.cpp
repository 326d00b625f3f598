// Acceptance gate: nine release criteria covering gradient fidelity, loss
// identities, retrieval exactness, recall math, end-to-end training quality,
// distillation, augmentation bounds, rerun determinism, and curve shape.
// Prints one PASS/FAIL line per criterion and exits non-zero on any failure.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "crossloc/augment.hpp"
#include "crossloc/config.hpp"
#include "crossloc/dataset.hpp"
#include "crossloc/encoders.hpp"
#include "crossloc/errors.hpp"
#include "crossloc/evaluation.hpp"
#include "crossloc/graph.hpp"
#include "crossloc/losses.hpp"
#include "crossloc/rng.hpp"
#include "crossloc/retrieval.hpp"
#include "crossloc/synthbench.hpp"
#include "crossloc/training.hpp"
#include "test_util.hpp"

namespace {

using namespace crossloc;
using diff::Bindings;
using diff::Graph;
using diff::ParamStore;
using diff::Tensor;
using diff::Value;
using testutil::TempDir;
using testutil::bit_equal;
using testutil::random_tensor;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------
// criterion 1: analytic gradients match central finite differences to 1e-4
// across every op kind, the loss graphs, and both encoder pipelines.
// ---------------------------------------------------------------------------

// Scalarizes a possibly-normalized node by dotting with a fixed random row,
// which keeps the probe sensitive where sum-of-squares would be constant.
Value dot_probe(Graph& g, Value v, Rng& rng) {
  Tensor w(1, g.cols(v));
  for (double& x : w.data()) x = rng.normal();
  return g.sum(g.matmul(v, g.constant(std::move(w)), false, true));
}

std::string criterion_gradients() {
  const auto start = Clock::now();
  constexpr double kTol = 1e-4;
  constexpr double kEps = 1e-5;
  double max_err = 0.0;
  int checks = 0;
  auto record = [&](const char* what, double err) {
    max_err = std::max(max_err, err);
    ++checks;
    require(err < kTol, fmt("%s gradient error %.3e", what, err));
  };
  Rng rng(2024);

  {  // matmul, plain and transposed on either side
    Graph g;
    ParamStore p;
    p.add("a", random_tensor(2, 3, rng));
    p.add("b", random_tensor(3, 4, rng));
    Value root = g.sum(g.square(g.matmul(g.param("a", 2, 3), g.param("b", 3, 4))));
    record("matmul", g.gradient_check(root, {}, p, kEps));
  }
  {
    Graph g;
    ParamStore p;
    p.add("a", random_tensor(3, 2, rng));
    p.add("b", random_tensor(3, 4, rng));
    Value root = g.sum(
        g.square(g.matmul(g.param("a", 3, 2), g.param("b", 3, 4), true, false)));
    record("matmul trans_a", g.gradient_check(root, {}, p, kEps));
  }
  {
    Graph g;
    ParamStore p;
    p.add("a", random_tensor(2, 3, rng));
    p.add("b", random_tensor(4, 3, rng));
    Value root = g.sum(
        g.square(g.matmul(g.param("a", 2, 3), g.param("b", 4, 3), false, true)));
    record("matmul trans_b", g.gradient_check(root, {}, p, kEps));
  }
  {  // add with row broadcast, affine, sub
    Graph g;
    ParamStore p;
    p.add("x", random_tensor(3, 4, rng));
    p.add("row", random_tensor(1, 4, rng));
    Value sum = g.add(g.param("x", 3, 4), g.param("row", 1, 4));
    Value root = g.sum(g.square(g.affine(sum, 1.7, 0.3)));
    record("add broadcast", g.gradient_check(root, {}, p, kEps));
  }
  {
    Graph g;
    ParamStore p;
    p.add("a", random_tensor(3, 3, rng));
    p.add("b", random_tensor(3, 3, rng));
    Value root = g.sum(g.square(g.sub(g.param("a", 3, 3), g.param("b", 3, 3))));
    record("sub", g.gradient_check(root, {}, p, kEps));
  }
  {  // scale_rows
    Graph g;
    ParamStore p;
    p.add("x", random_tensor(3, 4, rng));
    p.add("s", random_tensor(3, 1, rng));
    Value root =
        g.sum(g.square(g.scale_rows(g.param("x", 3, 4), g.param("s", 3, 1))));
    record("scale_rows", g.gradient_check(root, {}, p, kEps));
  }
  {  // relu, probed away from its kink at zero
    Graph g;
    ParamStore p;
    p.add("x", testutil::random_tensor_away_from(3, 4, rng, {0.0}, 0.05));
    Value root = g.sum(g.square(g.relu(g.param("x", 3, 4))));
    record("relu", g.gradient_check(root, {}, p, kEps));
  }
  {  // softmax_rows
    Graph g;
    ParamStore p;
    p.add("x", random_tensor(3, 5, rng));
    Value root = dot_probe(g, g.softmax_rows(g.param("x", 3, 5)), rng);
    record("softmax_rows", g.gradient_check(root, {}, p, kEps));
  }
  {  // normalize_rows, probed with a dot so the unit norm is not degenerate
    Graph g;
    ParamStore p;
    Tensor x = random_tensor(3, 5, rng);
    for (double& v : x.data()) v += (v >= 0.0 ? 0.5 : -0.5);
    p.add("x", std::move(x));
    Value root = dot_probe(g, g.normalize_rows(g.param("x", 3, 5)), rng);
    record("normalize_rows", g.gradient_check(root, {}, p, kEps));
  }
  {  // l2_norm
    Graph g;
    ParamStore p;
    p.add("x", random_tensor(3, 4, rng));
    Value root = g.l2_norm(g.param("x", 3, 4));
    record("l2_norm", g.gradient_check(root, {}, p, kEps));
  }
  {  // square
    Graph g;
    ParamStore p;
    p.add("x", random_tensor(4, 4, rng));
    Value root = g.sum(g.square(g.param("x", 4, 4)));
    record("square", g.gradient_check(root, {}, p, kEps));
  }
  {  // smooth_l1 in both branches, away from the |t| = 1 joins
    Graph g;
    ParamStore p;
    Tensor x(2, 6);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double mag = (i % 2 == 0) ? rng.uniform(0.2, 0.8) : rng.uniform(1.2, 1.8);
      x[i] = (rng.bernoulli(0.5) ? mag : -mag);
    }
    p.add("x", std::move(x));
    Value root = g.sum(g.smooth_l1(g.param("x", 2, 6)));
    record("smooth_l1", g.gradient_check(root, {}, p, kEps));
  }
  {  // col_max with well-separated rows so the argmax cannot flip
    Graph g;
    ParamStore p;
    Tensor x = random_tensor(4, 3, rng);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 3; ++c) x[r * 3 + c] += 0.37 * double(r * (c + 1));
    p.add("x", std::move(x));
    Value root = g.sum(g.square(g.col_max(g.param("x", 4, 3))));
    record("col_max", g.gradient_check(root, {}, p, kEps));
  }
  {  // sum / col_sum / mean
    Graph g;
    ParamStore p;
    p.add("x", random_tensor(3, 4, rng));
    Value root = g.sum(g.square(g.affine(g.param("x", 3, 4), 2.0, -1.0)));
    record("sum", g.gradient_check(root, {}, p, kEps));
  }
  {
    Graph g;
    ParamStore p;
    p.add("x", random_tensor(3, 4, rng));
    Value root = dot_probe(g, g.col_sum(g.param("x", 3, 4)), rng);
    record("col_sum", g.gradient_check(root, {}, p, kEps));
  }
  {
    Graph g;
    ParamStore p;
    p.add("x", random_tensor(5, 2, rng));
    Value root = g.square(g.mean(g.square(g.param("x", 5, 2))));
    record("mean", g.gradient_check(root, {}, p, kEps));
  }
  {  // gather with duplicate and dropped (-1) indices
    Graph g;
    ParamStore p;
    p.add("x", random_tensor(3, 4, rng));
    Value gathered =
        g.gather(g.param("x", 3, 4), {0, 5, 11, -1, 3, 5, 7, 10, -1}, 3, 3);
    record("gather", g.gradient_check(g.sum(g.square(gathered)), {}, p, kEps));
  }
  {  // reshape
    Graph g;
    ParamStore p;
    p.add("x", random_tensor(2, 6, rng));
    Value root = g.sum(g.square(g.reshape(g.param("x", 2, 6), 4, 3)));
    record("reshape", g.gradient_check(root, {}, p, kEps));
  }

  // Distance graphs, one per kind, plus an active triplet hinge.
  const DistanceKind kinds[] = {DistanceKind::kL2, DistanceKind::kMse,
                                DistanceKind::kCosine, DistanceKind::kSmoothL1};
  for (DistanceKind kind : kinds) {
    Graph g;
    ParamStore p;
    Tensor u = random_tensor(1, 7, rng);
    Tensor v(1, 7);
    for (std::size_t i = 0; i < 7; ++i) {
      // Offsets chosen to stay clear of the smooth-L1 joins at |t| = 1.
      const double mag = (i % 2 == 0) ? rng.uniform(0.2, 0.8) : rng.uniform(1.2, 1.8);
      v[i] = u[i] + (rng.bernoulli(0.5) ? mag : -mag);
    }
    p.add("u", std::move(u));
    p.add("v", std::move(v));
    Value root =
        ev_distance(g, kind, g.param("u", 1, 7), g.param("v", 1, 7));
    record(to_string(kind).c_str(), g.gradient_check(root, {}, p, kEps));
  }
  {
    Graph g;
    ParamStore p;
    p.add("a", random_tensor(1, 7, rng));
    p.add("p", random_tensor(1, 7, rng));
    p.add("n", random_tensor(1, 7, rng));
    // A large margin keeps the hinge active for every finite-difference probe.
    Value root = triplet_hinge(g, DistanceKind::kL2, g.param("a", 1, 7),
                               g.param("p", 1, 7), g.param("n", 1, 7), 10.0);
    record("triplet_hinge", g.gradient_check(root, {}, p, kEps));
  }

  // Both encoder pipelines end to end, on a reduced geometry so the finite
  // differencing stays fast.
  EncoderConfig cfg;
  cfg.image_width = 16;
  cfg.image_height = 16;
  cfg.conv_channels = 2;
  cfg.feature_dim = 3;
  cfg.clusters = 2;
  cfg.mlp_hidden = 3;
  cfg.mlp_ev_dim = 4;
  cfg.n_pts = 5;
  {
    // Seeds chosen so no conv pre-activation sits within the probe step of a
    // relu kink, which would corrupt the finite differences.
    Graph g;
    ParamStore p;
    Rng init(32);
    init_image_params(cfg, p, init);
    Value pixels = g.input("px", std::size_t(16 * 16), 3);
    Value ev = build_image_ev(g, cfg, pixels, "img.");
    Rng probe_rng(33);
    Rng px_rng(34);
    Tensor flat(16 * 16, 3);
    for (double& v : flat.data()) v = px_rng.uniform(0.0, 1.0);
    record("image encoder",
           g.gradient_check(dot_probe(g, ev, probe_rng), {{"px", flat}}, p, kEps));
  }
  for (const char* head : {"netvlad", "mlp"}) {
    EncoderConfig ccfg = cfg;
    ccfg.head = head;
    Graph g;
    ParamStore p;
    Rng init(35);
    init_cloud_params(ccfg, p, init);
    Value points = g.input("pts", 5, 3);
    Value ev = build_cloud_ev(g, ccfg, points, "cld.");
    Rng probe_rng(36);
    Rng pt_rng(37);
    record(fmt("cloud encoder (%s)", head).c_str(),
           g.gradient_check(dot_probe(g, ev, probe_rng),
                            {{"pts", random_tensor(5, 3, pt_rng)}}, p, kEps));
  }

  const double wall = seconds_since(start);
  require(checks >= 20, fmt("only %d gradient checks ran", checks));
  require(wall < 60.0, fmt("gradient checks took %.1f s", wall));
  return fmt("%d graphs, max rel err %.2e, %.1f s", checks, max_err, wall);
}

// ---------------------------------------------------------------------------
// criterion 2: the combined objective decomposes exactly into its weighted
// terms, and the presets differ by exactly the joint-embedding term.
// ---------------------------------------------------------------------------

EmbeddingVector random_ev(std::size_t k, Modality m, Rng& rng) {
  EmbeddingVector ev;
  ev.modality = m;
  ev.values.resize(k);
  for (double& v : ev.values) v = rng.normal();
  return ev;
}

std::vector<EvTriplet> random_triplets(std::size_t n, std::size_t k,
                                       Modality am, Modality pm, Rng& rng) {
  std::vector<EvTriplet> out(n);
  for (auto& t : out) {
    t.anchor = random_ev(k, am, rng);
    t.positive = random_ev(k, pm, rng);
    t.negative = random_ev(k, pm, rng);
  }
  return out;
}

std::string criterion_loss_identities() {
  constexpr double kTol = 1e-12;
  constexpr std::size_t kDim = 16;
  const DistanceKind kinds[] = {DistanceKind::kL2, DistanceKind::kMse,
                                DistanceKind::kCosine, DistanceKind::kSmoothL1};
  Rng rng(99);
  double worst = 0.0;
  int trials = 0;

  // A satisfied margin must zero the hinge exactly, not just approximately.
  for (DistanceKind kind : kinds) {
    EvTriplet t;
    t.anchor = random_ev(kDim, Modality::kImage, rng);
    t.positive = t.anchor;  // d(a, p) = 0
    double dn = 0.0;
    do {
      t.negative = random_ev(kDim, Modality::kImage, rng);
      dn = distance(kind, t.anchor.values, t.negative.values);
    } while (dn <= 0.6);
    require(triplet_loss({t}, kind, 0.5) == 0.0,
            fmt("satisfied hinge not exactly zero (%s)", to_string(kind).c_str()));
  }

  for (int t = 0; t < 25; ++t) {
    for (DistanceKind kind : kinds) {
      CombinedBatch batch;
      batch.batch_2d = random_triplets(3, kDim, Modality::kImage, Modality::kImage, rng);
      batch.batch_3d = random_triplets(3, kDim, Modality::kCloud, Modality::kCloud, rng);
      batch.batch_2d3d = random_triplets(3, kDim, Modality::kImage, Modality::kCloud, rng);
      batch.batch_3d2d = random_triplets(3, kDim, Modality::kCloud, Modality::kImage, rng);
      for (int i = 0; i < 3; ++i) {
        batch.je_pairs.emplace_back(random_ev(kDim, Modality::kImage, rng),
                                    random_ev(kDim, Modality::kCloud, rng));
      }
      const double margin = 0.5;
      const double sm =
          same_modality_loss(batch.batch_2d, batch.batch_3d, kind, margin);
      const double cm =
          cross_modality_loss(batch.batch_2d3d, batch.batch_3d2d, kind, margin);
      const double je = joint_embedding_loss(batch.je_pairs, kind);

      const LossWeights full = parse_loss_preset("sm+cm+je").weights;
      const double combined = combined_loss(batch, full, kind, margin);
      const double expected = full.lambda_sm * sm + full.lambda_cm * cm +
                              full.lambda_je * je;
      worst = std::max(worst, std::abs(combined - expected));
      require(std::abs(combined - expected) <= kTol,
              fmt("decomposition off by %.3e (%s)",
                  std::abs(combined - expected), to_string(kind).c_str()));

      const LossWeights noje = parse_loss_preset("sm+cm").weights;
      const double without = combined_loss(batch, noje, kind, margin);
      const double diff = std::abs((combined - without) - je);
      worst = std::max(worst, diff);
      require(diff <= kTol, fmt("preset delta off by %.3e (%s)", diff,
                                to_string(kind).c_str()));
      ++trials;
    }
  }
  return fmt("%d batches across 4 distances, max deviation %.2e", trials, worst);
}

// ---------------------------------------------------------------------------
// criterion 3: the KD-tree index returns exactly the brute-force ranking.
// ---------------------------------------------------------------------------

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::string criterion_index_exactness() {
  const auto start = Clock::now();
  constexpr std::size_t kDb = 1000;
  constexpr std::size_t kQueries = 100;
  constexpr std::size_t kK = 25;
  long compared = 0;
  for (std::size_t dim : {std::size_t(8), std::size_t(128)}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng rng(seed * 1000 + dim);
      std::vector<IndexEntry> entries(kDb);
      for (std::size_t i = 0; i < kDb; ++i) {
        entries[i].sample_id = i;
        entries[i].ev.resize(dim);
        for (double& v : entries[i].ev) v = rng.normal();
      }
      // Duplicated vectors force ties that only the id order can break.
      for (std::size_t i = 0; i < 20; ++i) {
        entries[i + kDb / 2].ev = entries[i].ev;
      }
      const EmbeddingIndex index = EmbeddingIndex::build(entries);
      for (std::size_t q = 0; q < kQueries; ++q) {
        std::vector<double> query(dim);
        for (double& v : query) v = rng.normal();
        const QueryResult got = index.knn(query, kK);
        std::vector<std::pair<double, std::uint64_t>> ref;
        ref.reserve(kDb);
        for (const auto& e : entries) {
          ref.emplace_back(euclid(query, e.ev), e.sample_id);
        }
        std::sort(ref.begin(), ref.end());
        require(got.size() == kK, "knn returned the wrong count");
        for (std::size_t i = 0; i < kK; ++i) {
          require(got[i].sample_id == ref[i].second,
                  fmt("rank %zu: id %llu vs brute force %llu (dim %zu seed %llu)",
                      i + 1, (unsigned long long)got[i].sample_id,
                      (unsigned long long)ref[i].second, dim,
                      (unsigned long long)seed));
          require(std::abs(got[i].distance - ref[i].first) <= 1e-12,
                  "knn distance disagrees with brute force");
        }
        ++compared;
      }
    }
  }
  const double wall = seconds_since(start);
  require(wall < 30.0, fmt("index comparison took %.1f s", wall));
  return fmt("%ld queries x 2 dims x 5 seeds, %.1f s", compared, wall);
}

// ---------------------------------------------------------------------------
// criterion 4: recall@k and the 1% cutoff reproduce hand-computed values.
// ---------------------------------------------------------------------------

std::string criterion_recall_math() {
  // Five queries whose only true hit sits at ranks 1, 2, 3, 30, 30.
  const int ranks[] = {1, 2, 3, 30, 30};
  std::vector<QueryResult> results;
  std::vector<Pose> poses(5);
  for (int rank : ranks) {
    QueryResult r;
    for (int j = 1; j <= 30; ++j) {
      QueryHit hit;
      hit.sample_id = j;
      hit.distance = 0.1 * j;
      hit.pose.x = (j == rank) ? 0.0 : 1e4;
      r.push_back(hit);
    }
    results.push_back(std::move(r));
  }
  require(recall_at_k(results, poses, 1) == 1.0 / 5.0, "recall@1 != 0.2");
  require(recall_at_k(results, poses, 5) == 3.0 / 5.0, "recall@5 != 0.6");
  require(recall_at_k(results, poses, 29) == 3.0 / 5.0, "recall@29 != 0.6");
  require(recall_at_k(results, poses, 30) == 1.0, "recall@30 != 1.0");

  require(one_percent_k(96) == 1, "1% of 96 entries must clamp to k=1");
  require(one_percent_k(402) == 5, "1% of 402 entries must round up to k=5");
  require(recall_at_one_percent(results, poses, 96) == 1.0 / 5.0,
          "recall@1% (db 96) != recall@1");
  require(recall_at_one_percent(results, poses, 402) == 3.0 / 5.0,
          "recall@1% (db 402) != recall@5");
  return "rank fixture {1,2,3,30,30} and 1% cutoffs check out";
}

// ---------------------------------------------------------------------------
// criterion 5: combined training on the synthetic benchmark reaches the
// recall floors within the epoch and wall-clock budget. The artifacts feed
// criteria 6 and 9.
// ---------------------------------------------------------------------------

constexpr int kE2eEpochs = 40;

struct E2eArtifacts {
  SyntheticWorld world;
  std::vector<LoadedRun> runs;
  std::vector<Region> regions;
  TrainConfig cfg;
  TrainResult result;
  RecallReport report;
};

std::optional<E2eArtifacts> g_e2e;

std::vector<Region> full_coverage_regions(const SyntheticWorld& world) {
  const double bound = world.circumference / (2.0 * 3.14159265358979323846) + 50.0;
  Region train{"train-all", -bound, bound, -bound, bound, "train"};
  Region val{"val-all", -bound, bound, -bound, bound, "validation"};
  return {train, val};
}

std::string criterion_end_to_end() {
  const auto start = Clock::now();
  E2eArtifacts art;
  art.world = generate_world(42, 100);
  art.runs = generate_runs(art.world, 4);
  art.regions = full_coverage_regions(art.world);

  std::vector<LoadedSample> samples;
  for (const auto& run : art.runs) {
    samples.insert(samples.end(), run.samples.begin(), run.samples.end());
  }
  TrainingSet set = build_training_set(std::move(samples));

  art.cfg.seed = 42;
  art.cfg.paradigm = "combined";
  art.cfg.epochs = kE2eEpochs;
  static_assert(kE2eEpochs <= 100, "epoch budget is 100");
  art.result = train_combined(set, art.cfg);

  const Embedder embedder(art.cfg.encoder);
  art.report = evaluate_runs(art.runs, art.regions, embedder,
                             art.result.checkpoint.params,
                             protocol_options("standard"));

  const double r22 = art.report.mean_recall_at.at("2D-to-2D")[0];
  const double r23 = art.report.mean_recall_at.at("2D-to-3D")[0];
  const double r32 = art.report.mean_recall_at.at("3D-to-2D")[0];
  const double r33 = art.report.mean_recall_at.at("3D-to-3D")[0];
  const double wall = seconds_since(start);
  g_e2e = std::move(art);

  require(r22 >= 0.90, fmt("2D-to-2D recall@1 %.3f below 0.90", r22));
  require(r33 >= 0.90, fmt("3D-to-3D recall@1 %.3f below 0.90", r33));
  require(r23 >= 0.80, fmt("2D-to-3D recall@1 %.3f below 0.80", r23));
  require(r32 >= 0.50, fmt("3D-to-2D recall@1 %.3f below 0.50", r32));
  require(wall < 900.0, fmt("end-to-end run took %.0f s", wall));
  return fmt("recall@1 %.3f/%.3f/%.3f/%.3f (2D2D/2D3D/3D2D/3D3D), %d epochs, %.0f s",
             r22, r23, r32, r33, kE2eEpochs, wall);
}

// ---------------------------------------------------------------------------
// criterion 6: the distilled student closes at least 90% of its initial
// joint-embedding gap while the teacher parameters stay bit-identical.
// ---------------------------------------------------------------------------

std::string criterion_distillation() {
  SyntheticWorld world = generate_world(7, 30);
  std::vector<LoadedRun> runs = generate_runs(world, 2);
  std::vector<LoadedSample> samples;
  for (const auto& run : runs) {
    samples.insert(samples.end(), run.samples.begin(), run.samples.end());
  }
  TrainingSet set = build_training_set(std::move(samples));

  TrainConfig cfg;
  cfg.seed = 7;
  cfg.paradigm = "teacher_student";
  cfg.loss_preset = "teacher-student";
  cfg.epochs = 20;
  const TrainResult teacher = train_teacher(set, cfg);

  TrainConfig student_cfg = cfg;
  student_cfg.epochs = 60;
  const TrainResult student = train_student(set, teacher.checkpoint, student_cfg);

  const double je_first = student.log.front().je;
  const double je_last = student.log.back().je;
  require(je_first > 0.0, "student distillation loss started at zero");
  require(je_last <= 0.1 * je_first,
          fmt("student JE %.4f did not reach 10%% of initial %.4f", je_last,
              je_first));

  for (const std::string& name : teacher.checkpoint.params.names()) {
    require(name.rfind("img.", 0) == 0, "teacher checkpoint has non-image params");
    require(bit_equal(teacher.checkpoint.params.value(name),
                      student.checkpoint.params.value(name)),
            "teacher parameter " + name + " changed during distillation");
  }
  return fmt("JE %.4f -> %.4f (%.1f%%), teacher frozen bit-exact", je_first,
             je_last, 100.0 * je_last / je_first);
}

// ---------------------------------------------------------------------------
// criterion 7: augmentation draws respect the configured bounds and the
// media contracts over ten thousand samples.
// ---------------------------------------------------------------------------

std::string criterion_augment_bounds() {
  const AugmentConfig cfg;  // stock training ranges
  Image img(64, 48);
  Rng media_rng(4);
  for (double& v : img.pixels) v = media_rng.uniform(0.0, 1.0);
  PointCloud pc;
  for (int i = 0; i < 100; ++i) {
    pc.points.push_back({media_rng.normal(0.0, 5.0), media_rng.normal(0.0, 5.0),
                         media_rng.uniform(0.0, 8.0)});
  }

  constexpr int kDraws = 10000;
  Rng rng(cfg.seed + 1);
  int mirrored = 0;
  for (int i = 0; i < kDraws; ++i) {
    const AugmentResult res = augment_pair(img, pc, cfg, rng);
    const AugmentDraws& d = res.draws;
    require(std::abs(d.brightness - 1.0) <= cfg.brightness_jitter, "brightness bound");
    require(std::abs(d.contrast - 1.0) <= cfg.contrast_jitter, "contrast bound");
    require(std::abs(d.saturation - 1.0) <= cfg.saturation_jitter, "saturation bound");
    require(std::abs(d.hue_shift) <= cfg.hue_shift, "hue bound");
    require(std::abs(d.rotation_deg) <= cfg.image_rotation_deg, "rotation bound");
    require(std::abs(d.shift_x_frac) <= cfg.image_shift_frac, "shift x bound");
    require(std::abs(d.shift_y_frac) <= cfg.image_shift_frac, "shift y bound");
    for (double t : d.cloud_translation_m) {
      require(std::abs(t) <= cfg.cloud_translation_m, "cloud translation bound");
    }
    require(std::abs(d.cloud_yaw_deg) <= cfg.cloud_yaw_deg, "cloud yaw bound");
    require(std::abs(d.cloud_pitch_deg) <= cfg.cloud_pitch_roll_deg, "pitch bound");
    require(std::abs(d.cloud_roll_deg) <= cfg.cloud_pitch_roll_deg, "roll bound");

    require(res.image.width == img.width && res.image.height == img.height,
            "augmented image changed size");
    for (double v : res.image.pixels) {
      require(v >= 0.0 && v <= 1.0, "augmented pixel left [0, 1]");
    }
    require(res.cloud.size() == pc.size(), "augmented cloud changed size");
    if (res.mirrored) ++mirrored;
  }
  const double freq = double(mirrored) / kDraws;
  require(std::abs(freq - cfg.mirror_probability) < 0.03,
          fmt("mirror frequency %.3f far from %.2f", freq, cfg.mirror_probability));

  // Zero ranges must leave both media bit-identical.
  AugmentConfig off;
  off.brightness_jitter = off.contrast_jitter = off.saturation_jitter = 0.0;
  off.hue_shift = off.image_rotation_deg = off.image_shift_frac = 0.0;
  off.cloud_translation_m = off.cloud_yaw_deg = off.cloud_pitch_roll_deg = 0.0;
  off.mirror_probability = 0.0;
  Rng idle(1);
  const AugmentResult same = augment_pair(img, pc, off, idle);
  require(same.image.pixels == img.pixels, "identity augment altered the image");
  require(same.cloud.points == pc.points, "identity augment altered the cloud");
  return fmt("%d draws in bounds, mirror frequency %.3f", kDraws, freq);
}

// ---------------------------------------------------------------------------
// criterion 8: rerunning the command pipeline reproduces every artifact
// byte for byte (the epoch log is excluded, it records wall-clock times).
// ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
  const char* bin = std::getenv("CROSSLOC_BIN");
  require(bin != nullptr, "CROSSLOC_BIN is not set");
  const std::string command = std::string(bin) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  require(WIFEXITED(status), "pipeline command did not exit normally");
  return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "missing artifact " + path.string());
  return std::string(std::istreambuf_iterator<char>(f),
                     std::istreambuf_iterator<char>());
}

bool trees_identical(const std::filesystem::path& a,
                     const std::filesystem::path& b) {
  namespace fs = std::filesystem;
  std::size_t count_a = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    ++count_a;
    const auto rel = fs::relative(entry.path(), a);
    if (!fs::exists(b / rel)) return false;
    if (slurp(entry.path()) != slurp(b / rel)) return false;
  }
  std::size_t count_b = 0;
  for (const auto& entry : fs::recursive_directory_iterator(b)) {
    if (entry.is_regular_file()) ++count_b;
  }
  return count_a == count_b;
}

std::string criterion_rerun_determinism() {
  TempDir dir;
  const std::string gen_args = "gen-world --seed 5 --places 8 --runs 2 --out ";
  require(run_cli(gen_args + dir.str("world_a")) == 0, "gen-world failed");
  require(run_cli(gen_args + dir.str("world_b")) == 0, "gen-world rerun failed");
  require(trees_identical(dir.str("world_a"), dir.str("world_b")),
          "world trees differ between reruns");

  const std::string config = dir.str("config.json");
  {
    std::ofstream f(config);
    f << R"({"seed": 3, "train": {"epochs": 2, "places_per_batch": 4}})";
  }
  const std::string train_args = "train --config " + config + " --data " +
                                 dir.str("world_a") + " --out-checkpoint ";
  require(run_cli(train_args + dir.str("a.ckpt")) == 0, "train failed");
  require(run_cli(train_args + dir.str("b.ckpt")) == 0, "train rerun failed");
  require(slurp(dir.str("a.ckpt")) == slurp(dir.str("b.ckpt")),
          "checkpoints differ between reruns");

  const std::string embed_args = "embed --config " + config + " --checkpoint " +
                                 dir.str("a.ckpt") + " --run " +
                                 dir.str("world_a") + "/run00 --modality cloud" +
                                 " --out-evdb ";
  require(run_cli(embed_args + dir.str("a.evdb")) == 0, "embed failed");
  require(run_cli(embed_args + dir.str("b.evdb")) == 0, "embed rerun failed");
  require(slurp(dir.str("a.evdb")) == slurp(dir.str("b.evdb")),
          "EVDB files differ between reruns");

  const std::string eval_args = "eval --config " + config + " --runs-dir " +
                                dir.str("world_a") + " --checkpoint " +
                                dir.str("a.ckpt") + " --report ";
  require(run_cli(eval_args + dir.str("a.report") + " --curves " +
                  dir.str("a.curves")) == 0,
          "eval failed");
  require(run_cli(eval_args + dir.str("b.report") + " --curves " +
                  dir.str("b.curves")) == 0,
          "eval rerun failed");
  require(slurp(dir.str("a.report")) == slurp(dir.str("b.report")),
          "reports differ between reruns");
  require(slurp(dir.str("a.curves")) == slurp(dir.str("b.curves")),
          "curves differ between reruns");
  return "world, checkpoint, EVDB, report, and curves all byte-identical";
}

// ---------------------------------------------------------------------------
// criterion 9: every emitted recall curve is monotone non-decreasing in k
// and stays within [0, 1].
// ---------------------------------------------------------------------------

std::string criterion_curve_shape() {
  require(g_e2e.has_value(), "end-to-end artifacts unavailable (criterion 5)");
  const RecallReport& report = g_e2e->report;
  int curves = 0;
  auto check_monotone = [&](const std::vector<double>& r, const std::string& what) {
    require(!r.empty(), what + " has no recall values");
    for (std::size_t k = 0; k < r.size(); ++k) {
      require(r[k] >= 0.0 && r[k] <= 1.0, what + " left [0, 1]");
      require(k == 0 || r[k] >= r[k - 1], what + " is not monotone");
    }
    ++curves;
  };
  for (const auto& [name, recalls] : report.mean_recall_at) {
    check_monotone(recalls, "mean curve " + name);
  }
  for (const auto& pair : report.pairs) {
    if (pair.empty) continue;
    check_monotone(pair.recall_at,
                   "pair " + pair.db_run + "/" + pair.query_run + " " + pair.pairing);
  }

  // The emitted file must carry the same shape.
  TempDir dir;
  write_recall_curves(report, dir.str("curves.txt"));
  std::ifstream f(dir.str("curves.txt"));
  require(f.good(), "curves file missing");
  std::string line;
  require(std::getline(f, line) && line.rfind("curves k_max ", 0) == 0,
          "curves header malformed");
  std::map<std::string, double> last;
  std::map<std::string, int> last_k;
  while (std::getline(f, line)) {
    std::istringstream is(line);
    std::string tag, pairing;
    int k = 0;
    double recall = -1.0;
    require(bool(is >> tag >> pairing >> k >> recall) && tag == "curve",
            "curve line malformed: " + line);
    require(recall >= 0.0 && recall <= 1.0, "file recall left [0, 1]");
    if (last.count(pairing) > 0) {
      require(k == last_k[pairing] + 1, "curve k values not consecutive");
      // Values in the file are rounded to 6 digits, so allow that much slack.
      require(recall >= last[pairing] - 5e-7, "file curve is not monotone");
    } else {
      require(k == 1, "curve must start at k = 1");
    }
    last[pairing] = recall;
    last_k[pairing] = k;
  }
  require(last.size() == 4, "curves file must cover all four pairings");
  return fmt("%d in-memory curves and 4 file curves monotone in [0, 1]", curves);
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    std::function<std::string()> run;
  };
  const Entry criteria[] = {
      {"gradient fidelity", criterion_gradients},
      {"loss decomposition", criterion_loss_identities},
      {"index exactness", criterion_index_exactness},
      {"recall arithmetic", criterion_recall_math},
      {"end-to-end training quality", criterion_end_to_end},
      {"teacher-student distillation", criterion_distillation},
      {"augmentation bounds", criterion_augment_bounds},
      {"rerun determinism", criterion_rerun_determinism},
      {"recall curve shape", criterion_curve_shape},
  };
  int failures = 0;
  int number = 0;
  for (const Entry& entry : criteria) {
    ++number;
    try {
      const std::string detail = entry.run();
      std::printf("PASS  criterion %d  %s: %s\n", number, entry.name,
                  detail.c_str());
    } catch (const std::exception& e) {
      ++failures;
      std::printf("FAIL  criterion %d  %s: %s\n", number, entry.name, e.what());
    }
    std::fflush(stdout);
  }
  std::printf("%d of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
