#include "crossloc/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "crossloc/errors.hpp"

namespace crossloc {

const std::array<Pairing, 4> kAllPairings = {{
    {Modality::kImage, Modality::kImage},
    {Modality::kImage, Modality::kCloud},
    {Modality::kCloud, Modality::kImage},
    {Modality::kCloud, Modality::kCloud},
}};

std::string pairing_name(const Pairing& pairing) {
  const auto tag = [](Modality m) {
    return m == Modality::kImage ? "2D" : "3D";
  };
  return std::string(tag(pairing.query)) + "-to-" + tag(pairing.database);
}

double recall_at_k(const std::vector<QueryResult>& results,
                   const std::vector<Pose>& query_poses, int k,
                   double threshold_m) {
  if (k < 1) throw ConfigError("recall@k needs k >= 1, got " + std::to_string(k));
  if (results.size() != query_poses.size()) {
    throw ConfigError("recall@k: results and query poses differ in length");
  }
  if (results.empty()) throw ConfigError("recall@k over zero queries");
  std::size_t matched = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const QueryResult& hits = results[i];
    const std::size_t top = std::min<std::size_t>(k, hits.size());
    for (std::size_t j = 0; j < top; ++j) {
      if (is_same_place(query_poses[i], hits[j].pose, threshold_m)) {
        ++matched;
        break;
      }
    }
  }
  return static_cast<double>(matched) / static_cast<double>(results.size());
}

int one_percent_k(std::size_t db_size) {
  if (db_size < 1) throw ConfigError("recall@1% needs a non-empty database");
  return static_cast<int>(std::max<std::size_t>(1, (db_size + 99) / 100));
}

double recall_at_one_percent(const std::vector<QueryResult>& results,
                             const std::vector<Pose>& query_poses,
                             std::size_t db_size, double threshold_m) {
  return recall_at_k(results, query_poses, one_percent_k(db_size), threshold_m);
}

EvalOptions protocol_options(const std::string& name) {
  EvalOptions opts;
  if (name == "standard") {
    opts.db_spacing_m = 5.0;
    opts.query_spacing_m = 0.0;
  } else if (name == "sparse") {
    opts.db_spacing_m = 20.0;
    opts.query_spacing_m = 10.0;
  } else {
    throw ConfigError("unknown evaluation protocol '" + name +
                      "' (expected standard or sparse)");
  }
  return opts;
}

namespace {

void validate_options(const EvalOptions& opts) {
  if (opts.k_max < 1) throw ConfigError("k_max must be at least 1");
  if (opts.threshold_m <= 0.0) {
    throw ConfigError("same-place threshold must be positive");
  }
  if (opts.db_spacing_m < 0.0 || opts.query_spacing_m < 0.0) {
    throw ConfigError("spacings must be non-negative");
  }
}

// Per-run embeddings for both modalities, addressed by position in the
// loaded sample list.
struct RunEmbeddings {
  std::map<std::uint64_t, std::size_t> index_of;
  std::vector<std::vector<double>> image_ev;
  std::vector<std::vector<double>> cloud_ev;

  const std::vector<double>& ev(std::uint64_t sample_id, Modality m) const {
    const auto it = index_of.find(sample_id);
    if (it == index_of.end()) {
      throw DataError("sample " + std::to_string(sample_id) +
                      " missing from loaded run");
    }
    return m == Modality::kImage ? image_ev[it->second] : cloud_ev[it->second];
  }
};

RunEmbeddings embed_run(const LoadedRun& run, const Embedder& embedder,
                        const diff::ParamStore& params) {
  RunEmbeddings out;
  out.image_ev.reserve(run.samples.size());
  out.cloud_ev.reserve(run.samples.size());
  for (std::size_t i = 0; i < run.samples.size(); ++i) {
    const LoadedSample& s = run.samples[i];
    out.index_of[s.meta.sample_id] = i;
    out.image_ev.push_back(embedder.embed_image(s.image, params).values);
    out.cloud_ev.push_back(embedder.embed_cloud(s.cloud, params).values);
  }
  return out;
}

}  // namespace

RecallReport evaluate_runs(const std::vector<LoadedRun>& runs,
                           const std::vector<Region>& regions,
                           const Embedder& embedder,
                           const diff::ParamStore& params,
                           const EvalOptions& opts) {
  validate_options(opts);
  if (runs.size() < 2) {
    throw ConfigError("evaluation needs at least 2 runs, got " +
                      std::to_string(runs.size()));
  }
  validate_regions(regions);

  std::vector<RunEmbeddings> embeddings;
  std::vector<Run> db_views;
  std::vector<std::vector<Sample>> query_views;
  for (const LoadedRun& lr : runs) {
    validate_run(lr.run);
    embeddings.push_back(embed_run(lr, embedder, params));
    db_views.push_back(opts.db_spacing_m > 0.0
                           ? subsample_run(lr.run, opts.db_spacing_m)
                           : lr.run);
    const Run query_base = opts.query_spacing_m > 0.0
                               ? subsample_run(lr.run, opts.query_spacing_m)
                               : lr.run;
    query_views.push_back(filter_by_regions(query_base, regions, "validation"));
  }

  RecallReport report;
  report.k_max = opts.k_max;
  report.threshold_m = opts.threshold_m;
  report.db_spacing_m = opts.db_spacing_m;
  report.query_spacing_m = opts.query_spacing_m;

  struct Accum {
    std::vector<double> curve;
    double one_pc = 0.0;
    int count = 0;
  };
  std::map<std::string, Accum> accums;

  for (std::size_t di = 0; di < runs.size(); ++di) {
    for (std::size_t qi = 0; qi < runs.size(); ++qi) {
      if (di == qi) continue;
      for (const Pairing& pairing : kAllPairings) {
        PairOutcome out;
        out.db_run = runs[di].run.run_id;
        out.query_run = runs[qi].run.run_id;
        out.pairing = pairing_name(pairing);
        out.db_size = db_views[di].samples.size();
        out.query_count = query_views[qi].size();
        if (out.query_count == 0) {
          out.empty = true;
          report.pairs.push_back(std::move(out));
          continue;
        }
        std::vector<IndexEntry> entries;
        entries.reserve(out.db_size);
        for (const Sample& s : db_views[di].samples) {
          IndexEntry e;
          e.sample_id = s.sample_id;
          e.pose = s.pose;
          e.modality = pairing.database;
          e.ev = embeddings[di].ev(s.sample_id, pairing.database);
          entries.push_back(std::move(e));
        }
        const EmbeddingIndex index = EmbeddingIndex::build(std::move(entries));
        const std::size_t k_eff =
            std::max<std::size_t>(opts.k_max, one_percent_k(out.db_size));
        std::vector<QueryResult> results;
        std::vector<Pose> poses;
        results.reserve(out.query_count);
        poses.reserve(out.query_count);
        for (const Sample& q : query_views[qi]) {
          results.push_back(
              index.knn(embeddings[qi].ev(q.sample_id, pairing.query), k_eff));
          poses.push_back(q.pose);
        }
        out.recall_at.resize(opts.k_max);
        for (int k = 1; k <= opts.k_max; ++k) {
          out.recall_at[k - 1] = recall_at_k(results, poses, k, opts.threshold_m);
        }
        out.recall_1pc = recall_at_one_percent(results, poses, out.db_size,
                                               opts.threshold_m);
        Accum& acc = accums[out.pairing];
        if (acc.curve.empty()) acc.curve.assign(opts.k_max, 0.0);
        for (int k = 0; k < opts.k_max; ++k) acc.curve[k] += out.recall_at[k];
        acc.one_pc += out.recall_1pc;
        acc.count += 1;
        report.pairs.push_back(std::move(out));
      }
    }
  }

  for (const auto& [name, acc] : accums) {
    std::vector<double> mean(opts.k_max, 0.0);
    for (int k = 0; k < opts.k_max; ++k) mean[k] = acc.curve[k] / acc.count;
    report.mean_recall_at[name] = std::move(mean);
    report.mean_recall_1pc[name] = acc.one_pc / acc.count;
    report.evaluated_pairs[name] = acc.count;
  }
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void write_report_summary(const RecallReport& report, const std::string& path) {
  if (report.k_max < 5) {
    throw ConfigError("summary table needs k_max >= 5, got " +
                      std::to_string(report.k_max));
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot open report for writing: " + path);
  f << "report k_max " << report.k_max << " threshold_m "
    << fmt(report.threshold_m) << " db_spacing_m " << fmt(report.db_spacing_m)
    << " query_spacing_m " << fmt(report.query_spacing_m) << "\n";
  for (const PairOutcome& p : report.pairs) {
    f << "pair " << p.db_run << " " << p.query_run << " " << p.pairing << " db "
      << p.db_size << " queries " << p.query_count;
    if (p.empty) {
      f << " empty\n";
    } else {
      f << " recall@1% " << fmt(p.recall_1pc) << " recall@1 "
        << fmt(p.recall_at[0]) << " recall@5 " << fmt(p.recall_at[4]) << "\n";
    }
  }
  for (const auto& [name, count] : report.evaluated_pairs) {
    const std::vector<double>& curve = report.mean_recall_at.at(name);
    f << "mean " << name << " pairs " << count << " recall@1% "
      << fmt(report.mean_recall_1pc.at(name)) << " recall@1 " << fmt(curve[0])
      << " recall@5 " << fmt(curve[4]) << "\n";
  }
  if (!f) throw DataError("failed writing report: " + path);
}

void write_recall_curves(const RecallReport& report, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open curves file for writing: " + path);
  f << "curves k_max " << report.k_max << "\n";
  for (const auto& [name, curve] : report.mean_recall_at) {
    for (int k = 1; k <= report.k_max; ++k) {
      f << "curve " << name << " " << k << " " << fmt(curve[k - 1]) << "\n";
    }
  }
  if (!f) throw DataError("failed writing curves file: " + path);
}

}  // namespace crossloc
