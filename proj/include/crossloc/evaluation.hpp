#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "crossloc/dataset.hpp"
#include "crossloc/encoders.hpp"
#include "crossloc/retrieval.hpp"

namespace crossloc {

// Query/database modality combination, named query-first ("2D-to-3D" means
// image queries against a cloud database).
struct Pairing {
  Modality query = Modality::kImage;
  Modality database = Modality::kImage;
};

// All four pairings in report order: 2D-to-2D, 2D-to-3D, 3D-to-2D, 3D-to-3D.
extern const std::array<Pairing, 4> kAllPairings;

std::string pairing_name(const Pairing& pairing);

// Fraction of queries whose top-k hits contain at least one entry within
// threshold_m (strictly) of the query pose. results[i] belongs to
// query_poses[i]. Throws ConfigError for k < 1, mismatched lengths, or zero
// queries.
double recall_at_k(const std::vector<QueryResult>& results,
                   const std::vector<Pose>& query_poses, int k,
                   double threshold_m = 20.0);

// k used by the recall@1% metric: 1% of the database size, rounded up and
// clamped to at least 1. Throws ConfigError for an empty database.
int one_percent_k(std::size_t db_size);

double recall_at_one_percent(const std::vector<QueryResult>& results,
                             const std::vector<Pose>& query_poses,
                             std::size_t db_size, double threshold_m = 20.0);

// Metrics for one ordered (database run, query run) pair under one pairing.
struct PairOutcome {
  std::string db_run;
  std::string query_run;
  std::string pairing;
  std::size_t db_size = 0;
  std::size_t query_count = 0;
  std::vector<double> recall_at;  // recall_at[k - 1] holds recall@k
  double recall_1pc = 0.0;
  bool empty = false;  // no validation queries; excluded from means
};

struct RecallReport {
  int k_max = 25;
  double threshold_m = 20.0;
  double db_spacing_m = 0.0;
  double query_spacing_m = 0.0;
  std::vector<PairOutcome> pairs;
  // Unweighted means over non-empty pairs, keyed by pairing name.
  std::map<std::string, std::vector<double>> mean_recall_at;
  std::map<std::string, double> mean_recall_1pc;
  std::map<std::string, int> evaluated_pairs;
};

struct EvalOptions {
  int k_max = 25;
  double threshold_m = 20.0;
  double db_spacing_m = 5.0;
  double query_spacing_m = 0.0;  // 0 keeps the stored query sampling
};

// Named presets: "standard" spaces databases at 5 m and keeps stored query
// sampling; "sparse" spaces databases at 20 m and queries at 10 m. Throws
// ConfigError for an unknown name.
EvalOptions protocol_options(const std::string& name);

// Full retrieval evaluation: every ordered pair of distinct runs is scored
// under all four pairings, using each database run at db spacing and the
// validation-region samples of the query run (at query spacing when set).
// Embeddings are computed once per run and modality. Throws ConfigError for
// fewer than 2 runs or invalid options.
RecallReport evaluate_runs(const std::vector<LoadedRun>& runs,
                           const std::vector<Region>& regions,
                           const Embedder& embedder,
                           const diff::ParamStore& params,
                           const EvalOptions& opts);

// Summary table: one header line, one line per pair, then one mean line per
// pairing, each carrying recall@1%, recall@1, and recall@5. Requires
// k_max >= 5. Rewriting the same report is byte-identical.
void write_report_summary(const RecallReport& report, const std::string& path);

// Mean recall curves, one "curve <pairing> <k> <recall>" line per pairing
// and k = 1..k_max, for pairings with at least one evaluated pair.
void write_recall_curves(const RecallReport& report, const std::string& path);

}  // namespace crossloc
