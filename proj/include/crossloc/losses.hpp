#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crossloc/encoders.hpp"
#include "crossloc/graph.hpp"

namespace crossloc {

// Distance functions between two EVs of equal length. All satisfy
// d(u, u) = 0, symmetry, and non-negativity.
enum class DistanceKind { kL2, kMse, kCosine, kSmoothL1 };

DistanceKind parse_distance_kind(const std::string& name);
std::string to_string(DistanceKind kind);

// Closed-form distance: L2 norm of the difference, mean squared component
// difference, 1 - cos similarity (returns 1 when either norm is below the
// 1e-12 guard), or the summed smooth-L1 of the difference (beta = 1).
// Throws ConfigError on a length mismatch.
double distance(DistanceKind kind, const std::vector<double>& u,
                const std::vector<double>& v);

struct EvTriplet {
  EmbeddingVector anchor;
  EmbeddingVector positive;
  EmbeddingVector negative;
};

using EvPair = std::pair<EmbeddingVector, EmbeddingVector>;

// Hinge sum over the batch: sum_i max(0, d(a, p) - d(a, n) + margin).
// Throws ConfigError for an empty batch or non-positive margin.
double triplet_loss(const std::vector<EvTriplet>& batch, DistanceKind kind,
                    double margin);

// Sum of pairwise distances between the image EV and the cloud EV of the
// same place. Throws ConfigError for an empty batch.
double joint_embedding_loss(const std::vector<EvPair>& pairs, DistanceKind kind);

// Within-modality term: image triplets plus cloud triplets.
double same_modality_loss(const std::vector<EvTriplet>& batch_2d,
                          const std::vector<EvTriplet>& batch_3d,
                          DistanceKind kind, double margin);

// Across-modality term: image anchors against cloud positives/negatives plus
// the reverse direction.
double cross_modality_loss(const std::vector<EvTriplet>& batch_2d3d,
                           const std::vector<EvTriplet>& batch_3d2d,
                           DistanceKind kind, double margin);

struct LossWeights {
  double lambda_sm = 0.1;
  double lambda_cm = 1.0;
  double lambda_je = 1.0;
};

struct CombinedBatch {
  std::vector<EvTriplet> batch_2d;
  std::vector<EvTriplet> batch_3d;
  std::vector<EvTriplet> batch_2d3d;
  std::vector<EvTriplet> batch_3d2d;
  std::vector<EvPair> je_pairs;
};

// lambda_sm * SM + lambda_cm * CM + lambda_je * JE.
double combined_loss(const CombinedBatch& batch, const LossWeights& weights,
                     DistanceKind kind, double margin);

// Stable config preset names for the training objectives.
//   "sm+cm"          -> weights (0.1, 1, 0)
//   "sm+cm+je"       -> weights (0.1, 1, 1)
//   "teacher-student"-> two-stage paradigm (weights unused)
struct LossPreset {
  std::string name;
  LossWeights weights;
  bool teacher_student = false;
};
LossPreset parse_loss_preset(const std::string& name);

// Graph builders mirroring the closed forms, for use inside training graphs.
// u and v are 1 x K nodes; results are 1 x 1 scalars.
diff::Value ev_distance(diff::Graph& g, DistanceKind kind, diff::Value u,
                        diff::Value v);
diff::Value triplet_hinge(diff::Graph& g, DistanceKind kind, diff::Value anchor,
                          diff::Value positive, diff::Value negative,
                          double margin);

}  // namespace crossloc
