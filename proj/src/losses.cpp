#include "crossloc/losses.hpp"

#include <cmath>

#include "crossloc/errors.hpp"

namespace crossloc {

DistanceKind parse_distance_kind(const std::string& name) {
  if (name == "l2") return DistanceKind::kL2;
  if (name == "mse") return DistanceKind::kMse;
  if (name == "cosine") return DistanceKind::kCosine;
  if (name == "smooth_l1") return DistanceKind::kSmoothL1;
  throw ConfigError("unknown distance kind '" + name +
                    "' (expected l2, mse, cosine or smooth_l1)");
}

std::string to_string(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::kL2: return "l2";
    case DistanceKind::kMse: return "mse";
    case DistanceKind::kCosine: return "cosine";
    default: return "smooth_l1";
  }
}

double distance(DistanceKind kind, const std::vector<double>& u,
                const std::vector<double>& v) {
  if (u.size() != v.size() || u.empty()) {
    throw ConfigError("distance requires two non-empty vectors of equal length");
  }
  switch (kind) {
    case DistanceKind::kL2: {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - v[i];
        s += d * d;
      }
      return std::sqrt(s);
    }
    case DistanceKind::kMse: {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - v[i];
        s += d * d;
      }
      return s / static_cast<double>(u.size());
    }
    case DistanceKind::kCosine: {
      double nu = 0.0, nv = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        nu += u[i] * u[i];
        nv += v[i] * v[i];
      }
      nu = std::sqrt(nu);
      nv = std::sqrt(nv);
      // Degenerate vectors normalize to zero, matching the graph guard.
      if (nu <= diff::Graph::kNormEps || nv <= diff::Graph::kNormEps) return 1.0;
      double dot = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        dot += (u[i] / nu) * (v[i] / nv);
      }
      return 1.0 - dot;
    }
    default: {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double t = std::abs(u[i] - v[i]);
        s += t < 1.0 ? 0.5 * t * t : t - 0.5;
      }
      return s;
    }
  }
}

double triplet_loss(const std::vector<EvTriplet>& batch, DistanceKind kind,
                    double margin) {
  if (batch.empty()) throw ConfigError("triplet batch must not be empty");
  if (margin <= 0.0) throw ConfigError("triplet margin must be positive");
  double total = 0.0;
  for (const EvTriplet& t : batch) {
    const double dap = distance(kind, t.anchor.values, t.positive.values);
    const double dan = distance(kind, t.anchor.values, t.negative.values);
    total += std::max(0.0, dap - dan + margin);
  }
  return total;
}

double joint_embedding_loss(const std::vector<EvPair>& pairs, DistanceKind kind) {
  if (pairs.empty()) throw ConfigError("joint-embedding batch must not be empty");
  double total = 0.0;
  for (const EvPair& p : pairs) {
    total += distance(kind, p.first.values, p.second.values);
  }
  return total;
}

double same_modality_loss(const std::vector<EvTriplet>& batch_2d,
                          const std::vector<EvTriplet>& batch_3d,
                          DistanceKind kind, double margin) {
  return triplet_loss(batch_2d, kind, margin) +
         triplet_loss(batch_3d, kind, margin);
}

double cross_modality_loss(const std::vector<EvTriplet>& batch_2d3d,
                           const std::vector<EvTriplet>& batch_3d2d,
                           DistanceKind kind, double margin) {
  return triplet_loss(batch_2d3d, kind, margin) +
         triplet_loss(batch_3d2d, kind, margin);
}

double combined_loss(const CombinedBatch& batch, const LossWeights& weights,
                     DistanceKind kind, double margin) {
  if (weights.lambda_sm < 0.0 || weights.lambda_cm < 0.0 ||
      weights.lambda_je < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
  return weights.lambda_sm *
             same_modality_loss(batch.batch_2d, batch.batch_3d, kind, margin) +
         weights.lambda_cm *
             cross_modality_loss(batch.batch_2d3d, batch.batch_3d2d, kind, margin) +
         weights.lambda_je * joint_embedding_loss(batch.je_pairs, kind);
}

LossPreset parse_loss_preset(const std::string& name) {
  LossPreset preset;
  preset.name = name;
  if (name == "sm+cm") {
    preset.weights = LossWeights{0.1, 1.0, 0.0};
  } else if (name == "sm+cm+je") {
    preset.weights = LossWeights{0.1, 1.0, 1.0};
  } else if (name == "teacher-student") {
    preset.teacher_student = true;
  } else {
    throw ConfigError("unknown loss preset '" + name +
                      "' (expected sm+cm, sm+cm+je or teacher-student)");
  }
  return preset;
}

diff::Value ev_distance(diff::Graph& g, DistanceKind kind, diff::Value u,
                        diff::Value v) {
  switch (kind) {
    case DistanceKind::kL2:
      return g.l2_norm(g.sub(u, v));
    case DistanceKind::kMse:
      return g.mean(g.square(g.sub(u, v)));
    case DistanceKind::kCosine: {
      diff::Value dot =
          g.matmul(g.normalize_rows(u), g.normalize_rows(v), false, true);
      return g.affine(dot, -1.0, 1.0);
    }
    default:
      return g.sum(g.smooth_l1(g.sub(u, v)));
  }
}

diff::Value triplet_hinge(diff::Graph& g, DistanceKind kind, diff::Value anchor,
                          diff::Value positive, diff::Value negative,
                          double margin) {
  if (margin <= 0.0) throw ConfigError("triplet margin must be positive");
  diff::Value dap = ev_distance(g, kind, anchor, positive);
  diff::Value dan = ev_distance(g, kind, anchor, negative);
  return g.relu(g.affine(g.sub(dap, dan), 1.0, margin));
}

}  // namespace crossloc
