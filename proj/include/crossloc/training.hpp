#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "crossloc/augment.hpp"
#include "crossloc/dataset.hpp"
#include "crossloc/encoders.hpp"
#include "crossloc/losses.hpp"

namespace crossloc {

// A group of samples observing the same physical place.
struct Place {
  Pose center;
  std::vector<std::size_t> members;  // indices into TrainingSet::samples
};

struct TrainingSet {
  std::vector<LoadedSample> samples;
  std::vector<Place> places;
};

// Greedy first-fit grouping by the same-place rule: each sample joins the
// first place whose center lies within threshold, else founds a new place.
TrainingSet build_training_set(std::vector<LoadedSample> samples,
                               double place_threshold_m = 20.0);

struct TrainConfig {
  std::string paradigm = "combined";  // "combined" or "teacher_student"
  int places_per_batch = 4;           // N
  int samples_per_place = 2;
  int epochs = 30;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::string loss_preset = "sm+cm+je";
  DistanceKind distance = DistanceKind::kL2;  // triplet and combined JE terms
  // The student stage regresses onto frozen teacher EVs with this distance.
  DistanceKind student_distance = DistanceKind::kSmoothL1;
  double margin = 0.5;
  std::uint64_t seed = 0;
  bool augment_enabled = true;
  AugmentConfig augment;
  EncoderConfig encoder;
};

void validate_train_config(const TrainConfig& cfg);

// One training batch: 2N media in place-major order (items 2i and 2i+1 are
// the two samples of place slot i) plus anchor/positive/negative item
// indices. The same index triples drive every modality pairing of the loss.
struct Batch {
  std::vector<Image> images;
  std::vector<PointCloud> clouds;
  std::vector<int> place_of;
  std::vector<std::array<int, 3>> triplets;
};

// Draws N distinct places (uniformly via the provided order) and two
// distinct samples per place, applies augmentation when cfg is non-null,
// and assigns one uniform in-batch negative per anchor. `place_choice`
// must hold n_places distinct eligible place indices.
Batch build_batch(const TrainingSet& set, const std::vector<std::size_t>& place_choice,
                  Rng& rng, const AugmentConfig* augment_cfg);

// Convenience overload drawing the places uniformly at random.
Batch build_batch(const TrainingSet& set, int n_places, Rng& rng,
                  const AugmentConfig* augment_cfg);

struct Checkpoint {
  diff::ParamStore params;
  std::uint64_t digest = 0;
  int epoch = 0;
  std::vector<double> loss_history;  // per-epoch mean batch loss
};

struct EpochLogEntry {
  int epoch = 0;
  double loss = 0.0;  // mean batch loss
  double sm = 0.0;
  double cm = 0.0;
  double je = 0.0;
  double wall_s = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLogEntry> log;
};

// Image-encoder pre-training with the within-modality triplet loss. The
// returned checkpoint holds the "img." parameters only.
TrainResult train_teacher(const TrainingSet& set, const TrainConfig& cfg);

// Cloud-encoder distillation against the frozen teacher: minimizes the
// pairwise distance between teacher image EVs and student cloud EVs. The
// teacher parameters are never written; the returned checkpoint holds the
// teacher "img." parameters verbatim plus the trained "cld." parameters.
TrainResult train_student(const TrainingSet& set, const Checkpoint& teacher,
                          const TrainConfig& cfg);

// Joint optimization of both encoders under the weighted sum of the
// same-modality, cross-modality, and joint-embedding terms.
TrainResult train_combined(const TrainingSet& set, const TrainConfig& cfg);

// Adaptive-moment optimizer state (one slot pair per parameter).
struct AdamState {
  std::map<std::string, diff::Tensor> m;
  std::map<std::string, diff::Tensor> v;
  long step = 0;
};

// One update from the gradients currently held in params, with bias
// correction. Deterministic given state.
void adam_step(diff::ParamStore& params, AdamState& state, double lr,
               double beta1, double beta2, double eps);

// Line-delimited log, one JSON object per epoch.
void write_train_log(const std::vector<EpochLogEntry>& log,
                     const std::string& path);

}  // namespace crossloc
