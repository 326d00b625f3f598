#include "crossloc/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "crossloc/errors.hpp"

namespace crossloc {

TrainingSet build_training_set(std::vector<LoadedSample> samples,
                               double place_threshold_m) {
  if (place_threshold_m <= 0.0) {
    throw ConfigError("place threshold must be positive");
  }
  TrainingSet set;
  set.samples = std::move(samples);
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const Pose& pose = set.samples[i].meta.pose;
    bool placed = false;
    for (Place& place : set.places) {
      if (is_same_place(pose, place.center, place_threshold_m)) {
        place.members.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) {
      set.places.push_back(Place{pose, {i}});
    }
  }
  return set;
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.paradigm != "combined" && cfg.paradigm != "teacher_student") {
    throw ConfigError("unknown training paradigm '" + cfg.paradigm +
                      "' (expected combined or teacher_student)");
  }
  if (cfg.places_per_batch < 2) {
    throw ConfigError("places per batch must be at least 2");
  }
  if (cfg.samples_per_place != 2) {
    throw ConfigError("samples per place is fixed to 2");
  }
  if (cfg.epochs < 0) throw ConfigError("epoch count must be non-negative");
  if (cfg.learning_rate < 0.0) {
    throw ConfigError("learning rate must be non-negative");
  }
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("moment decays must lie in [0, 1)");
  }
  if (cfg.adam_eps <= 0.0) throw ConfigError("optimizer epsilon must be positive");
  if (cfg.margin <= 0.0) throw ConfigError("triplet margin must be positive");
  const LossPreset preset = parse_loss_preset(cfg.loss_preset);
  if (preset.teacher_student != (cfg.paradigm == "teacher_student")) {
    throw ConfigError("loss preset '" + cfg.loss_preset +
                      "' does not match paradigm '" + cfg.paradigm + "'");
  }
  validate_encoder_config(cfg.encoder);
  validate_augment_config(cfg.augment);
}

namespace {

std::vector<std::size_t> eligible_places(const TrainingSet& set) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < set.places.size(); ++i) {
    if (set.places[i].members.size() >= 2) out.push_back(i);
  }
  return out;
}

}  // namespace

Batch build_batch(const TrainingSet& set,
                  const std::vector<std::size_t>& place_choice, Rng& rng,
                  const AugmentConfig* augment_cfg) {
  const int n = static_cast<int>(place_choice.size());
  if (n < 2) throw DataError("a batch needs at least 2 places");
  Batch batch;
  for (int slot = 0; slot < n; ++slot) {
    const Place& place = set.places.at(place_choice[slot]);
    const std::size_t m = place.members.size();
    if (m < 2) {
      throw DataError("place with fewer than 2 samples cannot form a batch");
    }
    const std::size_t i = rng.uniform_index(m);
    std::size_t j = rng.uniform_index(m - 1);
    if (j >= i) ++j;
    for (std::size_t member : {place.members[i], place.members[j]}) {
      const LoadedSample& s = set.samples[member];
      if (augment_cfg != nullptr) {
        AugmentResult aug = augment_pair(s.image, s.cloud, *augment_cfg, rng);
        batch.images.push_back(std::move(aug.image));
        batch.clouds.push_back(std::move(aug.cloud));
      } else {
        batch.images.push_back(s.image);
        batch.clouds.push_back(s.cloud);
      }
      batch.place_of.push_back(slot);
    }
  }
  // One uniform in-batch negative per anchor; the positive is the other
  // sample of the anchor's place.
  const int items = 2 * n;
  for (int a = 0; a < items; ++a) {
    const int p = a ^ 1;
    const int off = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(items - 2)));
    // Skip the two items of the anchor's own place slot.
    const int own = 2 * batch.place_of[a];
    int neg = off < own ? off : off + 2;
    batch.triplets.push_back({a, p, neg});
  }
  return batch;
}

Batch build_batch(const TrainingSet& set, int n_places, Rng& rng,
                  const AugmentConfig* augment_cfg) {
  std::vector<std::size_t> eligible = eligible_places(set);
  if (static_cast<int>(eligible.size()) < n_places) {
    throw DataError("dataset has " + std::to_string(eligible.size()) +
                    " usable places, need " + std::to_string(n_places));
  }
  for (int i = 0; i < n_places; ++i) {
    const std::size_t j = i + rng.uniform_index(eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(n_places);
  return build_batch(set, eligible, rng, augment_cfg);
}

void adam_step(diff::ParamStore& params, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (const std::string& name : params.names()) {
    diff::Tensor& p = params.value(name);
    const diff::Tensor& g = params.grad(name);
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      mit = state.m.emplace(name, diff::Tensor(p.rows(), p.cols())).first;
      state.v.emplace(name, diff::Tensor(p.rows(), p.cols()));
    }
    diff::Tensor& m = mit->second;
    diff::Tensor& v = state.v.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
}

namespace {

// Per-batch loss graph plus its input bindings and watched component nodes
// (same-modality, cross-modality, joint-embedding sums in that order).
struct LossGraph {
  diff::Graph g;
  diff::Value root;
  std::vector<diff::Value> components;
  diff::Bindings bindings;
};

diff::Value sum_values(diff::Graph& g, const std::vector<diff::Value>& vs) {
  diff::Value acc = vs.front();
  for (std::size_t i = 1; i < vs.size(); ++i) acc = g.add(acc, vs[i]);
  return acc;
}

std::vector<diff::Value> embed_images(LossGraph& lg, const Batch& batch,
                                      const EncoderConfig& enc) {
  std::vector<diff::Value> evs;
  for (std::size_t i = 0; i < batch.images.size(); ++i) {
    const std::string name = "img" + std::to_string(i);
    diff::Value in = lg.g.input(
        name, static_cast<std::size_t>(enc.image_width) * enc.image_height, 3);
    lg.bindings[name] = image_to_tensor(batch.images[i]);
    evs.push_back(build_image_ev(lg.g, enc, in, "img."));
  }
  return evs;
}

std::vector<diff::Value> embed_clouds(LossGraph& lg, const Batch& batch,
                                      const EncoderConfig& enc) {
  std::vector<diff::Value> evs;
  for (std::size_t i = 0; i < batch.clouds.size(); ++i) {
    const std::string name = "cld" + std::to_string(i);
    diff::Value in = lg.g.input(name, static_cast<std::size_t>(enc.n_pts), 3);
    lg.bindings[name] = cloud_to_tensor(batch.clouds[i], enc.n_pts);
    evs.push_back(build_cloud_ev(lg.g, enc, in, "cld."));
  }
  return evs;
}

diff::Value triplet_sum(diff::Graph& g, const Batch& batch,
                        const std::vector<diff::Value>& anchor_evs,
                        const std::vector<diff::Value>& other_evs,
                        DistanceKind kind, double margin) {
  std::vector<diff::Value> hinges;
  for (const auto& t : batch.triplets) {
    hinges.push_back(triplet_hinge(g, kind, anchor_evs[t[0]], other_evs[t[1]],
                                   other_evs[t[2]], margin));
  }
  return sum_values(g, hinges);
}

LossGraph build_combined_graph(const Batch& batch, const TrainConfig& cfg,
                               const LossWeights& weights) {
  LossGraph lg;
  const std::vector<diff::Value> iev = embed_images(lg, batch, cfg.encoder);
  const std::vector<diff::Value> cev = embed_clouds(lg, batch, cfg.encoder);
  diff::Value sm =
      lg.g.add(triplet_sum(lg.g, batch, iev, iev, cfg.distance, cfg.margin),
               triplet_sum(lg.g, batch, cev, cev, cfg.distance, cfg.margin));
  diff::Value cm =
      lg.g.add(triplet_sum(lg.g, batch, iev, cev, cfg.distance, cfg.margin),
               triplet_sum(lg.g, batch, cev, iev, cfg.distance, cfg.margin));
  std::vector<diff::Value> pairs;
  for (std::size_t i = 0; i < iev.size(); ++i) {
    pairs.push_back(ev_distance(lg.g, cfg.distance, iev[i], cev[i]));
  }
  diff::Value je = sum_values(lg.g, pairs);
  lg.root = lg.g.add(lg.g.add(lg.g.affine(sm, weights.lambda_sm, 0.0),
                              lg.g.affine(cm, weights.lambda_cm, 0.0)),
                     lg.g.affine(je, weights.lambda_je, 0.0));
  lg.components = {sm, cm, je};
  return lg;
}

LossGraph build_teacher_graph(const Batch& batch, const TrainConfig& cfg) {
  LossGraph lg;
  const std::vector<diff::Value> iev = embed_images(lg, batch, cfg.encoder);
  lg.root = triplet_sum(lg.g, batch, iev, iev, cfg.distance, cfg.margin);
  lg.components = {lg.root};
  return lg;
}

LossGraph build_student_graph(const Batch& batch,
                              const std::vector<EmbeddingVector>& teacher_evs,
                              const TrainConfig& cfg) {
  LossGraph lg;
  const std::vector<diff::Value> cev = embed_clouds(lg, batch, cfg.encoder);
  const auto k = static_cast<std::size_t>(ev_length(cfg.encoder));
  std::vector<diff::Value> pairs;
  for (std::size_t i = 0; i < cev.size(); ++i) {
    const std::string name = "teacher" + std::to_string(i);
    diff::Value tev = lg.g.input(name, 1, k);
    lg.bindings[name] = diff::Tensor(1, k, teacher_evs[i].values);
    pairs.push_back(ev_distance(lg.g, cfg.student_distance, tev, cev[i]));
  }
  lg.root = sum_values(lg.g, pairs);
  lg.components = {lg.root};
  return lg;
}

// Shared epoch/batch loop. build_graph is invoked once per batch.
template <typename BuildGraph>
TrainResult run_loop(const TrainingSet& set, const TrainConfig& cfg,
                     diff::ParamStore params, BuildGraph build_graph,
                     bool log_components) {
  const std::vector<std::size_t> eligible = eligible_places(set);
  if (static_cast<int>(eligible.size()) < cfg.places_per_batch) {
    throw DataError("dataset has " + std::to_string(eligible.size()) +
                    " usable places, need at least " +
                    std::to_string(cfg.places_per_batch));
  }
  Rng shuffle_rng(Rng::derive_seed(cfg.seed, 10));
  Rng batch_rng(Rng::derive_seed(cfg.seed, 11));
  AdamState adam;
  TrainResult result;
  const auto n = static_cast<std::size_t>(cfg.places_per_batch);
  const std::size_t batches = (eligible.size() + n - 1) / n;
  const AugmentConfig* aug = cfg.augment_enabled ? &cfg.augment : nullptr;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order = eligible;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const std::size_t j = i + shuffle_rng.uniform_index(order.size() - i);
      std::swap(order[i], order[j]);
    }
    EpochLogEntry entry;
    entry.epoch = epoch;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<std::size_t> choice(n);
      for (std::size_t j = 0; j < n; ++j) {
        choice[j] = order[(b * n + j) % order.size()];
      }
      Batch batch = build_batch(set, choice, batch_rng, aug);
      LossGraph lg = build_graph(batch);
      std::vector<diff::Tensor> watched;
      const diff::Tensor loss =
          lg.g.forward_backward(lg.root, lg.bindings, params, lg.components,
                                &watched);
      const double value = loss.scalar_value();
      if (!std::isfinite(value)) {
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + " batch " +
                           std::to_string(b + 1));
      }
      entry.loss += value;
      if (log_components) {
        entry.sm += watched[0].scalar_value();
        entry.cm += watched[1].scalar_value();
        entry.je += watched[2].scalar_value();
      } else {
        entry.je += watched[0].scalar_value();
      }
      adam_step(params, adam, cfg.learning_rate, cfg.beta1, cfg.beta2,
                cfg.adam_eps);
    }
    const double nb = static_cast<double>(batches);
    entry.loss /= nb;
    entry.sm /= nb;
    entry.cm /= nb;
    entry.je /= nb;
    entry.wall_s = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
    result.log.push_back(entry);
    result.checkpoint.loss_history.push_back(entry.loss);
  }
  result.checkpoint.params = std::move(params);
  result.checkpoint.digest = config_digest(cfg.encoder);
  result.checkpoint.epoch = cfg.epochs;
  return result;
}

}  // namespace

TrainResult train_teacher(const TrainingSet& set, const TrainConfig& cfg) {
  validate_train_config(cfg);
  diff::ParamStore params;
  Rng init_rng(Rng::derive_seed(cfg.seed, 0));
  init_image_params(cfg.encoder, params, init_rng);
  return run_loop(set, cfg, std::move(params),
                  [&](const Batch& batch) { return build_teacher_graph(batch, cfg); },
                  false);
}

TrainResult train_student(const TrainingSet& set, const Checkpoint& teacher,
                          const TrainConfig& cfg) {
  validate_train_config(cfg);
  if (teacher.digest != config_digest(cfg.encoder)) {
    throw DataError("teacher checkpoint config digest does not match");
  }
  if (!teacher.params.has("img.conv1.w")) {
    throw DataError("teacher checkpoint is missing image encoder parameters");
  }
  // The teacher is only ever read: its EVs are computed outside the training
  // graph and enter as constant inputs.
  Embedder embedder(cfg.encoder);
  diff::ParamStore student;
  Rng init_rng(Rng::derive_seed(cfg.seed, 1));
  init_cloud_params(cfg.encoder, student, init_rng);
  TrainResult result = run_loop(
      set, cfg, std::move(student),
      [&](const Batch& batch) {
        std::vector<EmbeddingVector> teacher_evs;
        teacher_evs.reserve(batch.images.size());
        for (const Image& img : batch.images) {
          teacher_evs.push_back(embedder.embed_image(img, teacher.params));
        }
        return build_student_graph(batch, teacher_evs, cfg);
      },
      false);
  // Ship one checkpoint usable for every modality pairing: the frozen
  // teacher parameters verbatim plus the trained student parameters.
  diff::ParamStore merged;
  for (const auto& [name, value] : teacher.params.values()) {
    if (name.rfind("img.", 0) == 0) merged.add(name, value);
  }
  for (const auto& [name, value] : result.checkpoint.params.values()) {
    merged.add(name, value);
  }
  result.checkpoint.params = std::move(merged);
  return result;
}

TrainResult train_combined(const TrainingSet& set, const TrainConfig& cfg) {
  validate_train_config(cfg);
  const LossPreset preset = parse_loss_preset(cfg.loss_preset);
  diff::ParamStore params;
  Rng init_rng(Rng::derive_seed(cfg.seed, 0));
  init_params(cfg.encoder, params, init_rng);
  return run_loop(set, cfg, std::move(params),
                  [&](const Batch& batch) {
                    return build_combined_graph(batch, cfg, preset.weights);
                  },
                  true);
}

void write_train_log(const std::vector<EpochLogEntry>& log,
                     const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open training log for writing: " + path);
  for (const EpochLogEntry& e : log) {
    nlohmann::json j{{"epoch", e.epoch}, {"loss", e.loss},    {"sm", e.sm},
                     {"cm", e.cm},       {"je", e.je},        {"wall_s", e.wall_s}};
    f << j.dump() << "\n";
  }
  if (!f) throw DataError("failed writing training log: " + path);
}

}  // namespace crossloc
