#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crossloc/graph.hpp"
#include "crossloc/image.hpp"
#include "crossloc/point_cloud.hpp"
#include "crossloc/rng.hpp"

namespace crossloc {

enum class Modality : std::uint8_t { kImage = 0, kCloud = 1 };

std::string to_string(Modality m);
Modality parse_modality(const std::string& name);

// Fixed-length descriptor summarizing one image or one sub-map; the unit of
// comparison in retrieval.
struct EmbeddingVector {
  std::vector<double> values;
  Modality modality = Modality::kImage;
};

// Architecture of both encoder pipelines. Either head produces the same EV
// length for the two modalities by construction.
struct EncoderConfig {
  int image_width = 64;
  int image_height = 48;
  int conv_channels = 8;   // first conv layer output channels
  int feature_dim = 16;    // local descriptor width D for both modalities
  int clusters = 8;        // NetVLAD cluster count Kc
  std::string head = "netvlad";  // "netvlad" or "mlp"
  int mlp_hidden = 32;     // hidden width of the per-point MLP and the mlp head
  int mlp_ev_dim = 128;    // EV length when head == "mlp"
  int n_pts = 256;         // cloud point budget fed to the extractor
  std::uint64_t init_seed = 1;
};

// Throws ConfigError on non-positive dimensions, an unknown head name, or
// image dimensions not divisible by 8 (the conv stack downsamples by 8).
void validate_encoder_config(const EncoderConfig& cfg);

// EV length K: clusters * feature_dim for netvlad, mlp_ev_dim for mlp.
int ev_length(const EncoderConfig& cfg);

// FNV-1a digest over the architecture fields (init_seed excluded, it does
// not change parameter shapes). Checkpoints are loadable iff digests match.
std::uint64_t config_digest(const EncoderConfig& cfg);

// Registers and initializes encoder parameters under the prefixes "img."
// and "cld.": weights uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases
// zero, cluster centers standard normal. Draw order is fixed.
void init_image_params(const EncoderConfig& cfg, diff::ParamStore& params,
                       Rng& rng);
void init_cloud_params(const EncoderConfig& cfg, diff::ParamStore& params,
                       Rng& rng);
// Both modalities from one generator, image first.
void init_params(const EncoderConfig& cfg, diff::ParamStore& params, Rng& rng);

// Local descriptors produced by an extractor: one row per spatial cell or
// sampled point (count rows), one column per feature channel (dim columns).
struct LocalFeatureMap {
  int dim = 0;
  int count = 0;
  diff::Tensor values{1, 1};
};

// Graph builders. Inputs: pixels is a (H*W) x 3 node, points an n_pts x 3
// node. Parameters are referenced by name under the given prefix, so
// repeated calls share weights. Both return a unit-norm 1 x K EV node.
diff::Value build_image_ev(diff::Graph& g, const EncoderConfig& cfg,
                           diff::Value pixels, const std::string& prefix);
diff::Value build_cloud_ev(diff::Graph& g, const EncoderConfig& cfg,
                           diff::Value points, const std::string& prefix);

// Concrete single-input wrappers around the graph builders.
LocalFeatureMap extract_image_features(const Image& img,
                                       const diff::ParamStore& params,
                                       const EncoderConfig& cfg);
LocalFeatureMap extract_cloud_features(const PointCloud& pc,
                                       const diff::ParamStore& params,
                                       const EncoderConfig& cfg);
EmbeddingVector netvlad_aggregate(const LocalFeatureMap& features,
                                  const diff::ParamStore& params,
                                  const EncoderConfig& cfg,
                                  const std::string& prefix);
EmbeddingVector mlp_aggregate(const LocalFeatureMap& features,
                              const diff::ParamStore& params,
                              const EncoderConfig& cfg,
                              const std::string& prefix);

// Layout helpers shared by the builders and the training pipeline.
diff::Tensor image_to_tensor(const Image& img);
// Resamples the cloud to exactly n_pts points: points are sorted
// lexicographically first, then selected with a fixed-seed generator, so the
// result is deterministic and permutation invariant. Up-sampling keeps every
// original point and fills the budget with replacement draws.
PointCloud resample_cloud(const PointCloud& pc, int n_pts);
diff::Tensor cloud_to_tensor(const PointCloud& pc, int n_pts);

// Builds both embedding graphs once and evaluates them against concrete
// media. Embedding is pure given (input, params).
class Embedder {
 public:
  explicit Embedder(EncoderConfig cfg);

  EmbeddingVector embed_image(const Image& img,
                              const diff::ParamStore& params) const;
  EmbeddingVector embed_cloud(const PointCloud& pc,
                              const diff::ParamStore& params) const;
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  diff::Graph image_graph_;
  diff::Value image_root_;
  diff::Graph cloud_graph_;
  diff::Value cloud_root_;
};

// Checkpoint archive: magic "CML1", u64 config digest, u32 EV length K,
// u32 record count, then per parameter a u16 name length, the name bytes,
// u32 rows, u32 cols, and rows*cols float64 values, all little endian.
// read_checkpoint throws DataError on corrupt files or digest mismatch.
void write_checkpoint(const std::string& path, const diff::ParamStore& params,
                      const EncoderConfig& cfg);
diff::ParamStore read_checkpoint(const std::string& path,
                                 const EncoderConfig& cfg);

}  // namespace crossloc
