#include "crossloc/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "crossloc/errors.hpp"

namespace crossloc {

std::string to_string(Modality m) {
  return m == Modality::kImage ? "image" : "cloud";
}

Modality parse_modality(const std::string& name) {
  if (name == "image" || name == "2d") return Modality::kImage;
  if (name == "cloud" || name == "3d") return Modality::kCloud;
  throw ConfigError("unknown modality '" + name + "' (expected image or cloud)");
}

void validate_encoder_config(const EncoderConfig& cfg) {
  if (cfg.image_width <= 0 || cfg.image_height <= 0 || cfg.conv_channels <= 0 ||
      cfg.feature_dim <= 0 || cfg.clusters <= 0 || cfg.mlp_hidden <= 0 ||
      cfg.mlp_ev_dim <= 0 || cfg.n_pts <= 0) {
    throw ConfigError("encoder config dimensions must be positive");
  }
  if (cfg.image_width % 8 != 0 || cfg.image_height % 8 != 0) {
    throw ConfigError("encoder image dimensions must be divisible by 8");
  }
  if (cfg.head != "netvlad" && cfg.head != "mlp") {
    throw ConfigError("unknown encoder head '" + cfg.head +
                      "' (expected netvlad or mlp)");
  }
}

int ev_length(const EncoderConfig& cfg) {
  return cfg.head == "netvlad" ? cfg.clusters * cfg.feature_dim : cfg.mlp_ev_dim;
}

std::uint64_t config_digest(const EncoderConfig& cfg) {
  std::ostringstream os;
  os << cfg.image_width << "|" << cfg.image_height << "|" << cfg.conv_channels
     << "|" << cfg.feature_dim << "|" << cfg.clusters << "|" << cfg.head << "|"
     << cfg.mlp_hidden << "|" << cfg.mlp_ev_dim << "|" << cfg.n_pts;
  const std::string s = os.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

// Output side of a 3x3 stride-s pad-1 convolution.
int conv_out(int in, int stride) { return (in + 2 - 3) / stride + 1; }

// Row-major flat indices mapping a (h*w) x channels feature tensor to its
// im2col patch matrix of shape (out_h*out_w) x (9*channels). Out-of-frame
// taps get -1, which gather turns into zero padding.
std::vector<std::int64_t> im2col_index(int w, int h, int channels, int stride) {
  const int ow = conv_out(w, stride);
  const int oh = conv_out(h, stride);
  std::vector<std::int64_t> idx;
  idx.reserve(static_cast<std::size_t>(ow) * oh * 9 * channels);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int iy = oy * stride + ky - 1;
          const int ix = ox * stride + kx - 1;
          for (int c = 0; c < channels; ++c) {
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
              idx.push_back(-1);
            } else {
              idx.push_back(
                  (static_cast<std::int64_t>(iy) * w + ix) * channels + c);
            }
          }
        }
      }
    }
  }
  return idx;
}

diff::Value conv_layer(diff::Graph& g, diff::Value in, int w, int h,
                       int in_channels, int stride, const std::string& wname,
                       const std::string& bname, int out_channels) {
  const int ow = conv_out(w, stride);
  const int oh = conv_out(h, stride);
  diff::Value patches =
      g.gather(in, im2col_index(w, h, in_channels, stride),
               static_cast<std::size_t>(ow) * oh, 9ull * in_channels);
  diff::Value wv = g.param(wname, static_cast<std::size_t>(out_channels),
                           9ull * in_channels);
  diff::Value bv = g.param(bname, 1, static_cast<std::size_t>(out_channels));
  return g.relu(g.add(g.matmul(patches, wv, false, true), bv));
}

// Soft-assignment NetVLAD aggregation over an M x D feature node.
diff::Value netvlad_head(diff::Graph& g, const EncoderConfig& cfg,
                         diff::Value features, const std::string& prefix) {
  const auto kc = static_cast<std::size_t>(cfg.clusters);
  const auto d = static_cast<std::size_t>(cfg.feature_dim);
  diff::Value w = g.param(prefix + "vlad.w", kc, d);
  diff::Value b = g.param(prefix + "vlad.b", 1, kc);
  diff::Value centers = g.param(prefix + "vlad.c", kc, d);
  // a[i][k] = softmax_k(w_k . x_i + b_k)
  diff::Value assign = g.softmax_rows(g.add(g.matmul(features, w, false, true), b));
  // V[k] = sum_i a[i][k] * (x_i - c_k) = (A^T F)[k] - (sum_i a[i][k]) c_k
  diff::Value mass = g.reshape(g.col_sum(assign), kc, 1);
  diff::Value residuals =
      g.sub(g.matmul(assign, features, true, false), g.scale_rows(centers, mass));
  diff::Value intra = g.normalize_rows(residuals);
  return g.normalize_rows(g.reshape(intra, 1, kc * d));
}

// Column max-pool followed by a two-layer MLP, unit normalized.
diff::Value mlp_head(diff::Graph& g, const EncoderConfig& cfg,
                     diff::Value features, const std::string& prefix) {
  const auto d = static_cast<std::size_t>(cfg.feature_dim);
  const auto hidden = static_cast<std::size_t>(cfg.mlp_hidden);
  const auto k = static_cast<std::size_t>(cfg.mlp_ev_dim);
  diff::Value pool = g.col_max(features);
  diff::Value h1 = g.relu(g.add(g.matmul(pool, g.param(prefix + "head1.w", hidden, d),
                                         false, true),
                                g.param(prefix + "head1.b", 1, hidden)));
  diff::Value out = g.add(g.matmul(h1, g.param(prefix + "head2.w", k, hidden),
                                   false, true),
                          g.param(prefix + "head2.b", 1, k));
  return g.normalize_rows(out);
}

diff::Value head(diff::Graph& g, const EncoderConfig& cfg, diff::Value features,
                 const std::string& prefix) {
  return cfg.head == "netvlad" ? netvlad_head(g, cfg, features, prefix)
                               : mlp_head(g, cfg, features, prefix);
}

diff::Value image_features(diff::Graph& g, const EncoderConfig& cfg,
                           diff::Value pixels, const std::string& prefix) {
  const int w1 = conv_out(cfg.image_width, 4);
  const int h1 = conv_out(cfg.image_height, 4);
  diff::Value l1 = conv_layer(g, pixels, cfg.image_width, cfg.image_height, 3, 4,
                              prefix + "conv1.w", prefix + "conv1.b",
                              cfg.conv_channels);
  return conv_layer(g, l1, w1, h1, cfg.conv_channels, 2, prefix + "conv2.w",
                    prefix + "conv2.b", cfg.feature_dim);
}

diff::Value cloud_features(diff::Graph& g, const EncoderConfig& cfg,
                           diff::Value points, const std::string& prefix) {
  const auto hidden = static_cast<std::size_t>(cfg.mlp_hidden);
  const auto d = static_cast<std::size_t>(cfg.feature_dim);
  diff::Value h1 = g.relu(g.add(g.matmul(points, g.param(prefix + "mlp1.w", hidden, 3),
                                         false, true),
                                g.param(prefix + "mlp1.b", 1, hidden)));
  // The second layer stays linear so the descriptors keep signed values for
  // the residual aggregation.
  return g.add(g.matmul(h1, g.param(prefix + "mlp2.w", d, hidden), false, true),
               g.param(prefix + "mlp2.b", 1, d));
}

void add_uniform(diff::ParamStore& params, const std::string& name,
                 std::size_t rows, std::size_t cols, std::size_t fan_in,
                 Rng& rng) {
  diff::Tensor t(rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  params.add(name, std::move(t));
}

void add_zeros(diff::ParamStore& params, const std::string& name,
               std::size_t rows, std::size_t cols) {
  params.add(name, diff::Tensor(rows, cols));
}

void add_normal(diff::ParamStore& params, const std::string& name,
                std::size_t rows, std::size_t cols, Rng& rng) {
  diff::Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  params.add(name, std::move(t));
}

void init_head(const EncoderConfig& cfg, diff::ParamStore& params,
               const std::string& prefix, Rng& rng) {
  const auto kc = static_cast<std::size_t>(cfg.clusters);
  const auto d = static_cast<std::size_t>(cfg.feature_dim);
  if (cfg.head == "netvlad") {
    add_uniform(params, prefix + "vlad.w", kc, d, d, rng);
    add_zeros(params, prefix + "vlad.b", 1, kc);
    add_normal(params, prefix + "vlad.c", kc, d, rng);
  } else {
    const auto hidden = static_cast<std::size_t>(cfg.mlp_hidden);
    const auto k = static_cast<std::size_t>(cfg.mlp_ev_dim);
    add_uniform(params, prefix + "head1.w", hidden, d, d, rng);
    add_zeros(params, prefix + "head1.b", 1, hidden);
    add_uniform(params, prefix + "head2.w", k, hidden, hidden, rng);
    add_zeros(params, prefix + "head2.b", 1, k);
  }
}

}  // namespace

void init_image_params(const EncoderConfig& cfg, diff::ParamStore& params,
                       Rng& rng) {
  validate_encoder_config(cfg);
  const auto c1 = static_cast<std::size_t>(cfg.conv_channels);
  const auto d = static_cast<std::size_t>(cfg.feature_dim);
  add_uniform(params, "img.conv1.w", c1, 27, 27, rng);
  add_zeros(params, "img.conv1.b", 1, c1);
  add_uniform(params, "img.conv2.w", d, 9 * c1, 9 * c1, rng);
  add_zeros(params, "img.conv2.b", 1, d);
  init_head(cfg, params, "img.", rng);
}

void init_cloud_params(const EncoderConfig& cfg, diff::ParamStore& params,
                       Rng& rng) {
  validate_encoder_config(cfg);
  const auto d = static_cast<std::size_t>(cfg.feature_dim);
  const auto hidden = static_cast<std::size_t>(cfg.mlp_hidden);
  add_uniform(params, "cld.mlp1.w", hidden, 3, 3, rng);
  add_zeros(params, "cld.mlp1.b", 1, hidden);
  add_uniform(params, "cld.mlp2.w", d, hidden, hidden, rng);
  add_zeros(params, "cld.mlp2.b", 1, d);
  init_head(cfg, params, "cld.", rng);
}

void init_params(const EncoderConfig& cfg, diff::ParamStore& params, Rng& rng) {
  init_image_params(cfg, params, rng);
  init_cloud_params(cfg, params, rng);
}

diff::Value build_image_ev(diff::Graph& g, const EncoderConfig& cfg,
                           diff::Value pixels, const std::string& prefix) {
  return head(g, cfg, image_features(g, cfg, pixels, prefix), prefix);
}

diff::Value build_cloud_ev(diff::Graph& g, const EncoderConfig& cfg,
                           diff::Value points, const std::string& prefix) {
  return head(g, cfg, cloud_features(g, cfg, points, prefix), prefix);
}

diff::Tensor image_to_tensor(const Image& img) {
  diff::Tensor t(static_cast<std::size_t>(img.width) * img.height, 3);
  std::copy(img.pixels.begin(), img.pixels.end(), t.data().begin());
  return t;
}

PointCloud resample_cloud(const PointCloud& pc, int n_pts) {
  if (pc.empty()) throw DataError("cannot resample an empty point cloud");
  if (n_pts <= 0) throw ConfigError("point budget must be positive");
  PointCloud sorted = pc;
  std::sort(sorted.points.begin(), sorted.points.end());
  const std::size_t n = sorted.size();
  const auto budget = static_cast<std::size_t>(n_pts);
  // The fixed seed makes resampling a pure function of the point multiset.
  Rng rng(0x705c1d5a11ceb00bULL);
  PointCloud out;
  out.points.reserve(budget);
  if (n <= budget) {
    out.points = sorted.points;
    while (out.points.size() < budget) {
      out.points.push_back(sorted.points[rng.uniform_index(n)]);
    }
  } else {
    // Partial Fisher-Yates over an index array, without replacement.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < budget; ++i) {
      const std::size_t j = i + rng.uniform_index(n - i);
      std::swap(idx[i], idx[j]);
      out.points.push_back(sorted.points[idx[i]]);
    }
  }
  return out;
}

diff::Tensor cloud_to_tensor(const PointCloud& pc, int n_pts) {
  const PointCloud sampled = resample_cloud(pc, n_pts);
  diff::Tensor t(sampled.size(), 3);
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    t.at(i, 0) = sampled.points[i][0];
    t.at(i, 1) = sampled.points[i][1];
    t.at(i, 2) = sampled.points[i][2];
  }
  return t;
}

LocalFeatureMap extract_image_features(const Image& img,
                                       const diff::ParamStore& params,
                                       const EncoderConfig& cfg) {
  validate_encoder_config(cfg);
  if (img.width != cfg.image_width || img.height != cfg.image_height) {
    throw DataError("image size " + std::to_string(img.width) + "x" +
                    std::to_string(img.height) + " does not match encoder input " +
                    std::to_string(cfg.image_width) + "x" +
                    std::to_string(cfg.image_height));
  }
  diff::Graph g;
  diff::Value in = g.input("pixels", static_cast<std::size_t>(img.width) * img.height, 3);
  diff::Value feat = image_features(g, cfg, in, "img.");
  LocalFeatureMap map;
  map.dim = cfg.feature_dim;
  map.count = static_cast<int>(g.rows(feat));
  map.values = g.forward(feat, {{"pixels", image_to_tensor(img)}}, params);
  return map;
}

LocalFeatureMap extract_cloud_features(const PointCloud& pc,
                                       const diff::ParamStore& params,
                                       const EncoderConfig& cfg) {
  validate_encoder_config(cfg);
  if (pc.empty()) throw DataError("cannot extract features from an empty cloud");
  diff::Graph g;
  diff::Value in = g.input("points", static_cast<std::size_t>(cfg.n_pts), 3);
  diff::Value feat = cloud_features(g, cfg, in, "cld.");
  LocalFeatureMap map;
  map.dim = cfg.feature_dim;
  map.count = cfg.n_pts;
  map.values = g.forward(feat, {{"points", cloud_to_tensor(pc, cfg.n_pts)}}, params);
  return map;
}

namespace {

EmbeddingVector aggregate(const LocalFeatureMap& features,
                          const diff::ParamStore& params,
                          const EncoderConfig& cfg, const std::string& prefix,
                          bool netvlad) {
  if (features.dim != cfg.feature_dim) {
    throw ConfigError("feature dim " + std::to_string(features.dim) +
                      " does not match encoder feature_dim " +
                      std::to_string(cfg.feature_dim));
  }
  diff::Graph g;
  diff::Value in = g.constant(features.values);
  diff::Value root = netvlad ? netvlad_head(g, cfg, in, prefix)
                             : mlp_head(g, cfg, in, prefix);
  EmbeddingVector ev;
  ev.values = g.forward(root, {}, params).data();
  ev.modality = prefix == "img." ? Modality::kImage : Modality::kCloud;
  return ev;
}

}  // namespace

EmbeddingVector netvlad_aggregate(const LocalFeatureMap& features,
                                  const diff::ParamStore& params,
                                  const EncoderConfig& cfg,
                                  const std::string& prefix) {
  return aggregate(features, params, cfg, prefix, true);
}

EmbeddingVector mlp_aggregate(const LocalFeatureMap& features,
                              const diff::ParamStore& params,
                              const EncoderConfig& cfg,
                              const std::string& prefix) {
  return aggregate(features, params, cfg, prefix, false);
}

Embedder::Embedder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
  validate_encoder_config(cfg_);
  diff::Value img_in = image_graph_.input(
      "pixels", static_cast<std::size_t>(cfg_.image_width) * cfg_.image_height, 3);
  image_root_ = build_image_ev(image_graph_, cfg_, img_in, "img.");
  diff::Value cld_in =
      cloud_graph_.input("points", static_cast<std::size_t>(cfg_.n_pts), 3);
  cloud_root_ = build_cloud_ev(cloud_graph_, cfg_, cld_in, "cld.");
}

EmbeddingVector Embedder::embed_image(const Image& img,
                                      const diff::ParamStore& params) const {
  if (img.width != cfg_.image_width || img.height != cfg_.image_height) {
    throw DataError("image size " + std::to_string(img.width) + "x" +
                    std::to_string(img.height) + " does not match encoder input " +
                    std::to_string(cfg_.image_width) + "x" +
                    std::to_string(cfg_.image_height));
  }
  EmbeddingVector ev;
  ev.values =
      image_graph_.forward(image_root_, {{"pixels", image_to_tensor(img)}}, params)
          .data();
  ev.modality = Modality::kImage;
  return ev;
}

EmbeddingVector Embedder::embed_cloud(const PointCloud& pc,
                                      const diff::ParamStore& params) const {
  if (pc.empty()) throw DataError("cannot embed an empty point cloud");
  EmbeddingVector ev;
  ev.values = cloud_graph_
                  .forward(cloud_root_, {{"points", cloud_to_tensor(pc, cfg_.n_pts)}},
                           params)
                  .data();
  ev.modality = Modality::kCloud;
  return ev;
}

namespace {

void put_bytes(std::ofstream& f, const void* p, std::size_t n) {
  f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put_le(std::ofstream& f, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  }
  put_bytes(f, b, sizeof(T));
}

template <typename T>
T get_le(std::ifstream& f, const std::string& path) {
  unsigned char b[sizeof(T)];
  f.read(reinterpret_cast<char*>(b), sizeof(T));
  if (f.gcount() != sizeof(T)) throw DataError("truncated checkpoint: " + path);
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(b[i]) << (8 * i);
  }
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const diff::ParamStore& params,
                      const EncoderConfig& cfg) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint for writing: " + path);
  f.write("CML1", 4);
  put_le<std::uint64_t>(f, config_digest(cfg));
  put_le<std::uint32_t>(f, static_cast<std::uint32_t>(ev_length(cfg)));
  const auto names = params.names();
  put_le<std::uint32_t>(f, static_cast<std::uint32_t>(names.size()));
  for (const std::string& name : names) {
    const diff::Tensor& t = params.value(name);
    put_le<std::uint16_t>(f, static_cast<std::uint16_t>(name.size()));
    put_bytes(f, name.data(), name.size());
    put_le<std::uint32_t>(f, static_cast<std::uint32_t>(t.rows()));
    put_le<std::uint32_t>(f, static_cast<std::uint32_t>(t.cols()));
    for (double v : t.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      put_le<std::uint64_t>(f, bits);
    }
  }
  if (!f) throw DataError("failed writing checkpoint: " + path);
}

diff::ParamStore read_checkpoint(const std::string& path,
                                 const EncoderConfig& cfg) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  f.read(magic, 4);
  if (f.gcount() != 4 || std::memcmp(magic, "CML1", 4) != 0) {
    throw DataError("bad checkpoint magic (expected CML1): " + path);
  }
  const auto digest = get_le<std::uint64_t>(f, path);
  if (digest != config_digest(cfg)) {
    throw DataError("checkpoint config digest mismatch: " + path);
  }
  const auto k = get_le<std::uint32_t>(f, path);
  if (k != static_cast<std::uint32_t>(ev_length(cfg))) {
    throw DataError("checkpoint EV length mismatch: " + path);
  }
  const auto count = get_le<std::uint32_t>(f, path);
  diff::ParamStore params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get_le<std::uint16_t>(f, path);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    if (f.gcount() != name_len) throw DataError("truncated checkpoint: " + path);
    const auto rows = get_le<std::uint32_t>(f, path);
    const auto cols = get_le<std::uint32_t>(f, path);
    if (rows == 0 || cols == 0) {
      throw DataError("checkpoint record with zero dimension: " + path);
    }
    diff::Tensor t(rows, cols);
    for (std::size_t j = 0; j < t.size(); ++j) {
      const auto bits = get_le<std::uint64_t>(f, path);
      double v;
      std::memcpy(&v, &bits, sizeof(v));
      t[j] = v;
    }
    params.add(name, std::move(t));
  }
  return params;
}

}  // namespace crossloc
