// crossloc: command-line pipeline for cross-modal place recognition.
//
// Subcommands cover the whole workflow: gen-world creates a synthetic
// benchmark, train fits the encoders, embed writes embedding databases,
// query ranks database entries for one sample, and eval scores retrieval
// over all run pairs. Every command is deterministic given its flags, so
// reruns produce byte-identical artifacts.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "crossloc/config.hpp"
#include "crossloc/encoders.hpp"
#include "crossloc/errors.hpp"
#include "crossloc/evaluation.hpp"
#include "crossloc/retrieval.hpp"
#include "crossloc/synthbench.hpp"
#include "crossloc/training.hpp"

namespace {

using namespace crossloc;

struct GenWorldArgs {
  std::uint64_t seed = 42;
  int places = 100;
  int runs = 4;
  std::string out;
};

void cmd_gen_world(const GenWorldArgs& args) {
  const SyntheticWorld world = generate_world(args.seed, args.places);
  const std::vector<LoadedRun> runs = generate_runs(world, args.runs);
  export_runs(runs, world, args.out);
  std::cout << "wrote " << runs.size() << " runs (" << args.places
            << " places each) to " << args.out << "\n";
}

struct TrainArgs {
  std::string config_path;
  std::string data_dir;
  std::string regions_path;
  std::string paradigm;
  std::string out_checkpoint;
  std::string log_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int epochs = 0;
  bool epochs_set = false;
};

AppConfig resolve_config(const std::string& config_path) {
  return config_path.empty() ? AppConfig{} : load_app_config(config_path);
}

// Pulls every sample inside a train region out of the loaded runs. Without
// a region file all samples are used.
std::vector<LoadedSample> collect_training_samples(
    const std::vector<LoadedRun>& runs, const std::string& regions_path) {
  std::vector<LoadedSample> out;
  if (regions_path.empty()) {
    for (const LoadedRun& lr : runs) {
      out.insert(out.end(), lr.samples.begin(), lr.samples.end());
    }
    return out;
  }
  const std::vector<Region> regions = read_regions(regions_path);
  for (const LoadedRun& lr : runs) {
    const std::vector<Sample> kept =
        filter_by_regions(lr.run, regions, "train");
    std::size_t cursor = 0;
    for (const Sample& s : kept) {
      while (cursor < lr.samples.size() &&
             lr.samples[cursor].meta.sample_id != s.sample_id) {
        ++cursor;
      }
      if (cursor == lr.samples.size()) {
        throw DataError("train sample " + std::to_string(s.sample_id) +
                        " missing from loaded run " + lr.run.run_id);
      }
      out.push_back(lr.samples[cursor]);
    }
  }
  return out;
}

std::string default_regions_path(const std::string& data_dir) {
  const std::filesystem::path p = std::filesystem::path(data_dir) / "regions.json";
  return std::filesystem::exists(p) ? p.string() : std::string();
}

void cmd_train(const TrainArgs& args) {
  AppConfig cfg = resolve_config(args.config_path);
  if (!args.data_dir.empty()) cfg.runs_dir = args.data_dir;
  if (!args.regions_path.empty()) cfg.regions_path = args.regions_path;
  if (!args.paradigm.empty()) cfg.train.paradigm = args.paradigm;
  if (args.seed_set) cfg.train.seed = args.seed;
  if (args.epochs_set) cfg.train.epochs = args.epochs;
  if (cfg.runs_dir.empty()) {
    throw ConfigError("no training data: pass --data or set paths.runs_dir");
  }
  if (cfg.regions_path.empty()) {
    cfg.regions_path = default_regions_path(cfg.runs_dir);
  }
  validate_app_config(cfg);

  const std::vector<LoadedRun> runs = load_runs_dir(cfg.runs_dir);
  TrainingSet set =
      build_training_set(collect_training_samples(runs, cfg.regions_path));
  std::cout << "training on " << set.samples.size() << " samples in "
            << set.places.size() << " places, paradigm " << cfg.train.paradigm
            << "\n";

  TrainResult result;
  if (cfg.train.paradigm == "teacher_student") {
    TrainResult teacher = train_teacher(set, cfg.train);
    result = train_student(set, teacher.checkpoint, cfg.train);
    result.log.insert(result.log.begin(), teacher.log.begin(),
                      teacher.log.end());
  } else {
    result = train_combined(set, cfg.train);
  }
  write_checkpoint(args.out_checkpoint, result.checkpoint.params,
                   cfg.train.encoder);
  if (!args.log_path.empty()) write_train_log(result.log, args.log_path);
  if (!result.log.empty()) {
    std::printf("final epoch %d mean loss %.6f\n", result.log.back().epoch,
                result.log.back().loss);
  }
  std::cout << "wrote checkpoint " << args.out_checkpoint << "\n";
}

struct EmbedArgs {
  std::string config_path;
  std::string checkpoint;
  std::string run_dir;
  std::string modality = "image";
  std::string out_evdb;
};

void cmd_embed(const EmbedArgs& args) {
  const AppConfig cfg = resolve_config(args.config_path);
  const Modality modality = parse_modality(args.modality);
  const diff::ParamStore params =
      read_checkpoint(args.checkpoint, cfg.train.encoder);
  const Run run = read_run_manifest(
      (std::filesystem::path(args.run_dir) / "manifest.txt").string());
  const LoadedRun loaded = load_run(run, args.run_dir);
  const Embedder embedder(cfg.train.encoder);
  const std::vector<IndexEntry> entries =
      embed_samples(loaded.samples, modality, embedder, params);
  write_evdb(args.out_evdb, entries);
  std::cout << "wrote " << entries.size() << " embeddings to " << args.out_evdb
            << "\n";
}

struct QueryArgs {
  std::string config_path;
  std::string evdb;
  std::string checkpoint;
  std::string run_dir;
  std::uint64_t query_sample = 0;
  std::string modality = "image";
  int k = 5;
};

void cmd_query(const QueryArgs& args) {
  if (args.k < 1) throw ConfigError("--k must be at least 1");
  const AppConfig cfg = resolve_config(args.config_path);
  const Modality modality = parse_modality(args.modality);
  const diff::ParamStore params =
      read_checkpoint(args.checkpoint, cfg.train.encoder);
  const EmbeddingIndex index = EmbeddingIndex::build(read_evdb(args.evdb));
  const Run run = read_run_manifest(
      (std::filesystem::path(args.run_dir) / "manifest.txt").string());
  const Sample* found = nullptr;
  for (const Sample& s : run.samples) {
    if (s.sample_id == args.query_sample) {
      found = &s;
      break;
    }
  }
  if (found == nullptr) {
    throw DataError("sample " + std::to_string(args.query_sample) +
                    " not in run " + run.run_id);
  }
  const LoadedSample sample = load_sample(*found, args.run_dir);
  const Embedder embedder(cfg.train.encoder);
  const EmbeddingVector ev = modality == Modality::kImage
                                 ? embedder.embed_image(sample.image, params)
                                 : embedder.embed_cloud(sample.cloud, params);
  const QueryResult hits = index.knn(ev.values, args.k);
  std::printf("query %llu modality %s db %s entries %zu\n",
              static_cast<unsigned long long>(args.query_sample),
              to_string(modality).c_str(), args.evdb.c_str(), index.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    std::printf("rank %zu sample %llu distance %.6f same_place %d\n", i + 1,
                static_cast<unsigned long long>(hits[i].sample_id),
                hits[i].distance,
                is_same_place(sample.meta.pose, hits[i].pose) ? 1 : 0);
  }
}

struct EvalArgs {
  std::string config_path;
  std::string runs_dir;
  std::string checkpoint;
  std::string regions_path;
  std::string protocol = "standard";
  std::string report_path;
  std::string curves_path;
  int k_max = 0;
  bool k_max_set = false;
};

void cmd_eval(const EvalArgs& args) {
  const AppConfig cfg = resolve_config(args.config_path);
  EvalOptions opts = protocol_options(args.protocol);
  opts.k_max = args.k_max_set ? args.k_max : cfg.eval.k_max;
  opts.threshold_m = cfg.eval.threshold_m;
  std::string regions_path = args.regions_path;
  if (regions_path.empty()) regions_path = default_regions_path(args.runs_dir);
  if (regions_path.empty()) {
    throw ConfigError("no regions file: pass --regions or add regions.json "
                      "next to the runs");
  }
  const std::vector<Region> regions = read_regions(regions_path);
  const std::vector<LoadedRun> runs = load_runs_dir(args.runs_dir);
  const diff::ParamStore params =
      read_checkpoint(args.checkpoint, cfg.train.encoder);
  const Embedder embedder(cfg.train.encoder);
  const RecallReport report =
      evaluate_runs(runs, regions, embedder, params, opts);
  write_report_summary(report, args.report_path);
  if (!args.curves_path.empty()) write_recall_curves(report, args.curves_path);
  for (const auto& [name, curve] : report.mean_recall_at) {
    std::printf("mean %s recall@1 %.6f recall@5 %.6f\n", name.c_str(),
                curve[0], curve[4]);
  }
  std::cout << "wrote report " << args.report_path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-modal place recognition pipeline"};
  app.require_subcommand(1);

  GenWorldArgs gen;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-world", "generate a synthetic benchmark");
  gen_cmd->add_option("--seed", gen.seed, "world seed");
  gen_cmd->add_option("--places", gen.places, "number of places (>= 8)");
  gen_cmd->add_option("--runs", gen.runs, "number of runs (>= 2)");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "train the encoders");
  train_cmd->add_option("--config", train.config_path, "JSON config file");
  train_cmd->add_option("--data", train.data_dir, "runs directory");
  train_cmd->add_option("--regions", train.regions_path, "regions JSON file");
  train_cmd->add_option("--paradigm", train.paradigm,
                        "combined or teacher_student");
  train_cmd->add_option("--out-checkpoint", train.out_checkpoint,
                        "checkpoint output path")
      ->required();
  train_cmd->add_option("--log", train.log_path, "epoch log output path");
  CLI::Option* seed_opt =
      train_cmd->add_option("--seed", train.seed, "training seed");
  CLI::Option* epochs_opt =
      train_cmd->add_option("--epochs", train.epochs, "epoch count");

  EmbedArgs embed;
  CLI::App* embed_cmd =
      app.add_subcommand("embed", "embed one run into an EVDB file");
  embed_cmd->add_option("--config", embed.config_path, "JSON config file");
  embed_cmd->add_option("--checkpoint", embed.checkpoint, "checkpoint path")
      ->required();
  embed_cmd->add_option("--run", embed.run_dir, "run directory")->required();
  embed_cmd->add_option("--modality", embed.modality, "image|cloud");
  embed_cmd->add_option("--out-evdb", embed.out_evdb, "EVDB output path")
      ->required();

  QueryArgs query;
  CLI::App* query_cmd =
      app.add_subcommand("query", "rank database entries for one sample");
  query_cmd->add_option("--config", query.config_path, "JSON config file");
  query_cmd->add_option("--evdb", query.evdb, "EVDB path")->required();
  query_cmd->add_option("--checkpoint", query.checkpoint, "checkpoint path")
      ->required();
  query_cmd->add_option("--run", query.run_dir, "run directory of the query")
      ->required();
  query_cmd->add_option("--query-sample", query.query_sample, "query sample id")
      ->required();
  query_cmd->add_option("--modality", query.modality, "query modality");
  query_cmd->add_option("--k", query.k, "neighbors to return");

  EvalArgs eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "score retrieval over all run pairs");
  eval_cmd->add_option("--config", eval.config_path, "JSON config file");
  eval_cmd->add_option("--runs-dir", eval.runs_dir, "runs directory")
      ->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint path")
      ->required();
  eval_cmd->add_option("--regions", eval.regions_path, "regions JSON file");
  eval_cmd->add_option("--protocol", eval.protocol, "standard or sparse");
  eval_cmd->add_option("--report", eval.report_path, "report output path")
      ->required();
  eval_cmd->add_option("--curves", eval.curves_path, "recall curve output path");
  CLI::Option* kmax_opt =
      eval_cmd->add_option("--k-max", eval.k_max, "largest k in the curves");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  train.seed_set = seed_opt->count() > 0;
  train.epochs_set = epochs_opt->count() > 0;
  eval.k_max_set = kmax_opt->count() > 0;

  try {
    if (gen_cmd->parsed()) {
      cmd_gen_world(gen);
    } else if (train_cmd->parsed()) {
      cmd_train(train);
    } else if (embed_cmd->parsed()) {
      cmd_embed(embed);
    } else if (query_cmd->parsed()) {
      cmd_query(query);
    } else if (eval_cmd->parsed()) {
      cmd_eval(eval);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
