#include "crossloc/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "crossloc/errors.hpp"

namespace crossloc {

void validate_run(const Run& run) {
  if (run.run_id.empty()) throw DataError("run has empty run_id");
  std::set<std::uint64_t> ids;
  for (std::size_t i = 0; i < run.samples.size(); ++i) {
    const Sample& s = run.samples[i];
    if (!ids.insert(s.sample_id).second) {
      throw DataError("duplicate sample_id " + std::to_string(s.sample_id) +
                      " in run " + run.run_id);
    }
    if (i > 0 && s.pose.timestamp < run.samples[i - 1].pose.timestamp) {
      throw DataError("samples out of timestamp order in run " + run.run_id);
    }
  }
}

namespace {

bool regions_overlap(const Region& a, const Region& b) {
  return a.x_min <= b.x_max && b.x_min <= a.x_max && a.y_min <= b.y_max &&
         b.y_min <= a.y_max;
}

}  // namespace

void validate_regions(const std::vector<Region>& regions) {
  for (const Region& r : regions) {
    if (r.x_min > r.x_max || r.y_min > r.y_max) {
      throw DataError("region " + r.region_id + " has inverted bounds");
    }
    if (r.split != "train" && r.split != "validation") {
      throw DataError("region " + r.region_id + " has unknown split '" +
                      r.split + "'");
    }
  }
  for (std::size_t i = 0; i < regions.size(); ++i) {
    for (std::size_t j = i + 1; j < regions.size(); ++j) {
      if (regions[i].split == regions[j].split &&
          regions_overlap(regions[i], regions[j])) {
        throw DataError("regions " + regions[i].region_id + " and " +
                        regions[j].region_id + " overlap within split " +
                        regions[i].split);
      }
    }
  }
}

Run subsample_run(const Run& run, double spacing_m) {
  if (spacing_m <= 0.0) throw ConfigError("subsample spacing must be positive");
  if (run.samples.empty()) {
    throw DataError("cannot subsample empty run " + run.run_id);
  }
  Run out;
  out.run_id = run.run_id;
  out.condition = run.condition;
  out.samples.push_back(run.samples.front());
  for (const Sample& s : run.samples) {
    if (place_distance(s.pose, out.samples.back().pose) >= spacing_m) {
      out.samples.push_back(s);
    }
  }
  return out;
}

LoadedSample load_sample(const Sample& sample, const std::string& root) {
  LoadedSample out;
  out.meta = sample;
  const std::filesystem::path base(root);
  out.image = read_ppm((base / sample.image_path).string());
  out.cloud = read_pcl((base / sample.submap_path).string());
  if (out.cloud.empty()) {
    throw DataError("sample " + std::to_string(sample.sample_id) +
                    " has an empty sub-map");
  }
  return out;
}

LoadedRun load_run(const Run& run, const std::string& run_dir) {
  LoadedRun out;
  out.run = run;
  out.samples.reserve(run.samples.size());
  for (const Sample& s : run.samples) {
    out.samples.push_back(load_sample(s, run_dir));
  }
  return out;
}

std::vector<LoadedRun> load_runs_dir(const std::string& runs_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(runs_dir)) {
    throw DataError("not a directory: " + runs_dir);
  }
  std::vector<fs::path> run_dirs;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.txt")) {
      run_dirs.push_back(entry.path());
    }
  }
  if (run_dirs.empty()) {
    throw DataError("no run directories with a manifest.txt under " + runs_dir);
  }
  std::sort(run_dirs.begin(), run_dirs.end());
  std::vector<LoadedRun> out;
  out.reserve(run_dirs.size());
  for (const fs::path& dir : run_dirs) {
    const Run run = read_run_manifest((dir / "manifest.txt").string());
    out.push_back(load_run(run, dir.string()));
  }
  return out;
}

bool point_in_region(double x, double y, const Region& region) {
  return x >= region.x_min && x <= region.x_max && y >= region.y_min &&
         y <= region.y_max;
}

std::vector<Sample> filter_by_regions(const Run& run,
                                      const std::vector<Region>& regions,
                                      const std::string& split) {
  if (regions.empty()) throw ConfigError("region list must not be empty");
  std::vector<Sample> out;
  for (const Sample& s : run.samples) {
    for (const Region& r : regions) {
      if (r.split == split && point_in_region(s.pose.x, s.pose.y, r)) {
        out.push_back(s);
        break;
      }
    }
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_run_manifest(const Run& run, const std::string& path) {
  validate_run(run);
  for (const Sample& s : run.samples) {
    if (s.image_path.find(' ') != std::string::npos ||
        s.submap_path.find(' ') != std::string::npos) {
      throw DataError("manifest paths must not contain spaces");
    }
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot open manifest for writing: " + path);
  f << "run " << run.run_id << " " << run.condition << "\n";
  for (const Sample& s : run.samples) {
    f << s.sample_id << " " << s.pose.timestamp << " " << fmt_double(s.pose.x)
      << " " << fmt_double(s.pose.y) << " " << fmt_double(s.pose.z) << " "
      << fmt_double(s.pose.yaw) << " " << fmt_double(s.pose.pitch) << " "
      << fmt_double(s.pose.roll) << " " << s.image_path << " " << s.submap_path
      << "\n";
  }
  if (!f) throw DataError("failed writing manifest: " + path);
}

void write_regions(const std::vector<Region>& regions, const std::string& path) {
  validate_regions(regions);
  nlohmann::json doc = nlohmann::json::array();
  for (const Region& r : regions) {
    doc.push_back({{"region_id", r.region_id},
                   {"x_min", r.x_min},
                   {"x_max", r.x_max},
                   {"y_min", r.y_min},
                   {"y_max", r.y_max},
                   {"split", r.split}});
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot open regions file for writing: " + path);
  f << doc.dump(2) << "\n";
  if (!f) throw DataError("failed writing regions file: " + path);
}

std::vector<Region> read_regions(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open regions file: " + path);
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed regions file " + path + ": " + e.what());
  }
  if (!doc.is_array()) {
    throw DataError("regions file must hold a JSON array: " + path);
  }
  std::vector<Region> regions;
  for (const nlohmann::json& item : doc) {
    Region r;
    try {
      r.region_id = item.at("region_id").get<std::string>();
      r.x_min = item.at("x_min").get<double>();
      r.x_max = item.at("x_max").get<double>();
      r.y_min = item.at("y_min").get<double>();
      r.y_max = item.at("y_max").get<double>();
      r.split = item.at("split").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed region entry in " + path + ": " + e.what());
    }
    regions.push_back(std::move(r));
  }
  validate_regions(regions);
  return regions;
}

Run read_run_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(f, line)) throw DataError("empty manifest: " + path);
  std::istringstream header(line);
  std::string tag;
  Run run;
  header >> tag >> run.run_id >> run.condition;
  if (tag != "run" || run.run_id.empty()) {
    throw DataError("malformed manifest header: " + path);
  }
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Sample s;
    s.run_id = run.run_id;
    double x, y, z, yaw, pitch, roll;
    if (!(ls >> s.sample_id >> s.pose.timestamp >> x >> y >> z >> yaw >> pitch >>
          roll >> s.image_path >> s.submap_path)) {
      throw DataError("malformed manifest line in " + path + ": " + line);
    }
    s.pose = make_pose(x, y, z, yaw, pitch, roll, s.pose.timestamp);
    run.samples.push_back(s);
  }
  validate_run(run);
  return run;
}

}  // namespace crossloc
