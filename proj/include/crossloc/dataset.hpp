#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crossloc/geometry.hpp"
#include "crossloc/image.hpp"
#include "crossloc/point_cloud.hpp"

namespace crossloc {

// One stored acquisition: an image and a LiDAR sub-map captured at the same
// place, referenced by file path relative to the manifest directory.
struct Sample {
  std::uint64_t sample_id = 0;
  std::string run_id;
  Pose pose;
  std::string image_path;
  std::string submap_path;
};

// Ordered traversal of the mapped path under one condition tag.
struct Run {
  std::string run_id;
  std::string condition;
  std::vector<Sample> samples;
};

// Axis-aligned map-frame rectangle tagged with its split. Rectangles are
// closed sets, so boundary samples belong to the region.
struct Region {
  std::string region_id;
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  std::string split;  // "train" or "validation"
};

// Checks sample_id uniqueness and timestamp ordering. Throws DataError.
void validate_run(const Run& run);

// Checks rectangle bounds, split tags, and pairwise disjointness within each
// split. Throws DataError on violation.
void validate_regions(const std::vector<Region>& regions);

// Greedy spatial thinning: keeps the first sample, then every sample at
// planar distance >= spacing from the last kept one. Throws ConfigError for
// non-positive spacing and DataError for an empty run.
Run subsample_run(const Run& run, double spacing_m);

// Samples whose (x, y) lies inside any region carrying the requested split
// tag. Throws ConfigError when the region list is empty.
std::vector<Sample> filter_by_regions(const Run& run,
                                      const std::vector<Region>& regions,
                                      const std::string& split);

bool point_in_region(double x, double y, const Region& region);

// A sample with its media loaded into memory.
struct LoadedSample {
  Sample meta;
  Image image;
  PointCloud cloud;
};

// Reads the image and sub-map referenced by the sample, resolving paths
// against root. Throws DataError on missing or malformed media.
LoadedSample load_sample(const Sample& sample, const std::string& root);

// A run with all media in memory. samples[i] corresponds to run.samples[i].
struct LoadedRun {
  Run run;
  std::vector<LoadedSample> samples;
};

// Loads every sample of the run, resolving media paths against run_dir.
LoadedRun load_run(const Run& run, const std::string& run_dir);

// Scans runs_dir for subdirectories containing a manifest.txt and loads
// them in lexicographic directory order. Throws DataError when none exist.
std::vector<LoadedRun> load_runs_dir(const std::string& runs_dir);

// Text manifest, one header line then one line per sample:
//   run <run_id> <condition>
//   <sample_id> <timestamp> <x> <y> <z> <yaw> <pitch> <roll> <image> <submap>
// Floating point fields round trip exactly. Paths must not contain spaces.
void write_run_manifest(const Run& run, const std::string& path);
Run read_run_manifest(const std::string& path);

// Region list as a JSON array of objects with keys region_id, x_min, x_max,
// y_min, y_max, split. Both directions validate the regions.
void write_regions(const std::vector<Region>& regions, const std::string& path);
std::vector<Region> read_regions(const std::string& path);

}  // namespace crossloc
