// Python bindings for the retrieval-side surface: pose math, embedding
// distances, the exact nearest-neighbor index, EVDB files, and synthetic
// world generation. Training stays C++-only; Python consumes its artifacts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "crossloc/errors.hpp"
#include "crossloc/evaluation.hpp"
#include "crossloc/geometry.hpp"
#include "crossloc/losses.hpp"
#include "crossloc/retrieval.hpp"
#include "crossloc/synthbench.hpp"

namespace py = pybind11;
using namespace crossloc;

PYBIND11_MODULE(_core, m) {
  m.doc() = "cross-modal place recognition core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<Pose>(m, "Pose")
      .def(py::init([](double x, double y, double z, double yaw, double pitch,
                       double roll, std::uint64_t timestamp) {
             return make_pose(x, y, z, yaw, pitch, roll, timestamp);
           }),
           py::arg("x") = 0.0, py::arg("y") = 0.0, py::arg("z") = 0.0,
           py::arg("yaw") = 0.0, py::arg("pitch") = 0.0, py::arg("roll") = 0.0,
           py::arg("timestamp") = 0)
      .def_readonly("x", &Pose::x)
      .def_readonly("y", &Pose::y)
      .def_readonly("z", &Pose::z)
      .def_readonly("yaw", &Pose::yaw)
      .def_readonly("pitch", &Pose::pitch)
      .def_readonly("roll", &Pose::roll)
      .def_readonly("timestamp", &Pose::timestamp)
      .def("__repr__", [](const Pose& p) {
        std::ostringstream os;
        os << "Pose(x=" << p.x << ", y=" << p.y << ", z=" << p.z << ")";
        return os.str();
      });

  m.def("place_distance", &place_distance, py::arg("a"), py::arg("b"));
  m.def("is_same_place", &is_same_place, py::arg("a"), py::arg("b"),
        py::arg("threshold_m") = 20.0);

  py::enum_<Modality>(m, "Modality")
      .value("IMAGE", Modality::kImage)
      .value("CLOUD", Modality::kCloud);

  py::enum_<DistanceKind>(m, "DistanceKind")
      .value("L2", DistanceKind::kL2)
      .value("MSE", DistanceKind::kMse)
      .value("COSINE", DistanceKind::kCosine)
      .value("SMOOTH_L1", DistanceKind::kSmoothL1);

  m.def("distance", &distance, py::arg("kind"), py::arg("u"), py::arg("v"),
        "EV distance under the chosen kind");

  py::class_<IndexEntry>(m, "IndexEntry")
      .def(py::init([](std::uint64_t sample_id, const Pose& pose,
                       Modality modality, std::vector<double> ev) {
             IndexEntry e;
             e.sample_id = sample_id;
             e.pose = pose;
             e.modality = modality;
             e.ev = std::move(ev);
             return e;
           }),
           py::arg("sample_id"), py::arg("pose"), py::arg("modality"),
           py::arg("ev"))
      .def_readonly("sample_id", &IndexEntry::sample_id)
      .def_readonly("pose", &IndexEntry::pose)
      .def_readonly("modality", &IndexEntry::modality)
      .def_readonly("ev", &IndexEntry::ev);

  py::class_<QueryHit>(m, "QueryHit")
      .def_readonly("sample_id", &QueryHit::sample_id)
      .def_readonly("pose", &QueryHit::pose)
      .def_readonly("modality", &QueryHit::modality)
      .def_readonly("distance", &QueryHit::distance);

  py::class_<EmbeddingIndex>(m, "EmbeddingIndex")
      .def_static("build", &EmbeddingIndex::build, py::arg("entries"))
      .def("__len__", &EmbeddingIndex::size)
      .def_property_readonly("dim", &EmbeddingIndex::dim)
      .def(
          "knn",
          [](const EmbeddingIndex& index, const std::vector<double>& query,
             std::size_t k) { return index.knn(query, k); },
          py::arg("query"), py::arg("k"));

  m.def("write_evdb", &write_evdb, py::arg("path"), py::arg("entries"));
  m.def("read_evdb", &read_evdb, py::arg("path"));

  m.def("one_percent_k", &one_percent_k, py::arg("db_size"));

  m.def(
      "generate_benchmark",
      [](std::uint64_t seed, int places, int runs, const std::string& out_dir) {
        const SyntheticWorld world = generate_world(seed, places);
        export_runs(generate_runs(world, runs), world, out_dir);
      },
      py::arg("seed"), py::arg("places"), py::arg("runs"), py::arg("out_dir"),
      "Generate and export a synthetic benchmark in one call");
  m.def("place_of_sample", &place_of_sample, py::arg("sample_id"),
        "True place index behind a generated sample id");
}
