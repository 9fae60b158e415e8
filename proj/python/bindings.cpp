#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "atlas/divergence.hpp"
#include "atlas/eval.hpp"
#include "atlas/experiments.hpp"
#include "atlas/features.hpp"
#include "atlas/io.hpp"
#include "atlas/partitions.hpp"
#include "atlas/poi_world.hpp"
#include "atlas/recovery.hpp"
#include "atlas/tilt_fit.hpp"

namespace py = pybind11;
using namespace atlas;

namespace {

using Paths = std::vector<std::vector<PoiId>>;

CompositionMatrix composition(const MatrixXd& p) { return CompositionMatrix(p, Provenance::Custom, 1e-9); }

std::vector<Trajectory> trajectories(const Paths& paths) {
  std::vector<Trajectory> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back({p, std::nullopt, std::nullopt});
  return out;
}

Paths tokens(const std::vector<Trajectory>& ts) {
  Paths out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.push_back(t.tokens);
  return out;
}

BaseChain chain(const VectorXd& initial, const MatrixXd& transition, int horizon) {
  BaseChain b{initial, transition, horizon};
  b.validate(1e-9);
  return b;
}

py::dict fit_report(const FitReport& r) {
  py::dict d;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["eps_opt"] = r.eps_opt;
  d["grad_norm"] = r.grad_norm;
  d["target_clipped"] = r.target_clipped;
  d["aggregate_js"] = r.aggregate_js;
  d["aggregate_tv"] = r.aggregate_tv;
  return d;
}

}  // namespace

PYBIND11_MODULE(_atlas_lab, m) {
  m.doc() = "Learning group-conditioned Markov mobility models from regional aggregates";

  // Translators registered later are tried first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  py::class_<World>(m, "World")
      .def_property_readonly("vocab", [](const World& w) { return w.catalog.vocab(); })
      .def_property_readonly("n_groups", [](const World& w) { return w.model.n_groups(); })
      .def_property_readonly("n_regions", [](const World& w) { return w.config.n_regions; })
      .def_property_readonly("horizon", [](const World& w) { return w.model.horizon(); })
      .def_property_readonly("categories", [](const World& w) { return w.catalog.categories(); })
      .def_property_readonly("initial", [](const World& w) { return w.model.base.initial; })
      .def_property_readonly("transition", [](const World& w) { return w.model.base.transition; })
      .def_property_readonly("tilts", [](const World& w) { return w.model.tilts; })
      .def("to_json", [](const World& w) { return to_json(w).dump(); })
      .def_static("from_json", [](const std::string& s) { return world_from_json(Json::parse(s)); })
      .def(
          "group_means",
          [](const World& w, const std::string& feature_map) {
            return exact_group_means(FeatureMap(feature_map_from_string(feature_map), w.catalog), w.model).values;
          },
          py::arg("feature_map") = "poi_histogram")
      .def(
          "sample",
          [](const World& w, int group, int n, std::uint64_t seed, std::uint64_t stream) {
            const GroupSamplers s(w.model);
            Rng rng = make_rng(seed, stream);
            return tokens(sample_group(s, group, n, rng));
          },
          py::arg("group"), py::arg("n"), py::arg("seed") = 0, py::arg("stream") = 0)
      .def(
          "regional_aggregates",
          [](const World& w, const MatrixXd& p, const std::string& feature_map) {
            const FeatureMap f(feature_map_from_string(feature_map), w.catalog);
            return exact_regional_aggregates(composition(p), exact_group_means(f, w.model)).values;
          },
          py::arg("composition"), py::arg("feature_map") = "poi_histogram");

  m.def(
      "build_world",
      [](const std::string& config_json) { return build_world(world_config_from_json(Json::parse(config_json))); },
      py::arg("config_json") = "{}");

  m.def(
      "builtin_partition",
      [](const std::string& name) { return build_builtin_partition(builtin_partition_from_string(name)).matrix(); },
      py::arg("name"));

  m.def(
      "partition_diagnostics",
      [](const MatrixXd& p, double rank_tol) {
        const PartitionDiagnostics d = diagnostics(composition(p), rank_tol);
        py::dict out;
        out["rank"] = d.rank;
        out["sigma_min"] = d.sigma_min;
        out["sigma_max"] = d.sigma_max;
        out["condition_number"] = d.condition_number;
        out["singular_values"] = d.singular_values;
        return out;
      },
      py::arg("composition"), py::arg("rank_tol") = kDefaultRankTol);

  m.def(
      "recover_group_means",
      [](const MatrixXd& p, const MatrixXd& v, double rcond) {
        const RecoveryResult r = recover_group_means(composition(p), v, rcond);
        return py::make_tuple(r.m_hat, r.residual_fro, r.rank_used);
      },
      py::arg("composition"), py::arg("aggregates"), py::arg("rcond") = kDefaultRcond);

  m.def(
      "fit_base_chain",
      [](const Paths& paths, int vocab, double eps) {
        const BaseChain b = fit_base_chain(trajectories(paths), vocab, eps);
        return py::make_tuple(b.initial, b.transition);
      },
      py::arg("trajectories"), py::arg("vocab"), py::arg("smoothing_eps") = 1e-3);

  m.def(
      "tilted_poi_mean",
      [](const VectorXd& initial, const MatrixXd& transition, int horizon, const VectorXd& tilt) {
        return tilted_poi_mean(chain(initial, transition, horizon), tilt);
      },
      py::arg("initial"), py::arg("transition"), py::arg("horizon"), py::arg("tilt"));

  m.def(
      "fit",
      [](const World& w, const MatrixXd& p, const MatrixXd& v_hat, const std::string& feature_map,
         const std::string& mode, bool ground_truth_base) {
        const FeatureMap f(feature_map_from_string(feature_map), w.catalog);
        const CompositionMatrix comp = composition(p);
        AggregateMatrix agg;
        agg.values = v_hat;
        AtlasOptions o;
        o.mode = fit_mode_from_string(mode);
        BaseChain base = w.model.base;
        if (!ground_truth_base) {
          const GroupSamplers s(w.model);
          Rng rng = make_rng(w.config.seed, 1);
          std::vector<Trajectory> pool;
          for (int i = 0; i < 20000; ++i) pool.push_back(s.sample(i % w.model.n_groups(), rng));
          base = fit_base_chain(pool, w.catalog.vocab(), 1e-3);
        }
        const AtlasFit fit = [&] {
          py::gil_scoped_release release;
          return atlas_fit(base, f, comp, agg, o);
        }();
        MatrixXd means(fit.tilts.n_groups(), f.dim());
        for (int d = 0; d < fit.tilts.n_groups(); ++d)
          means.row(d) = f.expected(fit.tilts.group_marginals(d)).transpose();
        py::dict out;
        out["params"] = fit.tilts.params;
        out["group_means"] = means;
        out["report"] = fit_report(fit.report);
        return out;
      },
      py::arg("world"), py::arg("composition"), py::arg("aggregates"), py::arg("feature_map") = "poi_histogram",
      py::arg("mode") = "two_stage", py::arg("ground_truth_base") = true);

  m.def("js_divergence", &js_divergence, py::arg("p"), py::arg("q"));
  m.def("tv_distance", &tv_distance, py::arg("p"), py::arg("q"));
  m.def("gap_closed", &gap_closed, py::arg("baseline"), py::arg("strong"), py::arg("atlas"));
  m.def("haversine_km", &haversine_km, py::arg("lat1"), py::arg("lon1"), py::arg("lat2"), py::arg("lon2"));
  m.def("finite_sample_bound", &finite_sample_bound, py::arg("B"), py::arg("m"), py::arg("G"), py::arg("n_min"),
        py::arg("delta"));
  m.def(
      "poi_frequency_jsd",
      [](int vocab, const Paths& real, const Paths& synth) {
        return poi_frequency_jsd(vocab, trajectories(real), trajectories(synth));
      },
      py::arg("vocab"), py::arg("real"), py::arg("synth"));

  m.def(
      "run_experiment",
      [](const std::string& kind, const std::string& config_json, const std::filesystem::path& base_dir) {
        const ExperimentConfig c = experiment_config_from_json(Json::parse(config_json), base_dir);
        py::gil_scoped_release release;
        if (kind == "rq1") return write_reports(run_rq1(c), c);
        if (kind == "rq2") return write_reports(run_rq2(c), c);
        if (kind == "rq3") return write_reports(run_rq3(c), c);
        throw ConfigError("experiment must be rq1, rq2 or rq3");
      },
      py::arg("kind"), py::arg("config_json"), py::arg("base_dir") = std::filesystem::path{});
}
