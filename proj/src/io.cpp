#include "atlas/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace atlas {

namespace {

constexpr const char* kWorldFormat = "atlas-lab/world";
constexpr const char* kTiltFormat = "atlas-lab/tilts";

// JSON has no infinity; encode non-finite numbers as strings.
Json number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::string_view to_string(TiltTarget t) { return t == TiltTarget::Unigram ? "unigram" : "transition"; }

TiltTarget tilt_target_from_string(const std::string& s) {
  if (s == "unigram") return TiltTarget::Unigram;
  if (s == "transition") return TiltTarget::Transition;
  throw ConfigError("tilt_target must be 'unigram' or 'transition'");
}

FitMethod fit_method_from_string(const std::string& s) {
  for (FitMethod m : {FitMethod::Dual, FitMethod::DirectL2, FitMethod::GroundTruth, FitMethod::Baseline})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown fitted_by '" + s + "'");
}

}  // namespace

Json to_json(const MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols) throw ConfigError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

Json to_json(const VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("vector must be an array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

Json to_json(const WorldConfig& c) {
  return {{"V", c.n_pois},
          {"C", c.n_categories},
          {"K", c.n_groups},
          {"G", c.n_regions},
          {"T", c.horizon},
          {"seed", c.seed},
          {"tilt_scale", c.tilt_scale},
          {"tilt_target", std::string(to_string(c.tilt_target))},
          {"grid_extent", {c.grid.lat_min, c.grid.lat_max, c.grid.lon_min, c.grid.lon_max}}};
}

WorldConfig world_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("world config must be an object");
  WorldConfig c;
  c.n_pois = get_or(j, "V", c.n_pois);
  c.n_categories = get_or(j, "C", c.n_categories);
  c.n_groups = get_or(j, "K", c.n_groups);
  c.n_regions = get_or(j, "G", c.n_regions);
  c.horizon = get_or(j, "T", c.horizon);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.tilt_scale = get_or(j, "tilt_scale", c.tilt_scale);
  if (j.contains("tilt_target")) c.tilt_target = tilt_target_from_string(j.at("tilt_target").get<std::string>());
  if (j.contains("grid_extent")) {
    const auto& g = j.at("grid_extent");
    if (!g.is_array() || g.size() != 4) throw ConfigError("grid_extent must be [lat_min, lat_max, lon_min, lon_max]");
    c.grid = {g[0].get<double>(), g[1].get<double>(), g[2].get<double>(), g[3].get<double>()};
  }
  c.validate();
  return c;
}

Json to_json(const BaseChain& b) {
  return {{"horizon", b.horizon}, {"initial", to_json(b.initial)}, {"transition", to_json(b.transition)}};
}

BaseChain base_chain_from_json(const Json& j) {
  BaseChain b;
  b.horizon = j.at("horizon").get<int>();
  b.initial = vector_from_json(j.at("initial"));
  b.transition = matrix_from_json(j.at("transition"));
  b.validate(1e-9);
  return b;
}

Json to_json(const World& w) {
  Json pois = Json::array();
  for (const auto& p : w.catalog.pois) pois.push_back({p.id, p.lat, p.lon, p.category});
  Json tilts = Json::array();
  for (const auto& t : w.model.tilts) tilts.push_back(to_json(t));
  Json j = {{"format", kWorldFormat},
            {"version", 1},
            {"config", to_json(w.config)},
            {"catalog", {{"n_categories", w.catalog.n_categories}, {"pois", pois}}},
            {"base", to_json(w.model.base)},
            {"tilt_target", std::string(to_string(w.model.target))},
            {"tilts", tilts}};
  if (w.model.target == TiltTarget::Transition) {
    Json gt = Json::array();
    for (const auto& m : w.model.group_transitions) gt.push_back(to_json(m));
    j["group_transitions"] = gt;
  }
  return j;
}

World world_from_json(const Json& j) {
  if (j.value("format", "") != kWorldFormat) throw ConfigError("not an atlas-lab world document");
  World w;
  w.config = world_config_from_json(j.at("config"));
  w.catalog.n_categories = j.at("catalog").at("n_categories").get<int>();
  for (const auto& p : j.at("catalog").at("pois"))
    w.catalog.pois.push_back({p.at(0).get<PoiId>(), p.at(1).get<double>(), p.at(2).get<double>(), p.at(3).get<int>()});
  w.catalog.validate();
  w.model.base = base_chain_from_json(j.at("base"));
  w.model.target = tilt_target_from_string(j.at("tilt_target").get<std::string>());
  for (const auto& t : j.at("tilts")) w.model.tilts.push_back(vector_from_json(t));
  if (w.model.target == TiltTarget::Transition)
    for (const auto& m : j.at("group_transitions")) w.model.group_transitions.push_back(matrix_from_json(m));
  if (w.model.base.vocab() != w.catalog.vocab()) throw ConfigError("world: catalog and chain sizes differ");
  return w;
}

Json to_json(const TiltParams& t) {
  Json params = Json::array();
  for (const auto& p : t.params) params.push_back(to_json(p));
  Json cats = Json::array();
  for (int c : t.map.categories()) cats.push_back(c);
  return {{"format", kTiltFormat},
          {"version", 1},
          {"feature_map", std::string(to_string(t.map.kind()))},
          {"n_categories", t.map.n_categories()},
          {"categories", cats},
          {"fitted_by", std::string(to_string(t.fitted_by))},
          {"base", to_json(t.base)},
          {"params", params}};
}

TiltParams tilts_from_json(const Json& j) {
  if (j.value("format", "") != kTiltFormat) throw ConfigError("not an atlas-lab tilt document");
  FeatureMap map(feature_map_from_string(j.at("feature_map").get<std::string>()),
                 j.at("categories").get<std::vector<int>>(), j.at("n_categories").get<int>());
  TiltParams t{base_chain_from_json(j.at("base")), std::move(map), {},
               fit_method_from_string(j.at("fitted_by").get<std::string>())};
  for (const auto& p : j.at("params")) {
    t.params.push_back(vector_from_json(p));
    if (t.params.back().size() != t.map.dim()) throw ConfigError("tilt parameter has the wrong dimension");
  }
  return t;
}

Json to_json(const FitReport& r) {
  return {{"iterations", r.iterations},
          {"final_objective", number(r.final_objective)},
          {"grad_norm", number(r.grad_norm)},
          {"converged", r.converged},
          {"target_clipped", r.target_clipped},
          {"eps_opt", number(r.eps_opt)},
          {"aggregate_js", r.aggregate_js},
          {"aggregate_tv", r.aggregate_tv}};
}

Json to_json(const BoundReport& r) {
  return {{"eps_samp", number(r.eps_samp)}, {"eps_opt", number(r.eps_opt)}, {"total_bound", number(r.total_bound)},
          {"sigma_min", number(r.sigma_min)}, {"delta", r.delta}, {"B", r.b}, {"m", r.m}, {"G", r.g},
          {"n_min", r.n_min}};
}

Json to_json(const RecoveryResult& r) {
  return {{"m_hat", to_json(r.m_hat)},
          {"residual_fro", number(r.residual_fro)},
          {"sigma_min_used", number(r.sigma_min_used)},
          {"rank_used", r.rank_used}};
}

Json to_json(const PartitionDiagnostics& d) {
  return {{"sigma_min", number(d.sigma_min)},
          {"sigma_max", number(d.sigma_max)},
          {"rank", d.rank},
          {"condition_number", number(d.condition_number)},
          {"singular_values", to_json(d.singular_values)}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
}

}  // namespace atlas
