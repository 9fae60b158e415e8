#include "atlas/downstream.hpp"

#include <cmath>

#include "atlas/eval.hpp"

namespace atlas {

VectorXd NextPoiModel::scores(PoiId prev) const {
  if (prev < 0 || prev >= vocab()) throw DomainError("context token outside vocabulary");
  const double denom = unigram_counts(prev) + vocab() * smoothing_eps;
  if (denom <= 0.0) return VectorXd::Constant(vocab(), 1.0 / vocab());
  return (bigram_counts.row(prev).transpose().array() + smoothing_eps) / denom;
}

NextPoiModel train_next_poi(std::span<const Trajectory> trajectories, int vocab, double eps, int group) {
  if (trajectories.empty()) throw DomainError("next-POI training corpus is empty");
  if (vocab < 1) throw ConfigError("vocabulary must be non-empty");
  if (!(eps >= 0.0)) throw ConfigError("smoothing must be >= 0");
  NextPoiModel m;
  m.bigram_counts = MatrixXd::Zero(vocab, vocab);
  m.unigram_counts = VectorXd::Zero(vocab);
  m.smoothing_eps = eps;
  m.group = group;
  for (const auto& t : trajectories) {
    for (PoiId x : t.tokens)
      if (x < 0 || x >= vocab) throw DomainError("token outside vocabulary");
    for (std::size_t i = 1; i < t.tokens.size(); ++i) {
      m.bigram_counts(t.tokens[i - 1], t.tokens[i]) += 1.0;
      m.unigram_counts(t.tokens[i - 1]) += 1.0;
    }
  }
  return m;
}

int rank_of(const VectorXd& scores, PoiId truth) {
  const double s = scores(truth);
  int rank = 1;
  for (Eigen::Index v = 0; v < scores.size(); ++v)
    if (scores(v) > s || (scores(v) == s && v < truth)) ++rank;
  return rank;
}

DownstreamMetrics evaluate_next_poi(const NextPoiModel& model, const PoiCatalog& catalog,
                                    std::span<const Trajectory> test, int k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (catalog.vocab() != model.vocab()) throw DimensionError("catalog and model vocabularies differ");
  DownstreamMetrics out;
  double acc = 0.0, hr = 0.0, ndcg = 0.0, geo = 0.0;
  for (const auto& t : test) {
    if (t.tokens.size() < 2) continue;
    for (std::size_t i = 1; i < t.tokens.size(); ++i) {
      const PoiId prev = t.tokens[i - 1];
      const PoiId truth = t.tokens[i];
      const VectorXd sc = model.scores(prev);
      const int r = rank_of(sc, truth);
      Eigen::Index best = 0;
      for (Eigen::Index v = 1; v < sc.size(); ++v)
        if (sc(v) > sc(best)) best = v;  // strict: lowest id wins ties
      if (r == 1) acc += 1.0;
      if (r <= k) {
        hr += 1.0;
        ndcg += 1.0 / std::log2(1.0 + r);
      }
      const Poi& a = catalog.pois[best];
      const Poi& b = catalog.pois[truth];
      geo += haversine_km(a.lat, a.lon, b.lat, b.lon);
      ++out.events;
    }
  }
  if (out.events == 0) throw DomainError("no test trajectory has length >= 2");
  const double n = static_cast<double>(out.events);
  out.accuracy = acc / n;
  out.hr_at_k = hr / n;
  out.ndcg_at_k = ndcg / n;
  out.geo_error_km = geo / n;
  return out;
}

DownstreamReport summarize(std::vector<DownstreamMetrics> per_group) {
  DownstreamReport r;
  r.per_group = std::move(per_group);
  if (r.per_group.empty()) return r;
  for (const auto& m : r.per_group) {
    r.avg.accuracy += m.accuracy;
    r.avg.hr_at_k += m.hr_at_k;
    r.avg.ndcg_at_k += m.ndcg_at_k;
    r.avg.geo_error_km += m.geo_error_km;
    r.avg.events += m.events;
  }
  const double n = static_cast<double>(r.per_group.size());
  r.avg.accuracy /= n;
  r.avg.hr_at_k /= n;
  r.avg.ndcg_at_k /= n;
  r.avg.geo_error_km /= n;
  return r;
}

}  // namespace atlas
