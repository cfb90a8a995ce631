#include "tspipe/posthoc.hpp"

#include "tspipe/metrics.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace tspipe {

namespace {

double score_of(const Dataset& ds, const SequenceArray& pred, MetricName metric) {
  const auto v = pooled_metric(metric, *ds.labels, pred);
  if (!v) throw DataError("importance: metric " + to_string(metric) + " is undefined on the evaluation rows");
  return *v;
}

void require_problem(const Dataset& dataset) {
  if (!dataset.spec || !dataset.labels) throw ContractError("interpretation needs a constructed problem");
}

}  // namespace

GlobalImportance interpret_global(const Predictor& model, const Dataset& dataset, const std::vector<Index>& rows,
                                  int repeats, std::uint64_t seed) {
  if (repeats < 1) throw ParameterError("permutation importance needs repeats >= 1");
  require_problem(dataset);
  if (rows.empty()) throw DataError("permutation importance: no evaluation rows");
  const Dataset base = dataset.subset(rows);
  GlobalImportance out;
  out.metric = dataset.spec->metric;
  out.baseline = score_of(base, model.predict(base), out.metric);
  const double sign = maximize(out.metric) ? 1.0 : -1.0;
  std::mt19937_64 rng(seed);
  const Index n = base.instances();

  const auto record = [&](const std::string& name, bool is_static, const std::vector<double>& drops) {
    const double r = static_cast<double>(drops.size());
    const double mean = std::accumulate(drops.begin(), drops.end(), 0.0) / r;
    double ss = 0.0;
    for (double d : drops) ss += (d - mean) * (d - mean);
    out.names.push_back(name);
    out.is_static.push_back(is_static);
    out.mean.push_back(mean);
    out.std_error.push_back(drops.size() > 1 ? std::sqrt(ss / (r - 1)) / std::sqrt(r) : 0.0);
  };

  for (Index d = 0; d < base.temporal.features(); ++d) {
    std::vector<double> drops;
    for (int rep = 0; rep < repeats; ++rep) {
      Dataset p = base;
      for (Index t = 0; t < base.temporal.steps(); ++t) {
        std::vector<Index> live;
        for (Index i = 0; i < n; ++i)
          if (base.temporal.seq_len(i) > t) live.push_back(i);
        std::vector<Index> perm = live;
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t k = 0; k < live.size(); ++k) {
          const auto dst = static_cast<std::size_t>(live[k]);
          const auto src = static_cast<std::size_t>(perm[k]);
          p.temporal.values[dst](t, d) = base.temporal.values[src](t, d);
          p.temporal.observed[dst](t, d) = base.temporal.observed[src](t, d);
        }
      }
      drops.push_back(sign * (out.baseline - score_of(p, model.predict(p), out.metric)));
    }
    record(base.temporal_names[static_cast<std::size_t>(d)], false, drops);
  }
  for (Index d = 0; d < base.static_features.values.cols(); ++d) {
    std::vector<double> drops;
    for (int rep = 0; rep < repeats; ++rep) {
      Dataset p = base;
      std::vector<Index> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), Index{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      for (Index i = 0; i < n; ++i) {
        p.static_features.values(i, d) = base.static_features.values(perm[static_cast<std::size_t>(i)], d);
        p.static_features.observed(i, d) = base.static_features.observed(perm[static_cast<std::size_t>(i)], d);
      }
      drops.push_back(sign * (out.baseline - score_of(p, model.predict(p), out.metric)));
    }
    record(base.static_names[static_cast<std::size_t>(d)], true, drops);
  }
  return out;
}

std::pair<Vector, Vector> occlusion_baselines(const Dataset& dataset) {
  const auto rows = dataset.fit_rows();
  const Index d = dataset.temporal.features();
  const Index s = dataset.static_features.values.cols();
  Vector tsum = Vector::Zero(d), tcount = Vector::Zero(d);
  Vector ssum = Vector::Zero(s), scount = Vector::Zero(s);
  for (Index i : rows) {
    const auto& v = dataset.temporal.values[static_cast<std::size_t>(i)];
    const auto& m = dataset.temporal.observed[static_cast<std::size_t>(i)];
    for (Index t = 0; t < dataset.temporal.seq_len(i); ++t)
      for (Index j = 0; j < d; ++j)
        if (m(t, j)) {
          tsum(j) += v(t, j);
          tcount(j) += 1;
        }
    for (Index j = 0; j < s; ++j)
      if (dataset.static_features.observed(i, j)) {
        ssum(j) += dataset.static_features.values(i, j);
        scount(j) += 1;
      }
  }
  const auto safe = [](const Vector& sum, const Vector& count) {
    Vector out(sum.size());
    for (Index j = 0; j < sum.size(); ++j) out(j) = count(j) > 0 ? sum(j) / count(j) : 0.0;
    return out;
  };
  return {safe(tsum, tcount), safe(ssum, scount)};
}

namespace {

/// One copy of instance `row` per occluded cell (plus the untouched copy at
/// index 0), predicted in a single call. Copy k >= 1 occludes temporal cell
/// (k - 1) / d, (k - 1) % d, and copies past the temporal block occlude one
/// static feature each.
SequenceArray occluded_predictions(const Predictor& model, const Dataset& dataset, Index row,
                                   const Vector& tbase, const Vector* sbase) {
  const Index len = dataset.temporal.seq_len(row);
  const Index d = dataset.temporal.features();
  const Index s = sbase ? dataset.static_features.values.cols() : 0;
  const Index copies = 1 + len * d + s;
  Dataset rep = dataset.subset(std::vector<Index>(static_cast<std::size_t>(copies), row));
  for (Index t = 0; t < len; ++t) {
    for (Index j = 0; j < d; ++j) {
      const auto k = static_cast<std::size_t>(1 + t * d + j);
      rep.temporal.values[k](t, j) = tbase(j);
      rep.temporal.observed[k](t, j) = true;
    }
  }
  for (Index j = 0; j < s; ++j) {
    const Index k = 1 + len * d + j;
    rep.static_features.values(k, j) = (*sbase)(j);
    rep.static_features.observed(k, j) = true;
  }
  return model.predict(rep);
}

}  // namespace

InstanceImportance interpret_instancewise(const Predictor& model, const Dataset& dataset,
                                          const std::vector<Index>& rows) {
  const auto [tbase, sbase] = occlusion_baselines(dataset);
  InstanceImportance out;
  out.temporal_baseline = tbase;
  out.static_baseline = sbase;
  const Index d = dataset.temporal.features();
  const Index s = dataset.static_features.values.cols();
  out.static_scores = Matrix::Zero(static_cast<Index>(rows.size()), s);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Index row = rows[r];
    out.ids.push_back(dataset.ids[static_cast<std::size_t>(row)]);
    const Index len = dataset.temporal.seq_len(row);
    const auto pred = occluded_predictions(model, dataset, row, tbase, &sbase);
    Matrix scores = Matrix::Zero(dataset.temporal.steps(), d);
    for (Index t = 0; t < len; ++t)
      for (Index j = 0; j < d; ++j)
        scores(t, j) = (pred[static_cast<std::size_t>(1 + t * d + j)] - pred[0]).cwiseAbs().sum();
    for (Index j = 0; j < s; ++j)
      out.static_scores(static_cast<Index>(r), j) =
          (pred[static_cast<std::size_t>(1 + len * d + j)] - pred[0]).cwiseAbs().sum();
    out.temporal.push_back(std::move(scores));
  }
  return out;
}

Matrix occlusion_for_output(const Predictor& model, const Dataset& dataset, Index row, Index step,
                            const Vector& temporal_baseline) {
  const Index d = dataset.temporal.features();
  const Index len = dataset.temporal.seq_len(row);
  const auto pred = occluded_predictions(model, dataset, row, temporal_baseline, nullptr);
  Matrix scores = Matrix::Zero(dataset.temporal.steps(), d);
  for (Index t = 0; t < len; ++t)
    for (Index j = 0; j < d; ++j)
      scores(t, j) = (pred[static_cast<std::size_t>(1 + t * d + j)].row(step) - pred[0].row(step)).cwiseAbs().sum();
  return scores;
}

}  // namespace tspipe
