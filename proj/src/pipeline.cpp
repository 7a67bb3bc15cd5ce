#include "ntfk/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "ntfk/errors.hpp"
#include "ntfk/rdsim.hpp"

namespace ntfk {

namespace {

void fillSeries(Feature& f) {
  const std::size_t K = f.subTensor.dim(0), M = f.subTensor.dim(1), N = f.subTensor.dim(2);
  f.maxSeries = Vector::Zero(static_cast<Eigen::Index>(K));
  f.meanSeries = Vector::Zero(static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < K; ++i) {
    double mx = 0.0, sum = 0.0;
    for (std::size_t j = 0; j < M; ++j)
      for (std::size_t l = 0; l < N; ++l) {
        const double v = f.subTensor(i, j, l);
        mx = std::max(mx, v);
        sum += v;
      }
    f.maxSeries[static_cast<Eigen::Index>(i)] = mx;
    f.meanSeries[static_cast<Eigen::Index>(i)] = sum / static_cast<double>(M * N);
  }
}

}  // namespace

FeatureSet featureDecompose(const TuckerModel& model) {
  const std::size_t k = model.core.dim(0), m = model.core.dim(1), n = model.core.dim(2);
  const std::size_t K = static_cast<std::size_t>(model.W.rows());
  const std::size_t M = static_cast<std::size_t>(model.H.rows());
  const std::size_t N = static_cast<std::size_t>(model.V.rows());

  FeatureSet fs;
  fs.features.resize(k);
  for (std::size_t p = 0; p < k; ++p) {
    Feature& f = fs.features[p];
    Matrix slice(m, n);
    for (std::size_t q = 0; q < m; ++q)
      for (std::size_t r = 0; r < n; ++r)
        slice(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(r)) =
            model.core(p, q, r);
    f.spatialMap = model.H * slice * model.V.transpose();
    f.temporal = model.W.col(static_cast<Eigen::Index>(p));
    f.subTensor = Tensor3(K, M, N);
    for (std::size_t i = 0; i < K; ++i) {
      const double w = f.temporal[static_cast<Eigen::Index>(i)];
      for (std::size_t j = 0; j < M; ++j)
        for (std::size_t l = 0; l < N; ++l)
          f.subTensor(i, j, l) =
              w * f.spatialMap(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
    }
    fillSeries(f);
  }

  // Annotation only: T1 = earliest peak, matching how the transient plots
  // are usually read. Attribution to physical processes is up to the user.
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Eigen::Index> peak(k, 0);
  for (std::size_t p = 0; p < k; ++p) {
    if (fs.features[p].maxSeries.size() > 0) fs.features[p].maxSeries.maxCoeff(&peak[p]);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return peak[a] < peak[b]; });
  for (std::size_t rank = 0; rank < k; ++rank)
    fs.features[order[rank]].label = "T" + std::to_string(rank + 1);
  return fs;
}

FeaturePairing pairFeatures(const FeatureSet& fsF, const FeatureSet& fsG) {
  const std::size_t k = fsF.features.size();
  if (k != fsG.features.size())
    throw ValidationError("pairFeatures: feature counts differ");

  std::vector<std::tuple<double, std::size_t, std::size_t>> cand;  // (-sim, i, j)
  cand.reserve(k * k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const Vector& a = fsF.features[i].temporal;
      const Vector& b = fsG.features[j].temporal;
      const double na = a.norm(), nb = b.norm();
      const double sim = (na > 0.0 && nb > 0.0) ? a.dot(b) / (na * nb) : 0.0;
      cand.emplace_back(-sim, i, j);
    }
  std::sort(cand.begin(), cand.end());

  FeaturePairing pairing;
  pairing.pairedIndex.assign(k, 0);
  pairing.cosineSimilarity.assign(k, 0.0);
  std::vector<bool> fDone(k, false), gDone(k, false);
  for (const auto& [negSim, i, j] : cand) {
    if (fDone[i] || gDone[j]) continue;
    pairing.pairedIndex[i] = j;
    pairing.cosineSimilarity[i] = -negSim;
    fDone[i] = true;
    gDone[j] = true;
  }
  return pairing;
}

ProductFeatureSet productFeatures(const FeatureSet& fsF, const FeatureSet& fsG,
                                  const FeaturePairing& pairing, double nA,
                                  double nB, double nC) {
  const std::size_t k = fsF.features.size();
  if (k != fsG.features.size() || pairing.pairedIndex.size() != k)
    throw ValidationError("productFeatures: feature counts differ");

  ProductFeatureSet out;
  out.cA.reserve(k);
  out.cC.reserve(k);
  for (std::size_t p = 0; p < k; ++p) {
    const Tensor3& fp = fsF.features[p].subTensor;
    const Tensor3& gp = fsG.features[pairing.pairedIndex[p]].subTensor;
    SpeciesFields species = recoverSpecies(fp, gp, nA, nB, nC);
    out.cA.push_back(std::move(species.cA));
    out.cC.push_back(std::move(species.cC));
  }
  return out;
}

std::vector<TransientSeries> transientStats(
    const std::vector<std::pair<std::string, Tensor3>>& features) {
  std::vector<TransientSeries> out;
  out.reserve(features.size());
  for (const auto& [label, tensor] : features) {
    TransientSeries series;
    series.label = label;
    const std::size_t K = tensor.dim(0), M = tensor.dim(1), N = tensor.dim(2);
    series.maxSeries = Vector::Zero(static_cast<Eigen::Index>(K));
    series.meanSeries = Vector::Zero(static_cast<Eigen::Index>(K));
    for (std::size_t i = 0; i < K; ++i) {
      double mx = -std::numeric_limits<double>::infinity(), sum = 0.0;
      for (std::size_t j = 0; j < M; ++j)
        for (std::size_t l = 0; l < N; ++l) {
          const double v = tensor(i, j, l);
          mx = std::max(mx, v);
          sum += v;
        }
      series.maxSeries[static_cast<Eigen::Index>(i)] = mx;
      series.meanSeries[static_cast<Eigen::Index>(i)] = sum / static_cast<double>(M * N);
    }
    out.push_back(std::move(series));
  }
  return out;
}

LinearSpline::LinearSpline(Vector knots, Vector values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.size() != values_.size() || knots_.size() < 1)
    throw ValidationError("LinearSpline: knots and values must match and be non-empty");
  for (Eigen::Index i = 1; i < knots_.size(); ++i)
    if (!(knots_[i] > knots_[i - 1]))
      throw ValidationError("LinearSpline: knots must be strictly increasing");
}

double LinearSpline::operator()(double t) const {
  const Eigen::Index n = knots_.size();
  if (n == 1) return values_[0];
  // Segment selection; end segments extend beyond the knot range. Knot hits
  // return the stored value so interpolation at knots is exact.
  Eigen::Index hi = 1;
  while (hi < n - 1 && t > knots_[hi]) ++hi;
  const Eigen::Index lo = hi - 1;
  if (t == knots_[lo]) return values_[lo];
  if (t == knots_[hi]) return values_[hi];
  const double slope = (values_[hi] - values_[lo]) / (knots_[hi] - knots_[lo]);
  return values_[lo] + slope * (t - knots_[lo]);
}

std::vector<LinearSpline> fitTemporalSplines(const Matrix& w, const Vector& timeGrid) {
  if (w.rows() != timeGrid.size())
    throw ValidationError("fitTemporalSplines: time grid must match factor rows");
  std::vector<LinearSpline> splines;
  splines.reserve(static_cast<std::size_t>(w.cols()));
  for (Eigen::Index p = 0; p < w.cols(); ++p) splines.emplace_back(timeGrid, w.col(p));
  return splines;
}

Tensor3 blindPredict(const TuckerModel& model, const std::vector<LinearSpline>& splines,
                     const Vector& tFuture) {
  const auto k = static_cast<std::size_t>(model.W.cols());
  if (splines.size() != k)
    throw ValidationError("blindPredict: one spline per temporal column required");
  Matrix wExt(tFuture.size(), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < tFuture.size(); ++i)
    for (std::size_t p = 0; p < k; ++p)
      wExt(i, static_cast<Eigen::Index>(p)) = std::max(0.0, splines[p](tFuture[i]));
  Tensor3 t = modeProduct(model.core, wExt, Mode::Time);
  t = modeProduct(t, model.H, Mode::X);
  return modeProduct(t, model.V, Mode::Y);
}

double compressionRatio(const TuckerModel& model, const Tensor3& x) {
  const double k = static_cast<double>(model.core.dim(0));
  const double m = static_cast<double>(model.core.dim(1));
  const double n = static_cast<double>(model.core.dim(2));
  const double K = static_cast<double>(x.dim(0));
  const double M = static_cast<double>(x.dim(1));
  const double N = static_cast<double>(x.dim(2));
  if (K * M * N == 0.0) throw ValidationError("compressionRatio: empty tensor");
  return (k * m * n + K * k + M * m + N * n) / (K * M * N);
}

}  // namespace ntfk
