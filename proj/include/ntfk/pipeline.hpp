#ifndef NTFK_PIPELINE_HPP
#define NTFK_PIPELINE_HPP

#include <string>
#include <vector>

#include "ntfk/tensor.hpp"

namespace ntfk {

/// One additive temporal feature of a Tucker model: sub-tensor
/// X_p = W(:,p) (outer) A_p with A_p(j,l) = sum_qr core_pqr H_jq V_lr.
/// The sub-tensors of all features sum to the full reconstruction.
struct Feature {
  Matrix spatialMap;  // M x N
  Vector temporal;    // W column, length K
  Tensor3 subTensor;  // K x M x N, entrywise >= 0
  Vector maxSeries;   // per-step max over space
  Vector meanSeries;  // per-step mean over space
  std::string label;  // "T1", "T2", ... annotation, earliest peak first
};

struct FeatureSet {
  std::vector<Feature> features;  // in model column order
};

// Bijection between the features of two equally-sized models, greedy by
// descending cosine similarity of temporal profiles, ties by lowest index.
struct FeaturePairing {
  std::vector<std::size_t> pairedIndex;  // F-feature p -> G-feature index
  std::vector<double> cosineSimilarity;  // per F-feature, in [0, 1]
};

struct ProductFeatureSet {
  std::vector<Tensor3> cA;  // per F-feature, after the max transform
  std::vector<Tensor3> cC;
};

struct TransientSeries {
  std::string label;
  Vector maxSeries;
  Vector meanSeries;
};

FeatureSet featureDecompose(const TuckerModel& model);

FeaturePairing pairFeatures(const FeatureSet& fsF, const FeatureSet& fsG);

// Applies the fast-reaction max transform per paired feature:
//   cA|p = max(cF|p - (nA/nB) cG|paired(p), 0),  cC|p = (nC/nA)(cF|p - cA|p).
// Throws when the feature counts differ.
ProductFeatureSet productFeatures(const FeatureSet& fsF, const FeatureSet& fsG,
                                  const FeaturePairing& pairing, double nA,
                                  double nB, double nC);

std::vector<TransientSeries> transientStats(
    const std::vector<std::pair<std::string, Tensor3>>& features);

/// Piecewise-linear interpolant through strictly increasing knots; beyond
/// the ends it continues the first/last segment's slope.
class LinearSpline {
 public:
  LinearSpline(Vector knots, Vector values);
  double operator()(double t) const;

 private:
  Vector knots_, values_;
};

// One spline per temporal factor column; timeGrid has one entry per W row.
std::vector<LinearSpline> fitTemporalSplines(const Matrix& w, const Vector& timeGrid);

// Synthesizes concentration slices at the requested times by replacing the
// temporal factor rows with extrapolated spline values clamped at zero.
Tensor3 blindPredict(const TuckerModel& model, const std::vector<LinearSpline>& splines,
                     const Vector& tFuture);

// (k*m*n + K*k + M*m + N*n) / (K*M*N): stored model entries over stored
// tensor entries.
double compressionRatio(const TuckerModel& model, const Tensor3& x);

}  // namespace ntfk

#endif  // NTFK_PIPELINE_HPP
