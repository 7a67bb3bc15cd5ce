#ifndef NTFK_ENSEMBLE_HPP
#define NTFK_ENSEMBLE_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "ntfk/ntf.hpp"
#include "ntfk/tensor.hpp"

namespace ntfk {

struct EnsembleConfig {
  std::size_t restarts = 50;  // N, must be >= 2
  std::size_t kMin = 1;
  std::size_t kMax = 1;  // inclusive
  double silhouetteThreshold = 0.7;
  NtfOptions base;        // tolerance / maxSweeps / sparsityWeight for every run
  std::size_t rankX = 0;  // 0 = policy min(dim, 3k)
  std::size_t rankY = 0;
  std::uint64_t masterSeed = 0;
  std::size_t jobs = 1;
};

struct EnsembleMember {
  TuckerModel model;
  ConvergenceTrace trace;
  std::uint64_t seed = 0;
};

// Per-candidate-k clustering summary. Column index c of restart r maps to
// flat index r*k + c everywhere below.
struct ClusterEntry {
  std::size_t k = 0;
  std::vector<int> assignment;      // flat column -> cluster, each cluster has size N
  std::vector<double> silhouettes;  // per flat column, in [-1, 1]
  double averageSilhouette = 0.0;
  Matrix centroids;  // K x k, unit columns
  double medianR = 0.0;
  std::vector<double> memberObjectives;     // final objective per restart
  std::vector<double> memberR;              // final R per restart
  std::vector<std::size_t> memberSweeps;    // sweep count per restart
  bool chosen = false;
};

struct SelectionResult {
  std::size_t chosenK = 0;
  bool warning = false;  // no k passed the selection rule; best-effort choice
  std::vector<ClusterEntry> entries;
  TuckerModel finalModel;
  ConvergenceTrace finalTrace;
  std::uint64_t finalSeed = 0;
};

// N decompositions of x at temporal rank k with seeds derived from the
// master seed; results are indexed by restart and independent of worker
// scheduling.
std::vector<EnsembleMember> ensembleRun(const Tensor3& x, std::size_t k,
                                        const EnsembleConfig& cfg);

// Balanced cosine k-means over the temporal columns of N restarts: each
// restart contributes exactly one column to each cluster. The assignment is
// greedy per restart by ascending cosine distance, ties broken by lowest
// cluster index; centroids are normalized means. Throws on zero columns.
ClusterEntry clusterColumns(const std::vector<Matrix>& wBlocks, std::size_t k);

// Rousseeuw silhouettes under cosine distance. Singleton clusters and k = 1
// score 0 by convention. Columns of `columns` are the items.
std::pair<std::vector<double>, double> silhouette(const std::vector<int>& assignment,
                                                  const Matrix& columns);

// Full model-order selection: ensembles and clustering for every k in
// [kMin, kMax], then the largest k whose average silhouette clears the
// threshold (waived for k = 1, a single cluster is trivially coherent) and
// whose ensemble-median R is within 1.1x the best median (plus a 1e-6
// absolute floor so fully converged fits compare as equal). If nothing
// passes, the best-silhouette k is returned with `warning` set. The final
// model is the lowest-objective member at the chosen k.
SelectionResult selectK(const Tensor3& x, const EnsembleConfig& cfg);

}  // namespace ntfk

#endif  // NTFK_ENSEMBLE_HPP
