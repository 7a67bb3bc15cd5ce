#include "ntfk/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>
#include <tuple>

#include "ntfk/errors.hpp"
#include "ntfk/rng.hpp"

namespace ntfk {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// wins and is rethrown on the calling thread.
void parallelFor(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex errorMutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(errorMutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

double cosineDistance(const Vector& a, const Vector& b) {
  return 1.0 - a.dot(b);  // both unit norm
}

}  // namespace

std::vector<EnsembleMember> ensembleRun(const Tensor3& x, std::size_t k,
                                        const EnsembleConfig& cfg) {
  if (cfg.restarts < 2) throw ValidationError("ensembleRun: restarts must be >= 2");
  if (k < 1 || k > x.dim(0))
    throw ValidationError("ensembleRun: k out of range [1, time dimension]");

  NtfOptions opts = cfg.base;
  opts.ranks[0] = k;
  opts.ranks[1] = cfg.rankX > 0 ? cfg.rankX : std::min(x.dim(1), 3 * k);
  opts.ranks[2] = cfg.rankY > 0 ? cfg.rankY : std::min(x.dim(2), 3 * k);

  std::vector<EnsembleMember> members(cfg.restarts);
  parallelFor(cfg.restarts, cfg.jobs, [&](std::size_t i) {
    NtfOptions local = opts;
    local.rngSeed = deriveSeed(cfg.masterSeed, k, i);
    auto [model, trace] = decompose(x, local);
    members[i] = EnsembleMember{std::move(model), std::move(trace), local.rngSeed};
  });
  return members;
}

std::pair<std::vector<double>, double> silhouette(const std::vector<int>& assignment,
                                                  const Matrix& columns) {
  const std::size_t n = assignment.size();
  if (n != static_cast<std::size_t>(columns.cols()))
    throw ValidationError("silhouette: assignment size must match column count");
  int k = 0;
  for (int a : assignment) k = std::max(k, a + 1);

  Matrix unit = columns;
  for (Eigen::Index c = 0; c < unit.cols(); ++c) {
    const double nrm = unit.col(c).norm();
    if (nrm <= 0.0) throw ValidationError("silhouette: zero column");
    unit.col(c) /= nrm;
  }

  std::vector<std::size_t> clusterSize(static_cast<std::size_t>(k), 0);
  for (int a : assignment) ++clusterSize[static_cast<std::size_t>(a)];

  std::vector<double> s(n, 0.0);
  if (k < 2) return {s, 0.0};

  for (std::size_t i = 0; i < n; ++i) {
    const int own = assignment[i];
    if (clusterSize[static_cast<std::size_t>(own)] <= 1) {
      s[i] = 0.0;
      continue;
    }
    std::vector<double> meanDist(static_cast<std::size_t>(k), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      meanDist[static_cast<std::size_t>(assignment[j])] +=
          cosineDistance(unit.col(static_cast<Eigen::Index>(i)),
                         unit.col(static_cast<Eigen::Index>(j)));
    }
    double a = 0.0, b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const std::size_t sz = clusterSize[static_cast<std::size_t>(c)];
      if (c == own) {
        a = meanDist[static_cast<std::size_t>(c)] / static_cast<double>(sz - 1);
      } else if (sz > 0) {
        b = std::min(b, meanDist[static_cast<std::size_t>(c)] / static_cast<double>(sz));
      }
    }
    const double denom = std::max(a, b);
    s[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  double avg = 0.0;
  for (double v : s) avg += v;
  return {s, avg / static_cast<double>(n)};
}

ClusterEntry clusterColumns(const std::vector<Matrix>& wBlocks, std::size_t k) {
  const std::size_t nRestarts = wBlocks.size();
  if (nRestarts < 1) throw ValidationError("clusterColumns: no restarts");
  for (const Matrix& w : wBlocks)
    if (static_cast<std::size_t>(w.cols()) != k)
      throw ValidationError("clusterColumns: every restart must contribute k columns");
  const Eigen::Index dim = wBlocks[0].rows();

  // Flat, unit-normalized column table; flat index = restart * k + column.
  Matrix cols(dim, static_cast<Eigen::Index>(nRestarts * k));
  for (std::size_t r = 0; r < nRestarts; ++r)
    for (std::size_t c = 0; c < k; ++c) {
      Vector col = wBlocks[r].col(static_cast<Eigen::Index>(c));
      const double nrm = col.norm();
      if (nrm <= 0.0) throw ValidationError("clusterColumns: degenerate zero column");
      cols.col(static_cast<Eigen::Index>(r * k + c)) = col / nrm;
    }

  Matrix centroids = cols.leftCols(static_cast<Eigen::Index>(k));
  std::vector<int> assignment(nRestarts * k, -1);

  for (int iter = 0; iter < 100; ++iter) {
    std::vector<int> next(nRestarts * k, -1);
    for (std::size_t r = 0; r < nRestarts; ++r) {
      // All (distance, cluster, column) candidates for this restart, taken
      // greedily; ties resolve to the lowest cluster index.
      std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
      cand.reserve(k * k);
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < k; ++j)
          cand.emplace_back(
              cosineDistance(cols.col(static_cast<Eigen::Index>(r * k + c)),
                             centroids.col(static_cast<Eigen::Index>(j))),
              j, c);
      std::sort(cand.begin(), cand.end());
      std::vector<bool> colDone(k, false), slotDone(k, false);
      for (const auto& [d, j, c] : cand) {
        (void)d;
        if (colDone[c] || slotDone[j]) continue;
        next[r * k + c] = static_cast<int>(j);
        colDone[c] = true;
        slotDone[j] = true;
      }
    }
    const bool stable = (next == assignment);
    assignment = std::move(next);
    if (stable) break;
    for (std::size_t j = 0; j < k; ++j) {
      Vector mean = Vector::Zero(dim);
      for (std::size_t idx = 0; idx < nRestarts * k; ++idx)
        if (assignment[idx] == static_cast<int>(j))
          mean += cols.col(static_cast<Eigen::Index>(idx));
      const double nrm = mean.norm();
      if (nrm > 0.0) centroids.col(static_cast<Eigen::Index>(j)) = mean / nrm;
    }
  }

  ClusterEntry entry;
  entry.k = k;
  entry.assignment = assignment;
  entry.centroids = centroids;
  std::tie(entry.silhouettes, entry.averageSilhouette) = silhouette(assignment, cols);
  return entry;
}

SelectionResult selectK(const Tensor3& x, const EnsembleConfig& cfg) {
  if (cfg.kMin < 1 || cfg.kMax < cfg.kMin || cfg.kMax > x.dim(0))
    throw ValidationError("selectK: k range must lie within [1, time dimension]");

  SelectionResult result;
  std::vector<std::vector<EnsembleMember>> allMembers;

  for (std::size_t k = cfg.kMin; k <= cfg.kMax; ++k) {
    std::vector<EnsembleMember> members = ensembleRun(x, k, cfg);
    std::vector<Matrix> wBlocks;
    wBlocks.reserve(members.size());
    for (const auto& m : members) wBlocks.push_back(m.model.W);
    ClusterEntry entry = clusterColumns(wBlocks, k);
    for (const auto& m : members) {
      entry.memberObjectives.push_back(m.trace.objectives.back());
      entry.memberR.push_back(m.trace.finalR);
      entry.memberSweeps.push_back(m.trace.sweepCount);
    }
    entry.medianR = median(entry.memberR);
    result.entries.push_back(std::move(entry));
    allMembers.push_back(std::move(members));
  }

  double minMedianR = std::numeric_limits<double>::infinity();
  for (const auto& e : result.entries) minMedianR = std::min(minMedianR, e.medianR);
  const double rGuard = 1.1 * minMedianR + 1e-6;

  std::ptrdiff_t chosenIdx = -1;
  for (std::size_t i = 0; i < result.entries.size(); ++i) {
    const auto& e = result.entries[i];
    const bool silPass = (e.k == 1) || e.averageSilhouette >= cfg.silhouetteThreshold;
    if (silPass && e.medianR <= rGuard) chosenIdx = static_cast<std::ptrdiff_t>(i);
  }
  if (chosenIdx < 0) {
    result.warning = true;
    double bestSil = -2.0, bestR = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
      const auto& e = result.entries[i];
      const double sil = e.k == 1 ? 1.0 : e.averageSilhouette;
      if (sil > bestSil || (sil == bestSil && e.medianR < bestR)) {
        bestSil = sil;
        bestR = e.medianR;
        chosenIdx = static_cast<std::ptrdiff_t>(i);
      }
    }
  }

  auto& chosenEntry = result.entries[static_cast<std::size_t>(chosenIdx)];
  chosenEntry.chosen = true;
  result.chosenK = chosenEntry.k;

  const auto& members = allMembers[static_cast<std::size_t>(chosenIdx)];
  std::size_t best = 0;
  for (std::size_t i = 1; i < members.size(); ++i)
    if (members[i].trace.objectives.back() < members[best].trace.objectives.back()) best = i;
  result.finalModel = members[best].model;
  result.finalTrace = members[best].trace;
  result.finalSeed = members[best].seed;
  return result;
}

}  // namespace ntfk
