// Command-line front end: simulate reactive mixing, factorize the resulting
// tensors, and extract feature statistics. Every command validates its
// inputs before computing, writes all artifacts into --out, and finishes by
// writing manifest.json there (also on failure, with status "failed").
// Exit codes: 0 success, 2 validation error, 3 numerical failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ntfk/ensemble.hpp"
#include "ntfk/errors.hpp"
#include "ntfk/ntf.hpp"
#include "ntfk/pipeline.hpp"
#include "ntfk/rdsim.hpp"
#include "ntfk/rng.hpp"
#include "ntfk/tensor_io.hpp"
#include "ntfk/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class Manifest {
 public:
  Manifest(fs::path dir, std::string command, std::uint64_t seed)
      : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["version"] = ntfk::kVersion;
    j_["masterSeed"] = seed;
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
  }

  void addInput(const fs::path& p) { j_["inputs"].push_back(p.string()); }
  void addOutput(const fs::path& p) { j_["outputs"].push_back(p.string()); }
  void set(const std::string& key, const json& value) { j_[key] = value; }

  void finish(const std::string& status, const std::string& error = "") {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    j_["wallClockSeconds"] = std::chrono::duration<double>(elapsed).count();
    j_["status"] = status;
    if (!error.empty()) j_["error"] = error;
    fs::create_directories(dir_);
    std::ofstream os(dir_ / "manifest.json");
    os << j_.dump(2) << "\n";
  }

 private:
  fs::path dir_;
  json j_;
  std::chrono::steady_clock::time_point start_;
};

// Runs `task` with a manifest wrapper so the output directory always carries
// a status record, then rethrows any failure for exit-code mapping.
void withManifest(const fs::path& outDir, const std::string& command,
                  std::uint64_t seed, const std::function<void(Manifest&)>& task) {
  fs::create_directories(outDir);
  Manifest manifest(outDir, command, seed);
  try {
    task(manifest);
  } catch (const std::exception& e) {
    manifest.finish("failed", e.what());
    throw;
  }
  manifest.finish("ok");
}

struct SimulateArgs {
  std::string configPath;
  std::string outDir;
  bool species = false;
  std::string sweep;  // "key=v1,v2,..."
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
};

void runOneSimulation(const ntfk::SimulationConfig& cfg, const fs::path& outDir,
                      bool species, const fs::path& configPath, std::uint64_t seed) {
  withManifest(outDir, "simulate", seed, [&](Manifest& manifest) {
    manifest.addInput(configPath);
    cfg.validate();
    ntfk::SimulationResult result = ntfk::simulateInvariants(cfg);

    std::ofstream(outDir / "config.txt") << ntfk::configToText(cfg);
    ntfk::writeTensor(outDir / "cF.ntk", result.cF);
    ntfk::writeTensor(outDir / "cG.ntk", result.cG);
    manifest.addOutput(outDir / "config.txt");
    manifest.addOutput(outDir / "cF.ntk");
    manifest.addOutput(outDir / "cG.ntk");
    if (species) {
      ntfk::SpeciesFields sp =
          ntfk::recoverSpecies(result.cF, result.cG, cfg.nA, cfg.nB, cfg.nC);
      ntfk::writeTensor(outDir / "cA.ntk", sp.cA);
      ntfk::writeTensor(outDir / "cB.ntk", sp.cB);
      ntfk::writeTensor(outDir / "cC.ntk", sp.cC);
      manifest.addOutput(outDir / "cA.ntk");
      manifest.addOutput(outDir / "cB.ntk");
      manifest.addOutput(outDir / "cC.ntk");
    }
    const double driftF =
        std::abs(result.massF.back() - result.initialMassF) / result.initialMassF;
    const double driftG =
        std::abs(result.massG.back() - result.initialMassG) / result.initialMassG;
    manifest.set("massDriftF", driftF);
    manifest.set("massDriftG", driftG);
    manifest.set("qpSweepsTotal", result.totalSweeps);
    manifest.set("qpSweepsMaxPerStep", result.maxStepSweeps);
  });
}

int cmdSimulate(const SimulateArgs& args) {
  ntfk::SimulationConfig base = ntfk::parseConfigFile(args.configPath);
  base.validate();

  if (args.sweep.empty()) {
    runOneSimulation(base, args.outDir, args.species, args.configPath, args.seed);
    return 0;
  }

  const auto eq = args.sweep.find('=');
  if (eq == std::string::npos)
    throw ntfk::ValidationError("--sweep expects key=v1,v2,...");
  const std::string key = args.sweep.substr(0, eq);
  std::vector<double> values;
  {
    std::string rest = args.sweep.substr(eq + 1);
    for (char& c : rest)
      if (c == ',') c = ' ';
    std::istringstream is(rest);
    double v;
    while (is >> v) values.push_back(v);
    if (values.empty()) throw ntfk::ValidationError("--sweep has no values");
  }

  // Validate the whole sweep up front so a bad case fails before any run.
  std::vector<ntfk::SimulationConfig> cases;
  std::vector<fs::path> dirs;
  for (double v : values) {
    ntfk::SimulationConfig cfg = base;
    ntfk::setConfigKey(cfg, key, v);
    cfg.validate();
    cases.push_back(cfg);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    dirs.emplace_back(fs::path(args.outDir) / (key + "_" + buf));
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex errorMutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cases.size()) break;
      try {
        runOneSimulation(cases[i], dirs[i], args.species, args.configPath, args.seed);
      } catch (...) {
        std::lock_guard<std::mutex> lock(errorMutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(args.jobs, cases.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  return 0;
}

struct DecomposeArgs {
  std::string tensorPath;
  std::string outDir;
  std::size_t kMin = 1, kMax = 1;
  std::size_t restarts = 50;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::size_t rankX = 0, rankY = 0;
  double tolerance = 1e-8;
  std::size_t maxSweeps = 500;
  double silhouetteThreshold = 0.7;
  std::size_t jobs = 1;
};

int cmdDecompose(const DecomposeArgs& args) {
  withManifest(args.outDir, "decompose", args.seed, [&](Manifest& manifest) {
    manifest.addInput(args.tensorPath);
    const ntfk::Tensor3 x = ntfk::readTensor(args.tensorPath);

    ntfk::EnsembleConfig cfg;
    cfg.restarts = args.restarts;
    cfg.kMin = args.kMin;
    cfg.kMax = args.kMax;
    cfg.silhouetteThreshold = args.silhouetteThreshold;
    cfg.base.sparsityWeight = args.lambda;
    cfg.base.tolerance = args.tolerance;
    cfg.base.maxSweeps = args.maxSweeps;
    cfg.rankX = args.rankX;
    cfg.rankY = args.rankY;
    cfg.masterSeed = args.seed;
    cfg.jobs = args.jobs;

    const ntfk::SelectionResult sel = ntfk::selectK(x, cfg);

    const fs::path outDir(args.outDir);
    {
      std::ofstream os(outDir / "ensemble.csv");
      os << "k,restart,sweepCount,objective,R\n";
      for (const auto& e : sel.entries)
        for (std::size_t r = 0; r < e.memberR.size(); ++r)
          os << e.k << ',' << r << ',' << e.memberSweeps[r] << ','
             << fmt(e.memberObjectives[r]) << ',' << fmt(e.memberR[r]) << '\n';
    }
    {
      std::ofstream os(outDir / "summary.csv");
      os << "k,averageSilhouette,medianR,chosen\n";
      for (const auto& e : sel.entries)
        os << e.k << ',' << fmt(e.averageSilhouette) << ',' << fmt(e.medianR) << ','
           << (e.chosen ? 1 : 0) << '\n';
    }

    ntfk::ModelMeta meta;
    meta.ranks[0] = sel.finalModel.core.dim(0);
    meta.ranks[1] = sel.finalModel.core.dim(1);
    meta.ranks[2] = sel.finalModel.core.dim(2);
    meta.sparsityWeight = args.lambda;
    meta.seed = sel.finalSeed;
    meta.finalR = sel.finalTrace.finalR;
    meta.sweepCount = sel.finalTrace.sweepCount;
    ntfk::writeModel(outDir / "model", sel.finalModel, meta);

    manifest.addOutput(outDir / "ensemble.csv");
    manifest.addOutput(outDir / "summary.csv");
    manifest.addOutput(outDir / "model");
    manifest.set("chosenK", sel.chosenK);
    manifest.set("selectionWarning", sel.warning);
    manifest.set("finalR", sel.finalTrace.finalR);
    if (sel.warning)
      std::cerr << "warning: no k passed the selection rule; best-effort k="
                << sel.chosenK << "\n";
  });
  return 0;
}

struct FeatureArgs {
  std::string modelF, modelG;
  std::string outDir;
  double dt = 1.0;
  double nA = 1.0, nB = 1.0, nC = 1.0;
};

// Feature labels sorted T1, T2, ... for stable CSV ordering.
std::vector<std::size_t> labelOrder(const ntfk::FeatureSet& fs) {
  std::vector<std::size_t> order(fs.features.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return fs.features[a].label < fs.features[b].label;
  });
  return order;
}

int cmdFeatures(const FeatureArgs& args) {
  withManifest(args.outDir, "features", 0, [&](Manifest& manifest) {
    manifest.addInput(args.modelF);
    manifest.addInput(args.modelG);
    const ntfk::TuckerModel modelF = ntfk::readModel(args.modelF);
    const ntfk::TuckerModel modelG = ntfk::readModel(args.modelG);

    const ntfk::FeatureSet fsF = ntfk::featureDecompose(modelF);
    const ntfk::FeatureSet fsG = ntfk::featureDecompose(modelG);
    const ntfk::FeaturePairing pairing = ntfk::pairFeatures(fsF, fsG);
    const ntfk::ProductFeatureSet product =
        ntfk::productFeatures(fsF, fsG, pairing, args.nA, args.nB, args.nC);

    std::vector<std::pair<std::string, ntfk::Tensor3>> labeled;
    for (std::size_t p : labelOrder(fsF))
      labeled.emplace_back(fsF.features[p].label, product.cC[p]);
    const auto series = ntfk::transientStats(labeled);

    const fs::path csvPath = fs::path(args.outDir) / "features.csv";
    std::ofstream os(csvPath);
    os << "time,featureLabel,maxConcentration,meanConcentration\n";
    for (const auto& s : series)
      for (Eigen::Index i = 0; i < s.maxSeries.size(); ++i)
        os << fmt(static_cast<double>(i + 1) * args.dt) << ',' << s.label << ','
           << fmt(s.maxSeries[i]) << ',' << fmt(s.meanSeries[i]) << '\n';
    manifest.addOutput(csvPath);
  });
  return 0;
}

struct ExtrapolateArgs {
  std::string modelF, modelG;
  std::string outDir;
  std::size_t steps = 0;
  double dt = 1.0;
  std::string truthF, truthG;
  double nA = 1.0, nB = 1.0, nC = 1.0;
};

int cmdExtrapolate(const ExtrapolateArgs& args) {
  withManifest(args.outDir, "extrapolate", 0, [&](Manifest& manifest) {
    manifest.addInput(args.modelF);
    manifest.addInput(args.modelG);
    const ntfk::TuckerModel modelF = ntfk::readModel(args.modelF);
    const ntfk::TuckerModel modelG = ntfk::readModel(args.modelG);
    const auto trainK = static_cast<std::size_t>(modelF.W.rows());
    if (static_cast<std::size_t>(modelG.W.rows()) != trainK)
      throw ntfk::ValidationError("extrapolate: models trained on different horizons");

    ntfk::Vector timeGrid(trainK);
    for (std::size_t i = 0; i < trainK; ++i)
      timeGrid[static_cast<Eigen::Index>(i)] = static_cast<double>(i + 1) * args.dt;
    const auto splinesF = ntfk::fitTemporalSplines(modelF.W, timeGrid);
    const auto splinesG = ntfk::fitTemporalSplines(modelG.W, timeGrid);

    // steps == 0 means "evaluate at the training endpoint".
    const std::size_t rows = args.steps == 0 ? 1 : args.steps;
    ntfk::Vector tFuture(rows);
    for (std::size_t i = 0; i < rows; ++i)
      tFuture[static_cast<Eigen::Index>(i)] =
          args.steps == 0 ? static_cast<double>(trainK) * args.dt
                          : static_cast<double>(trainK + i + 1) * args.dt;

    const ntfk::Tensor3 predF = ntfk::blindPredict(modelF, splinesF, tFuture);
    const ntfk::Tensor3 predG = ntfk::blindPredict(modelG, splinesG, tFuture);
    const ntfk::SpeciesFields predicted =
        ntfk::recoverSpecies(predF, predG, args.nA, args.nB, args.nC);

    // Per-feature predicted means via models whose temporal factor rows are
    // the extrapolated values.
    ntfk::Matrix wExtF(tFuture.size(), modelF.W.cols());
    ntfk::Matrix wExtG(tFuture.size(), modelG.W.cols());
    for (Eigen::Index i = 0; i < tFuture.size(); ++i) {
      for (Eigen::Index p = 0; p < modelF.W.cols(); ++p)
        wExtF(i, p) = std::max(0.0, splinesF[static_cast<std::size_t>(p)](tFuture[i]));
      for (Eigen::Index p = 0; p < modelG.W.cols(); ++p)
        wExtG(i, p) = std::max(0.0, splinesG[static_cast<std::size_t>(p)](tFuture[i]));
    }
    ntfk::TuckerModel extF{modelF.core, wExtF, modelF.H, modelF.V};
    ntfk::TuckerModel extG{modelG.core, wExtG, modelG.H, modelG.V};
    const ntfk::FeatureSet fsTrainF = ntfk::featureDecompose(modelF);
    ntfk::FeatureSet fsF = ntfk::featureDecompose(extF);
    ntfk::FeatureSet fsG = ntfk::featureDecompose(extG);
    // Keep the training labels; the extrapolated windows are too short to
    // re-rank peaks meaningfully.
    for (std::size_t p = 0; p < fsF.features.size(); ++p)
      fsF.features[p].label = fsTrainF.features[p].label;
    const ntfk::FeaturePairing pairing = ntfk::pairFeatures(fsF, fsG);
    const ntfk::ProductFeatureSet product =
        ntfk::productFeatures(fsF, fsG, pairing, args.nA, args.nB, args.nC);

    std::optional<ntfk::Tensor3> truthC;
    if (!args.truthF.empty() && !args.truthG.empty()) {
      manifest.addInput(args.truthF);
      manifest.addInput(args.truthG);
      const ntfk::Tensor3 tf = ntfk::readTensor(args.truthF);
      const ntfk::Tensor3 tg = ntfk::readTensor(args.truthG);
      truthC = ntfk::recoverSpecies(tf, tg, args.nA, args.nB, args.nC).cC;
    }

    const auto order = labelOrder(fsF);
    const fs::path csvPath = fs::path(args.outDir) / "extrapolation.csv";
    std::ofstream os(csvPath);
    os << "time,trueMean,predictedMean";
    for (std::size_t p : order) os << ',' << fsF.features[p].label << "Mean";
    os << '\n';
    const std::size_t spatial = predF.dim(1) * predF.dim(2);
    for (Eigen::Index i = 0; i < tFuture.size(); ++i) {
      double predMean = 0.0;
      for (std::size_t j = 0; j < predF.dim(1); ++j)
        for (std::size_t l = 0; l < predF.dim(2); ++l)
          predMean += predicted.cC(static_cast<std::size_t>(i), j, l);
      predMean /= static_cast<double>(spatial);

      os << fmt(tFuture[i]) << ',';
      if (truthC.has_value()) {
        const auto idx = static_cast<std::size_t>(
            std::llround(tFuture[i] / args.dt)) - 1;
        if (idx < truthC->dim(0)) {
          double trueMean = 0.0;
          for (std::size_t j = 0; j < truthC->dim(1); ++j)
            for (std::size_t l = 0; l < truthC->dim(2); ++l)
              trueMean += (*truthC)(idx, j, l);
          os << fmt(trueMean / static_cast<double>(spatial));
        }
      }
      os << ',' << fmt(predMean);
      for (std::size_t p : order) {
        double m = 0.0;
        for (std::size_t j = 0; j < predF.dim(1); ++j)
          for (std::size_t l = 0; l < predF.dim(2); ++l)
            m += product.cC[p](static_cast<std::size_t>(i), j, l);
        os << ',' << fmt(m / static_cast<double>(spatial));
      }
      os << '\n';
    }
    manifest.addOutput(csvPath);
  });
  return 0;
}

struct ReportArgs {
  std::string modelDir;
  std::string tensorPath;
  std::string outDir;
};

int cmdReport(const ReportArgs& args) {
  withManifest(args.outDir, "report", 0, [&](Manifest& manifest) {
    manifest.addInput(args.modelDir);
    manifest.addInput(args.tensorPath);
    const ntfk::TuckerModel model = ntfk::readModel(args.modelDir);
    const ntfk::Tensor3 x = ntfk::readTensor(args.tensorPath);

    const double ratio = ntfk::compressionRatio(model, x);
    const double r = ntfk::relativeError(x, ntfk::reconstruct(model));
    const ntfk::ResidualDiagnostics diag = ntfk::residualDiagnostics(x, model);

    const fs::path csvPath = fs::path(args.outDir) / "report.csv";
    std::ofstream os(csvPath);
    os << "metric,value\n";
    os << "compressionRatio," << fmt(ratio) << '\n';
    os << "reconstructionR," << fmt(r) << '\n';
    os << "residualMean," << fmt(diag.mean) << '\n';
    os << "residualVariance," << fmt(diag.variance) << '\n';
    os << "residualLag1Autocorr," << fmt(diag.lag1Autocorr) << '\n';
    os << "residualMaxAbs," << fmt(diag.residual.maxAbs()) << '\n';
    manifest.addOutput(csvPath);
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reactive-mixing simulation and non-negative Tucker feature extraction"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run the invariant diffusion solver");
  simulate->add_option("--config", sim.configPath, "Config file")->required();
  simulate->add_option("--out", sim.outDir, "Output directory")->required();
  simulate->add_flag("--species", sim.species, "Also write cA/cB/cC tensors");
  simulate->add_option("--sweep", sim.sweep, "Sweep one key: key=v1,v2,...");
  simulate->add_option("--jobs", sim.jobs, "Parallel sweep workers");
  simulate->add_option("--seed", sim.seed, "Master seed recorded in the manifest");

  DecomposeArgs dec;
  auto* decompose = app.add_subcommand("decompose", "Ensemble NTF with k selection");
  decompose->add_option("--tensor", dec.tensorPath, "Input tensor")->required();
  decompose->add_option("--out", dec.outDir, "Output directory")->required();
  decompose->add_option("--k-min", dec.kMin, "Smallest candidate k")->required();
  decompose->add_option("--k-max", dec.kMax, "Largest candidate k")->required();
  decompose->add_option("--restarts", dec.restarts, "Ensemble restarts per k");
  decompose->add_option("--seed", dec.seed, "Master seed");
  decompose->add_option("--lambda", dec.lambda, "Core sparsity weight");
  decompose->add_option("--rank-x", dec.rankX, "Spatial x rank (0 = auto)");
  decompose->add_option("--rank-y", dec.rankY, "Spatial y rank (0 = auto)");
  decompose->add_option("--tol", dec.tolerance, "Relative objective tolerance");
  decompose->add_option("--max-sweeps", dec.maxSweeps, "BCD sweep cap");
  decompose->add_option("--sil-threshold", dec.silhouetteThreshold,
                        "Average-silhouette acceptance threshold");
  decompose->add_option("--jobs", dec.jobs, "Parallel restarts");

  FeatureArgs feat;
  auto* features = app.add_subcommand("features", "Per-feature product-C transients");
  features->add_option("--model-f", feat.modelF, "Model directory for cF")->required();
  features->add_option("--model-g", feat.modelG, "Model directory for cG")->required();
  features->add_option("--out", feat.outDir, "Output directory")->required();
  features->add_option("--dt", feat.dt, "Time step for the time column");
  features->add_option("--nA", feat.nA, "Stoichiometric coefficient of A");
  features->add_option("--nB", feat.nB, "Stoichiometric coefficient of B");
  features->add_option("--nC", feat.nC, "Stoichiometric coefficient of C");

  ExtrapolateArgs ext;
  auto* extrapolate = app.add_subcommand("extrapolate", "Blind prediction beyond training");
  extrapolate->add_option("--model-f", ext.modelF, "Model directory for cF")->required();
  extrapolate->add_option("--model-g", ext.modelG, "Model directory for cG")->required();
  extrapolate->add_option("--out", ext.outDir, "Output directory")->required();
  extrapolate->add_option("--steps", ext.steps, "Future steps (0 = training endpoint)");
  extrapolate->add_option("--dt", ext.dt, "Time step");
  extrapolate->add_option("--truth-f", ext.truthF, "Full-horizon cF tensor for trueMean");
  extrapolate->add_option("--truth-g", ext.truthG, "Full-horizon cG tensor for trueMean");
  extrapolate->add_option("--nA", ext.nA, "Stoichiometric coefficient of A");
  extrapolate->add_option("--nB", ext.nB, "Stoichiometric coefficient of B");
  extrapolate->add_option("--nC", ext.nC, "Stoichiometric coefficient of C");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Compression and residual diagnostics");
  report->add_option("--model", rep.modelDir, "Model directory")->required();
  report->add_option("--tensor", rep.tensorPath, "Reference tensor")->required();
  report->add_option("--out", rep.outDir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return cmdSimulate(sim);
    if (decompose->parsed()) return cmdDecompose(dec);
    if (features->parsed()) return cmdFeatures(feat);
    if (extrapolate->parsed()) return cmdExtrapolate(ext);
    if (report->parsed()) return cmdReport(rep);
  } catch (const ntfk::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ntfk::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
