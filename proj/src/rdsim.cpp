#include "ntfk/rdsim.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ntfk/errors.hpp"

namespace ntfk {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t flatIndex(std::size_t grid, std::size_t j, std::size_t l) {
  return j * grid + l;
}

double nodalSum(const Vector& c) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) s += c[i];
  return s;
}

}  // namespace

void SimulationConfig::validate() const {
  if (!(domainLength > 0.0)) throw ValidationError("config field 'L' must be > 0");
  if (grid < 3) throw ValidationError("config field 'grid' must be >= 3 nodes per side");
  if (!(dt > 0.0)) throw ValidationError("config field 'dt' must be > 0");
  if (!(horizon >= dt)) throw ValidationError("config field 'horizon' must be >= dt");
  if (!(nA > 0.0)) throw ValidationError("config field 'nA' must be > 0");
  if (!(nB > 0.0)) throw ValidationError("config field 'nB' must be > 0");
  if (!(nC > 0.0)) throw ValidationError("config field 'nC' must be > 0");
  if (!(Dm > 0.0)) throw ValidationError("config field 'Dm' must be > 0");
  if (!(alphaT >= 0.0)) throw ValidationError("config field 'alphaT' must be >= 0");
  if (!(alphaL >= alphaT)) throw ValidationError("config field 'alphaL' must be >= alphaT");
  if (!(v0 >= 0.0)) throw ValidationError("config field 'v0' must be >= 0");
  if (!(kappafL > 0.0)) throw ValidationError("config field 'kappafL' must be > 0");
  if (!(flipPeriod > 0.0)) throw ValidationError("config field 'flipPeriod' must be > 0");
  if (!(qpTolerance > 0.0)) throw ValidationError("config field 'qpTolerance' must be > 0");
}

std::size_t SimulationConfig::numSteps() const {
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  return steps < 1 ? 1 : steps;
}

int velocityBranch(double t, double flipPeriod) {
  const double halves = t / (0.5 * flipPeriod);
  const double snapped = std::floor(halves + 1e-9);
  return static_cast<int>(std::fmod(snapped, 2.0));
}

double streamFunction(double x, double y, double t, const SimulationConfig& cfg) {
  const double kf = cfg.kappafL / cfg.domainLength;
  const double a = kTwoPi * kf;
  const double base = std::sin(a * x) - std::sin(a * y);
  const double perturb = velocityBranch(t, cfg.flipPeriod) == 0
                             ? cfg.v0 * std::cos(a * y)
                             : -cfg.v0 * std::cos(a * x);
  return (base + perturb) / (kTwoPi * kf);
}

Eigen::Vector2d velocity(double x, double y, double t, const SimulationConfig& cfg) {
  const double a = kTwoPi * cfg.kappafL / cfg.domainLength;
  Eigen::Vector2d v;
  if (velocityBranch(t, cfg.flipPeriod) == 0) {
    v[0] = std::cos(a * y) + cfg.v0 * std::sin(a * y);
    v[1] = std::cos(a * x);
  } else {
    v[0] = std::cos(a * y);
    v[1] = std::cos(a * x) + cfg.v0 * std::sin(a * x);
  }
  return v;
}

Eigen::Matrix2d dispersionTensor(const Eigen::Vector2d& v, const SimulationConfig& cfg) {
  Eigen::Matrix2d d = cfg.Dm * Eigen::Matrix2d::Identity();
  const double speed = v.norm();
  if (speed > 1e-12) {
    d += cfg.alphaT * speed * Eigen::Matrix2d::Identity();
    d += ((cfg.alphaL - cfg.alphaT) / speed) * (v * v.transpose());
  }
  return d;
}

DiffusionOperator assembleOperator(const SimulationConfig& cfg, double t) {
  cfg.validate();
  const std::size_t g = cfg.grid;
  const std::size_t n = g * g;
  const double h = cfg.spacing();
  const double invH2 = 1.0 / (h * h);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(16 * (g - 1) * (g - 1));

  auto addPair = [&](std::size_t u, std::size_t w, double kappa) {
    trip.emplace_back(static_cast<int>(u), static_cast<int>(u), kappa);
    trip.emplace_back(static_cast<int>(w), static_cast<int>(w), kappa);
    trip.emplace_back(static_cast<int>(u), static_cast<int>(w), -kappa);
    trip.emplace_back(static_cast<int>(w), static_cast<int>(u), -kappa);
  };

  for (std::size_t cj = 0; cj + 1 < g; ++cj) {
    for (std::size_t cl = 0; cl + 1 < g; ++cl) {
      const double cx = (static_cast<double>(cj) + 0.5) * h;
      const double cy = (static_cast<double>(cl) + 0.5) * h;
      const Eigen::Matrix2d d = dispersionTensor(velocity(cx, cy, t, cfg), cfg);

      const std::size_t a = flatIndex(g, cj, cl);
      const std::size_t b = flatIndex(g, cj + 1, cl);
      const std::size_t c = flatIndex(g, cj, cl + 1);
      const std::size_t e = flatIndex(g, cj + 1, cl + 1);

      // D11 on the two x-edges, D22 on the two y-edges, half weight each so
      // interior edges end up with the mean of their two cells.
      addPair(a, b, 0.5 * d(0, 0) * invH2);
      addPair(c, e, 0.5 * d(0, 0) * invH2);
      addPair(a, c, 0.5 * d(1, 1) * invH2);
      addPair(b, e, 0.5 * d(1, 1) * invH2);

      // Mixed term from the cell-averaged gradient product; couples the two
      // diagonals of the cell and keeps the matrix symmetric with zero row
      // sums. Can break the discrete maximum principle, which is what the
      // box-constrained step is for.
      const double chi = 0.5 * d(0, 1) * invH2;
      if (chi != 0.0) {
        trip.emplace_back(static_cast<int>(a), static_cast<int>(a), chi);
        trip.emplace_back(static_cast<int>(e), static_cast<int>(e), chi);
        trip.emplace_back(static_cast<int>(b), static_cast<int>(b), -chi);
        trip.emplace_back(static_cast<int>(c), static_cast<int>(c), -chi);
        trip.emplace_back(static_cast<int>(a), static_cast<int>(e), -chi);
        trip.emplace_back(static_cast<int>(e), static_cast<int>(a), -chi);
        trip.emplace_back(static_cast<int>(b), static_cast<int>(c), chi);
        trip.emplace_back(static_cast<int>(c), static_cast<int>(b), chi);
      }
    }
  }

  DiffusionOperator op;
  op.stiffness.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  op.stiffness.setFromTriplets(trip.begin(), trip.end());
  op.stiffness.makeCompressed();
  op.load = Vector::Zero(static_cast<Eigen::Index>(n));
  return op;
}

StepResult constrainedStep(const SparseMatrix& K, const Vector& cPrev,
                           const Vector& f, double dt, double lo, double hi,
                           double tol, std::size_t maxSweeps) {
  const Eigen::Index n = K.rows();
  if (K.cols() != n || cPrev.size() != n || f.size() != n)
    throw ValidationError("constrainedStep: inconsistent system sizes");
  if (!(lo <= hi)) throw ValidationError("constrainedStep: bounds must satisfy lo <= hi");
  if (maxSweeps == 0) maxSweeps = 10 * static_cast<std::size_t>(n);

  const Vector rhs = f + cPrev / dt;
  Vector c = cPrev.cwiseMax(lo).cwiseMin(hi);

  StepResult result;
  for (std::size_t sweep = 1; sweep <= maxSweeps; ++sweep) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = rhs[i];
      double diag = 0.0;
      for (SparseMatrix::InnerIterator it(K, i); it; ++it) {
        if (it.col() == i)
          diag = it.value();
        else
          s -= it.value() * c[it.col()];
      }
      c[i] = std::min(hi, std::max(lo, s / diag));
    }
    // KKT check via the fixed point of the projected gradient map.
    double res = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double gi = -rhs[i];
      for (SparseMatrix::InnerIterator it(K, i); it; ++it) gi += it.value() * c[it.col()];
      const double proj = std::min(hi, std::max(lo, c[i] - gi));
      res = std::max(res, std::abs(c[i] - proj));
    }
    if (res <= tol) {
      result.c = std::move(c);
      result.sweeps = sweep;
      result.kktResidual = res;
      return result;
    }
  }
  std::ostringstream oss;
  oss << "constrainedStep: projected Gauss-Seidel did not reach KKT residual "
      << tol << " within " << maxSweeps << " sweeps";
  throw NumericalError(oss.str());
}

InvariantFields initialInvariantFields(const SimulationConfig& cfg) {
  const std::size_t g = cfg.grid;
  InvariantFields fields;
  fields.cF = Vector::Zero(static_cast<Eigen::Index>(g * g));
  fields.cG = Vector::Zero(static_cast<Eigen::Index>(g * g));
  for (std::size_t j = 0; j < g; ++j) {
    double f = 0.0, gg = 0.0;
    if (2 * j < g - 1)
      f = 1.0;
    else if (2 * j == g - 1)
      f = gg = 0.5;
    else
      gg = 1.0;
    for (std::size_t l = 0; l < g; ++l) {
      fields.cF[static_cast<Eigen::Index>(flatIndex(g, j, l))] = f;
      fields.cG[static_cast<Eigen::Index>(flatIndex(g, j, l))] = gg;
    }
  }
  return fields;
}

SimulationResult simulateInvariants(const SimulationConfig& cfg) {
  cfg.validate();
  const std::size_t g = cfg.grid;
  const std::size_t steps = cfg.numSteps();

  InvariantFields state = initialInvariantFields(cfg);
  const double hiF = state.cF.maxCoeff();
  const double hiG = state.cG.maxCoeff();

  SimulationResult out;
  out.cF = Tensor3(steps, g, g);
  out.cG = Tensor3(steps, g, g);
  out.initialMassF = nodalSum(state.cF);
  out.initialMassG = nodalSum(state.cG);
  out.massF.reserve(steps);
  out.massG.reserve(steps);

  // The velocity has only two distinct configurations, so at most two
  // operators are ever assembled.
  std::array<SparseMatrix, 2> kBranch;
  std::array<bool, 2> built = {false, false};
  const Vector zeroLoad = Vector::Zero(static_cast<Eigen::Index>(g * g));

  for (std::size_t n = 0; n < steps; ++n) {
    const double tNext = static_cast<double>(n + 1) * cfg.dt;
    const int branch = velocityBranch(tNext, cfg.flipPeriod);
    if (!built[static_cast<std::size_t>(branch)]) {
      SparseMatrix k = assembleOperator(cfg, tNext).stiffness;
      for (Eigen::Index i = 0; i < k.rows(); ++i) k.coeffRef(i, i) += 1.0 / cfg.dt;
      k.makeCompressed();
      kBranch[static_cast<std::size_t>(branch)] = std::move(k);
      built[static_cast<std::size_t>(branch)] = true;
    }
    const SparseMatrix& k = kBranch[static_cast<std::size_t>(branch)];

    try {
      StepResult sf = constrainedStep(k, state.cF, zeroLoad, cfg.dt, 0.0, hiF, cfg.qpTolerance);
      StepResult sg = constrainedStep(k, state.cG, zeroLoad, cfg.dt, 0.0, hiG, cfg.qpTolerance);
      state.cF = std::move(sf.c);
      state.cG = std::move(sg.c);
      out.totalSweeps += sf.sweeps + sg.sweeps;
      out.maxStepSweeps = std::max({out.maxStepSweeps, sf.sweeps, sg.sweeps});
    } catch (const NumericalError& e) {
      std::ostringstream oss;
      oss << "simulateInvariants: step " << n << " failed: " << e.what();
      throw NumericalError(oss.str());
    }

    for (std::size_t j = 0; j < g; ++j)
      for (std::size_t l = 0; l < g; ++l) {
        out.cF(n, j, l) = state.cF[static_cast<Eigen::Index>(flatIndex(g, j, l))];
        out.cG(n, j, l) = state.cG[static_cast<Eigen::Index>(flatIndex(g, j, l))];
      }
    out.massF.push_back(nodalSum(state.cF));
    out.massG.push_back(nodalSum(state.cG));
  }
  return out;
}

SpeciesFields recoverSpecies(const Tensor3& cF, const Tensor3& cG, double nA,
                             double nB, double nC) {
  if (cF.dims() != cG.dims()) throw ValidationError("recoverSpecies: dimension mismatch");
  if (cF.minValue() < 0.0 || cG.minValue() < 0.0)
    throw ValidationError("recoverSpecies: invariants must be non-negative");
  SpeciesFields s;
  s.cA = Tensor3(cF.dim(0), cF.dim(1), cF.dim(2));
  s.cB = Tensor3(cF.dim(0), cF.dim(1), cF.dim(2));
  s.cC = Tensor3(cF.dim(0), cF.dim(1), cF.dim(2));
  const double rAB = nA / nB;
  const double rBA = nB / nA;
  const double rCA = nC / nA;
  const double* f = cF.data();
  const double* gg = cG.data();
  double* a = s.cA.data();
  double* b = s.cB.data();
  double* c = s.cC.data();
  for (std::size_t t = 0; t < cF.size(); ++t) {
    const double excess = f[t] - rAB * gg[t];
    a[t] = std::max(excess, 0.0);
    b[t] = rBA * std::max(-excess, 0.0);
    c[t] = rCA * (f[t] - a[t]);
  }
  return s;
}

void setConfigKey(SimulationConfig& cfg, const std::string& key, double value) {
  if (key == "L") cfg.domainLength = value;
  else if (key == "grid") cfg.grid = static_cast<std::size_t>(value);
  else if (key == "dt") cfg.dt = value;
  else if (key == "horizon") cfg.horizon = value;
  else if (key == "nA") cfg.nA = value;
  else if (key == "nB") cfg.nB = value;
  else if (key == "nC") cfg.nC = value;
  else if (key == "Dm") cfg.Dm = value;
  else if (key == "alphaL") cfg.alphaL = value;
  else if (key == "alphaT") cfg.alphaT = value;
  else if (key == "v0") cfg.v0 = value;
  else if (key == "kappafL") cfg.kappafL = value;
  else if (key == "flipPeriod") cfg.flipPeriod = value;
  else if (key == "qpTolerance") cfg.qpTolerance = value;
  else throw ValidationError("unknown config key '" + key + "'");
}

std::string configToText(const SimulationConfig& cfg) {
  std::ostringstream os;
  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << key << " = " << buf << "\n";
  };
  put("L", cfg.domainLength);
  os << "grid = " << cfg.grid << "\n";
  put("dt", cfg.dt);
  put("horizon", cfg.horizon);
  put("nA", cfg.nA);
  put("nB", cfg.nB);
  put("nC", cfg.nC);
  put("Dm", cfg.Dm);
  put("alphaL", cfg.alphaL);
  put("alphaT", cfg.alphaT);
  put("v0", cfg.v0);
  put("kappafL", cfg.kappafL);
  put("flipPeriod", cfg.flipPeriod);
  put("qpTolerance", cfg.qpTolerance);
  return os.str();
}

SimulationConfig parseConfigText(const std::string& text) {
  std::vector<std::pair<std::string, double>> kv;
  std::istringstream is(text);
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(is, line)) {
    ++lineNo;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    for (char& ch : line)
      if (ch == '=') ch = ' ';
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    double value;
    if (!(ls >> value)) {
      std::ostringstream oss;
      oss << "config line " << lineNo << ": expected 'key value', got '" << key << "'";
      throw ValidationError(oss.str());
    }
    std::string extra;
    if (ls >> extra) {
      std::ostringstream oss;
      oss << "config line " << lineNo << ": trailing content '" << extra << "'";
      throw ValidationError(oss.str());
    }
    kv.emplace_back(key, value);
  }
  SimulationConfig cfg;
  for (const auto& [key, value] : kv) setConfigKey(cfg, key, value);
  return cfg;
}

SimulationConfig parseConfigFile(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return parseConfigText(buffer.str());
}

}  // namespace ntfk
