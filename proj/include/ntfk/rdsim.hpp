#ifndef NTFK_RDSIM_HPP
#define NTFK_RDSIM_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <filesystem>
#include <vector>

#include "ntfk/tensor.hpp"

namespace ntfk {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Physical and numerical parameters of one mixing run. Defaults are the
/// production scale (81 nodes, 1000 steps); tests use smaller grids.
struct SimulationConfig {
  double domainLength = 1.0;  // L
  std::size_t grid = 81;      // nodes per side, >= 3
  double dt = 1e-3;
  double horizon = 1.0;
  double nA = 1.0, nB = 1.0, nC = 1.0;  // stoichiometry
  double Dm = 1e-3;                     // molecular diffusivity
  double alphaL = 1.0;                  // longitudinal dispersivity
  double alphaT = 1e-4;                 // transverse dispersivity
  double v0 = 1e-3;                     // vortex perturbation
  double kappafL = 3.0;                 // wavenumber scale (kappa_f * L)
  double flipPeriod = 1e-4;             // T, vortex flip period
  double qpTolerance = 1e-10;           // KKT residual target for the step QP

  void validate() const;  // throws ValidationError naming the offending field
  std::size_t numSteps() const;
  double spacing() const { return domainLength / static_cast<double>(grid - 1); }
};

// The velocity field is piecewise constant in time: branch 0 on
// [nu*T, (nu+1/2)*T), branch 1 on the second half-period. Phase is snapped
// to the nearest half-period boundary within 1e-9 half-periods so that step
// times that are exact multiples of T/2 do not flicker between branches.
int velocityBranch(double t, double flipPeriod);

double streamFunction(double x, double y, double t, const SimulationConfig& cfg);
Eigen::Vector2d velocity(double x, double y, double t, const SimulationConfig& cfg);

// D = Dm*I + alphaT*|v|*I + (alphaL - alphaT)/|v| * v v^T. For |v| <= 1e-12
// the velocity-dependent terms vanish (their analytic limit), leaving Dm*I.
// Eigenvalues are Dm + alphaL*|v| along v and Dm + alphaT*|v| across it.
Eigen::Matrix2d dispersionTensor(const Eigen::Vector2d& v, const SimulationConfig& cfg);

struct DiffusionOperator {
  SparseMatrix stiffness;  // symmetric, zero row sums; approximates -div(D grad .)
  Vector load;             // zero for the studied problem (no sources)
};

// Cell-based assembly on the structured grid with zero-flux boundaries.
// Diagonal terms use flux-form central stencils with cell-averaged
// conductances; the mixed D12 term uses the symmetric compact 9-point atom
// built from cell-averaged gradients, so the matrix is symmetric positive
// semidefinite by construction. Node (j, l) sits at (j*h, l*h) with flat
// index j*grid + l.
DiffusionOperator assembleOperator(const SimulationConfig& cfg, double t);

struct StepResult {
  Vector c;
  std::size_t sweeps = 0;
  double kktResidual = 0.0;
};

// One backward-Euler step as a box-constrained QP:
//   minimize 1/2 <c, K c> - <c, f> - (1/dt) <c, cPrev>   s.t. lo <= c <= hi
// where K must already include the 1/dt mass contribution. Solved by
// projected Gauss-Seidel; iterates stay inside the box exactly. Throws
// NumericalError if the KKT residual does not reach tol within maxSweeps
// full sweeps (default 10 * ndofs).
StepResult constrainedStep(const SparseMatrix& K, const Vector& cPrev,
                           const Vector& f, double dt, double lo, double hi,
                           double tol = 1e-10, std::size_t maxSweeps = 0);

struct InvariantFields {
  Vector cF, cG;  // nodal values, flat index j*grid + l
};

// Initial invariants: reactant A fills the left half (cF = 1), B the right
// (cG = 1); a node exactly on the midline takes 0.5 (its control volume
// straddles the barrier).
InvariantFields initialInvariantFields(const SimulationConfig& cfg);

struct SimulationResult {
  Tensor3 cF, cG;  // (numSteps, grid, grid); slice i is time (i+1)*dt
  double initialMassF = 0.0, initialMassG = 0.0;
  std::vector<double> massF, massG;  // plain nodal sums per step
  std::size_t totalSweeps = 0;       // PGS sweeps over the whole run
  std::size_t maxStepSweeps = 0;
};

// Backward-Euler marching of both invariants with the constrained step,
// bounds [0, max initial value] per invariant. Aborts with the failing step
// index if the QP solver stalls.
SimulationResult simulateInvariants(const SimulationConfig& cfg);

struct SpeciesFields {
  Tensor3 cA, cB, cC;
};

// Fast-reaction recovery:
//   cA = max[cF - (nA/nB) cG, 0]
//   cB = (nB/nA) max[(nA/nB) cG - cF, 0]
//   cC = (nC/nA) (cF - cA)
// cA*cB == 0 holds exactly at every entry.
SpeciesFields recoverSpecies(const Tensor3& cF, const Tensor3& cG, double nA,
                             double nB, double nC);

// Flat "key value" / "key = value" config file; '#' starts a comment.
// Keys: L grid dt horizon nA nB nC Dm alphaL alphaT v0 kappafL flipPeriod
// qpTolerance. Unknown keys are rejected.
SimulationConfig parseConfigFile(const std::filesystem::path& path);
SimulationConfig parseConfigText(const std::string& text);
void setConfigKey(SimulationConfig& cfg, const std::string& key, double value);
std::string configToText(const SimulationConfig& cfg);

}  // namespace ntfk

#endif  // NTFK_RDSIM_HPP
