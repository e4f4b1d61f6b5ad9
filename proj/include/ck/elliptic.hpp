#pragma once

// Drift equation  Lap(alpha) = A . grad(alpha) + F  on a box with zero
// Dirichlet data, solved by the fixed-point map T(v) = Lap^{-1}(A . grad v + F),
// plus the nested-cutoff interior bootstrap and contraction diagnostics.
//
// Fields are 2x2 complex matrices on the node lattice 0..cells[a] of a box
// [0, L_0] x ... x [0, L_{n-1}]; A_mu acts by left multiplication.

#include <cstdint>
#include <functional>
#include <vector>

#include "ck/lie.hpp"

namespace ck {

struct NodeGrid {
  int n = 2;
  std::vector<int> cells;  // nodes per axis = cells + 1
  std::vector<double> h;

  static NodeGrid box(int n, int cells, double length);
  std::size_t size() const;
  std::size_t stride(int a) const;
  void unflatten(std::size_t p, int* idx) const;
  double cell_volume() const;
};

// Inclusive node-index bounds; the solve treats its outer layer as boundary.
struct IndexBox {
  std::vector<int> lo, hi;

  static IndexBox full(const NodeGrid& g);
  IndexBox shrunk(int cells) const;
  bool contains(const IndexBox& inner, int clearance) const;
};

using MatField = std::vector<Mat2>;

struct DriftProblem {
  NodeGrid grid;
  std::vector<MatField> A;  // one field per axis
  MatField F;

  static DriftProblem sample(const NodeGrid& g, const std::function<Mat2(const double*, int)>& A,
                             const std::function<Mat2(const double*)>& F);
};

// Discrete operators on a box (values outside its interior are read, never written).
MatField laplacian(const NodeGrid& g, const MatField& u, const IndexBox& box);
MatField gradient(const NodeGrid& g, const MatField& u, int axis, const IndexBox& box);
MatField drift(const NodeGrid& g, const std::vector<MatField>& A, const MatField& u, const IndexBox& box);

// Matrix norm |m| = Frobenius / sqrt(2), the algebra norm on su(2).
double mat_norm(const Mat2& m);
double ln_norm(const NodeGrid& g, const std::vector<MatField>& A, double p);
// Full W^{1,2} norm over the box (forward differences on every box edge).
double w12_norm(const NodeGrid& g, const MatField& u, const IndexBox& box);
double w12_seminorm(const NodeGrid& g, const MatField& u, const IndexBox& box);
double l2_norm_interior(const NodeGrid& g, const MatField& u, const IndexBox& box);

struct CgReport {
  int iterations = 0;
  double relative_residual = 0.0;
};

// Solves Lap(u) = rhs in the interior of box with u = 0 on its outer layer,
// by diagonally preconditioned conjugate gradients on -Lap.
CgReport poisson_dirichlet(const NodeGrid& g, const MatField& rhs, MatField& u, const IndexBox& box,
                           double rel_tol = 1e-10, int max_iter = 20000);

struct DriftOptions {
  double tol = 1e-9;
  int max_iter = 200;
  double cg_tol = 1e-12;
  double lorentz_s = 2.0, lorentz_theta = 1.0;
  const MatField* initial = nullptr;  // defaults to zero
};

struct DriftReport {
  int iterations = 0;
  double contraction = 0.0;        // geometric mean of the last iterate-distance ratios
  double residual_l2 = 0.0;        // || Lap a - A.grad a - F ||_2
  double residual_lorentz = 0.0;   // same residual in L^{(s, theta)}
  double a_ln = 0.0;               // || A ||_{L^n}
  double envelope_rate = 0.0;      // fitted geometric rate of the residual history
  double envelope_r2 = 0.0;
  std::vector<double> distances;   // ||v_{k+1} - v_k||_{W^{1,2}}
  std::vector<double> residuals;   // L2 residual after each step
};

struct DriftSolution {
  MatField alpha;
  DriftReport report;
};

// Throws ContractionFailure when the iterate distance fails to decrease over 5
// consecutive steps and NonConvergence at max_iter.
DriftSolution solve_drift_dirichlet(const DriftProblem& p, const DriftOptions& opt = {},
                                    const IndexBox* box = nullptr);

// Empirical Lipschitz factor of T in the W^{1,2} seminorm over `pairs` random
// pairs (smooth modes plus noise), seeded deterministically.
double contraction_probe(const NodeGrid& g, const std::vector<MatField>& A, int pairs = 20, std::uint64_t seed = 1);

struct EpsCalibration {
  double eps = 0.0;                   // largest tested ||cA||_{L^n} with factor <= threshold
  std::vector<double> scales, norms, factors;
  double slope = 0.0;                 // least-squares slope of factor against c
};

EpsCalibration calibrate_eps_elliptic(const NodeGrid& g, const std::vector<MatField>& A_shape,
                                      const std::vector<double>& ladder, double threshold = 0.9,
                                      std::uint64_t seed = 1);

struct SmallnessProfile {
  double eps_elliptic = 0.0;
  double eps_coulomb = 0.0;
  double c_coulomb = 0.0;
};

// Number of localization stages for target exponent q and Lorentz index theta.
int bootstrap_stage_count(int n, double q, double theta);

struct StageReport {
  IndexBox domain;         // box on which the localized problem is solved
  IndexBox target;         // box on which the cutoff equals one
  double exponent = 0.0;   // integrability tracked at this stage
  double w1p = 0.0;        // ||u||_{W^{1,p}} on the target box
  double w2q = 0.0;        // ||u||_{W^{2,q}} on the target box
  double localization_error = 0.0;  // max |v - phi u|
  int iterations = 0;
};

struct BootstrapReport {
  int stages = 0;
  std::vector<StageReport> per_stage;
  double interior_w2q = 0.0;          // discrete W^{2,q} norm on K
  double interior_w2q_lorentz = 0.0;  // same with L^{(q,theta)} on every term
  MatField u;                          // solution on the outer box
};

struct BootstrapOptions {
  double q = 3.0, theta = 3.0;
  int shrink = 2;                      // cells removed per side at every stage
  bool trivial_cutoff = false;         // phi = 1 on the whole box (one stage)
  DriftOptions drift;
  const MatField* u = nullptr;         // a given solution on the whole box; solved if null
};

// Throws MarginExhausted when K does not fit inside the nested boxes.
BootstrapReport bootstrap_interior(const DriftProblem& p, const IndexBox& K, const BootstrapOptions& opt = {});

// Discrete W^{k,p} norms on a box (k = 1, 2); p may be infinite.
double wkp_norm(const NodeGrid& g, const MatField& u, const IndexBox& box, int k, double p);
double w2_lorentz_norm(const NodeGrid& g, const MatField& u, const IndexBox& box, double s, double theta);

}  // namespace ck
