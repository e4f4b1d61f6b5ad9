#pragma once

// Local Coulomb gauges on single charts and their gluing into Coulomb
// cocycles.  The codifferential is the exact weighted adjoint of d on the chart
// patch, so d*A^rho = 0 at every node carries the interior equation and the
// natural (Neumann) boundary condition together.

#include <cstdint>
#include <vector>

#include "ck/bundle.hpp"
#include "ck/form.hpp"

namespace ck {

struct CoulombResult {
  GroupField rho;
  FormField A_coulomb;
  double residual_interior = 0.0;  // |d*A^rho|_2 / max(|A^rho|_2, 1e-14)
  double residual_boundary = 0.0;  // max normal component of A^rho on open chart ends
  double estimate_ratio = 0.0;     // (|grad A^rho|_{n/2} + |A^rho|_n) / |F_A|_{n/2}
  double curvature_norm = 0.0;     // |F_A|_{n/2}
  double compatibility = 0.0;      // relative |<d*A, 1>|
  int iterations = 0;
  std::vector<double> energies;    // 1/2 |A^rho|^2 per descent step (nonabelian)
  std::vector<double> residuals;
};

struct CoulombOptions {
  double tol = 1e-9;
  double step = 1.0;  // initial line-search step
  int max_iter = 200;
  double cg_tol = 1e-12;
};

// U(1): solves d*d psi = -d*a (A = i a) on the zero-mean subspace, rho = e^{i psi}.
CoulombResult abelian_coulomb(const FormField& A, const CoulombOptions& opt = {});

// Descent on 1/2 |A^rho|^2 through rho <- rho exp(xi), xi an H1-preconditioned
// gradient step with backtracking on |d*A^rho|.
CoulombResult nonabelian_coulomb(const FormField& A, const CoulombOptions& opt = {});

// Dispatches on the group.
CoulombResult coulomb_gauge(const FormField& A, const CoulombOptions& opt = {});

// max_p |d rho - (rho A^rho - A rho)|
double gauge_derivative_identity_check(const FormField& A, const CoulombResult& r);

// Pointwise norm of the full gradient of a 1-form, sqrt(sum g^{aa} G^mu |d_a A_mu|^2).
std::vector<double> gradient_norm(const FormField& A);

// F = dA + A ^ A on one chart.
FormField chart_curvature(const FormField& A);

// (|grad B|_{n/2} + |B|_n) / |F_A|_{n/2}; 0 when both vanish.
double coulomb_estimate_ratio(const FormField& A, const FormField& B);

struct CoulombBundle {
  CocyclePtr cocycle;        // h_ij = rho_i^{-1} g_ij rho_j
  ConnectionForm connection;  // A^rho, refers to `cocycle`
  GaugeField rho;
};

// Glues per-chart results.  Throws SmallnessViolated when some chart curvature
// exceeds eps_coulomb (pass a negative value to skip the check).
CoulombBundle glue_coulomb(const Cocycle& P, const ConnectionForm& A, const std::vector<CoulombResult>& results,
                           double eps_coulomb = -1.0);

// Largest distance between transition values s lattice steps apart, for s = 1,
// 2, 4, ...; max_ratio = max osc(2s) / osc(s) and exponent is the fitted slope of
// log osc against log s.
struct HolderDiagnostic {
  std::vector<int> scales;
  std::vector<double> osc;
  double max_ratio = 0.0;
  double exponent = 0.0;
};
HolderDiagnostic holder_diagnostic(const Cocycle& h, int levels = 3);

// Coulomb fixing over a curvature ladder |F|_{n/2} = pi 2^{-k}, k = levels-1..0,
// on smooth random data of one chart.  eps_coulomb is the largest level where
// the gauge converges; c_coulomb the largest estimate_ratio seen there.  The
// ladder stops at pi, half the flux of a charge-1 bubble.
struct CoulombCalibration {
  double eps_coulomb = 0.0;
  double c_coulomb = 0.0;
  std::vector<double> levels;  // measured |F|_{n/2}
  std::vector<double> ratios;  // estimate_ratio, or -1 on failure
  std::vector<bool> converged;
};
CoulombCalibration calibrate_coulomb(const PatchPtr& chart, Group g, int levels = 7, std::uint64_t seed = 1);

}  // namespace ck
