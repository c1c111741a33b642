#pragma once

#include <gencs/riptest.hpp>
#include <gencs/types.hpp>

#include <string>
#include <vector>

namespace gencs {

/// One verifiable claim about the implementation, evaluated at a fixed
/// desk scale with fixed internal seeds so results are reproducible.
struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Exact-subspace profiles on the 16x16 DFT: |sum alpha^2 - r| <= 1e-9
/// over 50 random rank-8 subspaces.
CheckResult check_coherence_energy_identity();

/// mu(p*)^2 = |alpha|^2 within 1e-9 and mu(p*) <= mu(p) against 10 random
/// admissible distributions per profile.
CheckResult check_optimal_distribution();

/// mu >= 1 - 1e-9 for admissible distributions over random subspaces, and
/// on constructed partial supports carrying coherence energy >= 1.
CheckResult check_admissibility_mu_bound();

/// Monte-Carlo mean of (1/m)|SDFx|^2 over 10^4 ensembles within 2% of
/// |x|^2 for a fixed unit vector.
CheckResult check_measurement_unbiasedness();

/// Frozen arithmetic oracle values of both sample-complexity formulas plus
/// the exact mu- and delta-scaling laws pre-ceiling.
CheckResult check_sample_complexity_arithmetic();

/// Balancing constant on nested prefix supports: nonincreasing, zero at
/// full support, strictly smaller at M/2 than at M/4.
CheckResult check_balancing_decay();

/// Manufactured-solution O(h^2) convergence, discrete flux telescoping,
/// and the maximum principle of the Darcy solver.
CheckResult check_darcy_solver();

/// Network, recovery-objective, and GMM log-density gradients against
/// central finite differences, 50 instances, 1e-5 relative.
CheckResult check_gradient_correctness();

/// Verdict of a trend evaluated on pipeline results.
struct TrendCheck {
  bool pass = false;
  std::string detail;
};

/// failure_fraction <= eps + margin.
TrendCheck rip_concentration(const RipReport& rip, double margin = 0.05);

}  // namespace gencs
