#pragma once

#include <gencs/coherence.hpp>
#include <gencs/fourier.hpp>
#include <gencs/generator.hpp>
#include <gencs/gmm.hpp>
#include <gencs/measurement.hpp>
#include <gencs/types.hpp>
#include <gencs/upscale.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace gencs {

struct RecoveryConfig {
  double learning_rate = 0.01;
  Index iterations = 500;
  Index restarts = 1;
  double lambda = 0.0;  // weight of the -log p(z) penalty
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct RecoveryResult {
  Vector z_hat;
  Vector x_hat;  // upscale(G(z_hat))
  double final_loss = 0.0;              // data fidelity |SDF x_hat - b|^2, best restart
  std::vector<double> trajectory;       // data fidelity per iteration, incl. the initial point
  double eps_hat = 0.0;                 // |SDF x_hat - b| minus the best restart's value
  Index restart_index = 0;
};

/// Objective |SDF(U G(z)) - b|^2 + lambda (-log p(z)) and, when grad is
/// non-null, its gradient: exactly the map recover() descends. The data
/// fidelity part alone is written to data_fidelity when requested.
double recovery_objective(const GgnModel& model, const UpscaleOperator& up,
                          const UnitaryOperator& f, const MeasurementEnsemble& e, const CVector& b,
                          const Vector& z, double lambda, const GmmModel* prior,
                          Vector* grad = nullptr, double* data_fidelity = nullptr);

/// Adam on z -> |SDF(U G(z)) - b|^2 + lambda (-log p(z)). Restart r is
/// initialized from the prior when one is supplied and lambda > 0, else
/// from a standard normal; the best restart by data fidelity wins. A
/// non-finite objective raises DivergenceError with the iteration index.
RecoveryResult recover(const GgnModel& model, const UpscaleOperator& up, const UnitaryOperator& f,
                       const MeasurementEnsemble& e, const CVector& b, const RecoveryConfig& cfg,
                       const GmmModel* prior = nullptr);

/// Approximate projection of x0 onto the upscaled generator range by the
/// same optimizer on |U G(z) - x0|^2. Returns (projection, residual);
/// residual orthogonality is not claimed (the range is nonconvex).
std::pair<Vector, Vector> project_onto_range(const GgnModel& model, const UpscaleOperator& up,
                                             const Vector& x0, const RecoveryConfig& cfg);

/// |x_perp| + sqrt(2/m) (2 |SDF x_perp| + 2 |eta| + eps_hat), times
/// 1/(1 - theta) when theta is given. theta >= 1 is rejected.
double bound_rhs(const UnitaryOperator& f, const MeasurementEnsemble& e, const Vector& x_perp,
                 const CVector& eta, double eps_hat, std::optional<double> theta = std::nullopt);

struct Certificate {
  double lhs = 0.0;  // |x_hat - x0|
  double rhs_general = 0.0;
  double rhs_admissible = 0.0;  // NaN when p is not admissible
  double rhs_balancing = 0.0;   // NaN when theta >= 1
  double theta = 0.0;
  double eps_hat = 0.0;
  bool admissible = false;
  bool holds_general = false;
  bool holds_admissible = false;
  bool holds_balancing = false;
};

/// Evaluates the recovery bound for one solved instance. The optimization
/// slack is anchored at the computed range projection of x0: eps_hat =
/// max(0, |SDF x_hat - b| - |SDF proj - b|), which is exactly the slack the
/// bound's anchor-point argument consumes. The general branch adds the
/// explicitly evaluated off-support tail |I-perp F (x_hat - proj)|; the
/// admissible branch drops it; the balancing branch rescales by 1/(1-theta)
/// with theta measured on the upscaled range subspace.
Certificate certify(const RecoveryResult& rec, const Vector& x0, const UnitaryOperator& f,
                    const MeasurementEnsemble& e, const CVector& eta,
                    const SamplingDistribution& p, const CoherenceProfile& prof,
                    const GgnModel& model, const UpscaleOperator& up,
                    const RecoveryConfig& projection_cfg);

}  // namespace gencs
