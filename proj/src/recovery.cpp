#include <gencs/recovery.hpp>

#include <gencs/adam.hpp>
#include <gencs/rng.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gencs {

void RecoveryConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("RecoveryConfig: learning rate must be > 0");
  if (iterations < 1) throw std::invalid_argument("RecoveryConfig: need at least one iteration");
  if (restarts < 1) throw std::invalid_argument("RecoveryConfig: need at least one restart");
  if (lambda < 0.0) throw std::invalid_argument("RecoveryConfig: lambda must be >= 0");
}

namespace {

struct SolveOutcome {
  Vector z;
  double data_loss;
  std::vector<double> trajectory;
};

// One Adam descent; `loss_and_grad` returns the data-fidelity part and adds
// the full objective gradient (penalty included) into `grad`.
template <typename LossGrad>
SolveOutcome run_adam(Vector z, Index iterations, const AdamParams& params,
                      const LossGrad& loss_and_grad) {
  SolveOutcome out;
  out.trajectory.reserve(iterations + 1);
  AdamState adam(z.size());
  Vector grad(z.size());
  for (Index it = 0; it <= iterations; ++it) {
    grad.setZero();
    const double data_loss = loss_and_grad(z, grad);
    if (!std::isfinite(data_loss))
      throw DivergenceError("recovery: non-finite objective", static_cast<long>(it));
    out.trajectory.push_back(data_loss);
    if (it == iterations) break;
    adam.step(z, grad, params);
  }
  out.z = std::move(z);
  out.data_loss = out.trajectory.back();
  return out;
}

Vector initial_latent(const GgnModel& model, const RecoveryConfig& cfg, const GmmModel* prior,
                      Index restart) {
  const std::uint64_t s =
      derive_stream(cfg.seed, {0x72656300ULL, static_cast<std::uint64_t>(restart)});
  // Drawing from the prior only when it also shapes the objective keeps
  // lambda = 0 runs identical with and without a prior supplied.
  if (prior != nullptr && cfg.lambda > 0.0) return gmm_sampler(*prior, s)(0);
  Stream stream(s);
  return stream.normal_vector(model.latent_dim());
}

template <typename LossGrad>
RecoveryResult best_of_restarts(const GgnModel& model, const UpscaleOperator& up,
                                const RecoveryConfig& cfg, const GmmModel* prior,
                                const LossGrad& loss_and_grad) {
  cfg.validate();
  if (prior != nullptr && prior->dim() != model.latent_dim())
    throw ShapeError("recover: prior dimension does not match the latent space");
  const AdamParams params{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps};

  RecoveryResult best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (Index r = 0; r < cfg.restarts; ++r) {
    SolveOutcome outcome =
        run_adam(initial_latent(model, cfg, prior, r), cfg.iterations, params, loss_and_grad);
    if (outcome.data_loss < best_loss) {
      best_loss = outcome.data_loss;
      best.z_hat = std::move(outcome.z);
      best.final_loss = outcome.data_loss;
      best.trajectory = std::move(outcome.trajectory);
      best.restart_index = r;
    }
  }
  best.x_hat = up.apply(forward(model, best.z_hat));
  best.eps_hat = 0.0;  // best restart measured against itself
  return best;
}

}  // namespace

double recovery_objective(const GgnModel& model, const UpscaleOperator& up,
                          const UnitaryOperator& f, const MeasurementEnsemble& e, const CVector& b,
                          const Vector& z, double lambda, const GmmModel* prior, Vector* grad,
                          double* data_fidelity) {
  if (b.size() != e.count()) throw ShapeError("recovery_objective: measurement length mismatch");
  if (lambda > 0.0 && prior == nullptr)
    throw std::invalid_argument("recovery_objective: lambda > 0 requires a prior");
  const Vector field = up.apply(forward(model, z));
  const CVector residual = apply_sdf(f, e, field) - b;
  const double data_loss = residual.squaredNorm();
  if (data_fidelity != nullptr) *data_fidelity = data_loss;
  double objective = data_loss;
  if (prior != nullptr && lambda > 0.0) objective -= lambda * log_density(*prior, z);
  if (grad != nullptr) {
    const Vector g_field = 2.0 * apply_sdf_adjoint(f, e, residual);
    *grad = forward_grad(model, z, up.apply_adjoint(g_field));
    if (prior != nullptr && lambda > 0.0) *grad -= lambda * log_density_grad(*prior, z);
  }
  return objective;
}

RecoveryResult recover(const GgnModel& model, const UpscaleOperator& up, const UnitaryOperator& f,
                       const MeasurementEnsemble& e, const CVector& b, const RecoveryConfig& cfg,
                       const GmmModel* prior) {
  if (b.size() != e.count()) throw ShapeError("recover: measurement length mismatch");
  if (up.target_dim() != f.dim()) throw ShapeError("recover: upscaler/operator mismatch");
  if (up.source_dim() != model.signal_dim())
    throw ShapeError("recover: model output does not match the upscaler source grid");
  if (cfg.lambda > 0.0 && prior == nullptr)
    throw std::invalid_argument("recover: lambda > 0 requires a prior");

  Vector g(model.latent_dim());
  auto loss_and_grad = [&](const Vector& z, Vector& grad) {
    double data_loss = 0.0;
    recovery_objective(model, up, f, e, b, z, cfg.lambda, prior, &g, &data_loss);
    grad += g;
    return data_loss;
  };
  return best_of_restarts(model, up, cfg, prior, loss_and_grad);
}

std::pair<Vector, Vector> project_onto_range(const GgnModel& model, const UpscaleOperator& up,
                                             const Vector& x0, const RecoveryConfig& cfg) {
  if (up.target_dim() != x0.size()) throw ShapeError("project_onto_range: field length mismatch");
  if (up.source_dim() != model.signal_dim())
    throw ShapeError("project_onto_range: model output does not match the upscaler source grid");

  auto loss_and_grad = [&](const Vector& z, Vector& grad) {
    const Vector field = up.apply(forward(model, z));
    const Vector residual = field - x0;
    grad += forward_grad(model, z, up.apply_adjoint(2.0 * residual));
    return residual.squaredNorm();
  };
  const RecoveryResult res = best_of_restarts(model, up, cfg, nullptr, loss_and_grad);
  return {res.x_hat, x0 - res.x_hat};
}

double bound_rhs(const UnitaryOperator& f, const MeasurementEnsemble& e, const Vector& x_perp,
                 const CVector& eta, double eps_hat, std::optional<double> theta) {
  if (eps_hat < 0.0) throw std::invalid_argument("bound_rhs: eps_hat must be >= 0");
  const double m = static_cast<double>(e.count());
  const double base =
      x_perp.norm() +
      std::sqrt(2.0 / m) * (2.0 * apply_sdf(f, e, x_perp).norm() + 2.0 * eta.norm() + eps_hat);
  if (!theta.has_value()) return base;
  if (!(*theta >= 0.0) || *theta >= 1.0)
    throw std::invalid_argument("bound_rhs: theta must lie in [0, 1)");
  return base / (1.0 - *theta);
}

Certificate certify(const RecoveryResult& rec, const Vector& x0, const UnitaryOperator& f,
                    const MeasurementEnsemble& e, const CVector& eta,
                    const SamplingDistribution& p, const CoherenceProfile& prof,
                    const GgnModel& model, const UpscaleOperator& up,
                    const RecoveryConfig& projection_cfg) {
  if (rec.x_hat.size() != x0.size()) throw ShapeError("certify: signal length mismatch");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Certificate cert;
  cert.lhs = (rec.x_hat - x0).norm();

  auto [proj, x_perp] = project_onto_range(model, up, x0, projection_cfg);
  const CVector b = apply_sdf(f, e, x0) + eta;
  const double fit_hat = (apply_sdf(f, e, rec.x_hat) - b).norm();
  const double fit_anchor = (apply_sdf(f, e, proj) - b).norm();
  cert.eps_hat = std::max({rec.eps_hat, fit_hat - fit_anchor, 0.0});

  const double base = bound_rhs(f, e, x_perp, eta, cert.eps_hat);

  const CVector tail_spectrum = f.forward_real(rec.x_hat - proj);
  const double tail = support_projection(p, tail_spectrum).second.norm();
  cert.rhs_general = base + tail;
  cert.holds_general = cert.lhs <= cert.rhs_general;

  cert.admissible = is_admissible(prof, p);
  cert.rhs_admissible = cert.admissible ? base : nan;
  cert.holds_admissible = cert.admissible && cert.lhs <= cert.rhs_admissible;

  const Matrix basis = range_subspace_basis(
      model, [&up](const Vector& v) { return up.apply(v); });
  cert.theta = balancing_theta(f, basis, p);
  if (cert.theta < 1.0) {
    cert.rhs_balancing = base / (1.0 - cert.theta);
    cert.holds_balancing = cert.lhs <= cert.rhs_balancing;
  } else {
    cert.rhs_balancing = nan;
    cert.holds_balancing = false;
  }
  return cert;
}

}  // namespace gencs
