#pragma once

#include <gencs/checks.hpp>
#include <gencs/coherence.hpp>
#include <gencs/config.hpp>
#include <gencs/darcy.hpp>
#include <gencs/gmm.hpp>
#include <gencs/io.hpp>
#include <gencs/riptest.hpp>
#include <gencs/training.hpp>
#include <gencs/types.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gencs {

/// A stage aborted; carries the stage name so the caller can report which
/// part of the pipeline failed. Artifacts written before the abort remain.
class StageError : public std::runtime_error {
public:
  StageError(const std::string& stage_name, const std::string& what)
      : std::runtime_error(stage_name + ": " + what), stage(stage_name) {}
  std::string stage;
};

/// Coherence profiles of one decoder's upscaled range, one per estimator.
struct CoherenceBundle {
  CoherenceProfile exact;
  CoherenceProfile max_magnitude;
  CoherenceProfile self_difference;
};

/// Per-instance recovery errors of one (mode, rate, resolution, lambda)
/// grid cell. `mode` carries the sampling mode plus a tag for the
/// regularizer comparison rows; `instances` are dataset indices.
struct SweepCell {
  std::string split;  // "test" or "validation"
  std::string mode;
  double rate = 0.0;
  Index resolution = 0;
  Index m = 0;
  double lambda = 0.0;
  std::vector<Index> instances;
  std::vector<double> mse;

  double mean_mse() const;
  double std_mse() const;  // sample standard deviation
};

struct SweepResult {
  std::vector<SweepCell> cells;         // test split, mode x rate grid
  std::vector<SweepCell> tuning_cells;  // validation split, lambda grid
  std::vector<SweepCell> lambda_cells;  // test split, paired lambda-0 vs lambda-star
  double lambda_star = 0.0;
};

struct CertifyOutcome {
  std::vector<CertificateRow> rows;
  Index admissible_trials = 0;
  Index admissible_held = 0;
  Index balancing_trials = 0;
  Index balancing_held = 0;
  double theta_truncated = 0.0;  // max theta over the truncated-support trials
};

/// Paired one-sided comparison: at every listed rate the adaptive mode must
/// beat uniform by at least one standard error of the paired differences.
TrendCheck adaptive_vs_uniform_trend(const SweepResult& sweep, Index resolution,
                                     const std::vector<double>& rates);

/// Regularizer comparison on the paired lambda cells: at the lowest rate the
/// tuned-lambda mean MSE must not exceed the unregularized one; at the
/// highest rate (when >= 32%) unregularized must be within 5% of tuned.
TrendCheck regularizer_trend(const SweepResult& sweep, Index resolution);

/// Certificate counts against a minimum hold fraction, with the truncated
/// trials' measured theta below the cap.
TrendCheck certificates_hold(const CertifyOutcome& outcome, double min_fraction = 0.95,
                             double theta_cap = 0.5);

/// Experiment orchestration over an output directory. Stage getters return
/// cached results, falling back to artifacts already in out_dir and then to
/// computation; run_stage forces the named stage to recompute. Identical
/// configurations produce bitwise-identical artifacts.
class Pipeline {
public:
  explicit Pipeline(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }

  /// With strict prerequisites, anything a stage depends on must already
  /// exist in out_dir; nothing is computed implicitly (stage-only mode).
  void set_strict_prerequisites(bool strict) { strict_ = strict; }

  /// Points dataset loading at a directory of previously generated dataset
  /// files; they must exist there (nothing is regenerated silently).
  void set_dataset_dir(std::string dir) { dataset_dir_ = std::move(dir); }

  const DarcyDataset& gen_data();
  const AutoencoderModel& autoencoder(Index resolution);
  const GmmModel& gmm(Index resolution);
  const CoherenceBundle& coherence(Index resolution);
  const SweepResult& sweep();
  const RipReport& rip_check();
  const CertifyOutcome& certify();

  /// Writes summary.txt and returns its text.
  std::string report();

  /// Runs one named stage (recomputing it even when its artifacts exist);
  /// prerequisites are loaded or computed per the strictness setting.
  void run_stage(const std::string& name);

  /// gen-data through report in order.
  void run_all();

  static const std::vector<std::string>& stage_names();

private:
  std::string path(const std::string& name) const;
  void ensure_out_dir();
  std::vector<std::string> provenance(const std::string& stage) const;
  Index finest_resolution() const;
  Index primary_resolution() const;

  const DarcyDataset& compute_gen_data();
  const AutoencoderModel& compute_train(Index resolution);
  const GmmModel& compute_fit_gmm(Index resolution);
  const CoherenceBundle& compute_coherence(Index resolution);
  const SweepResult& compute_sweep();
  const RipReport& compute_rip();
  const CertifyOutcome& compute_certify();

  SweepCell run_cell(const SweepCell& shape, const SamplingDistribution& p,
                     const GmmModel* prior, std::uint64_t tag);
  void write_sweep_artifacts() const;

  ExperimentConfig cfg_;
  bool strict_ = false;
  std::string dataset_dir_;
  std::optional<DarcyDataset> dataset_;
  std::map<Index, AutoencoderModel> models_;
  std::map<Index, GmmModel> gmms_;
  std::map<Index, CoherenceBundle> bundles_;
  std::optional<SweepResult> sweep_;
  std::optional<RipReport> rip_;
  std::optional<CertifyOutcome> certify_;
};

}  // namespace gencs
