#pragma once

#include <gencs/types.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace gencs {

/// Key-value configuration text with `[section]` headers, `key = value`
/// lines, and `#` comments. Values are scalars or space-separated lists.
/// Accessors record which keys were read so unknown keys can be rejected.
class ConfigMap {
public:
  static ConfigMap parse_text(const std::string& text);
  static ConfigMap parse_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  Index get_index(const std::string& key, Index fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<Index> get_index_list(const std::string& key,
                                    const std::vector<Index>& fallback) const;
  std::vector<std::string> get_string_list(const std::string& key,
                                           const std::vector<std::string>& fallback) const;

  /// Keys present in the text but never read by any accessor.
  std::vector<std::string> unread_keys() const;

  const std::string& text() const { return text_; }

private:
  std::map<std::string, std::string> values_;  // "section.key" -> raw value
  mutable std::set<std::string> read_;
  std::string text_;
};

/// Full experiment parameterization with desk-scale defaults. Every field is
/// overridable from a config file; seeds for the individual stages are
/// derived from the master seed.
struct ExperimentConfig {
  // dataset
  Index n = 256;
  std::vector<Index> resolutions = {16, 32, 64};
  double corr_len = 0.2;
  double log_var = 1.0;

  // model / training
  Index latent = 16;
  std::vector<Index> widths = {16, 64, 256};
  std::vector<Index> train_resolutions = {16, 32};
  Index epochs = 2000;
  double learning_rate = 0.001;
  Index batch = 32;

  // latent prior
  Index gmm_components = 10;
  Index gmm_max_iters = 200;
  double gmm_tol = 1e-8;

  // coherence estimation
  Index mc_samples = 512;
  Index self_diff_batch = 32;

  // sampling sweep
  std::vector<double> rates = {0.01, 0.02, 0.04, 0.08, 0.16, 0.32};
  std::vector<std::string> modes = {"uniform", "adaptive-max-magnitude"};
  Index test_instances = 64;
  double recovery_lr = 0.01;
  Index recovery_iters = 500;
  Index restarts = 1;
  std::vector<double> lambda_grid = {0.0, 1e-5, 1e-4, 1e-3};
  std::vector<double> lambda_rates = {0.01, 0.32};

  // synthetic-model isometry check
  Index rip_grid = 16;
  double rip_delta = 0.5;
  double rip_eps = 0.1;
  Index rip_trials = 200;
  Index rip_diffs = 500;

  // synthetic-model bound certification
  Index certify_trials = 100;
  double certify_eps = 0.05;
  Index certify_grid = 16;
  double certify_support_fraction = 0.95;  // keeps the measured theta below 1/2
  Index certify_restarts = 2;

  std::uint64_t seed = 17;
  std::string out_dir = "out";

  /// Hash of the canonical config text; stamped into artifact headers.
  std::uint64_t config_hash() const;
  std::string canonical_text() const;

  void validate() const;
};

/// Defaults overridden by the file content; unknown keys are an error
/// (FormatError), as are malformed values and failed invariants.
ExperimentConfig config_from_map(const ConfigMap& map);
ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace gencs
