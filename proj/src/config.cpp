#include <gencs/config.hpp>

#include <gencs/io.hpp>

#include <algorithm>
#include <sstream>

namespace gencs {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw FormatError("");
    return v;
  } catch (...) {
    throw FormatError("config: bad numeric value for `" + key + "`: " + raw);
  }
}

long long parse_integer(const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(raw, &used);
    if (used != raw.size()) throw FormatError("");
    return v;
  } catch (...) {
    throw FormatError("config: bad integer value for `" + key + "`: " + raw);
  }
}

std::vector<std::string> split_list(const std::string& raw) {
  std::istringstream ss(raw);
  std::vector<std::string> out;
  std::string item;
  while (ss >> item) out.push_back(item);
  return out;
}

}  // namespace

ConfigMap ConfigMap::parse_text(const std::string& text) {
  ConfigMap map;
  map.text_ = text;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw FormatError("config line " + std::to_string(line_no) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw FormatError("config line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw FormatError("config line " + std::to_string(line_no) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (map.values_.count(full))
      throw FormatError("config: duplicate key `" + full + "`");
    map.values_[full] = value;
  }
  return map;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
  return parse_text(read_text_file(path));
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
  read_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  read_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(key, it->second);
}

Index ConfigMap::get_index(const std::string& key, Index fallback) const {
  read_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : static_cast<Index>(parse_integer(key, it->second));
}

std::uint64_t ConfigMap::get_u64(const std::string& key, std::uint64_t fallback) const {
  read_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const long long v = parse_integer(key, it->second);
  if (v < 0) throw FormatError("config: `" + key + "` must be nonnegative");
  return static_cast<std::uint64_t>(v);
}

std::vector<double> ConfigMap::get_double_list(const std::string& key,
                                               const std::vector<double>& fallback) const {
  read_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const std::string& item : split_list(it->second)) out.push_back(parse_double(key, item));
  return out;
}

std::vector<Index> ConfigMap::get_index_list(const std::string& key,
                                             const std::vector<Index>& fallback) const {
  read_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<Index> out;
  for (const std::string& item : split_list(it->second))
    out.push_back(static_cast<Index>(parse_integer(key, item)));
  return out;
}

std::vector<std::string> ConfigMap::get_string_list(
    const std::string& key, const std::vector<std::string>& fallback) const {
  read_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : split_list(it->second);
}

std::vector<std::string> ConfigMap::unread_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (!read_.count(key)) out.push_back(key);
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (n < 2) throw FormatError("config: dataset.n must be >= 2");
  if (resolutions.empty()) throw FormatError("config: dataset.resolutions must be nonempty");
  for (double r : rates) {
    if (!(r > 0.0) || r > 1.0) throw FormatError("config: sweep.rates must lie in (0, 1]");
  }
  for (double r : lambda_rates) {
    if (!(r > 0.0) || r > 1.0) throw FormatError("config: sweep.lambda_rates must lie in (0, 1]");
  }
  for (double l : lambda_grid) {
    if (l < 0.0) throw FormatError("config: sweep.lambda_grid must be nonnegative");
  }
  if (modes.empty()) throw FormatError("config: sweep.modes must be nonempty");
  for (const std::string& mode : modes) {
    if (mode != "uniform" && mode != "adaptive-max-magnitude" &&
        mode != "adaptive-self-difference" && mode != "p-star-exact")
      throw FormatError("config: unknown sampling mode `" + mode + "`");
  }
  const Index finest = *std::max_element(resolutions.begin(), resolutions.end());
  for (Index r : train_resolutions) {
    if (std::find(resolutions.begin(), resolutions.end(), r) == resolutions.end())
      throw FormatError("config: every training resolution must appear in dataset.resolutions");
    if (r > finest) throw FormatError("config: training resolution exceeds the finest grid");
  }
  if (latent < 2) throw FormatError("config: model.latent must be >= 2");
  if (widths.empty()) throw FormatError("config: model.widths must be nonempty");
  if (epochs < 1) throw FormatError("config: training.epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw FormatError("config: training.learning_rate must be > 0");
  if (batch < 1) throw FormatError("config: training.batch must be >= 1");
  if (gmm_components < 1) throw FormatError("config: gmm.components must be >= 1");
  if (mc_samples < 1) throw FormatError("config: coherence.mc_samples must be >= 1");
  if (self_diff_batch < 2) throw FormatError("config: coherence.self_diff_batch must be >= 2");
  if (test_instances < 1) throw FormatError("config: sweep.test_instances must be >= 1");
  if (!(recovery_lr > 0.0)) throw FormatError("config: sweep.recovery_lr must be > 0");
  if (recovery_iters < 1) throw FormatError("config: sweep.recovery_iters must be >= 1");
  if (restarts < 1) throw FormatError("config: sweep.restarts must be >= 1");
  if (rip_grid < 2) throw FormatError("config: rip.grid must be >= 2");
  if (!(rip_delta > 0.0) || rip_delta > 1.0)
    throw FormatError("config: rip.delta must lie in (0, 1]");
  if (!(rip_eps > 0.0) || rip_eps >= 1.0) throw FormatError("config: rip.eps must lie in (0, 1)");
  if (rip_trials < 1 || rip_diffs < 1)
    throw FormatError("config: rip.trials and rip.diffs must be >= 1");
  if (certify_trials < 1) throw FormatError("config: certify.trials must be >= 1");
  if (!(certify_eps > 0.0) || certify_eps >= 1.0)
    throw FormatError("config: certify.eps must lie in (0, 1)");
  if (certify_grid < 2) throw FormatError("config: certify.grid must be >= 2");
  if (certify_restarts < 1) throw FormatError("config: certify.restarts must be >= 1");
  if (!(certify_support_fraction > 0.0) || certify_support_fraction > 1.0)
    throw FormatError("config: certify.support_fraction must lie in (0, 1]");
  if (out_dir.empty()) throw FormatError("config: out_dir must be nonempty");
}

namespace {

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) ss << ' ';
    if constexpr (std::is_same_v<T, double>)
      ss << format_double(values[i]);
    else
      ss << values[i];
  }
  return ss.str();
}

}  // namespace

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream ss;
  ss << "[dataset]\n"
     << "n = " << n << "\n"
     << "resolutions = " << join(resolutions) << "\n"
     << "corr_len = " << format_double(corr_len) << "\n"
     << "log_var = " << format_double(log_var) << "\n"
     << "[model]\n"
     << "latent = " << latent << "\n"
     << "widths = " << join(widths) << "\n"
     << "[training]\n"
     << "resolutions = " << join(train_resolutions) << "\n"
     << "epochs = " << epochs << "\n"
     << "learning_rate = " << format_double(learning_rate) << "\n"
     << "batch = " << batch << "\n"
     << "[gmm]\n"
     << "components = " << gmm_components << "\n"
     << "max_iters = " << gmm_max_iters << "\n"
     << "tol = " << format_double(gmm_tol) << "\n"
     << "[coherence]\n"
     << "mc_samples = " << mc_samples << "\n"
     << "self_diff_batch = " << self_diff_batch << "\n"
     << "[sweep]\n"
     << "rates = " << join(rates) << "\n"
     << "modes = " << join(modes) << "\n"
     << "test_instances = " << test_instances << "\n"
     << "recovery_lr = " << format_double(recovery_lr) << "\n"
     << "recovery_iters = " << recovery_iters << "\n"
     << "restarts = " << restarts << "\n"
     << "lambda_grid = " << join(lambda_grid) << "\n"
     << "lambda_rates = " << join(lambda_rates) << "\n"
     << "[rip]\n"
     << "grid = " << rip_grid << "\n"
     << "delta = " << format_double(rip_delta) << "\n"
     << "eps = " << format_double(rip_eps) << "\n"
     << "trials = " << rip_trials << "\n"
     << "diffs = " << rip_diffs << "\n"
     << "[certify]\n"
     << "trials = " << certify_trials << "\n"
     << "eps = " << format_double(certify_eps) << "\n"
     << "grid = " << certify_grid << "\n"
     << "support_fraction = " << format_double(certify_support_fraction) << "\n"
     << "restarts = " << certify_restarts << "\n"
     << "[run]\n"
     << "seed = " << seed << "\n";
  // out_dir deliberately omitted: the hash identifies the experiment, not
  // where its artifacts land, so --out relocations reproduce byte-identical
  // files.
  return ss.str();
}

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a_hash(canonical_text()); }

ExperimentConfig config_from_map(const ConfigMap& map) {
  ExperimentConfig cfg;
  cfg.n = map.get_index("dataset.n", cfg.n);
  cfg.resolutions = map.get_index_list("dataset.resolutions", cfg.resolutions);
  cfg.corr_len = map.get_double("dataset.corr_len", cfg.corr_len);
  cfg.log_var = map.get_double("dataset.log_var", cfg.log_var);

  cfg.latent = map.get_index("model.latent", cfg.latent);
  cfg.widths = map.get_index_list("model.widths", cfg.widths);

  cfg.train_resolutions = map.get_index_list("training.resolutions", cfg.train_resolutions);
  cfg.epochs = map.get_index("training.epochs", cfg.epochs);
  cfg.learning_rate = map.get_double("training.learning_rate", cfg.learning_rate);
  cfg.batch = map.get_index("training.batch", cfg.batch);

  cfg.gmm_components = map.get_index("gmm.components", cfg.gmm_components);
  cfg.gmm_max_iters = map.get_index("gmm.max_iters", cfg.gmm_max_iters);
  cfg.gmm_tol = map.get_double("gmm.tol", cfg.gmm_tol);

  cfg.mc_samples = map.get_index("coherence.mc_samples", cfg.mc_samples);
  cfg.self_diff_batch = map.get_index("coherence.self_diff_batch", cfg.self_diff_batch);

  cfg.rates = map.get_double_list("sweep.rates", cfg.rates);
  cfg.modes = map.get_string_list("sweep.modes", cfg.modes);
  cfg.test_instances = map.get_index("sweep.test_instances", cfg.test_instances);
  cfg.recovery_lr = map.get_double("sweep.recovery_lr", cfg.recovery_lr);
  cfg.recovery_iters = map.get_index("sweep.recovery_iters", cfg.recovery_iters);
  cfg.restarts = map.get_index("sweep.restarts", cfg.restarts);
  cfg.lambda_grid = map.get_double_list("sweep.lambda_grid", cfg.lambda_grid);
  cfg.lambda_rates = map.get_double_list("sweep.lambda_rates", cfg.lambda_rates);

  cfg.rip_grid = map.get_index("rip.grid", cfg.rip_grid);
  cfg.rip_delta = map.get_double("rip.delta", cfg.rip_delta);
  cfg.rip_eps = map.get_double("rip.eps", cfg.rip_eps);
  cfg.rip_trials = map.get_index("rip.trials", cfg.rip_trials);
  cfg.rip_diffs = map.get_index("rip.diffs", cfg.rip_diffs);

  cfg.certify_trials = map.get_index("certify.trials", cfg.certify_trials);
  cfg.certify_eps = map.get_double("certify.eps", cfg.certify_eps);
  cfg.certify_grid = map.get_index("certify.grid", cfg.certify_grid);
  cfg.certify_support_fraction =
      map.get_double("certify.support_fraction", cfg.certify_support_fraction);
  cfg.certify_restarts = map.get_index("certify.restarts", cfg.certify_restarts);

  cfg.seed = map.get_u64("run.seed", cfg.seed);
  cfg.out_dir = map.get_string("run.out_dir", cfg.out_dir);

  const std::vector<std::string> unread = map.unread_keys();
  if (!unread.empty()) throw FormatError("config: unknown key `" + unread.front() + "`");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return config_from_map(ConfigMap::parse_file(path));
}

}  // namespace gencs
