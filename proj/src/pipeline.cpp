#include <gencs/pipeline.hpp>

#include <gencs/measurement.hpp>
#include <gencs/recovery.hpp>
#include <gencs/rng.hpp>
#include <gencs/upscale.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace gencs {

namespace {

// Stage tags for seed derivation: every consumer of randomness hangs off
// (master seed, stage tag, ...) so stages are decorrelated and reorderable.
constexpr std::uint64_t kTagData = 0x646174;    // dataset generation
constexpr std::uint64_t kTagTrain = 0x74726e;   // autoencoder training
constexpr std::uint64_t kTagGmm = 0x676d66;     // latent prior fitting
constexpr std::uint64_t kTagCohere = 0x636f68;  // coherence estimation
constexpr std::uint64_t kTagSweep = 0x737770;   // mode x rate sweep
constexpr std::uint64_t kTagLambda = 0x6c616d;  // regularizer comparison
constexpr std::uint64_t kTagRip = 0x726970;     // isometry trials
constexpr std::uint64_t kTagCert = 0x637274;    // bound certification

template <typename Fn>
decltype(auto) guarded(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& err) {
    throw StageError(stage, err.what());
  }
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[320];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c, d);
  return buf;
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (true) {
    const std::size_t end = line.find(sep, begin);
    if (end == std::string::npos) {
      out.push_back(line.substr(begin));
      return out;
    }
    out.push_back(line.substr(begin, end - begin));
    begin = end + 1;
  }
}

struct CsvContent {
  std::vector<std::string> comments;
  std::string header;
  std::vector<std::vector<std::string>> rows;
};

CsvContent parse_csv_file(const std::string& path) {
  std::istringstream in(read_text_file(path));
  CsvContent out;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# ", 0) == 0) {
      out.comments.push_back(line.substr(2));
    } else if (!header_seen) {
      out.header = line;
      header_seen = true;
    } else if (!line.empty()) {
      out.rows.push_back(split_on(line, ','));
    }
  }
  if (!header_seen) throw FormatError(path + ": no header row");
  return out;
}

// key=value tokens across all comment lines; later lines override.
std::map<std::string, std::string> comment_tokens(const std::vector<std::string>& comments) {
  std::map<std::string, std::string> out;
  for (const std::string& line : comments) {
    std::istringstream ss(line);
    std::string token;
    while (ss >> token) {
      const std::size_t eq = token.find('=');
      if (eq != std::string::npos) out[token.substr(0, eq)] = token.substr(eq + 1);
    }
  }
  return out;
}

double field_double(const std::vector<std::string>& row, std::size_t i, const std::string& path) {
  if (i >= row.size()) throw FormatError(path + ": short row");
  return std::stod(row[i]);
}

long long field_int(const std::vector<std::string>& row, std::size_t i, const std::string& path) {
  if (i >= row.size()) throw FormatError(path + ": short row");
  return std::stoll(row[i]);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

double SweepCell::mean_mse() const { return mean_of(mse); }
double SweepCell::std_mse() const { return sample_std(mse); }

TrendCheck adaptive_vs_uniform_trend(const SweepResult& sweep, Index resolution,
                                     const std::vector<double>& rates) {
  auto find_cell = [&](const std::string& mode, double rate) -> const SweepCell* {
    for (const SweepCell& c : sweep.cells) {
      if (c.split == "test" && c.mode == mode && c.resolution == resolution &&
          std::abs(c.rate - rate) <= 1e-12)
        return &c;
    }
    return nullptr;
  };
  TrendCheck out;
  if (rates.empty()) {
    out.detail = "no rates to compare";
    return out;
  }
  out.pass = true;
  for (double rate : rates) {
    const SweepCell* uni = find_cell("uniform", rate);
    const SweepCell* ada = find_cell("adaptive-max-magnitude", rate);
    if (uni == nullptr || ada == nullptr || uni->mse.size() != ada->mse.size() ||
        uni->mse.empty()) {
      return {false, fmt("cells missing or unpaired at rate %g", rate)};
    }
    std::vector<double> diff(uni->mse.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = uni->mse[i] - ada->mse[i];
    const double gain = mean_of(diff);
    const double se = sample_std(diff) / std::sqrt(static_cast<double>(diff.size()));
    if (!(gain > 0.0 && gain >= se)) out.pass = false;
    if (!out.detail.empty()) out.detail += "; ";
    out.detail += fmt("rate %g: paired gain %.3g vs SE %.3g", rate, gain, se);
  }
  return out;
}

TrendCheck regularizer_trend(const SweepResult& sweep, Index resolution) {
  auto find_cell = [&](const std::string& mode, double rate) -> const SweepCell* {
    for (const SweepCell& c : sweep.lambda_cells) {
      if (c.mode == mode && c.resolution == resolution && std::abs(c.rate - rate) <= 1e-12)
        return &c;
    }
    return nullptr;
  };
  std::vector<double> rates;
  for (const SweepCell& c : sweep.lambda_cells) {
    if (c.resolution == resolution &&
        std::none_of(rates.begin(), rates.end(),
                     [&](double r) { return std::abs(r - c.rate) <= 1e-12; }))
      rates.push_back(c.rate);
  }
  if (rates.empty()) return {false, "no regularizer comparison cells"};
  const double low = *std::min_element(rates.begin(), rates.end());
  const double high = *std::max_element(rates.begin(), rates.end());

  const SweepCell* low_plain = find_cell("adaptive-max-magnitude+lambda0", low);
  const SweepCell* low_gmm = find_cell("adaptive-max-magnitude+gmm", low);
  if (low_plain == nullptr || low_gmm == nullptr) return {false, "low-rate cells missing"};
  TrendCheck out;
  out.pass = low_gmm->mean_mse() <= low_plain->mean_mse();
  out.detail = fmt("rate %g: tuned %.4g vs plain %.4g", low, low_gmm->mean_mse(),
                   low_plain->mean_mse());
  if (high > low && high >= 0.32 - 1e-9) {
    const SweepCell* high_plain = find_cell("adaptive-max-magnitude+lambda0", high);
    const SweepCell* high_gmm = find_cell("adaptive-max-magnitude+gmm", high);
    if (high_plain == nullptr || high_gmm == nullptr) return {false, "high-rate cells missing"};
    const bool high_ok = high_plain->mean_mse() <= 1.05 * high_gmm->mean_mse();
    out.pass = out.pass && high_ok;
    out.detail += fmt("; rate %g: plain %.4g vs 1.05 x tuned %.4g", high, high_plain->mean_mse(),
                      1.05 * high_gmm->mean_mse());
  }
  out.detail += fmt("; lambda_star = %g", sweep.lambda_star);
  return out;
}

TrendCheck certificates_hold(const CertifyOutcome& outcome, double min_fraction,
                             double theta_cap) {
  TrendCheck out;
  const double adm_total = static_cast<double>(outcome.admissible_trials);
  const double bal_total = static_cast<double>(outcome.balancing_trials);
  const bool adm_ok = outcome.admissible_trials > 0 &&
                      static_cast<double>(outcome.admissible_held) + 1e-9 >=
                          min_fraction * adm_total;
  const bool bal_ok = outcome.balancing_trials > 0 &&
                      static_cast<double>(outcome.balancing_held) + 1e-9 >=
                          min_fraction * bal_total;
  const bool theta_ok = outcome.theta_truncated < theta_cap;
  out.pass = adm_ok && bal_ok && theta_ok;
  out.detail = fmt("admissible %.0f/%.0f, balancing %.0f/%.0f held",
                   static_cast<double>(outcome.admissible_held), adm_total,
                   static_cast<double>(outcome.balancing_held), bal_total) +
               fmt("; truncated theta %.3f < %.2f", outcome.theta_truncated, theta_cap);
  return out;
}

Pipeline::Pipeline(ExperimentConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

const std::vector<std::string>& Pipeline::stage_names() {
  static const std::vector<std::string> names = {"gen-data", "train",     "fit-gmm",
                                                 "coherence", "sweep",    "rip-check",
                                                 "certify",   "report"};
  return names;
}

std::string Pipeline::path(const std::string& name) const { return cfg_.out_dir + "/" + name; }

void Pipeline::ensure_out_dir() {
  std::filesystem::create_directories(cfg_.out_dir);
  write_text_file(path("config_echo.txt"),
                  cfg_.canonical_text() + "# hash " + hash_hex(cfg_.config_hash()) + "\n");
}

std::vector<std::string> Pipeline::provenance(const std::string& stage) const {
  return {"stage=" + stage, "seed=" + std::to_string(cfg_.seed),
          "config=" + hash_hex(cfg_.config_hash())};
}

Index Pipeline::finest_resolution() const {
  return *std::max_element(cfg_.resolutions.begin(), cfg_.resolutions.end());
}

Index Pipeline::primary_resolution() const {
  return *std::max_element(cfg_.train_resolutions.begin(), cfg_.train_resolutions.end());
}

namespace {

std::string res_name(const std::string& stem, Index r, const std::string& ext) {
  return stem + "_res" + std::to_string(r) + ext;
}

}  // namespace

// ---- gen-data ----------------------------------------------------------

const DarcyDataset& Pipeline::gen_data() {
  if (dataset_) return *dataset_;
  return guarded("gen-data", [&]() -> const DarcyDataset& {
    ensure_out_dir();
    const std::string base = dataset_dir_.empty() ? cfg_.out_dir : dataset_dir_;
    std::vector<Index> res = cfg_.resolutions;
    std::sort(res.begin(), res.end());
    res.erase(std::unique(res.begin(), res.end()), res.end());
    const bool have_all = std::all_of(res.begin(), res.end(), [&](Index r) {
      return file_exists(base + "/" + res_name("dataset", r, ".bin"));
    });
    if (have_all) {
      DarcyDataset ds;
      ds.resolutions = res;
      ds.count = cfg_.n;
      ds.corr_len = cfg_.corr_len;
      ds.log_var = cfg_.log_var;
      for (Index r : res) {
        DatasetFile file = load_dataset(base + "/" + res_name("dataset", r, ".bin"));
        if (file.resolution != r || static_cast<Index>(file.fields.size()) != cfg_.n ||
            file.corr_len != cfg_.corr_len || file.log_var != cfg_.log_var)
          throw FormatError("dataset artifact does not match the configuration; "
                            "clear the output directory");
        ds.seed = file.seed;
        ds.fields.push_back(std::move(file.fields));
      }
      dataset_ = std::move(ds);
      return *dataset_;
    }
    if (strict_ || !dataset_dir_.empty())
      throw StageError("gen-data", "dataset artifacts missing from " + base);
    return compute_gen_data();
  });
}

const DarcyDataset& Pipeline::compute_gen_data() {
  std::vector<Index> res = cfg_.resolutions;
  std::sort(res.begin(), res.end());
  res.erase(std::unique(res.begin(), res.end()), res.end());
  const std::uint64_t seed = derive_stream(cfg_.seed, {kTagData});
  DarcyDataset ds = build_dataset(cfg_.n, res, cfg_.corr_len, cfg_.log_var, seed);
  for (Index r : res) {
    DatasetFile file;
    file.fields = ds.at_resolution(r);
    file.resolution = r;
    file.corr_len = cfg_.corr_len;
    file.log_var = cfg_.log_var;
    file.seed = seed;
    save_dataset(path(res_name("dataset", r, ".bin")), file);
  }
  dataset_ = std::move(ds);
  return *dataset_;
}

// ---- train ---------------------------------------------------------------

const AutoencoderModel& Pipeline::autoencoder(Index resolution) {
  auto it = models_.find(resolution);
  if (it != models_.end()) return it->second;
  return guarded("train", [&]() -> const AutoencoderModel& {
    if (std::find(cfg_.train_resolutions.begin(), cfg_.train_resolutions.end(), resolution) ==
        cfg_.train_resolutions.end())
      throw std::invalid_argument("resolution " + std::to_string(resolution) +
                                  " is not a configured training resolution");
    ensure_out_dir();
    const std::string file = path(res_name("autoencoder", resolution, ".bin"));
    if (file_exists(file)) {
      AutoencoderModel m = load_autoencoder(file);
      const std::vector<Index> widths(cfg_.widths.begin(), cfg_.widths.end());
      std::vector<Index> got;
      for (const Matrix& w : m.decoder.hidden) got.push_back(w.rows());
      if (m.resolution != resolution || m.latent_dim() != cfg_.latent || got != widths)
        throw FormatError("autoencoder artifact does not match the configuration; "
                          "clear the output directory");
      return models_.emplace(resolution, std::move(m)).first->second;
    }
    if (strict_) throw StageError("train", "autoencoder artifact missing from " + cfg_.out_dir);
    return compute_train(resolution);
  });
}

const AutoencoderModel& Pipeline::compute_train(Index resolution) {
  const DarcyDataset& ds = gen_data();
  const DatasetSplit split = split_dataset(cfg_.n);
  const auto& fields = ds.at_resolution(resolution);
  std::vector<Vector> train_fields;
  train_fields.reserve(split.train.size());
  for (Index i : split.train) train_fields.push_back(fields[i]);

  TrainingConfig tc;
  tc.latent = cfg_.latent;
  tc.widths = cfg_.widths;
  tc.epochs = cfg_.epochs;
  tc.learning_rate = cfg_.learning_rate;
  tc.batch = cfg_.batch;
  tc.seed = derive_stream(cfg_.seed, {kTagTrain, static_cast<std::uint64_t>(resolution)});
  AutoencoderModel m = train_autoencoder(train_fields, resolution, tc);
  save_autoencoder(path(res_name("autoencoder", resolution, ".bin")), m);
  write_training_log_csv(path(res_name("training_log", resolution, ".csv")), m.loss_log,
                         provenance("train"));
  return models_.insert_or_assign(resolution, std::move(m)).first->second;
}

// ---- fit-gmm ---------------------------------------------------------------

const GmmModel& Pipeline::gmm(Index resolution) {
  auto it = gmms_.find(resolution);
  if (it != gmms_.end()) return it->second;
  return guarded("fit-gmm", [&]() -> const GmmModel& {
    ensure_out_dir();
    const std::string file = path(res_name("gmm", resolution, ".bin"));
    if (file_exists(file)) {
      GmmModel g = load_gmm(file);
      if (g.components() != cfg_.gmm_components || g.dim() != cfg_.latent)
        throw FormatError("gmm artifact does not match the configuration; "
                          "clear the output directory");
      return gmms_.emplace(resolution, std::move(g)).first->second;
    }
    if (strict_) throw StageError("fit-gmm", "gmm artifact missing from " + cfg_.out_dir);
    return compute_fit_gmm(resolution);
  });
}

const GmmModel& Pipeline::compute_fit_gmm(Index resolution) {
  const AutoencoderModel& ae = autoencoder(resolution);
  const DarcyDataset& ds = gen_data();
  const DatasetSplit split = split_dataset(cfg_.n);
  const auto& fields = ds.at_resolution(resolution);
  std::vector<Vector> train_fields;
  train_fields.reserve(split.train.size());
  for (Index i : split.train) train_fields.push_back(fields[i]);
  const std::vector<Vector> latents = encode_dataset(ae, train_fields);
  GmmModel g = fit_em(latents, cfg_.gmm_components,
                      derive_stream(cfg_.seed, {kTagGmm, static_cast<std::uint64_t>(resolution)}),
                      cfg_.gmm_max_iters, cfg_.gmm_tol);
  save_gmm(path(res_name("gmm", resolution, ".bin")), g);
  return gmms_.insert_or_assign(resolution, std::move(g)).first->second;
}

// ---- coherence -------------------------------------------------------------

namespace {

CoherenceProfile load_profile_csv(const std::string& file, Index dim) {
  const CsvContent csv = parse_csv_file(file);
  const auto tokens = comment_tokens(csv.comments);
  CoherenceProfile prof;
  const auto method_it = tokens.find("method");
  if (method_it == tokens.end()) throw FormatError(file + ": missing method token");
  if (method_it->second == to_string(CoherenceMethod::ExactSubspace))
    prof.method = CoherenceMethod::ExactSubspace;
  else if (method_it->second == to_string(CoherenceMethod::McMaxMagnitude))
    prof.method = CoherenceMethod::McMaxMagnitude;
  else if (method_it->second == to_string(CoherenceMethod::McSelfDifference))
    prof.method = CoherenceMethod::McSelfDifference;
  else
    throw FormatError(file + ": unknown method `" + method_it->second + "`");
  if (tokens.count("r")) prof.subspace_rank = std::stoll(tokens.at("r"));
  if (tokens.count("N")) prof.sample_count = std::stoll(tokens.at("N"));
  if (tokens.count("seed")) prof.seed = std::stoull(tokens.at("seed"));
  if (static_cast<Index>(csv.rows.size()) != dim)
    throw FormatError(file + ": profile length does not match the configuration");
  prof.alpha = Vector::Zero(dim);
  for (const auto& row : csv.rows) {
    const Index j = field_int(row, 0, file);
    if (j < 0 || j >= dim) throw FormatError(file + ": index out of range");
    prof.alpha[j] = field_double(row, 1, file);
  }
  return prof;
}

}  // namespace

const CoherenceBundle& Pipeline::coherence(Index resolution) {
  auto it = bundles_.find(resolution);
  if (it != bundles_.end()) return it->second;
  return guarded("coherence", [&]() -> const CoherenceBundle& {
    ensure_out_dir();
    const Index fr = finest_resolution();
    const std::string exact = path(res_name("coherence_exact", resolution, ".csv"));
    const std::string maxmag = path(res_name("coherence_max_magnitude", resolution, ".csv"));
    const std::string selfdiff = path(res_name("coherence_self_difference", resolution, ".csv"));
    if (file_exists(exact) && file_exists(maxmag) && file_exists(selfdiff)) {
      CoherenceBundle bundle;
      bundle.exact = load_profile_csv(exact, fr * fr);
      bundle.max_magnitude = load_profile_csv(maxmag, fr * fr);
      bundle.self_difference = load_profile_csv(selfdiff, fr * fr);
      return bundles_.emplace(resolution, std::move(bundle)).first->second;
    }
    if (strict_)
      throw StageError("coherence", "coherence artifacts missing from " + cfg_.out_dir);
    return compute_coherence(resolution);
  });
}

const CoherenceBundle& Pipeline::compute_coherence(Index resolution) {
  const AutoencoderModel& ae = autoencoder(resolution);
  const GmmModel& g = gmm(resolution);
  const Index fr = finest_resolution();
  const Dft2 f(fr, fr);
  const UpscaleOperator up(resolution, fr);

  CoherenceBundle bundle;
  bundle.exact = subspace_coherence(
      f, range_subspace_basis(ae.decoder, [&up](const Vector& v) { return up.apply(v); }));
  const std::uint64_t r_tag = static_cast<std::uint64_t>(resolution);
  const std::uint64_t mc_seed = derive_stream(cfg_.seed, {kTagCohere, r_tag, 1});
  bundle.max_magnitude = mc_coherence_max_magnitude(f, ae.decoder, up, gmm_sampler(g, mc_seed),
                                                    cfg_.mc_samples, false, mc_seed);
  const std::uint64_t sd_seed = derive_stream(cfg_.seed, {kTagCohere, r_tag, 2});
  bundle.self_difference = mc_coherence_self_difference(f, ae.decoder, up, gmm_sampler(g, sd_seed),
                                                        cfg_.self_diff_batch, sd_seed);

  const auto prov = provenance("coherence");
  write_coherence_csv(path(res_name("coherence_exact", resolution, ".csv")), bundle.exact, prov);
  write_coherence_csv(path(res_name("coherence_max_magnitude", resolution, ".csv")),
                      bundle.max_magnitude, prov);
  write_coherence_csv(path(res_name("coherence_self_difference", resolution, ".csv")),
                      bundle.self_difference, prov);
  write_distribution_csv(path(res_name("pstar_exact", resolution, ".csv")),
                         optimal_distribution(bundle.exact), prov);
  write_distribution_csv(path(res_name("pstar_max_magnitude", resolution, ".csv")),
                         optimal_distribution(bundle.max_magnitude), prov);
  write_distribution_csv(path(res_name("pstar_self_difference", resolution, ".csv")),
                         optimal_distribution(bundle.self_difference), prov);
  return bundles_.insert_or_assign(resolution, std::move(bundle)).first->second;
}

// ---- sweep -----------------------------------------------------------------

SweepCell Pipeline::run_cell(const SweepCell& shape, const SamplingDistribution& p,
                             const GmmModel* prior, std::uint64_t tag) {
  const DarcyDataset& ds = gen_data();
  const AutoencoderModel& ae = autoencoder(shape.resolution);
  const Index fr = finest_resolution();
  const Dft2 f(fr, fr);
  const UpscaleOperator up(shape.resolution, fr);
  const auto& truth = ds.at_resolution(fr);
  const auto p_shared = std::make_shared<const SamplingDistribution>(p);

  SweepCell cell = shape;
  cell.m = std::max<Index>(1, std::llround(shape.rate * static_cast<double>(f.dim())));
  const std::size_t count = cell.instances.size();
  cell.mse.assign(count, 0.0);

  // Instances are independent given their derived seeds, so they run on a
  // small worker pool; result slots are preassigned, so ordering is
  // deterministic regardless of scheduling.
  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> failed{false};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    RecoveryConfig rcfg;
    rcfg.learning_rate = cfg_.recovery_lr;
    rcfg.iterations = cfg_.recovery_iters;
    rcfg.restarts = cfg_.restarts;
    rcfg.lambda = cell.lambda;
    for (std::size_t t = cursor.fetch_add(1); t < count && !failed.load();
         t = cursor.fetch_add(1)) {
      try {
        const Vector& x0 = truth[cell.instances[t]];
        const MeasurementEnsemble e = draw_ensemble(
            p_shared, cell.m, derive_stream(tag, {1, static_cast<std::uint64_t>(t)}));
        const CVector b = apply_sdf(f, e, x0);
        rcfg.seed = derive_stream(tag, {2, static_cast<std::uint64_t>(t)});
        const RecoveryResult rec = recover(ae.decoder, up, f, e, b, rcfg, prior);
        cell.mse[t] = (rec.x_hat - x0).squaredNorm() / static_cast<double>(f.dim());
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  const unsigned hw = std::thread::hardware_concurrency();
  const std::size_t workers = std::min<std::size_t>(count, hw == 0 ? 1 : hw);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return cell;
}

const SweepResult& Pipeline::sweep() {
  if (sweep_) return *sweep_;
  return guarded("sweep", [&]() -> const SweepResult& {
    ensure_out_dir();
    const std::string file = path("mse_per_instance.csv");
    if (file_exists(file)) {
      const CsvContent csv = parse_csv_file(file);
      const auto tokens = comment_tokens(csv.comments);
      SweepResult result;
      if (tokens.count("lambda_star")) result.lambda_star = std::stod(tokens.at("lambda_star"));
      auto cell_for = [&](const std::string& split, const std::string& mode, double rate,
                          Index resolution, double lambda, Index m) -> SweepCell& {
        auto& group = split == "validation"
                          ? result.tuning_cells
                          : (mode.find('+') != std::string::npos ? result.lambda_cells
                                                                 : result.cells);
        for (SweepCell& c : group) {
          if (c.split == split && c.mode == mode && c.rate == rate &&
              c.resolution == resolution && c.lambda == lambda)
            return c;
        }
        SweepCell fresh;
        fresh.split = split;
        fresh.mode = mode;
        fresh.rate = rate;
        fresh.resolution = resolution;
        fresh.lambda = lambda;
        fresh.m = m;
        group.push_back(std::move(fresh));
        return group.back();
      };
      for (const auto& row : csv.rows) {
        if (row.size() < 8) throw FormatError(file + ": short row");
        SweepCell& cell = cell_for(row[0], row[1], field_double(row, 2, file),
                                   field_int(row, 3, file), field_double(row, 4, file),
                                   field_int(row, 5, file));
        cell.instances.push_back(field_int(row, 6, file));
        cell.mse.push_back(field_double(row, 7, file));
      }
      if (result.cells.empty()) throw FormatError(file + ": no sweep cells");
      sweep_ = std::move(result);
      return *sweep_;
    }
    if (strict_) throw StageError("sweep", "sweep artifacts missing from " + cfg_.out_dir);
    return compute_sweep();
  });
}

const SweepResult& Pipeline::compute_sweep() {
  const DatasetSplit split = split_dataset(cfg_.n);
  std::vector<Index> test_idx(
      split.test.begin(),
      split.test.begin() + std::min<std::size_t>(split.test.size(),
                                                 static_cast<std::size_t>(cfg_.test_instances)));
  if (test_idx.empty()) throw StageError("sweep", "empty test split");

  SweepResult result;
  for (Index resolution : cfg_.train_resolutions) {
    const CoherenceBundle& bundle = coherence(resolution);
    for (std::size_t mode_i = 0; mode_i < cfg_.modes.size(); ++mode_i) {
      const std::string& mode = cfg_.modes[mode_i];
      SamplingDistribution p =
          mode == "uniform" ? SamplingDistribution::uniform(bundle.exact.alpha.size())
          : mode == "adaptive-max-magnitude" ? optimal_distribution(bundle.max_magnitude)
          : mode == "adaptive-self-difference" ? optimal_distribution(bundle.self_difference)
                                               : optimal_distribution(bundle.exact);
      for (std::size_t rate_i = 0; rate_i < cfg_.rates.size(); ++rate_i) {
        SweepCell shape;
        shape.split = "test";
        shape.mode = mode;
        shape.rate = cfg_.rates[rate_i];
        shape.resolution = resolution;
        shape.instances = test_idx;
        const std::uint64_t tag = derive_stream(
            cfg_.seed, {kTagSweep, static_cast<std::uint64_t>(mode_i),
                        static_cast<std::uint64_t>(rate_i), static_cast<std::uint64_t>(resolution)});
        result.cells.push_back(run_cell(shape, p, nullptr, tag));
      }
    }
  }

  // Regularizer study at the primary resolution: tune lambda on the
  // validation split (ensembles shared across the grid), then pair tuned
  // against unregularized on the test split with identical seeds.
  if (!cfg_.lambda_grid.empty() && !cfg_.lambda_rates.empty()) {
    const Index resolution = primary_resolution();
    const CoherenceBundle& bundle = coherence(resolution);
    const SamplingDistribution p = optimal_distribution(bundle.max_magnitude);
    const std::uint64_t r_tag = static_cast<std::uint64_t>(resolution);
    const bool needs_prior =
        std::any_of(cfg_.lambda_grid.begin(), cfg_.lambda_grid.end(),
                    [](double l) { return l > 0.0; });
    const GmmModel* g = needs_prior ? &gmm(resolution) : nullptr;

    for (double lambda : cfg_.lambda_grid) {
      for (std::size_t rate_i = 0; rate_i < cfg_.lambda_rates.size(); ++rate_i) {
        SweepCell shape;
        shape.split = "validation";
        shape.mode = "adaptive-max-magnitude";
        shape.rate = cfg_.lambda_rates[rate_i];
        shape.resolution = resolution;
        shape.lambda = lambda;
        shape.instances = split.validation;
        const std::uint64_t tag = derive_stream(
            cfg_.seed, {kTagLambda, 1, static_cast<std::uint64_t>(rate_i), r_tag});
        result.tuning_cells.push_back(run_cell(shape, p, lambda > 0.0 ? g : nullptr, tag));
      }
    }
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : cfg_.lambda_grid) {
      std::vector<double> all;
      for (const SweepCell& c : result.tuning_cells) {
        if (c.lambda == lambda) all.insert(all.end(), c.mse.begin(), c.mse.end());
      }
      const double mean = mean_of(all);
      if (mean < best) {
        best = mean;
        result.lambda_star = lambda;
      }
    }

    for (std::size_t rate_i = 0; rate_i < cfg_.lambda_rates.size(); ++rate_i) {
      const std::uint64_t tag =
          derive_stream(cfg_.seed, {kTagLambda, 2, static_cast<std::uint64_t>(rate_i), r_tag});
      SweepCell plain;
      plain.split = "test";
      plain.mode = "adaptive-max-magnitude+lambda0";
      plain.rate = cfg_.lambda_rates[rate_i];
      plain.resolution = resolution;
      plain.instances = test_idx;
      result.lambda_cells.push_back(run_cell(plain, p, nullptr, tag));

      SweepCell tuned = plain;
      tuned.mode = "adaptive-max-magnitude+gmm";
      tuned.lambda = result.lambda_star;
      result.lambda_cells.push_back(
          run_cell(tuned, p, result.lambda_star > 0.0 ? g : nullptr, tag));
    }
  }

  sweep_ = std::move(result);
  write_sweep_artifacts();
  return *sweep_;
}

void Pipeline::write_sweep_artifacts() const {
  const SweepResult& result = *sweep_;
  if (result.cells.empty()) throw StageError("sweep", "empty sweep grid");

  std::vector<std::string> rows;
  auto aggregate_row = [](const SweepCell& c) {
    return format_double(c.rate) + "," + c.mode + "," + std::to_string(c.resolution) + "," +
           format_double(c.mean_mse()) + "," + format_double(c.std_mse()) + "," +
           std::to_string(c.mse.size());
  };
  for (const SweepCell& c : result.cells) rows.push_back(aggregate_row(c));
  for (const SweepCell& c : result.lambda_cells) rows.push_back(aggregate_row(c));
  write_csv(path("mse_vs_rate.csv"), provenance("sweep"),
            "rate,mode,resolution,mean_mse,std_mse,n_test", rows);

  std::vector<std::string> prov = provenance("sweep");
  prov.push_back("lambda_star=" + format_double(result.lambda_star));
  rows.clear();
  auto instance_rows = [&](const std::vector<SweepCell>& cells) {
    for (const SweepCell& c : cells) {
      for (std::size_t i = 0; i < c.mse.size(); ++i) {
        rows.push_back(c.split + "," + c.mode + "," + format_double(c.rate) + "," +
                       std::to_string(c.resolution) + "," + format_double(c.lambda) + "," +
                       std::to_string(c.m) + "," + std::to_string(c.instances[i]) + "," +
                       format_double(c.mse[i]));
      }
    }
  };
  instance_rows(result.cells);
  instance_rows(result.tuning_cells);
  instance_rows(result.lambda_cells);
  write_csv(path("mse_per_instance.csv"), prov,
            "split,mode,rate,resolution,lambda,m,instance,mse", rows);

  if (!result.tuning_cells.empty()) {
    rows.clear();
    for (const SweepCell& c : result.tuning_cells) {
      rows.push_back(format_double(c.lambda) + "," + format_double(c.rate) + "," +
                     std::to_string(c.resolution) + "," + format_double(c.mean_mse()) + "," +
                     std::to_string(c.mse.size()));
    }
    write_csv(path("lambda_tuning.csv"), prov, "lambda,rate,resolution,mean_mse,n", rows);
  }
}

// ---- rip-check -------------------------------------------------------------

const RipReport& Pipeline::rip_check() {
  if (rip_) return *rip_;
  return guarded("rip-check", [&]() -> const RipReport& {
    ensure_out_dir();
    const std::string file = path("rip_report.csv");
    if (file_exists(file)) {
      const CsvContent csv = parse_csv_file(file);
      const auto tokens = comment_tokens(csv.comments);
      RipReport report;
      report.m = std::stoll(tokens.at("m"));
      report.delta = std::stod(tokens.at("delta"));
      report.mu = std::stod(tokens.at("mu"));
      report.eps = std::stod(tokens.at("eps"));
      report.failure_fraction = std::stod(tokens.at("failure_fraction"));
      if (tokens.count("k")) report.k = std::stoll(tokens.at("k"));
      if (tokens.count("d")) report.d = std::stoll(tokens.at("d"));
      if (tokens.count("k_d")) report.k_d = std::stoll(tokens.at("k_d"));
      if (tokens.count("diffs")) report.diffs_per_trial = std::stoll(tokens.at("diffs"));
      if (tokens.count("trial_seed")) report.seed = std::stoull(tokens.at("trial_seed"));
      report.trials = static_cast<Index>(csv.rows.size());
      report.trial_max_deviation = Vector(report.trials);
      for (const auto& row : csv.rows)
        report.trial_max_deviation[field_int(row, 0, file)] = field_double(row, 1, file);
      rip_ = std::move(report);
      return *rip_;
    }
    if (strict_) throw StageError("rip-check", "rip artifacts missing from " + cfg_.out_dir);
    return compute_rip();
  });
}

const RipReport& Pipeline::compute_rip() {
  const Index grid = cfg_.rip_grid;
  const Dft2 f(grid, grid);
  const GgnModel model = random_ggn(2, {4, 8}, grid, grid, derive_stream(cfg_.seed, {kTagRip, 0}));
  const CoherenceProfile prof = subspace_coherence(f, range_subspace_basis(model));
  const SamplingDistribution p = optimal_distribution(prof);
  RipReport report =
      rip_trial_suite(f, model, p, cfg_.rip_delta, cfg_.rip_eps, cfg_.rip_trials, cfg_.rip_diffs,
                      derive_stream(cfg_.seed, {kTagRip, 1}));
  std::vector<std::string> prov = provenance("rip-check");
  prov.push_back("k=" + std::to_string(report.k) + " d=" + std::to_string(report.d) +
                 " k_d=" + std::to_string(report.k_d) + " diffs=" +
                 std::to_string(report.diffs_per_trial) + " trial_seed=" +
                 std::to_string(report.seed));
  write_rip_csv(path("rip_report.csv"), report, prov);
  rip_ = std::move(report);
  return *rip_;
}

// ---- certify ---------------------------------------------------------------

const CertifyOutcome& Pipeline::certify() {
  if (certify_) return *certify_;
  return guarded("certify", [&]() -> const CertifyOutcome& {
    ensure_out_dir();
    const std::string file = path("certificates.csv");
    if (file_exists(file)) {
      const CsvContent csv = parse_csv_file(file);
      CertifyOutcome outcome;
      for (const auto& row : csv.rows) {
        if (row.size() < 12) throw FormatError(file + ": short row");
        CertificateRow r;
        r.trial = field_int(row, 0, file);
        r.m = field_int(row, 1, file);
        r.rate = field_double(row, 2, file);
        r.cert.lhs = field_double(row, 3, file);
        r.cert.rhs_general = field_double(row, 4, file);
        r.cert.rhs_admissible = field_double(row, 5, file);
        r.cert.rhs_balancing = field_double(row, 6, file);
        r.cert.theta = field_double(row, 7, file);
        r.cert.eps_hat = field_double(row, 8, file);
        r.cert.holds_general = field_int(row, 9, file) != 0;
        r.cert.holds_admissible = field_int(row, 10, file) != 0;
        r.cert.holds_balancing = field_int(row, 11, file) != 0;
        r.cert.admissible = !std::isnan(r.cert.rhs_admissible);
        if (r.cert.admissible) {
          ++outcome.admissible_trials;
          outcome.admissible_held += r.cert.holds_admissible ? 1 : 0;
        } else {
          ++outcome.balancing_trials;
          outcome.balancing_held += r.cert.holds_balancing ? 1 : 0;
          outcome.theta_truncated = std::max(outcome.theta_truncated, r.cert.theta);
        }
        outcome.rows.push_back(std::move(r));
      }
      if (outcome.rows.empty()) throw FormatError(file + ": no certificate rows");
      certify_ = std::move(outcome);
      return *certify_;
    }
    if (strict_) throw StageError("certify", "certificates missing from " + cfg_.out_dir);
    return compute_certify();
  });
}

const CertifyOutcome& Pipeline::compute_certify() {
  const Index grid = cfg_.certify_grid;
  const Dft2 f(grid, grid);
  const GgnModel model =
      random_ggn(2, {4, 8}, grid, grid, derive_stream(cfg_.seed, {kTagCert, 0}));
  const UpscaleOperator up(grid, grid);
  const CoherenceProfile prof = subspace_coherence(f, range_subspace_basis(model));
  const double m_dim = static_cast<double>(f.dim());

  const SamplingDistribution p_star = optimal_distribution(prof);
  const Index m_adm = sample_complexity_recovery(model.latent_dim(), model.depth(),
                                                 model.last_width(), mu_constant(prof, p_star),
                                                 cfg_.certify_eps);

  // Truncated support: keep the largest-coherence indices holding the given
  // fraction of the index set, reweight by alpha^2.
  std::vector<Index> order(f.dim());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return prof.alpha[a] > prof.alpha[b]; });
  const Index keep = std::max<Index>(
      1, static_cast<Index>(std::ceil(cfg_.certify_support_fraction * m_dim)));
  Vector w = Vector::Zero(f.dim());
  for (Index i = 0; i < keep; ++i)
    w[order[i]] = prof.alpha[order[i]] * prof.alpha[order[i]];
  const SamplingDistribution p_trunc = SamplingDistribution::from_weights(w);
  const Index m_bal = sample_complexity_recovery(model.latent_dim(), model.depth(),
                                                 model.last_width(), mu_constant(prof, p_trunc),
                                                 cfg_.certify_eps);

  RecoveryConfig rcfg;
  rcfg.learning_rate = cfg_.recovery_lr;
  rcfg.iterations = cfg_.recovery_iters;
  rcfg.restarts = cfg_.certify_restarts;

  CertifyOutcome outcome;
  auto run_branch = [&](const SamplingDistribution& p, Index m, std::uint64_t branch,
                        Index trial_base, bool balancing) {
    const auto p_shared = std::make_shared<const SamplingDistribution>(p);
    for (Index t = 0; t < cfg_.certify_trials; ++t) {
      const std::uint64_t tt = static_cast<std::uint64_t>(t);
      Stream z_stream(derive_stream(cfg_.seed, {kTagCert, branch, 1, tt}));
      const Vector z0 = z_stream.normal_vector(model.latent_dim());
      const Vector x0 = forward(model, z0);
      const MeasurementEnsemble e =
          draw_ensemble(p_shared, m, derive_stream(cfg_.seed, {kTagCert, branch, 2, tt}));
      const CVector b = apply_sdf(f, e, x0);
      const CVector eta = CVector::Zero(m);
      rcfg.seed = derive_stream(cfg_.seed, {kTagCert, branch, 3, tt});
      const RecoveryResult rec = recover(model, up, f, e, b, rcfg);
      RecoveryConfig proj_cfg = rcfg;
      proj_cfg.seed = derive_stream(cfg_.seed, {kTagCert, branch, 4, tt});
      const Certificate cert = gencs::certify(rec, x0, f, e, eta, p, prof, model, up, proj_cfg);

      CertificateRow row;
      row.trial = trial_base + t;
      row.m = m;
      row.rate = static_cast<double>(m) / m_dim;
      row.cert = cert;
      if (balancing) {
        ++outcome.balancing_trials;
        outcome.balancing_held += cert.holds_balancing ? 1 : 0;
        outcome.theta_truncated = std::max(outcome.theta_truncated, cert.theta);
      } else {
        ++outcome.admissible_trials;
        outcome.admissible_held += cert.holds_admissible ? 1 : 0;
      }
      outcome.rows.push_back(std::move(row));
    }
  };
  run_branch(p_star, m_adm, 1, 0, false);
  run_branch(p_trunc, m_bal, 2, cfg_.certify_trials, true);

  write_certificates_csv(path("certificates.csv"), outcome.rows, provenance("certify"));
  certify_ = std::move(outcome);
  return *certify_;
}

// ---- report ----------------------------------------------------------------

std::string Pipeline::report() {
  return guarded("report", [&]() -> std::string {
    ensure_out_dir();
    std::vector<CheckResult> checks;
    checks.push_back(check_coherence_energy_identity());
    checks.push_back(check_optimal_distribution());
    checks.push_back(check_admissibility_mu_bound());
    checks.push_back(check_measurement_unbiasedness());

    const RipReport& rip = rip_check();
    const TrendCheck rip_trend = rip_concentration(rip);
    checks.push_back({"gen_rip_concentration", rip_trend.pass,
                      rip_trend.detail + fmt(" (m=%.0f over %.0f trials)",
                                             static_cast<double>(rip.m),
                                             static_cast<double>(rip.trials))});
    checks.push_back(check_sample_complexity_arithmetic());

    const TrendCheck cert_trend = certificates_hold(certify());
    checks.push_back({"recovery_certificates", cert_trend.pass, cert_trend.detail});

    const SweepResult& sw = sweep();
    std::vector<double> low_rates;
    for (double r : cfg_.rates)
      if (r <= 0.045) low_rates.push_back(r);
    const TrendCheck au = adaptive_vs_uniform_trend(sw, primary_resolution(), low_rates);
    checks.push_back({"adaptive_vs_uniform", au.pass, au.detail});
    const TrendCheck reg = regularizer_trend(sw, primary_resolution());
    checks.push_back({"gmm_regularizer_trend", reg.pass, reg.detail});

    checks.push_back(check_balancing_decay());
    checks.push_back(check_darcy_solver());
    checks.push_back(check_gradient_correctness());

    std::ostringstream ss;
    ss << "gencs experiment summary\n";
    ss << "config " << hash_hex(cfg_.config_hash()) << "\n";
    ss << "seed " << cfg_.seed << "\n\n";
    for (const CheckResult& c : checks)
      ss << "[CHECK] " << c.name << ": " << (c.pass ? "PASS" : "FAIL") << " (" << c.detail
         << ")\n";
    write_text_file(path("summary.txt"), ss.str());
    return ss.str();
  });
}

// ---- orchestration ----------------------------------------------------------

void Pipeline::run_stage(const std::string& name) {
  if (name == "gen-data") {
    guarded("gen-data", [&] {
      ensure_out_dir();
      compute_gen_data();
    });
  } else if (name == "train") {
    guarded("train", [&] {
      ensure_out_dir();
      for (Index r : cfg_.train_resolutions) compute_train(r);
    });
  } else if (name == "fit-gmm") {
    guarded("fit-gmm", [&] {
      ensure_out_dir();
      for (Index r : cfg_.train_resolutions) compute_fit_gmm(r);
    });
  } else if (name == "coherence") {
    guarded("coherence", [&] {
      ensure_out_dir();
      for (Index r : cfg_.train_resolutions) compute_coherence(r);
    });
  } else if (name == "sweep") {
    guarded("sweep", [&] {
      ensure_out_dir();
      compute_sweep();
    });
  } else if (name == "rip-check") {
    guarded("rip-check", [&] {
      ensure_out_dir();
      compute_rip();
    });
  } else if (name == "certify") {
    guarded("certify", [&] {
      ensure_out_dir();
      compute_certify();
    });
  } else if (name == "report") {
    report();
  } else {
    throw std::invalid_argument("unknown stage `" + name + "`");
  }
}

void Pipeline::run_all() {
  for (const std::string& name : stage_names()) run_stage(name);
}

}  // namespace gencs
