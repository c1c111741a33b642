#pragma once

#include <gencs/coherence.hpp>
#include <gencs/darcy.hpp>
#include <gencs/generator.hpp>
#include <gencs/gmm.hpp>
#include <gencs/measurement.hpp>
#include <gencs/recovery.hpp>
#include <gencs/riptest.hpp>
#include <gencs/training.hpp>
#include <gencs/types.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace gencs {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// FNV-1a of a text blob; stamped into artifact headers so every emitted
/// number can be traced to the configuration that produced it.
std::uint64_t fnv1a_hash(const std::string& text);

std::string hash_hex(std::uint64_t v);

// ---- binary checkpoints ----------------------------------------------------
// Self-describing containers: structured-text header lines, a `blob` marker,
// then raw little-endian 64-bit floats. Matrices are stored row-major.
// Round-trips are bit-exact.

void save_ggn(const std::string& path, const GgnModel& model);
GgnModel load_ggn(const std::string& path);

void save_gmm(const std::string& path, const GmmModel& model);
GmmModel load_gmm(const std::string& path);

void save_autoencoder(const std::string& path, const AutoencoderModel& model);
AutoencoderModel load_autoencoder(const std::string& path);

struct DatasetFile {
  std::vector<Vector> fields;
  Index resolution = 0;
  double corr_len = 0.0;
  double log_var = 0.0;
  std::uint64_t seed = 0;
};

void save_dataset(const std::string& path, const DatasetFile& data);
DatasetFile load_dataset(const std::string& path);

// ---- plot-ready CSV artifacts ----------------------------------------------
// Writers take provenance comment lines ("key=value" strings emitted as
// `# key=value`) so numbers remain traceable to (stage, seed, config hash).

void write_csv(const std::string& path, const std::vector<std::string>& provenance,
               const std::string& header, const std::vector<std::string>& rows);

void write_coherence_csv(const std::string& path, const CoherenceProfile& prof,
                         const std::vector<std::string>& provenance);

void write_distribution_csv(const std::string& path, const SamplingDistribution& p,
                            const std::vector<std::string>& provenance);

void write_measurement_csv(const std::string& path, const MeasurementEnsemble& e, const CVector& b,
                           const std::vector<std::string>& provenance);

void write_training_log_csv(const std::string& path, const std::vector<double>& loss_log,
                            const std::vector<std::string>& provenance);

struct CertificateRow {
  Index trial = 0;
  Index m = 0;
  double rate = 0.0;
  Certificate cert;
};

void write_certificates_csv(const std::string& path, const std::vector<CertificateRow>& rows,
                            const std::vector<std::string>& provenance);

void write_rip_csv(const std::string& path, const RipReport& report,
                   const std::vector<std::string>& provenance);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace gencs
