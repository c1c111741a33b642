#include <gencs/io.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace gencs {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

constexpr char kBlobMarker[] = "blob";

class HeaderWriter {
public:
  explicit HeaderWriter(const std::string& magic) { out_ << magic << '\n'; }
  void field(const std::string& key, const std::string& value) {
    out_ << key << ' ' << value << '\n';
  }
  void field(const std::string& key, Index value) { out_ << key << ' ' << value << '\n'; }
  void field(const std::string& key, std::uint64_t value) { out_ << key << ' ' << value << '\n'; }
  void field(const std::string& key, double value) {
    out_ << key << ' ' << format_double(value) << '\n';
  }
  std::string finish() {
    out_ << kBlobMarker << '\n';
    return out_.str();
  }

private:
  std::ostringstream out_;
};

// Header lines up to the blob marker, as key -> remainder-of-line.
class HeaderReader {
public:
  HeaderReader(std::istream& in, const std::string& magic, const std::string& path) {
    std::string line;
    if (!std::getline(in, line) || line != magic)
      throw FormatError(path + ": expected `" + magic + "` header");
    while (std::getline(in, line)) {
      if (line == kBlobMarker) return;
      const auto space = line.find(' ');
      if (space == std::string::npos) throw FormatError(path + ": malformed header line");
      fields_[line.substr(0, space)] = line.substr(space + 1);
    }
    throw FormatError(path + ": missing blob marker");
  }

  const std::string& get(const std::string& key) const {
    auto it = fields_.find(key);
    if (it == fields_.end()) throw FormatError("missing header field `" + key + "`");
    return it->second;
  }
  Index get_index(const std::string& key) const { return std::stoll(get(key)); }
  std::uint64_t get_u64(const std::string& key) const { return std::stoull(get(key)); }
  double get_double(const std::string& key) const { return std::stod(get(key)); }
  std::vector<Index> get_index_list(const std::string& key) const {
    std::istringstream ss(get(key));
    std::vector<Index> out;
    long long v;
    while (ss >> v) out.push_back(v);
    return out;
  }

private:
  std::map<std::string, std::string> fields_;
};

void write_doubles(std::ostream& out, const double* data, Index n) {
  static_assert(sizeof(double) == 8);
  out.write(reinterpret_cast<const char*>(data), n * 8);
}

void read_doubles(std::istream& in, double* data, Index n, const std::string& path) {
  in.read(reinterpret_cast<char*>(data), n * 8);
  if (in.gcount() != n * 8) throw FormatError(path + ": truncated blob");
}

// Row-major on disk regardless of Eigen's in-memory layout.
void write_matrix(std::ostream& out, const Matrix& m) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor rm = m;
  write_doubles(out, rm.data(), rm.size());
}

Matrix read_matrix(std::istream& in, Index rows, Index cols, const std::string& path) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rm(rows, cols);
  read_doubles(in, rm.data(), rm.size(), path);
  return rm;
}

void write_vector(std::ostream& out, const Vector& v) { write_doubles(out, v.data(), v.size()); }

Vector read_vector(std::istream& in, Index n, const std::string& path) {
  Vector v(n);
  read_doubles(in, v.data(), n, path);
  return v;
}

std::ofstream open_out(const std::string& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw FormatError(path + ": cannot open for writing");
  return out;
}

std::ifstream open_in(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw FormatError(path + ": cannot open for reading");
  return in;
}

std::string ggn_header(const GgnModel& model) {
  HeaderWriter h("gencs-ggn v1");
  h.field("depth", model.depth());
  std::ostringstream widths;
  widths << model.latent_dim();
  for (const Matrix& w : model.hidden) widths << ' ' << w.rows();
  h.field("widths", widths.str());
  h.field("grid", std::to_string(model.grid_rows) + " " + std::to_string(model.grid_cols));
  h.field("dtype", "f64le");
  return h.finish();
}

void write_ggn_blob(std::ostream& out, const GgnModel& model) {
  for (const Matrix& w : model.hidden) write_matrix(out, w);
  write_matrix(out, model.out);
}

GgnModel read_ggn_body(std::istream& in, const HeaderReader& h, const std::string& path) {
  if (h.get("dtype") != "f64le") throw FormatError(path + ": unsupported dtype");
  const Index depth = h.get_index("depth");
  const std::vector<Index> widths = h.get_index_list("widths");
  const std::vector<Index> grid = h.get_index_list("grid");
  if (static_cast<Index>(widths.size()) != depth + 1 || grid.size() != 2)
    throw FormatError(path + ": inconsistent dimensions");
  GgnModel model;
  model.grid_rows = grid[0];
  model.grid_cols = grid[1];
  for (Index i = 0; i < depth; ++i)
    model.hidden.push_back(read_matrix(in, widths[i + 1], widths[i], path));
  model.out = read_matrix(in, grid[0] * grid[1], widths[depth], path);
  model.validate();
  return model;
}

}  // namespace

void save_ggn(const std::string& path, const GgnModel& model) {
  model.validate();
  auto out = open_out(path, true);
  out << ggn_header(model);
  write_ggn_blob(out, model);
  if (!out) throw FormatError(path + ": write failed");
}

GgnModel load_ggn(const std::string& path) {
  auto in = open_in(path, true);
  HeaderReader h(in, "gencs-ggn v1", path);
  return read_ggn_body(in, h, path);
}

void save_gmm(const std::string& path, const GmmModel& model) {
  model.validate();
  auto out = open_out(path, true);
  HeaderWriter h("gencs-gmm v1");
  h.field("components", model.components());
  h.field("dim", model.dim());
  h.field("dtype", "f64le");
  out << h.finish();
  write_vector(out, model.weights);
  for (const Vector& mu : model.means) write_vector(out, mu);
  for (const Matrix& l : model.chol_factors) write_matrix(out, l);
  if (!out) throw FormatError(path + ": write failed");
}

GmmModel load_gmm(const std::string& path) {
  auto in = open_in(path, true);
  HeaderReader h(in, "gencs-gmm v1", path);
  if (h.get("dtype") != "f64le") throw FormatError(path + ": unsupported dtype");
  const Index k_comp = h.get_index("components");
  const Index dim = h.get_index("dim");
  GmmModel model;
  model.weights = read_vector(in, k_comp, path);
  for (Index i = 0; i < k_comp; ++i) model.means.push_back(read_vector(in, dim, path));
  for (Index i = 0; i < k_comp; ++i) model.chol_factors.push_back(read_matrix(in, dim, dim, path));
  model.validate();
  return model;
}

void save_autoencoder(const std::string& path, const AutoencoderModel& model) {
  model.validate();
  auto out = open_out(path, true);
  HeaderWriter h("gencs-autoencoder v1");
  h.field("resolution", model.resolution);
  std::ostringstream enc_dims;
  for (std::size_t i = 0; i < model.enc_weights.size(); ++i) {
    if (i) enc_dims << ' ';
    enc_dims << model.enc_weights[i].rows();
  }
  h.field("encoder_dims", enc_dims.str());
  h.field("dtype", "f64le");
  out << h.finish();
  // Decoder first, in its own self-describing format, then the encoder blob.
  out << ggn_header(model.decoder);
  write_ggn_blob(out, model.decoder);
  for (std::size_t i = 0; i < model.enc_weights.size(); ++i) {
    write_matrix(out, model.enc_weights[i]);
    write_vector(out, model.enc_biases[i]);
  }
  if (!out) throw FormatError(path + ": write failed");
}

AutoencoderModel load_autoencoder(const std::string& path) {
  auto in = open_in(path, true);
  HeaderReader h(in, "gencs-autoencoder v1", path);
  if (h.get("dtype") != "f64le") throw FormatError(path + ": unsupported dtype");
  AutoencoderModel model;
  model.resolution = h.get_index("resolution");
  const std::vector<Index> enc_dims = h.get_index_list("encoder_dims");
  HeaderReader dec_header(in, "gencs-ggn v1", path);
  model.decoder = read_ggn_body(in, dec_header, path);
  Index prev = model.decoder.signal_dim();
  for (Index dim : enc_dims) {
    model.enc_weights.push_back(read_matrix(in, dim, prev, path));
    model.enc_biases.push_back(read_vector(in, dim, path));
    prev = dim;
  }
  model.validate();
  return model;
}

void save_dataset(const std::string& path, const DatasetFile& data) {
  auto out = open_out(path, true);
  HeaderWriter h("gencs-dataset v1");
  h.field("count", static_cast<Index>(data.fields.size()));
  h.field("resolution", data.resolution);
  h.field("normalization", "zero-mean-unit-maxabs");
  h.field("corr_len", data.corr_len);
  h.field("log_var", data.log_var);
  h.field("seed", data.seed);
  h.field("dtype", "f64le");
  out << h.finish();
  for (const Vector& f : data.fields) {
    if (f.size() != data.resolution * data.resolution)
      throw ShapeError(path + ": field length does not match resolution");
    write_vector(out, f);
  }
  if (!out) throw FormatError(path + ": write failed");
}

DatasetFile load_dataset(const std::string& path) {
  auto in = open_in(path, true);
  HeaderReader h(in, "gencs-dataset v1", path);
  if (h.get("dtype") != "f64le") throw FormatError(path + ": unsupported dtype");
  DatasetFile data;
  data.resolution = h.get_index("resolution");
  data.corr_len = h.get_double("corr_len");
  data.log_var = h.get_double("log_var");
  data.seed = h.get_u64("seed");
  const Index count = h.get_index("count");
  for (Index i = 0; i < count; ++i)
    data.fields.push_back(read_vector(in, data.resolution * data.resolution, path));
  return data;
}

void write_csv(const std::string& path, const std::vector<std::string>& provenance,
               const std::string& header, const std::vector<std::string>& rows) {
  auto out = open_out(path, false);
  for (const std::string& line : provenance) out << "# " << line << '\n';
  out << header << '\n';
  for (const std::string& row : rows) out << row << '\n';
  if (!out) throw FormatError(path + ": write failed");
}

void write_coherence_csv(const std::string& path, const CoherenceProfile& prof,
                         const std::vector<std::string>& provenance) {
  std::vector<std::string> lines = provenance;
  std::string meta = "method=" + to_string(prof.method);
  if (prof.method == CoherenceMethod::ExactSubspace)
    meta += " r=" + std::to_string(prof.subspace_rank);
  else
    meta += " N=" + std::to_string(prof.sample_count);
  meta += " seed=" + std::to_string(prof.seed);
  lines.push_back(meta);
  std::vector<std::string> rows;
  rows.reserve(prof.alpha.size());
  for (Index j = 0; j < prof.alpha.size(); ++j)
    rows.push_back(std::to_string(j) + "," + format_double(prof.alpha[j]));
  write_csv(path, lines, "j,alpha_j", rows);
}

void write_distribution_csv(const std::string& path, const SamplingDistribution& p,
                            const std::vector<std::string>& provenance) {
  std::vector<std::string> rows;
  rows.reserve(p.dim());
  for (Index j = 0; j < p.dim(); ++j)
    rows.push_back(std::to_string(j) + "," + format_double(p.p[j]));
  write_csv(path, provenance, "j,p_j", rows);
}

void write_measurement_csv(const std::string& path, const MeasurementEnsemble& e, const CVector& b,
                           const std::vector<std::string>& provenance) {
  if (b.size() != e.count()) throw ShapeError("write_measurement_csv: length mismatch");
  std::vector<std::string> rows;
  rows.reserve(e.count());
  for (Index i = 0; i < e.count(); ++i) {
    rows.push_back(std::to_string(i) + "," + std::to_string(e.indices[i]) + "," +
                   format_double(e.weights[i]) + "," + format_double(b[i].real()) + "," +
                   format_double(b[i].imag()));
  }
  write_csv(path, provenance, "i,j_i,w_i,re_b_i,im_b_i", rows);
}

void write_training_log_csv(const std::string& path, const std::vector<double>& loss_log,
                            const std::vector<std::string>& provenance) {
  std::vector<std::string> rows;
  rows.reserve(loss_log.size());
  for (std::size_t i = 0; i < loss_log.size(); ++i)
    rows.push_back(std::to_string(i) + "," + format_double(loss_log[i]));
  write_csv(path, provenance, "epoch,loss", rows);
}

void write_certificates_csv(const std::string& path, const std::vector<CertificateRow>& rows,
                            const std::vector<std::string>& provenance) {
  std::vector<std::string> lines;
  lines.reserve(rows.size());
  for (const CertificateRow& r : rows) {
    const Certificate& c = r.cert;
    lines.push_back(std::to_string(r.trial) + "," + std::to_string(r.m) + "," +
                    format_double(r.rate) + "," + format_double(c.lhs) + "," +
                    format_double(c.rhs_general) + "," + format_double(c.rhs_admissible) + "," +
                    format_double(c.rhs_balancing) + "," + format_double(c.theta) + "," +
                    format_double(c.eps_hat) + "," + (c.holds_general ? "1" : "0") + "," +
                    (c.holds_admissible ? "1" : "0") + "," + (c.holds_balancing ? "1" : "0"));
  }
  write_csv(path, provenance,
            "trial,m,rate,lhs,rhs_general,rhs_admissible,rhs_balancing,theta,eps_hat,"
            "holds_general,holds_admissible,holds_balancing",
            lines);
}

void write_rip_csv(const std::string& path, const RipReport& report,
                   const std::vector<std::string>& provenance) {
  std::vector<std::string> lines = provenance;
  lines.push_back("m=" + std::to_string(report.m) + " delta=" + format_double(report.delta) +
                  " mu=" + format_double(report.mu) + " eps=" + format_double(report.eps) +
                  " failure_fraction=" + format_double(report.failure_fraction));
  std::vector<std::string> rows;
  rows.reserve(report.trial_max_deviation.size());
  for (Index t = 0; t < report.trial_max_deviation.size(); ++t)
    rows.push_back(std::to_string(t) + "," + format_double(report.trial_max_deviation[t]));
  write_csv(path, lines, "trial,max_deviation", rows);
}

std::string read_text_file(const std::string& path) {
  auto in = open_in(path, true);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  auto out = open_out(path, true);
  out << content;
  if (!out) throw FormatError(path + ": write failed");
}

}  // namespace gencs
