#include "mopi/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mopi/errors.hpp"
#include "mopi/mathfn.hpp"

namespace mopi {

namespace {

// Mixture coefficients for the Equalized2 kind. The distribution family fixes
// only their shapes, not their values, so they were drawn once (entries from
// U[-1,1], the c offsets from U[0.5,1.5], SeededRng seed 8675309) and frozen
// here to keep every run reproducible.
constexpr int kE2Dim = 11;
const double kE2A[4][kE2Dim] = {
    {0.59691395908928291, -0.82867099434845604, 0.29048705830357302, -0.71845341545599251,
     0.39497409699237096, -0.34293366572257589, 0.90399376475821569, -0.47453186037183781,
     0.046804893043423501, 0.18429763189113557, 0.29301651978163545},
    {-0.77379544279335399, -0.33818436914773398, 0.15849791890964049, -0.22846916963351993,
     -0.85235311110508549, 0.46132644567264403, -0.71079036793255801, -0.87432071469920358,
     -0.60197595142156923, -0.17288035056714213, -0.90592270512889672},
    {0.088523357629353372, 0.93139459162348803, 0.57509470656755246, -0.971675185470811,
     -0.93128564059395935, 0.66239786075397489, 0.72915790231393829, 0.081330275723147993,
     -0.86423988135401419, -0.70849599283358633, 0.74927016806034574},
    {0.40801951329173192, -0.83259622270013578, -0.86549055902317451, -0.1251657539630131,
     0.36542459954685635, 0.13119137894587984, 0.83959004026609563, 0.40061331838867065,
     -0.71964204543001942, -0.91553452279872505, 0.44237853997765519}};
const double kE2Delta[4][kE2Dim] = {
    {-0.50642206863280359, -0.37406717973413728, -0.02315124037122418, -0.33922324255545067,
     -0.18631683315262326, 0.27244811052489548, 0.6792591501162808, 0.29852093173362393,
     -0.1741969118222817, 0.87215684726891896, -0.017729484155892816},
    {-0.87896741286573477, 0.20690101766978963, -0.91691975693877503, 0.22759255091618025,
     0.6306509316387432, 0.74705122722962836, 0.47867611476953109, -0.68173619764078253,
     -0.144968769911475, -0.33236434163786521, -0.96207107228485644},
    {0.84261535647610697, -0.4165380014884057, 0.53713164152833848, 0.63430306383049651,
     0.14530132443051258, 0.62051333833710376, -0.45404465434375352, -0.70746451042255032,
     0.88539280173615631, -0.7359111214911187, -0.16266834332278779},
    {-0.18050329723016811, 0.6962784514386815, -0.91848968888801608, -0.78709740660552008,
     -0.35417720486221738, 0.56706994203742944, 0.77349344901656636, 0.1052443369149243,
     -0.4638099277637151, -0.037282789429586183, 0.79518897464383853}};
const double kE2Gamma[4][kE2Dim] = {
    {-0.89362446948997665, -0.94878555309620216, 0.88103774952414571, 0.73003394202659955,
     -0.26173897201737839, -0.90431253177568638, 0.16269611596611355, -0.6626541004344777,
     0.89708301523678369, 0.73920667743090518, 0.39535570259973385},
    {-0.33018873618689248, 0.77337416313892282, 0.045173830860939512, -0.54162690495139709,
     -0.048362254092210621, -0.088072378539824525, -0.84126029961425264, -0.80743138055558328,
     0.69834665034402077, -0.89319946939421446, 0.69380081055591925},
    {0.96174571389906882, 0.16439416173147792, 0.51961072758265803, 0.6744492723547606,
     0.88054818477217167, 0.99934443684795982, 0.6613868554721507, 0.45141333234783887,
     0.16238598072794508, -0.6039263956114862, 0.059467465217559301},
    {-0.16409506250563877, -0.48055799213745987, -0.33873343326610117, -0.9716959413987778,
     -0.74807253535674323, -0.8324166194621101, -0.84108238267257041, -0.64151724991897674,
     0.88058091509146452, 0.88583785685923511, -0.17475326111514367}};
const double kE2C[4] = {1.3256414922614241, 1.2563065635701318, 1.2141963866302645,
                        0.91453897953680796};

double e2_mu(int z, std::span<const double> x) {
  double s = 0.0;
  for (int j = 0; j < kE2Dim; ++j) s += x[j] * kE2A[z][j];
  const double sx = std::sin(x[0]);
  return s + 0.5 * sx * sx;
}

double e2_sigma(int z, std::span<const double> x) {
  double s = 0.0;
  for (int j = 0; j < kE2Dim; ++j) s += x[j] * kE2Delta[z][j];
  return std::fabs(s) + kE2C[z];
}

double hetero_sigma2(GeneratorSpec::Kind kind, std::span<const double> x) {
  const int d = static_cast<int>(x.size());
  switch (kind) {
    case GeneratorSpec::Kind::Hetero1x: {
      double tail = 0.0;
      for (int j = 1; j < d; ++j) tail += x[j];
      return 1.0 + x[0] * x[0] + 0.5 * std::sin(tail);
    }
    case GeneratorSpec::Kind::Hetero2x: {
      double s = 1.0;
      double sum = 0.0;
      double sq = 0.0;
      for (int j = 0; j < d; ++j) {
        const double sj = std::sin(x[j]);
        s += 0.2 * sj * sj;
        sum += x[j];
        sq += x[j] * x[j];
      }
      if (sum > 3.0) s += sq;
      return s;
    }
    case GeneratorSpec::Kind::Hetero3x: {
      double s = 2.0;
      if (x[0] < 1.2) s -= 1.0;
      if (x[0] > 3.0) s += 5.0;
      if (d > 2 && x[2] > 0.0) s += 2.0;
      if (d > 4 && x[4] > 0.5) s += 3.0;
      return s;
    }
    default:
      throw Error("hetero_sigma2 on non-hetero kind");
  }
}

double hetero_mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / std::sqrt(static_cast<double>(x.size()));
}

double equalized_mean(std::span<const double> x, int z) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / std::sqrt(11.0) + 0.5 * z;
}

double equalized_sigma2(std::span<const double> x, int z) {
  double tail = 0.0;
  for (size_t j = 1; j < x.size(); ++j) tail += x[j];
  return 1.0 + static_cast<double>(z * z) + 0.5 * std::sin(tail);
}

// Covariance of the MultiLabel kind at x; SPD by construction because the
// only off-diagonal entry has correlation 0.6.
Matrix multilabel_cov(std::span<const double> x, int d_y) {
  Matrix s(d_y, d_y);
  for (int j = 0; j < d_y; ++j) {
    const double sj = std::sqrt(static_cast<double>(j + 1));
    s(j, j) = std::pow(0.05 + 1.5 * sj * std::fabs(std::sin(x[0] + 2.0 * (j + 1))), sj);
  }
  if (d_y >= 2) {
    const double c = 0.6 * std::sqrt(s(0, 0) * s(1, 1));
    s(0, 1) = c;
    s(1, 0) = c;
  }
  return s;
}

Vector multilabel_mean(std::span<const double> x, int d_y) {
  Vector mu(d_y);
  for (int j = 0; j < d_y; ++j) mu[j] = std::sin(x[0] + (j + 1)) + 0.3 * (j + 1);
  return mu;
}

}  // namespace

int GeneratorSpec::dim_x() const {
  switch (kind) {
    case Kind::MultiLabel: return 1;
    case Kind::Equalized1:
    case Kind::Equalized1Prime:
    case Kind::Equalized2: return 11;
    default: return d_x;
  }
}

int GeneratorSpec::dim_y() const { return kind == Kind::MultiLabel ? d_y : 1; }

bool GeneratorSpec::z_is_categorical() const {
  if (scheme) return true;
  switch (kind) {
    case Kind::Equalized1:
    case Kind::Equalized1Prime:
    case Kind::Equalized2: return true;
    default: return false;  // Z = X
  }
}

GeneratorSpec::Kind GeneratorSpec::kind_from_string(const std::string& s) {
  if (s == "multilabel") return Kind::MultiLabel;
  if (s == "equalized1") return Kind::Equalized1;
  if (s == "equalized1prime") return Kind::Equalized1Prime;
  if (s == "equalized2") return Kind::Equalized2;
  if (s == "hetero1x") return Kind::Hetero1x;
  if (s == "hetero2x") return Kind::Hetero2x;
  if (s == "hetero3x") return Kind::Hetero3x;
  throw UnsupportedKind("generator kind '" + s + "'");
}

std::string GeneratorSpec::kind_to_string(Kind k) {
  switch (k) {
    case Kind::MultiLabel: return "multilabel";
    case Kind::Equalized1: return "equalized1";
    case Kind::Equalized1Prime: return "equalized1prime";
    case Kind::Equalized2: return "equalized2";
    case Kind::Hetero1x: return "hetero1x";
    case Kind::Hetero2x: return "hetero2x";
    case Kind::Hetero3x: return "hetero3x";
  }
  return "?";
}

Vector equalized2_weights(std::span<const double> x) {
  Vector logits(4);
  double mx = -1e300;
  for (int z = 0; z < 4; ++z) {
    double s = 0.0;
    for (int j = 0; j < kE2Dim; ++j) s += x[j] * kE2Gamma[z][j];
    logits[z] = s;
    mx = std::max(mx, s);
  }
  double total = 0.0;
  for (int z = 0; z < 4; ++z) {
    logits[z] = std::exp(logits[z] - mx);
    total += logits[z];
  }
  for (double& w : logits) w /= total;
  return logits;
}

Dataset generate(const GeneratorSpec& spec) {
  if (spec.n < 1) throw Error("generate: n must be at least 1");
  const int d_x = spec.dim_x();
  const int d_y = spec.dim_y();
  const bool hetero = spec.kind == GeneratorSpec::Kind::Hetero1x ||
                      spec.kind == GeneratorSpec::Kind::Hetero2x ||
                      spec.kind == GeneratorSpec::Kind::Hetero3x;
  if (hetero && spec.d_x != 6 && spec.d_x != 11) {
    throw Error("hetero kinds support d_x in {6, 11}");
  }
  SeededRng rng(spec.seed, static_cast<uint64_t>(spec.kind));

  Matrix x(spec.n, d_x);
  Matrix y(spec.n, d_y);
  std::vector<int> z_codes(spec.n, 0);

  for (int i = 0; i < spec.n; ++i) {
    switch (spec.kind) {
      case GeneratorSpec::Kind::MultiLabel: {
        x(i, 0) = rng.uniform(0.0, 5.0);
        Vector eps(d_y);
        for (int j = 0; j < d_y; ++j) eps[j] = rng.normal();
        const Matrix cov = multilabel_cov(x.row(i), d_y);
        const Cholesky chol(cov);  // asserts SPD per draw
        const Vector mu = multilabel_mean(x.row(i), d_y);
        for (int j = 0; j < d_y; ++j) {
          double s = mu[j];
          for (int k = 0; k <= j; ++k) s += chol.lower()(j, k) * eps[k];
          y(i, j) = s;
        }
        break;
      }
      case GeneratorSpec::Kind::Equalized1:
      case GeneratorSpec::Kind::Equalized1Prime: {
        x(i, 0) = rng.uniform(0.0, 5.0);
        for (int j = 1; j < d_x; ++j) x(i, j) = rng.normal();
        int z;
        if (spec.kind == GeneratorSpec::Kind::Equalized1) {
          z = x(i, 0) <= 2.5 ? 1 : 0;
        } else {
          const double v = rng.normal();
          z = (spec.rho * x(i, 0) + (1.0 - spec.rho) * v <= 2.5 * spec.rho) ? 1 : 0;
        }
        z_codes[i] = z;
        const double eps = rng.normal();
        y(i, 0) = equalized_mean(x.row(i), z) + std::sqrt(equalized_sigma2(x.row(i), z)) * eps;
        break;
      }
      case GeneratorSpec::Kind::Equalized2: {
        x(i, 0) = rng.uniform(0.0, 5.0);
        for (int j = 1; j < d_x; ++j) x(i, j) = rng.normal();
        const Vector w = equalized2_weights(x.row(i));
        const double u = rng.uniform();
        int z = 3;  // rounding guard: acc may land just below 1
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
          acc += w[k];
          if (u < acc) {
            z = k;
            break;
          }
        }
        z_codes[i] = z + 1;  // codes 1..4
        const double eps = rng.normal();
        y(i, 0) = e2_mu(z, x.row(i)) + e2_sigma(z, x.row(i)) * eps;
        break;
      }
      default: {
        x(i, 0) = rng.uniform(0.0, 5.0);
        for (int j = 1; j < d_x; ++j) x(i, j) = rng.normal();
        const double eps = rng.normal();
        y(i, 0) = hetero_mean(x.row(i)) + std::sqrt(hetero_sigma2(spec.kind, x.row(i))) * eps;
        break;
      }
    }
  }

  if (spec.scheme) {
    for (int i = 0; i < spec.n; ++i) z_codes[i] = spec.scheme->pattern_code(x.row(i));
    return Dataset(std::move(x), std::move(y), std::move(z_codes), spec.role);
  }
  if (spec.z_is_categorical()) {
    return Dataset(std::move(x), std::move(y), std::move(z_codes), spec.role);
  }
  Matrix z = x;  // Z = X for test-conditional kinds
  return Dataset(std::move(x), std::move(y), std::move(z), spec.role);
}

double ConditionalLaw::sigma() const {
  if (cov.rows() != 1) throw Error("sigma() requires a 1-d label");
  return std::sqrt(cov(0, 0));
}

double ConditionalLaw::quantile(double p) const {
  if (mean.size() != 1) throw Error("quantile requires a 1-d label");
  return mean[0] + sigma() * normal_quantile(p);
}

double ConditionalLaw::interval_miscoverage(double lo, double hi) const {
  if (mean.size() != 1) throw Error("interval_miscoverage requires a 1-d label");
  if (hi <= lo) return 1.0;
  const double s = sigma();
  const double inside = normal_cdf((hi - mean[0]) / s) - normal_cdf((lo - mean[0]) / s);
  return 1.0 - inside;
}

ConditionalLaw conditional_law(const GeneratorSpec& spec, std::span<const double> x,
                               std::optional<int> z_code) {
  ConditionalLaw law;
  switch (spec.kind) {
    case GeneratorSpec::Kind::MultiLabel:
      law.mean = multilabel_mean(x, spec.d_y);
      law.cov = multilabel_cov(x, spec.d_y);
      return law;
    case GeneratorSpec::Kind::Equalized1:
    case GeneratorSpec::Kind::Equalized1Prime: {
      const int z = z_code.value_or(x[0] <= 2.5 ? 1 : 0);
      law.mean = Vector{equalized_mean(x, z)};
      law.cov = Matrix(1, 1);
      law.cov(0, 0) = equalized_sigma2(x, z);
      return law;
    }
    case GeneratorSpec::Kind::Equalized2: {
      if (!z_code) throw Error("equalized2 conditional law needs a z code");
      const int z = *z_code - 1;
      if (z < 0 || z > 3) throw Error("equalized2 z code out of range");
      law.mean = Vector{e2_mu(z, x)};
      law.cov = Matrix(1, 1);
      const double s = e2_sigma(z, x);
      law.cov(0, 0) = s * s;
      return law;
    }
    default: {
      law.mean = Vector{hetero_mean(x)};
      law.cov = Matrix(1, 1);
      law.cov(0, 0) = hetero_sigma2(spec.kind, x);
      return law;
    }
  }
}

// --- CSV --------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_cell(const std::string& cell, int row, const std::string& col) {
  if (cell.empty()) {
    throw ParseError("missing value at row " + std::to_string(row) + ", column '" + col + "'");
  }
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0') {
    throw ParseError("bad number '" + cell + "' at row " + std::to_string(row) + ", column '" +
                     col + "'");
  }
  return v;
}

}  // namespace

Dataset ingest_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);

  auto col_index = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("column '" + name + "' not in header");
    return static_cast<int>(it - header.begin());
  };
  std::vector<int> x_idx, y_idx;
  for (const auto& c : schema.x_columns) x_idx.push_back(col_index(c));
  for (const auto& c : schema.y_columns) y_idx.push_back(col_index(c));
  if (x_idx.empty() || y_idx.empty()) throw SchemaError("schema needs x and y columns");
  int z_idx = -1;
  if (schema.z_column) z_idx = col_index(*schema.z_column);

  std::vector<std::vector<double>> x_rows, y_rows;
  std::vector<std::string> z_raw;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " cells, header has " + std::to_string(header.size()));
    }
    std::vector<double> xr, yr;
    for (int c : x_idx) xr.push_back(parse_cell(cells[c], row, header[c]));
    for (int c : y_idx) yr.push_back(parse_cell(cells[c], row, header[c]));
    x_rows.push_back(std::move(xr));
    y_rows.push_back(std::move(yr));
    if (z_idx >= 0) z_raw.push_back(cells[z_idx]);
  }
  const int n = static_cast<int>(x_rows.size());
  if (n == 0) throw ParseError(path + " has no data rows");
  Matrix x(n, static_cast<int>(x_idx.size()));
  Matrix y(n, static_cast<int>(y_idx.size()));
  for (int i = 0; i < n; ++i) {
    for (size_t j = 0; j < x_idx.size(); ++j) x(i, static_cast<int>(j)) = x_rows[i][j];
    for (size_t j = 0; j < y_idx.size(); ++j) y(i, static_cast<int>(j)) = y_rows[i][j];
  }
  if (z_idx < 0) {
    return Dataset(std::move(x), std::move(y), std::vector<int>(n, 0), schema.role);
  }
  if (schema.z_categorical) {
    // Deterministic label encoding in sorted lexical order.
    std::vector<std::string> levels = z_raw;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::map<std::string, int> code;
    for (size_t k = 0; k < levels.size(); ++k) code[levels[k]] = static_cast<int>(k);
    std::vector<int> z(n);
    for (int i = 0; i < n; ++i) z[i] = code.at(z_raw[i]);
    return Dataset(std::move(x), std::move(y), std::move(z), schema.role);
  }
  Matrix z(n, 1);
  for (int i = 0; i < n; ++i) z(i, 0) = parse_cell(z_raw[i], i + 2, *schema.z_column);
  return Dataset(std::move(x), std::move(y), std::move(z), schema.role);
}

void export_csv(const Dataset& data, const std::string& path, const std::string& metadata_json) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (int j = 0; j < data.dim_x(); ++j) out << "x" << j + 1 << ",";
  for (int j = 0; j < data.dim_y(); ++j) out << "y" << j + 1 << ",";
  out << "z";
  if (data.z_kind() == ZKind::Real) {
    for (int j = 1; j < data.z_real().cols(); ++j) out << ",z" << j + 1;
  }
  out << "\n";
  char buf[64];
  for (int i = 0; i < data.size(); ++i) {
    for (int j = 0; j < data.dim_x(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g,", data.x()(i, j));
      out << buf;
    }
    for (int j = 0; j < data.dim_y(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g,", data.y()(i, j));
      out << buf;
    }
    if (data.z_kind() == ZKind::Categorical) {
      out << data.z_codes()[i];
    } else {
      for (int j = 0; j < data.z_real().cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%s%.17g", j ? "," : "", data.z_real()(i, j));
        out << buf;
      }
    }
    out << "\n";
  }
  if (!metadata_json.empty()) {
    std::ofstream meta(path + ".meta.json");
    meta << metadata_json;
  }
}

}  // namespace mopi
