#include "gpkf/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "gpkf/errors.hpp"

namespace gpkf {

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> parse_integer(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return in;
}

template <typename Write>
void with_output(const std::string& path, Write&& write) {
  if (path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write(out);
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

// ---- INI documents -------------------------------------------------------

struct IniValue {
  std::string text;
  std::size_t line;
};

struct IniSection {
  std::size_t line;
  std::map<std::string, IniValue> values;
};

using IniDocument = std::map<std::string, IniSection>;

IniDocument parse_ini(std::istream& in, std::span<const std::string_view> allowed_sections) {
  IniDocument doc;
  std::string raw;
  std::size_t line_no = 0;
  IniSection* current = nullptr;
  std::string current_name;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      const std::string name(trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (auto a : allowed_sections) known = known || a == name;
      if (!known) throw SchemaError(name, "unknown section (line " + std::to_string(line_no) + ")");
      if (doc.contains(name)) throw SchemaError(name, "duplicate section (line " + std::to_string(line_no) + ")");
      current = &doc[name];
      current->line = line_no;
      current_name = name;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
    if (!current) throw ParseError("key outside of any [section]", line_no);
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ParseError("empty key", line_no);
    if (current->values.contains(key))
      throw SchemaError(current_name + "." + key, "duplicate key (line " + std::to_string(line_no) + ")");
    current->values[key] = {std::string(trim(line.substr(eq + 1))), line_no};
  }
  return doc;
}

// Typed, consuming view over one section; leftover keys are schema errors.
class SectionReader {
 public:
  SectionReader(std::string name, IniSection section) : name_(std::move(name)), section_(std::move(section)) {}

  bool has(const std::string& key) const { return section_.values.contains(key); }

  std::string text(const std::string& key) {
    auto it = section_.values.find(key);
    if (it == section_.values.end()) throw SchemaError(path(key), "missing required key");
    std::string v = it->second.text;
    last_line_ = it->second.line;
    section_.values.erase(it);
    return v;
  }

  double number(const std::string& key) {
    const auto t = text(key);
    const auto v = parse_double(t);
    if (!v) throw SchemaError(path(key), "not a number: '" + t + "'" + at());
    return *v;
  }

  template <typename Int>
  Int integer(const std::string& key) {
    const auto t = text(key);
    const auto v = parse_integer<Int>(t);
    if (!v) throw SchemaError(path(key), "not an integer: '" + t + "'" + at());
    return *v;
  }

  bool boolean(const std::string& key) {
    const auto t = text(key);
    if (t == "true") return true;
    if (t == "false") return false;
    throw SchemaError(path(key), "expected true or false" + at());
  }

  Matrix matrix(const std::string& key, Eigen::Index rows, Eigen::Index cols) {
    const auto t = text(key);
    std::vector<double> entries;
    std::string normalized = t;
    for (char& c : normalized)
      if (c == ',' || c == '\t') c = ' ';
    std::istringstream ss(normalized);
    std::string token;
    while (ss >> token) {
      const auto v = parse_double(token);
      if (!v) throw SchemaError(path(key), "not a number: '" + token + "'" + at());
      entries.push_back(*v);
    }
    if (static_cast<Eigen::Index>(entries.size()) != rows * cols)
      throw SchemaError(path(key), "expected " + std::to_string(rows * cols) + " entries, got " +
                                       std::to_string(entries.size()) + at());
    Matrix out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = entries[static_cast<std::size_t>(i * cols + j)];
    return out;
  }

  void finish() const {
    if (!section_.values.empty()) {
      const auto& [key, value] = *section_.values.begin();
      throw SchemaError(path(key), "unknown key (line " + std::to_string(value.line) + ")");
    }
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

 private:
  std::string at() const { return " (line " + std::to_string(last_line_) + ")"; }

  std::string name_;
  IniSection section_;
  std::size_t last_line_ = 0;
};

// Unknown keys are reported before missing ones so a misspelled key is named directly.
SectionReader section(IniDocument& doc, const std::string& name,
                      std::initializer_list<std::string_view> allowed) {
  auto it = doc.find(name);
  if (it == doc.end()) throw SchemaError(name, "missing required section");
  for (const auto& [key, value] : it->second.values)
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw SchemaError(name + "." + key, "unknown key (line " + std::to_string(value.line) + ")");
  return SectionReader(name, it->second);
}

KernelSpec read_kernel_section(IniDocument& doc) {
  auto s = section(doc, "kernel", {"family", "variance", "lengthscale"});
  const auto family_name = s.text("family");
  const auto family = parse_kernel_family(family_name);
  if (!family) throw SchemaError("kernel.family", "unknown family '" + family_name + "'");
  const double variance = s.number("variance");
  double lengthscale = 1.0;
  if (*family != KernelFamily::White || s.has("lengthscale")) lengthscale = s.number("lengthscale");
  s.finish();
  if (!(variance > 0.0)) throw SchemaError("kernel.variance", "must be positive");
  if (!(lengthscale > 0.0)) throw SchemaError("kernel.lengthscale", "must be positive");
  return KernelSpec(*family, variance, lengthscale);
}

std::optional<FitInfo> read_fit_section(IniDocument& doc) {
  if (!doc.contains("fit")) return std::nullopt;
  auto s = section(doc, "fit", {"log_likelihood", "iterations", "converged"});
  FitInfo f;
  f.log_likelihood = s.number("log_likelihood");
  f.iterations = s.integer<std::size_t>("iterations");
  f.converged = s.boolean("converged");
  s.finish();
  return f;
}

void write_kernel_section(std::ostream& out, const KernelSpec& k) {
  out << "[kernel]\n"
      << "family = " << to_string(k.family()) << "\n"
      << "variance = " << format_double(k.variance()) << "\n"
      << "lengthscale = " << format_double(k.lengthscale()) << "\n";
}

void write_fit_section(std::ostream& out, const std::optional<FitInfo>& fit) {
  if (!fit) return;
  out << "\n[fit]\n"
      << "log_likelihood = " << format_double(fit->log_likelihood) << "\n"
      << "iterations = " << fit->iterations << "\n"
      << "converged = " << (fit->converged ? "true" : "false") << "\n";
}

std::string join_matrix(const Matrix& m) {
  std::string s;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!s.empty()) s += ", ";
      s += format_double(m(i, j));
    }
  return s;
}

}  // namespace

StateSpaceModel ModelConfig::to_model() const {
  return StateSpaceModel::constant(F, H, W, x0, P0);
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.n == b.n && a.m == b.m && a.F == b.F && a.H == b.H && a.W == b.W && a.x0 == b.x0 &&
         a.P0 == b.P0;
}

RunConfig read_config(std::istream& in) {
  static constexpr std::string_view kSections[] = {"model", "kernel", "window", "run", "fit"};
  IniDocument doc = parse_ini(in, kSections);
  RunConfig cfg;

  {
    auto s = section(doc, "model", {"n", "m", "F", "H", "W", "x0", "P0"});
    const auto n = s.integer<Eigen::Index>("n");
    const auto m = s.integer<Eigen::Index>("m");
    if (n < 1) throw SchemaError("model.n", "must be >= 1");
    if (m < 1) throw SchemaError("model.m", "must be >= 1");
    cfg.model.n = n;
    cfg.model.m = m;
    cfg.model.F = s.matrix("F", n, n);
    cfg.model.H = s.matrix("H", m, n);
    cfg.model.W = s.matrix("W", n, n);
    cfg.model.x0 = s.matrix("x0", n, 1);
    cfg.model.P0 = s.matrix("P0", n, n);
    s.finish();
  }
  cfg.kernel = read_kernel_section(doc);
  {
    auto s = section(doc, "window", {"fixed", "k_min", "tau", "unbounded"});
    int present = 0;
    for (const char* key : {"fixed", "k_min", "tau", "unbounded"}) present += s.has(key) ? 1 : 0;
    if (present != 1)
      throw SchemaError("window", "exactly one of fixed, k_min, tau, unbounded is required, found " +
                                      std::to_string(present));
    if (s.has("fixed")) {
      const auto n = s.integer<std::size_t>("fixed");
      if (n < 1) throw SchemaError("window.fixed", "must be >= 1");
      cfg.window = FixedWindow{n};
    } else if (s.has("k_min")) {
      cfg.window = CorrelationWindow{s.number("k_min")};
    } else if (s.has("tau")) {
      const double tau = s.number("tau");
      if (!(tau >= 0.0)) throw SchemaError("window.tau", "must be >= 0");
      cfg.window = CovarianceWindow{tau};
    } else {
      if (!s.boolean("unbounded")) throw SchemaError("window.unbounded", "only 'true' is meaningful");
      cfg.window = UnboundedWindow{};
    }
    s.finish();
  }
  if (doc.contains("run")) {
    auto s = section(doc, "run", {"horizon", "seed"});
    if (s.has("horizon")) cfg.horizon = s.integer<std::size_t>("horizon");
    if (s.has("seed")) cfg.seed = s.integer<std::uint64_t>("seed");
    s.finish();
    if (cfg.horizon < 1) throw SchemaError("run.horizon", "must be >= 1");
  }
  cfg.fit = read_fit_section(doc);
  return cfg;
}

RunConfig read_config(const std::string& path) {
  auto in = open_input(path);
  return read_config(in);
}

void write_config(std::ostream& out, const RunConfig& cfg) {
  out << "[model]\n"
      << "n = " << cfg.model.n << "\n"
      << "m = " << cfg.model.m << "\n"
      << "F = " << join_matrix(cfg.model.F) << "\n"
      << "H = " << join_matrix(cfg.model.H) << "\n"
      << "W = " << join_matrix(cfg.model.W) << "\n"
      << "x0 = " << join_matrix(cfg.model.x0) << "\n"
      << "P0 = " << join_matrix(cfg.model.P0) << "\n\n";
  write_kernel_section(out, cfg.kernel);
  out << "\n[window]\n";
  std::visit(
      [&](const auto& w) {
        using W = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<W, FixedWindow>) out << "fixed = " << w.length << "\n";
        else if constexpr (std::is_same_v<W, CorrelationWindow>) out << "k_min = " << format_double(w.k_min) << "\n";
        else if constexpr (std::is_same_v<W, CovarianceWindow>) out << "tau = " << format_double(w.trace_threshold) << "\n";
        else out << "unbounded = true\n";
      },
      cfg.window);
  out << "\n[run]\n"
      << "horizon = " << cfg.horizon << "\n"
      << "seed = " << cfg.seed << "\n";
  write_fit_section(out, cfg.fit);
}

void write_config(const std::string& path, const RunConfig& cfg) {
  with_output(path, [&](std::ostream& out) { write_config(out, cfg); });
}

KernelConfig read_kernel_config(std::istream& in) {
  static constexpr std::string_view kSections[] = {"kernel", "fit"};
  IniDocument doc = parse_ini(in, kSections);
  KernelSpec kernel = read_kernel_section(doc);
  return {kernel, read_fit_section(doc)};
}

KernelConfig read_kernel_config(const std::string& path) {
  auto in = open_input(path);
  return read_kernel_config(in);
}

void write_kernel_config(std::ostream& out, const KernelConfig& cfg) {
  write_kernel_section(out, cfg.kernel);
  write_fit_section(out, cfg.fit);
}

void write_kernel_config(const std::string& path, const KernelConfig& cfg) {
  with_output(path, [&](std::ostream& out) { write_kernel_config(out, cfg); });
}

// ---- CSV -----------------------------------------------------------------

TimeSeries read_timeseries(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  TimeSeries ts;
  std::vector<std::vector<double>> rows;
  std::optional<TimeIndex> previous;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    line = trim(line);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (!have_header) {
      if (fields.empty() || fields[0] != "t") throw ParseError("header must start with column 't'", line_no);
      if (fields.size() < 2) throw ParseError("header has no value columns", line_no);
      for (std::size_t i = 1; i < fields.size(); ++i) ts.columns.emplace_back(fields[i]);
      have_header = true;
      continue;
    }
    if (fields.size() != ts.columns.size() + 1)
      throw ParseError("expected " + std::to_string(ts.columns.size() + 1) + " fields, got " +
                           std::to_string(fields.size()), line_no);
    const auto t = parse_integer<TimeIndex>(fields[0]);
    if (!t) throw ParseError("time stamp '" + std::string(fields[0]) + "' is not an integer", line_no);
    if (previous) {
      if (*t > *previous + 1) throw GapError(*previous + 1, line_no);
      if (*t <= *previous) throw ParseError("time stamps must increase", line_no);
    } else {
      ts.start_time = *t;
    }
    previous = *t;
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto v = parse_double(fields[i]);
      if (!v) throw ParseError("column '" + ts.columns[i - 1] + "': not a number '" + std::string(fields[i]) + "'", line_no);
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw ParseError("missing header row", line_no + 1);
  ts.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ts.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      ts.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return ts;
}

TimeSeries read_timeseries(const std::string& path) {
  auto in = open_input(path);
  return read_timeseries(in);
}

void write_timeseries(std::ostream& out, const TimeSeries& series, std::string_view prefix) {
  out << "t";
  for (Eigen::Index j = 0; j < series.dim(); ++j) {
    if (static_cast<Eigen::Index>(series.columns.size()) == series.dim())
      out << ',' << series.columns[static_cast<std::size_t>(j)];
    else
      out << ',' << prefix << (j + 1);
  }
  out << '\n';
  for (Eigen::Index i = 0; i < series.length(); ++i) {
    out << series.time_at(i);
    for (Eigen::Index j = 0; j < series.dim(); ++j) out << ',' << format_double(series.values(i, j));
    out << '\n';
  }
}

void write_timeseries(const std::string& path, const TimeSeries& series, std::string_view prefix) {
  with_output(path, [&](std::ostream& out) { write_timeseries(out, series, prefix); });
}

void write_estimates_header(std::ostream& out, Eigen::Index n, Eigen::Index m) {
  out << "t";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",xhat_" << i;
  for (Eigen::Index i = 1; i <= n; ++i)
    for (Eigen::Index j = 1; j <= n; ++j) out << ",P_" << i << j;
  for (Eigen::Index i = 1; i <= m; ++i) out << ",innov_" << i;
  for (Eigen::Index i = 1; i <= m; ++i)
    for (Eigen::Index j = 1; j <= m; ++j) out << ",L_" << i << j;
  out << '\n';
}

void write_estimate_row(std::ostream& out, const Estimate& e) {
  out << e.time;
  for (Eigen::Index i = 0; i < e.mean.size(); ++i) out << ',' << format_double(e.mean(i));
  for (Eigen::Index i = 0; i < e.covariance.rows(); ++i)
    for (Eigen::Index j = 0; j < e.covariance.cols(); ++j) out << ',' << format_double(e.covariance(i, j));
  for (Eigen::Index i = 0; i < e.innovation.size(); ++i) out << ',' << format_double(e.innovation(i));
  for (Eigen::Index i = 0; i < e.innovation_covariance.rows(); ++i)
    for (Eigen::Index j = 0; j < e.innovation_covariance.cols(); ++j)
      out << ',' << format_double(e.innovation_covariance(i, j));
  out << '\n';
}

void write_estimates(std::ostream& out, std::span<const Estimate> estimates, Eigen::Index n,
                     Eigen::Index m) {
  write_estimates_header(out, n, m);
  for (const auto& e : estimates) write_estimate_row(out, e);
}

void write_estimates(const std::string& path, std::span<const Estimate> estimates, Eigen::Index n,
                     Eigen::Index m) {
  with_output(path, [&](std::ostream& out) { write_estimates(out, estimates, n, m); });
}

EstimateTable read_estimates(std::istream& in) {
  TimeSeries raw = read_timeseries(in);
  EstimateTable table;
  Eigen::Index n = 0, m = 0;
  for (const auto& c : raw.columns) {
    if (c.starts_with("xhat_")) ++n;
    if (c.starts_with("innov_")) ++m;
  }
  if (raw.dim() != n + n * n + m + m * m) throw ParseError("estimate header has unexpected columns", 1);
  table.n = n;
  table.m = m;
  for (Eigen::Index i = 0; i < raw.length(); ++i) {
    const auto row = raw.values.row(i);
    EstimateRow r;
    r.time = raw.time_at(i);
    Eigen::Index k = 0;
    r.mean = row.segment(k, n).transpose();
    k += n;
    r.covariance = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        Vector(row.segment(k, n * n).transpose()).data(), n, n);
    k += n * n;
    r.innovation = row.segment(k, m).transpose();
    k += m;
    r.innovation_covariance = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        Vector(row.segment(k, m * m).transpose()).data(), m, m);
    table.rows.push_back(std::move(r));
  }
  return table;
}

}  // namespace gpkf
