#include "nsca/io.hpp"

#include "nsca/error.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace nsca::io {

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace {

[[noreturn]] void parse_error(const std::string& msg) {
  throw Error(ErrorKind::ParseError, msg);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (t.empty() || res.ec != std::errc() || res.ptr != last) {
    parse_error("invalid number '" + t + "' " + where);
  }
  if (!std::isfinite(v)) parse_error("non-finite value " + where);
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  }
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
  }
  return out;
}

void check_version(const std::string& value) {
  if (value != std::to_string(kFormatVersion)) {
    parse_error("unsupported format_version " + value);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Recordings

Recording read_recording(std::istream& in) {
  std::string line;
  std::optional<double> fs;
  bool have_header = false;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header && !line.empty() && line.front() == '#') {
      std::istringstream meta(line.substr(1));
      std::string token;
      while (meta >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "fs") {
          fs = parse_number(value, "in the fs metadata");
        } else if (key == "format_version") {
          check_version(value);
        }
      }
      continue;
    }
    if (!fs) {
      throw Error(ErrorKind::MissingSamplingRate,
                  "recording lacks a '# fs=<Hz>' metadata line");
    }
    if (trim(line).empty()) continue;
    if (!have_header) {
      for (const auto& n : split(line, ',')) names.push_back(trim(n));
      columns.resize(names.size());
      have_header = true;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != names.size()) {
      parse_error("line " + std::to_string(line_no) + " has " +
                  std::to_string(fields.size()) + " fields, expected " +
                  std::to_string(names.size()));
    }
    for (std::size_t k = 0; k < fields.size(); ++k) {
      columns[k].push_back(
          parse_number(fields[k], "on line " + std::to_string(line_no)));
    }
  }
  if (!fs) {
    throw Error(ErrorKind::MissingSamplingRate,
                "recording lacks a '# fs=<Hz>' metadata line");
  }
  if (!(*fs > 0.0)) parse_error("sampling rate must be positive");
  if (!have_header || names.empty() || columns.front().empty()) {
    throw Error(ErrorKind::EmptySignal, "recording holds no samples");
  }
  return Recording{MultichannelSignal::from_channels(columns, *fs),
                   std::move(names)};
}

Recording read_recording(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_recording(in);
}

void write_recording(std::ostream& out, const MultichannelSignal& x,
                     const std::vector<std::string>& names) {
  if (!names.empty() && names.size() != x.channels()) {
    throw Error(ErrorKind::DimensionMismatch, "one name per channel required");
  }
  out << "# fs=" << format_double(x.fs()) << " format_version="
      << kFormatVersion << '\n';
  for (std::size_t k = 0; k < x.channels(); ++k) {
    if (k > 0) out << ',';
    out << (names.empty() ? "ch" + std::to_string(k) : names[k]);
  }
  out << '\n';
  const auto& d = x.data();
  std::string row;
  for (Eigen::Index t = 0; t < d.cols(); ++t) {
    row.clear();
    for (Eigen::Index k = 0; k < d.rows(); ++k) {
      if (k > 0) row += ',';
      row += format_double(d(k, t));
    }
    row += '\n';
    out << row;
  }
}

void write_recording(const std::filesystem::path& path,
                     const MultichannelSignal& x,
                     const std::vector<std::string>& names) {
  auto out = open_out(path);
  write_recording(out, x, names);
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path);
  out << "# format_version=" << kFormatVersion << '\n';
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    out << (j > 0 ? "," : "") << 'w' << j;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << (j > 0 ? "," : "") << format_double(m(i, j));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Kernel parameter files

GaussianKernelSet read_kernels(std::istream& in) {
  std::vector<GaussianKernel> ks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ss(t);
    std::vector<std::string> tok;
    std::string w;
    while (ss >> w) tok.push_back(w);
    if (tok.size() != 3) {
      parse_error("kernel line " + std::to_string(line_no) +
                  " must hold alpha, b and psi");
    }
    const std::string where = "on kernel line " + std::to_string(line_no);
    ks.push_back({parse_number(tok[0], where), parse_number(tok[1], where),
                  parse_number(tok[2], where)});
  }
  return GaussianKernelSet(std::move(ks));
}

GaussianKernelSet read_kernels(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_kernels(in);
}

void write_kernels(std::ostream& out, const GaussianKernelSet& k) {
  out << "# alpha b psi\n";
  for (const auto& g : k.kernels()) {
    out << format_double(g.alpha) << ' ' << format_double(g.width) << ' '
        << format_double(g.center) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Strict JSON reading

namespace {

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) parse_error(where() + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const Json& at(const std::string& key) { return j_.at(key); }
  std::string child(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_number()) parse_error(child(key) + " must be a number");
    out = v.get<double>();
    if (!std::isfinite(out)) parse_error(child(key) + " must be finite");
  }

  void count(const std::string& key, std::size_t& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_number_unsigned()) {
      parse_error(child(key) + " must be a nonnegative integer");
    }
    out = v.get<std::size_t>();
  }

  void integer(const std::string& key, int& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_number_integer()) parse_error(child(key) + " must be an integer");
    out = v.get<int>();
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_number_unsigned()) {
      parse_error(child(key) + " must be a nonnegative integer");
    }
    out = v.get<std::uint64_t>();
  }

  void flag(const std::string& key, bool& out) {
    if (!has(key)) return;
    const Json& v = at(key);
    if (!v.is_boolean()) parse_error(child(key) + " must be a boolean");
    out = v.get<bool>();
  }

  std::optional<std::string> text(const std::string& key) {
    if (!has(key)) return std::nullopt;
    const Json& v = at(key);
    if (!v.is_string()) parse_error(child(key) + " must be a string");
    return v.get<std::string>();
  }

  const Json* array(const std::string& key) {
    if (!has(key)) return nullptr;
    const Json& v = at(key);
    if (!v.is_array()) parse_error(child(key) + " must be an array");
    return &v;
  }

  void version() {
    if (!has("format_version")) return;
    const Json& v = at("format_version");
    if (!v.is_number_integer() || v.get<int>() != kFormatVersion) {
      parse_error("unsupported format_version");
    }
  }

  /// Rejects keys nobody asked for.
  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw Error(ErrorKind::UnknownConfigKey,
                    "unknown configuration key '" + child(item.key()) + "'");
      }
    }
  }

 private:
  std::string where() const { return path_.empty() ? "document" : path_; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Wraps invalid-argument failures of value conversion into parse errors.
template <typename F>
auto converted(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument) {
      parse_error(where + ": " + e.what());
    }
    throw;
  }
}

Threshold threshold_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  const auto kind = r.text("kind").value_or("std");
  Threshold t;
  if (kind == "fixed") {
    t = Threshold::fixed(0.0);
    r.number("value", t.value);
  } else if (kind == "std") {
    t = Threshold::std_rule(3.0);
    r.number("multiple", t.multiple);
    const auto center = r.text("center").value_or("zero");
    if (center == "zero") {
      t.center = Threshold::Center::Zero;
    } else if (center == "median") {
      t.center = Threshold::Center::Median;
    } else {
      parse_error(r.child("center") + " must be 'zero' or 'median'");
    }
  } else {
    parse_error(r.child("kind") + " must be 'fixed' or 'std'");
  }
  r.finish();
  return t;
}

Json threshold_to_json(const Threshold& t) {
  if (t.kind == Threshold::Kind::Fixed) return Json{{"kind", "fixed"}, {"value", t.value}};
  return Json{{"kind", "std"},
              {"multiple", t.multiple},
              {"center", t.center == Threshold::Center::Median ? "median" : "zero"}};
}

void read_threshold(Reader& r, const std::string& key, Threshold& out) {
  if (r.has(key)) out = threshold_from_json(r.at(key), r.child(key));
}

void lpe_from_json(const Json& j, const std::string& path, LpeConfig& c) {
  Reader r(j, path);
  r.number("w1", c.w1);
  r.number("w2", c.w2);
  read_threshold(r, "zeta_upper", c.zeta_upper);
  read_threshold(r, "zeta_lower", c.zeta_lower);
  r.flag("global_denominator", c.global_denominator);
  r.finish();
}

Json lpe_to_json(const LpeConfig& c) {
  return Json{{"w1", c.w1},
              {"w2", c.w2},
              {"zeta_upper", threshold_to_json(c.zeta_upper)},
              {"zeta_lower", threshold_to_json(c.zeta_lower)},
              {"global_denominator", c.global_denominator}};
}

std::vector<Detector> detectors_from_json(const Json& a, const std::string& path) {
  std::vector<Detector> out;
  for (const auto& v : a) {
    if (!v.is_string()) parse_error(path + " entries must be strings");
    out.push_back(converted(path, [&] { return parse_detector(v.get<std::string>()); }));
  }
  return out;
}

Json detectors_to_json(const std::vector<Detector>& ds) {
  Json a = Json::array();
  for (Detector d : ds) a.push_back(std::string(to_string(d)));
  return a;
}

GaussianKernelSet kernels_from_json(const Json& a, const std::string& path) {
  std::vector<GaussianKernel> ks;
  std::size_t i = 0;
  for (const auto& item : a) {
    Reader r(item, path + "[" + std::to_string(i++) + "]");
    GaussianKernel k;
    r.number("alpha", k.alpha);
    r.number("width", k.width);
    r.number("center", k.center);
    r.finish();
    ks.push_back(k);
  }
  return converted(path, [&] { return GaussianKernelSet(std::move(ks)); });
}

Json kernels_to_json(const GaussianKernelSet& k) {
  Json a = Json::array();
  for (const auto& g : k.kernels()) {
    a.push_back(Json{{"alpha", g.alpha}, {"width", g.width}, {"center", g.center}});
  }
  return a;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& a, const std::string& path) {
  if (!a.is_array() || a.empty()) parse_error(path + " must be a nonempty array");
  const std::size_t cols = a.front().is_array() ? a.front().size() : 0;
  if (cols == 0) parse_error(path + " rows must be nonempty arrays");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(a.size()),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Json& row = a[i];
    if (!row.is_array() || row.size() != cols) {
      parse_error(path + " must be rectangular");
    }
    for (std::size_t j = 0; j < cols; ++j) {
      if (!row[j].is_number()) parse_error(path + " entries must be numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          row[j].get<double>();
    }
  }
  return m;
}

std::vector<std::size_t> indexes_from_json(const Json& a, const std::string& path) {
  if (!a.is_array()) parse_error(path + " must be an array");
  std::vector<std::size_t> out;
  for (const auto& v : a) {
    if (!v.is_number_unsigned()) {
      parse_error(path + " entries must be nonnegative integers");
    }
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

EvaluationSettings evaluation_from_json(const Json& j, const std::string& path) {
  EvaluationSettings e;
  Reader r(j, path);
  r.number("tolerance", e.tolerance);
  r.number("fetal_min_rr", e.fetal_min_rr);
  r.finish();
  return e;
}

Json evaluation_to_json(const EvaluationSettings& e) {
  return Json{{"tolerance", e.tolerance}, {"fetal_min_rr", e.fetal_min_rr}};
}

}  // namespace

PipelineConfig pipeline_from_json(const Json& j) {
  PipelineConfig c;
  Reader r(j, "pipeline");
  if (auto mode = r.text("mode")) {
    c.mode = converted("pipeline.mode", [&] { return parse_mode(*mode); });
  }
  if (const Json* a = r.array("detectors")) {
    c.detectors = detectors_from_json(*a, "pipeline.detectors");
  }
  r.count("maternal_channel", c.maternal_channel);
  if (const Json* a = r.array("fetal_channels")) {
    c.fetal_channels = indexes_from_json(*a, "pipeline.fetal_channels");
  }
  r.number("maternal_min_rr", c.maternal_min_rr);
  r.count("beat_bins", c.beat_bins);
  r.count("n_kernels", c.n_kernels);
  if (r.has("ekf")) {
    Reader e(r.at("ekf"), "pipeline.ekf");
    e.flag("calibrate", c.calibrate_ekf);
    e.number("q_process", c.ekf.q_process);
    e.number("q_phase", c.ekf.q_phase);
    e.number("r_ecg", c.ekf.r_ecg);
    e.number("r_phase", c.ekf.r_phase);
    if (e.has("kernel_param_noise")) {
      Reader k(e.at("kernel_param_noise"), "pipeline.ekf.kernel_param_noise");
      k.number("alpha", c.ekf.kernel_param_noise.alpha);
      k.number("width", c.ekf.kernel_param_noise.width);
      k.number("center", c.ekf.kernel_param_noise.center);
      k.finish();
    }
    e.finish();
  }
  if (r.has("lpe")) lpe_from_json(r.at("lpe"), "pipeline.lpe", c.lpe);
  r.flag("lpe_on_innovation", c.lpe_on_innovation);
  if (r.has("innovation_mean")) {
    Reader m(r.at("innovation_mean"), "pipeline.innovation_mean");
    m.number("window", c.mean_window);
    read_threshold(m, "threshold", c.mean_threshold);
    m.finish();
  }
  if (r.has("innovation_variance")) {
    Reader v(r.at("innovation_variance"), "pipeline.innovation_variance");
    v.number("window", c.variance_window);
    v.number("mean_removal_window", c.variance.mean_removal_window);
    read_threshold(v, "upper", c.variance.upper);
    read_threshold(v, "lower", c.variance.lower);
    v.finish();
  }
  if (r.has("innovation_whiteness")) {
    Reader w(r.at("innovation_whiteness"), "pipeline.innovation_whiteness");
    w.number("window", c.whiteness_window);
    w.count("max_lag", c.whiteness.max_lag);
    w.number("mean_removal_window", c.whiteness.mean_removal_window);
    read_threshold(w, "xi", c.whiteness.xi);
    read_threshold(w, "kappa", c.whiteness.kappa);
    w.finish();
  }
  if (r.has("maternal_lpe")) {
    lpe_from_json(r.at("maternal_lpe"), "pipeline.maternal_lpe", c.maternal_lpe);
  }
  r.number("maternal_padding", c.maternal_padding);
  r.number("intersection_tolerance", c.intersection_tolerance);
  if (r.has("ajd")) {
    Reader a(r.at("ajd"), "pipeline.ajd");
    a.flag("per_channel", c.ajd_per_channel);
    a.integer("max_sweeps", c.ajd.max_sweeps);
    a.number("angle_tolerance", c.ajd.angle_tolerance);
    a.finish();
  }
  if (r.has("gevd")) {
    Reader g(r.at("gevd"), "pipeline.gevd");
    g.number("condition_limit", c.gevd.condition_limit);
    g.number("regularization", c.gevd.regularization);
    g.finish();
    c.ajd.whitening = c.gevd;
  }
  r.finish();
  return c;
}

Json pipeline_to_json(const PipelineConfig& c) {
  Json fetal = Json::array();
  for (std::size_t k : c.fetal_channels) fetal.push_back(k);
  return Json{
      {"mode", std::string(to_string(c.mode))},
      {"detectors", detectors_to_json(c.detectors)},
      {"maternal_channel", c.maternal_channel},
      {"fetal_channels", fetal},
      {"maternal_min_rr", c.maternal_min_rr},
      {"beat_bins", c.beat_bins},
      {"n_kernels", c.n_kernels},
      {"ekf",
       {{"calibrate", c.calibrate_ekf},
        {"q_process", c.ekf.q_process},
        {"q_phase", c.ekf.q_phase},
        {"r_ecg", c.ekf.r_ecg},
        {"r_phase", c.ekf.r_phase},
        {"kernel_param_noise",
         {{"alpha", c.ekf.kernel_param_noise.alpha},
          {"width", c.ekf.kernel_param_noise.width},
          {"center", c.ekf.kernel_param_noise.center}}}}},
      {"lpe", lpe_to_json(c.lpe)},
      {"lpe_on_innovation", c.lpe_on_innovation},
      {"innovation_mean",
       {{"window", c.mean_window},
        {"threshold", threshold_to_json(c.mean_threshold)}}},
      {"innovation_variance",
       {{"window", c.variance_window},
        {"mean_removal_window", c.variance.mean_removal_window},
        {"upper", threshold_to_json(c.variance.upper)},
        {"lower", threshold_to_json(c.variance.lower)}}},
      {"innovation_whiteness",
       {{"window", c.whiteness_window},
        {"max_lag", c.whiteness.max_lag},
        {"mean_removal_window", c.whiteness.mean_removal_window},
        {"xi", threshold_to_json(c.whiteness.xi)},
        {"kappa", threshold_to_json(c.whiteness.kappa)}}},
      {"maternal_lpe", lpe_to_json(c.maternal_lpe)},
      {"maternal_padding", c.maternal_padding},
      {"intersection_tolerance", c.intersection_tolerance},
      {"ajd",
       {{"per_channel", c.ajd_per_channel},
        {"max_sweeps", c.ajd.max_sweeps},
        {"angle_tolerance", c.ajd.angle_tolerance}}},
      {"gevd",
       {{"condition_limit", c.gevd.condition_limit},
        {"regularization", c.gevd.regularization}}},
  };
}

MixtureConfig mixture_from_json(const Json& j) {
  MixtureConfig c;
  Reader r(j, "mixture");
  r.number("fs", c.fs);
  r.number("duration", c.duration);
  r.count("n_channels", c.n_channels);
  r.number("maternal_hr", c.maternal_hr);
  r.number("fetal_hr", c.fetal_hr);
  r.number("hr_jitter", c.hr_jitter);
  if (const Json* a = r.array("maternal_kernels")) {
    c.maternal_kernels = kernels_from_json(*a, "mixture.maternal_kernels");
  }
  if (const Json* a = r.array("fetal_kernels")) {
    c.fetal_kernels = kernels_from_json(*a, "mixture.fetal_kernels");
  }
  r.number("fetal_to_maternal_db", c.fetal_to_maternal_db);
  r.number("fetal_gain", c.fetal_gain);
  if (r.has("background_sources")) {
    std::size_t b = 0;
    r.count("background_sources", b);
    c.background_sources = b;
  }
  r.number("background_db", c.background_db);
  if (r.has("mixing")) c.mixing = matrix_from_json(r.at("mixing"), "mixture.mixing");
  r.number("max_condition", c.max_condition);
  r.finish();
  return c;
}

Json mixture_to_json(const MixtureConfig& c) {
  Json j{{"fs", c.fs},
         {"duration", c.duration},
         {"n_channels", c.n_channels},
         {"maternal_hr", c.maternal_hr},
         {"fetal_hr", c.fetal_hr},
         {"hr_jitter", c.hr_jitter},
         {"maternal_kernels", kernels_to_json(c.maternal_kernels)},
         {"fetal_kernels", kernels_to_json(c.fetal_kernels)},
         {"fetal_to_maternal_db", c.fetal_to_maternal_db},
         {"fetal_gain", c.fetal_gain},
         {"background_sources", nullptr},
         {"background_db", c.background_db},
         {"mixing", nullptr},
         {"max_condition", c.max_condition}};
  if (c.background_sources) j["background_sources"] = *c.background_sources;
  if (c.mixing) j["mixing"] = matrix_to_json(*c.mixing);
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  Reader r(j, "");
  r.version();
  if (r.has("pipeline")) c.pipeline = pipeline_from_json(r.at("pipeline"));
  if (r.has("evaluation")) {
    c.evaluation = evaluation_from_json(r.at("evaluation"), "evaluation");
  }
  r.finish();
  return c;
}

Json run_config_to_json(const RunConfig& c) {
  return Json{{"format_version", kFormatVersion},
              {"pipeline", pipeline_to_json(c.pipeline)},
              {"evaluation", evaluation_to_json(c.evaluation)}};
}

SynthConfig synth_config_from_json(const Json& j) {
  SynthConfig c;
  Reader r(j, "");
  r.version();
  r.seed("seed", c.seed);
  if (r.has("mixture")) c.mixture = mixture_from_json(r.at("mixture"));
  if (r.has("noise")) {
    Reader n(r.at("noise"), "noise");
    if (auto kind = n.text("kind")) {
      c.noise.kind = converted("noise.kind", [&] { return parse_noise_kind(*kind); });
    }
    if (n.has("snr_db")) {
      double snr = 0.0;
      n.number("snr_db", snr);
      c.noise.snr_db = snr;
    }
    n.finish();
  }
  r.finish();
  return c;
}

Json synth_config_to_json(const SynthConfig& c) {
  Json noise{{"kind", std::string(to_string(c.noise.kind))}, {"snr_db", nullptr}};
  if (c.noise.snr_db) noise["snr_db"] = *c.noise.snr_db;
  return Json{{"format_version", kFormatVersion},
              {"seed", c.seed},
              {"mixture", mixture_to_json(c.mixture)},
              {"noise", noise}};
}

SweepConfig sweep_config_from_json(const Json& j) {
  SweepConfig c;
  Reader r(j, "");
  r.version();
  r.seed("seed", c.seed);
  r.count("trials", c.trials);
  if (const Json* a = r.array("snr_db")) {
    c.snr_db.clear();
    for (const auto& v : *a) {
      if (!v.is_number()) parse_error("snr_db entries must be numbers");
      c.snr_db.push_back(v.get<double>());
    }
  }
  if (const Json* a = r.array("noise")) {
    c.noise.clear();
    for (const auto& v : *a) {
      if (!v.is_string()) parse_error("noise entries must be strings");
      c.noise.push_back(
          converted("noise", [&] { return parse_noise_kind(v.get<std::string>()); }));
    }
  }
  if (const Json* a = r.array("methods")) {
    c.methods.clear();
    std::size_t i = 0;
    for (const auto& item : *a) {
      const std::string path = "methods[" + std::to_string(i++) + "]";
      Reader m(item, path);
      SweepMethod method;
      method.name = m.text("name").value_or("");
      if (auto mode = m.text("mode")) {
        method.mode = converted(path, [&] { return parse_mode(*mode); });
      }
      method.detectors = all_detectors();
      if (const Json* d = m.array("detectors")) {
        method.detectors = detectors_from_json(*d, path + ".detectors");
      }
      m.finish();
      if (method.name.empty()) method.name = std::string(to_string(method.mode));
      c.methods.push_back(std::move(method));
    }
  }
  if (r.has("mixture")) c.mixture = mixture_from_json(r.at("mixture"));
  if (r.has("pipeline")) c.pipeline = pipeline_from_json(r.at("pipeline"));
  if (r.has("evaluation")) {
    const EvaluationSettings e = evaluation_from_json(r.at("evaluation"), "evaluation");
    c.tolerance = e.tolerance;
    c.fetal_min_rr = e.fetal_min_rr;
  }
  r.finish();
  return c;
}

Json sweep_config_to_json(const SweepConfig& c) {
  Json snr = Json::array();
  for (double v : c.snr_db) snr.push_back(v);
  Json noise = Json::array();
  for (NoiseKind k : c.noise) noise.push_back(std::string(to_string(k)));
  Json methods = Json::array();
  for (const auto& m : c.methods) {
    methods.push_back(Json{{"name", m.name},
                           {"mode", std::string(to_string(m.mode))},
                           {"detectors", detectors_to_json(m.detectors)}});
  }
  return Json{{"format_version", kFormatVersion},
              {"seed", c.seed},
              {"trials", c.trials},
              {"snr_db", snr},
              {"noise", noise},
              {"methods", methods},
              {"mixture", mixture_to_json(c.mixture)},
              {"pipeline", pipeline_to_json(c.pipeline)},
              {"evaluation",
               evaluation_to_json({c.tolerance, c.fetal_min_rr})}};
}

Json read_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    parse_error("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Epochs, truth, metrics, sweep reports

Json epochs_to_json(const NamedEpochs& sets, double fs) {
  const std::size_t horizon = sets.empty() ? 0 : sets.front().second.horizon();
  Json arr = Json::array();
  for (const auto& [name, set] : sets) {
    Json runs = Json::array();
    for (const Interval& r : set.intervals()) {
      runs.push_back(Json{{"start", r.start}, {"end", r.end}});
    }
    arr.push_back(Json{{"name", name}, {"size", set.size()}, {"intervals", runs}});
  }
  return Json{{"format_version", kFormatVersion},
              {"fs", fs},
              {"horizon", horizon},
              {"sets", arr}};
}

NamedEpochs epochs_from_json(const Json& j) {
  Reader r(j, "");
  r.version();
  double fs = 0.0;
  std::size_t horizon = 0;
  r.number("fs", fs);
  r.count("horizon", horizon);
  NamedEpochs out;
  if (const Json* a = r.array("sets")) {
    for (const auto& item : *a) {
      Reader s(item, "sets[]");
      const std::string name = s.text("name").value_or("");
      std::size_t size = 0;
      s.count("size", size);
      std::vector<Interval> runs;
      if (const Json* iv = s.array("intervals")) {
        for (const auto& run : *iv) {
          Reader ir(run, "sets[].intervals[]");
          Interval x;
          ir.count("start", x.start);
          ir.count("end", x.end);
          ir.finish();
          if (x.end < x.start || x.end > horizon) {
            parse_error("interval outside [0, horizon)");
          }
          runs.push_back(x);
        }
      }
      s.finish();
      out.emplace_back(name, EpochSet::from_intervals(std::move(runs), horizon));
    }
  }
  r.finish();
  return out;
}

Json truth_to_json(const MixtureGroundTruth& t) {
  return Json{{"format_version", kFormatVersion},
              {"fs", t.observed.fs()},
              {"samples", t.observed.samples()},
              {"mixing", matrix_to_json(t.mixing)},
              {"maternal_rpeaks", t.maternal_rpeaks},
              {"fetal_rpeaks", t.fetal_rpeaks}};
}

GroundTruth truth_from_json(const Json& j) {
  GroundTruth t;
  Reader r(j, "");
  r.version();
  r.number("fs", t.fs);
  r.count("samples", t.samples);
  if (r.has("mixing")) t.mixing = matrix_from_json(r.at("mixing"), "mixing");
  if (r.has("maternal_rpeaks")) {
    t.maternal_rpeaks = indexes_from_json(r.at("maternal_rpeaks"), "maternal_rpeaks");
  }
  if (r.has("fetal_rpeaks")) {
    t.fetal_rpeaks = indexes_from_json(r.at("fetal_rpeaks"), "fetal_rpeaks");
  }
  r.finish();
  if (!(t.fs > 0.0)) {
    throw Error(ErrorKind::MissingSamplingRate, "truth lacks a positive fs");
  }
  return t;
}

Json metrics_to_json(const MetricReport& m, const FetalSelection& sel) {
  Json scores = Json::array();
  for (const auto& q : sel.qualities) {
    scores.push_back(Json{{"channel", q.channel},
                          {"score", q.score},
                          {"median_hr", q.median_hr}});
  }
  return Json{{"format_version", kFormatVersion},
              {"metrics",
               {{"f1_percent", m.f1_percent},
                {"hrm_percent", m.hrm_percent},
                {"true_positives", m.true_positives},
                {"false_positives", m.false_positives},
                {"false_negatives", m.false_negatives},
                {"hr_series_est", m.hr_series_est},
                {"hr_series_ref", m.hr_series_ref}}},
              {"selection",
               {{"channel", sel.channel},
                {"peaks", sel.peaks},
                {"channels", scores}}}};
}

void write_sweep_csv(const std::filesystem::path& path,
                     const SweepReport& report,
                     const std::vector<SweepMethod>& methods) {
  auto out = open_out(path);
  out << "# format_version=" << kFormatVersion << '\n';
  out << "method,mode,detectors,noise,snr_db,trial,f1,hrm,tp,fp,fn,error\n";
  for (const auto& row : report.rows) {
    std::string mode;
    std::string dets;
    for (const auto& m : methods) {
      if (m.name != row.method) continue;
      mode = std::string(to_string(m.mode));
      for (std::size_t i = 0; i < m.detectors.size(); ++i) {
        if (i > 0) dets += '+';
        dets += std::string(to_string(m.detectors[i]));
      }
      break;
    }
    out << row.method << ',' << mode << ',' << dets << ','
        << to_string(row.noise) << ',' << format_double(row.snr_db) << ','
        << row.trial << ',' << format_double(row.f1) << ','
        << format_double(row.hrm) << ',' << row.true_positives << ','
        << row.false_positives << ',' << row.false_negatives << ','
        << row.error << '\n';
  }
}

Json sweep_summary_to_json(const SweepReport& report) {
  Json cells = Json::array();
  for (const auto& c : report.cells) {
    cells.push_back(Json{{"method", c.method},
                         {"noise", std::string(to_string(c.noise))},
                         {"snr_db", c.snr_db},
                         {"f1_mean", c.f1_mean},
                         {"f1_std", c.f1_std},
                         {"f1_pooled", c.f1_pooled},
                         {"hrm_mean", c.hrm_mean},
                         {"hrm_std", c.hrm_std},
                         {"trials", c.trials},
                         {"failures", c.failures}});
  }
  return Json{{"format_version", kFormatVersion}, {"cells", cells}};
}

Json error_to_json(std::string_view kind, std::string_view message) {
  return Json{{"format_version", kFormatVersion},
              {"error", {{"kind", kind}, {"message", message}}}};
}

}  // namespace nsca::io
