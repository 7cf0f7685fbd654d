#include "funmidas/cli.hpp"

#include "funmidas/bayes.hpp"
#include "funmidas/forecast.hpp"
#include "funmidas/io.hpp"
#include "funmidas/montecarlo.hpp"
#include "funmidas/ridge.hpp"

#include <json.hpp>
#include <omp.h>

#include <cstdio>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <type_traits>

namespace funmidas::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string digest(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// One object of the manifest. Every value handed out is recorded, defaults
// included, and keys nobody asked for are rejected by finish().
class Section {
 public:
  Section(json in, std::string name) : in_(std::move(in)), name_(std::move(name)) {
    if (!in_.is_null() && !in_.is_object()) throw ConfigError("field '" + name_ + "' must be an object");
  }

  bool has(const std::string& key) const { return in_.is_object() && in_.contains(key); }
  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  template <class T>
  T get(const std::string& key, const T& def) {
    used_.insert(key);
    T v = has(key) ? convert<T>(in_.at(key), key) : def;
    out_[key] = v;
    return v;
  }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError("missing field '" + qualified(key) + "'");
    return get<T>(key, T{});
  }

  Section child(const std::string& key) {
    used_.insert(key);
    return Section(has(key) ? in_.at(key) : json(), qualified(key));
  }

  void put(const std::string& key, json v) {
    used_.insert(key);
    out_[key] = std::move(v);
  }

  json finish() const {
    if (in_.is_object())
      for (const auto& item : in_.items())
        if (!used_.count(item.key())) throw ConfigError("unknown field '" + qualified(item.key()) + "'");
    return out_.is_null() ? json::object() : out_;
  }

  ConfigError error(const std::string& key, const std::string& what) const {
    return ConfigError("field '" + qualified(key) + "' " + what);
  }

 private:
  template <class T>
  T convert(const json& j, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw error(key, "must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) throw error(key, "must be an integer");
      if (std::is_unsigned_v<T> && !j.is_number_unsigned()) throw error(key, "must be a nonnegative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw error(key, "must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw error(key, "must be a string");
    }
    try {
      return j.get<T>();
    } catch (const json::exception&) {
      throw error(key, "has the wrong type");
    }
  }

  json in_;
  std::string name_;
  json out_;
  std::set<std::string> used_;
};

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::vector<std::vector<double>> rows_of(const Matrix& m) {
  std::vector<std::vector<double>> r;
  for (Eigen::Index i = 0; i < m.rows(); ++i) r.push_back(to_std(m.row(i).transpose()));
  return r;
}

Matrix from_rows(const std::vector<std::vector<double>>& r, const Section& s, const std::string& key) {
  if (r.empty()) throw s.error(key, "must not be empty");
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r[0].size()));
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i].size() != r[0].size()) throw s.error(key, "has rows of different lengths");
    m.row(static_cast<Eigen::Index>(i)) = to_eigen(r[i]).transpose();
  }
  return m;
}

dist::SupportGrid read_grid(Section s, Section& parent, const std::string& key) {
  const double lo = s.get("lower", 0.0);
  const double hi = s.get("upper", 10.0);
  const int n = s.get("n_points", 1001);
  if (!(hi > lo)) throw s.error("upper", "must exceed lower");
  if (n < 3) throw s.error("n_points", "must be at least 3");
  parent.put(key, s.finish());
  return dist::SupportGrid(lo, hi, n);
}

dist::TauGrid read_tau(Section s, Section& parent, const std::string& key) {
  const double delta = s.get("delta", 0.005);
  const int n = s.get("n_tau", 1000);
  if (!(delta > 0.0 && delta < 0.5)) throw s.error("delta", "must lie in (0, 0.5)");
  if (n < 3) throw s.error("n_tau", "must be at least 3");
  parent.put(key, s.finish());
  return dist::TauGrid(delta, n);
}

mc::DGPConfig read_dgp(Section& root) {
  Section s = root.child("dgp");
  mc::DGPConfig c;
  c.T = s.get("T", c.T);
  c.n_x = s.get("n_x", c.n_x);
  c.p_x = s.get("p_x", c.p_x);
  c.rho = s.get("rho", c.rho);
  c.mu_hf = s.get("mu_hf", c.mu_hf);
  c.hf_cross_corr = s.get("hf_cross_corr", c.hf_cross_corr);
  c.hf_burn_in = s.get("hf_burn_in", c.hf_burn_in);
  c.factor_burn_in = s.get("factor_burn_in", c.factor_burn_in);
  c.noise_to_signal = s.get("noise_to_signal", c.noise_to_signal);
  c.hf_signal_only = s.get("hf_signal_only", c.hf_signal_only);
  c.lqd_scale = s.get("lqd_scale", c.lqd_scale);
  c.micro_n = s.get("micro_n", c.micro_n);
  c.direct_density = s.get("direct_density", c.direct_density);

  std::vector<std::vector<double>> beta;
  for (const auto& b : c.beta) beta.push_back(to_std(b));
  beta = s.get("beta", beta);
  c.beta.clear();
  for (const auto& b : beta) c.beta.push_back(to_eigen(b));
  c.K = static_cast<int>(c.beta.size());
  c.Phi1 = from_rows(s.get("Phi1", rows_of(c.Phi1)), s, "Phi1");
  c.Phi2 = from_rows(s.get("Phi2", rows_of(c.Phi2)), s, "Phi2");
  c.alpha = to_eigen(s.get("alpha", std::vector<double>(static_cast<std::size_t>(c.K), 0.0)));

  const auto w = s.get("weight_params", std::vector<double>{c.weight_params[0], c.weight_params[1]});
  if (w.size() != 2) throw s.error("weight_params", "needs two entries");
  c.weight_params = {w[0], w[1]};

  std::vector<std::vector<double>> corr;
  for (const auto& [ij, r] : c.omega_corr) corr.push_back({ij.first + 1.0, ij.second + 1.0, r});
  corr = s.get("omega_corr", corr);
  c.omega_corr.clear();
  for (const auto& e : corr) {
    if (e.size() != 3 || e[0] != std::floor(e[0]) || e[1] != std::floor(e[1]) || e[0] == e[1])
      throw s.error("omega_corr", "entries must be [i, j, correlation] with distinct 1-based i, j");
    c.omega_corr[{static_cast<int>(e[0]) - 1, static_cast<int>(e[1]) - 1}] = e[2];
  }

  Section sk = s.child("skewt");
  c.skewt.location = sk.get("location", c.skewt.location);
  c.skewt.scale = sk.get("scale", c.skewt.scale);
  c.skewt.shape = sk.get("shape", c.skewt.shape);
  c.skewt.df = sk.get("df", c.skewt.df);
  s.put("skewt", sk.finish());
  c.grid = read_grid(s.child("grid"), s, "grid");
  c.tau = read_tau(s.child("tau"), s, "tau");
  s.put("m", c.m);
  s.put("K", c.K);
  s.put("p_q", c.p_q);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("dgp: ") + e.what());
  }
  root.put("dgp", s.finish());
  return c;
}

forecast::ModelSettings read_model_settings(Section& root) {
  Section s = root.child("model");
  forecast::ModelSettings st;
  st.lag.p_x = s.get("p_x", st.lag.p_x);
  st.lag.p_q = s.get("p_q", st.lag.p_q);
  st.almon_p = s.get("almon_p", st.almon_p);
  st.almon_r = s.get("almon_r", st.almon_r);
  st.var_p = s.get("var_p", st.var_p);
  st.n_draws = s.get("n_draws", st.n_draws);
  st.min_train = s.get("min_train", st.min_train);
  st.ridge_optimize = s.get("ridge_optimize", st.ridge_optimize);
  if (st.n_draws < 1) throw s.error("n_draws", "must be positive");

  Section g = s.child("gibbs");
  auto& gs = st.prior.gibbs;
  gs.n_draws = g.get("n_draws", gs.n_draws);
  gs.n_burn = g.get("n_burn", gs.n_burn);
  gs.thin = g.get("thin", gs.thin);
  s.put("gibbs", g.finish());

  Section p = s.child("prior");
  auto& pr = st.prior;
  pr.spike = p.get("spike", pr.spike);
  pr.v0 = p.get("v0", pr.v0);
  pr.v0_index_rule = p.get("v0_by_equation", pr.v0_index_rule);
  pr.c = p.get("c", pr.c);
  pr.d = p.get("d", pr.d);
  pr.nu = p.get("nu", pr.nu);
  pr.a2 = p.get("a2", pr.a2);
  pr.b2 = p.get("b2", pr.b2);
  pr.lambda2_init = p.get("lambda2_init", pr.lambda2_init);
  pr.intercept_var = p.get("intercept_var", pr.intercept_var);
  const auto mode = p.get("lambda_mode", std::string("gamma"));
  if (mode == "gamma")
    pr.lambda_mode = bayes::LambdaMode::HierarchicalGamma;
  else if (mode == "adaptive_stub")
    pr.lambda_mode = bayes::LambdaMode::AdaptiveStub;
  else
    throw p.error("lambda_mode", "must be 'gamma' or 'adaptive_stub'");
  s.put("prior", p.finish());

  try {
    st.lag.validate();
    gs.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  root.put("model", s.finish());
  return st;
}

// ---------------------------------------------------------------- files

class Output {
 public:
  explicit Output(fs::path root) : root_(std::move(root)) {
    if (root_.empty()) throw ConfigError("no output directory given (--out)");
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec || !fs::is_directory(root_))
      throw ConfigError("cannot create output directory " + root_.string() + (ec ? ": " + ec.message() : ""));
  }

  void write(const std::string& rel, const std::string& content) {
    const fs::path p = root_ / rel;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    try {
      io::write_text_file(p, content);
    } catch (const DataError&) {
      throw ConfigError("output directory " + root_.string() + " is not writable (" + rel + ")");
    }
    digests_[rel] = digest(content);
  }

  template <class F>
  void write_with(const std::string& rel, F&& fill) {
    std::ostringstream os;
    fill(os);
    write(rel, os.str());
  }

  const std::map<std::string, std::string>& digests() const { return digests_; }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::map<std::string, std::string> digests_;
};

struct Context {
  json config;       // parsed manifest
  fs::path base;     // relative input paths resolve against the manifest's directory
  std::uint64_t seed = 1;
  std::map<std::string, std::string> inputs;  // path as given -> digest
};

fs::path input_path(Context& ctx, Section& s, const std::string& key, bool required = true) {
  if (!required && !s.has(key)) return {};
  const auto given = s.require<std::string>(key);
  fs::path p = given;
  if (p.is_relative()) p = ctx.base / p;
  if (!fs::exists(p)) throw s.error(key, "names a path that does not exist: " + given);
  if (fs::is_regular_file(p))
    ctx.inputs[given] = digest(io::read_text_file(p));
  else if (fs::is_directory(p))
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file()) ctx.inputs[given + "/" + e.path().filename().string()] = digest(io::read_text_file(e.path()));
  return p;
}

std::map<int, std::vector<double>> load_micro(const fs::path& p) {
  if (!fs::is_directory(p)) return io::read_micro_csv(p);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(p))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .csv micro files in " + p.string());
  std::map<int, std::vector<double>> all;
  for (const auto& f : files) {
    std::map<int, std::vector<double>> one;
    try {
      one = io::read_micro_csv(f);
    } catch (const DataError& e) {
      throw DataError(f.filename().string() + ": " + e.what());
    }
    for (auto& [period, v] : one)
      if (!all.emplace(period, std::move(v)).second)
        throw DataError("period " + std::to_string(period) + " appears in more than one micro file");
  }
  return all;
}

// Optional asinh normalization by GDP per capita: a `period,value` file with
// one value per period.
void normalize_micro(std::map<int, std::vector<double>>& micro, const fs::path& gdp_path) {
  const auto gdp = io::read_micro_csv(gdp_path);
  for (auto& [year, v] : micro) {
    const auto it = gdp.find(year);
    if (it == gdp.end() || it->second.size() != 1)
      throw DataError("GDP per capita file needs exactly one value for " + std::to_string(year));
    for (double& x : v) x = dist::asinh_normalize(x, it->second[0]);
  }
}

forecast::DataBundle load_bundle(Context& ctx, Section& s) {
  forecast::DataBundle b;
  b.micro = load_micro(input_path(ctx, s, "micro"));
  const fs::path gdp = input_path(ctx, s, "gdp_per_capita", false);
  if (!gdp.empty()) normalize_micro(b.micro, gdp);
  b.indicators = io::read_indicator_csv(input_path(ctx, s, "indicators"));
  const fs::path tr = input_path(ctx, s, "transforms", false);
  if (!tr.empty()) {
    const auto t = io::read_csv_file(tr);
    const int cs = t.column("series"), ct = t.column("transform");
    if (cs < 0 || ct < 0 || t.header.size() != 2)
      throw DataError(tr.string() + ": expected header 'series,transform'");
    std::map<std::string, io::SeriesTransform> manifest;
    for (const auto& r : t.rows) manifest[r[cs]] = io::parse_transform(r[ct]);
    for (const auto& [name, _] : manifest)
      if (std::find(b.indicators.names.begin(), b.indicators.names.end(), name) == b.indicators.names.end())
        throw DataError(tr.string() + ": series '" + name + "' is not in the indicator file");
    b.indicators = io::apply_transforms(b.indicators, manifest);
  }
  return b;
}

std::vector<std::string> period_labels(int first, int n) {
  std::vector<std::string> r;
  for (int i = 0; i < n; ++i) r.push_back(std::to_string(first + i));
  return r;
}

std::vector<std::string> factor_names(int K) {
  std::vector<std::string> r;
  for (int i = 0; i < K; ++i) r.push_back("f" + std::to_string(i + 1));
  return r;
}

void write_summary(std::ostream& os, const std::vector<bayes::SummaryRow>& rows) {
  os << "name,mean,sd,q05,q50,q95\n";
  for (const auto& r : rows)
    os << r.name << ',' << io::format_double(r.mean) << ',' << io::format_double(r.sd) << ','
       << io::format_double(r.q05) << ',' << io::format_double(r.q50) << ',' << io::format_double(r.q95) << '\n';
}

void write_columns(std::ostream& os, const std::vector<std::string>& names) {
  os << "index,name,block\n";
  for (std::size_t i = 0; i < names.size(); ++i) os << i << ',' << names[i] << ',' << names[i].substr(0, names[i].find('_')) << '\n';
}

void write_manifest(Output& out, const std::string& command, const Context& ctx, const json& resolved, json extra = {}) {
  json m;
  m["command"] = command;
  m["seed"] = ctx.seed;
  m["config"] = resolved;
  m["inputs"] = ctx.inputs;
  m["outputs"] = out.digests();
  if (!extra.is_null()) m["results"] = std::move(extra);
  out.write("manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------- simulate

void cmd_simulate(Context& ctx, Section& root, Output& out, std::ostream& log) {
  const auto cfg_first = root.get("first_year", 1980);
  mc::DGPConfig cfg = read_dgp(root);
  cfg.seed = ctx.seed;
  if (cfg.direct_density) throw ConfigError("dgp.direct_density: simulate writes micro samples and needs it false");
  const json resolved = root.finish();

  const auto basis = mc::make_basis_skewt(cfg);
  const Matrix omega = mc::calibrate_omega(cfg);
  Rng rng(cfg.seed);
  const auto w = mc::simulate_world(cfg, basis, omega, rng);
  const auto bundle = mc::make_bundle(w, cfg_first);

  out.write_with("indicators.csv", [&](std::ostream& os) { io::write_indicator_csv(os, bundle.indicators); });
  for (const auto& [year, samples] : bundle.micro)
    out.write_with("micro/" + std::to_string(year) + ".csv",
                   [&](std::ostream& os) { io::write_micro_csv(os, {{year, samples}}); });
  const int first_sample = cfg_first + w.first_period();
  for (std::size_t t = 0; t < w.densities.size(); ++t)
    out.write_with("densities/" + std::to_string(first_sample + static_cast<int>(t)) + ".csv",
                   [&](std::ostream& os) { io::write_density_csv(os, w.densities[t]); });
  out.write_with("factors.csv", [&](std::ostream& os) {
    io::write_matrix_csv(os, factor_names(cfg.K), w.factors, period_labels(cfg_first, static_cast<int>(w.factors.rows())),
                         "period");
  });
  out.write_with("basis.csv", [&](std::ostream& os) { fpca::write_basis_csv(os, basis); });
  out.write_with("omega.csv", [&](std::ostream& os) { io::write_matrix_csv(os, factor_names(cfg.K), omega); });
  json res;
  res["sample_periods"] = cfg.T;
  res["first_sample_period"] = first_sample;
  res["indicator_rows"] = bundle.indicators.values.rows();
  res["explained_variance"] = fpca::explained_variance(basis);
  write_manifest(out, "simulate", ctx, resolved, res);
  log << "simulate: " << cfg.T << " periods, " << bundle.indicators.values.rows() << " indicator rows -> "
      << out.root().string() << "\n";
}

// ---------------------------------------------------------------- estimate

void cmd_estimate(Context& ctx, Section& root, Output& out, std::ostream& log) {
  Section data = root.child("data");
  const auto bundle = load_bundle(ctx, data);
  root.put("data", data.finish());
  const auto estimator = root.get("estimator", std::string("blasso"));
  const auto kind = forecast::parse_model(estimator);
  if (!forecast::uses_high_frequency(kind))
    throw ConfigError("field 'estimator' must be blasso, ridge or ridge_almon");
  const int K = root.get("K", 3);
  if (K < 1) throw ConfigError("field 'K' must be positive");
  const auto grid = read_grid(root.child("grid"), root, "grid");
  const auto tau = read_tau(root.child("tau"), root, "tau");
  const double bw = root.get("bandwidth", 0.0);
  auto settings = read_model_settings(root);
  const json resolved = root.finish();

  // Calendar: LF period k is year base + k, HF rows start at its first quarter.
  const auto& ind = bundle.indicators;
  const int skip = (5 - ind.first_quarter) % 4;
  const int base = ind.first_year + (skip > 0 ? 1 : 0);
  if (ind.values.rows() <= skip + 3) throw DataError("indicator file has no complete year");
  midas::MixedFrequencyPanel panel;
  panel.m = 4;
  panel.names = ind.names;
  panel.hf = ind.values.bottomRows(ind.values.rows() - skip);
  const int n_lf = static_cast<int>(panel.hf.rows()) / 4;

  std::vector<dist::LQDCurve> curves;
  std::vector<int> years;
  for (const auto& [year, samples] : bundle.micro) {
    if (year < base || year >= base + n_lf) {
      log << "estimate: distribution of " << year << " lies outside the indicator calendar; ignored\n";
      continue;
    }
    for (double v : samples)
      if (v < grid.lower || v > grid.upper)
        throw DataError("micro value " + io::format_double(v) + " in " + std::to_string(year) +
                        " lies outside the support grid");
    const auto d = dist::kde_estimate(samples, grid, bw > 0.0 ? std::optional<double>(bw) : std::nullopt);
    curves.push_back(dist::lqd_from_density(d, tau));
    years.push_back(year);
  }
  if (static_cast<int>(curves.size()) <= K)
    throw DataError(std::to_string(curves.size()) + " usable distributions; the FPCA needs more than K = " +
                    std::to_string(K));
  std::vector<std::string> labels;
  for (int y : years) labels.push_back(std::to_string(y));
  auto [basis, scores] = fpca::fpca_decompose(fpca::LQDPanel::from_curves(curves, labels), K);
  Matrix factors = Matrix::Constant(n_lf, K, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < years.size(); ++r)
    factors.row(years[r] - base) = scores.scores.row(static_cast<Eigen::Index>(r));

  const auto& spec = settings.lag;
  std::vector<int> periods;
  for (int k = spec.first_feasible_period(); k < n_lf; ++k) {
    bool ok = factors.row(k).allFinite();
    for (int l = 1; l <= spec.p_q && ok; ++l) ok = k - l >= 0 && factors.row(k - l).allFinite();
    if (ok) periods.push_back(k);
  }
  if (static_cast<int>(periods.size()) < settings.min_train)
    throw DataError(std::to_string(periods.size()) + " estimation rows; needs at least " +
                    std::to_string(settings.min_train));
  const midas::DesignOptions opt = kind == forecast::ModelKind::Ridge
                                       ? midas::DesignOptions{}
                                       : midas::default_design_options(spec, settings.almon_p, settings.almon_r);
  const auto design = midas::build_design(panel, factors, spec, opt, periods);
  for (const auto& w : design.warnings) log << "estimate: " << w << "\n";
  Matrix F(static_cast<Eigen::Index>(periods.size()), K);
  for (std::size_t r = 0; r < periods.size(); ++r) F.row(static_cast<Eigen::Index>(r)) = factors.row(periods[r]);

  Rng rng(ctx.seed);
  Matrix table;
  std::vector<std::string> names;
  json res;
  if (kind == forecast::ModelKind::Blasso) {
    bayes::SurMidasGibbs gibbs(design.Z, design.layout, F, settings.prior);
    auto draws = gibbs.run(rng);
    table = draws.table();
    names = draws.column_names();
    const Matrix incl = draws.inclusion_probabilities();
    out.write_with("inclusion.csv", [&](std::ostream& os) {
      std::vector<std::string> groups;
      for (const auto& g : design.layout.groups) groups.push_back(g.name);
      io::write_matrix_csv(os, groups, incl, factor_names(K), "factor");
    });
    res["retained_draws"] = draws.n_draws();
  } else {
    Matrix X(design.Z.rows(), design.Z.cols() + 1);
    X.col(0).setOnes();
    X.rightCols(design.Z.cols()) = design.Z;
    const auto setup = bayes::ridge_setup(design, F, spec, true, kind == forecast::ModelKind::RidgeAlmon);
    bayes::RidgeHyper h = settings.ridge_init;
    if (settings.ridge_optimize) h = bayes::ridge_ml_optimize(X, F, setup, h).hyper;
    const bayes::RidgePosterior post(X, F, setup, h);
    const int P = static_cast<int>(X.cols());
    std::vector<std::string> cols{"intercept"};
    for (const auto& g : design.layout.groups)
      for (int c = 0; c < g.size; ++c) cols.push_back(g.name + "_" + std::to_string(c + 1));
    for (int i = 0; i < K; ++i)
      for (int c = 0; c < P; ++c) names.push_back("theta_" + std::to_string(i + 1) + "_" + cols[c]);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j <= i; ++j) names.push_back("omega_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    table.resize(settings.n_draws, static_cast<Eigen::Index>(names.size()));
    for (int d = 0; d < settings.n_draws; ++d) {
      Matrix omega;
      const Matrix phi = post.draw_phi(rng, &omega);
      int c = 0;
      for (int i = 0; i < K; ++i)
        for (int r = 0; r < P; ++r) table(d, c++) = phi(r, i);
      for (int i = 0; i < K; ++i)
        for (int j = 0; j <= i; ++j) table(d, c++) = omega(i, j);
    }
    res["ridge_hyper"] = h.theta;
    res["log_marginal_likelihood"] = post.log_marginal_likelihood();
  }

  out.write_with("draws.csv", [&](std::ostream& os) { io::write_matrix_csv(os, names, table); });
  out.write_with("draws_columns.csv", [&](std::ostream& os) { write_columns(os, names); });
  out.write_with("summary.csv", [&](std::ostream& os) { write_summary(os, bayes::summarize(table, names)); });
  out.write_with("basis.csv", [&](std::ostream& os) { fpca::write_basis_csv(os, basis); });
  out.write_with("factors.csv", [&](std::ostream& os) {
    io::write_matrix_csv(os, factor_names(K), scores.scores, labels, "period");
  });
  res["estimation_rows"] = periods.size();
  res["first_estimation_period"] = base + periods.front();
  res["explained_variance"] = fpca::explained_variance(basis);
  res["design_columns"] = design.Z.cols();
  res["rank_deficient"] = design.rank_deficient;
  write_manifest(out, "estimate", ctx, resolved, res);
  log << "estimate: " << estimator << " on " << periods.size() << " periods, " << table.rows() << " draws -> "
      << out.root().string() << "\n";
}

// ---------------------------------------------------------------- nowcast

void cmd_nowcast(Context& ctx, Section& root, Output& out, std::ostream& log) {
  Section data = root.child("data");
  const auto bundle = load_bundle(ctx, data);
  root.put("data", data.finish());

  forecast::NowcastSchedule sched;
  Section sc = root.child("schedule");
  sched.target_years = sc.require<std::vector<int>>("target_years");
  json ups = json::array();
  for (const auto& u : sched.updates) ups.push_back({{"label", u.label}, {"h_steps", u.h_steps}});
  if (sc.has("updates")) {
    const json given = sc.get<json>("updates", ups);
    sched.updates.clear();
    for (const auto& u : given) {
      if (!u.is_object() || !u.contains("label") || !u.contains("h_steps") || !u["label"].is_string() ||
          !u["h_steps"].is_number_integer() || u.size() != 2)
        throw sc.error("updates", "entries must be {\"label\": string, \"h_steps\": integer}");
      sched.updates.push_back({u["label"].get<std::string>(), u["h_steps"].get<int>()});
    }
  } else {
    sc.put("updates", ups);
  }
  try {
    sched.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  root.put("schedule", sc.finish());

  forecast::NowcastConfig cfg;
  std::vector<std::string> models;
  for (auto m : cfg.models) models.push_back(forecast::model_name(m));
  models = root.get("models", models);
  cfg.models.clear();
  for (const auto& m : models) cfg.models.push_back(forecast::parse_model(m));
  cfg.K = root.get("K", cfg.K);
  cfg.grid = read_grid(root.child("grid"), root, "grid");
  cfg.tau = read_tau(root.child("tau"), root, "tau");
  const double bw = root.get("bandwidth", 0.0);
  if (bw > 0.0) cfg.bandwidth = bw;
  cfg.settings = read_model_settings(root);
  cfg.seed = ctx.seed;
  const json resolved = root.finish();

  const auto r = forecast::run_nowcast_exercise(bundle, sched, cfg);
  for (const auto& s : r.skipped) log << "nowcast: " << s << "\n";

  out.write_with("report.csv", [&](std::ostream& os) { r.report.write_csv(os); });
  std::vector<eval::CellMetrics> pooled;
  for (const auto& c : r.cells) {
    pooled.push_back(c.metrics);
    pooled.back().horizon.clear();
  }
  out.write_with("report_models.csv", [&](std::ostream& os) { eval::assemble_report(pooled).write_csv(os); });
  out.write_with("audit.csv", [&](std::ostream& os) { forecast::write_audit_csv(os, r.audit); });
  out.write_with("cells.csv", [&](std::ostream& os) {
    os << "year,update,model,kl,hd,qs5,qs20,qs50,qs80,qs95\n";
    for (const auto& c : r.cells) {
      os << c.year << ',' << c.update << ',' << forecast::model_name(c.model) << ',' << io::format_double(c.metrics.kl)
         << ',' << io::format_double(c.metrics.hd);
      for (double q : c.metrics.qs) os << ',' << io::format_double(q);
      os << '\n';
    }
  });
  out.write_with("quantiles.csv", [&](std::ostream& os) {
    os << "year,update,model,level,value\n";
    for (const auto& c : r.cells)
      for (std::size_t i = 0; i < c.forecast.levels.size(); ++i)
        os << c.year << ',' << c.update << ',' << forecast::model_name(c.model) << ','
           << io::format_double(c.forecast.levels[i]) << ',' << io::format_double(c.forecast.quantiles[i]) << '\n';
  });
  // Predicted-vs-realized overlays: the realized curve is the same KDE the scores use.
  std::map<int, dist::DensityOnGrid> truth;
  for (const auto& c : r.cells)
    if (!truth.count(c.year)) truth.emplace(c.year, dist::kde_estimate(bundle.micro.at(c.year), cfg.grid, cfg.bandwidth));
  out.write_with("plot_data.csv", [&](std::ostream& os) {
    os << "year,update,model,grid_point,predicted,actual\n";
    for (const auto& c : r.cells) {
      const auto& p = c.forecast.density_point;
      const auto& a = truth.at(c.year);
      for (int i = 0; i < p.grid.n_points; ++i)
        os << c.year << ',' << c.update << ',' << forecast::model_name(c.model) << ','
           << io::format_double(p.grid.point(i)) << ',' << io::format_double(p.values[i]) << ','
           << io::format_double(a.values[i]) << '\n';
    }
  });
  for (const auto& c : r.cells)
    out.write_with("forecasts/" + std::to_string(c.year) + "_" + c.update + "_" + forecast::model_name(c.model) + ".csv",
                   [&](std::ostream& os) { io::write_density_csv(os, c.forecast.density_point); });

  const auto leaks = forecast::leakage_violations(r.audit);
  const auto order = forecast::monotonicity_violations(r.audit);
  json res;
  res["cells"] = r.cells.size();
  res["audit_rows"] = r.audit.size();
  res["leakage_violations"] = leaks.size();
  res["monotonicity_violations"] = order.size();
  res["skipped"] = r.skipped;
  write_manifest(out, "nowcast", ctx, resolved, res);
  log << "nowcast: " << r.cells.size() << " cells, " << r.report.rows.size() << " report rows -> "
      << out.root().string() << "\n";
  if (!leaks.empty() || !order.empty())
    throw NumericalError("audit found " + std::to_string(leaks.size()) + " rows past their origin and " +
                         std::to_string(order.size()) + " monotonicity violations");
}

// ---------------------------------------------------------------- mc-study

void cmd_mc_study(Context& ctx, Section& root, Output& out, std::ostream& log) {
  Section st = root.child("study");
  const int reps = st.get("reps", 500);
  if (reps < 1) throw st.error("reps", "must be at least 1");
  std::vector<std::string> names;
  for (const auto& e : mc::default_estimators()) names.push_back(e.name);
  names = st.get("estimators", names);
  mc::StudyOptions opt;
  opt.estimators.clear();
  for (const auto& n : names) opt.estimators.push_back(mc::parse_estimator(n));
  if (opt.estimators.empty()) throw st.error("estimators", "must not be empty");
  opt.inject_failures = st.get("inject_failures", std::vector<int>{});
  const int recovery_reps = st.get("recovery_reps", 0);
  if (recovery_reps < 0) throw st.error("recovery_reps", "must be nonnegative");
  root.put("study", st.finish());
  mc::DGPConfig cfg = read_dgp(root);
  cfg.reps = reps;
  cfg.seed = ctx.seed;
  opt.settings = read_model_settings(root);
  const json resolved = root.finish();

  const auto r = mc::run_mc_study(cfg, opt);
  out.write_with("table.csv", [&](std::ostream& os) { r.report.write_csv(os); });
  out.write_with("long.csv", [&](std::ostream& os) { mc::write_long_csv(os, r); });
  out.write_with("failures.csv", [&](std::ostream& os) {
    os << "rep,reason\n";
    for (const auto& f : r.failures) {
      std::string reason = f.reason;
      std::replace(reason.begin(), reason.end(), ',', ';');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      os << f.rep << ',' << reason << '\n';
    }
  });
  json res;
  res["reps"] = r.reps;
  res["failed_reps"] = r.n_failed();
  for (const auto& row : r.report.rows) res["avg_kl"][row.model] = row.avg_kl();
  if (recovery_reps > 0) {
    const auto rec = mc::selection_recovery(cfg, recovery_reps, opt.settings);
    out.write_with("recovery_inclusion.csv", [&](std::ostream& os) {
      std::vector<std::string> cols;
      for (int j = 0; j < cfg.n_x; ++j) cols.push_back("x" + std::to_string(j + 1));
      io::write_matrix_csv(os, cols, rec.inclusion, factor_names(cfg.K), "factor");
    });
    res["recovery_active_share"] = rec.active_share();
    res["recovery_inactive_share"] = rec.inactive_share();
  }
  write_manifest(out, "mc-study", ctx, resolved, res);
  log << "mc-study: " << r.reps << " replications, " << r.n_failed() << " excluded -> " << out.root().string() << "\n";
}

// ---------------------------------------------------------------- evaluate

void cmd_evaluate(Context& ctx, Section& root, Output& out, std::ostream& log) {
  eval::EvalOptions eo;
  const auto kl = root.get("kl_direction", std::string("truth_first"));
  if (kl == "truth_first")
    eo.kl_direction = eval::KLDirection::TruthFirst;
  else if (kl == "forecast_first")
    eo.kl_direction = eval::KLDirection::ForecastFirst;
  else
    throw ConfigError("field 'kl_direction' must be 'truth_first' or 'forecast_first'");
  const auto ql = root.get("quantile_loss", std::string("absolute"));
  if (ql == "absolute")
    eo.quantile_loss = eval::QuantileLoss::Absolute;
  else if (ql == "pinball")
    eo.quantile_loss = eval::QuantileLoss::Pinball;
  else
    throw ConfigError("field 'quantile_loss' must be 'absolute' or 'pinball'");

  if (!root.has("cells")) throw ConfigError("missing field 'cells'");
  const json given = root.get<json>("cells", json::array());
  if (!given.is_array() || given.empty()) throw ConfigError("field 'cells' must be a nonempty array");
  std::vector<eval::CellMetrics> cells;
  for (std::size_t i = 0; i < given.size(); ++i) {
    Section c(given[i], "cells[" + std::to_string(i) + "]");
    const auto model = c.require<std::string>("model");
    const auto horizon = c.get("horizon", std::string());
    const auto period = c.require<std::string>("period");
    const fs::path fp = input_path(ctx, c, "forecast");
    const fs::path tp = input_path(ctx, c, "truth");
    c.finish();
    std::istringstream fs_(io::read_text_file(fp)), ts(io::read_text_file(tp));
    dist::DensityOnGrid pred, truth;
    try {
      pred = io::read_density_csv(fs_);
      truth = io::read_density_csv(ts);
    } catch (const DataError& e) {
      throw DataError("cells[" + std::to_string(i) + "]: " + e.what());
    }
    cells.push_back(eval::score_cell(pred, truth, model, horizon, period, eo));
  }
  const json resolved = root.finish();

  out.write_with("cells.csv", [&](std::ostream& os) {
    os << "model,horizon,period,kl,hd,qs5,qs20,qs50,qs80,qs95";
    for (const char* f : {"mean", "variance", "skewness", "kurtosis", "iqr", "gini", "cv"}) os << ",pred_" << f << ",true_" << f;
    os << '\n';
    for (const auto& c : cells) {
      os << c.model << ',' << c.horizon << ',' << c.period << ',' << io::format_double(c.kl) << ','
         << io::format_double(c.hd);
      for (double q : c.qs) os << ',' << io::format_double(q);
      for (auto f : eval::kMomentFields)
        os << ',' << io::format_double(eval::moment_value(c.pred_moments, f)) << ','
           << io::format_double(eval::moment_value(c.truth_moments, f));
      os << '\n';
    }
  });
  const auto report = eval::assemble_report(cells);
  out.write_with("report.csv", [&](std::ostream& os) { report.write_csv(os); });
  json res;
  res["cells"] = cells.size();
  res["report_rows"] = report.rows.size();
  write_manifest(out, "evaluate", ctx, resolved, res);
  log << "evaluate: " << cells.size() << " cells, " << report.rows.size() << " report rows -> " << out.root().string()
      << "\n";
}

}  // namespace

void run_command(const Options& opt, std::ostream& log) {
  Context ctx;
  if (!opt.config.empty()) {
    const std::string text = [&] {
      try {
        return io::read_text_file(opt.config);
      } catch (const DataError&) {
        throw ConfigError("cannot read config " + opt.config.string());
      }
    }();
    try {
      ctx.config = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("config " + opt.config.string() + " is not valid JSON: " + e.what());
    }
    ctx.base = opt.config.parent_path();
  }
  if (!ctx.config.is_null() && !ctx.config.is_object()) throw ConfigError("config must be a JSON object");
  if (opt.threads < 0) throw ConfigError("--threads must be nonnegative");
  if (opt.threads > 0) omp_set_num_threads(opt.threads);

  Section root(ctx.config, "");
  ctx.seed = root.get<std::uint64_t>("seed", 1);
  if (opt.seed) {
    ctx.seed = *opt.seed;
    root.put("seed", ctx.seed);
  }

  using Fn = void (*)(Context&, Section&, Output&, std::ostream&);
  static const std::map<std::string, Fn> commands{{"simulate", cmd_simulate},
                                                  {"estimate", cmd_estimate},
                                                  {"nowcast", cmd_nowcast},
                                                  {"mc-study", cmd_mc_study},
                                                  {"evaluate", cmd_evaluate}};
  const auto it = commands.find(opt.command);
  if (it == commands.end()) throw ConfigError("unknown command '" + opt.command + "'");
  Output out(opt.out);
  it->second(ctx, root, out, log);
}

int run(const Options& opt, std::ostream& log, std::ostream& err) {
  try {
    run_command(opt, log);
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace funmidas::cli
