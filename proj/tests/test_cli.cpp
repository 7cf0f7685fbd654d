#include "funmidas/cli.hpp"
#include "funmidas/evaluation.hpp"
#include "funmidas/fpca.hpp"
#include "funmidas/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace funmidas;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Scratch directory shared by the cases; simulated data is reused.
const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("funmidas_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_config(const std::string& name, const json& j) {
  const fs::path p = scratch() / name;
  io::write_text_file(p, j.dump());
  return p;
}

int run(const std::string& command, const fs::path& config, const std::string& out, std::string* err = nullptr,
        std::optional<std::uint64_t> seed = std::nullopt) {
  cli::Options o;
  o.command = command;
  o.config = config;
  o.out = scratch() / out;
  o.seed = seed;
  std::ostringstream log, e;
  const int rc = cli::run(o, log, e);
  if (err) *err = e.str();
  return rc;
}

json small_dgp() {
  return {{"T", 30}, {"n_x", 4}, {"p_x", 8}, {"micro_n", 400},
          {"beta", {{0.6, 0, -0.4, 0}, {0, 0.5, 0, 0}, {0, 0, 0.3, -0.5}}}};
}

json small_model() { return {{"p_x", 8}, {"n_draws", 100}, {"gibbs", {{"n_draws", 800}, {"n_burn", 300}}}}; }

// Simulated bundle used by estimate and nowcast cases.
const fs::path& simulated() {
  static const fs::path dir = [] {
    const auto cfg = write_config("sim.json", {{"seed", 7}, {"first_year", 1990}, {"dgp", small_dgp()}});
    REQUIRE(run("simulate", cfg, "sim") == cli::kOk);
    return scratch() / "sim";
  }();
  return dir;
}

json data_section() {
  return {{"micro", (simulated() / "micro").string()}, {"indicators", (simulated() / "indicators.csv").string()}};
}

std::string slurp(const fs::path& p) { return io::read_text_file(p); }

json manifest(const std::string& out) { return json::parse(slurp(scratch() / out / "manifest.json")); }

std::size_t data_rows(const fs::path& p) {
  std::istringstream is(slurp(p));
  return io::read_csv(is).rows.size();
}

}  // namespace

TEST_CASE("simulate writes a file set sized by T, T*m and the grid") {
  const auto& dir = simulated();
  std::size_t n_micro = 0, n_dens = 0;
  for (const auto& e : fs::directory_iterator(dir / "micro")) n_micro += e.is_regular_file();
  for (const auto& e : fs::directory_iterator(dir / "densities")) n_dens += e.is_regular_file();
  CHECK(n_micro == 30);
  CHECK(n_dens == 30);
  const auto ind = io::read_indicator_csv(dir / "indicators.csv");
  const int presample = 2;  // p_x = 8 HF lags at m = 4
  CHECK(ind.values.rows() == (30 + presample) * 4);
  CHECK(ind.values.cols() == 4);
  CHECK(ind.first_year == 1990);
  const auto micro = io::read_micro_csv(dir / "micro" / "1992.csv");
  CHECK(micro.at(1992).size() == 400u);
  std::istringstream d(slurp(dir / "densities" / "2021.csv"));
  CHECK(io::read_density_csv(d).grid.n_points == 1001);
  std::istringstream b(slurp(dir / "basis.csv"));
  const auto basis = fpca::read_basis_csv(b);
  CHECK(basis.K() == 3);
  CHECK(basis.tau.n_tau == 1000);

  const auto m = manifest("sim");
  CHECK(m["seed"] == 7);
  CHECK(m["command"] == "simulate");
  // defaults are recorded back
  CHECK(m["config"]["dgp"]["rho"] == 0.5);
  CHECK(m["config"]["dgp"]["grid"]["n_points"] == 1001);
  CHECK(m["config"]["dgp"]["noise_to_signal"] == 0.2);
  CHECK(m["outputs"].size() == 30 + 30 + 4);
  CHECK(m["outputs"]["indicators.csv"] == cli::digest(slurp(dir / "indicators.csv")));
}

TEST_CASE("simulate is a pure function of config and seed") {
  const auto cfg = scratch() / "sim.json";
  simulated();
  REQUIRE(run("simulate", cfg, "sim_again") == cli::kOk);
  CHECK(slurp(scratch() / "sim_again" / "manifest.json") == slurp(simulated() / "manifest.json"));
  CHECK(slurp(scratch() / "sim_again" / "micro" / "2000.csv") == slurp(simulated() / "micro" / "2000.csv"));
  REQUIRE(run("simulate", cfg, "sim_other", nullptr, 8) == cli::kOk);
  CHECK(manifest("sim_other")["seed"] == 8);
  CHECK(slurp(scratch() / "sim_other" / "indicators.csv") != slurp(simulated() / "indicators.csv"));
}

TEST_CASE("schema rejections name the field") {
  std::string err;
  CHECK(run("simulate", write_config("t0.json", {{"dgp", {{"T", 0}}}}), "x", &err) == cli::kConfig);
  CHECK(err.find("T must be") != std::string::npos);
  CHECK(run("simulate", write_config("typo.json", {{"dgp", {{"rhoo", 0.1}}}}), "x", &err) == cli::kConfig);
  CHECK(err.find("dgp.rhoo") != std::string::npos);
  CHECK(run("simulate", write_config("type.json", {{"dgp", {{"T", "many"}}}}), "x", &err) == cli::kConfig);
  CHECK(err.find("dgp.T") != std::string::npos);
  CHECK(run("mc-study", write_config("r0.json", {{"study", {{"reps", 0}}}}), "x", &err) == cli::kConfig);
  CHECK(err.find("study.reps") != std::string::npos);
  CHECK(run("estimate", write_config("nodata.json", json::object()), "x", &err) == cli::kConfig);
  CHECK(err.find("data.micro") != std::string::npos);
  CHECK(run("estimate", write_config("nofile.json", {{"data", {{"micro", "nowhere"}, {"indicators", "x"}}}}), "x",
            &err) == cli::kConfig);
  CHECK(err.find("does not exist") != std::string::npos);
  CHECK(run("launch", {}, "x", &err) == cli::kConfig);
  io::write_text_file(scratch() / "broken.json", "{\"seed\": ");
  CHECK(run("simulate", scratch() / "broken.json", "x", &err) == cli::kConfig);
}

TEST_CASE("numerical failures map to their exit code") {
  std::string err;
  const json dgp = {{"T", 10}, {"micro_n", 50}, {"omega_corr", {{1, 2, 0.95}, {1, 3, 0.95}, {2, 3, -0.95}}}};
  CHECK(run("simulate", write_config("indef.json", {{"dgp", dgp}}), "x", &err) == cli::kNumerical);
  CHECK(err.find("positive definite") != std::string::npos);
}

TEST_CASE("unwritable output directory is an error") {
  const fs::path blocker = scratch() / "file_not_dir";
  io::write_text_file(blocker, "x");
  cli::Options o;
  o.command = "simulate";
  o.out = blocker / "sub";
  std::ostringstream log, err;
  CHECK(cli::run(o, log, err) == cli::kConfig);
  CHECK(err.str().find("output directory") != std::string::npos);
}

TEST_CASE("estimate writes draws, summary and a K x G inclusion map") {
  const auto cfg = write_config("est.json", {{"seed", 3}, {"data", data_section()}, {"model", small_model()}});
  REQUIRE(run("estimate", cfg, "est") == cli::kOk);
  const fs::path dir = scratch() / "est";
  std::istringstream is(slurp(dir / "inclusion.csv"));
  std::vector<std::string> header, labels;
  const Matrix incl = io::read_matrix_csv(is, &header, &labels, true);
  CHECK(incl.rows() == 3);
  CHECK(incl.cols() == 4 + 3);  // one group per indicator and per factor
  CHECK((incl.array() >= 0.0).all());
  CHECK((incl.array() <= 1.0).all());
  CHECK(labels == std::vector<std::string>{"f1", "f2", "f3"});

  std::istringstream ds(slurp(dir / "draws.csv"));
  std::vector<std::string> names;
  const Matrix draws = io::read_matrix_csv(ds, &names);
  CHECK(draws.rows() == 500);
  CHECK(data_rows(dir / "draws_columns.csv") == names.size());
  CHECK(data_rows(dir / "summary.csv") == names.size());

  REQUIRE(run("estimate", cfg, "est_again") == cli::kOk);
  CHECK(slurp(scratch() / "est_again" / "manifest.json") == slurp(dir / "manifest.json"));
}

TEST_CASE("ridge estimation writes a summary and no inclusion map") {
  const auto cfg = write_config(
      "estr.json", {{"seed", 3}, {"estimator", "ridge_almon"}, {"data", data_section()}, {"model", small_model()}});
  REQUIRE(run("estimate", cfg, "estr") == cli::kOk);
  CHECK(!fs::exists(scratch() / "estr" / "inclusion.csv"));
  CHECK(fs::exists(scratch() / "estr" / "summary.csv"));
  CHECK(data_rows(scratch() / "estr" / "draws.csv") == 100);
  std::string err;
  const auto bad = write_config("estv.json", {{"estimator", "var"}, {"data", data_section()}});
  CHECK(run("estimate", bad, "x", &err) == cli::kConfig);
}

TEST_CASE("ingestion errors carry the expected header or the line number") {
  const fs::path hdr = scratch() / "bad_header";
  fs::create_directories(hdr);
  io::write_text_file(hdr / "a.csv", "year,value\n2000,1.0\n");
  std::string err;
  json d = data_section();
  d["micro"] = hdr.string();
  CHECK(run("estimate", write_config("bh.json", {{"data", d}}), "x", &err) == cli::kData);
  CHECK(err.find("period,value") != std::string::npos);

  const fs::path row = scratch() / "bad_row";
  fs::create_directories(row);
  io::write_text_file(row / "a.csv", "period,value\n2000,1.0\n2000,1.5\n2000,oops\n");
  d["micro"] = row.string();
  CHECK(run("estimate", write_config("br.json", {{"data", d}}), "x", &err) == cli::kData);
  CHECK(err.find("line 4") != std::string::npos);

  const fs::path ind = scratch() / "bad_ind.csv";
  io::write_text_file(ind, "date,x1\n2000Q1,1\n2000Q3,2\n");
  d = data_section();
  d["indicators"] = ind.string();
  CHECK(run("estimate", write_config("bi.json", {{"data", d}}), "x", &err) == cli::kData);
  CHECK(err.find("line 3") != std::string::npos);
}

TEST_CASE("transform manifest is applied to the indicators") {
  const fs::path tr = scratch() / "transforms.csv";
  io::write_text_file(tr, "series,transform\nx1,diff\nx2,level\n");
  json d = data_section();
  d["transforms"] = tr.string();
  const auto cfg = write_config("estt.json", {{"seed", 3}, {"data", d}, {"model", small_model()}});
  CHECK(run("estimate", cfg, "estt") == cli::kOk);
  io::write_text_file(tr, "series,transform\nx9,diff\n");
  std::string err;
  CHECK(run("estimate", cfg, "x", &err) == cli::kData);
  CHECK(err.find("x9") != std::string::npos);
}

TEST_CASE("nowcast writes report, audit and overlays reproducibly") {
  const json cfg_json = {{"seed", 5},
                         {"data", data_section()},
                         {"schedule", {{"target_years", {2017, 2018, 2019, 2020, 2021}}}},
                         {"models", {"blasso", "ridge_almon", "var"}},
                         {"model", small_model()}};
  const auto cfg = write_config("now.json", cfg_json);
  REQUIRE(run("nowcast", cfg, "now") == cli::kOk);
  const fs::path dir = scratch() / "now";

  std::istringstream rm(slurp(dir / "report_models.csv"));
  const auto pooled = eval::read_report_csv(rm);
  CHECK(pooled.rows.size() == 3);
  std::istringstream rh(slurp(dir / "report.csv"));
  CHECK(eval::read_report_csv(rh).rows.size() == 9);

  const auto m = manifest("now");
  CHECK(m["results"]["leakage_violations"] == 0);
  CHECK(m["results"]["monotonicity_violations"] == 0);
  CHECK(m["results"]["cells"] == 45);
  CHECK(m["config"]["schedule"]["updates"].size() == 4);

  // every audit row sits at or before its origin
  std::istringstream as(slurp(dir / "audit.csv"));
  const auto audit = io::read_csv(as);
  const int hf = audit.column("max_hf_row"), cut = audit.column("hf_cutoff_row");
  const int lf = audit.column("max_lf_year"), lcut = audit.column("lf_cutoff_year");
  REQUIRE(hf >= 0);
  REQUIRE(lcut >= 0);
  CHECK(!audit.rows.empty());
  for (const auto& r : audit.rows) {
    CHECK(std::stoi(r[hf]) < std::stoi(r[cut]));
    CHECK(std::stoi(r[lf]) <= std::stoi(r[lcut]));
  }

  CHECK(data_rows(dir / "plot_data.csv") == 45u * 1001u);
  std::istringstream fc(slurp(dir / "forecasts" / "2019_July_blasso.csv"));
  CHECK(std::abs(io::read_density_csv(fc).integral() - 1.0) < 1e-6);

  REQUIRE(run("nowcast", cfg, "now_again") == cli::kOk);
  CHECK(slurp(scratch() / "now_again" / "manifest.json") == slurp(dir / "manifest.json"));

  SUBCASE("a target year without data is skipped with a log entry") {
    json j = cfg_json;
    j["schedule"]["target_years"] = {2021, 2035};
    j["models"] = {"var"};
    REQUIRE(run("nowcast", write_config("now2.json", j), "now2") == cli::kOk);
    const auto m2 = manifest("now2");
    CHECK(m2["results"]["cells"] == 1);
    CHECK(m2["results"]["skipped"].size() == 1);
  }
}

TEST_CASE("mc-study smoke run and failure injection") {
  const json base = {{"seed", 2}, {"dgp", small_dgp()}, {"model", small_model()}};
  json j = base;
  j["study"] = {{"reps", 2}};
  REQUIRE(run("mc-study", write_config("mc.json", j), "mc") == cli::kOk);
  std::istringstream ts(slurp(scratch() / "mc" / "table.csv"));
  const auto t = io::read_csv(ts);
  for (const char* c : eval::kMetricColumns) CHECK(t.column(c) >= 0);
  CHECK(t.rows.size() == 3);
  std::istringstream ts2(slurp(scratch() / "mc" / "table.csv"));
  const auto rep = eval::read_report_csv(ts2);
  CHECK(rep.row("blasso", "h0").n_cells == 2);
  CHECK(data_rows(scratch() / "mc" / "long.csv") == 2u * 3u * 21u);

  j["study"] = {{"reps", 3}, {"inject_failures", {1}}};
  REQUIRE(run("mc-study", write_config("mcf.json", j), "mcf") == cli::kOk);
  std::istringstream fs_(slurp(scratch() / "mcf" / "table.csv"));
  const auto rf = eval::read_report_csv(fs_);
  for (const auto& r : rf.rows) CHECK(r.n_excluded == 1);
  CHECK(manifest("mcf")["results"]["failed_reps"] == 1);
  CHECK(data_rows(scratch() / "mcf" / "failures.csv") == 1);

  REQUIRE(run("mc-study", write_config("mcf.json", j), "mcf_again") == cli::kOk);
  CHECK(slurp(scratch() / "mcf_again" / "manifest.json") == slurp(scratch() / "mcf" / "manifest.json"));
}

TEST_CASE("evaluate scores forecast files against realized ones") {
  const fs::path dens = simulated() / "densities";
  json cells = json::array();
  cells.push_back({{"model", "same"}, {"period", "2010"}, {"forecast", (dens / "2010.csv").string()},
                   {"truth", (dens / "2010.csv").string()}});
  cells.push_back({{"model", "lagged"}, {"period", "2010"}, {"forecast", (dens / "2009.csv").string()},
                   {"truth", (dens / "2010.csv").string()}});
  REQUIRE(run("evaluate", write_config("ev.json", {{"cells", cells}}), "ev") == cli::kOk);
  std::istringstream rs(slurp(scratch() / "ev" / "report.csv"));
  const auto r = eval::read_report_csv(rs);
  CHECK(r.row("same").avg_kl() < 1e-12);
  CHECK(r.row("lagged").avg_kl() > 0.0);
  CHECK(data_rows(scratch() / "ev" / "cells.csv") == 2);

  std::string err;
  cells[0]["weight"] = 1;
  CHECK(run("evaluate", write_config("ev_bad.json", {{"cells", cells}}), "x", &err) == cli::kConfig);
  CHECK(err.find("cells[0].weight") != std::string::npos);
  CHECK(run("evaluate", write_config("ev_none.json", json::object()), "x", &err) == cli::kConfig);
}

TEST_CASE("emitted CSVs round-trip through the readers") {
  const fs::path f = simulated() / "indicators.csv";
  const auto ind = io::read_indicator_csv(f);
  std::ostringstream os;
  io::write_indicator_csv(os, ind);
  CHECK(os.str() == slurp(f));

  const fs::path mf = simulated() / "micro" / "2001.csv";
  std::ostringstream mo;
  io::write_micro_csv(mo, io::read_micro_csv(mf));
  CHECK(mo.str() == slurp(mf));

  const fs::path bf = simulated() / "basis.csv";
  std::istringstream bi(slurp(bf));
  std::ostringstream bo;
  fpca::write_basis_csv(bo, fpca::read_basis_csv(bi));
  CHECK(bo.str() == slurp(bf));

  const fs::path df = simulated() / "densities" / "2005.csv";
  std::istringstream di(slurp(df));
  std::ostringstream dout;
  io::write_density_csv(dout, io::read_density_csv(di));
  CHECK(dout.str() == slurp(df));

  run("mc-study", write_config("mc_rt.json", {{"seed", 2}, {"dgp", small_dgp()}, {"model", small_model()},
                                               {"study", {{"reps", 1}, {"estimators", {"var"}}}}}),
      "mc_rt");
  const fs::path tf = scratch() / "mc_rt" / "table.csv";
  std::istringstream ti(slurp(tf));
  std::ostringstream to;
  eval::read_report_csv(ti).write_csv(to);
  CHECK(to.str() == slurp(tf));
}
