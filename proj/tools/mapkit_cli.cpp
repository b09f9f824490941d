// Command-line front end: load a model file, run solvers, diagnostics and
// simulations, emit JSON/CSV, and run the identity-verification suite.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "mapkit/extrema.hpp"
#include "mapkit/fluctuation.hpp"
#include "mapkit/linalg.hpp"
#include "mapkit/mmbm.hpp"
#include "mapkit/model_io.hpp"
#include "mapkit/sim.hpp"
#include "mapkit/verify.hpp"
#include "mapkit/version.hpp"

namespace {

using json = nlohmann::json;
using namespace mapkit;

struct Cli {
  std::string model_path;
  std::string format = "json";
  std::string output;
  double tol = 1e-12;
  long max_iter = 1'000'000;
  int horizon = 30;
  uint64_t seed = 1;
  long paths = 100000;
  double dt = 1e-3;
  double drift_tol = kDriftTol;

  // command parameters
  double a = 0.0, b = 0.0, x = 1.0, z = 0.5;
  long k = 0, l = 1, m = 1, u = 0;
  std::string direction = "max";
  bool strip_mode = false;
  std::string kind = "unilateral";
  std::string target;
  long random_models = 0;
  double tail_target = 1e-10;
};

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

void csv_matrix(std::ostream& os, const std::string& name, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      os << name << ',' << i << ',' << j << ',' << fmt17(m(i, j)) << '\n';
    }
  }
}

SolveOptions solve_options(const Cli& cli) { return {cli.tol, cli.max_iter, cli.drift_tol}; }

// zero-drift models converge sublinearly, so the default residual target is
// relaxed there; an explicit --tol always wins
SolveOptions solve_options(const Cli& cli, const Model& model) {
  SolveOptions opts = solve_options(cli);
  if (drift_and_pi(model, cli.drift_tol).tag == RegimeTag::C1ZeroDrift) {
    opts.tol = std::max(opts.tol, 1e-10);
  }
  return opts;
}

long as_level(double v, const char* name) {
  if (std::nearbyint(v) != v) {
    throw Error(ErrorCode::BadModelFile, std::string(name) + " must be an integer level for lattice models");
  }
  return static_cast<long>(v);
}

const LatticeModel& lattice_of(const Model& model) {
  if (const auto* lattice = std::get_if<LatticeModel>(&model)) return *lattice;
  throw Error(ErrorCode::BadModelFile, "this command needs a lattice model");
}

struct Emitter {
  const Cli& cli;
  std::string model_hash;
  std::string command;
  json result = json::object();
  std::string csv;  // used when format == "csv"

  void write() const {
    std::ostringstream body;
    if (cli.format == "csv") {
      body << "# tool=mapkit version=" << kVersion << " command=" << command
           << " model_hash=" << model_hash << " tol=" << fmt17(cli.tol)
           << " drift_tol=" << fmt17(cli.drift_tol) << '\n';
      body << csv;
    } else {
      json doc;
      doc["tool"] = "mapkit";
      doc["version"] = kVersion;
      doc["command"] = command;
      doc["model_hash"] = model_hash;
      doc["tolerances"] = {{"tol", cli.tol}, {"drift_tol", cli.drift_tol}};
      doc["result"] = result;
      body << doc.dump(2) << '\n';
    }
    if (cli.output.empty()) {
      std::cout << body.str();
    } else {
      std::ofstream out(cli.output, std::ios::binary);
      if (!out) throw Error(ErrorCode::BadModelFile, "cannot write " + cli.output);
      out << body.str();
    }
  }
};

json regime_json(const Regime& regime) {
  return {{"tag", to_string(regime.tag)}, {"pi", vector_json(regime.pi)}, {"mu", regime.mu}};
}

int run_validate(const Cli& cli, const Model& model, Emitter& out) {
  const Regime regime = drift_and_pi(model, cli.drift_tol);
  out.result["valid"] = true;
  out.result["regime"] = regime_json(regime);
  std::ostringstream csv;
  if (const auto* lattice = std::get_if<LatticeModel>(&model)) {
    out.result["type"] = "lattice";
    out.result["phases"] = lattice->phases();
    out.result["max_jump"] = lattice->max_jump();
    out.result["defective"] = lattice->defective();
    out.result["kill_rates"] = vector_json(lattice->kill_rates());
    csv << "type,lattice\nphases," << lattice->phases() << "\nregime," << to_string(regime.tag)
        << "\nmu," << fmt17(regime.mu) << '\n';
  } else {
    const auto& mmbm = std::get<MmbmModel>(model);
    out.result["type"] = "mmbm";
    out.result["phases"] = mmbm.phases();
    out.result["defective"] = mmbm.defective();
    out.result["kill_rates"] = vector_json(mmbm.kill_rates());
    csv << "type,mmbm\nphases," << mmbm.phases() << "\nregime," << to_string(regime.tag) << "\nmu,"
        << fmt17(regime.mu) << '\n';
  }
  out.csv = csv.str();
  return 0;
}

int run_fundamentals(const Cli& cli, const Model& model, Emitter& out) {
  std::ostringstream csv;
  const auto emit = [&](const Fundamentals& fund) {
    out.result["regime"] = regime_json(fund.regime);
    out.result["G"] = matrix_json(fund.G);
    out.result["R"] = matrix_json(fund.R);
    out.result["mu"] = fund.regime.mu;
    out.result["H"] = fund.H_finite ? matrix_json(fund.H) : json();
    if (fund.Lambda.size() > 0) out.result["Lambda"] = matrix_json(fund.Lambda);
    out.result["residuals"] = json::object();
    for (const auto& [name, value] : fund.residuals) out.result["residuals"][name] = value;
    csv_matrix(csv, "G", fund.G);
    csv_matrix(csv, "R", fund.R);
    if (fund.H_finite) csv_matrix(csv, "H", fund.H);
    if (fund.Lambda.size() > 0) csv_matrix(csv, "Lambda", fund.Lambda);
  };
  if (const auto* lattice = std::get_if<LatticeModel>(&model)) {
    emit(compute_fundamentals(*lattice, solve_options(cli, model)));
  } else {
    emit(compute_fundamentals(std::get<MmbmModel>(model), solve_options(cli, model)));
  }
  out.csv = csv.str();
  return 0;
}

int run_exit(const Cli& cli, const Model& model, Emitter& out) {
  std::ostringstream csv;
  if (const auto* lattice = std::get_if<LatticeModel>(&model)) {
    const long a = as_level(cli.a, "--a");
    const long b = as_level(cli.b, "--b");
    const Fundamentals fund = compute_fundamentals(*lattice, solve_options(cli, model));
    const TabooTables tables =
        build_taboo_tables(*lattice, fund, std::max<int>(cli.horizon, static_cast<int>(a + b)));
    const ExitLaw law = two_sided_exit(*lattice, tables, fund.R, a, b);
    out.result["a"] = a;
    out.result["b"] = b;
    out.result["D"] = matrix_json(law.D);
    csv_matrix(csv, "D", law.D);
  } else {
    const MmbmFluct fluct = build_mmbm_fluct(std::get<MmbmModel>(model), solve_options(cli));
    const Matrix d = mmbm_exit(fluct, cli.a, cli.b);
    out.result["a"] = cli.a;
    out.result["b"] = cli.b;
    out.result["D"] = matrix_json(d);
    csv_matrix(csv, "D", d);
  }
  out.csv = csv.str();
  return 0;
}

int run_scale(const Cli& cli, const Model& model, Emitter& out) {
  std::ostringstream csv;
  if (const auto* lattice = std::get_if<LatticeModel>(&model)) {
    const ScaleTable table = scale_matrices(*lattice, cli.horizon);
    json w = json::array();
    for (int k = 1; k <= table.horizon; ++k) {
      w.push_back(matrix_json(table.w[static_cast<size_t>(k)]));
      for (Eigen::Index i = 0; i < table.w[static_cast<size_t>(k)].rows(); ++i) {
        for (Eigen::Index j = 0; j < table.w[static_cast<size_t>(k)].cols(); ++j) {
          csv << k << ',' << i << ',' << j << ',' << fmt17(table.w[static_cast<size_t>(k)](i, j))
              << '\n';
        }
      }
    }
    out.result["horizon"] = table.horizon;
    out.result["W"] = std::move(w);
  } else {
    const MmbmFluct fluct = build_mmbm_fluct(std::get<MmbmModel>(model), solve_options(cli));
    const Matrix w = mmbm_scale(fluct, cli.x);
    out.result["x"] = cli.x;
    out.result["W"] = matrix_json(w);
    csv_matrix(csv, "W", w);
  }
  out.csv = csv.str();
  return 0;
}

int run_occupation(const Cli& cli, const Model& model, Emitter& out) {
  std::ostringstream csv;
  if (const auto* lattice = std::get_if<LatticeModel>(&model)) {
    const Fundamentals fund = compute_fundamentals(*lattice, solve_options(cli, model));
    if (cli.strip_mode) {
      const TabooTables tables = build_taboo_tables(
          *lattice, fund, std::max<int>(cli.horizon, static_cast<int>(cli.l + cli.m)));
      const Matrix occ = strip_occupation(*lattice, fund, tables, cli.k, cli.l, cli.m);
      out.result["k"] = cli.k;
      out.result["l"] = cli.l;
      out.result["m"] = cli.m;
      out.result["occupation"] = matrix_json(occ);
      csv_matrix(csv, "occupation", occ);
    } else {
      const Matrix h_k = occupation_at_level(*lattice, fund, cli.k);
      out.result["k"] = cli.k;
      out.result["H_k"] = matrix_json(h_k);
      csv_matrix(csv, "H_k", h_k);
    }
  } else {
    const MmbmFluct fluct = build_mmbm_fluct(std::get<MmbmModel>(model), solve_options(cli));
    const Matrix h_x = mmbm_hitting(fluct, cli.x) * fluct.H();
    out.result["x"] = cli.x;
    out.result["H_x"] = matrix_json(h_x);
    csv_matrix(csv, "H_x", h_x);
  }
  out.csv = csv.str();
  return 0;
}

int run_creep(const Cli& cli, const Model& model, Emitter& out) {
  std::ostringstream csv;
  if (const auto* lattice = std::get_if<LatticeModel>(&model)) {
    const Fundamentals fund = compute_fundamentals(*lattice, solve_options(cli, model));
    const TabooTables tables = build_taboo_tables(
        *lattice, fund, std::max<int>(cli.horizon, static_cast<int>(cli.m + cli.l)));
    const Matrix creep = cli.l > 1 ? hit_before_upcross(tables, fund.R, cli.m, cli.l)
                                   : creeping(tables, cli.m);
    out.result["m"] = cli.m;
    if (cli.l > 1) out.result["l"] = cli.l;
    out.result["probability"] = matrix_json(creep);
    csv_matrix(csv, "probability", creep);
  } else {
    const MmbmFluct fluct = build_mmbm_fluct(std::get<MmbmModel>(model), solve_options(cli));
    const Matrix creep = expm(cli.x * fluct.Lambda());
    out.result["x"] = cli.x;
    out.result["probability"] = matrix_json(creep);
    out.result["identity_residual"] = mmbm_creeping_identity(fluct, cli.x);
    csv_matrix(csv, "probability", creep);
  }
  out.csv = csv.str();
  return 0;
}

int run_extrema(const Cli& cli, const Model& model, Emitter& out) {
  const LatticeModel& lattice = lattice_of(model);
  const Fundamentals fund = compute_fundamentals(lattice, solve_options(cli, model));
  const TabooTables tables = build_taboo_tables(lattice, fund, cli.horizon);
  const ExtremaLaw law =
      extrema_law(lattice, fund, tables, cli.direction == "max", cli.tail_target);

  json cells = json::array();
  std::ostringstream csv;
  csv << "m,l,i,j,probability\n";
  for (const ExtremaCell& cell : law.cells) {
    for (Eigen::Index i = 0; i < cell.prob.rows(); ++i) {
      for (Eigen::Index j = 0; j < cell.prob.cols(); ++j) {
        csv << cell.m << ',' << cell.l << ',' << i << ',' << j << ',' << fmt17(cell.prob(i, j))
            << '\n';
      }
    }
    cells.push_back({{"m", cell.m}, {"l", cell.l}, {"prob", matrix_json(cell.prob)}});
  }
  out.result["direction"] = cli.direction;
  out.result["cells"] = std::move(cells);
  out.result["captured_mass"] = vector_json(law.captured_mass);
  out.result["tail_bound"] = vector_json(law.tail_bound);
  out.csv = csv.str();
  return 0;
}

int run_decay(const Cli& cli, const Model& model, Emitter& out) {
  const LatticeModel& lattice = lattice_of(model);
  const Fundamentals fund = compute_fundamentals(lattice, solve_options(cli, model));
  const DecayDiagnostic diag = decay_diagnostic(lattice, fund, std::max(cli.horizon, 5));
  out.result["xi_k"] = diag.xi_k;
  out.result["xi_star_estimate"] = diag.xi_star_estimate;
  out.result["region_found"] = diag.region_found;
  out.result["phi_estimate"] = diag.region_found ? json(diag.phi_estimate) : json();
  out.result["product"] = diag.region_found ? json(diag.product) : json();
  out.result["product_within_5pct"] = diag.product_within_5pct;
  std::ostringstream csv;
  csv << "k,xi_k\n";
  for (size_t k = 0; k < diag.xi_k.size(); ++k) csv << k + 1 << ',' << fmt17(diag.xi_k[k]) << '\n';
  out.csv = csv.str();
  return 0;
}

int run_transform_check(const Cli& cli, const Model& model, Emitter& out) {
  const LatticeModel& lattice = lattice_of(model);
  const Fundamentals fund = compute_fundamentals(lattice, solve_options(cli, model));
  TransformCheck check;
  if (cli.kind == "scale") {
    const ScaleTable table = scale_matrices(lattice, std::max(cli.horizon, 40));
    const double z = std::isnan(cli.z) ? 0.5 * min_abs_eigenvalue(fund.G) : cli.z;
    check = check_scale_transform(lattice, table, fund.G, z);
  } else if (cli.kind == "bilateral") {
    double z = cli.z;
    if (std::isnan(z)) {
      const auto z_star = find_bilateral_z(lattice, fund);
      if (!z_star) throw Error(ErrorCode::ZOutsideDomain, "no valid z in (0,1) for the bilateral transform");
      z = *z_star;
    }
    check = check_H_transform_bilateral(lattice, fund, z);
  } else {
    check = check_H_transform_unilateral(lattice, fund, std::isnan(cli.z) ? 0.5 : cli.z);
  }
  out.result["kind"] = cli.kind;
  out.result["z"] = check.z;
  out.result["residual"] = check.residual;
  out.result["tail_bound"] = check.tail_bound;
  out.result["terms"] = check.terms;
  out.result["ok"] = check.ok();
  std::ostringstream csv;
  csv << "kind,z,residual,tail_bound,ok\n"
      << cli.kind << ',' << fmt17(check.z) << ',' << fmt17(check.residual) << ','
      << fmt17(check.tail_bound) << ',' << (check.ok() ? 1 : 0) << '\n';
  out.csv = csv.str();
  return 0;
}

int run_simulate(const Cli& cli, const Model& model, Emitter& out) {
  SimConfig config;
  config.n_paths = cli.paths;
  config.seed = cli.seed;
  config.euler_dt = cli.dt;

  SimTarget target;
  json params = json::object();
  const bool is_lattice = std::holds_alternative<LatticeModel>(model);
  if (cli.target == "hit-down") {
    target.kind = SimTarget::Kind::HitDown;
    target.k = cli.k;
    params["k"] = cli.k;
  } else if (cli.target == "hit-up") {
    if (is_lattice) {
      target.kind = SimTarget::Kind::HitUp;
      target.k = cli.k;
      params["k"] = cli.k;
    } else {
      target.kind = SimTarget::Kind::MmbmHitUp;
      target.x = cli.x;
      params["x"] = cli.x;
    }
  } else if (cli.target == "exit") {
    if (is_lattice) {
      target.kind = SimTarget::Kind::Exit;
      target.a = as_level(cli.a, "--a");
      target.b = as_level(cli.b, "--b");
      params["a"] = target.a;
      params["b"] = target.b;
    } else {
      target.kind = SimTarget::Kind::MmbmExit;
      target.xa = cli.a;
      target.xb = cli.b;
      params["a"] = cli.a;
      params["b"] = cli.b;
    }
  } else if (cli.target == "overshoot") {
    target.kind = SimTarget::Kind::Overshoot;
    target.k = cli.k;
    params["k"] = cli.k;
  } else if (cli.target == "creeping") {
    target.kind = SimTarget::Kind::Creeping;
    target.m = cli.m;
    params["m"] = cli.m;
  } else if (cli.target == "strip") {
    target.kind = SimTarget::Kind::StripOccupation;
    target.k = cli.k;
    target.l = cli.l;
    target.m = cli.m;
    params["k"] = cli.k;
    params["l"] = cli.l;
    params["m"] = cli.m;
  } else if (cli.target == "theta") {
    target.kind = SimTarget::Kind::Theta;
    target.k = cli.k;
    params["k"] = cli.k;
  } else if (cli.target == "phi") {
    target.kind = SimTarget::Kind::Phi;
    target.m = cli.m;
    params["m"] = cli.m;
  } else if (cli.target == "extrema-max" || cli.target == "extrema-min") {
    target.kind = cli.target == "extrema-max" ? SimTarget::Kind::ExtremaMax
                                              : SimTarget::Kind::ExtremaMin;
    target.m = cli.m;
    target.l = cli.l;
    params["m"] = cli.m;
    params["l"] = cli.l;
  } else {
    throw Error(ErrorCode::BadModelFile, "unknown simulation target \"" + cli.target + "\"");
  }

  const SimEstimate est = is_lattice
                              ? sim_lattice(std::get<LatticeModel>(model), target, config)
                              : sim_mmbm(std::get<MmbmModel>(model), target, config);
  out.result["target"] = cli.target;
  out.result["params"] = params;
  out.result["mean"] = matrix_json(est.mean);
  out.result["stderr"] = matrix_json(est.std_error);
  out.result["n"] = est.n;
  out.result["seed"] = est.seed;
  out.result["censored"] = est.censored;
  std::ostringstream csv;
  csv << "i,j,mean,stderr\n";
  for (Eigen::Index i = 0; i < est.mean.rows(); ++i) {
    for (Eigen::Index j = 0; j < est.mean.cols(); ++j) {
      csv << i << ',' << j << ',' << fmt17(est.mean(i, j)) << ',' << fmt17(est.std_error(i, j))
          << '\n';
    }
  }
  out.csv = csv.str();
  return 0;
}

json checks_json(const std::vector<Check>& checks) {
  json rows = json::array();
  for (const Check& check : checks) {
    json row;
    row["name"] = check.name;
    row["status"] = check.status == CheckStatus::Pass   ? "pass"
                    : check.status == CheckStatus::Fail ? "fail"
                                                        : "skip";
    row["residual"] = std::isfinite(check.residual) ? json(check.residual) : json();
    row["tolerance"] = check.tolerance;
    row["reason"] = check.reason;
    rows.push_back(std::move(row));
  }
  return rows;
}

void checks_csv(std::ostream& os, const std::vector<Check>& checks) {
  for (const Check& check : checks) {
    os << '"' << check.name << "\","
       << (check.status == CheckStatus::Pass   ? "pass"
           : check.status == CheckStatus::Fail ? "fail"
                                               : "skip")
       << ',' << fmt17(check.residual) << ',' << fmt17(check.tolerance) << ",\"" << check.reason
       << "\"\n";
  }
}

int run_verify(const Cli& cli, const Model* model, Emitter& out) {
  VerifyOptions opts;
  opts.solve_tol = cli.tol;
  opts.max_iter = cli.max_iter;
  opts.horizon = cli.horizon;
  opts.drift_tol = cli.drift_tol;

  std::ostringstream csv;
  csv << "check,status,residual,tolerance,reason\n";
  bool ok = true;
  if (model != nullptr) {
    const std::vector<Check> checks = verify_model(*model, opts);
    ok = all_passed(checks);
    out.result["checks"] = checks_json(checks);
    checks_csv(csv, checks);
  } else {
    json models = json::array();
    for (long i = 0; i < cli.random_models; ++i) {
      const uint64_t seed = cli.seed + static_cast<uint64_t>(i);
      const Model random_model = random_lattice_model(seed);
      const std::vector<Check> checks = verify_model(random_model, opts);
      ok = ok && all_passed(checks);
      models.push_back({{"seed", seed},
                        {"all_passed", all_passed(checks)},
                        {"checks", checks_json(checks)}});
      checks_csv(csv, checks);
    }
    out.result["models"] = std::move(models);
  }
  out.result["all_passed"] = ok;
  out.csv = csv.str();
  out.write();
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mapkit: fluctuation theory for one-sided Markov additive processes"};
  app.require_subcommand(1);

  Cli cli;
  cli.z = std::numeric_limits<double>::quiet_NaN();

  auto add_common = [&](CLI::App* sub, bool needs_model = true) {
    if (needs_model) sub->add_option("model", cli.model_path, "model JSON file")->required();
    sub->add_option("--tol", cli.tol, "solver residual tolerance");
    sub->add_option("--max-iter", cli.max_iter, "solver iteration budget");
    sub->add_option("--horizon", cli.horizon, "table horizon K");
    sub->add_option("--seed", cli.seed, "simulation seed");
    sub->add_option("--paths", cli.paths, "simulation paths per starting phase");
    sub->add_option("--dt", cli.dt, "Euler step for MMBM simulation");
    sub->add_option("--format", cli.format, "output format")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--output", cli.output, "write the report to a file instead of stdout");
    sub->add_option("--drift-tol", cli.drift_tol, "zero-drift classification tolerance");
  };

  auto* validate = app.add_subcommand("validate", "check the model invariants");
  add_common(validate);
  auto* fundamentals = app.add_subcommand("fundamentals", "G, R, H (and Lambda for MMBM)");
  add_common(fundamentals);
  auto* exit_cmd = app.add_subcommand("exit", "two-sided exit law");
  add_common(exit_cmd);
  exit_cmd->add_option("--a", cli.a, "lower exit depth")->required();
  exit_cmd->add_option("--b", cli.b, "upper exit height")->required();
  auto* scale = app.add_subcommand("scale", "scale matrices W(k) or W(x)");
  add_common(scale);
  scale->add_option("--x", cli.x, "evaluation point for MMBM scale");
  auto* occupation = app.add_subcommand("occupation", "occupation times H(k) or strip occupation");
  add_common(occupation);
  occupation->add_option("--k", cli.k, "level");
  occupation->add_option("--l", cli.l, "lower taboo depth (strip mode)");
  occupation->add_option("--m", cli.m, "upper taboo height (strip mode)");
  occupation->add_option("--x", cli.x, "level for MMBM occupation");
  auto* creep = app.add_subcommand("creep", "creeping / hit-before-upcross probabilities");
  add_common(creep);
  creep->add_option("--m", cli.m, "target level");
  creep->add_option("--l", cli.l, "upcross margin (l > 1 switches to hit-before-upcross)");
  creep->add_option("--x", cli.x, "level for MMBM creeping");
  auto* extrema = app.add_subcommand("extrema", "joint law of the extremum at the killing time");
  add_common(extrema);
  extrema->add_option("--direction", cli.direction, "max or min")
      ->check(CLI::IsMember({"max", "min"}));
  extrema->add_option("--tail-target", cli.tail_target, "grid tail mass target");
  auto* decay = app.add_subcommand("decay", "decay-rate diagnostic");
  add_common(decay);
  auto* transform = app.add_subcommand("transform-check", "generating-function identity checks");
  add_common(transform);
  transform->add_option("--z", cli.z, "probe point");
  transform->add_option("--kind", cli.kind, "scale | bilateral | unilateral")
      ->check(CLI::IsMember({"scale", "bilateral", "unilateral"}));
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates");
  add_common(simulate);
  simulate->add_option("--target", cli.target, "simulation target")->required();
  simulate->add_option("--k", cli.k, "level parameter");
  simulate->add_option("--a", cli.a, "lower exit depth");
  simulate->add_option("--b", cli.b, "upper exit height");
  simulate->add_option("--l", cli.l, "parameter l");
  simulate->add_option("--m", cli.m, "parameter m");
  simulate->add_option("--x", cli.x, "real level (MMBM)");
  auto* verify = app.add_subcommand("verify", "run every applicable cross-identity");
  verify->add_option("model", cli.model_path, "model JSON file");
  verify->add_option("--tol", cli.tol, "solver residual tolerance");
  verify->add_option("--max-iter", cli.max_iter, "solver iteration budget");
  verify->add_option("--horizon", cli.horizon, "table horizon K");
  verify->add_option("--seed", cli.seed, "base seed for --random-models");
  verify->add_option("--format", cli.format, "output format")
      ->check(CLI::IsMember({"json", "csv"}));
  verify->add_option("--output", cli.output, "write the report to a file instead of stdout");
  verify->add_option("--drift-tol", cli.drift_tol, "zero-drift classification tolerance");
  verify->add_option("--random-models", cli.random_models,
                     "verify this many seeded random models instead of a file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Emitter out{cli};
    CLI::App* sub = app.get_subcommands().front();
    out.command = sub->get_name();

    if (sub == verify) {
      if (cli.model_path.empty() && cli.random_models <= 0) {
        std::cerr << R"({"error":{"code":"Usage","message":"verify needs a model file or --random-models"}})"
                  << std::endl;
        return 2;
      }
      if (verify->count("--seed") == 0) cli.seed = 20240001;
      if (!cli.model_path.empty()) {
        std::ifstream in(cli.model_path, std::ios::binary);
        if (!in) throw Error(ErrorCode::BadModelFile, "cannot open " + cli.model_path);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        out.model_hash = content_hash(buffer.str());
        const Model model = parse_model_json(buffer.str());
        return run_verify(cli, &model, out);
      }
      out.model_hash = "random";
      return run_verify(cli, nullptr, out);
    }

    std::ifstream in(cli.model_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::BadModelFile, "cannot open " + cli.model_path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    out.model_hash = content_hash(buffer.str());
    const Model model = parse_model_json(buffer.str());

    int code = 0;
    cli.strip_mode = occupation->count("--l") > 0 && occupation->count("--m") > 0;
    if (sub == validate) code = run_validate(cli, model, out);
    else if (sub == fundamentals) code = run_fundamentals(cli, model, out);
    else if (sub == exit_cmd) code = run_exit(cli, model, out);
    else if (sub == scale) code = run_scale(cli, model, out);
    else if (sub == occupation) code = run_occupation(cli, model, out);
    else if (sub == creep) code = run_creep(cli, model, out);
    else if (sub == extrema) code = run_extrema(cli, model, out);
    else if (sub == decay) code = run_decay(cli, model, out);
    else if (sub == transform) code = run_transform_check(cli, model, out);
    else if (sub == simulate) code = run_simulate(cli, model, out);
    out.write();
    return code;
  } catch (const mapkit::Error& e) {
    json err;
    err["error"] = {{"code", to_string(e.code())}, {"message", e.what()}};
    std::cerr << err.dump() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    json err;
    err["error"] = {{"code", "Internal"}, {"message", e.what()}};
    std::cerr << err.dump() << std::endl;
    return 1;
  }
}
