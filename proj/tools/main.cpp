// singfield command-line front end: analyze, verify, geodesics, normal-form.

#include <cstdint>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "config.hpp"
#include "output.hpp"
#include "singfield/normalform.hpp"

using namespace singfield;
using namespace singfield::cli;

namespace {

constexpr int kExitPass = 0, kExitCheckFail = 1, kExitUsage = 2;

Json vec(std::span<const double> x) {
  Json j = Json::array();
  for (double v : x) j.push_back(v);
  return j;
}

Json matrix(const Eigen::MatrixXd& A) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < A.cols(); ++k) row.push_back(A(i, k));
    j.push_back(row);
  }
  return j;
}

Json spectrum(const std::vector<cplx>& ev) {
  Json j = Json::array();
  for (cplx z : ev) j.push_back(Json::array({z.real(), z.imag()}));
  return j;
}

Json error_json(const Error& e) {
  Json j;
  j["code"] = std::string(to_string(e.code()));
  j["message"] = e.detail();
  if (e.offset()) j["offset"] = *e.offset();
  return j;
}

Json error_json(const std::string& code, const std::string& message) {
  Json j;
  j["code"] = code;
  j["message"] = message;
  return j;
}

struct Run {
  Config cfg;
  std::mt19937_64 rng;
  Json errors = Json::array();
  bool passed = true;

  double uniform() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
  void error(const Error& e) {
    errors.push_back(error_json(e));
    passed = false;
  }
};

// ---------------------------------------------------------------------------
// Problem setup shared by the commands.

struct Problem {
  VectorField v;
  std::optional<ScalarField> f;
  std::optional<double> r;
  std::vector<Point> points;  ///< singular points of v
  Json structure;             ///< model-specific structure at the base points
};

VectorField series_field(const std::vector<std::vector<SeriesTerm>>& comps) {
  return VectorField::from_jets(3, [comps](std::span<const Jet> x) {
    std::vector<Jet> out;
    for (const auto& terms : comps) {
      Jet acc = Jet::constant(x[0].nvars(), x[0].order(), 0.0);
      for (const SeriesTerm& t : terms) {
        Jet m = Jet::constant(x[0].nvars(), x[0].order(), t.coefficient);
        for (int i = 0; i < 3; ++i) {
          if (t.powers[i]) m = m * powi(x[i], t.powers[i]);
        }
        acc += m;
      }
      out.push_back(acc);
    }
    return out;
  });
}

Json pseudo_structure_json(const PseudoStructure& s) {
  Json j;
  j["base_point"] = vec(s.q);
  j["p0"] = s.p0;
  j["sigma"] = s.sigma;
  j["transversality"] = s.transversality;
  j["p0_residual"] = s.p0_residual;
  j["roots"] = vec(s.roots);
  j["degenerate"] = s.degenerate;
  Json br = Json::array();
  for (const auto& b : s.branches) {
    Json e;
    e["label"] = b.label;
    e["point"] = vec(b.point);
    e["eigenvalues"] = spectrum(b.eigenvalues);
    if (b.label == "W0") {
      e["sigma_in_spectrum"] = b.sigma_in_spectrum;
      e["ratio_two_to_one"] = b.ratio_two_to_one;
      e["node_coefficient"] = b.phi ? Json(*b.phi) : Json();
    } else {
      e["trace_residual"] = b.trace_residual;
      e["psi"] = b.psi ? Json(*b.psi) : Json();
    }
    br.push_back(e);
  }
  j["branches"] = br;
  return j;
}

Problem setup(Run& run, bool need_surface) {
  const Config& c = run.cfg;
  Problem p;
  if (c.kind == "raw_field" || c.kind == "series_field") {
    p.v = c.kind == "raw_field" ? VectorField::from_expressions(c.field) : series_field(c.components);
    if (c.f) p.f = ScalarField::from_expression(*c.f);
    p.r = c.r;
    if (need_surface && (!p.f || !p.r)) fail(Errc::ConfigError, "this command needs 'f' and 'r'");
    p.points = c.points;
    if (!c.seeds.empty()) {
      const auto found = find_singular_points(p.v, c.seeds);
      for (const auto& q : found.points) p.points.push_back(q);
      for (const auto& fl : found.failures) {
        run.errors.push_back(error_json("NoConvergence", "seed " + format_double(fl.seed[0]) + "," +
                                                             format_double(fl.seed[1]) + "," +
                                                             format_double(fl.seed[2]) + ": " + fl.reason));
        run.passed = false;
      }
    }
    if (p.points.empty() && c.seeds.empty()) p.points.push_back(Point(3, 0.0));
    return p;
  }
  const MetricModel& m = *c.model;
  p.v = m.field();
  p.f = m.surface();
  p.r = m.exponent();
  std::vector<Point> base = c.points.empty() ? std::vector<Point>{Point{0, 0}} : c.points;
  if (c.kind == "pseudo") {
    const auto& pm = static_cast<const PseudoModel&>(m);
    p.structure = Json::array();
    for (const Point& q : base) {
      try {
        const auto s = pseudo_singular_structure(pm, q);
        p.structure.push_back(pseudo_structure_json(s));
        if (s.degenerate) {
          run.errors.push_back(error_json("Degenerate", "double root of M at the base point; not classified"));
          run.passed = false;
        }
        for (const auto& b : s.branches) p.points.push_back(b.point);
      } catch (const Error& e) {
        run.error(e);
      }
    }
  } else {
    for (const Point& q : base) p.points.push_back({q[0], q[1], 0.0});
  }
  return p;
}

// ---------------------------------------------------------------------------
// Per-point analysis.

Json classification_json(const Classification& c, bool r_given) {
  Json j;
  j["kind"] = to_string(c.kind);
  std::string summary = to_string(c.kind);
  if (c.n) summary += ", n=" + std::to_string(*c.n);
  if (c.m) summary += ", m=" + std::to_string(*c.m);
  if (c.phi_zero) summary += *c.phi_zero ? ", phi(0)=0" : ", phi(0)!=0";
  if (c.psi) summary += std::string(", Psi(0,0)") + (std::abs(*c.psi) > 1e-9 ? "!=0" : "=0");
  j["summary"] = summary;
  j["lambda_ratio"] = Json::array({c.lambda_ratio.real(), c.lambda_ratio.imag()});
  j["n"] = c.n ? Json(*c.n) : Json();
  j["m"] = c.m ? Json(*c.m) : Json();
  j["phi_zero"] = c.phi_zero ? Json(*c.phi_zero) : Json();
  j["psi"] = c.psi ? Json(*c.psi) : Json();
  j["r_consistent"] = r_given ? Json(c.r_consistent) : Json();
  Json nk = Json::array();
  for (auto [k, n] : c.nk) nk.push_back(Json::array({k, n}));
  j["smoothness_order_bound"] = nk;
  j["form"] = c.form;
  return j;
}

Json classify_json(const VectorField& v, const Point& x, std::optional<double> r) {
  try {
    return classification_json(classify_singular_point(v, x, r.value_or(0.0)), r.has_value());
  } catch (const Error& e) {
    Json j;
    j["kind"] = "not_applicable";
    j["reason"] = error_json(e);
    return j;
  }
}

Json conditions_json(const ConditionReport& c) {
  Json j;
  j["passed"] = c.passed;
  j["tol"] = c.tol;
  j["scale"] = c.scale;
  Json lims = Json::array();
  for (const auto& l : c.limits) {
    Json e;
    e["quantity"] = l.quantity;
    e["direction"] = vec(l.direction);
    e["limit"] = l.limit;
    e["diverges"] = l.diverges;
    lims.push_back(e);
  }
  j["limits"] = lims;
  return j;
}

// Conditions, resonance relation and classification at one singular point;
// returns false when a gating check fails.
bool analyze_point(const Problem& p, const Point& x, const Options& o, Json& out) {
  out["point"] = vec(x);
  SpectralReport rep = linearize(p.v, x);
  out["jacobian"] = matrix(rep.jacobian);
  out["eigenvalues"] = spectrum(rep.eigenvalues);
  out["defective"] = rep.defective;
  bool ok = true;
  const double fx = p.f->value(x);
  const bool on = std::abs(fx) <= o.tol_check;
  out["on_surface"] = on;
  if (on) {
    const SingularField sf(p.v, *p.f, *p.r);
    const ConditionReport cr = sf.check_conditions_at_singular_point(x, o.tol_check);
    out["conditions"] = conditions_json(cr);
    ok = cr.passed;
    Json res;
    if (cr.passed) {
      try {
        const unsigned j = check_resonance_relation(rep, p.f->gradient(x), *p.r, o.tol_resonance);
        const double lj = rep.eigenvalues[j - 1].real();
        res["passed"] = true;
        res["j"] = j;
        res["lambda_j"] = lj;
        res["verdict"] = "lambda_j = " + format_double(lj);
        res["residual"] = rep.resonance_residual;
        res["eigvec_residual"] = rep.eigvec_residual;
      } catch (const Error& e) {
        res["passed"] = false;
        res["reason"] = error_json(e);
        ok = false;
      }
    }
    out["resonance"] = cr.passed ? res : Json();
  } else {
    out["conditions"] = Json();
    out["resonance"] = Json();
  }
  out["classification"] = classify_json(p.v, x, p.r);
  return ok;
}

Json analyze_points(Run& run, const Problem& p) {
  Json pts = Json::array();
  for (const Point& x : p.points) {
    Json e;
    try {
      if (!analyze_point(p, x, run.cfg.options, e)) run.passed = false;
    } catch (const Error& err) {
      e["point"] = vec(x);
      e["error"] = error_json(err);
      run.error(err);
    }
    pts.push_back(e);
  }
  return pts;
}

int cmd_analyze(Run& run, Json& report) {
  const Problem p = setup(run, true);
  if (!p.structure.is_null()) report["structure"] = p.structure;
  report["singular_points"] = analyze_points(run, p);
  return run.passed ? kExitPass : kExitCheckFail;
}

// ---------------------------------------------------------------------------
// Sampling checks.

std::vector<Point> box_samples(Run& run, const Point& centre, double h, std::size_t n,
                               const std::function<bool(const Point&)>& keep) {
  std::vector<Point> out;
  for (std::size_t attempts = 0; out.size() < n && attempts < 100 * n; ++attempts) {
    Point x(3);
    for (int i = 0; i < 3; ++i) x[i] = centre[i] + h * (2 * run.uniform() - 1);
    try {
      if (keep(x)) out.push_back(std::move(x));
    } catch (const Error&) {
    }
  }
  return out;
}

Json check_json(const char* name, bool passed, std::size_t samples, double worst, bool gating = true) {
  Json j;
  j["name"] = name;
  j["passed"] = passed;
  j["gating"] = gating;
  j["samples"] = samples;
  j["max_ratio"] = worst;
  return j;
}

int cmd_verify(Run& run, Json& report) {
  const Problem p = setup(run, true);
  const Options& o = run.cfg.options;
  const SingularField sf(p.v, *p.f, *p.r);
  const Point centre = p.points.empty() ? Point(3, 0.0) : p.points.front();
  Json checks = Json::array();
  auto record = [&](Json j) {
    if (j["gating"].get<bool>() && !j["passed"].get<bool>()) run.passed = false;
    checks.push_back(std::move(j));
  };

  // points on the singular surface
  const auto raw_on = box_samples(run, centre, o.sample_half_width, o.samples, [](const Point&) { return true; });
  std::vector<Point> on;
  for (const Point& x : raw_on) {
    try {
      Point y = project_to_surface(*p.f, x);
      if (std::abs(p.f->value(y)) <= o.tol_surface) on.push_back(std::move(y));
    } catch (const Error&) {
    }
  }
  const CheckReport gi = sf.check_gamma_invariant(on, o.tol_check);
  record(check_json("gamma_invariant", gi.passed && !on.empty(), on.size(), gi.max_ratio));

  const auto off = box_samples(run, centre, o.sample_half_width, o.samples,
                               [&](const Point& x) { return std::abs(p.f->value(x)) > 1e-3; });
  double worst = 0;
  bool ok = !off.empty();
  for (const Point& x : off) {
    const WEvaluation w = sf.eval_w(x);
    const double ratio = w.identity_residual / (o.tol_identity * w.identity_scale);
    worst = std::max(worst, ratio);
    ok = ok && ratio <= 1;
  }
  record(check_json("divergence_identity", ok, off.size(), worst));

  const FirstIntegralReport fi = sf.check_first_integral(off, o.tol_check);
  Json fij = check_json("first_integral", fi.passed, off.size(), fi.lie.max_ratio, false);
  fij["tests_agree"] = fi.tests_agree;
  record(fij);

  if (run.cfg.model) {
    const LagrangianForm L = run.cfg.model->lagrangian_form();
    const auto pts = sample_lagrangian_domain(L, run.rng, o.samples);
    const ConsistencyReport cr = verify_lagrangian_consistency(*run.cfg.model, pts, o.tol_check);
    Json j = check_json("lagrangian_consistency", cr.passed && cr.samples > 0, cr.samples,
                        std::max({cr.w_mismatch, cr.div_w, cr.defw_mismatch}) / o.tol_check);
    j["w_mismatch"] = cr.w_mismatch;
    j["div_w"] = cr.div_w;
    j["defw_mismatch"] = cr.defw_mismatch;
    j["orientation"] = L.orientation;
    j["r"] = L.r;
    Json viol = Json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(cr.violations.size(), 5); ++i) viol.push_back(cr.violations[i]);
    j["violations"] = viol;
    record(j);
  }
  report["checks"] = checks;
  if (!p.structure.is_null()) report["structure"] = p.structure;
  report["singular_points"] = analyze_points(run, p);
  return run.passed ? kExitPass : kExitCheckFail;
}

// ---------------------------------------------------------------------------
// Geodesic families.

std::optional<double> constant_value(const Expression& e) {
  static const double probes[][2] = {{0.0, 0.0}, {0.1, 0.2}, {-0.3, 0.7}, {0.5, -0.4}, {0.9, 0.9}};
  const double v0 = e.eval(std::span<const double>(probes[0], 2));
  for (const auto& q : probes) {
    if (e.eval(std::span<const double>(q, 2)) != v0) return std::nullopt;
  }
  return v0;
}

std::string csv_header(const std::array<std::string, 3>& names, bool with_id) {
  return std::string(with_id ? "curve_id," : "") + "s," + names[0] + "," + names[1] + "," + names[2] + "\n";
}

void append_rows(std::string& text, const Curve& c, const std::string* id) {
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    if (id) text += *id + ",";
    text += format_double(c.direction * c.s[i]);
    for (double v : c.points[i]) text += "," + format_double(v);
    text += "\n";
  }
}

int cmd_geodesics(Run& run, Json& report, const std::string& out_dir, bool single_file) {
  const Config& c = run.cfg;
  if (!c.model) fail(Errc::ConfigError, "geodesics needs kind pseudo, klein or almost");
  const Problem p = setup(run, false);
  const GeodesicConfig& g = c.geodesics;
  const auto names = c.model->phase_names();
  single_file = single_file || g.single_file;

  // closed-form families
  std::string oracle;
  double oracle_v = 0;
  if (c.kind == "klein" && c.klein_n == 1) {
    const auto a = constant_value(c.coefficient_exprs[0]), b = constant_value(c.coefficient_exprs[1]);
    if (a && b && *a == *b) oracle = "klein_circles";
  } else if (c.kind == "almost") {
    if (const auto v = constant_value(c.coefficient_exprs[0])) {
      oracle = "grushin";
      oracle_v = *v;
    }
  }
  report["oracle"] = oracle.empty() ? Json() : Json(oracle);
  double oracle_worst = 0;

  std::string combined = single_file ? csv_header(names, true) : "";
  Json pts = Json::array();
  for (std::size_t ip = 0; ip < p.points.size(); ++ip) {
    const Point& x = p.points[ip];
    Json pj;
    pj["point"] = vec(x);
    try {
      const ShootingResult res = shoot_geodesics(p.v, x, g.shooting);
      pj["kind"] = res.kind;
      pj["eigenvalues"] = spectrum(res.eigenvalues);
      Json curves = Json::array();
      for (const Curve& cv : res.curves) {
        const std::string id = "p" + std::to_string(ip) + "_" + cv.id;
        Json cj;
        cj["id"] = id;
        cj["direction"] = cv.direction;
        cj["samples"] = cv.points.size();
        cj["stop_reason"] = cv.stop_reason;
        cj["rejected_steps"] = cv.rejected_steps;
        cj["diagnostics"] = cv.diagnostics;
        if (cv.stop_reason == "domain_error" || cv.stop_reason == "non_finite" || cv.stop_reason == "max_steps" ||
            cv.stop_reason == "step_underflow") {
          run.errors.push_back(error_json("IntegrationStopped", id + ": " + cv.stop_reason));
          run.passed = false;
        }
        if (!out_dir.empty()) {
          if (single_file) {
            append_rows(combined, cv, &id);
            cj["file"] = "curves.csv";
          } else {
            std::string text = csv_header(names, false);
            append_rows(text, cv, nullptr);
            write_atomic(std::filesystem::path(out_dir) / (id + ".csv"), text);
            cj["file"] = id + ".csv";
          }
        } else {
          cj["file"] = Json();
        }
        if (oracle == "klein_circles") {
          const CircleFit fit = fit_klein_circle(cv.points, x[1], g.oracle_t_max);
          Json oj;
          oj["radius"] = fit.R;
          oj["line"] = fit.line;
          oj["max_error"] = fit.max_error;
          oj["compared"] = fit.compared;
          oj["passed"] = fit.compared >= 2 && fit.max_error <= c.options.tol_oracle;
          oracle_worst = std::max(oracle_worst, fit.max_error);
          if (!oj["passed"].get<bool>()) run.passed = false;
          cj["oracle"] = oj;
        } else if (oracle == "grushin") {
          const Point& q = cv.points[std::min<std::size_t>(5, cv.points.size() - 1)];
          const double guess = q[0] != 0 ? oracle_v * q[2] / q[0] : 0;
          const GrushinFit fit = fit_grushin(cv.points, x[1], oracle_v, guess, g.shooting.window);
          Json oj;
          oj["c"] = fit.c;
          oj["x_limit"] = fit.x_limit;
          oj["max_error"] = fit.max_error;
          oj["compared"] = fit.compared;
          oj["passed"] = fit.compared >= 2 && fit.max_error <= c.options.tol_oracle;
          oracle_worst = std::max(oracle_worst, fit.max_error);
          if (!oj["passed"].get<bool>()) run.passed = false;
          cj["oracle"] = oj;
        }
        curves.push_back(cj);
      }
      pj["curves"] = curves;
    } catch (const Error& e) {
      pj["error"] = error_json(e);
      run.error(e);
    }
    pts.push_back(pj);
  }
  if (single_file && !out_dir.empty()) write_atomic(std::filesystem::path(out_dir) / "curves.csv", combined);
  if (!p.structure.is_null()) report["structure"] = p.structure;
  report["points"] = pts;
  report["oracle_max_error"] = oracle.empty() ? Json() : Json(oracle_worst);
  return run.passed ? kExitPass : kExitCheckFail;
}

// ---------------------------------------------------------------------------
// Normal forms of raw or series fields.

int cmd_normal_form(Run& run, Json& report) {
  const Config& c = run.cfg;
  if (c.kind != "raw_field" && c.kind != "series_field") {
    fail(Errc::ConfigError, "normal-form needs kind raw_field or series_field");
  }
  const Problem p = setup(run, false);
  const Point x = p.points.empty() ? Point(3, 0.0) : p.points.front();
  report["point"] = vec(x);
  const auto val = p.v.value(x);
  if (norm2(val) > 1e-8 * (1 + norm2(x))) fail(Errc::NotASingularPoint, "V does not vanish at the point");
  const Eigen::MatrixXd A = p.v.jacobian(x);
  report["linear_part"] = matrix(A);
  report["eigenvalues"] = spectrum(eigenvalues(A));
  report["classification"] = classify_json(p.v, x, p.r);
  if (c.flatten) {
    const FlattenConfig& fc = *c.flatten;
    Json fj;
    fj["N"] = fc.N;
    fj["zeta_order"] = fc.zeta_order;
    fj["seed"] = vec(fc.seed);
    const unsigned K = fc.N + fc.zeta_order + 1;
    if (K > kMaxJetOrder) fail(Errc::ConfigError, "flatten: N + zeta_order + 1 exceeds the jet order limit");
    try {
      const QuasiIntegral q = flatten(p.v.series(x, K), fc.N, fc.seed, fc.zeta_order);
      fj["residual"] = q.residual;
      fj["passed"] = q.residual <= c.options.tol_identity;
      if (!fj["passed"].get<bool>()) run.passed = false;
      Json coeffs = Json::array();
      for (const auto& [key, col] : q.u) {
        for (std::size_t z = 0; z < col.size(); ++z) {
          if (col[z] == 0.0) continue;
          Json e;
          e["powers"] = Json::array({key.first, key.second, z});
          e["value"] = col[z];
          coeffs.push_back(e);
        }
      }
      fj["coefficients"] = coeffs;
    } catch (const Error& e) {
      fj["passed"] = false;
      fj["error"] = error_json(e);
      run.error(e);
    }
    report["flatten"] = fj;
  }
  return run.passed ? kExitPass : kExitCheckFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Singular geodesic fields: analysis, verification, geodesic shooting and normal forms"};
  app.require_subcommand(1);
  std::string config_path, out_path, out_dir;
  std::uint64_t seed = 0;
  bool single_file = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_path, "write the JSON report here instead of stdout");
    sub->add_option("--seed", seed, "seed for sample generation");
  };
  CLI::App* analyze = app.add_subcommand("analyze", "singular points, spectra, conditions and classification");
  CLI::App* verify = app.add_subcommand("verify", "sampled checks of invariance, identities and consistency");
  CLI::App* geodesics = app.add_subcommand("geodesics", "shoot geodesic families from singular points");
  CLI::App* normal = app.add_subcommand("normal-form", "classification and flattening of a field at a point");
  for (CLI::App* s : {analyze, verify, geodesics, normal}) common(s);
  geodesics->add_option("--out-dir", out_dir, "directory for curve CSV files");
  geodesics->add_flag("--single-file", single_file, "write one CSV with a curve_id column");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Json report;
  report["command"] = sub->get_name();
  report["config"] = config_path;
  report["seed"] = seed;
  Run run;
  run.rng.seed(seed);
  int code = kExitPass;
  try {
    run.cfg = load_config(config_path);
    report["kind"] = run.cfg.kind;
    if (sub == analyze) code = cmd_analyze(run, report);
    if (sub == verify) code = cmd_verify(run, report);
    if (sub == geodesics) code = cmd_geodesics(run, report, out_dir, single_file);
    if (sub == normal) code = cmd_normal_form(run, report);
  } catch (const Error& e) {
    run.error(e);
    const bool usage = e.code() == Errc::ConfigError || e.code() == Errc::SyntaxError ||
                       e.code() == Errc::UnknownIdentifier || e.code() == Errc::ArityMismatch;
    code = usage ? kExitUsage : kExitCheckFail;
  } catch (const std::exception& e) {
    run.errors.push_back(error_json("IOError", e.what()));
    run.passed = false;
    code = kExitCheckFail;
  }
  if (code == kExitPass && !run.passed) code = kExitCheckFail;
  report["passed"] = code == kExitPass;
  report["exit_code"] = code;
  report["errors"] = run.errors;

  const std::string text = to_text(report);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    try {
      write_atomic(out_path, text);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    }
  }
  return code;
}
