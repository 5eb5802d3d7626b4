#pragma once

// Run configuration: a single JSON document, validated strictly.

#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "output.hpp"
#include "singfield/fields.hpp"
#include "singfield/geodesics.hpp"
#include "singfield/geometry.hpp"

namespace singfield::cli {

struct Options {
  double tol_surface = 1e-10;
  double tol_check = 1e-8;
  double tol_identity = 1e-9;
  double tol_resonance = 1e-7;
  double tol_oracle = 1e-6;
  unsigned samples = 100;
  double sample_half_width = 1.0;
};

struct GeodesicConfig {
  ShootingOptions shooting;
  double oracle_t_max = 0.5;
  bool single_file = false;
};

struct FlattenConfig {
  unsigned N = 3;
  std::vector<double> seed{0, 1};
  unsigned zeta_order = 3;
};

struct SeriesTerm {
  std::array<unsigned, 3> powers;
  double coefficient;
};

struct Config {
  std::string kind;
  std::vector<std::string> variables{"x", "y", "z"};
  // raw_field
  std::vector<Expression> field;
  std::optional<Expression> f;
  std::optional<double> r;
  // series_field
  std::vector<std::vector<SeriesTerm>> components;
  // models
  std::shared_ptr<MetricModel> model;
  std::vector<Point> points;
  std::vector<Point> seeds;
  Options options;
  GeodesicConfig geodesics;
  std::optional<FlattenConfig> flatten;
  // model sources, kept for oracle applicability
  std::vector<Expression> coefficient_exprs;
  unsigned klein_n = 0;
};

namespace config_detail {

[[noreturn]] inline void bad(const std::string& msg) { fail(Errc::ConfigError, msg); }

inline void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) bad(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) bad("unknown key '" + k + "' in " + where);
  }
}

inline double number(const Json& j, const std::string& key) {
  if (!j.is_number()) bad("'" + key + "' must be a number");
  return j.get<double>();
}

inline unsigned natural(const Json& j, const std::string& key, bool allow_zero = true) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) bad("'" + key + "' must be an integer");
  const long long v = j.get<long long>();
  if (v < 0 || (!allow_zero && v == 0)) bad("'" + key + "' must be " + (allow_zero ? "non-negative" : "positive"));
  return static_cast<unsigned>(v);
}

inline std::string string(const Json& j, const std::string& key) {
  if (!j.is_string()) bad("'" + key + "' must be a string");
  return j.get<std::string>();
}

inline const Json& require(const Json& j, const std::string& key) {
  if (!j.contains(key)) bad("missing required key '" + key + "'");
  return j.at(key);
}

// Expression errors keep their code and offset; the message names the key.
inline Expression expression(const Json& j, const std::string& key, const std::vector<std::string>& vars) {
  const std::string src = string(j, key);
  try {
    return Expression::parse(src, vars);
  } catch (const Error& e) {
    throw Error(e.code(), key + ": " + e.detail(), e.offset());
  }
}

inline std::vector<Point> point_list(const Json& j, const std::string& key, std::size_t dim) {
  if (!j.is_array()) bad("'" + key + "' must be an array of points");
  std::vector<Point> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != dim) bad("each entry of '" + key + "' needs " + std::to_string(dim) + " numbers");
    Point x;
    for (const auto& c : p) x.push_back(number(c, key));
    out.push_back(std::move(x));
  }
  return out;
}

inline Options options(const Json& j) {
  check_keys(j, {"tol_surface", "tol_check", "tol_identity", "tol_resonance", "tol_oracle", "samples", "sample_half_width"},
             "options");
  Options o;
  auto pos = [&](const char* k, double& dst) {
    if (j.contains(k)) {
      dst = number(j.at(k), k);
      if (!(dst > 0)) bad(std::string("'") + k + "' must be positive");
    }
  };
  pos("tol_surface", o.tol_surface);
  pos("tol_check", o.tol_check);
  pos("tol_identity", o.tol_identity);
  pos("tol_resonance", o.tol_resonance);
  pos("tol_oracle", o.tol_oracle);
  pos("sample_half_width", o.sample_half_width);
  if (j.contains("samples")) o.samples = natural(j.at("samples"), "samples", false);
  return o;
}

inline GeodesicConfig geodesics(const Json& j) {
  check_keys(j, {"count", "epsilon", "horizon", "window", "p_limit", "rtol", "atol", "oracle_t_max", "single_file"},
             "geodesics");
  GeodesicConfig g;
  ShootingOptions& s = g.shooting;
  if (j.contains("count")) s.count = natural(j.at("count"), "count", false);
  auto pos = [&](const char* k, double& dst) {
    if (j.contains(k)) {
      dst = number(j.at(k), k);
      if (!(dst > 0)) bad(std::string("'") + k + "' must be positive");
    }
  };
  pos("epsilon", s.epsilon);
  pos("horizon", s.horizon);
  pos("window", s.window);
  pos("p_limit", s.p_limit);
  pos("rtol", s.rtol);
  pos("atol", s.atol);
  pos("oracle_t_max", g.oracle_t_max);
  if (j.contains("single_file")) {
    if (!j.at("single_file").is_boolean()) bad("'single_file' must be a boolean");
    g.single_file = j.at("single_file").get<bool>();
  }
  return g;
}

inline FlattenConfig flatten(const Json& j) {
  check_keys(j, {"N", "seed", "zeta_order"}, "flatten");
  FlattenConfig f;
  if (j.contains("N")) f.N = natural(j.at("N"), "N", false);
  if (j.contains("zeta_order")) f.zeta_order = natural(j.at("zeta_order"), "zeta_order");
  if (j.contains("seed")) {
    if (!j.at("seed").is_array()) bad("'seed' must be an array of numbers");
    f.seed.clear();
    for (const auto& c : j.at("seed")) f.seed.push_back(number(c, "seed"));
  }
  return f;
}

inline std::vector<SeriesTerm> terms(const Json& j, std::size_t idx) {
  const std::string where = "components[" + std::to_string(idx) + "]";
  if (!j.is_array()) bad(where + " must be an array of terms");
  std::vector<SeriesTerm> out;
  for (const auto& t : j) {
    check_keys(t, {"powers", "coefficient"}, where + " term");
    const Json& p = require(t, "powers");
    if (!p.is_array() || p.size() != 3) bad(where + ": 'powers' needs 3 exponents");
    SeriesTerm term{{natural(p[0], "powers"), natural(p[1], "powers"), natural(p[2], "powers")},
                    number(require(t, "coefficient"), "coefficient")};
    if (term.powers[0] + term.powers[1] + term.powers[2] > kMaxJetOrder) bad(where + ": monomial degree too high");
    out.push_back(term);
  }
  return out;
}

inline std::vector<std::string> variables(const Json& j) {
  if (!j.is_array() || j.size() != 3) bad("'variables' must list 3 names");
  std::vector<std::string> out;
  for (const auto& v : j) out.push_back(string(v, "variables"));
  return out;
}

}  // namespace config_detail

inline Config parse_config(const Json& j) {
  using namespace config_detail;
  if (!j.is_object()) bad("config must be a JSON object");
  Config c;
  c.kind = string(require(j, "kind"), "kind");
  const std::set<std::string> common{"kind", "description", "points", "seeds", "options", "geodesics", "flatten"};
  auto allowed = [&](std::initializer_list<const char*> extra) {
    std::set<std::string> s = common;
    for (const char* e : extra) s.insert(e);
    return s;
  };
  std::size_t point_dim = 2;
  if (c.kind == "raw_field") {
    check_keys(j, allowed({"variables", "field", "f", "r"}), "config");
    if (j.contains("variables")) c.variables = variables(j.at("variables"));
    const Json& fj = require(j, "field");
    if (!fj.is_array() || fj.size() != 3) bad("'field' must list 3 component expressions");
    for (std::size_t i = 0; i < 3; ++i) c.field.push_back(expression(fj[i], "field[" + std::to_string(i) + "]", c.variables));
    if (j.contains("f")) c.f = expression(j.at("f"), "f", c.variables);
    if (j.contains("r")) c.r = number(j.at("r"), "r");
    point_dim = 3;
  } else if (c.kind == "series_field") {
    check_keys(j, allowed({"variables", "components", "r"}), "config");
    if (j.contains("variables")) c.variables = variables(j.at("variables"));
    const Json& comps = require(j, "components");
    if (!comps.is_array() || comps.size() != 3) bad("'components' must list 3 coefficient tables");
    for (std::size_t i = 0; i < 3; ++i) c.components.push_back(terms(comps[i], i));
    if (j.contains("r")) c.r = number(j.at("r"), "r");
    point_dim = 3;
  } else if (c.kind == "pseudo") {
    check_keys(j, allowed({"a", "b", "c"}), "config");
    auto a = expression(require(j, "a"), "a", geo_detail::kTX), b = expression(require(j, "b"), "b", geo_detail::kTX),
         cc = expression(require(j, "c"), "c", geo_detail::kTX);
    c.coefficient_exprs = {a, b, cc};
    c.model = std::make_shared<PseudoModel>(a, b, cc);
  } else if (c.kind == "klein") {
    check_keys(j, allowed({"alpha", "gamma", "n"}), "config");
    auto al = expression(require(j, "alpha"), "alpha", geo_detail::kTX);
    auto ga = expression(require(j, "gamma"), "gamma", geo_detail::kTX);
    c.klein_n = natural(require(j, "n"), "n", false);
    c.coefficient_exprs = {al, ga};
    c.model = std::make_shared<KleinModel>(al, ga, c.klein_n);
  } else if (c.kind == "almost") {
    check_keys(j, allowed({"v"}), "config");
    auto v = expression(require(j, "v"), "v", geo_detail::kXY);
    c.coefficient_exprs = {v};
    c.model = std::make_shared<AlmostModel>(v);
  } else {
    bad("unknown kind '" + c.kind + "' (expected raw_field, series_field, pseudo, klein or almost)");
  }
  if (j.contains("points")) c.points = point_list(j.at("points"), "points", point_dim);
  if (j.contains("seeds")) {
    if (c.kind != "raw_field") bad("'seeds' applies to raw_field only");
    c.seeds = point_list(j.at("seeds"), "seeds", 3);
  }
  if (j.contains("options")) c.options = options(j.at("options"));
  if (j.contains("geodesics")) c.geodesics = geodesics(j.at("geodesics"));
  if (j.contains("flatten")) c.flatten = flatten(j.at("flatten"));
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(Errc::ConfigError, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  Json j;
  try {
    j = Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    fail(Errc::ConfigError, std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace singfield::cli
