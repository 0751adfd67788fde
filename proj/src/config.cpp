#include "rcm/config.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

#include <json.hpp>

namespace rcm {

using nlohmann::json;

std::string format_double17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.dim = 1;
  c.nbhd = Neighborhood::nearest(1);
  c.env.kind = IID{UniformDist{1.0, 2.0}};
  c.env.seed = 1;
  c.ns = {8, 16};
  c.omegas = {1.0};
  c.seeds = {1, 2, 3, 4};
  c.floquet.v = {1.0};
  return c;
}

namespace {

json env_to_json(const EnvironmentSpec& env) {
  json j;
  if (const auto* c = std::get_if<Constant>(&env.kind)) {
    j["kind"] = "constant";
    j["c0"] = c->c0;
  } else if (const auto* iid = std::get_if<IID>(&env.kind)) {
    j["kind"] = "iid";
    json d;
    if (const auto* u = std::get_if<UniformDist>(&iid->dist)) {
      d["type"] = "uniform";
      d["a"] = u->a;
      d["b"] = u->b;
    } else if (const auto* ln = std::get_if<LogNormalDist>(&iid->dist)) {
      d["type"] = "lognormal";
      d["mu"] = ln->mu;
      d["s"] = ln->s;
    } else {
      const auto& tp = std::get<TwoPointDist>(iid->dist);
      d["type"] = "two_point";
      d["lo"] = tp.lo;
      d["hi"] = tp.hi;
      d["p_hi"] = tp.p_hi;
    }
    j["distribution"] = d;
  } else {
    const auto& pat = std::get<Periodic>(env.kind);
    j["kind"] = "periodic";
    j["periods"] = pat.periods;
    j["values"] = pat.values;
  }
  return j;
}

EnvironmentSpec env_from_json(const json& j) {
  EnvironmentSpec env;
  const std::string kind = j.value("kind", "");
  if (kind == "constant") {
    env.kind = Constant{j.value("c0", 1.0)};
  } else if (kind == "iid") {
    if (!j.contains("distribution"))
      throw ConfigError("environment.distribution", "missing");
    const json& d = j.at("distribution");
    const std::string type = d.value("type", "");
    if (type == "uniform")
      env.kind = IID{UniformDist{d.value("a", 1.0), d.value("b", 2.0)}};
    else if (type == "lognormal")
      env.kind = IID{LogNormalDist{d.value("mu", 0.0), d.value("s", 0.25)}};
    else if (type == "two_point")
      env.kind =
          IID{TwoPointDist{d.value("lo", 1.0), d.value("hi", 2.0), d.value("p_hi", 0.5)}};
    else
      throw ConfigError("environment.distribution.type",
                        "must be uniform, lognormal or two_point");
  } else if (kind == "periodic") {
    Periodic pat;
    if (!j.contains("periods")) throw ConfigError("environment.periods", "missing");
    pat.periods = j.at("periods").get<ivec>();
    if (!j.contains("values")) throw ConfigError("environment.values", "missing");
    pat.values = j.at("values").get<std::vector<std::vector<double>>>();
    env.kind = std::move(pat);
  } else {
    throw ConfigError("environment.kind", "must be constant, iid or periodic");
  }
  return env;
}

}  // namespace

std::string RunConfig::canonical_json() const {
  json j;
  j["dim"] = dim;
  json hs = json::array();
  for (const auto& z : nbhd.half_set) hs.push_back(z);
  j["neighborhood"] = {{"half_set", hs}};
  j["environment"] = env_to_json(env);
  j["ns"] = ns;
  j["omegas"] = omegas;
  j["seeds"] = seeds;
  j["solver"] = {
      {"tol", solver.tol},
      {"max_iter", solver.max_iter},
      {"method", solver.method == SolveMethod::cocg
                     ? "cocg"
                     : (solver.method == SolveMethod::dense ? "dense"
                                                            : "coupled_real_minres")},
      {"precond", solver.precond == Precond::none ? "none" : "diagonal"},
      {"dense_cap", solver.dense_site_cap},
  };
  j["floquet"] = {
      {"lambda", floquet.lambda},         {"v", floquet.v},
      {"steps_per_period", floquet.steps_per_period},
      {"phases", floquet.phases},         {"power_tol", floquet.power_tol},
      {"power_max_iter", floquet.power_max_iter},
  };
  j["output"] = {{"format", output.format}, {"dir", output.dir}};
  return j.dump();
}

std::string RunConfig::hash() const {
  const std::string s = canonical_json();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig RunConfig::parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("document", std::string("not valid JSON: ") + e.what());
  }

  RunConfig c = defaults();
  try {
    if (j.contains("dim")) c.dim = j.at("dim").get<int>();
    if (c.dim < 1) throw ConfigError("dim", "must be a positive integer");

    if (j.contains("neighborhood")) {
      std::vector<ivec> half;
      for (const auto& z : j.at("neighborhood").at("half_set")) half.push_back(z.get<ivec>());
      try {
        c.nbhd = make_neighborhood(half);
      } catch (const ValidationError& e) {
        throw ConfigError("neighborhood.half_set", e.what());
      }
    } else {
      c.nbhd = Neighborhood::nearest(c.dim);
    }
    if (c.nbhd.dim != c.dim)
      throw ConfigError("neighborhood.half_set", "dimension does not match dim");

    if (j.contains("environment")) c.env = env_from_json(j.at("environment"));
    try {
      validate_spec(c.env, c.nbhd);
    } catch (const ValidationError& e) {
      throw ConfigError("environment", e.what());
    }
    if (j.contains("environment") && j.at("environment").contains("seed"))
      c.env.seed = j.at("environment").at("seed").get<std::uint64_t>();

    if (j.contains("ns")) c.ns = j.at("ns").get<std::vector<std::int64_t>>();
    if (c.ns.empty()) throw ConfigError("ns", "must be nonempty");
    for (std::int64_t n : c.ns)
      if (n <= 2 * c.nbhd.max_norm)
        throw ConfigError("ns", "every n must exceed twice the neighbourhood radius");

    if (j.contains("omegas")) c.omegas = j.at("omegas").get<std::vector<double>>();
    if (c.omegas.empty()) throw ConfigError("omegas", "must be nonempty");
    for (double w : c.omegas)
      if (w < 0.0 || !std::isfinite(w)) throw ConfigError("omegas", "must be nonnegative");

    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (c.seeds.empty()) throw ConfigError("seeds", "must be nonempty");

    if (j.contains("solver")) {
      const json& s = j.at("solver");
      c.solver.tol = s.value("tol", c.solver.tol);
      c.solver.max_iter = s.value("max_iter", c.solver.max_iter);
      c.solver.dense_site_cap = s.value("dense_cap", c.solver.dense_site_cap);
      const std::string method = s.value("method", "coupled_real_minres");
      if (method == "coupled_real_minres")
        c.solver.method = SolveMethod::coupled_real_minres;
      else if (method == "cocg")
        c.solver.method = SolveMethod::cocg;
      else if (method == "dense")
        c.solver.method = SolveMethod::dense;
      else
        throw ConfigError("solver.method", "must be coupled_real_minres, cocg or dense");
      const std::string pc = s.value("precond", "diagonal");
      if (pc == "none")
        c.solver.precond = Precond::none;
      else if (pc == "diagonal")
        c.solver.precond = Precond::diagonal;
      else
        throw ConfigError("solver.precond", "must be none or diagonal");
      try {
        c.solver.validate();
      } catch (const ValidationError& e) {
        throw ConfigError("solver", e.what());
      }
    }

    if (j.contains("floquet")) {
      const json& f = j.at("floquet");
      c.floquet.lambda = f.value("lambda", c.floquet.lambda);
      if (!(c.floquet.lambda > 0.0)) throw ConfigError("floquet.lambda", "must be positive");
      if (f.contains("v")) c.floquet.v = f.at("v").get<std::vector<double>>();
      c.floquet.steps_per_period = f.value("steps_per_period", c.floquet.steps_per_period);
      if (c.floquet.steps_per_period < 1)
        throw ConfigError("floquet.steps_per_period", "must be positive");
      c.floquet.phases = f.value("phases", c.floquet.phases);
      if (c.floquet.phases < 1) throw ConfigError("floquet.phases", "must be positive");
      c.floquet.power_tol = f.value("power_tol", c.floquet.power_tol);
      c.floquet.power_max_iter = f.value("power_max_iter", c.floquet.power_max_iter);
    }
    if (c.floquet.v.empty()) {
      c.floquet.v.assign(c.dim, 0.0);
      c.floquet.v[0] = 1.0;
    }
    if (static_cast<int>(c.floquet.v.size()) != c.dim)
      throw ConfigError("floquet.v", "dimension does not match dim");

    if (j.contains("output")) {
      const json& o = j.at("output");
      c.output.format = o.value("format", c.output.format);
      c.output.dir = o.value("dir", c.output.dir);
    }
    if (c.output.format != "csv" && c.output.format != "json")
      throw ConfigError("output.format", "must be csv or json");
  } catch (const json::exception& e) {
    throw ConfigError("document", e.what());
  }
  return c;
}

namespace {

json sigma_to_json(const MobilityMatrix& s) {
  json rows = json::array();
  for (int jj = 0; jj < s.dim; ++jj) {
    json row = json::array();
    for (int k = 0; k < s.dim; ++k)
      row.push_back({{"re", s.at(jj, k).real()}, {"im", s.at(jj, k).imag()}});
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::string mobility_record_json(const MobilityMatrix& sigma, std::uint64_t seed,
                                 const std::string& config_hash,
                                 const std::string& generated_at) {
  json j;
  j["tool_version"] = kToolVersion;
  j["config_hash"] = config_hash;
  j["generated_at"] = generated_at;
  j["n"] = sigma.n;
  j["omega"] = sigma.omega;
  j["seed"] = seed;
  j["sigma"] = sigma_to_json(sigma);
  j["solver"] = {{"iterations", sigma.solver_iterations},
                 {"residual", sigma.solver_residual}};
  return j.dump(2) + "\n";
}

std::string mobility_record_csv(const MobilityMatrix& sigma, std::uint64_t seed,
                                const std::string& config_hash,
                                const std::string& generated_at) {
  std::ostringstream os;
  os << "# tool_version " << kToolVersion << "\n";
  os << "# config_hash " << config_hash << "\n";
  os << "# generated_at " << generated_at << "\n";
  os << "n,omega,seed,j,k,re,im,iterations,residual\n";
  for (int j = 0; j < sigma.dim; ++j)
    for (int k = 0; k < sigma.dim; ++k)
      os << sigma.n << ',' << format_double17(sigma.omega) << ',' << seed << ',' << j
         << ',' << k << ',' << format_double17(sigma.at(j, k).real()) << ','
         << format_double17(sigma.at(j, k).imag()) << ',' << sigma.solver_iterations
         << ',' << format_double17(sigma.solver_residual) << "\n";
  return os.str();
}

std::string sweep_csv(const std::vector<SweepRecord>& records,
                      const std::string& config_hash, const std::string& generated_at) {
  std::ostringstream os;
  os << "# tool_version " << kToolVersion << "\n";
  os << "# config_hash " << config_hash << "\n";
  os << "# generated_at " << generated_at << "\n";
  std::size_t nh = 0;
  for (const auto& r : records) nh = std::max(nh, r.avg_c.size());
  os << "n,omega,seed,ok,j,k,re,im,iterations,residual";
  for (std::size_t zi = 0; zi < nh; ++zi) os << ",avg_c_" << zi;
  for (std::size_t zi = 0; zi < nh; ++zi) os << ",avg_c2_" << zi;
  os << ",theta_l2,theta_energy\n";
  for (const auto& r : records) {
    const int d = r.ok ? r.sigma.dim : 1;
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) {
        os << r.n << ',' << format_double17(r.omega) << ',' << r.seed << ','
           << (r.ok ? 1 : 0) << ',' << j << ',' << k << ',';
        if (r.ok)
          os << format_double17(r.sigma.at(j, k).real()) << ','
             << format_double17(r.sigma.at(j, k).imag()) << ','
             << r.sigma.solver_iterations << ','
             << format_double17(r.sigma.solver_residual);
        else
          os << "nan,nan,0,nan";
        for (std::size_t zi = 0; zi < nh; ++zi)
          os << ',' << (zi < r.avg_c.size() ? format_double17(r.avg_c[zi]) : "nan");
        for (std::size_t zi = 0; zi < nh; ++zi)
          os << ',' << (zi < r.avg_c2.size() ? format_double17(r.avg_c2[zi]) : "nan");
        os << ',' << format_double17(r.theta_l2) << ','
           << format_double17(r.theta_energy) << "\n";
      }
    }
  }
  return os.str();
}

std::string convergence_report_json(const ConvergenceReport& rep,
                                    const std::string& config_hash,
                                    const std::string& generated_at) {
  json j;
  j["tool_version"] = kToolVersion;
  j["config_hash"] = config_hash;
  j["generated_at"] = generated_at;
  j["ns"] = rep.ns;
  j["omegas"] = rep.omegas;
  j["all_monotone"] = rep.all_monotone;
  json series = json::array();
  for (std::size_t wi = 0; wi < rep.omegas.size(); ++wi) {
    json entries = json::array();
    for (const auto& es : rep.series[wi]) {
      entries.push_back({{"j", es.j},
                         {"k", es.k},
                         {"mean_re", es.mean_re},
                         {"std_re", es.std_re},
                         {"mean_im", es.mean_im},
                         {"std_im", es.std_im},
                         {"diff_re", es.diff_re},
                         {"diff_im", es.diff_im},
                         {"monotone_shrinking", es.monotone_shrinking}});
    }
    series.push_back({{"omega", rep.omegas[wi]}, {"entries", entries}});
  }
  j["series"] = series;
  return j.dump(2) + "\n";
}

std::string validation_report_json(const LinearResponseResult& lr, double gradient_dev,
                                   const QuadraticSplit& qs, double conj_dev,
                                   const EnergyIdentityErrors& energy, std::int64_t n,
                                   std::uint64_t seed, const std::string& config_hash,
                                   const std::string& generated_at) {
  json j;
  j["tool_version"] = kToolVersion;
  j["config_hash"] = config_hash;
  j["generated_at"] = generated_at;
  j["n"] = n;
  j["seed"] = seed;
  j["omega"] = lr.omega;
  j["lambda"] = lr.lambda;
  j["times"] = lr.times;
  j["deviation"] = lr.deviation;
  j["deviation_half"] = lr.deviation_half;
  j["lambda_part"] = lr.lambda_part;
  j["lambda_part_half"] = lr.lambda_part_half;
  j["lambda_ratio"] = lr.lambda_ratio;
  json per_time = json::array();
  for (std::size_t i = 0; i < lr.times.size(); ++i)
    per_time.push_back(
        {{"t", lr.times[i]}, {"fd", lr.fd[i]}, {"predicted", lr.predicted[i]}});
  j["per_time"] = per_time;
  j["identities"] = {
      {"gradient_deviation", gradient_dev},
      {"quad_re_discrepancy", qs.re_discrepancy},
      {"quad_im_discrepancy", qs.im_discrepancy},
      {"im_sign_observed", qs.im_sign_observed},
      {"conjugation_deviation", conj_dev},
      {"energy_l2_identity", energy.l2_identity},
      {"energy_dirichlet_identity", energy.dirichlet_identity},
  };
  return j.dump(2) + "\n";
}

}  // namespace rcm
