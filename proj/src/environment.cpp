#include "rcm/environment.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace rcm {

namespace {

// SplitMix64 mixing; the de-facto standard finalizer for counter-based
// derivation of i.i.d. values from coordinates.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Hash of (seed, x, zi, stream); box-independent by construction.
std::uint64_t edge_hash(std::uint64_t seed, const ivec& x, int zi, int stream) {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (std::int64_t c : x) h = splitmix64(h ^ static_cast<std::uint64_t>(c));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(zi) << 32));
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  return h;
}

// uniform in (0,1]; never returns 0 so logs are safe
inline double to_unit(std::uint64_t h) {
  return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
}

double draw_iid(const IidDistribution& dist, std::uint64_t seed, const ivec& x, int zi) {
  const double u = to_unit(edge_hash(seed, x, zi, 0));
  if (const auto* uni = std::get_if<UniformDist>(&dist))
    return uni->a + (uni->b - uni->a) * (u - 0x1.0p-53);  // [a,b)
  if (const auto* ln = std::get_if<LogNormalDist>(&dist)) {
    const double u2 = to_unit(edge_hash(seed, x, zi, 1));
    const double g = std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * u2);
    return std::exp(ln->mu + ln->s * g);
  }
  const auto& tp = std::get<TwoPointDist>(dist);
  return u <= tp.p_hi ? tp.hi : tp.lo;
}

std::size_t pattern_site(const Periodic& pat, const ivec& x) {
  std::size_t idx = 0, stride = 1;
  for (std::size_t k = 0; k < pat.periods.size(); ++k) {
    const std::int64_t p = pat.periods[k];
    const std::int64_t xk = ((x[k] % p) + p) % p;
    idx += static_cast<std::size_t>(xk) * stride;
    stride *= static_cast<std::size_t>(p);
  }
  return idx;
}

}  // namespace

std::size_t Box::volume() const {
  std::size_t v = 1;
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (hi[k] <= lo[k]) return 0;
    v *= static_cast<std::size_t>(hi[k] - lo[k]);
  }
  return v;
}

bool Box::contains(const Box& inner) const {
  for (std::size_t k = 0; k < lo.size(); ++k)
    if (inner.lo[k] < lo[k] || inner.hi[k] > hi[k]) return false;
  return true;
}

Box Box::cube(int dim, std::int64_t lo, std::int64_t hi) {
  return Box{ivec(dim, lo), ivec(dim, hi)};
}

void validate_spec(const EnvironmentSpec& spec, const Neighborhood& nbhd) {
  if (const auto* c = std::get_if<Constant>(&spec.kind)) {
    if (!(c->c0 > 0.0) || !std::isfinite(c->c0))
      throw ValidationError("environment: constant value must be positive");
    return;
  }
  if (const auto* iid = std::get_if<IID>(&spec.kind)) {
    if (const auto* u = std::get_if<UniformDist>(&iid->dist)) {
      if (!(u->a > 0.0) || !(u->b >= u->a))
        throw ValidationError("environment: uniform support must be 0 < a <= b");
    } else if (const auto* ln = std::get_if<LogNormalDist>(&iid->dist)) {
      if (!(ln->s >= 0.0) || !std::isfinite(ln->mu) || !std::isfinite(ln->s))
        throw ValidationError("environment: lognormal parameters invalid");
    } else {
      const auto& tp = std::get<TwoPointDist>(iid->dist);
      if (!(tp.lo > 0.0) || !(tp.hi > 0.0) || tp.p_hi < 0.0 || tp.p_hi > 1.0)
        throw ValidationError("environment: two-point values must be positive, p in [0,1]");
    }
    return;
  }
  const auto& pat = std::get<Periodic>(spec.kind);
  if (static_cast<int>(pat.periods.size()) != nbhd.dim)
    throw ValidationError("environment: pattern periods dimension mismatch");
  std::size_t sites = 1;
  for (std::int64_t p : pat.periods) {
    if (p < 1) throw ValidationError("environment: pattern periods must be positive");
    sites *= static_cast<std::size_t>(p);
  }
  if (pat.values.size() != sites)
    throw ValidationError("environment: pattern needs one value row per pattern site");
  for (const auto& row : pat.values) {
    if (static_cast<int>(row.size()) != nbhd.n_half())
      throw ValidationError("environment: pattern row needs one value per half-set direction");
    for (double c : row)
      if (!(c > 0.0) || !std::isfinite(c))
        throw ValidationError("environment: pattern values must be positive");
  }
}

ConductanceField::ConductanceField(Neighborhood nbhd, Box box, std::vector<double> values)
    : nbhd_(std::move(nbhd)), box_(std::move(box)), values_(std::move(values)) {
  if (box_.dim() != nbhd_.dim)
    throw ValidationError("field: box dimension mismatch");
  if (box_.volume() == 0) throw ValidationError("field: empty box");
  if (values_.size() != box_.volume() * nbhd_.half_set.size())
    throw ValidationError("field: value array has wrong size");
  for (double c : values_)
    if (!(c > 0.0) || !std::isfinite(c))
      throw ValidationError("field: conductances must be positive and finite");
}

double ConductanceField::at(const ivec& x, int zi) const {
  std::size_t idx = 0, stride = 1;
  for (int k = 0; k < nbhd_.dim; ++k) {
    if (x[k] < box_.lo[k] || x[k] >= box_.hi[k])
      throw ValidationError("field: coordinate outside sampled box");
    idx += static_cast<std::size_t>(x[k] - box_.lo[k]) * stride;
    stride *= static_cast<std::size_t>(box_.hi[k] - box_.lo[k]);
  }
  return values_[idx * nbhd_.half_set.size() + zi];
}

double conductance_at(const EnvironmentSpec& spec, const Neighborhood& nbhd,
                      const ivec& x, int zi) {
  if (const auto* c = std::get_if<Constant>(&spec.kind)) return c->c0;
  if (const auto* iid = std::get_if<IID>(&spec.kind))
    return draw_iid(iid->dist, spec.seed, x, zi);
  const auto& pat = std::get<Periodic>(spec.kind);
  return pat.values[pattern_site(pat, x)][zi];
}

ConductanceField sample_field(const EnvironmentSpec& spec, const Neighborhood& nbhd,
                              const Box& box) {
  validate_spec(spec, nbhd);
  if (box.dim() != nbhd.dim) throw ValidationError("sample_field: box dimension mismatch");
  if (box.volume() == 0) throw ValidationError("sample_field: empty box");

  const int nh = nbhd.n_half();
  std::vector<double> values(box.volume() * static_cast<std::size_t>(nh));
  ivec x = box.lo;
  for (std::size_t s = 0; s < box.volume(); ++s) {
    for (int zi = 0; zi < nh; ++zi)
      values[s * static_cast<std::size_t>(nh) + zi] = conductance_at(spec, nbhd, x, zi);
    for (int k = 0; k < nbhd.dim; ++k) {
      if (++x[k] < box.hi[k]) break;
      x[k] = box.lo[k];
    }
  }
  return ConductanceField(nbhd, box, std::move(values));
}

TorusModel periodize(const ConductanceField& field, std::int64_t n) {
  const Neighborhood& nbhd = field.neighborhood();
  if (n <= 2 * nbhd.max_norm)
    throw ValidationError("periodize: torus side must exceed twice the neighbourhood radius");
  if (!field.box().contains(Box::cube(nbhd.dim, 0, n)))
    throw ValidationError("periodize: field box does not cover the fundamental cell");

  std::size_t sites = 1;
  for (int k = 0; k < nbhd.dim; ++k) sites *= static_cast<std::size_t>(n);
  const int nh = nbhd.n_half();
  std::vector<double> cond(sites * static_cast<std::size_t>(nh));
  ivec x(nbhd.dim, 0);
  for (std::size_t s = 0; s < sites; ++s) {
    for (int zi = 0; zi < nh; ++zi)
      cond[s * static_cast<std::size_t>(nh) + zi] = field.at(x, zi);
    for (int k = 0; k < nbhd.dim; ++k) {
      if (++x[k] < n) break;
      x[k] = 0;
    }
  }
  return TorusModel(nbhd, n, std::move(cond));
}

TorusModel make_torus(const EnvironmentSpec& spec, const Neighborhood& nbhd,
                      std::int64_t n) {
  return periodize(sample_field(spec, nbhd, Box::cube(nbhd.dim, 0, n)), n);
}

std::vector<double> ergodic_average(const ConductanceField& field, std::int64_t n,
                                    int moment) {
  if (moment != 1 && moment != 2)
    throw ValidationError("ergodic_average: moment must be 1 or 2");
  const Neighborhood& nbhd = field.neighborhood();
  if (!field.box().contains(Box::cube(nbhd.dim, 0, n)))
    throw ValidationError("ergodic_average: field box does not cover [0,n)^d");

  std::size_t sites = 1;
  for (int k = 0; k < nbhd.dim; ++k) sites *= static_cast<std::size_t>(n);
  std::vector<double> avg(nbhd.half_set.size(), 0.0);
  ivec x(nbhd.dim, 0);
  for (std::size_t s = 0; s < sites; ++s) {
    for (int zi = 0; zi < nbhd.n_half(); ++zi) {
      const double c = field.at(x, zi);
      avg[zi] += moment == 1 ? c : c * c;
    }
    for (int k = 0; k < nbhd.dim; ++k) {
      if (++x[k] < n) break;
      x[k] = 0;
    }
  }
  for (double& a : avg) a /= static_cast<double>(sites);
  return avg;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string field_to_json(const ConductanceField& field) {
  const Neighborhood& nbhd = field.neighborhood();
  std::ostringstream os;
  os << "{\"dim\":" << nbhd.dim << ",\"box\":[[";
  for (int k = 0; k < nbhd.dim; ++k) os << (k ? "," : "") << field.box().lo[k];
  os << "],[";
  for (int k = 0; k < nbhd.dim; ++k) os << (k ? "," : "") << field.box().hi[k];
  os << "]],\"neighborhood\":{\"half_set\":[";
  for (int zi = 0; zi < nbhd.n_half(); ++zi) {
    os << (zi ? ",[" : "[");
    for (int k = 0; k < nbhd.dim; ++k) os << (k ? "," : "") << nbhd.half_set[zi][k];
    os << "]";
  }
  os << "]},\"values\":[";
  bool first = true;
  ivec x = field.box().lo;
  for (std::size_t s = 0; s < field.box().volume(); ++s) {
    for (int zi = 0; zi < nbhd.n_half(); ++zi) {
      os << (first ? "" : ",") << "{\"x\":[";
      first = false;
      for (int k = 0; k < nbhd.dim; ++k) os << (k ? "," : "") << x[k];
      os << "],\"z\":[";
      for (int k = 0; k < nbhd.dim; ++k) os << (k ? "," : "") << nbhd.half_set[zi][k];
      os << "],\"c\":" << fmt17(field.at(x, zi)) << "}";
    }
    for (int k = 0; k < nbhd.dim; ++k) {
      if (++x[k] < field.box().hi[k]) break;
      x[k] = field.box().lo[k];
    }
  }
  os << "]}";
  return os.str();
}

ConductanceField field_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  const int dim = j.at("dim").get<int>();
  Box box;
  box.lo = j.at("box").at(0).get<ivec>();
  box.hi = j.at("box").at(1).get<ivec>();
  std::vector<ivec> half;
  for (const auto& z : j.at("neighborhood").at("half_set"))
    half.push_back(z.get<ivec>());
  Neighborhood nbhd = make_neighborhood(half);
  if (nbhd.dim != dim) throw ValidationError("field json: dimension mismatch");

  std::vector<double> values(box.volume() * half.size(),
                             std::numeric_limits<double>::quiet_NaN());
  auto zi_of = [&](const ivec& z) {
    for (int zi = 0; zi < nbhd.n_half(); ++zi)
      if (nbhd.half_set[zi] == z) return zi;
    throw ValidationError("field json: unknown direction in values");
  };
  for (const auto& rec : j.at("values")) {
    const ivec x = rec.at("x").get<ivec>();
    const int zi = zi_of(rec.at("z").get<ivec>());
    std::size_t idx = 0, stride = 1;
    for (int k = 0; k < dim; ++k) {
      if (x[k] < box.lo[k] || x[k] >= box.hi[k])
        throw ValidationError("field json: coordinate outside box");
      idx += static_cast<std::size_t>(x[k] - box.lo[k]) * stride;
      stride *= static_cast<std::size_t>(box.hi[k] - box.lo[k]);
    }
    values[idx * half.size() + static_cast<std::size_t>(zi)] = rec.at("c").get<double>();
  }
  for (double v : values)
    if (std::isnan(v)) throw ValidationError("field json: missing edge value");
  return ConductanceField(std::move(nbhd), std::move(box), std::move(values));
}

}  // namespace rcm
