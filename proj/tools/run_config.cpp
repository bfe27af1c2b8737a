#include "run_config.hpp"

#include <cstdlib>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace fracmag::cli
{

namespace
{

// Checks that an object only carries known keys and reads typed fields with defaults.
class Obj
{
public:
  Obj(const Json &j, std::string where, std::set<std::string> keys)
      : j_(j), where_(std::move(where))
  {
    if (!j.is_object())
    {
      throw ConfigError(where_ + " must be an object");
    }
    for (const auto &[k, v] : j.items())
    {
      if (!keys.count(k))
      {
        throw ConfigError("unknown key '" + k + "' in " + where_);
      }
    }
  }

  bool Has(const std::string &k) const { return j_.contains(k); }
  const Json &At(const std::string &k) const
  {
    if (!Has(k))
    {
      throw ConfigError("missing key '" + k + "' in " + where_);
    }
    return j_.at(k);
  }

  double Num(const std::string &k, std::optional<double> def = {}) const
  {
    if (!Has(k))
    {
      if (def) return *def;
      At(k);
    }
    if (!j_.at(k).is_number())
    {
      throw ConfigError(where_ + "." + k + " must be a number");
    }
    return j_.at(k).get<double>();
  }

  long long Int(const std::string &k, std::optional<long long> def = {}) const
  {
    if (!Has(k))
    {
      if (def) return *def;
      At(k);
    }
    if (!j_.at(k).is_number_integer())
    {
      throw ConfigError(where_ + "." + k + " must be an integer");
    }
    return j_.at(k).get<long long>();
  }

  std::string Str(const std::string &k, std::optional<std::string> def = {}) const
  {
    if (!Has(k))
    {
      if (def) return *def;
      At(k);
    }
    if (!j_.at(k).is_string())
    {
      throw ConfigError(where_ + "." + k + " must be a string");
    }
    return j_.at(k).get<std::string>();
  }

  bool Bool(const std::string &k, bool def) const
  {
    if (!Has(k)) return def;
    if (!j_.at(k).is_boolean())
    {
      throw ConfigError(where_ + "." + k + " must be a boolean");
    }
    return j_.at(k).get<bool>();
  }

  std::vector<double> Nums(const std::string &k) const
  {
    const Json &a = At(k);
    if (!a.is_array())
    {
      throw ConfigError(where_ + "." + k + " must be an array of numbers");
    }
    std::vector<double> out;
    for (const auto &v : a)
    {
      if (!v.is_number())
      {
        throw ConfigError(where_ + "." + k + " must be an array of numbers");
      }
      out.push_back(v.get<double>());
    }
    return out;
  }

  const std::string &where() const { return where_; }

private:
  const Json &j_;
  std::string where_;
};

Domain ParseDomain(const Json &j)
{
  Obj o(j, "domain", {"kind", "bounds", "center", "radius"});
  const std::string kind = o.Str("kind");
  try
  {
    if (kind == "interval" || kind == "rectangle")
    {
      const Json &b = o.At("bounds");
      const std::size_t n = kind == "interval" ? 1 : 2;
      if (!b.is_array() || b.size() != n)
      {
        throw ConfigError("domain.bounds must hold " + std::to_string(n) + " [lo, hi] pairs");
      }
      std::vector<std::pair<double, double>> pairs;
      for (const auto &p : b)
      {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
        {
          throw ConfigError("domain.bounds entries must be [lo, hi] number pairs");
        }
        pairs.emplace_back(p[0].get<double>(), p[1].get<double>());
      }
      Domain d = kind == "interval" ? Domain::Interval(pairs[0].first, pairs[0].second)
                                    : Domain::Rectangle(pairs[0].first, pairs[0].second,
                                                        pairs[1].first, pairs[1].second);
      d.Validate();
      return d;
    }
    if (kind == "disk")
    {
      const auto c = o.Nums("center");
      if (c.size() != 2)
      {
        throw ConfigError("domain.center must have two coordinates");
      }
      Domain d = Domain::Disk(c[0], c[1], o.Num("radius"));
      d.Validate();
      return d;
    }
  }
  catch (const InvalidDomain &e)
  {
    throw ConfigError(std::string("invalid domain: ") + e.what());
  }
  throw ConfigError("domain.kind must be interval, rectangle or disk");
}

Point Vec(const std::vector<double> &v, int dim, const std::string &what)
{
  if (static_cast<int>(v.size()) != dim)
  {
    throw ConfigError(what + " must have " + std::to_string(dim) + " components");
  }
  return dim == 1 ? Point(v[0], 0.0) : Point(v[0], v[1]);
}

MagneticPotential ParsePotential(const Json &j, int dim)
{
  Obj o(j, "potential", {"family", "a", "B", "b"});
  const std::string fam = o.Str("family");
  MagneticPotential A;
  if (fam == "zero")
  {
    A = MagneticPotential::Zero();
  }
  else if (fam == "constant")
  {
    A = MagneticPotential::Constant(Vec(o.Nums("a"), dim, "potential.a"));
  }
  else if (fam == "affine")
  {
    const Json &B = o.At("B");
    Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
    if (!B.is_array() || static_cast<int>(B.size()) != dim)
    {
      throw ConfigError("potential.B must be a " + std::to_string(dim) + "x" +
                        std::to_string(dim) + " matrix");
    }
    for (int r = 0; r < dim; ++r)
    {
      if (!B[r].is_array() || static_cast<int>(B[r].size()) != dim)
      {
        throw ConfigError("potential.B rows have the wrong length");
      }
      for (int c = 0; c < dim; ++c)
      {
        if (!B[r][c].is_number())
        {
          throw ConfigError("potential.B entries must be numbers");
        }
        M(r, c) = B[r][c].get<double>();
      }
    }
    const Point a = o.Has("a") ? Vec(o.Nums("a"), dim, "potential.a") : Point::Zero();
    A = MagneticPotential::Affine(M, a);
  }
  else if (fam == "landau")
  {
    if (dim != 2)
    {
      throw ConfigError("the landau potential is only defined in 2D");
    }
    A = MagneticPotential::Landau(o.Num("b"));
  }
  else
  {
    throw ConfigError("potential.family must be zero, constant, affine or landau");
  }
  try
  {
    A.ValidateFor(dim);
  }
  catch (const InvalidArgument &e)
  {
    throw ConfigError(e.what());
  }
  return A;
}

SpectralValue ParseValue(const Json &j, const std::string &where, bool allow_gap)
{
  SpectralValue v;
  if (j.is_number())
  {
    v.value = j.get<double>();
    return v;
  }
  Obj o(j, where, {"mode", "value", "i", "j", "index", "factor", "h", "margin"});
  v.mode = o.Str("mode");
  if (v.mode == "absolute")
  {
    v.value = o.Num("value");
  }
  else if (v.mode == "midpoint")
  {
    v.i = static_cast<int>(o.Int("i"));
    v.j = static_cast<int>(o.Int("j"));
    if (v.i < 1 || v.j < 1)
    {
      throw ConfigError(where + ": eigenvalue indices are 1-based");
    }
  }
  else if (v.mode == "scaled")
  {
    v.index = static_cast<int>(o.Int("index"));
    v.factor = o.Num("factor");
    if (v.index < 1)
    {
      throw ConfigError(where + ": eigenvalue indices are 1-based");
    }
  }
  else if (v.mode == "below_gap" && allow_gap)
  {
    v.h = static_cast<int>(o.Int("h"));
    v.margin = o.Num("margin");
    if (v.h < 1)
    {
      throw ConfigError(where + ": eigenvalue indices are 1-based");
    }
  }
  else
  {
    throw ConfigError(where + ".mode '" + v.mode + "' is not supported here");
  }
  return v;
}

Json ValueJson(const SpectralValue &v)
{
  if (v.mode == "absolute") return {{"mode", v.mode}, {"value", v.value}};
  if (v.mode == "midpoint") return {{"mode", v.mode}, {"i", v.i}, {"j", v.j}};
  if (v.mode == "scaled") return {{"mode", v.mode}, {"index", v.index}, {"factor", v.factor}};
  return {{"mode", v.mode}, {"h", v.h}, {"margin", v.margin}};
}

int MaxIndex(const SpectralValue &v)
{
  if (v.mode == "midpoint") return std::max(v.i, v.j);
  if (v.mode == "scaled") return v.index;
  if (v.mode == "below_gap") return v.h;
  return 0;
}

}  // namespace

void CheckOrder(int dim, double s)
{
  if (!(s > 0.0 && s < 1.0))
  {
    std::ostringstream os;
    os << "s = " << s << " is outside (0, 1)";
    throw ConfigError(os.str());
  }
  FractionalOrder(s).CheckDimension(dim);
}

RunConfig ParseConfig(const Json &j)
{
  Obj o(j, "config", {"domain", "resolution", "s", "potential", "m_max", "quadrature",
                      "reproducible", "threads", "problem", "courant", "sweep", "validate",
                      "output_dir", "description"});
  RunConfig c;
  c.domain = ParseDomain(o.At("domain"));
  c.resolution = static_cast<int>(o.Int("resolution"));
  if (c.resolution < 2)
  {
    throw ConfigError("resolution must be >= 2");
  }
  c.s = o.Num("s");
  c.potential_json = o.Has("potential") ? o.At("potential") : Json{{"family", "zero"}};
  c.potential = ParsePotential(c.potential_json, c.Dim());
  c.m_max = static_cast<int>(o.Int("m_max", 8));
  if (c.m_max < 1)
  {
    throw ConfigError("m_max must be >= 1");
  }
  c.reproducible = o.Bool("reproducible", true);
  c.quadrature.threads = static_cast<int>(o.Int("threads", 1));
  if (c.reproducible)
  {
    c.quadrature.threads = 1;
  }
  if (o.Has("quadrature"))
  {
    Obj q(o.At("quadrature"), "quadrature",
          {"far_order", "near_far_order", "near_distance", "near_order", "tail_refinement",
           "tail_order"});
    auto &Q = c.quadrature;
    Q.far_order = static_cast<int>(q.Int("far_order", Q.far_order));
    Q.near_far_order = static_cast<int>(q.Int("near_far_order", Q.near_far_order));
    Q.near_distance = q.Num("near_distance", Q.near_distance);
    Q.near_order = static_cast<int>(q.Int("near_order", Q.near_order));
    Q.tail_refinement = static_cast<int>(q.Int("tail_refinement", Q.tail_refinement));
    Q.tail_order = static_cast<int>(q.Int("tail_order", Q.tail_order));
  }
  try
  {
    c.quadrature.Validate();
  }
  catch (const InvalidArgument &e)
  {
    throw ConfigError(e.what());
  }

  if (o.Has("problem"))
  {
    Obj p(o.At("problem"), "problem",
          {"beta_inf", "nonlinearity", "h", "k", "rho", "method", "tol", "newton_max_iter",
           "minimize_max_iter", "extra_random", "seed", "linking_samples", "dedup_tol"});
    auto &P = c.problem;
    P.present = true;
    P.beta_inf = ParseValue(p.At("beta_inf"), "problem.beta_inf", false);
    Obj nl(p.At("nonlinearity"), "problem.nonlinearity", {"family", "beta0"});
    P.family = nl.Str("family");
    if (P.family != "zero" && P.family != "rational" && P.family != "exponential" &&
        P.family != "constant")
    {
      throw ConfigError("problem.nonlinearity.family must be zero, rational, exponential or constant");
    }
    if (P.family != "zero")
    {
      P.beta0 = ParseValue(nl.At("beta0"), "problem.nonlinearity.beta0", true);
    }
    P.h = static_cast<int>(p.Int("h", 0));
    P.k = static_cast<int>(p.Int("k", 0));
    P.rho = p.Num("rho", P.rho);
    P.method = p.Str("method", P.method);
    P.tol = p.Num("tol", P.tol);
    P.newton_max_iter = static_cast<int>(p.Int("newton_max_iter", P.newton_max_iter));
    P.minimize_max_iter = static_cast<int>(p.Int("minimize_max_iter", P.minimize_max_iter));
    P.extra_random = static_cast<int>(p.Int("extra_random", P.extra_random));
    P.seed = static_cast<std::uint64_t>(p.Int("seed", 1));
    P.linking_samples = static_cast<int>(p.Int("linking_samples", P.linking_samples));
    P.dedup_tol = p.Num("dedup_tol", P.dedup_tol);
    if (P.method != "auto" && P.method != "newton" && P.method != "minimize")
    {
      throw ConfigError("problem.method must be auto, newton or minimize");
    }
    if ((P.h == 0) != (P.k == 0) || P.h < 0 || P.h > P.k || P.k > c.m_max)
    {
      throw ConfigError("problem.h, problem.k must satisfy 1 <= h <= k <= m_max (or both be 0)");
    }
    if (std::max(MaxIndex(P.beta_inf), MaxIndex(P.beta0)) > c.m_max)
    {
      throw ConfigError("problem refers to an eigenvalue beyond m_max");
    }
    if (!(P.rho > 0.0) || !(P.tol > 0.0) || !(P.dedup_tol > 0.0) || P.extra_random < 0 ||
        P.linking_samples < 1 || P.newton_max_iter < 1 || P.minimize_max_iter < 1)
    {
      throw ConfigError("problem solver parameters must be positive");
    }
  }
  if (o.Has("courant"))
  {
    Obj q(o.At("courant"), "courant", {"trials", "seed", "max_level"});
    c.courant_trials = static_cast<int>(q.Int("trials", c.courant_trials));
    c.courant_seed = static_cast<std::uint64_t>(q.Int("seed", 1));
    c.courant_max_level = static_cast<int>(q.Int("max_level", c.courant_max_level));
    if (c.courant_trials < 1 || c.courant_max_level < 0)
    {
      throw ConfigError("courant.trials must be >= 1 and courant.max_level >= 0");
    }
  }
  if (o.Has("sweep"))
  {
    Obj q(o.At("sweep"), "sweep", {"s_list"});
    c.s_list = q.Nums("s_list");
  }
  if (o.Has("validate"))
  {
    Obj q(o.At("validate"), "validate", {"oracle_resolution"});
    c.oracle_resolution = static_cast<int>(q.Int("oracle_resolution", c.oracle_resolution));
    if (c.oracle_resolution < 2)
    {
      throw ConfigError("validate.oracle_resolution must be >= 2");
    }
  }
  c.output_dir = o.Str("output_dir", c.output_dir);

  const int d_est = c.Dim() == 1 ? c.resolution - 1 : (c.resolution - 1) * (c.resolution - 1);
  if (c.m_max > std::max(d_est, 1) && c.domain.kind != DomainKind::Disk)
  {
    throw ConfigError("m_max exceeds the number of interior degrees of freedom");
  }
  CheckOrder(c.Dim(), c.s);
  return c;
}

Json LoadJson(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("cannot read config file '" + path + "'");
  }
  try
  {
    return Json::parse(in);
  }
  catch (const nlohmann::json::exception &e)
  {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

Json Resolved(const RunConfig &c)
{
  Json domain;
  switch (c.domain.kind)
  {
    case DomainKind::Interval:
      domain = {{"kind", "interval"}, {"bounds", {{c.domain.bounds[0].first, c.domain.bounds[0].second}}}};
      break;
    case DomainKind::Rectangle:
      domain = {{"kind", "rectangle"},
                {"bounds",
                 {{c.domain.bounds[0].first, c.domain.bounds[0].second},
                  {c.domain.bounds[1].first, c.domain.bounds[1].second}}}};
      break;
    case DomainKind::Disk:
      domain = {{"kind", "disk"},
                {"center", {c.domain.center.x(), c.domain.center.y()}},
                {"radius", c.domain.radius}};
      break;
  }
  const auto &q = c.quadrature;
  Json j{{"domain", domain},
         {"resolution", c.resolution},
         {"s", c.s},
         {"potential", c.potential_json},
         {"m_max", c.m_max},
         {"quadrature",
          {{"far_order", q.far_order},
           {"near_far_order", q.near_far_order},
           {"near_distance", q.near_distance},
           {"near_order", q.near_order},
           {"tail_refinement", q.tail_refinement},
           {"tail_order", q.tail_order}}},
         {"reproducible", c.reproducible},
         {"threads", q.threads},
         {"courant", {{"trials", c.courant_trials}, {"seed", c.courant_seed}, {"max_level", c.courant_max_level}}},
         {"validate", {{"oracle_resolution", c.oracle_resolution}}},
         {"output_dir", c.output_dir}};
  if (!c.s_list.empty())
  {
    j["sweep"] = {{"s_list", c.s_list}};
  }
  if (c.problem.present)
  {
    const auto &P = c.problem;
    Json nl{{"family", P.family}};
    if (P.family != "zero")
    {
      nl["beta0"] = ValueJson(P.beta0);
    }
    j["problem"] = {{"beta_inf", ValueJson(P.beta_inf)},
                    {"nonlinearity", nl},
                    {"h", P.h},
                    {"k", P.k},
                    {"rho", P.rho},
                    {"method", P.method},
                    {"tol", P.tol},
                    {"newton_max_iter", P.newton_max_iter},
                    {"minimize_max_iter", P.minimize_max_iter},
                    {"extra_random", P.extra_random},
                    {"seed", P.seed},
                    {"linking_samples", P.linking_samples},
                    {"dedup_tol", P.dedup_tol}};
  }
  return j;
}

std::string PrepareOutputDir(const std::string &dir)
{
  std::filesystem::path p(dir);
  if (p.is_relative())
  {
    if (const char *root = std::getenv("FRACMAG_OUTPUT_ROOT"); root && *root)
    {
      p = std::filesystem::path(root) / p;
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec)
  {
    throw ConfigError("cannot create output directory '" + p.string() + "': " + ec.message());
  }
  return p.string();
}

double ResolveValue(const SpectralValue &v, const Eigen::VectorXd &beta, double beta_inf,
                    const std::string &what)
{
  auto at = [&](int i) {
    if (i < 1 || i > beta.size())
    {
      throw ConfigError(what + " refers to beta_" + std::to_string(i) + ", which was not computed");
    }
    return beta(i - 1);
  };
  if (v.mode == "absolute") return v.value;
  if (v.mode == "midpoint") return 0.5 * (at(v.i) + at(v.j));
  if (v.mode == "scaled") return v.factor * at(v.index);
  return (at(v.h) - beta_inf) - v.margin * at(v.h);
}

}  // namespace fracmag::cli
