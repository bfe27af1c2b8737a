#include "fracmag/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include "fracmag/errors.hpp"

namespace fracmag::io
{

namespace
{

std::string Num(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json MatrixPlane(const Eigen::MatrixXd &A)
{
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i)
  {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < A.cols(); ++j)
    {
      row.push_back(A(i, j));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Json Vector(const Eigen::VectorXd &v)
{
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

std::string ContentHash(const Json &j)
{
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : j.dump())
  {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json ToJson(const Mesh &mesh)
{
  Json nodes = Json::array();
  for (const auto &p : mesh.nodes)
  {
    if (mesh.dim == 1)
    {
      nodes.push_back({p.x()});
    }
    else
    {
      nodes.push_back({p.x(), p.y()});
    }
  }
  Json elems = Json::array();
  for (const auto &e : mesh.elements)
  {
    if (mesh.dim == 1)
    {
      elems.push_back({e[0], e[1]});
    }
    else
    {
      elems.push_back({e[0], e[1], e[2]});
    }
  }
  Json index = Json::object();
  for (int k = 0; k < mesh.NumDofs(); ++k)
  {
    index[std::to_string(mesh.dofs.node_of_dof[k])] = k;
  }
  return Json{{"dim", mesh.dim}, {"nodes", nodes}, {"elements", elems},
              {"interior_index", index}, {"h", mesh.h}};
}

Json ToJson(const FormMetadata &meta)
{
  const auto &q = meta.quadrature;
  return Json{{"kind", meta.kind},
              {"s", meta.s},
              {"potential", meta.potential},
              {"tail_included", meta.tail_included},
              {"quadrature",
               {{"far_order", q.far_order},
                {"near_far_order", q.near_far_order},
                {"near_distance", q.near_distance},
                {"near_order", q.near_order},
                {"tail_refinement", q.tail_refinement},
                {"tail_order", q.tail_order},
                {"threads", q.threads}}},
              {"warnings", meta.warnings}};
}

Json ToJson(const FormMatrix &form)
{
  return Json{{"d", form.size()},
              {"real", MatrixPlane(form.K.real())},
              {"imag", MatrixPlane(form.K.imag())},
              {"metadata", ToJson(form.meta)}};
}

Json ToJson(const Spectrum &spec, bool include_vectors)
{
  Json clusters = Json::array();
  for (const auto &c : spec.clusters)
  {
    Json ids = Json::array();
    for (int i : c)
    {
      ids.push_back(i + 1);
    }
    clusters.push_back(ids);
  }
  Json j{{"source", spec.source},
         {"count", spec.count()},
         {"dim", spec.dim()},
         {"eigenvalues", Vector(spec.values)},
         {"clusters", clusters},
         {"mass_orthonormality_defect", spec.mass_defect},
         {"stiffness_orthogonality_defect", spec.stiffness_defect}};
  if (include_vectors)
  {
    Json vecs = Json::array();
    for (int m = 0; m < spec.count(); ++m)
    {
      vecs.push_back({{"m", m + 1},
                      {"real", Vector(spec.vectors.col(m).real())},
                      {"imag", Vector(spec.vectors.col(m).imag())}});
    }
    j["vectors"] = vecs;
  }
  return j;
}

Json ToJson(const CourantReport &rep)
{
  Json levels = Json::array();
  for (const auto &l : rep.levels)
  {
    Json e{{"m", l.m}, {"skipped", l.skipped}};
    if (!l.skipped)
    {
      e["beta_next"] = l.beta_next;
      e["min_rq_e"] = l.min_rq_e;
      e["rq_f_next"] = l.rq_f_next;
      e["min_margin"] = l.min_margin;
      if (l.m > 0)
      {
        e["beta_m"] = l.beta_m;
        e["max_rq_h"] = l.max_rq_h;
        e["rq_f_m"] = l.rq_f_m;
        e["max_margin"] = l.max_margin;
      }
      e["violations"] = l.violations;
    }
    levels.push_back(e);
  }
  return Json{{"trials", rep.trials},
              {"tolerance", rep.tolerance},
              {"violations", rep.violations},
              {"worst_min_margin", rep.worst_min_margin},
              {"worst_max_margin", rep.worst_max_margin},
              {"ok", rep.ok()},
              {"levels", levels}};
}

Json ToJson(const CriticalPoint &cp, bool include_coefficients)
{
  Json j{{"J", cp.energy},
         {"residual", cp.residual},
         {"norm_M", cp.norm_m},
         {"norm_K", cp.norm_k},
         {"rayleigh_quotient", cp.rayleigh},
         {"trivial", cp.trivial},
         {"start", cp.start},
         {"iterations", cp.iterations}};
  if (include_coefficients)
  {
    j["coefficients"] = {{"real", Vector(cp.u.real())}, {"imag", Vector(cp.u.imag())}};
  }
  return j;
}

Json ToJson(const SolutionSet &set, bool include_coefficients)
{
  Json pts = Json::array();
  for (const auto &p : set.points())
  {
    pts.push_back(ToJson(p, include_coefficients));
  }
  return Json{{"dedup_tolerance", set.tolerance()},
              {"nontrivial_orbits", set.NontrivialCount()},
              {"trivial_found", set.HasTrivial()},
              {"solutions", pts}};
}

Json ToJson(const LinkingDiagnostics &diag)
{
  return Json{{"c0_est", diag.c0_est},         {"cinf_est", diag.cinf_est},
              {"geometry_ok", diag.geometry_ok}, {"samples", diag.samples},
              {"rho", diag.rho},               {"cinf_radius", diag.cinf_radius}};
}

Json ToJson(const NonlinearityReport &rep)
{
  Json fits = Json::array();
  for (std::size_t k = 0; k < rep.eps.size(); ++k)
  {
    fits.push_back({{"eps", rep.eps[k]}, {"a_eps", rep.a_eps[k]}});
  }
  return Json{{"family", rep.family},
              {"beta0", rep.beta0},
              {"t_max", rep.t_max},
              {"growth_bound", fits},
              {"growth_ok", rep.growth_ok},
              {"f_at_t_max", rep.f_at_max},
              {"decay_threshold", rep.decay_threshold},
              {"decay_ok", rep.decay_ok},
              {"antiderivative_defect", rep.antiderivative_defect},
              {"ok", rep.ok()}};
}

void WriteMatrixBinary(const std::string &path, const Eigen::MatrixXcd &K)
{
  static_assert(std::endian::native == std::endian::little, "little-endian host assumed");
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw InvalidArgument("cannot open " + path + " for writing");
  }
  for (int plane = 0; plane < 2; ++plane)
  {
    for (Eigen::Index i = 0; i < K.rows(); ++i)
    {
      for (Eigen::Index j = 0; j < K.cols(); ++j)
      {
        const double v = plane == 0 ? K(i, j).real() : K(i, j).imag();
        out.write(reinterpret_cast<const char *>(&v), sizeof v);
      }
    }
  }
}

Eigen::MatrixXcd ReadMatrixBinary(const std::string &path, int d)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw InvalidArgument("cannot open " + path);
  }
  Eigen::MatrixXcd K(d, d);
  for (int plane = 0; plane < 2; ++plane)
  {
    for (int i = 0; i < d; ++i)
    {
      for (int j = 0; j < d; ++j)
      {
        double v;
        if (!in.read(reinterpret_cast<char *>(&v), sizeof v))
        {
          throw InvalidArgument(path + " is truncated");
        }
        if (plane == 0)
        {
          K(i, j) = v;
        }
        else
        {
          K(i, j).imag(v);
        }
      }
    }
  }
  return K;
}

std::string SpectrumCsv(const Spectrum &spec)
{
  std::ostringstream os;
  os << "m,beta,multiplicity_cluster\n";
  for (int m = 0; m < spec.count(); ++m)
  {
    os << m + 1 << "," << Num(spec.values(m)) << "," << spec.ClusterOf(m) + 1 << "\n";
  }
  return os.str();
}

std::string SolutionsCsv(const SolutionSet &set)
{
  std::ostringstream os;
  os << "index,trivial,J,residual,norm_M,norm_K,rayleigh_quotient,start\n";
  int k = 0;
  for (const auto &p : set.points())
  {
    os << ++k << "," << (p.trivial ? 1 : 0) << "," << Num(p.energy) << "," << Num(p.residual)
       << "," << Num(p.norm_m) << "," << Num(p.norm_k) << "," << Num(p.rayleigh) << ","
       << p.start << "\n";
  }
  return os.str();
}

std::string WithConfigHeader(const std::string &body, const Json &config)
{
  return "# config_hash: " + ContentHash(config) + "\n# config: " + config.dump() + "\n" + body;
}

void WriteText(const std::string &path, const std::string &text)
{
  std::ofstream out(path);
  if (!out)
  {
    throw InvalidArgument("cannot open " + path + " for writing");
  }
  out << text;
}

}  // namespace fracmag::io
