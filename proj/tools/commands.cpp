#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <Eigen/Eigenvalues>
#include "fracmag/nonlinear.hpp"
#include "fracmag/oracle.hpp"
#include "fracmag/spectral.hpp"

namespace fracmag::cli
{

namespace
{

namespace fs = std::filesystem;

struct Pipeline
{
  Mesh mesh;
  MassMatrix mass;
  FormMatrix form;
  Spectrum spec;
};

Pipeline Build(const RunConfig &cfg)
{
  Pipeline p;
  p.mesh = BuildMesh(cfg.domain, cfg.resolution);
  if (p.mesh.NumDofs() < cfg.m_max)
  {
    throw ConfigError("m_max = " + std::to_string(cfg.m_max) + " exceeds the " +
                      std::to_string(p.mesh.NumDofs()) + " interior degrees of freedom");
  }
  p.mass = AssembleMass(p.mesh);
  p.form = AssembleNonlocalForm(p.mesh, cfg.s, cfg.potential, cfg.quadrature);
  p.spec = SolveEigs(p.form, p.mass, cfg.m_max);
  return p;
}

// Wraps an artifact payload with the resolved config and hashes.
Json Artifact(const std::string &kind, Json payload, const Json &config)
{
  Json j;
  j["artifact"] = kind;
  j["config_hash"] = io::ContentHash(config);
  j["content_hash"] = io::ContentHash(payload);
  j["config"] = config;
  j["data"] = std::move(payload);
  return j;
}

void WriteJson(const std::string &dir, const std::string &name, const std::string &kind,
               Json payload, const Json &config)
{
  io::WriteText((fs::path(dir) / name).string(),
                Artifact(kind, std::move(payload), config).dump(2) + "\n");
}

void WriteCsv(const std::string &dir, const std::string &name, const std::string &body,
              const Json &config)
{
  io::WriteText((fs::path(dir) / name).string(), io::WithConfigHeader(body, config));
}

std::string Num(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Nonlinearity ResolveNonlinearity(const ProblemBlock &P, const Eigen::VectorXd &beta,
                                 double beta_inf)
{
  const double b0 =
      P.family == "zero" ? 0.0 : ResolveValue(P.beta0, beta, beta_inf, "problem.nonlinearity.beta0");
  return Nonlinearity::FromName(P.family, b0);
}

// Spectral gap condition beta0 + beta_inf < beta_h <= beta_k < beta_inf.
bool GapHypothesis(const Eigen::VectorXd &beta, double beta_inf, double beta0, int h, int k)
{
  return beta0 + beta_inf < beta(h - 1) && beta(k - 1) < beta_inf;
}

Eigen::VectorXcd RandomVector(int d, std::mt19937_64 &rng)
{
  std::normal_distribution<double> n;
  Eigen::VectorXcd u(d);
  for (int i = 0; i < d; ++i)
  {
    u(i) = {n(rng), n(rng)};
  }
  return u;
}

double MaxAbs(const Eigen::MatrixXcd &A)
{
  return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff();
}

Json Check(const std::string &name, bool ok, Json details)
{
  return {{"name", name}, {"status", ok ? "pass" : "fail"}, {"details", std::move(details)}};
}

Json Skipped(const std::string &name, const std::string &reason)
{
  return {{"name", name}, {"status", "skipped"}, {"details", {{"reason", reason}}}};
}

// Largest resolution whose mesh fits the dense oracle (at most 20 dofs in 1D, 9 in 2D).
int OracleResolution(const RunConfig &cfg)
{
  const int cap = cfg.Dim() == 1 ? 21 : 4;
  return std::clamp(std::min(cfg.resolution, cfg.oracle_resolution), 2, cap);
}

}  // namespace

int CmdSpectrum(const RunConfig &cfg)
{
  const Json config = Resolved(cfg);
  const std::string dir = PrepareOutputDir(cfg.output_dir);
  const auto t0 = std::chrono::steady_clock::now();
  Pipeline p = Build(cfg);
  const CourantReport rep = VerifyCourant(p.spec, p.form.K, p.mass.M, cfg.courant_trials,
                                          cfg.courant_seed, cfg.courant_max_level);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  WriteCsv(dir, "spectrum.csv", io::SpectrumCsv(p.spec), config);
  Json sj = io::ToJson(p.spec);
  sj["form"] = io::ToJson(p.form.meta);
  WriteJson(dir, "spectrum.json", "spectrum", std::move(sj), config);
  WriteJson(dir, "courant_report.json", "courant_report", io::ToJson(rep), config);
  WriteJson(dir, "mesh.json", "mesh", io::ToJson(p.mesh), config);

  std::printf("dofs %d  h %.6g  elapsed %.2fs\n", p.mesh.NumDofs(), p.mesh.h, secs);
  for (int m = 0; m < p.spec.count(); ++m)
  {
    std::printf("beta_%d = %.12g\n", m + 1, p.spec.values(m));
  }
  std::printf("courant violations: %d\n", rep.violations);
  return 0;
}

int CmdSolve(const RunConfig &cfg)
{
  if (!cfg.problem.present)
  {
    throw ConfigError("solve needs a 'problem' block in the config");
  }
  const ProblemBlock &P = cfg.problem;
  const Json config = Resolved(cfg);
  const std::string dir = PrepareOutputDir(cfg.output_dir);
  Pipeline p = Build(cfg);
  const Eigen::VectorXd &beta = p.spec.values;

  const double beta_inf = ResolveValue(P.beta_inf, beta, 0.0, "problem.beta_inf");
  const Nonlinearity nl = ResolveNonlinearity(P, beta, beta_inf);
  const ProblemSpec problem(p.form.K, p.mass, beta_inf, nl);

  std::vector<std::string> warnings;
  SolutionSet set(P.dedup_tol);
  const bool minimize =
      P.method == "minimize" || (P.method == "auto" && beta_inf < beta(0));
  const bool newton = P.method != "minimize";

  if (minimize)
  {
    MinimizeOptions mo;
    mo.tol = P.tol;
    mo.max_iter = P.minimize_max_iter;
    const Eigen::VectorXcd f1 = p.spec.vectors.col(0);
    const std::vector<Start> starts{{f1 * (P.rho / std::sqrt(beta(0))), "minimize:rho*f1"},
                                    {f1, "minimize:f1"}};
    for (const auto &st : starts)
    {
      try
      {
        MinimizeResult r = Minimize(problem, st.u, mo);
        r.point.start = st.label;
        for (auto &w : r.warnings)
        {
          warnings.push_back(w);
        }
        set.Add(r.point, problem);
      }
      catch (const NoConvergence &e)
      {
        warnings.push_back(st.label + ": " + e.what());
      }
    }
  }

  const int h = P.h > 0 ? P.h : 1;
  const int k = P.k > 0 ? P.k : std::min(2, p.spec.count());
  if (newton)
  {
    NewtonOptions no;
    no.tol = P.tol;
    no.max_iter = P.newton_max_iter;
    no.dedup_tol = P.dedup_tol;
    no.seed = P.seed;
    const auto starts =
        MultistartFromEigenspaces(p.spec, p.form.K, h, k, P.rho, P.extra_random, P.seed);
    const SolutionSet found = NewtonDeflated(problem, starts, no);
    for (const auto &cp : found.points())
    {
      set.Add(cp, problem);
    }
  }

  Json linking;
  if (P.h > 0)
  {
    const bool hyp = GapHypothesis(beta, beta_inf, nl.beta0, P.h, P.k);
    if (!hyp)
    {
      warnings.push_back("spectral gap hypothesis beta0 + beta_inf < beta_h <= beta_k < beta_inf "
                         "does not hold");
    }
    const LinkingDiagnostics diag =
        DiagnoseLinking(problem, p.spec, P.h, P.k, P.rho, P.linking_samples, P.seed);
    linking = io::ToJson(diag);
    linking["h"] = P.h;
    linking["k"] = P.k;
    linking["gap_hypothesis"] = hyp;
  }
  else
  {
    linking = {{"skipped", "no h, k given in the problem block"}};
  }

  Json sol = io::ToJson(set);
  sol["beta_inf"] = beta_inf;
  sol["nonlinearity"] = {{"family", nl.Name()}, {"beta0", nl.beta0}};
  sol["eigenvalues"] = std::vector<double>(beta.data(), beta.data() + beta.size());
  sol["nontrivial_orbits"] = set.NontrivialCount();
  sol["warnings"] = warnings;
  WriteJson(dir, "solutions.json", "solutions", std::move(sol), config);
  WriteCsv(dir, "summary.csv", io::SolutionsCsv(set), config);
  WriteJson(dir, "linking_diagnostics.json", "linking_diagnostics", std::move(linking), config);

  std::printf("beta_inf %.12g  beta0 %.12g  family %s\n", beta_inf, nl.beta0, nl.Name().c_str());
  std::printf("orbits found: %zu (%d nontrivial)\n", set.points().size(), set.NontrivialCount());
  for (const auto &cp : set.points())
  {
    std::printf("  J = %.12g  residual = %.3g  %s  [%s]\n", cp.energy, cp.residual,
                cp.trivial ? "trivial" : "nontrivial", cp.start.c_str());
  }
  for (const auto &w : warnings)
  {
    std::printf("warning: %s\n", w.c_str());
  }
  return 0;
}

int CmdSweepS(const RunConfig &cfg)
{
  if (cfg.s_list.empty())
  {
    throw ConfigError("sweep-s needs a nonempty s list (sweep.s_list or --s-list)");
  }
  for (double s : cfg.s_list)
  {
    try
    {
      CheckOrder(cfg.Dim(), s);
    }
    catch (const PreconditionViolation &e)
    {
      throw ConfigError(std::string("invalid s in sweep: ") + e.what());
    }
  }
  const Json config = Resolved(cfg);
  const std::string dir = PrepareOutputDir(cfg.output_dir);
  const Mesh mesh = BuildMesh(cfg.domain, cfg.resolution);
  if (mesh.NumDofs() < cfg.m_max)
  {
    throw ConfigError("m_max exceeds the number of interior degrees of freedom");
  }
  const MassMatrix mass = AssembleMass(mesh);
  const FormMatrix local = AssembleLocalMagneticForm(mesh, cfg.potential);
  const Spectrum ref = SolveEigs(local, mass, cfg.m_max);

  std::ostringstream wide, longf;
  wide << "s,beta_1,abs_gap_to_local,rel_gap_to_local\n";
  longf << "s,m,beta,form\n";
  for (double s : cfg.s_list)
  {
    const Spectrum sp =
        SolveEigs(AssembleNonlocalForm(mesh, s, cfg.potential, cfg.quadrature), mass, cfg.m_max);
    const double gap = std::abs(sp.values(0) - ref.values(0));
    wide << Num(s) << ',' << Num(sp.values(0)) << ',' << Num(gap) << ','
         << Num(gap / ref.values(0)) << '\n';
    for (int m = 0; m < sp.count(); ++m)
    {
      longf << Num(s) << ',' << m + 1 << ',' << Num(sp.values(m)) << ",fractional\n";
    }
    std::printf("s = %-6g beta_1 = %.12g  |beta_1 - beta_1^loc| = %.6g\n", s, sp.values(0), gap);
  }
  wide << "1," << Num(ref.values(0)) << ",0,0\n";
  for (int m = 0; m < ref.count(); ++m)
  {
    longf << "1," << m + 1 << ',' << Num(ref.values(m)) << ",local\n";
  }
  std::printf("local reference beta_1 = %.12g\n", ref.values(0));
  WriteCsv(dir, "beta_vs_s.csv", wide.str(), config);
  WriteCsv(dir, "beta_vs_s_long.csv", longf.str(), config);
  return 0;
}

int CmdValidate(const RunConfig &cfg)
{
  const Json config = Resolved(cfg);
  const std::string dir = PrepareOutputDir(cfg.output_dir);
  Json checks = Json::array();
  Pipeline p = Build(cfg);
  const Eigen::MatrixXcd &K = p.form.K;
  const Eigen::MatrixXd &M = p.mass.M;

  {
    const double herm = MaxAbs(K - K.adjoint());
    const double kmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(K, Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .minCoeff();
    const double mmin =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    const double imag = K.imag().cwiseAbs().maxCoeff();
    const bool zero_A = cfg.potential.family() == MagneticPotential::Family::Zero;
    const bool ok = herm == 0.0 && kmin > 0.0 && mmin > 0.0 && (!zero_A || imag == 0.0);
    checks.push_back(Check("structural_invariants", ok,
                           {{"hermitian_defect", herm},
                            {"min_eig_K", kmin},
                            {"min_eig_M", mmin},
                            {"max_imag_K", imag},
                            {"zero_potential", zero_A}}));
  }

  {
    const double a = p.spec.mass_defect, b = p.spec.stiffness_defect;
    bool sorted = true;
    for (int m = 1; m < p.spec.count(); ++m)
    {
      sorted = sorted && p.spec.values(m) >= p.spec.values(m - 1);
    }
    checks.push_back(Check("spectrum_orthogonality",
                           sorted && p.spec.values(0) > 0.0 && a <= 1e-10 && b <= 1e-8,
                           {{"mass_defect", a}, {"stiffness_defect", b}, {"sorted", sorted}}));
  }

  {
    const CourantReport rep = VerifyCourant(p.spec, K, M, cfg.courant_trials, cfg.courant_seed,
                                            cfg.courant_max_level);
    checks.push_back(Check("courant_fischer", rep.ok(), io::ToJson(rep)));
  }

  // Dense references on a mesh small enough for the brute-force oracle.
  const int ores = OracleResolution(cfg);
  const Mesh omesh = BuildMesh(cfg.domain, ores);
  if (cfg.domain.kind == DomainKind::Disk)
  {
    checks.push_back(Skipped("oracle_assembly", "the dense oracle supports intervals and rectangles only"));
  }
  else if (omesh.NumDofs() == 0)
  {
    checks.push_back(Skipped("oracle_assembly", "oracle mesh has no interior dofs"));
  }
  else
  {
    const double tol = cfg.Dim() == 1 ? 1e-4 : 5e-3;
    try
    {
      const OracleAssembly ref = DenseAssemblyReference(omesh, cfg.s, cfg.potential);
      const FormMatrix main = AssembleNonlocalForm(omesh, cfg.s, cfg.potential, cfg.quadrature);
      const double scale = MaxAbs(ref.form.K);
      double worst = 0.0;
      for (int i = 0; i < main.size(); ++i)
      {
        for (int j = 0; j < main.size(); ++j)
        {
          const double den = std::max(std::abs(ref.form.K(i, j)), 1e-3 * scale);
          worst = std::max(worst, std::abs(main.K(i, j) - ref.form.K(i, j)) / den);
        }
      }
      checks.push_back(Check("oracle_assembly", worst <= tol,
                             {{"resolution", ores},
                              {"dofs", omesh.NumDofs()},
                              {"max_relative_error", worst},
                              {"tolerance", tol},
                              {"oracle_eps", ref.eps},
                              {"oracle_certificate", ref.certificate.maxCoeff()}}));
    }
    catch (const OracleInconclusive &e)
    {
      checks.push_back(Check("oracle_assembly", false,
                             {{"resolution", ores}, {"inconclusive", e.what()}}));
    }
  }

  {
    const FormMatrix ka = AssembleNonlocalForm(omesh, cfg.s, cfg.potential, cfg.quadrature);
    const FormMatrix kn =
        AssembleNonlocalForm(omesh, cfg.s, cfg.potential.Negated(), cfg.quadrature);
    const double conj = MaxAbs(kn.K - ka.K.conjugate()) / std::max(MaxAbs(ka.K), 1e-300);
    checks.push_back(Check("conjugation_symmetry", conj <= 1e-12,
                           {{"resolution", ores}, {"relative_defect", conj}}));
  }

  if (p.mesh.NumDofs() <= 200)
  {
    const Eigen::VectorXd ref = EigReference(K, M);
    double worst = 0.0;
    for (int m = 0; m < p.spec.count(); ++m)
    {
      worst = std::max(worst, std::abs(ref(m) - p.spec.values(m)) / std::abs(ref(m)));
    }
    checks.push_back(Check("eig_reference", worst <= 1e-10, {{"max_relative_error", worst}}));
  }
  else
  {
    checks.push_back(Skipped("eig_reference", "more than 200 dofs"));
  }

  if (cfg.problem.present)
  {
    const Eigen::VectorXd &beta = p.spec.values;
    const double beta_inf = ResolveValue(cfg.problem.beta_inf, beta, 0.0, "problem.beta_inf");
    const Nonlinearity nl = ResolveNonlinearity(cfg.problem, beta, beta_inf);
    const NonlinearityReport nrep = CheckNonlinearity(nl, DefaultTGrid());
    checks.push_back(Check("nonlinearity", nrep.ok(), io::ToJson(nrep)));

    const ProblemSpec problem = ProblemSpec::UncheckedForTesting(K, p.mass, beta_inf, nl);
    std::mt19937_64 rng(cfg.problem.seed);
    double worst = 0.0;
    for (int t = 0; t < 5; ++t)
    {
      const Eigen::VectorXcd u = RandomVector(problem.dim(), rng) * (0.5 * (t + 1));
      const Eigen::VectorXcd g = Gradient(u, problem);
      const Eigen::VectorXcd fd = FdGradient(problem, u);
      worst = std::max(worst, (fd - g).norm() / std::max(g.norm(), 1e-300));
    }
    checks.push_back(Check("gradient_fd", worst <= 1e-5,
                           {{"points", 5}, {"max_relative_error", worst}, {"tolerance", 1e-5}}));
  }
  else
  {
    checks.push_back(Skipped("nonlinearity", "no problem block"));
    checks.push_back(Skipped("gradient_fd", "no problem block"));
  }

  bool ok = true;
  for (const auto &c : checks)
  {
    ok = ok && c["status"] != "fail";
    std::printf("%-24s %s\n", c["name"].get<std::string>().c_str(),
                c["status"].get<std::string>().c_str());
  }
  WriteJson(dir, "validation_report.json", "validation_report",
            {{"passed", ok}, {"checks", checks}}, config);
  return ok ? 0 : 1;
}

int ExitCodeFor(const std::exception &e)
{
  if (dynamic_cast<const ConfigError *>(&e) || dynamic_cast<const InvalidArgument *>(&e) ||
      dynamic_cast<const InvalidDomain *>(&e))
  {
    return 2;
  }
  if (dynamic_cast<const PreconditionViolation *>(&e) ||
      dynamic_cast<const NumericalConditioning *>(&e))
  {
    return 3;
  }
  return 1;
}

Json ErrorJson(const std::exception &e)
{
  std::string type = "error";
  if (dynamic_cast<const ConfigError *>(&e)) type = "config_error";
  else if (dynamic_cast<const InvalidArgument *>(&e)) type = "invalid_argument";
  else if (dynamic_cast<const InvalidDomain *>(&e)) type = "invalid_domain";
  else if (dynamic_cast<const ResonanceError *>(&e)) type = "resonance";
  else if (dynamic_cast<const PreconditionViolation *>(&e)) type = "precondition_violation";
  else if (dynamic_cast<const NumericalConditioning *>(&e)) type = "numerical_conditioning";
  else if (dynamic_cast<const ValidationFailed *>(&e)) type = "validation_failed";
  return {{"error", {{"type", type}, {"exit_code", ExitCodeFor(e)}, {"message", e.what()}}}};
}

}  // namespace fracmag::cli
