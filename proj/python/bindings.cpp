#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include "fracmag/assembly.hpp"
#include "fracmag/errors.hpp"
#include "fracmag/geometry.hpp"
#include "fracmag/nonlinear.hpp"
#include "fracmag/oracle.hpp"
#include "fracmag/potential.hpp"
#include "fracmag/spectral.hpp"

namespace py = pybind11;
using namespace fracmag;

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Fractional magnetic Laplacian: assembly, spectra and critical points";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", error.ptr());
  py::register_exception<InvalidDomain>(m, "InvalidDomain", error.ptr());
  auto precondition = py::register_exception<PreconditionViolation>(m, "PreconditionViolation", error.ptr());
  py::register_exception<ResonanceError>(m, "ResonanceError", precondition.ptr());
  py::register_exception<NumericalConditioning>(m, "NumericalConditioning", error.ptr());
  py::register_exception<SplitAmbiguous>(m, "SplitAmbiguous", error.ptr());
  py::register_exception<ValidationFailed>(m, "ValidationFailed", error.ptr());
  py::register_exception<OracleInconclusive>(m, "OracleInconclusive", error.ptr());
  py::register_exception<NoConvergence>(m, "NoConvergence", error.ptr());

  py::class_<Domain>(m, "Domain")
      .def_static("interval", &Domain::Interval, py::arg("a"), py::arg("b"))
      .def_static("rectangle", &Domain::Rectangle, py::arg("x0"), py::arg("x1"), py::arg("y0"), py::arg("y1"))
      .def_static("disk", &Domain::Disk, py::arg("cx"), py::arg("cy"), py::arg("r"))
      .def_property_readonly("dim", &Domain::Dim);

  py::class_<Mesh>(m, "Mesh")
      .def_readonly("dim", &Mesh::dim)
      .def_readonly("h", &Mesh::h)
      .def_property_readonly("num_dofs", &Mesh::NumDofs)
      .def_property_readonly("num_nodes", &Mesh::NumNodes)
      .def_property_readonly("nodes",
                             [](const Mesh &mesh) {
                               Eigen::MatrixXd X(mesh.NumNodes(), mesh.dim);
                               for (int i = 0; i < mesh.NumNodes(); ++i)
                                 for (int k = 0; k < mesh.dim; ++k) X(i, k) = mesh.nodes[i](k);
                               return X;
                             })
      .def_property_readonly("dof_nodes", [](const Mesh &mesh) { return mesh.dofs.node_of_dof; });
  m.def("build_mesh", &BuildMesh, py::arg("domain"), py::arg("resolution"));

  py::class_<MagneticPotential>(m, "MagneticPotential")
      .def_static("zero", &MagneticPotential::Zero)
      .def_static("constant", [](const std::vector<double> &a) {
        if (a.empty() || a.size() > 2) throw InvalidArgument("constant potential needs 1 or 2 components");
        return MagneticPotential::Constant(Point(a[0], a.size() > 1 ? a[1] : 0.0));
      }, py::arg("a"))
      .def_static("affine", [](const Eigen::Matrix2d &B, const std::vector<double> &a) {
        return MagneticPotential::Affine(B, Point(a.size() > 0 ? a[0] : 0.0, a.size() > 1 ? a[1] : 0.0));
      }, py::arg("B"), py::arg("a") = std::vector<double>{})
      .def_static("landau", &MagneticPotential::Landau, py::arg("b"))
      .def("negated", &MagneticPotential::Negated)
      .def("plus", [](const MagneticPotential &A, const std::vector<double> &c) {
        return A.Plus(Point(c.size() > 0 ? c[0] : 0.0, c.size() > 1 ? c[1] : 0.0));
      })
      .def("__repr__", &MagneticPotential::Describe);

  m.def("magnetic_phase", [](const Eigen::Vector2d &x, const Eigen::Vector2d &y, const MagneticPotential &A,
                             int dim) { return MagneticPhase(x, y, A, dim); });
  m.def("kernel_constant", &KernelConstant, py::arg("dim"), py::arg("s"));
  m.def("tail_weight", [](const Mesh &mesh, double s, const Eigen::Vector2d &x) { return TailWeight(mesh, s, x); });

  py::class_<KernelQuadratureConfig>(m, "KernelQuadratureConfig")
      .def(py::init<>())
      .def_readwrite("far_order", &KernelQuadratureConfig::far_order)
      .def_readwrite("near_far_order", &KernelQuadratureConfig::near_far_order)
      .def_readwrite("near_distance", &KernelQuadratureConfig::near_distance)
      .def_readwrite("near_order", &KernelQuadratureConfig::near_order)
      .def_readwrite("tail_refinement", &KernelQuadratureConfig::tail_refinement)
      .def_readwrite("tail_order", &KernelQuadratureConfig::tail_order)
      .def_readwrite("threads", &KernelQuadratureConfig::threads);

  m.def("assemble_nonlocal",
        [](const Mesh &mesh, double s, const MagneticPotential &A, const KernelQuadratureConfig &q,
           bool include_tail) { return AssembleNonlocalForm(mesh, s, A, q, include_tail).K; },
        py::arg("mesh"), py::arg("s"), py::arg("potential"), py::arg("quadrature") = KernelQuadratureConfig{},
        py::arg("include_tail") = true);
  m.def("assemble_local",
        [](const Mesh &mesh, const MagneticPotential &A) { return AssembleLocalMagneticForm(mesh, A).K; },
        py::arg("mesh"), py::arg("potential"));
  m.def("assemble_mass", [](const Mesh &mesh) {
    const MassMatrix M = AssembleMass(mesh);
    return py::make_tuple(M.M, M.lumped);
  });
  m.def("assemble_tail", [](const Mesh &mesh, double s) { return AssembleTail(mesh, s); });

  m.def("solve_eigs", [](const Eigen::MatrixXcd &K, const Eigen::MatrixXd &M, int m_max) {
    const Spectrum sp = SolveEigs(K, M, m_max);
    return py::make_tuple(sp.values, sp.vectors);
  }, py::arg("K"), py::arg("M"), py::arg("m_max"));
  m.def("rayleigh_quotient", &RayleighQuotient);
  m.def("eig_reference", &EigReference);

  py::class_<Nonlinearity>(m, "Nonlinearity")
      .def(py::init([](const std::string &family, double beta0) { return Nonlinearity::FromName(family, beta0); }),
           py::arg("family"), py::arg("beta0") = 0.0)
      .def_readonly("beta0", &Nonlinearity::beta0)
      .def_property_readonly("name", &Nonlinearity::Name)
      .def("f", &Nonlinearity::f)
      .def("F", &Nonlinearity::F);

  py::class_<ProblemSpec>(m, "Problem")
      .def(py::init([](const Eigen::MatrixXcd &K, const Eigen::MatrixXd &M, const Eigen::VectorXd &lumped,
                       double beta_inf, const Nonlinearity &nl) {
             return ProblemSpec(K, MassMatrix{M, lumped}, beta_inf, nl);
           }),
           py::arg("K"), py::arg("M"), py::arg("lumped"), py::arg("beta_inf"), py::arg("nonlinearity"))
      .def_property_readonly("beta_inf", &ProblemSpec::beta_inf)
      .def_property_readonly("eigenvalues", &ProblemSpec::eigenvalues)
      .def("energy", [](const ProblemSpec &p, const Eigen::VectorXcd &u) { return Energy(u, p); })
      .def("gradient", [](const ProblemSpec &p, const Eigen::VectorXcd &u) { return Gradient(u, p); })
      .def("residual", [](const ProblemSpec &p, const Eigen::VectorXcd &u) { return Residual(u, p); })
      .def("fd_gradient", [](const ProblemSpec &p, const Eigen::VectorXcd &u) { return FdGradient(p, u); })
      .def("orbit_distance", &ProblemSpec::OrbitDistance);

  py::class_<CriticalPoint>(m, "CriticalPoint")
      .def_readonly("u", &CriticalPoint::u)
      .def_readonly("energy", &CriticalPoint::energy)
      .def_readonly("residual", &CriticalPoint::residual)
      .def_readonly("trivial", &CriticalPoint::trivial)
      .def_readonly("start", &CriticalPoint::start);

  m.def("minimize", [](const ProblemSpec &p, const Eigen::VectorXcd &u0, double tol, int max_iter) {
    MinimizeOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    return Minimize(p, u0, o).point;
  }, py::arg("problem"), py::arg("u0"), py::arg("tol") = 1e-10, py::arg("max_iter") = 10000);

  // Eigen-subspace multistart followed by deflated Newton; returns the orbit representatives.
  m.def("solve_multistart",
        [](const ProblemSpec &p, const Eigen::MatrixXcd &K, const Eigen::MatrixXd &M, int h, int k, double rho,
           int extra_random, std::uint64_t seed) {
          const Spectrum sp = SolveEigs(K, M, k);
          const auto starts = MultistartFromEigenspaces(sp, K, h, k, rho, extra_random, seed);
          return NewtonDeflated(p, starts).points();
        },
        py::arg("problem"), py::arg("K"), py::arg("M"), py::arg("h"), py::arg("k"), py::arg("rho") = 0.1,
        py::arg("extra_random") = 6, py::arg("seed") = 1);
}
