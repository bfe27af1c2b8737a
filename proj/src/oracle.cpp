#include "fracmag/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <Eigen/Dense>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include "fracmag/errors.hpp"

namespace fracmag
{

namespace
{

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

// Gauss-Legendre on [0, 1] from boost's tabulated nodes (independent of fracmag::quad).
struct Rule
{
  std::vector<double> x, w;
};

template <int N>
Rule FromBoost()
{
  using G = boost::math::quadrature::gauss<double, N>;
  const auto &a = G::abscissa();
  const auto &w = G::weights();
  Rule r;
  for (std::size_t k = 0; k < a.size(); ++k)
  {
    if (a[k] == 0.0)
    {
      r.x.push_back(0.5);
      r.w.push_back(0.5 * w[k]);
    }
    else
    {
      r.x.push_back(0.5 - 0.5 * a[k]);
      r.w.push_back(0.5 * w[k]);
      r.x.push_back(0.5 + 0.5 * a[k]);
      r.w.push_back(0.5 * w[k]);
    }
  }
  return r;
}

const Rule &GetRule(int n)
{
  static const Rule r4 = FromBoost<4>();
  static const Rule r8 = FromBoost<8>();
  static const Rule r16 = FromBoost<16>();
  switch (n)
  {
    case 4:
      return r4;
    case 8:
      return r8;
    case 16:
      return r16;
  }
  throw InvalidArgument("oracle rules exist for 4, 8 or 16 points only");
}

struct Node1
{
  double x, w;
};

void Panel(double a, double b, const Rule &rule, std::vector<Node1> &out)
{
  for (std::size_t q = 0; q < rule.x.size(); ++q)
  {
    out.push_back({a + (b - a) * rule.x[q], (b - a) * rule.w[q]});
  }
}

// Panels [x0 + dir d_k, x0 + dir d_{k+1}] with d_0 = dstart, d_{k+1} = ratio d_k, up to dend.
void Graded(double x0, double dir, double dstart, double dend, double ratio, const Rule &rule,
            std::vector<Node1> &out)
{
  double d = dstart;
  while (d < dend)
  {
    const double dn = std::min(d * ratio, dend);
    if (dn > d * (1.0 + 1e-14))
    {
      const double a = x0 + dir * d, b = x0 + dir * dn;
      Panel(std::min(a, b), std::max(a, b), rule, out);
    }
    d = dn;
  }
}

double Constant(int dim, double s)
{
  return s * std::pow(2.0, 2.0 * s) * boost::math::tgamma(0.5 * (dim + 2.0 * s)) /
         (std::pow(kPi, 0.5 * dim) * boost::math::tgamma(1.0 - s));
}

cd Phase(const Point &x, const Point &y, const MagneticPotential &A, int dim)
{
  const Point mid = 0.5 * (x + y);
  const double theta = (x - y).dot(A(mid, dim));
  return std::polar(1.0, theta);
}

// Small sparse vector of D_k = phi_k(x) - e phi_k(y).
struct DVec
{
  std::array<int, 6> dof{};
  std::array<cd, 6> val{};
  int n = 0;

  void Add(int k, cd v)
  {
    for (int i = 0; i < n; ++i)
    {
      if (dof[i] == k)
      {
        val[i] += v;
        return;
      }
    }
    dof[n] = k;
    val[n] = v;
    ++n;
  }
};

void Accumulate(Eigen::MatrixXcd &K, const DVec &D, double weight)
{
  for (int a = 0; a < D.n; ++a)
  {
    const cd ca = std::conj(D.val[a]) * weight;
    for (int b = 0; b < D.n; ++b)
    {
      K(D.dof[a], D.dof[b]) += ca * D.val[b];
    }
  }
}

// ---------------------------------------------------------------------------------------
// 1D

struct Elem1
{
  double p, q;
  int dof0, dof1;  // -1 for boundary nodes
};

std::vector<Elem1> Elements1D(const Mesh &mesh)
{
  std::vector<Elem1> out;
  for (const auto &e : mesh.elements)
  {
    int a = e[0], b = e[1];
    if (mesh.nodes[a].x() > mesh.nodes[b].x())
    {
      std::swap(a, b);
    }
    out.push_back({mesh.nodes[a].x(), mesh.nodes[b].x(), mesh.dofs.dof_of_node[a],
                   mesh.dofs.dof_of_node[b]});
  }
  return out;
}

Eigen::MatrixXcd Interior1D(const Mesh &mesh, double s, const MagneticPotential &A, double eps,
                            const Rule &rule)
{
  const int d = mesh.NumDofs();
  const auto elems = Elements1D(mesh);
  const double half_c = 0.5 * Constant(1, s);
  Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(d, d);
  std::vector<Node1> xs, ys;
  for (const auto &ex : elems)
  {
    const double m = 0.5 * (ex.p + ex.q);
    const double delta = (m - ex.p) * std::ldexp(1.0, -30);
    xs.clear();
    Panel(ex.p, ex.p + delta, rule, xs);
    Graded(ex.p, 1.0, delta, m - ex.p, 2.0, rule, xs);
    Panel(ex.q - delta, ex.q, rule, xs);
    Graded(ex.q, -1.0, delta, ex.q - m, 2.0, rule, xs);
    for (const auto &[x, wx] : xs)
    {
      const double l = ex.q - ex.p;
      const double px0 = (ex.q - x) / l, px1 = (x - ex.p) / l;
      for (const auto &ey : elems)
      {
        if (ex.dof0 < 0 && ex.dof1 < 0 && ey.dof0 < 0 && ey.dof1 < 0)
        {
          continue;
        }
        ys.clear();
        // [ey.p, ey.q] minus (x - eps, x + eps), graded toward x.
        if (ey.q > x + eps)
        {
          const double a = std::max(ey.p, x + eps);
          Graded(x, 1.0, a - x, ey.q - x, 2.0, rule, ys);
        }
        if (ey.p < x - eps)
        {
          const double b = std::min(ey.q, x - eps);
          Graded(x, -1.0, x - b, x - ey.p, 2.0, rule, ys);
        }
        const double ly = ey.q - ey.p;
        for (const auto &[y, wy] : ys)
        {
          const cd e = Phase(Point(x, 0.0), Point(y, 0.0), A, 1);
          const double py0 = (ey.q - y) / ly, py1 = (y - ey.p) / ly;
          DVec D;
          if (ex.dof0 >= 0) D.Add(ex.dof0, px0);
          if (ex.dof1 >= 0) D.Add(ex.dof1, px1);
          if (ey.dof0 >= 0) D.Add(ey.dof0, -e * py0);
          if (ey.dof1 >= 0) D.Add(ey.dof1, -e * py1);
          const double r = std::abs(x - y);
          Accumulate(K, D, half_c * wx * wy * std::pow(r, -1.0 - 2.0 * s));
        }
      }
    }
  }
  return K;
}

double Zeta1D(double a, double b, double s, double x)
{
  static boost::math::quadrature::exp_sinh<double> integrator;
  double z = 0.0;
  for (double dist : {x - a, b - x})
  {
    auto f = [&](double t) { return std::pow(dist + t, -1.0 - 2.0 * s); };
    z += integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-14);
  }
  return z;
}

Eigen::MatrixXd Tail1D(const Mesh &mesh, double s)
{
  const int d = mesh.NumDofs();
  const double c = Constant(1, s);
  const auto [a, b] = mesh.interval;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(d, d);
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (const auto &e : Elements1D(mesh))
  {
    const int dofs[2] = {e.dof0, e.dof1};
    for (int i = 0; i < 2; ++i)
    {
      for (int j = 0; j < 2; ++j)
      {
        if (dofs[i] < 0 || dofs[j] < 0)
        {
          continue;
        }
        const double l = e.q - e.p;
        auto hat = [&](int k, double x) { return k == 0 ? (e.q - x) / l : (x - e.p) / l; };
        auto f = [&](double x) { return hat(i, x) * hat(j, x) * Zeta1D(a, b, s, x); };
        T(dofs[i], dofs[j]) += c * integrator.integrate(f, e.p, e.q, 1e-13);
      }
    }
  }
  return T;
}

// ---------------------------------------------------------------------------------------
// 2D (rectangles)

struct Box
{
  double x0, x1, y0, y1;
};

Box RectangleOf(const Mesh &mesh)
{
  Box b{INFINITY, -INFINITY, INFINITY, -INFINITY};
  for (const auto &p : mesh.nodes)
  {
    b.x0 = std::min(b.x0, p.x());
    b.x1 = std::max(b.x1, p.x());
    b.y0 = std::min(b.y0, p.y());
    b.y1 = std::max(b.y1, p.y());
  }
  const double tol = 1e-12 * std::max(b.x1 - b.x0, b.y1 - b.y0);
  auto on_box = [&](const Point &p) {
    return std::abs(p.x() - b.x0) < tol || std::abs(p.x() - b.x1) < tol ||
           std::abs(p.y() - b.y0) < tol || std::abs(p.y() - b.y1) < tol;
  };
  for (const auto &seg : mesh.boundary)
  {
    const bool vertical = std::abs(seg.a.x() - seg.b.x()) < tol;
    const bool same_side = vertical ? std::abs(seg.a.x() - b.x0) < tol || std::abs(seg.a.x() - b.x1) < tol
                                    : std::abs(seg.a.y() - b.y0) < tol || std::abs(seg.a.y() - b.y1) < tol;
    if (!on_box(seg.a) || !on_box(seg.b) || !same_side)
    {
      throw InvalidArgument("the 2D oracle supports rectangular domains only");
    }
  }
  return b;
}

double ExitDistance(const Box &b, const Point &x, double c, double sn)
{
  double r = INFINITY;
  if (c > 0) r = std::min(r, (b.x1 - x.x()) / c);
  if (c < 0) r = std::min(r, (b.x0 - x.x()) / c);
  if (sn > 0) r = std::min(r, (b.y1 - x.y()) / sn);
  if (sn < 0) r = std::min(r, (b.y0 - x.y()) / sn);
  return std::max(r, 0.0);
}

struct Tri
{
  std::array<int, 3> dof;
  std::array<Point, 3> P;
  Eigen::Matrix3d inv;  // barycentrics = inv * (1, x, y)
  double area;

  Eigen::Vector3d Bary(const Point &x) const { return inv * Eigen::Vector3d(1.0, x.x(), x.y()); }
};

std::vector<Tri> Triangles(const Mesh &mesh)
{
  std::vector<Tri> out;
  for (const auto &e : mesh.elements)
  {
    Tri t;
    Eigen::Matrix3d V;
    for (int k = 0; k < 3; ++k)
    {
      t.P[k] = mesh.nodes[e[k]];
      t.dof[k] = mesh.dofs.dof_of_node[e[k]];
      V.col(k) << 1.0, t.P[k].x(), t.P[k].y();
    }
    t.inv = V.inverse();
    t.area = 0.5 * std::abs(V.determinant());
    out.push_back(t);
  }
  return out;
}

struct Node2
{
  Point x;
  double w;
};

// Collapsed tensor rule on a triangle, n x n points.
void TriRule(const Point &a, const Point &b, const Point &c, const Rule &rule,
             std::vector<Node2> &out)
{
  const double area2 = std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
  for (std::size_t i = 0; i < rule.x.size(); ++i)
  {
    for (std::size_t j = 0; j < rule.x.size(); ++j)
    {
      const double u = rule.x[i], v = rule.x[j];
      out.push_back({a + u * ((b - a) + v * (c - b)), area2 * u * rule.w[i] * rule.w[j]});
    }
  }
}

void Subdivide(const Point &a, const Point &b, const Point &c, int levels, const Rule &rule,
               std::vector<Node2> &out)
{
  if (levels == 0)
  {
    TriRule(a, b, c, rule, out);
    return;
  }
  const Point ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  Subdivide(a, ab, ca, levels - 1, rule, out);
  Subdivide(ab, b, bc, levels - 1, rule, out);
  Subdivide(ca, bc, c, levels - 1, rule, out);
  Subdivide(ab, bc, ca, levels - 1, rule, out);
}

int Locate(const std::vector<Tri> &tris, const Point &y)
{
  int best = -1;
  double best_min = -INFINITY;
  for (std::size_t t = 0; t < tris.size(); ++t)
  {
    const double m = tris[t].Bary(y).minCoeff();
    if (m > best_min)
    {
      best_min = m;
      best = static_cast<int>(t);
    }
  }
  return best;
}

Eigen::MatrixXcd Interior2D(const Mesh &mesh, double s, const MagneticPotential &A, double eps,
                            const OracleConfig &cfg)
{
  const int d = mesh.NumDofs();
  const Box box = RectangleOf(mesh);
  const auto tris = Triangles(mesh);
  const double half_c = 0.5 * Constant(2, s);
  const Rule &inner = GetRule(8);
  const Rule &outer = GetRule(4);

  std::vector<std::pair<Point, Point>> edges;
  for (const auto &e : mesh.elements)
  {
    for (int k = 0; k < 3; ++k)
    {
      const int a = e[k], b = e[(k + 1) % 3];
      if (a < b)
      {
        edges.emplace_back(mesh.nodes[a], mesh.nodes[b]);
      }
      else
      {
        // Interior edges appear twice with both orientations; boundary edges once.
        bool twin = false;
        for (const auto &f : mesh.elements)
        {
          for (int j = 0; j < 3; ++j)
          {
            twin |= (f[j] == b && f[(j + 1) % 3] == a);
          }
        }
        if (!twin)
        {
          edges.emplace_back(mesh.nodes[b], mesh.nodes[a]);
        }
      }
    }
  }

  Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(d, d);
  std::vector<Node2> xs;
  std::vector<double> angles, rs;
  std::vector<Node1> thetas, radial;
  for (std::size_t tx = 0; tx < tris.size(); ++tx)
  {
    const Tri &T = tris[tx];
    xs.clear();
    Subdivide(T.P[0], T.P[1], T.P[2], cfg.outer_levels, outer, xs);
    for (const auto &[x, wx] : xs)
    {
      const Eigen::Vector3d lx = T.Bary(x);
      angles.clear();
      for (const auto &p : mesh.nodes)
      {
        if ((p - x).norm() > 1e-14)
        {
          double a = std::atan2(p.y() - x.y(), p.x() - x.x());
          angles.push_back(a < 0 ? a + 2 * kPi : a);
        }
      }
      angles.push_back(0.0);
      angles.push_back(2 * kPi);
      std::sort(angles.begin(), angles.end());
      thetas.clear();
      for (std::size_t k = 0; k + 1 < angles.size(); ++k)
      {
        if (angles[k + 1] - angles[k] > 1e-13)
        {
          Panel(angles[k], angles[k + 1], inner, thetas);
        }
      }
      for (const auto &[th, wth] : thetas)
      {
        const double c = std::cos(th), sn = std::sin(th);
        const Point dir(c, sn);
        const double R = ExitDistance(box, x, c, sn);
        if (R <= eps)
        {
          continue;
        }
        rs.assign({eps, R});
        for (const auto &[P, Q] : edges)
        {
          // x + r dir = P + t (Q - P)
          const Point e = Q - P;
          const double det = dir.x() * (-e.y()) - dir.y() * (-e.x());
          if (std::abs(det) < 1e-300)
          {
            continue;
          }
          const Point rhs = P - x;
          const double r = (rhs.x() * (-e.y()) - rhs.y() * (-e.x())) / det;
          const double t = (dir.x() * rhs.y() - dir.y() * rhs.x()) / det;
          if (t >= -1e-14 && t <= 1 + 1e-14 && r > eps && r < R)
          {
            rs.push_back(r);
          }
        }
        std::sort(rs.begin(), rs.end());
        for (std::size_t k = 0; k + 1 < rs.size(); ++k)
        {
          const double ra = rs[k], rb = rs[k + 1];
          if (rb - ra <= 1e-14 * R)
          {
            continue;
          }
          const int ty = Locate(tris, x + 0.5 * (ra + rb) * dir);
          const Tri &Ty = tris[ty];
          radial.clear();
          if (k == 0)
          {
            Graded(0.0, 1.0, ra, rb, 4.0, inner, radial);
          }
          else
          {
            Panel(ra, rb, inner, radial);
          }
          for (const auto &[r, wr] : radial)
          {
            const Point y = x + r * dir;
            const Eigen::Vector3d ly = Ty.Bary(y);
            const cd e = Phase(x, y, A, 2);
            DVec D;
            for (int v = 0; v < 3; ++v)
            {
              if (T.dof[v] >= 0) D.Add(T.dof[v], lx(v));
            }
            for (int v = 0; v < 3; ++v)
            {
              if (Ty.dof[v] >= 0) D.Add(Ty.dof[v], -e * ly(v));
            }
            Accumulate(K, D, half_c * wx * wth * wr * std::pow(r, -1.0 - 2.0 * s));
          }
        }
      }
    }
  }
  return K;
}

double Zeta2D(const Box &b, double s, const Point &x)
{
  const Rule &rule = GetRule(16);
  std::vector<double> angles{0.0, 2 * kPi};
  for (const Point &p : {Point(b.x0, b.y0), Point(b.x1, b.y0), Point(b.x1, b.y1), Point(b.x0, b.y1)})
  {
    double a = std::atan2(p.y() - x.y(), p.x() - x.x());
    angles.push_back(a < 0 ? a + 2 * kPi : a);
  }
  std::sort(angles.begin(), angles.end());
  double z = 0.0;
  for (std::size_t k = 0; k + 1 < angles.size(); ++k)
  {
    const double a = angles[k], l = angles[k + 1] - a;
    for (std::size_t q = 0; q < rule.x.size(); ++q)
    {
      const double th = a + l * rule.x[q];
      z += l * rule.w[q] * std::pow(ExitDistance(b, x, std::cos(th), std::sin(th)), -2.0 * s);
    }
  }
  return z / (2.0 * s);
}

bool TouchesBox(const Box &b, const Point &p)
{
  const double tol = 1e-12 * std::max(b.x1 - b.x0, b.y1 - b.y0);
  return std::abs(p.x() - b.x0) < tol || std::abs(p.x() - b.x1) < tol ||
         std::abs(p.y() - b.y0) < tol || std::abs(p.y() - b.y1) < tol;
}

void TailRule(const Box &b, const Point &p0, const Point &p1, const Point &p2, int depth,
              const Rule &rule, std::vector<Node2> &out)
{
  const bool touches = TouchesBox(b, p0) || TouchesBox(b, p1) || TouchesBox(b, p2);
  if (depth == 0 || !touches)
  {
    TriRule(p0, p1, p2, rule, out);
    return;
  }
  const Point a = 0.5 * (p0 + p1), c = 0.5 * (p1 + p2), e = 0.5 * (p2 + p0);
  TailRule(b, p0, a, e, depth - 1, rule, out);
  TailRule(b, a, p1, c, depth - 1, rule, out);
  TailRule(b, e, c, p2, depth - 1, rule, out);
  TailRule(b, a, c, e, depth - 1, rule, out);
}

Eigen::MatrixXd Tail2D(const Mesh &mesh, double s)
{
  const int d = mesh.NumDofs();
  const Box box = RectangleOf(mesh);
  const double c = Constant(2, s);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(d, d);
  std::vector<Node2> pts;
  for (const auto &t : Triangles(mesh))
  {
    if (t.dof[0] < 0 && t.dof[1] < 0 && t.dof[2] < 0)
    {
      continue;
    }
    pts.clear();
    TailRule(box, t.P[0], t.P[1], t.P[2], 7, GetRule(4), pts);
    for (const auto &[x, w] : pts)
    {
      const Eigen::Vector3d l = t.Bary(x);
      const double z = c * w * Zeta2D(box, s, x);
      for (int i = 0; i < 3; ++i)
      {
        for (int j = 0; j < 3; ++j)
        {
          if (t.dof[i] >= 0 && t.dof[j] >= 0)
          {
            T(t.dof[i], t.dof[j]) += z * l(i) * l(j);
          }
        }
      }
    }
  }
  return T;
}

}  // namespace

// ---------------------------------------------------------------------------------------

double ReferenceTailWeight(const Mesh &mesh, double s, const Point &x)
{
  if (mesh.dim == 1)
  {
    return Zeta1D(mesh.interval.first, mesh.interval.second, s, x.x());
  }
  return Zeta2D(RectangleOf(mesh), s, x);
}

OracleAssembly DenseAssemblyReference(const Mesh &mesh, double s, const MagneticPotential &A,
                                      const OracleConfig &cfg)
{
  if (!(s > 0.0 && s < 1.0))
  {
    throw InvalidArgument("fractional order s must lie in (0, 1)");
  }
  if (!(mesh.dim > 2.0 * s))
  {
    throw PreconditionViolation("N > 2s violated");
  }
  A.ValidateFor(mesh.dim);
  const int d = mesh.NumDofs();
  if (d < 1 || d > 20)
  {
    throw InvalidArgument("oracle assembly is limited to 1 <= d <= 20");
  }
  if (cfg.points != 8 && cfg.points != 16)
  {
    throw InvalidArgument("oracle points must be 8 or 16");
  }
  if (!(cfg.eps_factor > 0.0) || !(cfg.stabilization_tol > 0.0) || cfg.max_halvings < 1 ||
      cfg.outer_levels < 0)
  {
    throw InvalidArgument("invalid oracle configuration");
  }
  const Rule &rule = GetRule(cfg.points);
  auto interior = [&](double eps) {
    return mesh.dim == 1 ? Interior1D(mesh, s, A, eps, rule) : Interior2D(mesh, s, A, eps, cfg);
  };

  OracleAssembly out;
  double eps = cfg.eps_factor * mesh.h;
  Eigen::MatrixXcd prev = interior(eps);
  Eigen::MatrixXcd cur;
  bool stable = false;
  for (int k = 1; k <= cfg.max_halvings && !stable; ++k)
  {
    eps *= 0.5;
    cur = interior(eps);
    const double floor = 1e-14 * cur.cwiseAbs().maxCoeff();
    out.certificate = ((cur - prev).cwiseAbs().array() / cur.cwiseAbs().array().max(floor)).matrix();
    out.halvings = k;
    stable = out.certificate.maxCoeff() < cfg.stabilization_tol;
    if (!stable)
    {
      prev = cur;
    }
  }
  if (!stable)
  {
    std::ostringstream os;
    os << "oracle entries did not stabilize under eps halving (max relative change "
       << out.certificate.maxCoeff() << ")";
    throw OracleInconclusive(os.str());
  }
  // The excised strip carries O(eps^{2-2s}); one Richardson step removes its leading term.
  const double gain = std::pow(2.0, 2.0 - 2.0 * s) - 1.0;
  Eigen::MatrixXcd K = cur + (cur - prev) / gain;
  const Eigen::MatrixXd T = mesh.dim == 1 ? Tail1D(mesh, s) : Tail2D(mesh, s);
  K += T.cast<cd>();
  // Entries (i, j) and (j, i) come from separate quadratures; average them.
  K = (0.5 * (K + K.adjoint())).eval();
  out.eps = eps;
  out.form.K = K;
  out.form.meta.kind = "oracle";
  out.form.meta.s = s;
  out.form.meta.potential = A.Describe();
  out.form.meta.tail_included = true;
  return out;
}

Eigen::VectorXcd FdGradient(const ProblemSpec &spec, const Eigen::VectorXcd &u,
                            const OracleConfig &cfg)
{
  const double step = cfg.fd_step * std::max(1.0, u.cwiseAbs().maxCoeff());
  Eigen::VectorXcd g(u.size());
  for (Eigen::Index k = 0; k < u.size(); ++k)
  {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(u.size());
    e(k) = 1.0;
    const double re = FdDirectional(spec, u, e, step);
    e(k) = cd(0.0, 1.0);
    const double im = FdDirectional(spec, u, e, step);
    g(k) = {re, im};
  }
  return g;
}

double FdDirectional(const ProblemSpec &spec, const Eigen::VectorXcd &u,
                     const Eigen::VectorXcd &phi, double step)
{
  return (Energy(u + step * phi, spec) - Energy(u - step * phi, spec)) / (2.0 * step);
}

Eigen::VectorXd EigReference(const Eigen::MatrixXcd &K, const Eigen::MatrixXd &M)
{
  const int d = static_cast<int>(K.rows());
  if (d < 1 || d > 200 || K.cols() != d || M.rows() != d || M.cols() != d)
  {
    throw InvalidArgument("eig_reference needs square K, M of equal size d <= 200");
  }
  // M = L L^T
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < d; ++j)
  {
    double diag = M(j, j);
    for (int k = 0; k < j; ++k)
    {
      diag -= L(j, k) * L(j, k);
    }
    if (!(diag > 0.0))
    {
      throw NumericalConditioning("mass matrix is not positive definite");
    }
    L(j, j) = std::sqrt(diag);
    for (int i = j + 1; i < d; ++i)
    {
      double v = M(i, j);
      for (int k = 0; k < j; ++k)
      {
        v -= L(i, k) * L(j, k);
      }
      L(i, j) = v / L(j, j);
    }
  }
  // C = L^{-1} K L^{-T}: forward substitution on columns, then on rows.
  Eigen::MatrixXcd Y = K;
  for (int c = 0; c < d; ++c)
  {
    for (int i = 0; i < d; ++i)
    {
      cd v = Y(i, c);
      for (int k = 0; k < i; ++k)
      {
        v -= L(i, k) * Y(k, c);
      }
      Y(i, c) = v / L(i, i);
    }
  }
  Eigen::MatrixXcd C = Y;
  for (int r = 0; r < d; ++r)
  {
    for (int j = 0; j < d; ++j)
    {
      cd v = Y(r, j);
      for (int k = 0; k < j; ++k)
      {
        v -= C(r, k) * L(j, k);
      }
      C(r, j) = v / L(j, j);
    }
  }
  C = 0.5 * (C + C.adjoint()).eval();

  // Cyclic Jacobi: each rotation annihilates C(p, q) of the Hermitian matrix.
  for (int sweep = 0; sweep < 100; ++sweep)
  {
    double off = 0.0, total = 0.0;
    for (int i = 0; i < d; ++i)
    {
      for (int j = 0; j < d; ++j)
      {
        total += std::norm(C(i, j));
        if (i != j) off += std::norm(C(i, j));
      }
    }
    if (off <= 1e-32 * total)
    {
      break;
    }
    for (int p = 0; p < d - 1; ++p)
    {
      for (int q = p + 1; q < d; ++q)
      {
        const double absb = std::abs(C(p, q));
        if (absb < 1e-300)
        {
          continue;
        }
        const cd ph = C(p, q) / absb;
        const double tau = (C(q, q).real() - C(p, p).real()) / (2.0 * absb);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * c;
        // Columns p, q of J: (c, -sn conj(ph)) and (sn ph, c).
        for (int k = 0; k < d; ++k)
        {
          const cd akp = C(k, p), akq = C(k, q);
          C(k, p) = c * akp - sn * std::conj(ph) * akq;
          C(k, q) = sn * ph * akp + c * akq;
        }
        for (int k = 0; k < d; ++k)
        {
          const cd apk = C(p, k), aqk = C(q, k);
          C(p, k) = c * apk - sn * ph * aqk;
          C(q, k) = sn * std::conj(ph) * apk + c * aqk;
        }
        C(p, q) = 0.0;
        C(q, p) = 0.0;
      }
    }
  }
  Eigen::VectorXd ev(d);
  for (int i = 0; i < d; ++i)
  {
    ev(i) = C(i, i).real();
  }
  std::sort(ev.data(), ev.data() + d);
  return ev;
}

}  // namespace fracmag
