#include "fracmag/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>
#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>
#include "fracmag/errors.hpp"
#include "fracmag/quadrature.hpp"

namespace fracmag
{

FractionalOrder::FractionalOrder(double value) : s(value)
{
  if (!(value > 0.0 && value < 1.0))
  {
    throw InvalidArgument("fractional order s must lie in (0, 1)");
  }
}

void FractionalOrder::CheckDimension(int dim) const
{
  if (!(dim > 2.0 * s))
  {
    std::ostringstream os;
    os << "N > 2s violated (N = " << dim << ", s = " << s << ")";
    throw PreconditionViolation(os.str());
  }
}

void KernelQuadratureConfig::Validate() const
{
  if (far_order < 1 || near_far_order < 1 || near_order < 1 || tail_order < 1)
  {
    throw InvalidArgument("quadrature orders must be >= 1");
  }
  if (far_order > 11 || near_far_order > 11)
  {
    throw InvalidArgument("element-pair Gauss orders are limited to 11 points per axis");
  }
  if (tail_refinement < 1)
  {
    throw InvalidArgument("tail refinement levels must be >= 1");
  }
  if (threads < 1)
  {
    throw InvalidArgument("thread count must be >= 1");
  }
  if (!(near_distance >= 0.0))
  {
    throw InvalidArgument("near distance must be nonnegative");
  }
}

double KernelConstant(int dim, double s)
{
  if (!(s > 0.0 && s < 1.0))
  {
    throw InvalidArgument("fractional order s must lie in (0, 1)");
  }
  if (dim != 1 && dim != 2)
  {
    throw InvalidArgument("spatial dimension must be 1 or 2");
  }
  const double N = dim;
  return s * std::pow(2.0, 2.0 * s) * std::tgamma(0.5 * (N + 2.0 * s)) /
         (std::pow(std::numbers::pi, 0.5 * N) * std::tgamma(1.0 - s));
}

namespace
{

using cplx = std::complex<double>;

struct ElementData
{
  int nv = 2;
  std::array<Point, 3> v;
  std::array<int, 3> dof{-1, -1, -1};
  // Hat function of local vertex k restricted to the element: c[k] + g[k] . x.
  std::array<double, 3> c{};
  std::array<Point, 3> g;
  // Inward half-planes en[k] . x >= ed[k] (triangles only).
  std::array<Point, 3> en;
  std::array<double, 3> ed{};
  double measure = 0.0;
  double diam = 0.0;
  Point centroid;
  int ndof = 0;

  double Hat(int k, const Point &x) const { return c[k] + g[k].dot(x); }
};

struct ElementRule
{
  std::vector<Point> x;
  std::vector<double> w;
  std::vector<std::array<double, 3>> phi;
};

std::vector<ElementData> PrepareElements(const Mesh &mesh)
{
  std::vector<ElementData> out(mesh.elements.size());
  for (std::size_t e = 0; e < mesh.elements.size(); e++)
  {
    ElementData &E = out[e];
    E.nv = mesh.dim + 1;
    for (int k = 0; k < E.nv; k++)
    {
      const int node = mesh.elements[e][k];
      E.v[k] = mesh.nodes[node];
      E.dof[k] = mesh.dofs.dof_of_node[node];
      E.ndof += (E.dof[k] >= 0);
    }
    if (mesh.dim == 1)
    {
      const double a = E.v[0].x(), b = E.v[1].x(), L = b - a;
      E.c[0] = b / L;
      E.g[0] = Point(-1.0 / L, 0.0);
      E.c[1] = -a / L;
      E.g[1] = Point(1.0 / L, 0.0);
      E.measure = L;
      E.diam = L;
      E.centroid = 0.5 * (E.v[0] + E.v[1]);
    }
    else
    {
      Eigen::Matrix3d V;
      for (int k = 0; k < 3; k++)
      {
        V.row(k) << 1.0, E.v[k].x(), E.v[k].y();
      }
      const Eigen::Matrix3d Vi = V.inverse();
      for (int k = 0; k < 3; k++)
      {
        E.c[k] = Vi(0, k);
        E.g[k] = Point(Vi(1, k), Vi(2, k));
        const Point t = E.v[(k + 1) % 3] - E.v[k];
        E.en[k] = Point(-t.y(), t.x()).normalized();
        E.ed[k] = E.en[k].dot(E.v[k]);
      }
      const Point e1 = E.v[1] - E.v[0], e2 = E.v[2] - E.v[0];
      E.measure = 0.5 * std::abs(e1.x() * e2.y() - e1.y() * e2.x());
      E.diam = std::max({e1.norm(), e2.norm(), (E.v[2] - E.v[1]).norm()});
      E.centroid = (E.v[0] + E.v[1] + E.v[2]) / 3.0;
    }
  }
  return out;
}

ElementRule MakeElementRule(const ElementData &E, int order)
{
  ElementRule R;
  if (E.nv == 2)
  {
    const auto &gl = quad::CachedGaussLegendre(order);
    for (std::size_t q = 0; q < gl.size(); q++)
    {
      R.x.push_back(E.v[0] + gl.x[q] * (E.v[1] - E.v[0]));
      R.w.push_back(gl.w[q] * E.measure);
    }
  }
  else
  {
    const auto &tri = quad::CachedTriangle(order);
    for (std::size_t q = 0; q < tri.size(); q++)
    {
      R.x.push_back(E.v[0] + tri.x[q][0] * (E.v[1] - E.v[0]) + tri.x[q][1] * (E.v[2] - E.v[0]));
      R.w.push_back(2.0 * tri.w[q] * E.measure);
    }
  }
  for (const Point &x : R.x)
  {
    R.phi.push_back({E.Hat(0, x), E.Hat(1, x), E.nv == 3 ? E.Hat(2, x) : 0.0});
  }
  return R;
}

// Union of the dof-carrying vertices of an element pair.
struct PairNodes
{
  int n = 0;
  std::array<int, 6> dof{};
  std::array<int, 6> in1{};  // local vertex in the first element or -1
  std::array<int, 6> in2{};
};

PairNodes MakePairNodes(const ElementData &e1, const ElementData &e2)
{
  PairNodes p;
  for (int k = 0; k < e1.nv; k++)
  {
    if (e1.dof[k] >= 0)
    {
      p.dof[p.n] = e1.dof[k];
      p.in1[p.n] = k;
      p.in2[p.n] = -1;
      p.n++;
    }
  }
  for (int k = 0; k < e2.nv; k++)
  {
    if (e2.dof[k] < 0)
    {
      continue;
    }
    int found = -1;
    for (int l = 0; l < p.n; l++)
    {
      if (p.dof[l] == e2.dof[k])
      {
        found = l;
      }
    }
    if (found >= 0)
    {
      p.in2[found] = k;
    }
    else
    {
      p.dof[p.n] = e2.dof[k];
      p.in1[p.n] = -1;
      p.in2[p.n] = k;
      p.n++;
    }
  }
  return p;
}

bool ShareVertex(const ElementData &e1, const ElementData &e2, double tol)
{
  for (int a = 0; a < e1.nv; a++)
  {
    for (int b = 0; b < e2.nv; b++)
    {
      if ((e1.v[a] - e2.v[b]).squaredNorm() <= tol * tol)
      {
        return true;
      }
    }
  }
  return false;
}

using LocalMat = std::array<cplx, 36>;

// loc(l, m) += W conj(a_l) a_m, upper triangle only, with
// a_l = phi_l^{e1}(x) - e phi_l^{e2}(y). Rows are test functions: K(i, j) = <phi_j, phi_i>.
inline void AccumulatePoint(const ElementData &e1, const ElementData &e2, const PairNodes &pn,
                            const Point &x, const Point &y, cplx e, double W, LocalMat &loc)
{
  std::array<cplx, 6> a;
  for (int l = 0; l < pn.n; l++)
  {
    cplx v = 0.0;
    if (pn.in1[l] >= 0)
    {
      v += e1.Hat(pn.in1[l], x);
    }
    if (pn.in2[l] >= 0)
    {
      v -= e * e2.Hat(pn.in2[l], y);
    }
    a[l] = v;
  }
  for (int l = 0; l < pn.n; l++)
  {
    const cplx wa = W * std::conj(a[l]);
    for (int m = l; m < pn.n; m++)
    {
      loc[l * 6 + m] += wa * a[m];
    }
  }
}

struct NearContext
{
  double s;
  int dim;
  const MagneticPotential *A;
  int order;
};

// Relative-coordinate rule: with z = x - y,
//   int_{e1} int_{e2} F(x, y) |x-y|^{-N-2s} = int |z|^{-N-2s} G(z) dz,
//   G(z) = int_{e1 cap (e2 + z)} F(x, x - z) dx,
// and z is integrated in polar form. The radial variable is split at every r where the
// combinatorics of e1 cap (e2 + z) change, so G is smooth on each radial panel; the panel
// starting at r = 0 uses Gauss-Jacobi with weight r^{1-2s} applied to G / r^2 (G = O(r^2)).
void NearPair1D(const ElementData &e1, const ElementData &e2, const PairNodes &pn,
                const NearContext &ctx, LocalMat &loc)
{
  const double a1 = e1.v[0].x(), b1 = e1.v[1].x(), a2 = e2.v[0].x(), b2 = e2.v[1].x();
  const double zmin = a1 - b2, zmax = b1 - a2;
  const double tol = 1e-14 * std::max(b1 - a1, b2 - a2);
  std::vector<double> bp = {zmin, zmax, a1 - a2, b1 - b2, 0.0};
  std::sort(bp.begin(), bp.end());
  std::vector<double> pts;
  for (double z : bp)
  {
    if (z >= zmin - tol && z <= zmax + tol && (pts.empty() || z - pts.back() > tol))
    {
      pts.push_back(std::clamp(z, zmin, zmax));
    }
  }
  const double alpha = 1.0 - 2.0 * ctx.s;
  const auto &gj = quad::GaussJacobi01(ctx.order, alpha);
  const auto &gl = quad::CachedGaussLegendre(ctx.order);
  const auto &gx = quad::CachedGaussLegendre(std::max(3, ctx.order));

  auto G = [&](double z, double W)
  {
    const double lo = std::max(a1, a2 + z), hi = std::min(b1, b2 + z);
    if (hi - lo <= tol)
    {
      return;
    }
    for (std::size_t q = 0; q < gx.size(); q++)
    {
      const Point x(lo + gx.x[q] * (hi - lo), 0.0);
      const Point y(x.x() - z, 0.0);
      AccumulatePoint(e1, e2, pn, x, y, MagneticPhase(x, y, *ctx.A, 1), W * gx.w[q] * (hi - lo),
                      loc);
    }
  };

  for (std::size_t p = 0; p + 1 < pts.size(); p++)
  {
    const double zl = pts[p], zh = pts[p + 1];
    if (zh - zl <= tol)
    {
      continue;
    }
    if (std::abs(zl) <= tol || std::abs(zh) <= tol)
    {
      // Panel with an endpoint at z = 0; r = |z| runs over [0, L].
      const double L = zh - zl, sign = (std::abs(zl) <= tol) ? 1.0 : -1.0;
      const double scale = std::pow(L, alpha + 1.0);
      for (std::size_t q = 0; q < gj.size(); q++)
      {
        const double r = L * gj.x[q];
        G(sign * r, scale * gj.w[q] / (r * r));
      }
    }
    else
    {
      for (std::size_t q = 0; q < gl.size(); q++)
      {
        const double z = zl + gl.x[q] * (zh - zl);
        G(z, gl.w[q] * (zh - zl) * std::pow(std::abs(z), -1.0 - 2.0 * ctx.s));
      }
    }
  }
}

// Convex hull (counter-clockwise, collinear points dropped).
std::vector<Point> ConvexHull(std::vector<Point> P, double tol)
{
  std::sort(P.begin(), P.end(), [](const Point &a, const Point &b)
            { return std::tie(a.x(), a.y()) < std::tie(b.x(), b.y()); });
  auto cross = [](const Point &o, const Point &a, const Point &b)
  { return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x()); };
  std::vector<Point> H(2 * P.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < P.size(); i++)
  {
    while (k >= 2 && cross(H[k - 2], H[k - 1], P[i]) <= tol)
    {
      k--;
    }
    H[k++] = P[i];
  }
  for (std::size_t i = P.size() - 1, t = k + 1; i-- > 0;)
  {
    while (k >= t && cross(H[k - 2], H[k - 1], P[i]) <= tol)
    {
      k--;
    }
    H[k++] = P[i];
  }
  H.resize(k > 1 ? k - 1 : k);
  return H;
}

// Sutherland-Hodgman clip of a convex polygon by n . x >= d.
void ClipHalfPlane(std::vector<Point> &poly, const Point &n, double d)
{
  std::vector<Point> out;
  out.reserve(poly.size() + 2);
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; i++)
  {
    const Point &P = poly[i], &Q = poly[(i + 1) % m];
    const double fp = n.dot(P) - d, fq = n.dot(Q) - d;
    if (fp >= 0.0)
    {
      out.push_back(P);
    }
    if ((fp >= 0.0) != (fq >= 0.0))
    {
      out.push_back(P + (fp / (fp - fq)) * (Q - P));
    }
  }
  poly.swap(out);
}

void NearPair2D(const ElementData &e1, const ElementData &e2, const PairNodes &pn,
                const NearContext &ctx, LocalMat &loc)
{
  const double scale = std::max(e1.diam, e2.diam);
  const double tol = 1e-12 * scale;
  std::vector<Point> D;
  for (int a = 0; a < 3; a++)
  {
    for (int b = 0; b < 3; b++)
    {
      D.push_back(e1.v[a] - e2.v[b]);
    }
  }
  const std::vector<Point> hull = ConvexHull(D, tol * scale);
  const std::size_t nh = hull.size();
  std::vector<Point> hn(nh);
  std::vector<double> hd(nh);
  bool origin_inside = true;
  for (std::size_t k = 0; k < nh; k++)
  {
    const Point t = hull[(k + 1) % nh] - hull[k];
    hn[k] = Point(-t.y(), t.x()).normalized();
    hd[k] = hn[k].dot(hull[k]);
    origin_inside = origin_inside && (-hd[k] > tol);
  }

  std::vector<double> angles;
  for (const Point &d : D)
  {
    if (d.norm() > tol)
    {
      double t = std::atan2(d.y(), d.x());
      angles.push_back(t < 0.0 ? t + 2.0 * std::numbers::pi : t);
    }
  }
  std::sort(angles.begin(), angles.end());
  std::vector<double> th;
  for (double t : angles)
  {
    if (th.empty() || t - th.back() > 1e-13)
    {
      th.push_back(t);
    }
  }
  if (th.empty())
  {
    return;
  }
  th.push_back(th.front() + 2.0 * std::numbers::pi);

  const double alpha = 1.0 - 2.0 * ctx.s;
  const auto gj = quad::GaussJacobi01(ctx.order, alpha);
  const auto &gl = quad::CachedGaussLegendre(ctx.order);
  const auto &tri = quad::CachedTriangle(2);

  std::vector<Point> poly;
  auto G = [&](const Point &z, double W)
  {
    poly.assign(e1.v.begin(), e1.v.end());
    for (int k = 0; k < 3 && poly.size() >= 3; k++)
    {
      ClipHalfPlane(poly, e2.en[k], e2.ed[k] + e2.en[k].dot(z));
    }
    if (poly.size() < 3)
    {
      return;
    }
    for (std::size_t t = 1; t + 1 < poly.size(); t++)
    {
      const Point p0 = poly[0], d1 = poly[t] - p0, d2 = poly[t + 1] - p0;
      const double area = 0.5 * std::abs(d1.x() * d2.y() - d1.y() * d2.x());
      if (area <= tol * tol)
      {
        continue;
      }
      for (std::size_t q = 0; q < tri.size(); q++)
      {
        const Point x = p0 + tri.x[q][0] * d1 + tri.x[q][1] * d2;
        const Point y = x - z;
        AccumulatePoint(e1, e2, pn, x, y, MagneticPhase(x, y, *ctx.A, 2),
                        W * 2.0 * area * tri.w[q], loc);
      }
    }
  };

  std::vector<double> rb;
  for (std::size_t p = 0; p + 1 < th.size(); p++)
  {
    const double t0 = th[p], t1 = th[p + 1];
    if (t1 - t0 <= 1e-13)
    {
      continue;
    }
    for (std::size_t qa = 0; qa < gl.size(); qa++)
    {
      const double theta = t0 + gl.x[qa] * (t1 - t0);
      const double wt = gl.w[qa] * (t1 - t0);
      const Point w(std::cos(theta), std::sin(theta));
      // Ray r w intersected with the difference body e1 - e2.
      double rin = 0.0, rout = 1e300;
      for (std::size_t k = 0; k < nh; k++)
      {
        const double nw = hn[k].dot(w);
        if (std::abs(nw) < 1e-15)
        {
          if (hd[k] > tol)
          {
            rout = -1.0;
          }
          continue;
        }
        const double r = hd[k] / nw;
        if (nw > 0.0)
        {
          rin = std::max(rin, r);
        }
        else
        {
          rout = std::min(rout, r);
        }
      }
      if (rout - rin <= tol)
      {
        continue;
      }
      rb.assign({rin, rout});
      for (int a = 0; a < 3; a++)
      {
        for (int k = 0; k < 3; k++)
        {
          // Vertex of e2 + r w on an edge line of e1, and vertex of e1 on an edge line of e2 + r w.
          double nw = e1.en[k].dot(w);
          if (std::abs(nw) > 1e-15)
          {
            rb.push_back((e1.ed[k] - e1.en[k].dot(e2.v[a])) / nw);
          }
          nw = e2.en[k].dot(w);
          if (std::abs(nw) > 1e-15)
          {
            rb.push_back((e2.en[k].dot(e1.v[a]) - e2.ed[k]) / nw);
          }
        }
      }
      std::sort(rb.begin(), rb.end());
      double prev = rin;
      for (double rnext : rb)
      {
        if (rnext <= prev + tol)
        {
          continue;
        }
        if (rnext > rout)
        {
          rnext = rout;
        }
        if (rnext - prev <= tol)
        {
          break;
        }
        if (prev <= tol)
        {
          const double L = rnext, sc = std::pow(L, alpha + 1.0);
          for (std::size_t q = 0; q < gj.size(); q++)
          {
            const double r = L * gj.x[q];
            G(r * w, wt * sc * gj.w[q] / (r * r));
          }
        }
        else
        {
          for (std::size_t q = 0; q < gl.size(); q++)
          {
            const double r = prev + gl.x[q] * (rnext - prev);
            G(r * w, wt * gl.w[q] * (rnext - prev) * std::pow(r, -1.0 - 2.0 * ctx.s));
          }
        }
        prev = rnext;
        if (prev >= rout - tol)
        {
          break;
        }
      }
    }
  }
}

// Tensor rule for separated element pairs. The x-x and y-y blocks are phase free; only the
// cross block carries the magnetic phase.
void FarPair(const ElementData &e1, const ElementRule &r1, const ElementData &e2,
             const ElementRule &r2, const PairNodes &pn, double power,
             const MagneticPotential &A, int dim, LocalMat &loc)
{
  const std::size_t n1 = r1.x.size(), n2 = r2.x.size();
  std::array<double, 128> s1{}, s2{};
  std::array<cplx, 9> cross{};
  const bool need_cross = e1.ndof > 0 && e2.ndof > 0;
  for (std::size_t q1 = 0; q1 < n1; q1++)
  {
    for (std::size_t q2 = 0; q2 < n2; q2++)
    {
      const double r2sq = (r1.x[q1] - r2.x[q2]).squaredNorm();
      const double k = r1.w[q1] * r2.w[q2] * std::pow(r2sq, -0.5 * power);
      s1[q1] += k;
      s2[q2] += k;
      if (need_cross)
      {
        const cplx ke = k * MagneticPhase(r1.x[q1], r2.x[q2], A, dim);
        for (int a = 0; a < e1.nv; a++)
        {
          if (e1.dof[a] < 0)
          {
            continue;
          }
          for (int b = 0; b < e2.nv; b++)
          {
            if (e2.dof[b] >= 0)
            {
              cross[a * 3 + b] += ke * (r1.phi[q1][a] * r2.phi[q2][b]);
            }
          }
        }
      }
    }
  }
  for (int l = 0; l < pn.n; l++)
  {
    for (int m = l; m < pn.n; m++)
    {
      cplx v = 0.0;
      if (pn.in1[l] >= 0 && pn.in1[m] >= 0)
      {
        double acc = 0.0;
        for (std::size_t q = 0; q < n1; q++)
        {
          acc += s1[q] * r1.phi[q][pn.in1[l]] * r1.phi[q][pn.in1[m]];
        }
        v += acc;
      }
      else if (pn.in2[l] >= 0 && pn.in2[m] >= 0)
      {
        double acc = 0.0;
        for (std::size_t q = 0; q < n2; q++)
        {
          acc += s2[q] * r2.phi[q][pn.in2[l]] * r2.phi[q][pn.in2[m]];
        }
        v += acc;
      }
      else if (pn.in1[l] >= 0)
      {
        v = -cross[pn.in1[l] * 3 + pn.in2[m]];
      }
      else
      {
        v = -std::conj(cross[pn.in1[m] * 3 + pn.in2[l]]);
      }
      loc[l * 6 + m] += v;
    }
  }
}

// Adds a Hermitian local matrix to the upper triangle of K.
void Scatter(const PairNodes &pn, const LocalMat &loc, double factor, Eigen::MatrixXcd &K)
{
  for (int l = 0; l < pn.n; l++)
  {
    for (int m = l; m < pn.n; m++)
    {
      const int P = pn.dof[l], Q = pn.dof[m];
      const cplx v = factor * loc[l * 6 + m];
      if (P < Q)
      {
        K(P, Q) += v;
      }
      else if (P > Q)
      {
        K(Q, P) += std::conj(v);
      }
      else
      {
        K(P, P) += v.real();
      }
    }
  }
}

void MirrorUpper(Eigen::MatrixXcd &K)
{
  for (Eigen::Index j = 0; j < K.cols(); j++)
  {
    K(j, j) = K(j, j).real();
    for (Eigen::Index i = j + 1; i < K.rows(); i++)
    {
      K(i, j) = std::conj(K(j, i));
    }
  }
}

// Runs body(e1, acc) for every element, splitting elements round-robin over worker
// threads. Per-thread accumulators are reduced in thread order, so the result depends on
// the thread count but not on scheduling.
template <typename Body>
Eigen::MatrixXcd ParallelAccumulate(int nelem, int d, int threads, Body body)
{
  threads = std::max(1, std::min(threads, nelem));
  std::vector<Eigen::MatrixXcd> acc(threads, Eigen::MatrixXcd::Zero(d, d));
  if (threads == 1)
  {
    for (int e = 0; e < nelem; e++)
    {
      body(e, acc[0]);
    }
    return acc[0];
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; t++)
  {
    pool.emplace_back(
        [&, t]()
        {
          for (int e = t; e < nelem; e += threads)
          {
            body(e, acc[t]);
          }
        });
  }
  for (auto &th : pool)
  {
    th.join();
  }
  for (int t = 1; t < threads; t++)
  {
    acc[0] += acc[t];
  }
  return acc[0];
}

// Integral of the cos^{2s} profile used by the polygon tail formula:
// d . int_{segment} |y - x|^{-2-2s} dS = sign(d) |d|^{-2s} int_{phi_a}^{phi_b} cos^{2s}.
double SegmentAngularIntegral(double d, double ta, double tb, double s)
{
  const double a = 0.5, b = s + 0.5;
  const double d2 = d * d;
  auto F = [&](double t)
  {
    const double t2 = t * t;
    return 0.5 * boost::math::beta(a, b, t2 / (d2 + t2));
  };
  auto Gc = [&](double t)
  {
    const double t2 = t * t;
    return 0.5 * boost::math::beta(b, a, d2 / (d2 + t2));
  };
  if (ta >= 0.0 && tb >= 0.0)
  {
    return Gc(ta) - Gc(tb);
  }
  if (ta <= 0.0 && tb <= 0.0)
  {
    return Gc(tb) - Gc(ta);
  }
  return F(ta) + F(tb);
}

// Collinear, contiguous boundary pieces with the same normal are merged.
std::vector<BoundarySegment> MergedBoundary(const Mesh &mesh)
{
  std::vector<BoundarySegment> segs = mesh.boundary;
  const double tol = 1e-12 * mesh.h;
  bool merged = true;
  while (merged)
  {
    merged = false;
    for (std::size_t i = 0; i < segs.size() && !merged; i++)
    {
      for (std::size_t j = 0; j < segs.size() && !merged; j++)
      {
        if (i == j || (segs[i].normal - segs[j].normal).norm() > 1e-12)
        {
          continue;
        }
        if ((segs[i].b - segs[j].a).norm() <= tol)
        {
          segs[i].b = segs[j].b;
          segs.erase(segs.begin() + j);
          merged = true;
        }
      }
    }
  }
  return segs;
}

double TailWeight2D(const std::vector<BoundarySegment> &segs, double s, const Point &x)
{
  double total = 0.0;
  for (const auto &sg : segs)
  {
    const double d = (sg.a - x).dot(sg.normal);
    if (std::abs(d) < 1e-300)
    {
      continue;
    }
    const Point tau = (sg.b - sg.a).normalized();
    const double ta = (sg.a - x).dot(tau), tb = (sg.b - x).dot(tau);
    total += std::copysign(std::pow(std::abs(d), -2.0 * s), d) *
             SegmentAngularIntegral(std::abs(d), ta, tb, s);
  }
  return total / (2.0 * s);
}

double PointSegmentDistance(const Point &p, const BoundarySegment &sg)
{
  const Point ab = sg.b - sg.a;
  const double t = std::clamp((p - sg.a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (sg.a + t * ab)).norm();
}

}  // namespace

double TailWeight(const Mesh &mesh, double s, const Point &x)
{
  if (mesh.dim == 1)
  {
    const auto [a, b] = mesh.interval;
    return (std::pow(x.x() - a, -2.0 * s) + std::pow(b - x.x(), -2.0 * s)) / (2.0 * s);
  }
  return TailWeight2D(MergedBoundary(mesh), s, x);
}

Eigen::MatrixXd AssembleTail(const Mesh &mesh, double s, const KernelQuadratureConfig &q)
{
  FractionalOrder(s).CheckDimension(mesh.dim);
  q.Validate();
  const int d = mesh.NumDofs();
  const double c = KernelConstant(mesh.dim, s);
  const auto elems = PrepareElements(mesh);
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(d, d);

  // The exterior value of u is zero, so on (Omega x Omega^c) u(x) - e^{i theta} u(y) = u(x):
  // the magnetic phase drops out and both cross regions give c_{N,s} int u conj(v) zeta.
  if (mesh.dim == 1)
  {
    const auto [A, B] = mesh.interval;
    const double p = -2.0 * s;
    // int_lo^hi t^p (c0 + c1 t + c2 t^2) dt in closed form.
    auto moment = [&](double lo, double hi, double c0, double c1, double c2)
    {
      auto prim = [&](double t)
      {
        if (t <= 0.0)
        {
          return 0.0;
        }
        return c0 * std::pow(t, p + 1) / (p + 1) + c1 * std::pow(t, p + 2) / (p + 2) +
               c2 * std::pow(t, p + 3) / (p + 3);
      };
      return prim(hi) - prim(lo);
    };
    for (const auto &E : elems)
    {
      const double xa = E.v[0].x(), xb = E.v[1].x();
      for (int i = 0; i < 2; i++)
      {
        for (int j = 0; j < 2; j++)
        {
          if (E.dof[i] < 0 || E.dof[j] < 0)
          {
            continue;
          }
          const double ci = E.c[i], gi = E.g[i].x(), cj = E.c[j], gj = E.g[j].x();
          // Left exterior: x = A + t.
          double li = ci + gi * A, lj = cj + gj * A;
          double val = moment(xa - A, xb - A, li * lj, li * gj + lj * gi, gi * gj);
          // Right exterior: x = B - t.
          li = ci + gi * B;
          lj = cj + gj * B;
          val += moment(B - xb, B - xa, li * lj, -(li * gj + lj * gi), gi * gj);
          T(E.dof[i], E.dof[j]) += c * val / (2.0 * s);
        }
      }
    }
    return 0.5 * (T + T.transpose());
  }

  const auto segs = MergedBoundary(mesh);
  const auto &rule = quad::CachedTriangle(q.tail_order);
  const double tol = 1e-10 * mesh.h;
  auto on_boundary = [&](const Point &p)
  {
    for (const auto &sg : segs)
    {
      if (PointSegmentDistance(p, sg) <= tol)
      {
        return true;
      }
    }
    return false;
  };

  for (const auto &E : elems)
  {
    if (E.ndof == 0)
    {
      continue;
    }
    Eigen::Matrix3d loc = Eigen::Matrix3d::Zero();
    auto integrate = [&](auto &&self, const Point &p0, const Point &p1, const Point &p2,
                         std::array<bool, 3> bnd, int depth) -> void
    {
      const bool touches = bnd[0] || bnd[1] || bnd[2];
      if (touches && depth < q.tail_refinement)
      {
        const Point m01 = 0.5 * (p0 + p1), m12 = 0.5 * (p1 + p2), m20 = 0.5 * (p2 + p0);
        const bool b01 = on_boundary(m01), b12 = on_boundary(m12), b20 = on_boundary(m20);
        self(self, p0, m01, m20, {bnd[0], b01, b20}, depth + 1);
        self(self, m01, p1, m12, {b01, bnd[1], b12}, depth + 1);
        self(self, m20, m12, p2, {b20, b12, bnd[2]}, depth + 1);
        self(self, m01, m12, m20, {b01, b12, b20}, depth + 1);
        return;
      }
      const Point d1 = p1 - p0, d2 = p2 - p0;
      const double area = 0.5 * std::abs(d1.x() * d2.y() - d1.y() * d2.x());
      for (std::size_t k = 0; k < rule.size(); k++)
      {
        const Point x = p0 + rule.x[k][0] * d1 + rule.x[k][1] * d2;
        const double w = 2.0 * area * rule.w[k] * TailWeight2D(segs, s, x);
        for (int i = 0; i < 3; i++)
        {
          for (int j = 0; j < 3; j++)
          {
            loc(i, j) += w * E.Hat(i, x) * E.Hat(j, x);
          }
        }
      }
    };
    integrate(integrate, E.v[0], E.v[1], E.v[2],
              {E.dof[0] < 0, E.dof[1] < 0, E.dof[2] < 0}, 0);
    for (int i = 0; i < 3; i++)
    {
      for (int j = 0; j < 3; j++)
      {
        if (E.dof[i] >= 0 && E.dof[j] >= 0)
        {
          T(E.dof[i], E.dof[j]) += c * loc(i, j);
        }
      }
    }
  }
  return 0.5 * (T + T.transpose());
}

Eigen::MatrixXcd AssembleInteriorForm(const Mesh &mesh, double s, const MagneticPotential &A,
                                      const KernelQuadratureConfig &q)
{
  FractionalOrder(s).CheckDimension(mesh.dim);
  A.ValidateFor(mesh.dim);
  q.Validate();
  const int d = mesh.NumDofs();
  const int ne = mesh.NumElements();
  const double c = KernelConstant(mesh.dim, s);
  const double power = mesh.dim + 2.0 * s;
  const auto elems = PrepareElements(mesh);
  std::vector<ElementRule> far_rules, near_rules;
  for (const auto &E : elems)
  {
    far_rules.push_back(MakeElementRule(E, q.far_order));
    near_rules.push_back(MakeElementRule(E, q.near_far_order));
  }
  const NearContext ctx{s, mesh.dim, &A, q.near_order};
  const double near_dist = q.near_distance * mesh.h;
  const double vtol = 1e-10 * mesh.h;

  Eigen::MatrixXcd K = ParallelAccumulate(
      ne, d, q.threads,
      [&](int i, Eigen::MatrixXcd &acc)
      {
        const ElementData &e1 = elems[i];
        LocalMat loc;
        for (int j = i; j < ne; j++)
        {
          const ElementData &e2 = elems[j];
          if (e1.ndof == 0 && e2.ndof == 0)
          {
            continue;
          }
          const PairNodes pn = MakePairNodes(e1, e2);
          loc.fill(0.0);
          if (i == j || ShareVertex(e1, e2, vtol))
          {
            if (mesh.dim == 1)
            {
              NearPair1D(e1, e2, pn, ctx, loc);
            }
            else
            {
              NearPair2D(e1, e2, pn, ctx, loc);
            }
          }
          else if ((e1.centroid - e2.centroid).norm() < near_dist)
          {
            FarPair(e1, near_rules[i], e2, near_rules[j], pn, power, A, mesh.dim, loc);
          }
          else
          {
            FarPair(e1, far_rules[i], e2, far_rules[j], pn, power, A, mesh.dim, loc);
          }
          // (e2, e1) contributes the same integrand after swapping x and y.
          Scatter(pn, loc, (i == j ? 1.0 : 2.0) * 0.5 * c, acc);
        }
      });
  MirrorUpper(K);
  return K;
}

namespace
{

// Estimates the relative near-field quadrature defect on a representative identical pair and
// a touching pair by comparing against a higher order.
double NearFieldDefect(const Mesh &mesh, double s, const MagneticPotential &A,
                       const KernelQuadratureConfig &q)
{
  const auto elems = PrepareElements(mesh);
  int i0 = -1;
  for (std::size_t e = 0; e < elems.size(); e++)
  {
    if (elems[e].ndof == elems[e].nv)
    {
      i0 = static_cast<int>(e);
      break;
    }
  }
  if (i0 < 0)
  {
    return 0.0;
  }
  double worst = 0.0;
  const double vtol = 1e-10 * mesh.h;
  int checked = 0;
  for (std::size_t j = 0; j < elems.size() && checked < 2; j++)
  {
    const auto &e1 = elems[i0], &e2 = elems[j];
    if (static_cast<int>(j) != i0 && !ShareVertex(e1, e2, vtol))
    {
      continue;
    }
    checked++;
    const PairNodes pn = MakePairNodes(e1, e2);
    LocalMat lo{}, hi{};
    NearContext c1{s, mesh.dim, &A, q.near_order}, c2{s, mesh.dim, &A, q.near_order + 4};
    if (mesh.dim == 1)
    {
      NearPair1D(e1, e2, pn, c1, lo);
      NearPair1D(e1, e2, pn, c2, hi);
    }
    else
    {
      NearPair2D(e1, e2, pn, c1, lo);
      NearPair2D(e1, e2, pn, c2, hi);
    }
    double num = 0.0, den = 0.0;
    for (int k = 0; k < 36; k++)
    {
      num = std::max(num, std::abs(lo[k] - hi[k]));
      den = std::max(den, std::abs(hi[k]));
    }
    worst = std::max(worst, den > 0.0 ? num / den : 0.0);
  }
  return worst;
}

}  // namespace

FormMatrix AssembleNonlocalForm(const Mesh &mesh, double s, const MagneticPotential &A,
                                const KernelQuadratureConfig &q, const Eigen::MatrixXd &tail)
{
  FormMatrix F;
  F.K = AssembleInteriorForm(mesh, s, A, q);
  if (tail.size() > 0)
  {
    if (tail.rows() != F.K.rows() || tail.cols() != F.K.cols())
    {
      throw InvalidArgument("tail matrix size does not match the mesh");
    }
    F.K += tail.cast<std::complex<double>>();
    MirrorUpper(F.K);
  }
  F.meta.kind = "nonlocal";
  F.meta.s = s;
  F.meta.potential = A.Describe();
  F.meta.tail_included = tail.size() > 0;
  F.meta.quadrature = q;
  const double defect = NearFieldDefect(mesh, s, A, q);
  if (defect > 1e-6)
  {
    std::ostringstream os;
    os << "near-field quadrature defect estimate " << defect
       << " exceeds 1e-6; increase near_order";
    F.meta.warnings.push_back(os.str());
  }
  return F;
}

FormMatrix AssembleNonlocalForm(const Mesh &mesh, double s, const MagneticPotential &A,
                                const KernelQuadratureConfig &q, bool include_tail)
{
  const Eigen::MatrixXd tail = include_tail ? AssembleTail(mesh, s, q) : Eigen::MatrixXd();
  return AssembleNonlocalForm(mesh, s, A, q, tail);
}

MassMatrix AssembleMass(const Mesh &mesh)
{
  const int d = mesh.NumDofs();
  MassMatrix out;
  out.M = Eigen::MatrixXd::Zero(d, d);
  out.lumped = Eigen::VectorXd::Zero(d);
  const auto elems = PrepareElements(mesh);
  for (const auto &E : elems)
  {
    for (int i = 0; i < E.nv; i++)
    {
      if (E.dof[i] < 0)
      {
        continue;
      }
      out.lumped(E.dof[i]) += E.measure / E.nv;
      for (int j = 0; j < E.nv; j++)
      {
        if (E.dof[j] < 0)
        {
          continue;
        }
        // P1 element mass: |E| (1 + delta_ij) / ((N+1)(N+2)).
        const double m = E.measure * (i == j ? 2.0 : 1.0) / (E.nv * (E.nv + 1));
        out.M(E.dof[i], E.dof[j]) += m;
      }
    }
  }
  out.M = 0.5 * (out.M + out.M.transpose()).eval();
  return out;
}

FormMatrix AssembleLocalMagneticForm(const Mesh &mesh, const MagneticPotential &A, int order)
{
  A.ValidateFor(mesh.dim);
  if (order < 1)
  {
    throw InvalidArgument("quadrature order must be >= 1");
  }
  const int d = mesh.NumDofs();
  Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(d, d);
  const auto elems = PrepareElements(mesh);
  const cplx I(0.0, 1.0);
  for (const auto &E : elems)
  {
    if (E.ndof == 0)
    {
      continue;
    }
    const ElementRule R = MakeElementRule(E, order);
    for (std::size_t q = 0; q < R.x.size(); q++)
    {
      const Point Ax = A(R.x[q], mesh.dim);
      for (int i = 0; i < E.nv; i++)
      {
        if (E.dof[i] < 0)
        {
          continue;
        }
        for (int j = 0; j < E.nv; j++)
        {
          if (E.dof[j] < 0 || E.dof[i] > E.dof[j])
          {
            continue;
          }
          cplx v = 0.0;
          for (int comp = 0; comp < mesh.dim; comp++)
          {
            const cplx ui = E.g[i](comp) - I * Ax(comp) * R.phi[q][i];
            const cplx uj = E.g[j](comp) - I * Ax(comp) * R.phi[q][j];
            v += std::conj(ui) * uj;
          }
          K(E.dof[i], E.dof[j]) += R.w[q] * v;
        }
      }
    }
  }
  MirrorUpper(K);
  FormMatrix F;
  F.K = std::move(K);
  F.meta.kind = "local";
  F.meta.potential = A.Describe();
  return F;
}

}  // namespace fracmag
