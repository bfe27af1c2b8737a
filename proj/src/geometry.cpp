#include "fracmag/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include "fracmag/errors.hpp"

namespace fracmag
{

Domain Domain::Interval(double a, double b)
{
  Domain d;
  d.kind = DomainKind::Interval;
  d.bounds = {{a, b}};
  return d;
}

Domain Domain::Rectangle(double x0, double x1, double y0, double y1)
{
  Domain d;
  d.kind = DomainKind::Rectangle;
  d.bounds = {{x0, x1}, {y0, y1}};
  return d;
}

Domain Domain::Disk(double cx, double cy, double r)
{
  Domain d;
  d.kind = DomainKind::Disk;
  d.center = Point(cx, cy);
  d.radius = r;
  return d;
}

double Domain::Diameter() const
{
  switch (kind)
  {
    case DomainKind::Interval:
      return bounds[0].second - bounds[0].first;
    case DomainKind::Rectangle:
      return std::hypot(bounds[0].second - bounds[0].first,
                        bounds[1].second - bounds[1].first);
    case DomainKind::Disk:
      return 2.0 * radius;
  }
  return 0.0;
}

void Domain::Validate() const
{
  auto check_pair = [](const std::pair<double, double> &p)
  {
    if (!std::isfinite(p.first) || !std::isfinite(p.second) || !(p.first < p.second))
    {
      throw InvalidDomain("degenerate bounds: need finite a < b");
    }
  };
  switch (kind)
  {
    case DomainKind::Interval:
      if (bounds.size() != 1)
      {
        throw InvalidDomain("interval domain needs exactly one pair of bounds");
      }
      check_pair(bounds[0]);
      break;
    case DomainKind::Rectangle:
      if (bounds.size() != 2)
      {
        throw InvalidDomain("rectangle domain needs exactly two pairs of bounds");
      }
      check_pair(bounds[0]);
      check_pair(bounds[1]);
      break;
    case DomainKind::Disk:
      if (!center.allFinite() || !std::isfinite(radius) || !(radius > 0.0))
      {
        throw InvalidDomain("disk domain needs a finite center and a positive radius");
      }
      break;
  }
}

InteriorDofMap ComputeInteriorDofMap(const Mesh &mesh, const std::vector<bool> &interior)
{
  InteriorDofMap map;
  map.dof_of_node.assign(mesh.nodes.size(), -1);
  for (std::size_t i = 0; i < mesh.nodes.size(); i++)
  {
    if (interior[i])
    {
      map.node_of_dof.push_back(static_cast<int>(i));
    }
  }
  std::stable_sort(map.node_of_dof.begin(), map.node_of_dof.end(),
                   [&](int a, int b)
                   {
                     const Point &pa = mesh.nodes[a], &pb = mesh.nodes[b];
                     return std::tie(pa.x(), pa.y()) < std::tie(pb.x(), pb.y());
                   });
  for (std::size_t k = 0; k < map.node_of_dof.size(); k++)
  {
    map.dof_of_node[map.node_of_dof[k]] = static_cast<int>(k);
  }
  return map;
}

namespace
{

Mesh BuildIntervalMesh(const Domain &domain, int resolution)
{
  const auto [a, b] = domain.bounds[0];
  Mesh mesh;
  mesh.dim = 1;
  mesh.interval = {a, b};
  mesh.h = (b - a) / resolution;
  mesh.nodes.reserve(resolution + 1);
  for (int i = 0; i <= resolution; i++)
  {
    const double x = (i == resolution) ? b : a + (b - a) * i / resolution;
    mesh.nodes.emplace_back(x, 0.0);
  }
  for (int i = 0; i < resolution; i++)
  {
    mesh.elements.push_back({i, i + 1, -1});
  }
  std::vector<bool> interior(resolution + 1, true);
  interior.front() = interior.back() = false;
  mesh.dofs = ComputeInteriorDofMap(mesh, interior);
  return mesh;
}

Mesh BuildGridMesh(const Domain &domain, int resolution)
{
  double x0, x1, y0, y1;
  if (domain.kind == DomainKind::Rectangle)
  {
    x0 = domain.bounds[0].first;
    x1 = domain.bounds[0].second;
    y0 = domain.bounds[1].first;
    y1 = domain.bounds[1].second;
  }
  else
  {
    x0 = domain.center.x() - domain.radius;
    x1 = domain.center.x() + domain.radius;
    y0 = domain.center.y() - domain.radius;
    y1 = domain.center.y() + domain.radius;
  }
  const int n = resolution;
  const double hx = (x1 - x0) / n, hy = (y1 - y0) / n;
  auto coord = [&](int i, int j)
  {
    const double x = (i == n) ? x1 : x0 + (x1 - x0) * i / n;
    const double y = (j == n) ? y1 : y0 + (y1 - y0) * j / n;
    return Point(x, y);
  };

  // Cell (i, j) spans [x_i, x_{i+1}] x [y_j, y_{j+1}].
  std::vector<char> kept(n * n, 1);
  if (domain.kind == DomainKind::Disk)
  {
    for (int j = 0; j < n; j++)
    {
      for (int i = 0; i < n; i++)
      {
        const Point c = 0.5 * (coord(i, j) + coord(i + 1, j + 1));
        kept[j * n + i] = ((c - domain.center).squaredNorm() < domain.radius * domain.radius);
      }
    }
  }
  auto is_kept = [&](int i, int j)
  { return i >= 0 && j >= 0 && i < n && j < n && kept[j * n + i]; };
  if (std::none_of(kept.begin(), kept.end(), [](char c) { return c != 0; }))
  {
    throw InvalidDomain("masked domain contains no grid cells");
  }

  Mesh mesh;
  mesh.dim = 2;
  mesh.h = std::hypot(hx, hy);
  std::vector<int> node_id((n + 1) * (n + 1), -1);
  std::vector<bool> interior;
  for (int j = 0; j <= n; j++)
  {
    for (int i = 0; i <= n; i++)
    {
      const int touching = is_kept(i - 1, j - 1) + is_kept(i, j - 1) + is_kept(i - 1, j) +
                           is_kept(i, j);
      if (touching == 0)
      {
        continue;
      }
      node_id[j * (n + 1) + i] = static_cast<int>(mesh.nodes.size());
      mesh.nodes.push_back(coord(i, j));
      interior.push_back(touching == 4);
    }
  }
  auto nid = [&](int i, int j) { return node_id[j * (n + 1) + i]; };
  for (int j = 0; j < n; j++)
  {
    for (int i = 0; i < n; i++)
    {
      if (!is_kept(i, j))
      {
        continue;
      }
      mesh.elements.push_back({nid(i, j), nid(i + 1, j), nid(i + 1, j + 1)});
      mesh.elements.push_back({nid(i, j), nid(i + 1, j + 1), nid(i, j + 1)});
      if (!is_kept(i, j - 1))
      {
        mesh.boundary.push_back({coord(i, j), coord(i + 1, j), Point(0, -1)});
      }
      if (!is_kept(i + 1, j))
      {
        mesh.boundary.push_back({coord(i + 1, j), coord(i + 1, j + 1), Point(1, 0)});
      }
      if (!is_kept(i, j + 1))
      {
        mesh.boundary.push_back({coord(i + 1, j + 1), coord(i, j + 1), Point(0, 1)});
      }
      if (!is_kept(i - 1, j))
      {
        mesh.boundary.push_back({coord(i, j + 1), coord(i, j), Point(-1, 0)});
      }
    }
  }
  mesh.dofs = ComputeInteriorDofMap(mesh, interior);
  return mesh;
}

}  // namespace

Mesh BuildMesh(const Domain &domain, int resolution)
{
  if (resolution < 2)
  {
    throw InvalidArgument("mesh resolution must be >= 2");
  }
  domain.Validate();
  return domain.kind == DomainKind::Interval ? BuildIntervalMesh(domain, resolution)
                                             : BuildGridMesh(domain, resolution);
}

}  // namespace fracmag
