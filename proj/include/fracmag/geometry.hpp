#pragma once

#include <array>
#include <utility>
#include <vector>
#include <Eigen/Core>

namespace fracmag
{

// Points are stored with two coordinates; one-dimensional meshes leave y = 0.
using Point = Eigen::Vector2d;

enum class DomainKind
{
  Interval,
  Rectangle,
  Disk
};

struct Domain
{
  DomainKind kind = DomainKind::Interval;
  // Per-axis bounds (interval: one pair, rectangle: two pairs). Unused for disks.
  std::vector<std::pair<double, double>> bounds;
  Point center = Point::Zero();
  double radius = 0.0;

  static Domain Interval(double a, double b);
  static Domain Rectangle(double x0, double x1, double y0, double y1);
  static Domain Disk(double cx, double cy, double r);

  int Dim() const { return kind == DomainKind::Interval ? 1 : 2; }
  double Diameter() const;

  // Throws InvalidDomain for empty, unbounded, or non-finite bounds.
  void Validate() const;
};

// Oriented piece of the boundary of a two-dimensional mesh domain.
struct BoundarySegment
{
  Point a, b;
  Point normal;  // outward unit normal
};

struct InteriorDofMap
{
  std::vector<int> dof_of_node;  // -1 for boundary nodes
  std::vector<int> node_of_dof;
  int size() const { return static_cast<int>(node_of_dof.size()); }
};

struct Mesh
{
  int dim = 1;
  std::vector<Point> nodes;
  // Intervals use the first two entries (third is -1); triangles are counter-clockwise.
  std::vector<std::array<int, 3>> elements;
  double h = 0.0;
  InteriorDofMap dofs;

  // Exterior description used by the tail term: [a, b] in 1D, boundary polygon in 2D.
  std::pair<double, double> interval{0.0, 0.0};
  std::vector<BoundarySegment> boundary;

  int NumDofs() const { return dofs.size(); }
  int NumNodes() const { return static_cast<int>(nodes.size()); }
  int NumElements() const { return static_cast<int>(elements.size()); }
  int VerticesPerElement() const { return dim + 1; }
  bool IsInterior(int node) const { return dofs.dof_of_node[node] >= 0; }
};

// Uniform structured mesh. Intervals get resolution+1 nodes, rectangles a triangulated
// tensor grid, and disks keep the grid cells of their bounding square whose centroid lies
// inside the circle (a first-order approximation of the curved boundary).
Mesh BuildMesh(const Domain &domain, int resolution);

// Interior nodes (those not on the boundary of the meshed region) numbered
// lexicographically by coordinates.
InteriorDofMap ComputeInteriorDofMap(const Mesh &mesh, const std::vector<bool> &interior);

}  // namespace fracmag
