#pragma once

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "fibrod/tensors.hpp"

// Triangulated cross sections, periodic unit cells, and extruded prism rods.
//
// All section meshes are built from the same ring pattern: a polar fan inside
// the fiber circle, then rings blending from the circle to the outer boundary
// (a larger circle or a square).  The angular count m is a multiple of 8 and
// node coordinates are produced by mirroring one octant, so the mesh is exactly
// symmetric under the dihedral group of the square.  Consequences relied on
// elsewhere:
//   * interface vertices lie on the fiber circle to the last ulp,
//   * opposite boundary nodes of a unit cell match coordinate for coordinate,
//     which makes periodic identification exact,
//   * in a periodic array every cell reuses the reference cell node table, so
//     fiber polygons are congruent across cells (bitwise for dyadic eps).
// Vertex identification in arrays is done through reference edge indices, not
// coordinate hashing.

namespace fibrod {

struct SectionGeometry {
  enum class Outer { Disk, Square };
  Outer outer = Outer::Disk;
  double outer_size = 1.0;   // disk radius R, or half side L of (-L, L)^2
  double fiber_radius = 0.5; // r, 0 < r < R (resp. < L)
};

struct Tri {
  std::array<int, 3> v;
  Region region;
};

// Boundary edge tags.
inline constexpr int kBoundaryOuter = 0;
inline constexpr int kBoundaryInterface = 1;

struct BoundaryEdge {
  std::array<int, 2> v;
  int tag;
};

struct SectionMesh {
  std::vector<Eigen::Vector2d> vertices;
  std::vector<Tri> tris;
  std::vector<BoundaryEdge> boundary;
  // (node, master) pairs for unit cell meshes; empty otherwise.
  std::vector<std::array<int, 2>> periodic;
  // One closed loop of interface vertex ids per fiber, counter clockwise,
  // loop[0] not repeated at the end.  Rod sections have a single loop.
  std::vector<std::vector<int>> fiber_loops;
  std::vector<Eigen::Vector2d> fiber_centers;
  double interface_radius = 0.0;  // physical fiber radius r

  double fiber_area() const;
  double matrix_area() const;
  double total_area() const;
};

// Rod cross section omega with the fiber disk at the origin.  h is the target
// edge length; the angular count is max(16, ceil(2 pi r / h)) rounded up to a
// multiple of 8.
SectionMesh build_section_mesh(const SectionGeometry& g, double h);

// Unit cell Y = (-1/2, 1/2)^2 with a concentric fiber disk of radius r < 1/2,
// resolved with h = 1/n_per_cell, plus the periodic identification of the
// boundary.  Requires n_per_cell >= 8.
SectionMesh build_cell_mesh(double fiber_radius, int n_per_cell);

// Periodic array omega = (-l, l)^2 tiled by k x k copies of the unit cell
// scaled by eps; requires eps = 2 l / k for an integer k >= 1.
SectionMesh build_periodic_array_mesh(double half_width, double fiber_radius,
                                      double eps, int n_per_cell);

struct ExtrudedMesh {
  SectionMesh section;
  std::vector<double> planes;  // x3 plane coordinates, size n3 + 1

  int nodes_per_plane() const { return (int)section.vertices.size(); }
  int num_planes() const { return (int)planes.size(); }
  int node(int i, int l) const { return l * nodes_per_plane() + i; }
  int num_nodes() const { return nodes_per_plane() * num_planes(); }
  int num_prisms() const {
    return (int)section.tris.size() * (num_planes() - 1);
  }
  double length() const { return planes.back() - planes.front(); }
};

// Prism mesh over (0, length) with n3 uniform layers.
ExtrudedMesh extrude(SectionMesh section, double length, int n3);

struct MeshQuality {
  // The polar fan bounds the minimum angle from below by roughly 360/m
  // degrees and the maximum angle away from 180, which is the condition the
  // interpolation constants actually need.
  double min_angle_deg = 0;
  double max_angle_deg = 0;
  double interface_defect = 0;       // max | |v - center| - r | over loops
  double periodic_mismatch = 0;      // max folded coordinate gap over pairs
  double fiber_area_defect = 0;      // |poly area - pi r^2| / (pi r^2)
};

MeshQuality mesh_quality(const SectionMesh& m);

// ---------------------------------------------------------------------------
// ASCII mesh files
//
//   fibrod-mesh v1 dim=<2|3>
//   vertices N
//   <x y [z]>
//   cells M
//   <tri|prism> <vertex ids> <fiber|matrix>
//   boundary K
//   <edge|tri|quad> <vertex ids> <tag name>
//   periodic P        (optional)
//   <node> <master>
//
// Coordinates are written with 17 significant digits, so write(read(f))
// reproduces f byte for byte.

struct GenericMesh {
  int dim = 2;
  std::vector<Eigen::Vector3d> vertices;  // z = 0 when dim == 2
  struct Cell {
    std::string type;
    std::vector<int> v;
    std::string region;
  };
  std::vector<Cell> cells;
  struct Facet {
    std::string type;
    std::vector<int> v;
    std::string tag;
  };
  std::vector<Facet> boundary;
  std::vector<std::array<int, 2>> periodic;
};

struct MeshIoError : std::runtime_error {
  explicit MeshIoError(const std::string& what, int line_number)
      : std::runtime_error(what), line(line_number) {}
  int line;
};

GenericMesh to_generic(const SectionMesh& m);
GenericMesh to_generic(const ExtrudedMesh& m);
void write_mesh(std::ostream& os, const GenericMesh& m);
GenericMesh read_mesh(std::istream& is);  // throws MeshIoError

// P1 geometry helper: gradients of the three barycentric shape functions and
// the signed area of a triangle.
struct TriGeometry {
  Eigen::Matrix<double, 2, 3> grad;  // grad(lambda_i), columns per vertex
  double area;
};
TriGeometry tri_geometry(const SectionMesh& m, const Tri& t);

}  // namespace fibrod
