#include "fibrod/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace fibrod {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Compensated accumulator; element areas are summed in mesh creation order,
// so totals are deterministic and accurate to the last couple of ulps.
struct Kahan {
  double sum = 0, c = 0;
  void add(double x) {
    double y = x - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

double tri_area2(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                 const Eigen::Vector2d& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// m unit directions, m a multiple of 8, filled by mirroring the first octant
// so that reflections across both axes and the diagonals are exact in floating
// point.  unit[m/8] is set to (sqrt(1/2), sqrt(1/2)) explicitly.
std::vector<Eigen::Vector2d> unit_directions(int m) {
  std::vector<Eigen::Vector2d> u(m);
  const int q = m / 8;
  for (int j = 0; j <= q; ++j) {
    double c, s;
    if (j == 0) {
      c = 1.0;
      s = 0.0;
    } else if (j == q) {
      c = s = std::sqrt(0.5);
    } else {
      c = std::cos(2.0 * kPi * j / m);
      s = std::sin(2.0 * kPi * j / m);
    }
    u[j] = {c, s};
    u[(m / 4 - j) % m] = {s, c};
    u[(m / 4 + j) % m] = {-s, c};
    u[(m / 2 - j) % m] = {-c, s};
    u[(m / 2 + j) % m] = {-c, -s};
    u[(3 * m / 4 - j) % m] = {-s, -c};
    u[(3 * m / 4 + j) % m] = {s, -c};
    u[(m - j) % m] = {c, -s};
  }
  return u;
}

// Radial projection of a unit direction onto the boundary of (-L, L)^2.  The
// dominant coordinate is set to exactly +-L; the diagonal gives exact corners.
Eigen::Vector2d square_point(const Eigen::Vector2d& u, double L) {
  double ax = std::abs(u.x()), ay = std::abs(u.y());
  if (ax == ay) return {std::copysign(L, u.x()), std::copysign(L, u.y())};
  if (ax > ay) return {std::copysign(L, u.x()), u.y() * (L / ax)};
  return {u.x() * (L / ay), std::copysign(L, u.y())};
}

int angular_count(double r, double h) {
  int m = std::max(16, (int)std::ceil(2.0 * kPi * r / h));
  return ((m + 7) / 8) * 8;
}

struct RingMesh {
  SectionMesh mesh;
  int m = 0;  // angular count
  int K = 0;  // fiber rings
  int J = 0;  // rings between interface and outer boundary
  int outer_node(int j) const { return 1 + (K + J - 1) * m + j; }
};

// Shared ring builder.  Node 0 is the fiber center, ring k in 1..K+J carries m
// nodes, ring K is the interface, ring K+J the outer boundary.
RingMesh build_rings(const SectionGeometry& g, int m, int K, int J) {
  const double r = g.fiber_radius;
  RingMesh rm;
  rm.m = m;
  rm.K = K;
  rm.J = J;
  SectionMesh& mesh = rm.mesh;

  auto u = unit_directions(m);
  mesh.vertices.reserve(1 + (size_t)(K + J) * m);
  mesh.vertices.emplace_back(0.0, 0.0);
  for (int k = 1; k <= K; ++k) {
    double rho = r * ((double)k / K);
    for (int j = 0; j < m; ++j) mesh.vertices.emplace_back(rho * u[j]);
  }
  for (int i = 1; i <= J; ++i) {
    double s = (double)i / J;
    for (int j = 0; j < m; ++j) {
      Eigen::Vector2d inner = r * u[j];
      Eigen::Vector2d outer = g.outer == SectionGeometry::Outer::Disk
                                  ? (g.outer_size * u[j]).eval()
                                  : square_point(u[j], g.outer_size);
      mesh.vertices.emplace_back((1.0 - s) * inner + s * outer);
    }
  }

  auto id = [m](int k, int j) { return 1 + (k - 1) * m + ((j % m + m) % m); };
  for (int j = 0; j < m; ++j)
    mesh.tris.push_back({{0, id(1, j), id(1, j + 1)}, Region::Fiber});
  for (int k = 1; k < K + J; ++k) {
    Region reg = k <= K - 1 ? Region::Fiber : Region::Matrix;
    for (int j = 0; j < m; ++j) {
      // Quad between rings k and k+1, counter clockwise in the plane.
      int a = id(k, j), b = id(k, j + 1), c = id(k + 1, j + 1), d = id(k + 1, j);
      mesh.tris.push_back({{a, d, c}, reg});
      mesh.tris.push_back({{a, c, b}, reg});
    }
  }

  for (int j = 0; j < m; ++j) {
    mesh.boundary.push_back({{id(K + J, j), id(K + J, j + 1)}, kBoundaryOuter});
    mesh.boundary.push_back({{id(K, j), id(K, j + 1)}, kBoundaryInterface});
  }
  std::vector<int> loop(m);
  for (int j = 0; j < m; ++j) loop[j] = id(K, j);
  mesh.fiber_loops.push_back(std::move(loop));
  mesh.fiber_centers.emplace_back(0.0, 0.0);
  mesh.interface_radius = r;
  return rm;
}

void validate_geometry(const SectionGeometry& g) {
  double bound = g.outer_size;
  if (!(g.fiber_radius > 0.0) || !(g.fiber_radius < bound)) {
    std::ostringstream os;
    os << "section geometry requires 0 < fiber_radius < outer_size, got r="
       << g.fiber_radius << " outer=" << bound;
    throw std::invalid_argument(os.str());
  }
}

RingMesh build_cell_rings(double fiber_radius, int n_per_cell) {
  if (n_per_cell < 8) {
    std::ostringstream os;
    os << "build_cell_mesh: n_per_cell must be at least 8, got " << n_per_cell;
    throw std::invalid_argument(os.str());
  }
  if (!(fiber_radius > 0.0) || !(fiber_radius < 0.5)) {
    std::ostringstream os;
    os << "build_cell_mesh: fiber radius must lie in (0, 1/2), got "
       << fiber_radius;
    throw std::invalid_argument(os.str());
  }
  SectionGeometry g;
  g.outer = SectionGeometry::Outer::Square;
  g.outer_size = 0.5;
  g.fiber_radius = fiber_radius;
  double h = 1.0 / n_per_cell;
  int m = angular_count(fiber_radius, h);
  int K = std::max(2, (int)std::lround(fiber_radius / h));
  int J = std::max(2, (int)std::ceil((0.5 * std::sqrt(2.0) - fiber_radius) / h));
  RingMesh rm = build_rings(g, m, K, J);
  // Snap reference coordinates to the 2^-40 grid.  Cell offsets in a periodic
  // array are dyadic, so offset + eps * y is then exact in double precision
  // and every cell reproduces the reference fiber polygon bitwise, while the
  // interface stays on the circle to about 6e-13.  The grid keeps +-1/2 and
  // the mirror symmetries exact.
  const double scale = 1099511627776.0;  // 2^40
  for (auto& v : rm.mesh.vertices) {
    v.x() = std::round(v.x() * scale) / scale;
    v.y() = std::round(v.y() * scale) / scale;
  }
  return rm;
}

}  // namespace

double SectionMesh::fiber_area() const {
  Kahan k;
  for (const auto& t : tris)
    if (t.region == Region::Fiber)
      k.add(0.5 * tri_area2(vertices[t.v[0]], vertices[t.v[1]],
                            vertices[t.v[2]]));
  return k.sum;
}

double SectionMesh::matrix_area() const {
  Kahan k;
  for (const auto& t : tris)
    if (t.region == Region::Matrix)
      k.add(0.5 * tri_area2(vertices[t.v[0]], vertices[t.v[1]],
                            vertices[t.v[2]]));
  return k.sum;
}

double SectionMesh::total_area() const {
  Kahan k;
  for (const auto& t : tris)
    k.add(0.5 *
          tri_area2(vertices[t.v[0]], vertices[t.v[1]], vertices[t.v[2]]));
  return k.sum;
}

SectionMesh build_section_mesh(const SectionGeometry& g, double h) {
  validate_geometry(g);
  if (!(h > 0.0)) throw std::invalid_argument("mesh size h must be positive");
  double r = g.fiber_radius;
  int m = angular_count(r, h);
  int K = std::max(2, (int)std::lround(r / h));
  double reach = g.outer == SectionGeometry::Outer::Disk
                     ? g.outer_size - r
                     : g.outer_size * std::sqrt(2.0) - r;
  int J = std::max(2, (int)std::ceil(reach / h));
  return build_rings(g, m, K, J).mesh;
}

SectionMesh build_cell_mesh(double fiber_radius, int n_per_cell) {
  RingMesh rm = build_cell_rings(fiber_radius, n_per_cell);
  SectionMesh mesh = std::move(rm.mesh);
  const int m = rm.m, q = rm.m / 8;

  // Fold the outer ring onto its left/bottom masters.  Mirrored construction
  // makes partner coordinates equal bitwise, which the unit tests assert.
  auto outer = [&](int j) { return rm.outer_node(((j % m) + m) % m); };
  for (int j = -q + 1; j < q; ++j)  // right edge, corners excluded
    mesh.periodic.push_back({outer(j), outer(m / 2 - j)});
  for (int j = q + 1; j < 3 * q; ++j)  // top edge
    mesh.periodic.push_back({outer(j), outer(m - j)});
  for (int j : {q, 3 * q, 7 * q})  // corners onto the bottom-left one
    mesh.periodic.push_back({outer(j), outer(5 * q)});
  return mesh;
}

SectionMesh build_periodic_array_mesh(double half_width, double fiber_radius,
                                      double eps, int n_per_cell) {
  if (!(half_width > 0.0))
    throw std::invalid_argument("array mesh requires a positive half width");
  if (!(eps > 0.0))
    throw std::invalid_argument("array mesh requires a positive eps");
  double kd = 2.0 * half_width / eps;
  int k = (int)std::lround(kd);
  if (k < 1 || std::abs(kd - k) > 1e-9 * std::max(1, k)) {
    std::ostringstream os;
    os << "eps must divide the section width: 2*l/eps = " << kd
       << " is not an integer (l=" << half_width << ", eps=" << eps << ")";
    throw std::invalid_argument(os.str());
  }

  RingMesh ref = build_cell_rings(fiber_radius, n_per_cell);
  const SectionMesh& rmesh = ref.mesh;
  const int m = ref.m, q = ref.m / 8;
  const int nv = (int)rmesh.vertices.size();
  const int outer_base = ref.outer_node(0);

  // Side classification of reference outer-ring nodes by angular index.
  // jj = ((j + q) mod m) walks right, top, left, bottom in blocks of 2q.
  auto side_of = [&](int j) {
    int jj = ((j + q) % m + m) % m;
    return jj / (2 * q);  // 0 right, 1 top, 2 left, 3 bottom
  };
  auto is_outer = [&](int v) { return v >= outer_base; };
  auto outer_index = [&](int v) { return v - outer_base; };

  SectionMesh mesh;
  mesh.interface_radius = eps * fiber_radius;
  std::vector<std::vector<int>> l2g((size_t)k * k);

  for (int i2 = 0; i2 < k; ++i2) {
    for (int i1 = 0; i1 < k; ++i1) {
      int ci = i2 * k + i1;
      Eigen::Vector2d center(-half_width + (i1 + 0.5) * eps,
                             -half_width + (i2 + 0.5) * eps);
      auto& map = l2g[ci];
      map.assign(nv, -1);
      for (int v = 0; v < nv; ++v) {
        if (is_outer(v)) {
          int j = outer_index(v);
          int s = side_of(j);
          bool corner = (j % (2 * q)) == q;
          // Left edge nodes (including both left corners) come from the right
          // edge of the west neighbour; bottom nodes from the south one.
          bool on_left = s == 2 || (corner && (j == 3 * q || j == 5 * q));
          bool on_bottom = s == 3 || (corner && (j == 5 * q || j == 7 * q));
          if (on_left && i1 > 0) {
            int partner = ((3 * m / 2 - j) % m + m) % m;
            map[v] = l2g[ci - 1][outer_base + partner];
            continue;
          }
          if (on_bottom && i2 > 0) {
            int partner = ((m - j) % m + m) % m;
            map[v] = l2g[ci - k][outer_base + partner];
            continue;
          }
        }
        map[v] = (int)mesh.vertices.size();
        mesh.vertices.emplace_back(center + eps * rmesh.vertices[v]);
      }
      for (const auto& t : rmesh.tris)
        mesh.tris.push_back({{map[t.v[0]], map[t.v[1]], map[t.v[2]]}, t.region});
      for (const auto& e : rmesh.boundary) {
        if (e.tag == kBoundaryInterface) {
          mesh.boundary.push_back({{map[e.v[0]], map[e.v[1]]}, e.tag});
          continue;
        }
        // Outer edges run from angular index j to j+1, so the side of the
        // first endpoint is the side of the edge (corners are endpoints only).
        int s = side_of(outer_index(e.v[0]));
        bool rim = (s == 0 && i1 == k - 1) || (s == 1 && i2 == k - 1) ||
                   (s == 2 && i1 == 0) || (s == 3 && i2 == 0);
        if (rim)
          mesh.boundary.push_back({{map[e.v[0]], map[e.v[1]]}, kBoundaryOuter});
      }
      std::vector<int> loop(rmesh.fiber_loops[0].size());
      for (size_t j = 0; j < loop.size(); ++j)
        loop[j] = map[rmesh.fiber_loops[0][j]];
      mesh.fiber_loops.push_back(std::move(loop));
      mesh.fiber_centers.push_back(center);
    }
  }
  return mesh;
}

ExtrudedMesh extrude(SectionMesh section, double length, int n3) {
  if (!(length > 0.0) || n3 < 1)
    throw std::invalid_argument("extrusion requires length > 0 and n3 >= 1");
  ExtrudedMesh em;
  em.section = std::move(section);
  em.planes.resize(n3 + 1);
  for (int l = 0; l <= n3; ++l) em.planes[l] = length * ((double)l / n3);
  return em;
}

MeshQuality mesh_quality(const SectionMesh& m) {
  MeshQuality mq;
  mq.min_angle_deg = 180.0;
  for (const auto& t : m.tris) {
    const auto &a = m.vertices[t.v[0]], &b = m.vertices[t.v[1]],
               &c = m.vertices[t.v[2]];
    Eigen::Vector2d e0 = b - a, e1 = c - b, e2 = a - c;
    double l0 = e0.norm(), l1 = e1.norm(), l2 = e2.norm();
    auto angle = [](double opp, double s1, double s2) {
      double cosv = (s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2);
      return std::acos(std::clamp(cosv, -1.0, 1.0)) * 180.0 / kPi;
    };
    double a0 = angle(l1, l2, l0), a1 = angle(l2, l0, l1), a2 = angle(l0, l1, l2);
    mq.min_angle_deg = std::min({mq.min_angle_deg, a0, a1, a2});
    mq.max_angle_deg = std::max({mq.max_angle_deg, a0, a1, a2});
  }

  double r = m.interface_radius;
  for (size_t f = 0; f < m.fiber_loops.size(); ++f) {
    for (int v : m.fiber_loops[f]) {
      double rho = (m.vertices[v] - m.fiber_centers[f]).norm();
      mq.interface_defect = std::max(mq.interface_defect, std::abs(rho - r));
    }
  }

  if (!m.fiber_loops.empty() && r > 0) {
    const auto& loop = m.fiber_loops[0];
    const auto& c0 = m.fiber_centers[0];
    Kahan area;
    for (size_t j = 0; j < loop.size(); ++j) {
      const auto& a = m.vertices[loop[j]];
      const auto& b = m.vertices[loop[(j + 1) % loop.size()]];
      area.add(0.5 * tri_area2(c0, a, b));
    }
    mq.fiber_area_defect = std::abs(area.sum - kPi * r * r) / (kPi * r * r);
  }

  if (!m.periodic.empty()) {
    double spanx = 0, spany = 0;
    for (const auto& v : m.vertices) {
      spanx = std::max(spanx, std::abs(v.x()));
      spany = std::max(spany, std::abs(v.y()));
    }
    spanx *= 2;
    spany *= 2;
    for (const auto& p : m.periodic) {
      Eigen::Vector2d d = m.vertices[p[0]] - m.vertices[p[1]];
      auto fold = [](double delta, double span) {
        double a = std::abs(delta);
        return std::min(a, std::abs(span - a));
      };
      mq.periodic_mismatch = std::max(
          mq.periodic_mismatch, std::max(fold(d.x(), spanx), fold(d.y(), spany)));
    }
  }
  return mq;
}

TriGeometry tri_geometry(const SectionMesh& m, const Tri& t) {
  const auto &a = m.vertices[t.v[0]], &b = m.vertices[t.v[1]],
             &c = m.vertices[t.v[2]];
  double det = tri_area2(a, b, c);
  TriGeometry g;
  g.area = 0.5 * det;
  // grad lambda_0 = (y1 - y2, x2 - x1) / det, cyclic.
  g.grad.col(0) = Eigen::Vector2d(b.y() - c.y(), c.x() - b.x()) / det;
  g.grad.col(1) = Eigen::Vector2d(c.y() - a.y(), a.x() - c.x()) / det;
  g.grad.col(2) = Eigen::Vector2d(a.y() - b.y(), b.x() - a.x()) / det;
  return g;
}

// ---------------------------------------------------------------------------
// ASCII I/O

namespace {

std::string fmt17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* region_name(Region r) {
  return r == Region::Fiber ? "fiber" : "matrix";
}

const char* edge_tag_name(int tag) {
  return tag == kBoundaryInterface ? "interface" : "outer";
}

}  // namespace

GenericMesh to_generic(const SectionMesh& m) {
  GenericMesh g;
  g.dim = 2;
  g.vertices.reserve(m.vertices.size());
  for (const auto& v : m.vertices) g.vertices.emplace_back(v.x(), v.y(), 0.0);
  for (const auto& t : m.tris)
    g.cells.push_back({"tri", {t.v[0], t.v[1], t.v[2]}, region_name(t.region)});
  for (const auto& e : m.boundary)
    g.boundary.push_back({"edge", {e.v[0], e.v[1]}, edge_tag_name(e.tag)});
  g.periodic = m.periodic;
  return g;
}

GenericMesh to_generic(const ExtrudedMesh& m) {
  GenericMesh g;
  g.dim = 3;
  const int nv = m.nodes_per_plane();
  g.vertices.reserve((size_t)m.num_nodes());
  for (int l = 0; l < m.num_planes(); ++l)
    for (int i = 0; i < nv; ++i)
      g.vertices.emplace_back(m.section.vertices[i].x(),
                              m.section.vertices[i].y(), m.planes[l]);
  for (int l = 0; l + 1 < m.num_planes(); ++l)
    for (const auto& t : m.section.tris)
      g.cells.push_back({"prism",
                         {m.node(t.v[0], l), m.node(t.v[1], l),
                          m.node(t.v[2], l), m.node(t.v[0], l + 1),
                          m.node(t.v[1], l + 1), m.node(t.v[2], l + 1)},
                         region_name(t.region)});
  int top = m.num_planes() - 1;
  for (const auto& t : m.section.tris) {
    g.boundary.push_back(
        {"tri", {m.node(t.v[0], 0), m.node(t.v[2], 0), m.node(t.v[1], 0)},
         "end_bottom"});
    g.boundary.push_back(
        {"tri", {m.node(t.v[0], top), m.node(t.v[1], top), m.node(t.v[2], top)},
         "end_top"});
  }
  for (const auto& e : m.section.boundary) {
    if (e.tag != kBoundaryOuter) continue;  // the interface is interior in 3d
    for (int l = 0; l + 1 < m.num_planes(); ++l)
      g.boundary.push_back({"quad",
                            {m.node(e.v[0], l), m.node(e.v[1], l),
                             m.node(e.v[1], l + 1), m.node(e.v[0], l + 1)},
                            "outer"});
  }
  return g;
}

void write_mesh(std::ostream& os, const GenericMesh& m) {
  os << "fibrod-mesh v1 dim=" << m.dim << "\n";
  os << "vertices " << m.vertices.size() << "\n";
  for (const auto& v : m.vertices) {
    os << fmt17(v.x()) << ' ' << fmt17(v.y());
    if (m.dim == 3) os << ' ' << fmt17(v.z());
    os << "\n";
  }
  os << "cells " << m.cells.size() << "\n";
  for (const auto& c : m.cells) {
    os << c.type;
    for (int v : c.v) os << ' ' << v;
    os << ' ' << c.region << "\n";
  }
  os << "boundary " << m.boundary.size() << "\n";
  for (const auto& f : m.boundary) {
    os << f.type;
    for (int v : f.v) os << ' ' << v;
    os << ' ' << f.tag << "\n";
  }
  if (!m.periodic.empty()) {
    os << "periodic " << m.periodic.size() << "\n";
    for (const auto& p : m.periodic) os << p[0] << ' ' << p[1] << "\n";
  }
}

namespace {

struct LineReader {
  std::istream& is;
  int line = 0;
  bool next(std::string& out) {
    while (std::getline(is, out)) {
      ++line;
      if (!out.empty() && out.back() == '\r') out.pop_back();
      if (!out.empty()) return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "mesh file line " << line << ": " << what;
    throw MeshIoError(os.str(), line);
  }
};

long expect_count(LineReader& lr, const std::string& line,
                  const std::string& keyword) {
  std::istringstream ss(line);
  std::string word;
  long n = -1;
  if (!(ss >> word >> n) || word != keyword || n < 0)
    lr.fail("expected '" + keyword + " <count>', got '" + line + "'");
  std::string rest;
  if (ss >> rest) lr.fail("trailing tokens after '" + keyword + "' header");
  return n;
}

int parse_id(LineReader& lr, const std::string& tok, size_t nv) {
  size_t pos = 0;
  long v = -1;
  try {
    v = std::stol(tok, &pos);
  } catch (const std::exception&) {
    lr.fail("bad vertex id '" + tok + "'");
  }
  if (pos != tok.size() || v < 0 || (size_t)v >= nv)
    lr.fail("vertex id '" + tok + "' out of range");
  return (int)v;
}

}  // namespace

GenericMesh read_mesh(std::istream& is) {
  LineReader lr{is};
  std::string line;
  if (!lr.next(line)) lr.fail("empty mesh file");
  GenericMesh m;
  {
    std::istringstream ss(line);
    std::string magic, version, dim;
    ss >> magic >> version >> dim;
    if (magic != "fibrod-mesh" || version != "v1" ||
        (dim != "dim=2" && dim != "dim=3"))
      lr.fail("expected header 'fibrod-mesh v1 dim=<2|3>', got '" + line + "'");
    m.dim = dim == "dim=2" ? 2 : 3;
  }

  if (!lr.next(line)) lr.fail("missing 'vertices' section");
  long nv = expect_count(lr, line, "vertices");
  m.vertices.reserve(nv);
  for (long i = 0; i < nv; ++i) {
    if (!lr.next(line)) lr.fail("unexpected end of file in vertex list");
    std::istringstream ss(line);
    double x = 0, y = 0, z = 0;
    if (!(ss >> x >> y) || (m.dim == 3 && !(ss >> z)))
      lr.fail("bad vertex line '" + line + "'");
    std::string rest;
    if (ss >> rest) lr.fail("trailing tokens on vertex line");
    m.vertices.emplace_back(x, y, z);
  }

  if (!lr.next(line)) lr.fail("missing 'cells' section");
  long nc = expect_count(lr, line, "cells");
  for (long i = 0; i < nc; ++i) {
    if (!lr.next(line)) lr.fail("unexpected end of file in cell list");
    std::istringstream ss(line);
    std::vector<std::string> tok;
    std::string t;
    while (ss >> t) tok.push_back(t);
    size_t nn = tok.empty() ? 0 : (tok[0] == "tri" ? 3 : tok[0] == "prism" ? 6 : 0);
    if (nn == 0 || tok.size() != nn + 2)
      lr.fail("bad cell line '" + line + "'");
    if (tok.back() != "fiber" && tok.back() != "matrix")
      lr.fail("unknown region tag '" + tok.back() + "'");
    GenericMesh::Cell c;
    c.type = tok[0];
    for (size_t j = 1; j <= nn; ++j)
      c.v.push_back(parse_id(lr, tok[j], m.vertices.size()));
    c.region = tok.back();
    m.cells.push_back(std::move(c));
  }

  if (!lr.next(line)) lr.fail("missing 'boundary' section");
  long nb = expect_count(lr, line, "boundary");
  for (long i = 0; i < nb; ++i) {
    if (!lr.next(line)) lr.fail("unexpected end of file in boundary list");
    std::istringstream ss(line);
    std::vector<std::string> tok;
    std::string t;
    while (ss >> t) tok.push_back(t);
    size_t nn =
        tok.empty() ? 0 : (tok[0] == "edge" ? 2 : tok[0] == "tri" ? 3 : tok[0] == "quad" ? 4 : 0);
    if (nn == 0 || tok.size() != nn + 2)
      lr.fail("bad boundary line '" + line + "'");
    GenericMesh::Facet f;
    f.type = tok[0];
    for (size_t j = 1; j <= nn; ++j)
      f.v.push_back(parse_id(lr, tok[j], m.vertices.size()));
    f.tag = tok.back();
    m.boundary.push_back(std::move(f));
  }

  if (lr.next(line)) {
    long np = expect_count(lr, line, "periodic");
    for (long i = 0; i < np; ++i) {
      if (!lr.next(line)) lr.fail("unexpected end of file in periodic list");
      std::istringstream ss(line);
      std::string a, b, rest;
      if (!(ss >> a >> b) || (ss >> rest))
        lr.fail("bad periodic line '" + line + "'");
      m.periodic.push_back(
          {parse_id(lr, a, m.vertices.size()), parse_id(lr, b, m.vertices.size())});
    }
    if (lr.next(line)) lr.fail("unexpected content after periodic list");
  }
  return m;
}

}  // namespace fibrod
