#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fibrod/mesh.hpp"

using namespace fibrod;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Inscribed regular m-gon of radius r.
double polygon_area(int m, double r) {
  return 0.5 * m * r * r * std::sin(2.0 * kPi / m);
}

// Undirected edge -> number of incident triangles.
std::map<std::pair<int, int>, int> edge_counts(const SectionMesh& m) {
  std::map<std::pair<int, int>, int> count;
  for (const auto& t : m.tris)
    for (int e = 0; e < 3; ++e) {
      int a = t.v[e], b = t.v[(e + 1) % 3];
      count[{std::min(a, b), std::max(a, b)}]++;
    }
  return count;
}

void check_conforming(const SectionMesh& m) {
  auto count = edge_counts(m);
  std::set<std::pair<int, int>> rim, interface;
  for (const auto& e : m.boundary) {
    auto key = std::make_pair(std::min(e.v[0], e.v[1]), std::max(e.v[0], e.v[1]));
    (e.tag == kBoundaryOuter ? rim : interface).insert(key);
  }
  std::set<std::pair<int, int>> once;
  for (const auto& [key, c] : count) {
    CHECK(c <= 2);
    if (c == 1) once.insert(key);
  }
  CHECK(once == rim);
  for (const auto& key : interface) CHECK(count.at(key) == 2);
}

double loop_shoelace(const SectionMesh& m, const std::vector<int>& loop,
                     const Eigen::Vector2d& center) {
  double area2 = 0.0;
  for (size_t j = 0; j < loop.size(); ++j) {
    Eigen::Vector2d a = m.vertices[loop[j]] - center;
    Eigen::Vector2d b = m.vertices[loop[(j + 1) % loop.size()]] - center;
    area2 += a.x() * b.y() - a.y() * b.x();
  }
  return 0.5 * area2;
}

std::string render(const GenericMesh& g) {
  std::ostringstream os;
  write_mesh(os, g);
  return os.str();
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("disk section has the expected ring layout") {
  SectionGeometry g;  // disk R = 1, fiber r = 0.5
  SectionMesh m = build_section_mesh(g, 0.1);

  // m = 32 angular points, K = 5 fiber rings, J = 5 matrix rings.
  CHECK(m.vertices.size() == 321);
  CHECK(m.tris.size() == 608);
  CHECK(m.boundary.size() == 64);
  CHECK(m.fiber_loops.size() == 1);
  CHECK(m.fiber_loops[0].size() == 32);
  CHECK(m.periodic.empty());

  for (const auto& t : m.tris) {
    TriGeometry tg = tri_geometry(m, t);
    CHECK(tg.area > 0.0);
    Eigen::Vector2d c = (m.vertices[t.v[0]] + m.vertices[t.v[1]] +
                         m.vertices[t.v[2]]) /
                        3.0;
    CHECK((t.region == Region::Fiber) == (c.norm() < 0.5));
  }
  check_conforming(m);

  CHECK(m.fiber_area() ==
        doctest::Approx(polygon_area(32, 0.5)).epsilon(1e-13));
  CHECK(m.total_area() == doctest::Approx(polygon_area(32, 1.0)).epsilon(1e-13));

  // The central fan bounds the min angle near 360/m = 11.25 degrees; what
  // the error constants need is the max angle staying away from 180.
  MeshQuality q = mesh_quality(m);
  CHECK(q.min_angle_deg > 10.0);
  CHECK(q.max_angle_deg < 100.0);
  CHECK(q.interface_defect <= 1e-14);
  CHECK(q.fiber_area_defect < 0.01);
}

TEST_CASE("square section puts the outer ring exactly on the square") {
  SectionGeometry g;
  g.outer = SectionGeometry::Outer::Square;
  g.outer_size = 1.0;
  g.fiber_radius = 0.5;
  SectionMesh m = build_section_mesh(g, 0.1);

  int corners = 0;
  for (const auto& e : m.boundary) {
    if (e.tag != kBoundaryOuter) continue;
    for (int v : e.v) {
      Eigen::Vector2d p = m.vertices[v];
      CHECK(std::max(std::abs(p.x()), std::abs(p.y())) == 1.0);
    }
  }
  for (const auto& p : m.vertices)
    if (std::abs(p.x()) == 1.0 && std::abs(p.y()) == 1.0) ++corners;
  CHECK(corners == 4);

  check_conforming(m);
  CHECK(m.total_area() == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(m.matrix_area() ==
        doctest::Approx(4.0 - polygon_area(32, 0.5)).epsilon(1e-13));
  MeshQuality q = mesh_quality(m);
  CHECK(q.min_angle_deg > 8.0);
  CHECK(q.max_angle_deg < 140.0);
}

TEST_CASE("unit cell mesh folds its boundary periodically") {
  SectionMesh m = build_cell_mesh(0.3, 8);

  // m = 16, K = 2, J = 4.
  CHECK(m.vertices.size() == 97);
  CHECK(m.periodic.size() == 9);
  check_conforming(m);

  int corners = 0;
  for (const auto& p : m.vertices) {
    CHECK(std::abs(p.x()) <= 0.5);
    CHECK(std::abs(p.y()) <= 0.5);
    if (std::abs(p.x()) == 0.5 && std::abs(p.y()) == 0.5) ++corners;
  }
  CHECK(corners == 4);

  // Mirrored construction makes the folded pair coordinates equal bitwise.
  for (const auto& pr : m.periodic) {
    Eigen::Vector2d d = m.vertices[pr[0]] - m.vertices[pr[1]];
    double gx = std::abs(d.x()), gy = std::abs(d.y());
    CHECK((gx == 0.0 || gx == 1.0));
    CHECK((gy == 0.0 || gy == 1.0));
    CHECK(pr[0] != pr[1]);
  }
  MeshQuality q = mesh_quality(m);
  CHECK(q.periodic_mismatch == 0.0);
  CHECK(q.interface_defect <= 1e-12);
  CHECK(m.fiber_area() == doctest::Approx(polygon_area(16, 0.3)).epsilon(1e-9));
  CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(build_cell_mesh(0.3, 7), std::invalid_argument);
  CHECK_THROWS_AS(build_cell_mesh(0.5, 8), std::invalid_argument);
  CHECK_THROWS_AS(build_cell_mesh(0.0, 8), std::invalid_argument);
}

TEST_CASE("periodic array replicates the reference cell bitwise") {
  const double l = 0.5, r = 0.3, eps = 0.25;
  SectionMesh m = build_periodic_array_mesh(l, r, eps, 8);
  SectionMesh ref = build_cell_mesh(r, 8);

  CHECK(m.fiber_loops.size() == 16);
  CHECK(m.fiber_centers.size() == 16);
  CHECK(m.periodic.empty());
  check_conforming(m);

  int rim = 0;
  for (const auto& e : m.boundary)
    if (e.tag == kBoundaryOuter) ++rim;
  CHECK(rim == 64);

  // Every fiber polygon is the same bit pattern translated by its center.
  const auto& loop0 = m.fiber_loops[0];
  for (size_t c = 1; c < m.fiber_loops.size(); ++c) {
    const auto& loop = m.fiber_loops[c];
    REQUIRE(loop.size() == loop0.size());
    for (size_t j = 0; j < loop.size(); ++j) {
      Eigen::Vector2d d0 = m.vertices[loop0[j]] - m.fiber_centers[0];
      Eigen::Vector2d dc = m.vertices[loop[j]] - m.fiber_centers[c];
      CHECK(d0.x() == dc.x());
      CHECK(d0.y() == dc.y());
    }
    CHECK(loop_shoelace(m, loop, m.fiber_centers[c]) ==
          loop_shoelace(m, loop0, m.fiber_centers[0]));
  }

  CHECK(m.fiber_area() ==
        doctest::Approx(16.0 * eps * eps * ref.fiber_area()).epsilon(1e-14));
  CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.interface_radius == eps * r);

  CHECK_THROWS_AS(build_periodic_array_mesh(l, r, 0.3, 8),
                  std::invalid_argument);
}

TEST_CASE("periodic array with an odd cell count still conforms") {
  SectionMesh m = build_periodic_array_mesh(0.5, 0.3, 0.2, 8);
  CHECK(m.fiber_loops.size() == 25);
  check_conforming(m);
  int rim = 0;
  for (const auto& e : m.boundary)
    if (e.tag == kBoundaryOuter) ++rim;
  CHECK(rim == 80);

  double a0 = loop_shoelace(m, m.fiber_loops[0], m.fiber_centers[0]);
  for (size_t c = 1; c < m.fiber_loops.size(); ++c)
    CHECK(loop_shoelace(m, m.fiber_loops[c], m.fiber_centers[c]) ==
          doctest::Approx(a0).epsilon(1e-13));
  CHECK(m.total_area() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("extrusion produces uniform planes and the right volume") {
  SectionGeometry g;
  SectionMesh section = build_section_mesh(g, 0.2);
  ExtrudedMesh em = extrude(section, 1.0, 4);

  CHECK(em.planes.size() == 5);
  CHECK(em.planes.front() == 0.0);
  CHECK(em.planes.back() == 1.0);
  CHECK(em.length() == 1.0);
  CHECK(em.num_prisms() == (int)em.section.tris.size() * 4);
  CHECK(em.node(3, 2) == 2 * em.nodes_per_plane() + 3);

  GenericMesh gm = to_generic(em);
  CHECK(gm.dim == 3);
  CHECK((int)gm.vertices.size() == em.num_nodes());
  double volume = 0.0;
  for (const auto& c : gm.cells) {
    REQUIRE(c.type == "prism");
    const auto &a = gm.vertices[c.v[0]], &b = gm.vertices[c.v[1]],
               &d = gm.vertices[c.v[2]];
    double area = 0.5 * std::abs((b.x() - a.x()) * (d.y() - a.y()) -
                                 (b.y() - a.y()) * (d.x() - a.x()));
    volume += area * (gm.vertices[c.v[3]].z() - a.z());
  }
  CHECK(volume ==
        doctest::Approx(em.section.total_area() * 1.0).epsilon(1e-13));

  CHECK_THROWS_AS(extrude(em.section, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(extrude(em.section, -1.0, 4), std::invalid_argument);
}

TEST_CASE("mesh files round trip byte for byte") {
  GenericMesh g2 = to_generic(build_cell_mesh(0.3, 8));
  std::string first = render(g2);
  std::istringstream in(first);
  GenericMesh back = read_mesh(in);
  CHECK(render(back) == first);
  CHECK(back.dim == 2);
  CHECK(back.periodic.size() == 9);

  SectionGeometry sg;
  GenericMesh g3 = to_generic(extrude(build_section_mesh(sg, 0.25), 1.0, 2));
  std::string first3 = render(g3);
  std::istringstream in3(first3);
  CHECK(render(read_mesh(in3)) == first3);
}

TEST_CASE("mesh reader reports the offending line") {
  std::string text = render(to_generic(build_cell_mesh(0.3, 8)));
  auto lines = split_lines(text);

  size_t cell_line = 0;
  for (size_t i = 0; i < lines.size(); ++i)
    if (lines[i].rfind("tri ", 0) == 0) {
      cell_line = i;
      break;
    }
  REQUIRE(cell_line > 0);

  SUBCASE("unknown region tag") {
    auto bad = lines;
    auto pos = bad[cell_line].rfind(' ');
    bad[cell_line] = bad[cell_line].substr(0, pos) + " plastic";
    std::istringstream is(join_lines(bad));
    try {
      read_mesh(is);
      FAIL("expected MeshIoError");
    } catch (const MeshIoError& e) {
      CHECK(e.line == (int)cell_line + 1);
      CHECK(std::string(e.what()).find("plastic") != std::string::npos);
    }
  }

  SUBCASE("vertex id out of range") {
    auto bad = lines;
    bad[cell_line] = "tri 0 1 99999 fiber";
    std::istringstream is(join_lines(bad));
    try {
      read_mesh(is);
      FAIL("expected MeshIoError");
    } catch (const MeshIoError& e) {
      CHECK(e.line == (int)cell_line + 1);
      CHECK(std::string(e.what()).find("out of range") != std::string::npos);
    }
  }

  SUBCASE("truncated file") {
    auto bad = lines;
    bad.resize(bad.size() / 2);
    std::istringstream is(join_lines(bad));
    CHECK_THROWS_AS(read_mesh(is), MeshIoError);
  }

  SUBCASE("bad header") {
    std::istringstream is(std::string("fibrod-mesh v2 dim=2\nvertices 0\n"));
    CHECK_THROWS_AS(read_mesh(is), MeshIoError);
  }

  SUBCASE("trailing garbage") {
    std::istringstream is(text + "surprise\n");
    CHECK_THROWS_AS(read_mesh(is), MeshIoError);
  }
}
