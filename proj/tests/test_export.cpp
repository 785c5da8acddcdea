#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstring>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "combot/stl_export.hpp"
#include "combot/svg.hpp"

using namespace combot;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double signed_volume(const std::vector<Triangle>& tris) {
  double v = 0.0;
  for (const Triangle& t : tris)
    v += dot(t.vertices[0], cross(t.vertices[1], t.vertices[2])) / 6.0;
  return v;
}

double surface_area(const std::vector<Triangle>& tris) {
  double a = 0.0;
  for (const Triangle& t : tris)
    a += cross(t.vertices[1] - t.vertices[0], t.vertices[2] - t.vertices[0]).norm() / 2.0;
  return a;
}

// A closed orientable surface uses every undirected edge exactly twice, once
// in each direction. Exact comparison is fine: shared corners are computed
// from identical expressions.
bool watertight(const std::vector<Triangle>& tris) {
  using Key = std::array<double, 6>;
  std::map<Key, int> directed;
  for (const Triangle& t : tris)
    for (int i = 0; i < 3; ++i) {
      const Vec3& p = t.vertices[i];
      const Vec3& q = t.vertices[(i + 1) % 3];
      ++directed[{p.x, p.y, p.z, q.x, q.y, q.z}];
    }
  for (const auto& [key, count] : directed) {
    if (count != 1) return false;
    const Key reversed = {key[3], key[4], key[5], key[0], key[1], key[2]};
    const auto it = directed.find(reversed);
    if (it == directed.end() || it->second != 1) return false;
  }
  return true;
}

// Checks tag nesting and quoting of an XML fragment; good enough to catch
// broken string assembly in the SVG writer.
bool well_formed_xml(const std::string& s) {
  std::vector<std::string> stack;
  size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '<') {
      if (s[i] == '>') return false;
      ++i;
      continue;
    }
    const size_t close = s.find('>', i);
    if (close == std::string::npos) return false;
    std::string tag = s.substr(i + 1, close - i - 1);
    // Quotes must pair up inside the tag.
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;

    if (!tag.empty() && tag.front() == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
    } else if (!tag.empty() && tag.back() != '/') {
      stack.push_back(tag.substr(0, tag.find_first_of(" \t\n")));
    }
    i = close + 1;
  }
  return stack.empty();
}

size_t count_substr(const std::string& s, const std::string& needle) {
  size_t n = 0;
  for (size_t pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("beam prism is a closed outward-facing box", "[export]") {
  const CrossSection sec;  // 1 x 1 mm
  const Vec3 a{0, 0, 0}, b{10, 0, 0};
  const auto tris = beam_prism(a, b, sec);

  REQUIRE(tris.size() == 12);
  CHECK(watertight(tris));
  CHECK_THAT(signed_volume(tris), WithinRel(10.0, 1e-12));
  CHECK_THAT(surface_area(tris), WithinRel(42.0, 1e-12));

  const Vec3 center = (a + b) / 2.0;
  for (const Triangle& t : tris) {
    CHECK_THAT(t.normal.norm(), WithinRel(1.0, 1e-12));
    // Stored normal agrees with the winding...
    const Vec3 wound = cross(t.vertices[1] - t.vertices[0], t.vertices[2] - t.vertices[0]);
    CHECK(dot(wound, t.normal) > 0.0);
    // ...and points away from the solid.
    const Vec3 centroid = (t.vertices[0] + t.vertices[1] + t.vertices[2]) / 3.0;
    CHECK(dot(centroid - center, t.normal) > 0.0);
  }

  // Every vertex is one of the eight box corners.
  for (const Triangle& t : tris)
    for (const Vec3& v : t.vertices) {
      CHECK((v.x == 0.0 || v.x == 10.0));
      CHECK((std::abs(v.y) == 0.5));
      CHECK((std::abs(v.z) == 0.5));
    }
}

TEST_CASE("beam prism volume and area hold in general orientation", "[export]") {
  CrossSection sec;
  sec.width = 2.0;
  sec.height = 0.5;
  const Vec3 a{1, 2, 3}, b{4, 6, 15};  // length 13
  const auto tris = beam_prism(a, b, sec);

  REQUIRE(tris.size() == 12);
  CHECK(watertight(tris));
  CHECK_THAT(signed_volume(tris), WithinRel(13.0 * 2.0 * 0.5, 1e-12));
  CHECK_THAT(surface_area(tris), WithinRel(2 * 2.0 * 0.5 + 2 * 13.0 * (2.0 + 0.5), 1e-12));

  SECTION("vertical members use the fallback triad and still close up") {
    const auto vertical = beam_prism({0, 0, 0}, {0, 0, 7}, sec);
    CHECK(watertight(vertical));
    CHECK_THAT(signed_volume(vertical), WithinRel(7.0, 1e-12));
  }
}

TEST_CASE("structure mesh is twelve triangles per element", "[export]") {
  const std::vector<Vec3> positions = {{0, 0, 0}, {10, 0, 0}, {10, 10, 0}, {0, 10, 0}};
  const std::vector<Element> active = {{1, 1, 2}, {2, 2, 3}, {3, 3, 4}};
  const CrossSection sec;
  const auto tris = structure_mesh(active, positions, sec);

  REQUIRE(tris.size() == 36);
  // Concatenated in element order.
  const auto first = beam_prism(positions[0], positions[1], sec);
  for (size_t i = 0; i < 12; ++i) {
    CHECK(tris[i].vertices == first[i].vertices);
    CHECK(tris[i].normal == first[i].normal);
  }
}

TEST_CASE("binary STL layout is exact", "[export]") {
  const auto tris = beam_prism({0, 0, 0}, {10, 0, 0}, CrossSection{});
  std::ostringstream out(std::ios::binary);
  write_binary_stl(out, tris);
  const std::string bytes = out.str();

  REQUIRE(bytes.size() == 84 + 50 * tris.size());
  CHECK(bytes.compare(0, 21, "combot beam structure") == 0);

  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 80, 4);
  CHECK(count == tris.size());

  for (size_t i = 0; i < tris.size(); ++i) {
    const char* rec = bytes.data() + 84 + 50 * i;
    float v[12];
    std::memcpy(v, rec, 48);
    CHECK(v[0] == static_cast<float>(tris[i].normal.x));
    CHECK(v[1] == static_cast<float>(tris[i].normal.y));
    CHECK(v[2] == static_cast<float>(tris[i].normal.z));
    for (int k = 0; k < 3; ++k) {
      CHECK(v[3 + 3 * k + 0] == static_cast<float>(tris[i].vertices[k].x));
      CHECK(v[3 + 3 * k + 1] == static_cast<float>(tris[i].vertices[k].y));
      CHECK(v[3 + 3 * k + 2] == static_cast<float>(tris[i].vertices[k].z));
    }
    std::uint16_t attribute = 1;
    std::memcpy(&attribute, rec + 48, 2);
    CHECK(attribute == 0);
  }
}

TEST_CASE("linear scale maps endpoints and survives degenerate domains", "[export]") {
  const LinearScale s(0.0, 10.0, 100.0, 500.0);
  CHECK_THAT(s(0.0), WithinAbs(100.0, 1e-12));
  CHECK_THAT(s(10.0), WithinAbs(500.0, 1e-12));
  CHECK_THAT(s(5.0), WithinAbs(300.0, 1e-12));

  const LinearScale down(0.0, 1.0, 400.0, 40.0);  // pixel y runs downwards
  CHECK_THAT(down(0.0), WithinAbs(400.0, 1e-12));
  CHECK_THAT(down(1.0), WithinAbs(40.0, 1e-12));

  const LinearScale flat(3.0, 3.0, 0.0, 100.0);
  CHECK(std::isfinite(flat(3.0)));
  CHECK_THAT(flat(3.0), WithinAbs(50.0, 1e-12));
}

TEST_CASE("svg writer escapes text and nests tags", "[export]") {
  SvgWriter svg(200, 100);
  svg.line(0, 0, 10, 10);
  svg.circle(5, 5, 2, "#123456");
  svg.text(10, 20, "a < b & c > \"d\"");
  svg.text(10, 40, "rotated", "middle", 10, -90);
  const std::string s = svg.str();

  CHECK(well_formed_xml(s));
  CHECK(s.find("a &lt; b &amp; c &gt; &quot;d&quot;") != std::string::npos);
  CHECK(s.find("a < b") == std::string::npos);
  CHECK(s.find("rotate(-90") != std::string::npos);
}

TEST_CASE("convergence plot skips floor generations", "[export]") {
  std::vector<GenerationStats> history;
  for (int g = 0; g <= 10; ++g) {
    GenerationStats s;
    s.generation = g;
    if (g < 3) {  // nothing valid yet: fitness is pinned at the floor
      s.best_fitness = s.mean_fitness = -1e9;
      s.valid_fraction = 0.0;
    } else {
      s.best_fitness = 1.0 + 0.1 * g;
      s.mean_fitness = 0.5 + 0.1 * g;
      s.valid_fraction = 0.8;
    }
    history.push_back(s);
  }

  const std::string s = plot_convergence(history);
  CHECK(well_formed_xml(s));
  CHECK(count_substr(s, "<polyline") == 2);
  // The floor values must not leak into any coordinate.
  CHECK(s.find("e+09") == std::string::npos);

  CHECK(well_formed_xml(plot_convergence({})));
}

TEST_CASE("transmission plot shows the force panel only with spring data", "[export]") {
  const std::string with = plot_transmission(2.5, 5.0, 0.4, 1.2);
  CHECK(well_formed_xml(with));
  CHECK(with.find("GA = 2.5") != std::string::npos);
  CHECK(with.find("MA = 0.4") != std::string::npos);

  const std::string without = plot_transmission(2.5, 5.0, std::nullopt, 0.0);
  CHECK(well_formed_xml(without));
  CHECK(without.find("GA = 2.5") != std::string::npos);
  CHECK(without.find("MA") == std::string::npos);
}

TEST_CASE("scatter plot draws one dot per design", "[export]") {
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 17; ++i) pts.emplace_back(1.0 + 0.1 * i, 0.3 + 0.02 * i);
  const std::string s = plot_ga_ma_scatter(pts);
  CHECK(well_formed_xml(s));
  CHECK(count_substr(s, "<circle") == 17);
}
