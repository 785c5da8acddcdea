#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <span>
#include <vector>

#include "combot/fem.hpp"
#include "combot/geometry.hpp"
#include "combot/vec3.hpp"

namespace combot {

struct Triangle {
  Vec3 normal;
  std::array<Vec3, 3> vertices;
};

namespace detail {

// Two triangles for the quad v0..v3 (cyclic), wound so they face `outward`.
inline void emit_quad(std::vector<Triangle>& out, const Vec3& v0, const Vec3& v1, const Vec3& v2,
                      const Vec3& v3, const Vec3& outward) {
  const bool flip = dot(cross(v1 - v0, v2 - v0), outward) < 0.0;
  const Vec3 n = normalized(outward);
  if (flip) {
    out.push_back({n, {v0, v2, v1}});
    out.push_back({n, {v0, v3, v2}});
  } else {
    out.push_back({n, {v0, v1, v2}});
    out.push_back({n, {v0, v2, v3}});
  }
}

}  // namespace detail

// Solid rectangular prism along one beam centerline, oriented with the same
// section triad the solver uses, as 12 outward-facing triangles.
inline std::vector<Triangle> beam_prism(const Vec3& a, const Vec3& b, const CrossSection& sec) {
  const Eigen::Matrix3d r = beam_triad(a, b);
  const Vec3 ex{r(0, 0), r(0, 1), r(0, 2)};
  const Vec3 ey{r(1, 0), r(1, 1), r(1, 2)};
  const Vec3 ez{r(2, 0), r(2, 1), r(2, 2)};
  const Vec3 hy = ey * (sec.width / 2.0);
  const Vec3 hz = ez * (sec.height / 2.0);

  // Corner grid: a/b end, -/+ width, -/+ height.
  const Vec3 a00 = a - hy - hz, a01 = a - hy + hz, a10 = a + hy - hz, a11 = a + hy + hz;
  const Vec3 b00 = b - hy - hz, b01 = b - hy + hz, b10 = b + hy - hz, b11 = b + hy + hz;

  std::vector<Triangle> tris;
  tris.reserve(12);
  detail::emit_quad(tris, a00, a01, a11, a10, ex * -1.0);  // end cap at a
  detail::emit_quad(tris, b00, b10, b11, b01, ex);          // end cap at b
  detail::emit_quad(tris, a10, a11, b11, b10, ey);          // +width side
  detail::emit_quad(tris, a00, b00, b01, a01, ey * -1.0);
  detail::emit_quad(tris, a01, b01, b11, a11, ez);          // +height side
  detail::emit_quad(tris, a00, a10, b10, b00, ez * -1.0);
  return tris;
}

inline std::vector<Triangle> structure_mesh(std::span<const Element> active,
                                            std::span<const Vec3> positions,
                                            const CrossSection& sec) {
  std::vector<Triangle> tris;
  tris.reserve(active.size() * 12);
  for (const Element& el : active) {
    const auto prism = beam_prism(positions[el.node_a - 1], positions[el.node_b - 1], sec);
    tris.insert(tris.end(), prism.begin(), prism.end());
  }
  return tris;
}

// Binary STL: 80-byte header, uint32 triangle count, then per triangle the
// float32 normal, three float32 vertices and a zero attribute word. The
// format is little-endian by definition, which is what this target is.
inline void write_binary_stl(std::ostream& out, std::span<const Triangle> tris) {
  static_assert(std::endian::native == std::endian::little,
                "binary STL writer assumes a little-endian target");

  char header[80] = {};
  std::strncpy(header, "combot beam structure", sizeof(header) - 1);
  out.write(header, sizeof(header));
  const std::uint32_t count = static_cast<std::uint32_t>(tris.size());
  out.write(reinterpret_cast<const char*>(&count), 4);

  const auto put_vec = [&](const Vec3& v) {
    const float f[3] = {static_cast<float>(v.x), static_cast<float>(v.y),
                        static_cast<float>(v.z)};
    out.write(reinterpret_cast<const char*>(f), 12);
  };
  for (const Triangle& t : tris) {
    put_vec(t.normal);
    for (const Vec3& v : t.vertices) put_vec(v);
    const std::uint16_t attribute = 0;
    out.write(reinterpret_cast<const char*>(&attribute), 2);
  }
}

}  // namespace combot
