#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace dipnoise {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  friend constexpr Vec3 operator-(const Vec3& a, const Vec3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend constexpr Vec3 operator+(const Vec3& a, const Vec3& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend constexpr Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// A point on the electrode plane y = 0.
struct SurfacePoint {
  double x = 0.0;
  double z = 0.0;
  friend constexpr bool operator==(const SurfacePoint&, const SurfacePoint&) = default;
};

inline double distance(const SurfacePoint& a, const SurfacePoint& b) {
  return std::hypot(a.x - b.x, a.z - b.z);
}

enum class Axis { x = 0, y = 1, z = 2 };

inline constexpr std::array<Axis, 3> kAllAxes{Axis::x, Axis::y, Axis::z};

inline constexpr int index(Axis a) { return static_cast<int>(a); }

inline std::string_view to_string(Axis a) {
  switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
  }
  return "?";
}

inline Axis parse_axis(std::string_view s) {
  if (s == "x") return Axis::x;
  if (s == "y") return Axis::y;
  if (s == "z") return Axis::z;
  throw ConfigError("unknown axis '" + std::string(s) + "' (expected x, y or z)");
}

}  // namespace dipnoise
