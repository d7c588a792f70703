#pragma once

#include <string_view>

#include "aulmpm/types.hpp"

namespace aulmpm {

enum class ColliderShape { half_space, sphere };
enum class BoundaryType { sticky, slip };

BoundaryType parse_boundary_type(std::string_view name);

// Half-space: the solid region is (x - point) . normal < 0, normal points into
// free space. Sphere: the solid region is the ball, or its complement when
// `inverted` (a spherical container).
template <int Dim>
struct Collider {
    ColliderShape shape = ColliderShape::half_space;
    BoundaryType type = BoundaryType::sticky;
    Vec<Dim> point = Vec<Dim>::Zero();
    Vec<Dim> normal = Vec<Dim>::UnitY();
    double radius = 0.0;
    bool inverted = false;
    Vec<Dim> velocity = Vec<Dim>::Zero();

    // Negative inside the solid region.
    double signed_distance(const Vec<Dim>& x) const;
    Vec<Dim> outward_normal(const Vec<Dim>& x) const;

    // Velocity after contact projection for a node at x.
    Vec<Dim> project(const Vec<Dim>& x, const Vec<Dim>& v, bool* touched = nullptr) const;
};

template <int Dim>
double Collider<Dim>::signed_distance(const Vec<Dim>& x) const
{
    if (shape == ColliderShape::half_space)
        return (x - point).dot(normal);
    const double d = (x - point).norm() - radius;
    return inverted ? -d : d;
}

template <int Dim>
Vec<Dim> Collider<Dim>::outward_normal(const Vec<Dim>& x) const
{
    if (shape == ColliderShape::half_space)
        return normal;
    Vec<Dim> n = x - point;
    const double len = n.norm();
    if (len == 0.0)
        return Vec<Dim>::UnitY();
    n /= len;
    return inverted ? Vec<Dim>(-n) : n;
}

template <int Dim>
Vec<Dim> Collider<Dim>::project(const Vec<Dim>& x, const Vec<Dim>& v, bool* touched) const
{
    if (touched)
        *touched = false;
    if (signed_distance(x) > 0.0)
        return v;
    const Vec<Dim> n = outward_normal(x);
    const Vec<Dim> rel = v - velocity;
    const double vn = rel.dot(n);
    if (vn >= 0.0)
        return v; // separating
    if (touched)
        *touched = true;
    if (type == BoundaryType::sticky)
        return velocity;
    return velocity + rel - vn * n;
}

} // namespace aulmpm
