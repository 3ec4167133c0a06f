#pragma once

#include <cmath>
#include <numbers>

namespace twinwatch {

/// Station-local ground-plane coordinates in meters.
struct Point2D {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2D&, const Point2D&) = default;
};

inline Point2D operator+(Point2D a, Point2D b) { return {a.x + b.x, a.y + b.y}; }
inline Point2D operator-(Point2D a, Point2D b) { return {a.x - b.x, a.y - b.y}; }
inline Point2D operator*(Point2D a, double s) { return {a.x * s, a.y * s}; }

inline double dot(Point2D a, Point2D b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point2D a) { return std::hypot(a.x, a.y); }
inline double distance(Point2D a, Point2D b) { return norm(a - b); }

struct Rect {
    Point2D min;
    Point2D max;

    double width() const { return max.x - min.x; }
    double height() const { return max.y - min.y; }
    bool contains(Point2D p, double eps = 1e-9) const {
        return p.x >= min.x - eps && p.x <= max.x + eps && p.y >= min.y - eps &&
               p.y <= max.y + eps;
    }
};

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Wraps an angle into [0, 360).
inline double wrap_degrees(double deg) {
    double w = std::fmod(deg, 360.0);
    if (w < 0.0) w += 360.0;
    if (w >= 360.0) w = 0.0;
    return w;
}

/// Unit vector for a compass azimuth measured counter-clockwise from +x.
inline Point2D direction_from_azimuth(double azimuth_deg) {
    const double r = deg_to_rad(azimuth_deg);
    return {std::cos(r), std::sin(r)};
}

/// Unsigned angle between two non-zero vectors, in degrees within [0, 180].
inline double angle_between_deg(Point2D a, Point2D b) {
    const double denom = norm(a) * norm(b);
    double c = dot(a, b) / denom;
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return rad_to_deg(std::acos(c));
}

/// Distance from `p` to the closed segment [a, b].
inline double distance_to_segment(Point2D p, Point2D a, Point2D b) {
    const Point2D ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return distance(p, a);
    double t = dot(p - a, ab) / len2;
    if (t < 0.0) t = 0.0;
    if (t > 1.0) t = 1.0;
    return distance(p, a + ab * t);
}

/// Parameter in [0, 1] of the projection of `p` onto segment [a, b].
inline double segment_parameter(Point2D p, Point2D a, Point2D b) {
    const Point2D ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) return 0.0;
    double t = dot(p - a, ab) / len2;
    return t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
}

}  // namespace twinwatch
