#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>

namespace sdfrecon {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Ray o + t*v, v unit length.
struct Ray {
    Vec3 origin;
    Vec3 dir;
};

// Pinhole camera. Convention: camera looks down +z in its own frame,
// u rightward, v downward, pose is camera-to-world.
struct CameraModel {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    Mat4 pose = Mat4::Identity();  // camera-to-world

    Mat3 rotation() const { return pose.topLeftCorner<3, 3>(); }
    Vec3 center() const { return pose.topRightCorner<3, 1>(); }
};

struct RayPairIntersection {
    Vec3 midpoint;
    double t1 = 0, t2 = 0;
    double gap = 0;
    bool valid = false;     // false when an optimal t is <= 0
    bool parallel = false;  // no unique closest-point pair
};

struct Projection {
    double u = 0, v = 0;
    double depth = 0;  // camera-frame z
    bool behind = false;
};

// Pixel (u,v) -> world-space ray through the camera center.
// Throws std::domain_error for pixels outside the image bounds.
Ray pixel_to_ray(const CameraModel& cam, double u, double v);

// World point -> pixel. Points with non-positive camera-frame depth are
// flagged, never a crash.
Projection project_point(const CameraModel& cam, const Vec3& x);

// Closest points between two rays (common perpendicular). The midpoint of
// the two closest points approximates the intersection. Flags parallel
// ray pairs and behind-camera (t <= 0) solutions.
RayPairIntersection closest_points_between_rays(const Ray& r1, const Ray& r2);

// Checks the orthonormality invariant of a camera pose.
bool pose_is_rigid(const Mat4& pose, double tol = 1e-6);

}  // namespace sdfrecon
