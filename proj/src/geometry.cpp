#include "sdfrecon/geometry.hpp"

namespace sdfrecon {

Ray pixel_to_ray(const CameraModel& cam, double u, double v) {
    if (u < 0 || u >= cam.width || v < 0 || v >= cam.height)
        throw std::domain_error("pixel_to_ray: pixel outside image bounds");
    Vec3 dir_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
    Vec3 dir_world = cam.rotation() * dir_cam;
    return Ray{cam.center(), dir_world.normalized()};
}

Projection project_point(const CameraModel& cam, const Vec3& x) {
    Vec3 x_cam = cam.rotation().transpose() * (x - cam.center());
    Projection p;
    p.depth = x_cam.z();
    if (x_cam.z() <= 0) {
        p.behind = true;
        return p;
    }
    p.u = cam.fx * x_cam.x() / x_cam.z() + cam.cx;
    p.v = cam.fy * x_cam.y() / x_cam.z() + cam.cy;
    return p;
}

RayPairIntersection closest_points_between_rays(const Ray& r1, const Ray& r2) {
    RayPairIntersection res;
    const Vec3& v1 = r1.dir;
    const Vec3& v2 = r2.dir;
    const double d = v1.dot(v2);
    // 2x2 normal system [1 -d; d -1] [t1 t2]^T = [b.v1, b.v2]^T, b = o2-o1
    if (std::abs(1.0 - d * d) < 1e-12) {
        res.parallel = true;
        return res;
    }
    const Vec3 b = r2.origin - r1.origin;
    const double bv1 = b.dot(v1);
    const double bv2 = b.dot(v2);
    const double denom = 1.0 - d * d;
    res.t1 = (bv1 - d * bv2) / denom;
    res.t2 = (d * bv1 - bv2) / denom;
    const Vec3 p1 = r1.origin + res.t1 * v1;
    const Vec3 p2 = r2.origin + res.t2 * v2;
    res.midpoint = 0.5 * (p1 + p2);
    res.gap = (p1 - p2).norm();
    res.valid = res.t1 > 0 && res.t2 > 0;
    return res;
}

bool pose_is_rigid(const Mat4& pose, double tol) {
    Mat3 r = pose.topLeftCorner<3, 3>();
    if (((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
        return false;
    if (r.determinant() < 0) return false;
    Eigen::RowVector4d bottom = pose.row(3);
    return (bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() <=
           tol;
}

}  // namespace sdfrecon
