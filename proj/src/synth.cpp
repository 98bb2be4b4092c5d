#include "sdfrecon/synth.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "sdfrecon/io.hpp"

namespace sdfrecon {

namespace {

double box_sdf(const Vec3& x, const Vec3& center, const Vec3& half) {
    const Vec3 q = (x - center).cwiseAbs() - half;
    const Vec3 outside = q.cwiseMax(0.0);
    return outside.norm() + std::min(q.maxCoeff(), 0.0);
}

double primitive_sdf(const Primitive& p, const Vec3& x) {
    const double s = p.kind == Primitive::Box
                         ? box_sdf(x, p.center, p.half)
                         : (x - p.center).norm() - p.radius;
    // hollow shell: free space is the interior
    return p.hollow ? -s : s;
}

}  // namespace

SceneSpec default_scene() {
    SceneSpec scene;
    Primitive room;
    room.kind = Primitive::Box;
    room.hollow = true;
    room.center = Vec3::Zero();
    room.half = Vec3::Ones();
    scene.prims.push_back(room);

    Primitive table;
    table.kind = Primitive::Box;
    table.center = Vec3(0.35, 0.1, -0.7);
    table.half = Vec3(0.25, 0.18, 0.3);  // top face at z = -0.4
    scene.prims.push_back(table);

    Primitive ball;
    ball.kind = Primitive::Sphere;
    ball.center = Vec3(0.35, 0.1, -0.25);  // resting on the table top
    ball.radius = 0.15;
    scene.prims.push_back(ball);
    return scene;
}

std::vector<CameraModel> default_cameras(int n_views, int size) {
    std::vector<CameraModel> cams;
    // alternating heights give vertical parallax; the mild downward pitch
    // keeps walls in frontal view while the floor fills the lower half
    for (int i = 0; i < n_views; ++i) {
        const double a = 2.0 * M_PI * i / n_views;
        const Vec3 center(0.7 * std::cos(a), 0.7 * std::sin(a),
                          i % 2 ? 0.2 : -0.05);
        const Vec3 target(0, 0, center.z() - 0.45);
        const Vec3 zc = (target - center).normalized();
        Vec3 xc = zc.cross(Vec3(0, 0, 1));
        xc.normalize();
        const Vec3 yc = zc.cross(xc);  // image-down maps to world-down

        CameraModel cam;
        cam.fx = cam.fy = 0.85 * size;
        cam.cx = cam.cy = size / 2.0;
        cam.width = cam.height = size;
        cam.pose = Mat4::Identity();
        cam.pose.block<3, 1>(0, 0) = xc;
        cam.pose.block<3, 1>(0, 1) = yc;
        cam.pose.block<3, 1>(0, 2) = zc;
        cam.pose.topRightCorner<3, 1>() = center;
        cams.push_back(cam);
    }
    return cams;
}

double analytic_sdf(const SceneSpec& scene, const Vec3& x) {
    double s = std::numeric_limits<double>::infinity();
    for (const Primitive& p : scene.prims) s = std::min(s, primitive_sdf(p, x));
    return s;
}

Vec3 albedo_at(const SceneSpec& scene, const Vec3& x) {
    // attribute the point to the primitive whose surface is closest
    int best = 0;
    double best_abs = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scene.prims.size(); ++i) {
        const double a = std::abs(primitive_sdf(scene.prims[i], x));
        if (a < best_abs) {
            best_abs = a;
            best = static_cast<int>(i);
        }
    }
    const Primitive& p = scene.prims[best];
    auto checker = [&](double u, double v, double period, const Vec3& c1,
                       const Vec3& c2) {
        const long iu = static_cast<long>(std::floor(u / period));
        const long iv = static_cast<long>(std::floor(v / period));
        return ((iu + iv) & 1) ? c2 : c1;
    };
    if (p.hollow) {
        // floor is checkered, the other five faces are flat
        if (x.z() < p.center.z() - p.half.z() + 0.02)
            return checker(x.x(), x.y(), scene.checker_period,
                           Vec3(0.9, 0.9, 0.85), Vec3(0.15, 0.15, 0.2));
        return Vec3(0.72, 0.7, 0.66);
    }
    if (p.kind == Primitive::Sphere) return Vec3(0.7, 0.2, 0.2);
    // table: flat top and bottom, checkered sides
    if (std::abs(x.z() - (p.center.z() + p.half.z())) < 0.02 ||
        std::abs(x.z() - (p.center.z() - p.half.z())) < 0.02)
        return Vec3(0.55, 0.38, 0.2);
    const double around = std::abs(x.x() - p.center.x()) >
                                  std::abs(x.y() - p.center.y())
                              ? x.y()
                              : x.x();
    return checker(around, x.z(), 0.1, Vec3(0.85, 0.8, 0.5),
                   Vec3(0.25, 0.2, 0.1));
}

TraceHit sphere_trace(const SceneSpec& scene, const Ray& ray, int max_steps,
                      double eps) {
    TraceHit out;
    double t = 0;
    for (int step = 0; step < max_steps; ++step) {
        const Vec3 x = ray.origin + t * ray.dir;
        const double s = analytic_sdf(scene, x);
        if (std::abs(s) < eps) {
            out.hit = true;
            out.t = t;
            out.point = x;
            const double h = 1e-4;
            Vec3 g;
            for (int k = 0; k < 3; ++k) {
                Vec3 e = Vec3::Zero();
                e[k] = h;
                g[k] = (analytic_sdf(scene, x + e) - analytic_sdf(scene, x - e)) /
                       (2 * h);
            }
            out.normal = g.normalized();
            return out;
        }
        t += s;
        if (t > 1e3) break;
    }
    return out;
}

GtView render_gt_view(const SceneSpec& scene, const CameraModel& cam) {
    GtView view;
    view.cam = cam;
    view.image = ImageRgb(cam.width, cam.height, Vec3::Zero());
    view.depth = ImageGray(cam.width, cam.height, 0.0);
    view.normal = Grid<Vec3>(cam.width, cam.height, Vec3::Zero());
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const Ray ray = pixel_to_ray(cam, x + 0.5, y + 0.5);
            const TraceHit hit = sphere_trace(scene, ray);
            if (!hit.hit) continue;
            const Vec3 albedo = albedo_at(scene, hit.point);
            const double diffuse =
                std::max(0.0, hit.normal.dot(scene.light_dir));
            view.image.at(x, y) =
                ((diffuse + 0.2) * albedo).cwiseMin(1.0);
            view.depth.at(x, y) = hit.t;
            view.normal.at(x, y) = hit.normal;
        }
    return view;
}

std::vector<GtView> render_gt_views(const SceneSpec& scene,
                                    const std::vector<CameraModel>& cams) {
    std::vector<GtView> views;
    views.reserve(cams.size());
    for (const CameraModel& cam : cams)
        views.push_back(render_gt_view(scene, cam));
    return views;
}

namespace {

// one visible-surface sample: random free-space origin, random direction
Vec3 surface_sample(const SceneSpec& scene, Rng& rng) {
    for (;;) {
        Vec3 origin(rng.uniform(-0.95, 0.95), rng.uniform(-0.95, 0.95),
                    rng.uniform(-0.95, 0.95));
        if (analytic_sdf(scene, origin) <= 0.02) continue;
        Vec3 dir(rng.gaussian(), rng.gaussian(), rng.gaussian());
        const double n = dir.norm();
        if (n < 1e-9) continue;
        dir /= n;
        const TraceHit hit = sphere_trace(scene, {origin, dir});
        if (hit.hit) return hit.point;
    }
}

}  // namespace

std::vector<Vec3> gt_point_cloud(const SceneSpec& scene, int n_points,
                                 Rng& rng) {
    if (n_points <= 0)
        throw std::invalid_argument("gt_point_cloud: n_points > 0");
    std::vector<Vec3> pts;
    pts.reserve(n_points);
    for (int i = 0; i < n_points; ++i)
        pts.push_back(surface_sample(scene, rng));
    return pts;
}

CorrSet make_correspondences(const SceneSpec& scene,
                             const std::vector<CameraModel>& cams,
                             int n_points, double pixel_noise_sigma, Rng& rng) {
    if (n_points <= 0)
        throw std::invalid_argument("make_correspondences: n_points > 0");
    CorrSet out;
    const int n_views = static_cast<int>(cams.size());
    for (int i = 0; i < n_points; ++i) {
        const Vec3 p = surface_sample(scene, rng);
        // visibility per view: projection in-image and unoccluded
        std::vector<int> vis;
        std::vector<Projection> proj(n_views);
        std::vector<double> dist(n_views);
        for (int v = 0; v < n_views; ++v) {
            proj[v] = project_point(cams[v], p);
            if (proj[v].behind) continue;
            if (proj[v].u < 0.5 || proj[v].u >= cams[v].width - 0.5 ||
                proj[v].v < 0.5 || proj[v].v >= cams[v].height - 0.5)
                continue;
            dist[v] = (p - cams[v].center()).norm();
            const Ray ray = pixel_to_ray(cams[v], proj[v].u, proj[v].v);
            const TraceHit hit = sphere_trace(scene, ray);
            if (!hit.hit) continue;
            if (std::abs(hit.t - dist[v]) > 0.01 * dist[v]) continue;
            vis.push_back(v);
        }
        for (std::size_t a = 0; a + 1 < vis.size(); ++a) {
            const int va = vis[a], vb = vis[a + 1];  // chain adjacent views
            Correspondence c;
            c.view_a = va;
            c.view_b = vb;
            c.ua = proj[va].u + pixel_noise_sigma * rng.gaussian();
            c.va = proj[va].v + pixel_noise_sigma * rng.gaussian();
            c.ub = proj[vb].u + pixel_noise_sigma * rng.gaussian();
            c.vb = proj[vb].v + pixel_noise_sigma * rng.gaussian();
            c.score = 1.0;
            // noise may push a pixel outside the image; drop those
            if (c.ua < 0 || c.ua >= cams[va].width || c.va < 0 ||
                c.va >= cams[va].height || c.ub < 0 ||
                c.ub >= cams[vb].width || c.vb < 0 || c.vb >= cams[vb].height)
                continue;
            out.matches.push_back(c);
            out.depth_a.push_back(dist[va]);
            out.depth_b.push_back(dist[vb]);
        }
    }
    return out;
}

void write_synth_dataset(const std::string& dir, const SceneSpec& scene,
                         const std::vector<CameraModel>& cams, int gt_points,
                         std::optional<int> match_points,
                         double pixel_noise_sigma, Rng& rng) {
    namespace fs = std::filesystem;
    fs::create_directories(dir + "/images");
    fs::create_directories(dir + "/depth");
    std::vector<Mat4> poses;
    for (std::size_t i = 0; i < cams.size(); ++i) {
        GtView view = render_gt_view(scene, cams[i]);
        write_ppm(dir + "/images/" + std::to_string(i) + ".ppm", view.image);
        write_pgm16(dir + "/depth/" + std::to_string(i) + ".pgm", view.depth,
                    1000.0);
        poses.push_back(cams[i].pose);
    }
    write_poses(dir + "/poses.txt", poses);
    write_intrinsics(dir + "/intrinsics.txt", cams.at(0));
    write_xyz(dir + "/gt_points.xyz", gt_point_cloud(scene, gt_points, rng));
    if (match_points) {
        CorrSet cs = make_correspondences(scene, cams, *match_points,
                                          pixel_noise_sigma, rng);
        write_matches(dir + "/matches.txt", cs.matches);
    }
}

}  // namespace sdfrecon
