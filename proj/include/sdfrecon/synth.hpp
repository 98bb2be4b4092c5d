#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sdfrecon/geometry.hpp"
#include "sdfrecon/image.hpp"
#include "sdfrecon/rng.hpp"
#include "sdfrecon/sparse_depth.hpp"

namespace sdfrecon {

// Analytic CSG scene: one hollow room shell plus solid furniture. The SDF
// convention is free space positive, solid matter negative.
struct Primitive {
    enum Kind { Box, Sphere } kind = Box;
    bool hollow = false;  // room shell: its interior is free space
    Vec3 center = Vec3::Zero();
    Vec3 half = Vec3::Ones();  // box half extents
    double radius = 0.5;       // sphere
};

struct SceneSpec {
    std::vector<Primitive> prims;
    Vec3 light_dir = Vec3(0.4, 0.3, 0.85).normalized();  // toward the light
    double checker_period = 0.25;                        // floor pattern
};

// Room [-1,1]^3, checkerboard floor, table with flat top and checkered
// sides, sphere resting on the table.
SceneSpec default_scene();
// 20 interior ring cameras at 64x64 looking toward the room center.
std::vector<CameraModel> default_cameras(int n_views = 20, int size = 64);

double analytic_sdf(const SceneSpec& scene, const Vec3& x);
// Albedo of the surface point nearest to x (flat walls, patterned floor and
// table sides).
Vec3 albedo_at(const SceneSpec& scene, const Vec3& x);

struct TraceHit {
    bool hit = false;
    double t = 0;  // Euclidean distance along the unit-direction ray
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::Zero();  // central-difference SDF gradient
};
TraceHit sphere_trace(const SceneSpec& scene, const Ray& ray,
                      int max_steps = 256, double eps = 1e-5);

struct GtView {
    ImageRgb image;
    ImageGray depth;  // Euclidean ray distance, 0 on miss
    Grid<Vec3> normal;
    CameraModel cam;
};

GtView render_gt_view(const SceneSpec& scene, const CameraModel& cam);
std::vector<GtView> render_gt_views(const SceneSpec& scene,
                                    const std::vector<CameraModel>& cams);

// Uniform samples of the visible surface: sphere traces of random rays from
// random free-space interior points.
std::vector<Vec3> gt_point_cloud(const SceneSpec& scene, int n_points,
                                 Rng& rng);

struct CorrSet {
    std::vector<Correspondence> matches;
    std::vector<double> depth_a, depth_b;  // true ray distances per match
};

// Surface points projected into every camera; pairs emitted for views where
// both projections land in-image and pass an occlusion test (trace distance
// within 1% of the point distance). Pixel noise applied after the test.
CorrSet make_correspondences(const SceneSpec& scene,
                             const std::vector<CameraModel>& cams,
                             int n_points, double pixel_noise_sigma, Rng& rng);

// Dataset directory: images/<i>.ppm, depth/<i>.pgm (16-bit, millimeters),
// poses.txt, intrinsics.txt, gt_points.xyz and optionally matches.txt.
void write_synth_dataset(const std::string& dir, const SceneSpec& scene,
                         const std::vector<CameraModel>& cams, int gt_points,
                         std::optional<int> match_points,
                         double pixel_noise_sigma, Rng& rng);

}  // namespace sdfrecon
