#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "sdfrecon/fields.hpp"

namespace sdfrecon {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    bool empty() const { return triangles.empty(); }
    double area() const;
};

// Zero-isolevel marching cubes over `res` cells per axis on [lo, hi]^3.
// Vertices on shared cell edges are welded, so closed level sets away from
// the bounds come out watertight. Degenerate triangles are dropped.
TriangleMesh marching_cubes(const std::function<double(const Vec3&)>& sdf,
                            const Vec3& lo, const Vec3& hi, int res);

// Same, over a pre-sampled (res+1)^3 grid of SDF values, index order
// ix + (res+1) * (iy + (res+1) * iz).
TriangleMesh marching_cubes_grid(const std::vector<double>& values,
                                 const Vec3& lo, const Vec3& hi, int res);

// Batched network evaluation feeding the grid variant.
TriangleMesh mesh_from_fields(const SceneFields& f, const Vec3& lo,
                              const Vec3& hi, int res);

// Area-weighted uniform surface samples.
std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, int n_points,
                                      Rng& rng);

struct MetricsReport {
    double accuracy = 0;      // mean pred -> gt nearest distance
    double completeness = 0;  // mean gt -> pred nearest distance
    double precision = 0;
    double recall = 0;
    double f_score = 0;
    double tau = 0;
    int n_pred = 0, n_gt = 0;
};

// Atlas-protocol point metrics at threshold tau; nearest neighbors found
// through a uniform grid that reproduces brute-force distances exactly.
MetricsReport eval_metrics(const std::vector<Vec3>& pred,
                           const std::vector<Vec3>& gt, double tau);

std::string metrics_csv(const MetricsReport& m);   // header + one data line
std::string metrics_pretty(const MetricsReport& m);

// ASCII OBJ, v/f lines only.
void write_obj(const std::string& path, const TriangleMesh& mesh);
TriangleMesh read_obj(const std::string& path);

}  // namespace sdfrecon
