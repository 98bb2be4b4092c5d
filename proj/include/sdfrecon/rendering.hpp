#pragma once

#include <functional>
#include <vector>

#include "sdfrecon/fields.hpp"
#include "sdfrecon/geometry.hpp"

namespace sdfrecon {

// Laplace-CDF density transform, decreasing in s: density saturates at
// 1/beta inside the surface and vanishes outside. literal=true evaluates
// the increasing orientation instead (argument unnegated), kept only for
// comparison runs.
double density_from_sdf(double s, double beta, bool literal = false);

// Stratified t samples on [near, far]: one draw per equal sub-interval.
// u01 supplies uniforms in [0,1); the Rng overload consumes one per sample.
std::vector<double> sample_ray(double near, double far, int n,
                               const std::function<double()>& u01);
std::vector<double> sample_ray(double near, double far, int n, Rng& rng);

// delta_i = t_{i+1} - t_i; the terminal delta is far - t_N floored at
// `floor` so the last sample always occupies some interval.
Eigen::VectorXd deltas_for(const std::vector<double>& t, double far,
                           double floor = 1e-4);

struct WeightCurves {
    Eigen::VectorXd T;  // transmittance, T[0] = 1, non-increasing
    Eigen::VectorXd w;  // quadrature weights, w_i = T_i (1 - exp(-sigma_i delta_i))
};
WeightCurves compute_weights(const Eigen::VectorXd& sigma,
                             const Eigen::VectorXd& delta);

// Supplies field sub-graphs to the renderer. x is a 3xB tangent-seeded node
// of sample positions; B = rays x samples, sample index fastest.
class FieldProvider {
  public:
    virtual ~FieldProvider() = default;
    virtual GeoNodes geo(Tape& tape, NodeId x) const = 0;
    virtual NodeId color(Tape& tape, NodeId x, NodeId v,
                         const GeoNodes& g) const = 0;  // 3xB in [0,1]
    virtual NodeId plane(Tape& tape, NodeId x) const = 0;  // 1xB logits
    virtual NodeId density(Tape& tape, NodeId x, NodeId sdf) const = 0;  // 1xB
};

// The real thing, backed by SceneFields.
class SceneFieldProvider : public FieldProvider {
  public:
    explicit SceneFieldProvider(const SceneFields& f, bool literal_density = false)
        : f_(f), literal_(literal_density) {}
    GeoNodes geo(Tape& tape, NodeId x) const override;
    NodeId color(Tape& tape, NodeId x, NodeId v, const GeoNodes& g) const override;
    NodeId plane(Tape& tape, NodeId x) const override;
    NodeId density(Tape& tape, NodeId x, NodeId sdf) const override;

  private:
    const SceneFields& f_;
    bool literal_;
};

// Batched render graph over R rays with n samples each.
struct RenderNodes {
    NodeId color = -1;    // 3xR
    NodeId depth = -1;    // 1xR
    NodeId normal = -1;   // 3xR, renormalized after accumulation
    NodeId plane = -1;    // 1xR accumulated probability
    NodeId weights = -1;  // n x R
    NodeId trans = -1;    // n x R
    NodeId opacity = -1;  // 1xR
    NodeId x = -1;        // 3x(R*n) sample positions (tangent-seeded)
    GeoNodes geo;         // per-sample field nodes, for loss reuse
    Mat tvals;            // n x R sample t values
};
RenderNodes render_rays_graph(Tape& tape, const FieldProvider& fp,
                              const std::vector<Ray>& rays, double near,
                              double far, int n_samples, Rng& rng);

// One-ray convenience wrapper around the graph.
struct RenderOutputs {
    Vec3 color;
    double depth = 0;
    Vec3 normal;
    double plane = 0;
    Eigen::VectorXd w, T;
    double opacity = 0;
};
RenderOutputs render_ray(const SceneFields& f, const Ray& ray, double near,
                         double far, int n_samples, Rng& rng, Tape& ctx);

}  // namespace sdfrecon
