#pragma once

#include "sdfrecon/geometry.hpp"
#include "sdfrecon/mlp.hpp"

namespace sdfrecon {

// Architecture knobs for the three field networks.
struct FieldsConfig {
    int geo_width = 64;
    int geo_depth = 4;       // hidden layers
    int feature_width = 64;  // z(x)
    int color_width = 64;
    int color_depth = 2;
    int plane_width = 64;
    int plane_depth = 2;
    int pe_x = 6;  // frequencies for positions
    int pe_v = 4;  // frequencies for view directions
    double init_radius = 0.75;
    double init_beta = 0.1;
};

// The scene representation: SDF field, color field, plane-probability field
// and the learnable density sharpness beta, all in one flat parameter vector
// so a single optimizer step updates everything.
struct SceneFields {
    FieldsConfig cfg;
    MlpSpec geo_spec, color_spec, plane_spec;
    int geo_offset = 0, color_offset = 0, plane_offset = 0, log_beta_offset = 0;
    Eigen::VectorXd params;

    int param_count() const { return static_cast<int>(params.size()); }
    double beta() const { return std::exp(params[log_beta_offset]); }
};

// Builds the three networks, sphere-initializes the geometry net and sets
// log beta = log(cfg.init_beta).
SceneFields make_scene_fields(const FieldsConfig& cfg, Rng& rng);
// Same layout with zeroed parameters; used when loading checkpoints.
SceneFields make_scene_fields_uninit(const FieldsConfig& cfg);

// Graph pieces for one batch of points. x is 3xB; pass an input3 node when
// normals or Eikonal terms are needed, a constant node otherwise.
struct GeoNodes {
    NodeId sdf = -1;     // 1xB
    NodeId feat = -1;    // feature_width x B, tangent-stopped
    NodeId grad = -1;    // 3xB value node holding grad s, -1 without tangents
    NodeId normal = -1;  // 3xB guarded-normalized gradient, -1 without tangents
};

GeoNodes geo_graph(Tape& tape, const SceneFields& f, NodeId x);
// v is a 3xB constant of unit view directions; normal/feat come from
// geo_graph. Result is 3xB in [0,1].
NodeId color_graph(Tape& tape, const SceneFields& f, NodeId x, NodeId v,
                   NodeId normal, NodeId feat);
NodeId plane_graph(Tape& tape, const SceneFields& f, NodeId x);  // 1xB logits
NodeId beta_node(Tape& tape, const SceneFields& f);              // 1x1, positive

// Single-point evaluators; ctx records the trace.
struct SdfEval {
    double s;
    Eigen::VectorXd z;
};
SdfEval eval_sdf(const SceneFields& f, const Vec3& x, Tape& ctx);
Vec3 eval_normal(const SceneFields& f, const Vec3& x, Tape& ctx);
Vec3 eval_color(const SceneFields& f, const Vec3& x, const Vec3& v, Tape& ctx);
double eval_plane_logit(const SceneFields& f, const Vec3& x, Tape& ctx);

}  // namespace sdfrecon
