#include "sdfrecon/fields.hpp"

#include <cmath>
#include <stdexcept>

namespace sdfrecon {

namespace {

MlpSpec build_geo_spec(const FieldsConfig& cfg) {
    MlpSpec s;
    s.widths.push_back(positional_encoding_dim(3, cfg.pe_x));
    for (int i = 0; i < cfg.geo_depth; ++i) s.widths.push_back(cfg.geo_width);
    s.widths.push_back(1 + cfg.feature_width);
    s.hidden_activation = Activation::Softplus;
    s.softplus_beta = 100.0;
    s.output_activation = Activation::None;
    if (cfg.geo_depth >= 3) s.skip_layers = {cfg.geo_depth / 2 + 1};
    return s;
}

MlpSpec build_color_spec(const FieldsConfig& cfg) {
    MlpSpec s;
    s.widths.push_back(positional_encoding_dim(3, cfg.pe_x) +
                       positional_encoding_dim(3, cfg.pe_v) + 3 +
                       cfg.feature_width);
    for (int i = 0; i < cfg.color_depth; ++i) s.widths.push_back(cfg.color_width);
    s.widths.push_back(3);
    s.hidden_activation = Activation::Relu;
    s.output_activation = Activation::Sigmoid;
    return s;
}

MlpSpec build_plane_spec(const FieldsConfig& cfg) {
    MlpSpec s;
    s.widths.push_back(positional_encoding_dim(3, cfg.pe_x));
    for (int i = 0; i < cfg.plane_depth; ++i) s.widths.push_back(cfg.plane_width);
    s.widths.push_back(1);
    s.hidden_activation = Activation::Relu;
    s.output_activation = Activation::None;
    return s;
}

}  // namespace

SceneFields make_scene_fields_uninit(const FieldsConfig& cfg) {
    if (cfg.init_beta <= 0)
        throw std::invalid_argument("make_scene_fields: init_beta must be positive");
    SceneFields f;
    f.cfg = cfg;
    f.geo_spec = build_geo_spec(cfg);
    f.color_spec = build_color_spec(cfg);
    f.plane_spec = build_plane_spec(cfg);
    f.geo_offset = 0;
    f.color_offset = f.geo_spec.param_count();
    f.plane_offset = f.color_offset + f.color_spec.param_count();
    f.log_beta_offset = f.plane_offset + f.plane_spec.param_count();
    f.params = Eigen::VectorXd::Zero(f.log_beta_offset + 1);
    return f;
}

SceneFields make_scene_fields(const FieldsConfig& cfg, Rng& rng) {
    SceneFields f = make_scene_fields_uninit(cfg);
    f.params.segment(f.geo_offset, f.geo_spec.param_count()) =
        sphere_init(f.geo_spec, cfg.init_radius, rng);
    f.params.segment(f.color_offset, f.color_spec.param_count()) =
        random_init(f.color_spec, rng);
    f.params.segment(f.plane_offset, f.plane_spec.param_count()) =
        random_init(f.plane_spec, rng);
    f.params[f.log_beta_offset] = std::log(cfg.init_beta);
    return f;
}

GeoNodes geo_graph(Tape& tape, const SceneFields& f, NodeId x) {
    NodeId enc = positional_encoding_node(tape, x, f.cfg.pe_x);
    NodeId out = mlp_forward_node(tape, f.geo_spec, f.geo_offset, enc);
    GeoNodes g;
    g.sdf = tape.slice_rows(out, 0, 1);
    g.feat = tape.stop_tangent(tape.slice_rows(out, 1, f.cfg.feature_width));
    if (tape.has_tangent(x)) {
        g.grad = tape.tangent_to_value(g.sdf);
        // guarded normalization: g / sqrt(|g|^2 + eps^2) never divides by
        // zero and stays bounded for vanishing gradients
        NodeId nsq = tape.col_sum(tape.square(g.grad));
        NodeId inv = tape.sqrt(tape.add_const(nsq, 1e-16));
        g.normal = tape.div(g.grad, inv);
    }
    return g;
}

NodeId color_graph(Tape& tape, const SceneFields& f, NodeId x, NodeId v,
                   NodeId normal, NodeId feat) {
    NodeId ex = positional_encoding_node(tape, tape.stop_tangent(x), f.cfg.pe_x);
    NodeId ev = positional_encoding_node(tape, v, f.cfg.pe_v);
    NodeId in = tape.concat_rows({ex, ev, normal, feat});
    return mlp_forward_node(tape, f.color_spec, f.color_offset, in);
}

NodeId plane_graph(Tape& tape, const SceneFields& f, NodeId x) {
    NodeId enc = positional_encoding_node(tape, tape.stop_tangent(x), f.cfg.pe_x);
    return mlp_forward_node(tape, f.plane_spec, f.plane_offset, enc);
}

NodeId beta_node(Tape& tape, const SceneFields& f) {
    return tape.exp(tape.param(f.log_beta_offset, 1, 1));
}

SdfEval eval_sdf(const SceneFields& f, const Vec3& x, Tape& ctx) {
    GeoNodes g = geo_graph(ctx, f, ctx.constant(x));
    return {ctx.value(g.sdf)(0, 0), ctx.value(g.feat).col(0)};
}

Vec3 eval_normal(const SceneFields& f, const Vec3& x, Tape& ctx) {
    GeoNodes g = geo_graph(ctx, f, ctx.input3(x));
    return ctx.value(g.normal).col(0);
}

Vec3 eval_color(const SceneFields& f, const Vec3& x, const Vec3& v, Tape& ctx) {
    if (std::abs(v.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("eval_color: view direction must be unit");
    GeoNodes g = geo_graph(ctx, f, ctx.input3(x));
    NodeId c = color_graph(ctx, f, ctx.constant(x), ctx.constant(v), g.normal,
                           g.feat);
    return ctx.value(c).col(0);
}

double eval_plane_logit(const SceneFields& f, const Vec3& x, Tape& ctx) {
    return ctx.value(plane_graph(ctx, f, ctx.constant(x)))(0, 0);
}

}  // namespace sdfrecon
