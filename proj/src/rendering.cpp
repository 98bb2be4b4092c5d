#include "sdfrecon/rendering.hpp"

#include <cmath>
#include <stdexcept>

namespace sdfrecon {

double density_from_sdf(double s, double beta, bool literal) {
    if (beta <= 0) throw std::domain_error("density_from_sdf: beta must be positive");
    if (literal) s = -s;
    if (s >= 0) return std::exp(-s / beta) / (2 * beta);
    return (1.0 - 0.5 * std::exp(s / beta)) / beta;
}

std::vector<double> sample_ray(double near, double far, int n,
                               const std::function<double()>& u01) {
    if (near < 0 || far <= near)
        throw std::domain_error("sample_ray: need 0 <= near < far");
    if (n < 2) throw std::domain_error("sample_ray: need at least 2 samples");
    std::vector<double> t(n);
    const double width = (far - near) / n;
    for (int i = 0; i < n; ++i) t[i] = near + (i + u01()) * width;
    return t;
}

std::vector<double> sample_ray(double near, double far, int n, Rng& rng) {
    return sample_ray(near, far, n, [&rng] { return rng.uniform(); });
}

Eigen::VectorXd deltas_for(const std::vector<double>& t, double far,
                           double floor) {
    const int n = static_cast<int>(t.size());
    Eigen::VectorXd d(n);
    for (int i = 0; i + 1 < n; ++i) d[i] = t[i + 1] - t[i];
    d[n - 1] = std::max(far - t[n - 1], floor);
    return d;
}

WeightCurves compute_weights(const Eigen::VectorXd& sigma,
                             const Eigen::VectorXd& delta) {
    if (sigma.size() != delta.size())
        throw std::invalid_argument("compute_weights: length mismatch");
    if ((sigma.array() < 0).any() || (delta.array() <= 0).any())
        throw std::invalid_argument("compute_weights: need sigma >= 0, delta > 0");
    const int n = static_cast<int>(sigma.size());
    WeightCurves out;
    out.T.resize(n);
    out.w.resize(n);
    double acc = 0;
    for (int i = 0; i < n; ++i) {
        out.T[i] = std::exp(-acc);
        out.w[i] = out.T[i] * (1.0 - std::exp(-sigma[i] * delta[i]));
        acc += sigma[i] * delta[i];
    }
    return out;
}

GeoNodes SceneFieldProvider::geo(Tape& tape, NodeId x) const {
    return geo_graph(tape, f_, x);
}

NodeId SceneFieldProvider::color(Tape& tape, NodeId x, NodeId v,
                                 const GeoNodes& g) const {
    return color_graph(tape, f_, x, v, g.normal, g.feat);
}

NodeId SceneFieldProvider::plane(Tape& tape, NodeId x) const {
    return plane_graph(tape, f_, x);
}

NodeId SceneFieldProvider::density(Tape& tape, NodeId x, NodeId sdf) const {
    NodeId s = tape.stop_tangent(sdf);
    if (literal_) s = tape.scale(s, -1.0);
    return tape.density_from_sdf(s, beta_node(tape, f_));
}

RenderNodes render_rays_graph(Tape& tape, const FieldProvider& fp,
                              const std::vector<Ray>& rays, double near,
                              double far, int n_samples, Rng& rng) {
    const int R = static_cast<int>(rays.size());
    const int N = n_samples;
    if (R == 0) throw std::invalid_argument("render_rays_graph: no rays");
    const int B = R * N;

    RenderNodes out;
    out.tvals.resize(N, R);
    Mat xs(3, B), vs(3, B), trow(1, B), drow(1, B);
    for (int r = 0; r < R; ++r) {
        std::vector<double> t = sample_ray(near, far, N, rng);
        Eigen::VectorXd dl = deltas_for(t, far);
        for (int i = 0; i < N; ++i) {
            const int c = r * N + i;
            out.tvals(i, r) = t[i];
            xs.col(c) = rays[r].origin + t[i] * rays[r].dir;
            vs.col(c) = rays[r].dir;
            trow(0, c) = t[i];
            drow(0, c) = dl[i];
        }
    }

    out.x = tape.input3(xs);
    out.geo = fp.geo(tape, out.x);
    NodeId sigma = fp.density(tape, out.x, out.geo.sdf);
    NodeId sd = tape.mul(sigma, tape.constant(drow));         // 1xB
    NodeId sd_m = tape.reshape(sd, N, R);                     // samples down columns
    NodeId T = tape.exp(tape.scale(tape.cumsum_excl_cols(sd_m), -1.0));
    NodeId alpha = tape.sub(tape.constant(Mat::Ones(N, R)),
                            tape.exp(tape.scale(sd_m, -1.0)));
    NodeId w = tape.mul(T, alpha);                            // N x R
    NodeId w_row = tape.reshape(w, 1, B);

    NodeId c = fp.color(tape, out.x, tape.constant(vs), out.geo);
    out.color = tape.group_sum_cols(tape.mul(c, w_row), N);   // 3xR
    out.depth = tape.group_sum_cols(tape.mul(w_row, tape.constant(trow)), N);
    NodeId p = tape.sigmoid(fp.plane(tape, out.x));
    out.plane = tape.group_sum_cols(tape.mul(w_row, p), N);
    out.opacity = tape.group_sum_cols(w_row, N);

    NodeId nacc = tape.group_sum_cols(tape.mul(out.geo.normal, w_row), N);
    NodeId nsq = tape.col_sum(tape.square(nacc));
    out.normal = tape.div(nacc, tape.sqrt(tape.add_const(nsq, 1e-16)));

    out.weights = w;
    out.trans = T;
    return out;
}

RenderOutputs render_ray(const SceneFields& f, const Ray& ray, double near,
                         double far, int n_samples, Rng& rng, Tape& ctx) {
    SceneFieldProvider fp(f);
    RenderNodes n = render_rays_graph(ctx, fp, {ray}, near, far, n_samples, rng);
    RenderOutputs o;
    o.color = ctx.value(n.color).col(0);
    o.depth = ctx.value(n.depth)(0, 0);
    o.normal = ctx.value(n.normal).col(0);
    o.plane = ctx.value(n.plane)(0, 0);
    o.w = ctx.value(n.weights).col(0);
    o.T = ctx.value(n.trans).col(0);
    o.opacity = ctx.value(n.opacity)(0, 0);
    return o;
}

}  // namespace sdfrecon
