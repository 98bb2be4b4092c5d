#include "sdfrecon/mlp.hpp"

#include "sdfrecon/adam.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sdfrecon {

bool MlpSpec::has_skip(int layer) const {
    return std::find(skip_layers.begin(), skip_layers.end(), layer) !=
           skip_layers.end();
}

int MlpSpec::layer_in_width(int layer) const {
    int w = widths[layer - 1];
    if (has_skip(layer)) w += widths[0];
    return w;
}

int MlpSpec::param_count() const {
    int total = 0;
    for (int l = 1; l <= num_layers(); ++l) {
        const int in_w = layer_in_width(l);
        const int out_w = widths[l];
        total += out_w * in_w + out_w;
        if (weight_norm) total += out_w;
    }
    return total;
}

void MlpSpec::validate() const {
    if (widths.size() < 3)
        throw std::invalid_argument("MlpSpec: need at least one hidden layer");
    for (int w : widths)
        if (w <= 0) throw std::invalid_argument("MlpSpec: widths must be positive");
    for (int s : skip_layers)
        if (s < 2 || s > num_layers())
            throw std::invalid_argument("MlpSpec: skip layer out of range");
}

std::string MlpSpec::describe() const {
    std::ostringstream os;
    os << "mlp";
    for (int w : widths) os << "-" << w;
    os << "|act" << static_cast<int>(hidden_activation)
       << "|out" << static_cast<int>(output_activation);
    os << "|skip";
    for (int s : skip_layers) os << "." << s;
    if (weight_norm) os << "|wn";
    return os.str();
}

const ParamLayout::Slice& ParamLayout::find(const std::string& name) const {
    for (const auto& s : slices)
        if (s.name == name) return s;
    throw std::out_of_range("ParamLayout: no slice named " + name);
}

ParamLayout layout_for(const MlpSpec& spec, const std::string& prefix) {
    ParamLayout layout;
    int off = 0;
    for (int l = 1; l <= spec.num_layers(); ++l) {
        const int in_w = spec.layer_in_width(l);
        const int out_w = spec.widths[l];
        layout.slices.push_back({prefix + ".W" + std::to_string(l), off, out_w, in_w});
        off += out_w * in_w;
        layout.slices.push_back({prefix + ".b" + std::to_string(l), off, out_w, 1});
        off += out_w;
        if (spec.weight_norm) {
            layout.slices.push_back({prefix + ".g" + std::to_string(l), off, out_w, 1});
            off += out_w;
        }
    }
    layout.total = off;
    return layout;
}

int positional_encoding_dim(int dim, int num_freqs) {
    return dim * (1 + 2 * num_freqs);
}

Eigen::VectorXd positional_encoding(const Eigen::VectorXd& x, int num_freqs) {
    const int d = static_cast<int>(x.size());
    Eigen::VectorXd out(positional_encoding_dim(d, num_freqs));
    out.head(d) = x;
    int at = d;
    double freq = M_PI;
    for (int l = 0; l < num_freqs; ++l) {
        out.segment(at, d) = (freq * x).array().sin();
        out.segment(at + d, d) = (freq * x).array().cos();
        at += 2 * d;
        freq *= 2.0;
    }
    return out;
}

NodeId positional_encoding_node(Tape& tape, NodeId x, int num_freqs) {
    if (num_freqs == 0) return x;
    std::vector<NodeId> parts{x};
    double freq = M_PI;
    for (int l = 0; l < num_freqs; ++l) {
        NodeId s = tape.scale(x, freq);
        parts.push_back(tape.sin(s));
        parts.push_back(tape.cos(s));
        freq *= 2.0;
    }
    return tape.concat_rows(parts);
}

namespace {

NodeId apply_activation(Tape& tape, NodeId h, Activation act, double sp_beta) {
    switch (act) {
        case Activation::None: return h;
        case Activation::Relu: return tape.relu(h);
        case Activation::Softplus: return tape.softplus(h, sp_beta);
        case Activation::Sigmoid: return tape.sigmoid(h);
    }
    return h;
}

}  // namespace

NodeId mlp_forward_node(Tape& tape, const MlpSpec& spec, int base_offset,
                        NodeId input) {
    spec.validate();
    if (tape.value(input).rows() != spec.widths[0])
        throw std::invalid_argument("mlp_forward_node: input width mismatch");
    NodeId h = input;
    int off = base_offset;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int l = 1; l <= spec.num_layers(); ++l) {
        const int in_w = spec.layer_in_width(l);
        const int out_w = spec.widths[l];
        if (spec.has_skip(l))
            h = tape.scale(tape.concat_rows({h, input}), inv_sqrt2);
        NodeId w = tape.param(off, out_w, in_w);
        off += out_w * in_w;
        NodeId b = tape.param(off, out_w, 1);
        off += out_w;
        if (spec.weight_norm) {
            NodeId g = tape.param(off, out_w, 1);
            off += out_w;
            NodeId row_norm = tape.sqrt(tape.row_sum(tape.square(w)));
            w = tape.mul(w, tape.div(g, row_norm));
        }
        h = tape.add(tape.matmul(w, h), b);
        h = apply_activation(tape, h,
                             l < spec.num_layers() ? spec.hidden_activation
                                                   : spec.output_activation,
                             spec.softplus_beta);
    }
    return h;
}

Eigen::VectorXd mlp_forward(const MlpSpec& spec, const Eigen::VectorXd& params,
                            const Eigen::VectorXd& input, Tape& ctx) {
    if (params.size() != spec.param_count())
        throw std::invalid_argument("mlp_forward: parameter count mismatch");
    if (input.size() != spec.widths[0])
        throw std::invalid_argument("mlp_forward: input size mismatch");
    NodeId in = ctx.constant(input);
    NodeId out = mlp_forward_node(ctx, spec, 0, in);
    return ctx.value(out).col(0);
}

Eigen::Vector3d mlp_input_gradient(const MlpSpec& spec,
                                   const Eigen::VectorXd& params,
                                   const Eigen::Vector3d& input,
                                   int output_index, Tape& ctx) {
    if (spec.widths[0] != 3)
        throw std::invalid_argument("mlp_input_gradient: net input must be 3-d");
    if (params.size() != spec.param_count())
        throw std::invalid_argument("mlp_input_gradient: parameter count mismatch");
    if (output_index < 0 || output_index >= spec.widths.back())
        throw std::out_of_range("mlp_input_gradient: bad output index");
    NodeId in = ctx.input3(input);
    NodeId out = mlp_forward_node(ctx, spec, 0, in);
    NodeId row = ctx.slice_rows(out, output_index, 1);
    NodeId g = ctx.tangent_to_value(row);
    return ctx.value(g).col(0);
}

Eigen::VectorXd random_init(const MlpSpec& spec, Rng& rng) {
    spec.validate();
    Eigen::VectorXd params(spec.param_count());
    int off = 0;
    for (int l = 1; l <= spec.num_layers(); ++l) {
        const int in_w = spec.layer_in_width(l);
        const int out_w = spec.widths[l];
        const double std = std::sqrt(2.0 / in_w);
        for (int i = 0; i < out_w * in_w; ++i) params[off + i] = std * rng.gaussian();
        off += out_w * in_w;
        for (int i = 0; i < out_w; ++i) params[off + i] = 0.0;
        off += out_w;
        if (spec.weight_norm) {
            Eigen::Map<Mat> w(params.data() + off - out_w * in_w - out_w, out_w, in_w);
            for (int i = 0; i < out_w; ++i) params[off + i] = w.row(i).norm();
            off += out_w;
        }
    }
    return params;
}

Eigen::VectorXd sphere_init(const MlpSpec& spec, double radius, Rng& rng) {
    spec.validate();
    Eigen::VectorXd params = Eigen::VectorXd::Zero(spec.param_count());
    const int L = spec.num_layers();
    const int in_dim = spec.widths[0];
    int off = 0;
    for (int l = 1; l <= L; ++l) {
        const int in_w = spec.layer_in_width(l);
        const int out_w = spec.widths[l];
        Eigen::Map<Mat> w(params.data() + off, out_w, in_w);
        Eigen::Map<Eigen::VectorXd> b(params.data() + off + out_w * in_w, out_w);
        if (l == L) {
            // output layer: mean sqrt(pi / in) with tiny spread gives
            // f(x) ~ ||x|| for the preceding ReLU-like stack
            const double mean = std::sqrt(M_PI) / std::sqrt(double(in_w));
            for (int i = 0; i < w.size(); ++i)
                w.data()[i] = mean + 1e-4 * rng.gaussian();
            b.setConstant(-radius);
        } else {
            const double std = std::sqrt(2.0) / std::sqrt(double(out_w));
            for (int i = 0; i < w.size(); ++i) w.data()[i] = std * rng.gaussian();
            b.setZero();
            if (l == 1 && in_dim > 3) {
                // only the raw xyz rows of an encoded input feed the first layer
                w.rightCols(in_dim - 3).setZero();
            }
            if (spec.has_skip(l + 1)) {
                // next layer sees [h, input]; handled when that layer inits
            }
            if (spec.has_skip(l) && in_dim > 3) {
                // zero the encoded part of the concatenated input
                w.rightCols(in_dim - 3).setZero();
            }
        }
        off += out_w * in_w + out_w;
        if (spec.weight_norm) {
            Eigen::Map<Eigen::VectorXd> g(params.data() + off, out_w);
            for (int i = 0; i < out_w; ++i) g[i] = w.row(i).norm();
            off += out_w;
        }
    }

    // The analytic recipe lands near ||x|| - r only for wide nets; at the
    // widths used here the angular scatter is large. Keep it as a warm start
    // and briefly regress onto the exact signed distance.
    const int num_freqs = in_dim > 3 ? (in_dim / 3 - 1) / 2 : 0;
    // Freeze the encoded-input columns that the warm start zeroed; letting
    // them move during the fit reintroduces high-frequency wiggles whose
    // gradients are far from radial.
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(params.size());
    if (in_dim > 3) {
        int moff = 0;
        for (int l = 1; l <= L; ++l) {
            const int in_w = spec.layer_in_width(l);
            const int out_w = spec.widths[l];
            if (l == 1 || spec.has_skip(l))
                Eigen::Map<Mat>(mask.data() + moff, out_w, in_w)
                    .rightCols(in_dim - 3)
                    .setZero();
            moff += out_w * in_w + out_w;
            if (spec.weight_norm) moff += out_w;
        }
    }
    Rng fit_rng(0x5eed);
    AdamState st(static_cast<int>(params.size()));
    const int batch = 64;
    for (int it = 0; it < 500; ++it) {
        Mat xraw(3, batch), target(1, batch), gtarget(3, batch), gmask(3, batch);
        for (int c = 0; c < batch; ++c) {
            Eigen::Vector3d x(fit_rng.uniform(-1.2, 1.2),
                              fit_rng.uniform(-1.2, 1.2),
                              fit_rng.uniform(-1.2, 1.2));
            // mix in on-sphere points so the zero set is fit tightly, and
            // interior points so the minimum at the origin is reached
            if (c % 4 == 0 && x.norm() > 1e-9) x = radius * x.normalized();
            if (c % 4 == 1) x *= fit_rng.uniform(0.0, 0.3);
            xraw.col(c) = x;
            target(0, c) = x.norm() - radius;
            const bool near0 = x.norm() < 0.05;
            gtarget.col(c) = near0 ? Eigen::Vector3d::Zero().eval()
                                   : x.normalized().eval();
            gmask.col(c).setConstant(near0 ? 0.0 : 1.0);
        }
        Tape tape(&params);
        NodeId x = tape.input3(xraw);
        NodeId enc = in_dim > 3 ? positional_encoding_node(tape, x, num_freqs) : x;
        NodeId out = mlp_forward_node(tape, spec, 0, enc);
        NodeId s = tape.slice_rows(out, 0, 1);
        NodeId err = tape.sub(tape.stop_tangent(s), tape.constant(target));
        NodeId gerr = tape.mul(
            tape.sub(tape.tangent_to_value(s), tape.constant(gtarget)),
            tape.constant(gmask));
        NodeId loss = tape.scale(
            tape.add(tape.sum_all(tape.square(err)),
                     tape.scale(tape.sum_all(tape.square(gerr)), 0.5)),
            1.0 / batch);
        tape.backward(loss);
        Eigen::VectorXd g = tape.grad().cwiseProduct(mask);
        adam_step(params, g, st, 1e-3);
    }
    return params;
}

}  // namespace sdfrecon
