#pragma once

#include <string>
#include <vector>

#include "sdfrecon/rng.hpp"
#include "sdfrecon/tape.hpp"

namespace sdfrecon {

enum class Activation { None, Relu, Softplus, Sigmoid };

// Architecture of one MLP. widths = [in, h1, ..., hk, out].
// skip_layers lists hidden-layer indices (1-based, counting linear layers)
// whose input is concatenated with the network input.
struct MlpSpec {
    std::vector<int> widths;
    Activation hidden_activation = Activation::Relu;
    double softplus_beta = 100.0;
    Activation output_activation = Activation::None;
    std::vector<int> skip_layers;
    bool weight_norm = false;

    int num_layers() const { return static_cast<int>(widths.size()) - 1; }
    bool has_skip(int layer) const;
    int layer_in_width(int layer) const;  // accounts for skip concatenation
    // parameter count; weight_norm adds one row-scale vector per layer
    int param_count() const;
    std::string describe() const;
    void validate() const;
};

// Named slices into one flat parameter vector. Layer l of an MLP occupies
// [W_l | b_l] (| g_l when weight-normalized), column-major.
struct ParamLayout {
    struct Slice {
        std::string name;
        int offset = 0;
        int rows = 0, cols = 0;
    };
    std::vector<Slice> slices;
    int total = 0;

    const Slice& find(const std::string& name) const;
};

ParamLayout layout_for(const MlpSpec& spec, const std::string& prefix);

// Positional encoding [x, sin(2^0 pi x), cos(2^0 pi x), ...,
// sin(2^{L-1} pi x), cos(2^{L-1} pi x)] per component.
Eigen::VectorXd positional_encoding(const Eigen::VectorXd& x, int num_freqs);
int positional_encoding_dim(int dim, int num_freqs);
// Tape version; input node is dim x P.
NodeId positional_encoding_node(Tape& tape, NodeId x, int num_freqs);

// Builds the forward graph for a whole MLP; input node is widths[0] x P.
// base_offset locates the MLP inside the flat parameter vector.
NodeId mlp_forward_node(Tape& tape, const MlpSpec& spec, int base_offset,
                        NodeId input);

// Single-input evaluation. ctx records the trace for backprop.
Eigen::VectorXd mlp_forward(const MlpSpec& spec,
                            const Eigen::VectorXd& params,
                            const Eigen::VectorXd& input, Tape& ctx);

// Derivative of output[output_index] with respect to the first three input
// coordinates, via the forward-mode tangent channel.
Eigen::Vector3d mlp_input_gradient(const MlpSpec& spec,
                                   const Eigen::VectorXd& params,
                                   const Eigen::Vector3d& input,
                                   int output_index, Tape& ctx);

// Random initialization (He-style scaled normal).
Eigen::VectorXd random_init(const MlpSpec& spec, Rng& rng);

// Geometric initialization: the fresh network approximates ||x|| - radius.
// Assumes the spec's first output is the SDF scalar and that the first three
// input rows are the raw (unencoded) point coordinates.
Eigen::VectorXd sphere_init(const MlpSpec& spec, double radius, Rng& rng);

}  // namespace sdfrecon
