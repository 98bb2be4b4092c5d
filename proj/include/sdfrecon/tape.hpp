#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace sdfrecon {

using Mat = Eigen::MatrixXd;
using NodeId = int;

// Reverse-mode tape over dense matrix nodes, with an optional forward-mode
// tangent channel of width 3 used to carry spatial derivatives of field
// networks. The tangent arithmetic is itself part of the recorded trace, so
// losses that contain input gradients (normals, Eikonal terms) remain
// differentiable with respect to parameters.
//
// Values are computed eagerly when an op is recorded. Parameters live in an
// external flat vector bound at construction; backward() accumulates into a
// gradient vector of the same size.
class Tape {
  public:
    explicit Tape(const Eigen::VectorXd* params = nullptr);

    // leaves
    NodeId constant(Mat v);
    // 3xP constant whose tangent channel is seeded with the identity, i.e.
    // tangent k of row r is delta_{kr}. Used for field input positions.
    NodeId input3(Mat v);
    NodeId param(int offset, int rows, int cols);

    // linear algebra
    NodeId matmul(NodeId a, NodeId b);

    // elementwise binary; shapes must match or one operand may broadcast
    // from 1x1, 1xC (over rows) or Rx1 (over columns)
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId min2(NodeId a, NodeId b);

    // elementwise with constants
    NodeId scale(NodeId a, double c);
    NodeId add_const(NodeId a, double c);
    NodeId clamp(NodeId a, double lo, double hi);

    // elementwise unary
    NodeId exp(NodeId a);
    NodeId log(NodeId a);
    NodeId sqrt(NodeId a);
    NodeId sin(NodeId a);
    NodeId cos(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId softplus(NodeId a, double beta);
    NodeId relu(NodeId a);
    NodeId abs(NodeId a);
    NodeId square(NodeId a);

    // structure
    NodeId concat_rows(const std::vector<NodeId>& parts);
    NodeId slice_rows(NodeId a, int row0, int nrows);
    NodeId reshape(NodeId a, int rows, int cols);
    NodeId group_sum_cols(NodeId a, int group);  // sums blocks of `group` columns
    NodeId col_sum(NodeId a);                    // 1xC, sums each column
    NodeId row_sum(NodeId a);                    // Rx1, sums each row
    NodeId sum_all(NodeId a);                    // 1x1
    NodeId cumsum_excl_cols(NodeId a);           // exclusive prefix sums down columns

    // tangent channel
    NodeId tangent_to_value(NodeId a);  // 1xC node with tangents -> 3xC value
    NodeId stop_tangent(NodeId a);      // value passthrough, drops tangents

    // Laplace-CDF density transform sigma(s; beta), decreasing in s.
    // beta must be a positive 1x1 node.
    NodeId density_from_sdf(NodeId s, NodeId beta);

    const Mat& value(NodeId id) const { return nodes_[id].val; }
    bool has_tangent(NodeId id) const { return nodes_[id].has_tan; }
    const Mat& tangent(NodeId id, int k) const { return nodes_[id].tan[k]; }

    // Reverse pass from a scalar (1x1) loss node. May be called once per
    // recorded graph.
    void backward(NodeId loss);
    const Eigen::VectorXd& grad() const { return grad_; }

    std::size_t size() const { return nodes_.size(); }

  private:
    enum class Op {
        Constant, Param, MatMul, Add, Sub, Mul, Div, Min2,
        Scale, AddConst, Clamp,
        Exp, Log, Sqrt, Sin, Cos, Sigmoid, Softplus, Relu, Abs, Square,
        ConcatRows, SliceRows, Reshape, GroupSumCols, ColSum, RowSum,
        SumAll, CumSumExclCols, TangentToValue, StopTangent, DensityFromSdf
    };

    struct Node {
        Op op;
        int a = -1, b = -1;
        double c0 = 0, c1 = 0;
        int i0 = 0, i1 = 0;  // slice/reshape/param shape info
        int poff = -1;
        std::vector<NodeId> extra;  // concat children
        Mat val;
        std::array<Mat, 3> tan;
        bool has_tan = false;
        Mat bar;
        std::array<Mat, 3> tan_bar;
        bool bar_alloc = false;
    };

    NodeId push(Node n);
    NodeId unary(Op op, NodeId a, double c0 = 0, double c1 = 0);
    NodeId binary(Op op, NodeId a, NodeId b);
    void backward_node(int i);
    void accum_bar(int id, const Mat& contrib);
    void accum_tan_bar(int id, int k, const Mat& contrib);
    void ensure_bar(Node& n);

    const Eigen::VectorXd* params_;
    Eigen::VectorXd grad_;
    std::vector<Node> nodes_;
};

}  // namespace sdfrecon
