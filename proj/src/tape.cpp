#include "sdfrecon/tape.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace sdfrecon {

namespace {

// Broadcast m up to (rows, cols). Allowed sources: same shape, 1x1,
// 1xC (replicated over rows), Rx1 (replicated over columns).
Mat bc(const Mat& m, Eigen::Index rows, Eigen::Index cols) {
    if (m.rows() == rows && m.cols() == cols) return m;
    if (m.rows() == 1 && m.cols() == 1)
        return Mat::Constant(rows, cols, m(0, 0));
    if (m.rows() == 1 && m.cols() == cols) return m.replicate(rows, 1);
    if (m.cols() == 1 && m.rows() == rows) return m.replicate(1, cols);
    throw std::invalid_argument("tape: incompatible broadcast shapes");
}

// Reduce a full-shape adjoint back onto an operand of shape (rows, cols).
Mat reduce_to(const Mat& full, Eigen::Index rows, Eigen::Index cols) {
    if (full.rows() == rows && full.cols() == cols) return full;
    if (rows == 1 && cols == 1) return Mat::Constant(1, 1, full.sum());
    if (rows == 1) return full.colwise().sum();
    if (cols == 1) return full.rowwise().sum();
    throw std::invalid_argument("tape: incompatible reduce shapes");
}

void check_broadcastable(const Mat& a, const Mat& b) {
    auto ok = [](const Mat& m, Eigen::Index r, Eigen::Index c) {
        return (m.rows() == r && m.cols() == c) ||
               (m.rows() == 1 && m.cols() == 1) ||
               (m.rows() == 1 && m.cols() == c) ||
               (m.cols() == 1 && m.rows() == r);
    };
    Eigen::Index r = std::max(a.rows(), b.rows());
    Eigen::Index c = std::max(a.cols(), b.cols());
    if (!ok(a, r, c) || !ok(b, r, c))
        throw std::invalid_argument("tape: shape mismatch in binary op");
}

}  // namespace

Tape::Tape(const Eigen::VectorXd* params) : params_(params) {
    nodes_.reserve(256);
}

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::constant(Mat v) {
    Node n;
    n.op = Op::Constant;
    n.val = std::move(v);
    return push(std::move(n));
}

NodeId Tape::input3(Mat v) {
    if (v.rows() != 3) throw std::invalid_argument("input3: expected 3 rows");
    Node n;
    n.op = Op::Constant;
    n.has_tan = true;
    for (int k = 0; k < 3; ++k) {
        n.tan[k] = Mat::Zero(3, v.cols());
        n.tan[k].row(k).setOnes();
    }
    n.val = std::move(v);
    return push(std::move(n));
}

NodeId Tape::param(int offset, int rows, int cols) {
    if (!params_) throw std::logic_error("tape has no bound parameter vector");
    if (offset < 0 || offset + rows * cols > params_->size())
        throw std::out_of_range("param slice outside parameter vector");
    Node n;
    n.op = Op::Param;
    n.poff = offset;
    n.i0 = rows;
    n.i1 = cols;
    n.val = Eigen::Map<const Mat>(params_->data() + offset, rows, cols);
    return push(std::move(n));
}

NodeId Tape::unary(Op op, NodeId a, double c0, double c1) {
    Node n;
    n.op = op;
    n.a = a;
    n.c0 = c0;
    n.c1 = c1;
    const Node& na = nodes_[a];
    const Mat& x = na.val;
    Mat d1;  // derivative, needed to propagate tangents
    switch (op) {
        case Op::Exp: n.val = x.array().exp(); d1 = n.val; break;
        case Op::Log: n.val = x.array().log(); d1 = x.cwiseInverse(); break;
        case Op::Sqrt: n.val = x.array().sqrt(); d1 = (0.5 * n.val.array().inverse()).matrix(); break;
        case Op::Sin: n.val = x.array().sin(); d1 = x.array().cos(); break;
        case Op::Cos: n.val = x.array().cos(); d1 = -x.array().sin(); break;
        case Op::Sigmoid:
            n.val = (1.0 / (1.0 + (-x.array()).exp())).matrix();
            d1 = (n.val.array() * (1.0 - n.val.array())).matrix();
            break;
        case Op::Softplus: {
            // log(1 + exp(beta x)) / beta, overflow-safe
            double b = c0;
            n.val = ((x.array() * b).max(0.0) +
                     (1.0 + (-(x.array() * b).abs()).exp()).log()) /
                    b;
            d1 = (1.0 / (1.0 + (-b * x.array()).exp())).matrix();
            break;
        }
        case Op::Relu:
            n.val = x.cwiseMax(0.0);
            d1 = (x.array() > 0.0).cast<double>();
            break;
        case Op::Abs:
            n.val = x.cwiseAbs();
            d1 = x.array().sign();
            break;
        case Op::Square:
            n.val = x.cwiseProduct(x);
            d1 = 2.0 * x;
            break;
        case Op::Scale: n.val = c0 * x; d1 = Mat::Constant(x.rows(), x.cols(), c0); break;
        case Op::AddConst: n.val = x.array() + c0; d1 = Mat::Ones(x.rows(), x.cols()); break;
        case Op::Clamp:
            n.val = x.cwiseMax(c0).cwiseMin(c1);
            d1 = ((x.array() >= c0) && (x.array() <= c1)).cast<double>();
            break;
        default: throw std::logic_error("unary: bad op");
    }
    if (na.has_tan) {
        n.has_tan = true;
        for (int k = 0; k < 3; ++k) n.tan[k] = d1.cwiseProduct(na.tan[k]);
    }
    return push(std::move(n));
}

NodeId Tape::binary(Op op, NodeId a, NodeId b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    check_broadcastable(na.val, nb.val);
    const Eigen::Index R = std::max(na.val.rows(), nb.val.rows());
    const Eigen::Index C = std::max(na.val.cols(), nb.val.cols());
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    const Mat av = bc(na.val, R, C);
    const Mat bv = bc(nb.val, R, C);
    switch (op) {
        case Op::Add: n.val = av + bv; break;
        case Op::Sub: n.val = av - bv; break;
        case Op::Mul: n.val = av.cwiseProduct(bv); break;
        case Op::Div:
            if (nb.has_tan)
                throw std::logic_error("div: tangent on divisor unsupported");
            n.val = av.cwiseQuotient(bv);
            break;
        case Op::Min2:
            if (na.has_tan || nb.has_tan)
                throw std::logic_error("min2: tangents unsupported");
            n.val = av.cwiseMin(bv);
            break;
        default: throw std::logic_error("binary: bad op");
    }
    if (na.has_tan || nb.has_tan) {
        n.has_tan = true;
        for (int k = 0; k < 3; ++k) {
            Mat at = na.has_tan ? bc(na.tan[k], R, C) : Mat::Zero(R, C);
            Mat bt = nb.has_tan ? bc(nb.tan[k], R, C) : Mat::Zero(R, C);
            switch (op) {
                case Op::Add: n.tan[k] = at + bt; break;
                case Op::Sub: n.tan[k] = at - bt; break;
                case Op::Mul:
                    n.tan[k] = at.cwiseProduct(bv) + av.cwiseProduct(bt);
                    break;
                case Op::Div: n.tan[k] = at.cwiseQuotient(bv); break;
                default: break;
            }
        }
    }
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) { return binary(Op::Add, a, b); }
NodeId Tape::sub(NodeId a, NodeId b) { return binary(Op::Sub, a, b); }
NodeId Tape::mul(NodeId a, NodeId b) { return binary(Op::Mul, a, b); }
NodeId Tape::div(NodeId a, NodeId b) { return binary(Op::Div, a, b); }
NodeId Tape::min2(NodeId a, NodeId b) { return binary(Op::Min2, a, b); }

NodeId Tape::scale(NodeId a, double c) { return unary(Op::Scale, a, c); }
NodeId Tape::add_const(NodeId a, double c) { return unary(Op::AddConst, a, c); }
NodeId Tape::clamp(NodeId a, double lo, double hi) { return unary(Op::Clamp, a, lo, hi); }
NodeId Tape::exp(NodeId a) { return unary(Op::Exp, a); }
NodeId Tape::log(NodeId a) { return unary(Op::Log, a); }
NodeId Tape::sqrt(NodeId a) { return unary(Op::Sqrt, a); }
NodeId Tape::sin(NodeId a) { return unary(Op::Sin, a); }
NodeId Tape::cos(NodeId a) { return unary(Op::Cos, a); }
NodeId Tape::sigmoid(NodeId a) { return unary(Op::Sigmoid, a); }
NodeId Tape::softplus(NodeId a, double beta) { return unary(Op::Softplus, a, beta); }
NodeId Tape::relu(NodeId a) { return unary(Op::Relu, a); }
NodeId Tape::abs(NodeId a) { return unary(Op::Abs, a); }
NodeId Tape::square(NodeId a) { return unary(Op::Square, a); }

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.val.cols() != nb.val.rows())
        throw std::invalid_argument("matmul: inner dimensions differ");
    if (na.has_tan && nb.has_tan)
        throw std::logic_error("matmul: tangents on both operands unsupported");
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.val = na.val * nb.val;
    if (na.has_tan || nb.has_tan) {
        n.has_tan = true;
        for (int k = 0; k < 3; ++k)
            n.tan[k] = na.has_tan ? Mat(na.tan[k] * nb.val)
                                  : Mat(na.val * nb.tan[k]);
    }
    return push(std::move(n));
}

NodeId Tape::concat_rows(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    Eigen::Index rows = 0;
    const Eigen::Index cols = nodes_[parts[0]].val.cols();
    bool any_tan = false;
    for (NodeId p : parts) {
        if (nodes_[p].val.cols() != cols)
            throw std::invalid_argument("concat_rows: column count differs");
        rows += nodes_[p].val.rows();
        any_tan = any_tan || nodes_[p].has_tan;
    }
    Node n;
    n.op = Op::ConcatRows;
    n.extra = parts;
    n.val.resize(rows, cols);
    if (any_tan) {
        n.has_tan = true;
        for (int k = 0; k < 3; ++k) n.tan[k] = Mat::Zero(rows, cols);
    }
    Eigen::Index r = 0;
    for (NodeId p : parts) {
        const Node& np = nodes_[p];
        n.val.middleRows(r, np.val.rows()) = np.val;
        if (any_tan && np.has_tan)
            for (int k = 0; k < 3; ++k)
                n.tan[k].middleRows(r, np.val.rows()) = np.tan[k];
        r += np.val.rows();
    }
    return push(std::move(n));
}

NodeId Tape::slice_rows(NodeId a, int row0, int nrows) {
    const Node& na = nodes_[a];
    if (row0 < 0 || row0 + nrows > na.val.rows())
        throw std::out_of_range("slice_rows: range outside matrix");
    Node n;
    n.op = Op::SliceRows;
    n.a = a;
    n.i0 = row0;
    n.i1 = nrows;
    n.val = na.val.middleRows(row0, nrows);
    if (na.has_tan) {
        n.has_tan = true;
        for (int k = 0; k < 3; ++k) n.tan[k] = na.tan[k].middleRows(row0, nrows);
    }
    return push(std::move(n));
}

NodeId Tape::reshape(NodeId a, int rows, int cols) {
    const Node& na = nodes_[a];
    if (na.val.size() != static_cast<Eigen::Index>(rows) * cols)
        throw std::invalid_argument("reshape: element count differs");
    if (na.has_tan) throw std::logic_error("reshape: tangents unsupported");
    Node n;
    n.op = Op::Reshape;
    n.a = a;
    n.val = Eigen::Map<const Mat>(na.val.data(), rows, cols);
    return push(std::move(n));
}

NodeId Tape::group_sum_cols(NodeId a, int group) {
    const Node& na = nodes_[a];
    if (group <= 0 || na.val.cols() % group != 0)
        throw std::invalid_argument("group_sum_cols: bad group size");
    if (na.has_tan) throw std::logic_error("group_sum_cols: tangents unsupported");
    Node n;
    n.op = Op::GroupSumCols;
    n.a = a;
    n.i0 = group;
    const Eigen::Index out_cols = na.val.cols() / group;
    n.val = Mat::Zero(na.val.rows(), out_cols);
    for (Eigen::Index j = 0; j < out_cols; ++j)
        n.val.col(j) = na.val.middleCols(j * group, group).rowwise().sum();
    return push(std::move(n));
}

NodeId Tape::col_sum(NodeId a) {
    const Node& na = nodes_[a];
    if (na.has_tan) throw std::logic_error("col_sum: tangents unsupported");
    Node n;
    n.op = Op::ColSum;
    n.a = a;
    n.val = na.val.colwise().sum();
    return push(std::move(n));
}

NodeId Tape::row_sum(NodeId a) {
    const Node& na = nodes_[a];
    if (na.has_tan) throw std::logic_error("row_sum: tangents unsupported");
    Node n;
    n.op = Op::RowSum;
    n.a = a;
    n.val = na.val.rowwise().sum();
    return push(std::move(n));
}

NodeId Tape::sum_all(NodeId a) {
    const Node& na = nodes_[a];
    if (na.has_tan) throw std::logic_error("sum_all: tangents unsupported");
    Node n;
    n.op = Op::SumAll;
    n.a = a;
    n.val = Mat::Constant(1, 1, na.val.sum());
    return push(std::move(n));
}

NodeId Tape::cumsum_excl_cols(NodeId a) {
    const Node& na = nodes_[a];
    if (na.has_tan) throw std::logic_error("cumsum_excl_cols: tangents unsupported");
    Node n;
    n.op = Op::CumSumExclCols;
    n.a = a;
    n.val = Mat::Zero(na.val.rows(), na.val.cols());
    for (Eigen::Index c = 0; c < na.val.cols(); ++c) {
        double acc = 0;
        for (Eigen::Index r = 0; r < na.val.rows(); ++r) {
            n.val(r, c) = acc;
            acc += na.val(r, c);
        }
    }
    return push(std::move(n));
}

NodeId Tape::tangent_to_value(NodeId a) {
    const Node& na = nodes_[a];
    if (!na.has_tan) throw std::logic_error("tangent_to_value: no tangent channel");
    if (na.val.rows() != 1)
        throw std::invalid_argument("tangent_to_value: expected a 1xC node");
    Node n;
    n.op = Op::TangentToValue;
    n.a = a;
    n.val.resize(3, na.val.cols());
    for (int k = 0; k < 3; ++k) n.val.row(k) = na.tan[k];
    return push(std::move(n));
}

NodeId Tape::stop_tangent(NodeId a) {
    Node n;
    n.op = Op::StopTangent;
    n.a = a;
    n.val = nodes_[a].val;
    return push(std::move(n));
}

NodeId Tape::density_from_sdf(NodeId s, NodeId beta) {
    const Node& ns = nodes_[s];
    const Node& nbeta = nodes_[beta];
    if (nbeta.val.rows() != 1 || nbeta.val.cols() != 1)
        throw std::invalid_argument("density_from_sdf: beta must be 1x1");
    const double b = nbeta.val(0, 0);
    if (!(b > 0)) throw std::domain_error("density_from_sdf: beta must be positive");
    if (ns.has_tan) throw std::logic_error("density_from_sdf: strip tangents first");
    Node n;
    n.op = Op::DensityFromSdf;
    n.a = s;
    n.b = beta;
    n.val = ns.val.unaryExpr([b](double sv) {
        if (sv >= 0) return std::exp(-sv / b) / (2.0 * b);
        return (1.0 - 0.5 * std::exp(sv / b)) / b;
    });
    return push(std::move(n));
}

void Tape::ensure_bar(Node& n) {
    if (n.bar_alloc) return;
    n.bar = Mat::Zero(n.val.rows(), n.val.cols());
    if (n.has_tan)
        for (int k = 0; k < 3; ++k)
            n.tan_bar[k] = Mat::Zero(n.val.rows(), n.val.cols());
    n.bar_alloc = true;
}

void Tape::accum_bar(int id, const Mat& contrib) {
    Node& n = nodes_[id];
    ensure_bar(n);
    n.bar += reduce_to(contrib, n.val.rows(), n.val.cols());
}

void Tape::accum_tan_bar(int id, int k, const Mat& contrib) {
    Node& n = nodes_[id];
    if (!n.has_tan) return;
    ensure_bar(n);
    n.tan_bar[k] += reduce_to(contrib, n.val.rows(), n.val.cols());
}

void Tape::backward(NodeId loss) {
    if (nodes_[loss].val.rows() != 1 || nodes_[loss].val.cols() != 1)
        throw std::invalid_argument("backward: loss must be a 1x1 scalar node");
    if (params_ && grad_.size() == 0) grad_ = Eigen::VectorXd::Zero(params_->size());
    ensure_bar(nodes_[loss]);
    nodes_[loss].bar(0, 0) += 1.0;
    for (int i = loss; i >= 0; --i) {
        if (!nodes_[i].bar_alloc) continue;
        backward_node(i);
    }
}

void Tape::backward_node(int i) {
    Node& n = nodes_[i];
    const Mat& yb = n.bar;
    switch (n.op) {
        case Op::Constant:
            break;
        case Op::Param:
            grad_.segment(n.poff, n.val.size()) +=
                Eigen::Map<const Eigen::VectorXd>(yb.data(), yb.size());
            break;
        case Op::MatMul: {
            Node& na = nodes_[n.a];
            Node& nb = nodes_[n.b];
            accum_bar(n.a, yb * nb.val.transpose());
            accum_bar(n.b, na.val.transpose() * yb);
            if (n.has_tan) {
                for (int k = 0; k < 3; ++k) {
                    const Mat& ytb = n.tan_bar[k];
                    if (nb.has_tan) {
                        accum_tan_bar(n.b, k, na.val.transpose() * ytb);
                        accum_bar(n.a, ytb * nb.tan[k].transpose());
                    } else {
                        accum_tan_bar(n.a, k, ytb * nb.val.transpose());
                        accum_bar(n.b, na.tan[k].transpose() * ytb);
                    }
                }
            }
            break;
        }
        case Op::Add:
        case Op::Sub: {
            const double sb = (n.op == Op::Sub) ? -1.0 : 1.0;
            accum_bar(n.a, yb);
            accum_bar(n.b, sb * yb);
            if (n.has_tan)
                for (int k = 0; k < 3; ++k) {
                    accum_tan_bar(n.a, k, n.tan_bar[k]);
                    accum_tan_bar(n.b, k, sb * n.tan_bar[k]);
                }
            break;
        }
        case Op::Mul: {
            Node& na = nodes_[n.a];
            Node& nb = nodes_[n.b];
            const Eigen::Index R = n.val.rows(), C = n.val.cols();
            const Mat av = bc(na.val, R, C);
            const Mat bv = bc(nb.val, R, C);
            accum_bar(n.a, yb.cwiseProduct(bv));
            accum_bar(n.b, yb.cwiseProduct(av));
            if (n.has_tan) {
                for (int k = 0; k < 3; ++k) {
                    const Mat& ytb = n.tan_bar[k];
                    if (na.has_tan) {
                        accum_tan_bar(n.a, k, ytb.cwiseProduct(bv));
                        accum_bar(n.b, ytb.cwiseProduct(bc(na.tan[k], R, C)));
                    }
                    if (nb.has_tan) {
                        accum_tan_bar(n.b, k, ytb.cwiseProduct(av));
                        accum_bar(n.a, ytb.cwiseProduct(bc(nb.tan[k], R, C)));
                    }
                }
            }
            break;
        }
        case Op::Div: {
            Node& na = nodes_[n.a];
            Node& nb = nodes_[n.b];
            const Eigen::Index R = n.val.rows(), C = n.val.cols();
            const Mat bv = bc(nb.val, R, C);
            const Mat inv_b = bv.cwiseInverse();
            accum_bar(n.a, yb.cwiseProduct(inv_b));
            accum_bar(n.b, -yb.cwiseProduct(n.val).cwiseProduct(inv_b));
            if (n.has_tan && na.has_tan) {
                for (int k = 0; k < 3; ++k) {
                    const Mat& ytb = n.tan_bar[k];
                    accum_tan_bar(n.a, k, ytb.cwiseProduct(inv_b));
                    accum_bar(n.b, -ytb.cwiseProduct(bc(na.tan[k], R, C))
                                        .cwiseProduct(inv_b)
                                        .cwiseProduct(inv_b));
                }
            }
            break;
        }
        case Op::Min2: {
            Node& na = nodes_[n.a];
            Node& nb = nodes_[n.b];
            const Eigen::Index R = n.val.rows(), C = n.val.cols();
            const Mat av = bc(na.val, R, C);
            const Mat bv = bc(nb.val, R, C);
            const Mat take_a = (av.array() <= bv.array()).cast<double>();
            accum_bar(n.a, yb.cwiseProduct(take_a));
            accum_bar(n.b, yb.cwiseProduct(Mat(1.0 - take_a.array())));
            break;
        }
        case Op::Scale:
        case Op::AddConst:
        case Op::Clamp:
        case Op::Exp:
        case Op::Log:
        case Op::Sqrt:
        case Op::Sin:
        case Op::Cos:
        case Op::Sigmoid:
        case Op::Softplus:
        case Op::Relu:
        case Op::Abs:
        case Op::Square: {
            Node& na = nodes_[n.a];
            const Mat& x = na.val;
            Mat d1, d2;
            const bool need_d2 = n.has_tan;
            switch (n.op) {
                case Op::Scale:
                    d1 = Mat::Constant(x.rows(), x.cols(), n.c0);
                    if (need_d2) d2 = Mat::Zero(x.rows(), x.cols());
                    break;
                case Op::AddConst:
                    d1 = Mat::Ones(x.rows(), x.cols());
                    if (need_d2) d2 = Mat::Zero(x.rows(), x.cols());
                    break;
                case Op::Clamp:
                    d1 = ((x.array() >= n.c0) && (x.array() <= n.c1)).cast<double>();
                    if (need_d2) d2 = Mat::Zero(x.rows(), x.cols());
                    break;
                case Op::Exp: d1 = n.val; d2 = n.val; break;
                case Op::Log:
                    d1 = x.cwiseInverse();
                    if (need_d2) d2 = -d1.cwiseProduct(d1);
                    break;
                case Op::Sqrt:
                    d1 = (0.5 * n.val.array().inverse()).matrix();
                    if (need_d2)
                        d2 = (-0.25 * (n.val.array() * n.val.array() * n.val.array()).inverse()).matrix();
                    break;
                case Op::Sin:
                    d1 = x.array().cos();
                    if (need_d2) d2 = -n.val;
                    break;
                case Op::Cos:
                    d1 = -x.array().sin();
                    if (need_d2) d2 = -n.val;
                    break;
                case Op::Sigmoid:
                    d1 = (n.val.array() * (1.0 - n.val.array())).matrix();
                    if (need_d2)
                        d2 = (d1.array() * (1.0 - 2.0 * n.val.array())).matrix();
                    break;
                case Op::Softplus: {
                    const double b = n.c0;
                    Mat sg = (1.0 / (1.0 + (-b * x.array()).exp())).matrix();
                    d1 = sg;
                    if (need_d2)
                        d2 = (b * sg.array() * (1.0 - sg.array())).matrix();
                    break;
                }
                case Op::Relu:
                    d1 = (x.array() > 0.0).cast<double>();
                    if (need_d2) d2 = Mat::Zero(x.rows(), x.cols());
                    break;
                case Op::Abs:
                    d1 = x.array().sign();
                    if (need_d2) d2 = Mat::Zero(x.rows(), x.cols());
                    break;
                case Op::Square:
                    d1 = 2.0 * x;
                    if (need_d2) d2 = Mat::Constant(x.rows(), x.cols(), 2.0);
                    break;
                default: break;
            }
            Mat contrib = yb.cwiseProduct(d1);
            if (n.has_tan) {
                for (int k = 0; k < 3; ++k) {
                    const Mat& ytb = n.tan_bar[k];
                    accum_tan_bar(n.a, k, ytb.cwiseProduct(d1));
                    contrib += ytb.cwiseProduct(d2).cwiseProduct(na.tan[k]);
                }
            }
            accum_bar(n.a, contrib);
            break;
        }
        case Op::ConcatRows: {
            Eigen::Index r = 0;
            for (NodeId p : n.extra) {
                Node& np = nodes_[p];
                const Eigen::Index pr = np.val.rows();
                accum_bar(p, yb.middleRows(r, pr));
                if (n.has_tan && np.has_tan)
                    for (int k = 0; k < 3; ++k)
                        accum_tan_bar(p, k, n.tan_bar[k].middleRows(r, pr));
                r += pr;
            }
            break;
        }
        case Op::SliceRows: {
            Node& na = nodes_[n.a];
            ensure_bar(na);
            na.bar.middleRows(n.i0, n.i1) += yb;
            if (n.has_tan && na.has_tan)
                for (int k = 0; k < 3; ++k)
                    na.tan_bar[k].middleRows(n.i0, n.i1) += n.tan_bar[k];
            break;
        }
        case Op::Reshape: {
            Node& na = nodes_[n.a];
            accum_bar(n.a, Eigen::Map<const Mat>(yb.data(), na.val.rows(),
                                                 na.val.cols()));
            break;
        }
        case Op::GroupSumCols: {
            Node& na = nodes_[n.a];
            ensure_bar(na);
            for (Eigen::Index j = 0; j < n.val.cols(); ++j)
                na.bar.middleCols(j * n.i0, n.i0).colwise() +=
                    Eigen::VectorXd(yb.col(j));
            break;
        }
        case Op::ColSum: {
            Node& na = nodes_[n.a];
            accum_bar(n.a, yb.replicate(na.val.rows(), 1));
            break;
        }
        case Op::RowSum: {
            Node& na = nodes_[n.a];
            accum_bar(n.a, yb.replicate(1, na.val.cols()));
            break;
        }
        case Op::SumAll: {
            Node& na = nodes_[n.a];
            accum_bar(n.a, Mat::Constant(na.val.rows(), na.val.cols(), yb(0, 0)));
            break;
        }
        case Op::CumSumExclCols: {
            Node& na = nodes_[n.a];
            Mat contrib = Mat::Zero(na.val.rows(), na.val.cols());
            for (Eigen::Index c = 0; c < na.val.cols(); ++c) {
                double acc = 0;
                for (Eigen::Index r = na.val.rows() - 1; r >= 0; --r) {
                    acc += yb(r, c);
                    // adjoint of a(r,c) is the sum of bar over rows > r
                    contrib(r, c) = acc - yb(r, c);
                }
            }
            accum_bar(n.a, contrib);
            break;
        }
        case Op::TangentToValue: {
            for (int k = 0; k < 3; ++k) accum_tan_bar(n.a, k, yb.row(k));
            break;
        }
        case Op::StopTangent:
            accum_bar(n.a, yb);
            break;
        case Op::DensityFromSdf: {
            Node& ns = nodes_[n.a];
            Node& nbeta = nodes_[n.b];
            const double b = nbeta.val(0, 0);
            Mat ds = ns.val.unaryExpr([b](double sv) {
                return -std::exp(-std::abs(sv) / b) / (2.0 * b * b);
            });
            Mat db = ns.val.unaryExpr([b](double sv) {
                if (sv >= 0) {
                    const double e = std::exp(-sv / b);
                    return e * sv / (2.0 * b * b * b) - e / (2.0 * b * b);
                }
                const double e = std::exp(sv / b);
                return -1.0 / (b * b) + e / (2.0 * b * b) +
                       e * sv / (2.0 * b * b * b);
            });
            accum_bar(n.a, yb.cwiseProduct(ds));
            accum_bar(n.b, Mat::Constant(1, 1, yb.cwiseProduct(db).sum()));
            break;
        }
    }
    // adjoint storage for this node is no longer needed
    n.bar.resize(0, 0);
    for (int k = 0; k < 3; ++k) n.tan_bar[k].resize(0, 0);
    n.bar_alloc = false;
}

}  // namespace sdfrecon
