#include "sdfrecon/plane_seg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace sdfrecon {

namespace {

ImageRgb gaussian_smooth(const ImageRgb& in, double sigma) {
    if (sigma <= 0) return in;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double norm = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        norm += kernel[i + radius];
    }
    for (double& k : kernel) k /= norm;

    const int w = in.width(), h = in.height();
    ImageRgb tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Vec3 acc = Vec3::Zero();
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * in.at(std::clamp(x + i, 0, w - 1), y);
            tmp.at(x, y) = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Vec3 acc = Vec3::Zero();
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * tmp.at(x, std::clamp(y + i, 0, h - 1));
            out.at(x, y) = acc;
        }
    return out;
}

struct UnionFind {
    std::vector<int> parent, size;

    explicit UnionFind(int n) : parent(n), size(n, 1) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    int join(int a, int b) {
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
        return a;
    }
};

}  // namespace

SegmentLabelMap felzenszwalb_segment(const ImageRgb& image, double k,
                                     int min_size, double presmooth_sigma) {
    if (image.empty())
        throw std::invalid_argument("felzenszwalb_segment: empty image");
    if (k <= 0) throw std::invalid_argument("felzenszwalb_segment: k <= 0");
    const int w = image.width(), h = image.height();
    ImageRgb img = gaussian_smooth(image, presmooth_sigma);

    struct Edge {
        int a, b;
        double w;
    };
    // 8-connected grid; construction order fixes tie-breaking
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(4) * w * h);
    auto weight = [&](int ax, int ay, int bx, int by) {
        // weights on the 8-bit color scale to match the published k values
        return 255.0 * (img.at(ax, ay) - img.at(bx, by)).norm();
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int id = y * w + x;
            if (x + 1 < w) edges.push_back({id, id + 1, weight(x, y, x + 1, y)});
            if (y + 1 < h) edges.push_back({id, id + w, weight(x, y, x, y + 1)});
            if (x + 1 < w && y + 1 < h)
                edges.push_back({id, id + w + 1, weight(x, y, x + 1, y + 1)});
            if (x > 0 && y + 1 < h)
                edges.push_back({id, id + w - 1, weight(x, y, x - 1, y + 1)});
        }
    std::stable_sort(edges.begin(), edges.end(),
                     [](const Edge& a, const Edge& b) { return a.w < b.w; });

    UnionFind uf(w * h);
    // threshold(c) = Int(c) + k/|c|; singletons start at k
    std::vector<double> thr(static_cast<std::size_t>(w) * h, k);
    for (const Edge& e : edges) {
        const int a = uf.find(e.a), b = uf.find(e.b);
        if (a == b) continue;
        if (e.w <= std::min(thr[a], thr[b])) {
            const int r = uf.join(a, b);
            thr[r] = e.w + k / uf.size[r];
        }
    }
    // absorb undersized components along the same edge order
    for (const Edge& e : edges) {
        const int a = uf.find(e.a), b = uf.find(e.b);
        if (a != b && (uf.size[a] < min_size || uf.size[b] < min_size))
            uf.join(a, b);
    }

    SegmentLabelMap out;
    out.labels = ImageLabel(w, h, -1);
    std::vector<int> remap(static_cast<std::size_t>(w) * h, -1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int root = uf.find(y * w + x);
            if (remap[root] < 0) {
                remap[root] = out.n_segments();
                out.sizes.push_back(0);
            }
            out.labels.at(x, y) = remap[root];
            ++out.sizes[remap[root]];
        }
    return out;
}

PlaneMask filter_large_planes(const SegmentLabelMap& seg, double min_fraction) {
    if (min_fraction <= 0 || min_fraction >= 1)
        throw std::invalid_argument("filter_large_planes: min_fraction in (0,1)");
    const int w = seg.labels.width(), h = seg.labels.height();
    const double cutoff = min_fraction * w * h;
    std::vector<int> kept(seg.sizes.size());
    for (std::size_t i = 0; i < seg.sizes.size(); ++i)
        kept[i] = seg.sizes[i] >= cutoff ? 1 : 0;
    PlaneMask mask(w, h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) mask.at(x, y) = kept[seg.labels.at(x, y)];
    return mask;
}

double plane_loss(const Vec3& n_hat, const Vec3& n_f) {
    const double d = n_hat.dot(n_f);
    return std::min({std::abs(d + 1), std::abs(d), std::abs(d - 1)});
}

NodeId plane_loss_node(Tape& tape, NodeId normals, const Vec3& n_f) {
    NodeId d = tape.matmul(tape.constant(n_f.transpose()), normals);
    NodeId lo = tape.min2(tape.abs(tape.add_const(d, 1.0)), tape.abs(d));
    return tape.min2(lo, tape.abs(tape.add_const(d, -1.0)));
}

double joint_loss(const std::vector<double>& p_hat,
                  const std::vector<double>& l_pla,
                  const std::vector<int>& mask, bool full_bce) {
    if (p_hat.size() != l_pla.size() || p_hat.size() != mask.size())
        throw std::invalid_argument("joint_loss: length mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < p_hat.size(); ++i) {
        const double p = std::clamp(p_hat[i], 1e-6, 1.0 - 1e-6);
        if (mask[i]) acc += p * l_pla[i] - std::log(p);
        else if (full_bce) acc -= std::log(1.0 - p);
    }
    return acc;
}

NodeId joint_loss_node(Tape& tape, NodeId p_hat, NodeId l_pla,
                       const std::vector<int>& mask, bool full_bce) {
    const int r = static_cast<int>(tape.value(p_hat).cols());
    if (static_cast<int>(mask.size()) != r)
        throw std::invalid_argument("joint_loss_node: mask length mismatch");
    Mat m(1, r);
    for (int i = 0; i < r; ++i) m(0, i) = mask[i];
    NodeId mn = tape.constant(m);
    NodeId p = tape.clamp(p_hat, 1e-6, 1.0 - 1e-6);
    NodeId weighted = tape.mul(mn, tape.mul(p, l_pla));
    NodeId ce = tape.scale(tape.mul(mn, tape.log(p)), -1.0);
    NodeId loss = tape.sum_all(tape.add(weighted, ce));
    if (full_bce) {
        NodeId inv = tape.scale(tape.add_const(tape.scale(mn, -1.0), 1.0), 1.0);
        NodeId neg = tape.mul(inv, tape.log(tape.add_const(tape.scale(p, -1.0), 1.0)));
        loss = tape.add(loss, tape.sum_all(tape.scale(neg, -1.0)));
    }
    return loss;
}

void write_segmentation(const std::string& dir, int view,
                        const SegmentLabelMap& seg, const PlaneMask& mask) {
    const int w = seg.labels.width(), h = seg.labels.height();
    ImageGray ids(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            ids.at(x, y) = (seg.labels.at(x, y) % 256) / 255.0;
    write_pgm(dir + "/segments_" + std::to_string(view) + ".pgm", ids);

    std::vector<int> kept(seg.sizes.size(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask.at(x, y)) kept[seg.labels.at(x, y)] = 1;

    const std::string path = dir + "/segments_" + std::to_string(view) + ".txt";
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    for (int i = 0; i < seg.n_segments(); ++i)
        out << i << " " << seg.sizes[i] << " " << kept[i] << "\n";
}

}  // namespace sdfrecon
