#include "sdfrecon/sparse_depth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace sdfrecon {

namespace {

constexpr int kPatch = 11;
constexpr int kPatchHalf = kPatch / 2;

ImageGray smooth3(const ImageGray& in) {
    // separable binomial [1 2 1]/4, clamped borders
    const int w = in.width(), h = in.height();
    ImageGray tmp(w, h), out(w, h);
    auto cx = [&](int x) { return std::clamp(x, 0, w - 1); };
    auto cy = [&](int y) { return std::clamp(y, 0, h - 1); };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            tmp.at(x, y) = 0.25 * in.at(cx(x - 1), y) + 0.5 * in.at(x, y) +
                           0.25 * in.at(cx(x + 1), y);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = 0.25 * tmp.at(x, cy(y - 1)) + 0.5 * tmp.at(x, y) +
                           0.25 * tmp.at(x, cy(y + 1));
    return out;
}

}  // namespace

std::vector<FeaturePoint> detect_corners(const ImageGray& img, int max_points,
                                         int nms_radius) {
    if (img.empty()) throw std::invalid_argument("detect_corners: empty image");
    const int w = img.width(), h = img.height();
    if (w < kPatch || h < kPatch) {
        std::cerr << "detect_corners: image " << w << "x" << h
                  << " smaller than the " << kPatch << "x" << kPatch
                  << " descriptor patch, no features\n";
        return {};
    }

    // central-difference gradients
    ImageGray ix(w, h), iy(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
            const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
            ix.at(x, y) = 0.5 * (img.at(xp, y) - img.at(xm, y));
            iy.at(x, y) = 0.5 * (img.at(x, yp) - img.at(x, ym));
        }
    ImageGray xx(w, h), yy(w, h), xy(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            xx.at(x, y) = ix.at(x, y) * ix.at(x, y);
            yy.at(x, y) = iy.at(x, y) * iy.at(x, y);
            xy.at(x, y) = ix.at(x, y) * iy.at(x, y);
        }
    xx = smooth3(smooth3(xx));
    yy = smooth3(smooth3(yy));
    xy = smooth3(smooth3(xy));

    ImageGray resp(w, h);
    double max_resp = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double a = xx.at(x, y), b = xy.at(x, y), c = yy.at(x, y);
            const double det = a * c - b * b, tr = a + c;
            resp.at(x, y) = det - 0.04 * tr * tr;
            max_resp = std::max(max_resp, resp.at(x, y));
        }
    const double thresh = std::max(1e-4 * max_resp, 1e-12);

    struct Cand {
        int x, y;
        double r;
    };
    std::vector<Cand> cands;
    for (int y = kPatchHalf; y < h - kPatchHalf; ++y)
        for (int x = kPatchHalf; x < w - kPatchHalf; ++x)
            if (resp.at(x, y) > thresh) cands.push_back({x, y, resp.at(x, y)});
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.r > b.r; });

    ImageGray taken(w, h, 0.0);
    std::vector<FeaturePoint> out;
    for (const Cand& c : cands) {
        if (static_cast<int>(out.size()) >= max_points) break;
        bool blocked = false;
        for (int dy = -nms_radius; dy <= nms_radius && !blocked; ++dy)
            for (int dx = -nms_radius; dx <= nms_radius && !blocked; ++dx) {
                const int nx = c.x + dx, ny = c.y + dy;
                if (taken.contains(nx, ny) && taken.at(nx, ny) > 0) blocked = true;
            }
        if (blocked) continue;

        // one-dimensional parabola refinement per axis
        auto refine = [&](double rm, double r0, double rp) {
            const double den = rm - 2 * r0 + rp;
            if (std::abs(den) < 1e-300) return 0.0;
            return std::clamp(0.5 * (rm - rp) / den, -0.5, 0.5);
        };
        const double du = refine(resp.at(c.x - 1, c.y), c.r, resp.at(c.x + 1, c.y));
        const double dv = refine(resp.at(c.x, c.y - 1), c.r, resp.at(c.x, c.y + 1));

        Eigen::VectorXd desc(kPatch * kPatch);
        int at = 0;
        for (int dy = -kPatchHalf; dy <= kPatchHalf; ++dy)
            for (int dx = -kPatchHalf; dx <= kPatchHalf; ++dx)
                desc[at++] = img.at(c.x + dx, c.y + dy);
        desc.array() -= desc.mean();
        const double n = desc.norm();
        if (n < 1e-12) continue;  // flat patch carries no signal
        desc /= n;

        out.push_back({c.x + du, c.y + dv, c.r, desc});
        taken.at(c.x, c.y) = 1.0;
    }
    return out;
}

std::vector<Correspondence> match_features(const std::vector<FeaturePoint>& a,
                                           const std::vector<FeaturePoint>& b,
                                           int view_a, int view_b) {
    const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
    std::vector<Correspondence> out;
    if (na == 0 || nb == 0) return out;

    // NCC distance 1 - dot; descriptors are unit vectors
    auto dist = [&](int i, int j) { return 1.0 - a[i].desc.dot(b[j].desc); };
    std::vector<int> best_ab(na, -1), best_ba(nb, -1);
    std::vector<double> d1(na), d2(na);
    for (int i = 0; i < na; ++i) {
        double b1 = 1e300, b2 = 1e300;
        int arg = -1;
        for (int j = 0; j < nb; ++j) {
            const double d = dist(i, j);
            if (d < b1) {
                b2 = b1;
                b1 = d;
                arg = j;
            } else if (d < b2) {
                b2 = d;
            }
        }
        best_ab[i] = arg;
        d1[i] = b1;
        d2[i] = b2;
    }
    for (int j = 0; j < nb; ++j) {
        double b1 = 1e300;
        int arg = -1;
        for (int i = 0; i < na; ++i) {
            const double d = dist(i, j);
            if (d < b1) {
                b1 = d;
                arg = i;
            }
        }
        best_ba[j] = arg;
    }
    for (int i = 0; i < na; ++i) {
        const int j = best_ab[i];
        if (j < 0 || best_ba[j] != i) continue;
        if (nb > 1 && !(d1[i] < 0.9 * d2[i])) continue;
        out.push_back({view_a, view_b, a[i].u, a[i].v, b[j].u, b[j].v,
                       1.0 - d1[i]});
    }
    return out;
}

std::vector<Correspondence> match_views(const std::vector<ImageGray>& images,
                                        int max_points, int nms_radius,
                                        int adjacency) {
    const int n = static_cast<int>(images.size());
    std::vector<std::vector<FeaturePoint>> feats(n);
    for (int i = 0; i < n; ++i)
        feats[i] = detect_corners(images[i], max_points, nms_radius);
    std::vector<Correspondence> out;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j <= std::min(n - 1, i + adjacency); ++j) {
            auto m = match_features(feats[i], feats[j], i, j);
            out.insert(out.end(), m.begin(), m.end());
        }
    return out;
}

SparseDepthMap triangulate_matches(const std::vector<Correspondence>& matches,
                                   const std::vector<CameraModel>& cams,
                                   double max_gap) {
    SparseDepthMap map;
    map.views.resize(cams.size());
    const int n_views = static_cast<int>(cams.size());
    for (const Correspondence& m : matches) {
        if (m.view_a < 0 || m.view_a >= n_views || m.view_b < 0 ||
            m.view_b >= n_views)
            throw std::invalid_argument("triangulate_matches: unknown view id");
        Ray ra = pixel_to_ray(cams[m.view_a], m.ua, m.va);
        Ray rb = pixel_to_ray(cams[m.view_b], m.ub, m.vb);
        RayPairIntersection r = closest_points_between_rays(ra, rb);
        if (r.parallel) {
            ++map.n_parallel;
            continue;
        }
        if (r.t1 <= 0 || r.t2 <= 0) {
            ++map.n_behind;
            continue;
        }
        if (r.gap > max_gap) {
            ++map.n_wide_gap;
            continue;
        }
        map.views[m.view_a].push_back({m.ua, m.va, r.t1, r.gap});
        map.views[m.view_b].push_back({m.ub, m.vb, r.t2, r.gap});
        ++map.n_kept;
    }
    return map;
}

double geometry_loss(const std::vector<double>& d_hat,
                     const std::vector<double>& d_app) {
    if (d_hat.size() != d_app.size())
        throw std::invalid_argument("geometry_loss: length mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < d_hat.size(); ++i)
        acc += std::abs(d_hat[i] - d_app[i]);
    return acc;
}

void write_matches(const std::string& path,
                   const std::vector<Correspondence>& matches) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << std::setprecision(17);
    for (const auto& m : matches)
        out << m.view_a << " " << m.view_b << " " << m.ua << " " << m.va << " "
            << m.ub << " " << m.vb << "\n";
}

std::vector<Correspondence> read_matches(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::vector<Correspondence> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        Correspondence m;
        if (!(ss >> m.view_a >> m.view_b >> m.ua >> m.va >> m.ub >> m.vb))
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": expected 'viewA viewB uA vA uB vB'");
        out.push_back(m);
    }
    return out;
}

void write_sparse_depth(const std::string& dir, const SparseDepthMap& map) {
    for (std::size_t v = 0; v < map.views.size(); ++v) {
        const std::string path = dir + "/sparse_" + std::to_string(v) + ".txt";
        std::ofstream out(path);
        if (!out) throw std::runtime_error(path + ": cannot open for writing");
        out << std::setprecision(17);
        for (const auto& r : map.views[v])
            out << r.u << " " << r.v << " " << r.d_app << " " << r.gap << "\n";
    }
}

SparseDepthMap read_sparse_depth(const std::string& dir, int n_views) {
    SparseDepthMap map;
    map.views.resize(n_views);
    for (int v = 0; v < n_views; ++v) {
        const std::string path = dir + "/sparse_" + std::to_string(v) + ".txt";
        std::ifstream in(path);
        if (!in) throw std::runtime_error(path + ": cannot open");
        SparseDepthRecord r;
        while (in >> r.u >> r.v >> r.d_app >> r.gap) map.views[v].push_back(r);
        map.n_kept += static_cast<int>(map.views[v].size());
    }
    map.n_kept /= 2;  // every accepted match contributed two records
    return map;
}

}  // namespace sdfrecon
