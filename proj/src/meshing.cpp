#include "sdfrecon/meshing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sdfrecon {

namespace {

#include "mc_tables.inc"

// cube corner offsets, Lorensen-Cline numbering
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
// the two corners of each of the 12 cube edges
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                              {4, 5}, {5, 6}, {6, 7}, {7, 4},
                              {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

double TriangleMesh::area() const {
    double acc = 0;
    for (const auto& t : triangles)
        acc += 0.5 * (vertices[t[1]] - vertices[t[0]])
                         .cross(vertices[t[2]] - vertices[t[0]])
                         .norm();
    return acc;
}

TriangleMesh marching_cubes_grid(const std::vector<double>& values,
                                 const Vec3& lo, const Vec3& hi, int res) {
    if (res < 2) throw std::invalid_argument("marching_cubes: res >= 2");
    const int n = res + 1;
    if (static_cast<long>(values.size()) != static_cast<long>(n) * n * n)
        throw std::invalid_argument("marching_cubes: grid size mismatch");
    const Vec3 cell = (hi - lo) / res;
    auto val = [&](int x, int y, int z) {
        return values[x + static_cast<long>(n) * (y + static_cast<long>(n) * z)];
    };

    TriangleMesh mesh;
    // weld by global edge key: (grid point index, axis)
    std::map<std::pair<long, int>, int> edge_vertex;
    auto vertex_on_edge = [&](int cx, int cy, int cz, int e) {
        const int* a = kCorner[kEdge[e][0]];
        const int* b = kCorner[kEdge[e][1]];
        const int ax = cx + a[0], ay = cy + a[1], az = cz + a[2];
        const int bx = cx + b[0], by = cy + b[1], bz = cz + b[2];
        const long ia = ax + static_cast<long>(n) * (ay + static_cast<long>(n) * az);
        const long ib = bx + static_cast<long>(n) * (by + static_cast<long>(n) * bz);
        const int axis = ax != bx ? 0 : (ay != by ? 1 : 2);
        const auto key = std::make_pair(std::min(ia, ib), axis);
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        const double va = val(ax, ay, az), vb = val(bx, by, bz);
        double t = 0.5;
        if (std::abs(va - vb) > 1e-300) t = va / (va - vb);
        t = std::clamp(t, 0.0, 1.0);
        const Vec3 pa = lo + Vec3(ax * cell.x(), ay * cell.y(), az * cell.z());
        const Vec3 pb = lo + Vec3(bx * cell.x(), by * cell.y(), bz * cell.z());
        const int id = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(pa + t * (pb - pa));
        edge_vertex.emplace(key, id);
        return id;
    };

    for (int z = 0; z < res; ++z)
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) {
                int ci = 0;
                for (int c = 0; c < 8; ++c)
                    if (val(x + kCorner[c][0], y + kCorner[c][1],
                            z + kCorner[c][2]) < 0)
                        ci |= 1 << c;
                const int* row = kTriTable[ci];
                for (int t = 0; row[t] != -1; t += 3) {
                    const int i0 = vertex_on_edge(x, y, z, row[t]);
                    const int i1 = vertex_on_edge(x, y, z, row[t + 1]);
                    const int i2 = vertex_on_edge(x, y, z, row[t + 2]);
                    const double a =
                        0.5 * (mesh.vertices[i1] - mesh.vertices[i0])
                                  .cross(mesh.vertices[i2] - mesh.vertices[i0])
                                  .norm();
                    if (a < 1e-12) continue;
                    mesh.triangles.push_back({i0, i1, i2});
                }
            }
    return mesh;
}

TriangleMesh marching_cubes(const std::function<double(const Vec3&)>& sdf,
                            const Vec3& lo, const Vec3& hi, int res) {
    if (res < 2) throw std::invalid_argument("marching_cubes: res >= 2");
    const int n = res + 1;
    const Vec3 cell = (hi - lo) / res;
    std::vector<double> values(static_cast<long>(n) * n * n);
    long at = 0;
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                values[at++] =
                    sdf(lo + Vec3(x * cell.x(), y * cell.y(), z * cell.z()));
    return marching_cubes_grid(values, lo, hi, res);
}

TriangleMesh mesh_from_fields(const SceneFields& f, const Vec3& lo,
                              const Vec3& hi, int res) {
    const int n = res + 1;
    const Vec3 cell = (hi - lo) / res;
    std::vector<double> values(static_cast<long>(n) * n * n);
    const int chunk = 4096;
    const long total = static_cast<long>(n) * n * n;
    for (long start = 0; start < total; start += chunk) {
        const int m = static_cast<int>(std::min<long>(chunk, total - start));
        Mat pts(3, m);
        for (int i = 0; i < m; ++i) {
            const long idx = start + i;
            const int x = static_cast<int>(idx % n);
            const int y = static_cast<int>((idx / n) % n);
            const int z = static_cast<int>(idx / (static_cast<long>(n) * n));
            pts.col(i) = lo + Vec3(x * cell.x(), y * cell.y(), z * cell.z());
        }
        Tape tape(&f.params);
        GeoNodes g = geo_graph(tape, f, tape.constant(pts));
        const Mat& s = tape.value(g.sdf);
        for (int i = 0; i < m; ++i) values[start + i] = s(0, i);
    }
    return marching_cubes_grid(values, lo, hi, res);
}

std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, int n_points,
                                      Rng& rng) {
    if (mesh.empty())
        throw std::invalid_argument("sample_mesh_surface: empty mesh");
    if (n_points <= 0)
        throw std::invalid_argument("sample_mesh_surface: n_points > 0");
    std::vector<double> cum(mesh.triangles.size());
    double total = 0;
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        total += 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                           .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]])
                           .norm();
        cum[i] = total;
    }
    std::vector<Vec3> out;
    out.reserve(n_points);
    for (int i = 0; i < n_points; ++i) {
        const double r = rng.uniform() * total;
        const std::size_t ti =
            std::lower_bound(cum.begin(), cum.end(), r) - cum.begin();
        const auto& t = mesh.triangles[std::min(ti, cum.size() - 1)];
        double u = rng.uniform(), v = rng.uniform();
        if (u + v > 1) {
            u = 1 - u;
            v = 1 - v;
        }
        out.push_back(mesh.vertices[t[0]] +
                      u * (mesh.vertices[t[1]] - mesh.vertices[t[0]]) +
                      v * (mesh.vertices[t[2]] - mesh.vertices[t[0]]));
    }
    return out;
}

namespace {

// Uniform hash grid over the target cloud. Queries expand in rings until the
// best candidate provably beats every unvisited cell, so results equal brute
// force exactly.
class NearestGrid {
  public:
    explicit NearestGrid(const std::vector<Vec3>& pts) : pts_(pts) {
        lo_ = hi_ = pts[0];
        for (const Vec3& p : pts) {
            lo_ = lo_.cwiseMin(p);
            hi_ = hi_.cwiseMax(p);
        }
        const double diag = (hi_ - lo_).norm();
        cell_ = std::max(diag / 64.0, 1e-9);
        for (int k = 0; k < 3; ++k)
            dims_[k] = static_cast<int>((hi_[k] - lo_[k]) / cell_) + 1;
        cells_.resize(static_cast<long>(dims_[0]) * dims_[1] * dims_[2]);
        for (int i = 0; i < static_cast<int>(pts.size()); ++i)
            cells_[cell_of(pts[i])].push_back(i);
    }

    double nearest_distance(const Vec3& q) const {
        int cx = coord(q, 0), cy = coord(q, 1), cz = coord(q, 2);
        double best = std::numeric_limits<double>::infinity();
        for (int ring = 0;; ++ring) {
            // once every cell in the ring is farther than `best`, stop
            if (ring > 0 && best <= (ring - 1) * cell_) break;
            bool any = false;
            for (int dz = -ring; dz <= ring; ++dz)
                for (int dy = -ring; dy <= ring; ++dy)
                    for (int dx = -ring; dx <= ring; ++dx) {
                        if (std::max({std::abs(dx), std::abs(dy),
                                      std::abs(dz)}) != ring)
                            continue;
                        const int x = cx + dx, y = cy + dy, z = cz + dz;
                        if (x < 0 || x >= dims_[0] || y < 0 || y >= dims_[1] ||
                            z < 0 || z >= dims_[2])
                            continue;
                        any = true;
                        for (int i : cells_[x + static_cast<long>(dims_[0]) *
                                                    (y + static_cast<long>(
                                                             dims_[1]) *
                                                             z)])
                            best = std::min(best, (pts_[i] - q).norm());
                    }
            // the clamped center lies inside the grid box, so nonempty rings
            // are contiguous: the first empty one ends the search
            if (ring > 0 && !any) break;
        }
        return best;
    }

  private:
    int coord(const Vec3& p, int k) const {
        return std::clamp(static_cast<int>((p[k] - lo_[k]) / cell_), 0,
                          dims_[k] - 1);
    }
    long cell_of(const Vec3& p) const {
        return coord(p, 0) +
               static_cast<long>(dims_[0]) *
                   (coord(p, 1) + static_cast<long>(dims_[1]) * coord(p, 2));
    }

    const std::vector<Vec3>& pts_;
    Vec3 lo_, hi_;
    double cell_ = 1;
    int dims_[3] = {1, 1, 1};
    std::vector<std::vector<int>> cells_;
};

}  // namespace

MetricsReport eval_metrics(const std::vector<Vec3>& pred,
                           const std::vector<Vec3>& gt, double tau) {
    if (pred.empty() || gt.empty())
        throw std::invalid_argument("eval_metrics: empty point cloud");
    if (!(tau > 0)) throw std::invalid_argument("eval_metrics: tau > 0");
    MetricsReport m;
    m.tau = tau;
    m.n_pred = static_cast<int>(pred.size());
    m.n_gt = static_cast<int>(gt.size());

    NearestGrid to_gt(gt), to_pred(pred);
    long hits = 0;
    for (const Vec3& p : pred) {
        const double d = to_gt.nearest_distance(p);
        m.accuracy += d;
        hits += d < tau ? 1 : 0;
    }
    m.accuracy /= m.n_pred;
    m.precision = static_cast<double>(hits) / m.n_pred;
    hits = 0;
    for (const Vec3& p : gt) {
        const double d = to_pred.nearest_distance(p);
        m.completeness += d;
        hits += d < tau ? 1 : 0;
    }
    m.completeness /= m.n_gt;
    m.recall = static_cast<double>(hits) / m.n_gt;
    m.f_score = m.precision + m.recall > 0
                    ? 2 * m.precision * m.recall / (m.precision + m.recall)
                    : 0;
    return m;
}

std::string metrics_csv(const MetricsReport& m) {
    std::ostringstream ss;
    ss.precision(10);
    ss << "accuracy,completeness,precision,recall,f_score,tau,n_pred,n_gt\n"
       << m.accuracy << "," << m.completeness << "," << m.precision << ","
       << m.recall << "," << m.f_score << "," << m.tau << "," << m.n_pred
       << "," << m.n_gt << "\n";
    return ss.str();
}

std::string metrics_pretty(const MetricsReport& m) {
    std::ostringstream ss;
    ss.precision(4);
    ss << "accuracy     " << m.accuracy << "\ncompleteness " << m.completeness
       << "\nprecision    " << m.precision << "\nrecall       " << m.recall
       << "\nf-score      " << m.f_score << "\n(tau " << m.tau << ", "
       << m.n_pred << " pred / " << m.n_gt << " gt samples)\n";
    return ss.str();
}

void write_obj(const std::string& path, const TriangleMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.precision(17);
    for (const Vec3& v : mesh.vertices)
        out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
    for (const auto& t : mesh.triangles)
        out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
}

TriangleMesh read_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    TriangleMesh mesh;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ss >> v.x() >> v.y() >> v.z()))
                throw std::runtime_error(path + ": line " +
                                         std::to_string(lineno) +
                                         ": bad vertex");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> t;
            for (int k = 0; k < 3; ++k) {
                std::string tok;
                if (!(ss >> tok))
                    throw std::runtime_error(path + ": line " +
                                             std::to_string(lineno) +
                                             ": bad face");
                t[k] = std::stoi(tok) - 1;  // ignores /vt/vn suffixes
                if (t[k] < 0)
                    throw std::runtime_error(path + ": line " +
                                             std::to_string(lineno) +
                                             ": face index out of range");
            }
            mesh.triangles.push_back(t);
        }
    }
    for (const auto& t : mesh.triangles)
        for (int k : t)
            if (k >= static_cast<int>(mesh.vertices.size()))
                throw std::runtime_error(path + ": face index out of range");
    return mesh;
}

}  // namespace sdfrecon
