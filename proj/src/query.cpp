#include "sensegram/query.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "sensegram/error.hpp"
#include "sensegram/lexicon.hpp"
#include "sensegram/rng.hpp"
#include "sensegram/vec_math.hpp"

namespace sensegram {

namespace {

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw UsageError("cosine: dimension mismatch");
    const double na = std::sqrt(vec::dot(a, a));
    const double nb = std::sqrt(vec::dot(b, b));
    if (na == 0.0 || nb == 0.0) throw UsageError("cosine: zero vector");
    return std::clamp(vec::dot(a, b) / (na * nb), -1.0, 1.0);
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

bool neighbor_before(const Neighbor& a, const Neighbor& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.label < b.label;
}

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }

VectorStore::VectorStore(LabeledVectors vectors) : vectors_(std::move(vectors)) {
    norms_.resize(vectors_.size());
    index_.reserve(vectors_.size());
    for (std::size_t i = 0; i < vectors_.size(); ++i) {
        norms_[i] = std::sqrt(vec::dot(vectors_.row(i), vectors_.row(i)));
        if (!index_.emplace(vectors_.labels[i], i).second)
            throw DataError("duplicate vector label '" + vectors_.labels[i] + "'");
    }
}

std::optional<std::size_t> VectorStore::find(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> VectorStore::suggestions(std::string_view label, std::size_t limit) const {
    std::vector<std::pair<std::size_t, std::string_view>> scored;
    scored.reserve(vectors_.size());
    for (const auto& l : vectors_.labels) scored.emplace_back(edit_distance(label, l), l);
    const auto keep = std::min(limit, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < keep; ++i) out.emplace_back(scored[i].second);
    return out;
}

std::size_t VectorStore::require(std::string_view label) const {
    if (auto i = find(label)) return *i;
    std::string msg = "unknown label '" + std::string(label) + "'";
    const auto close = suggestions(label);
    if (!close.empty()) {
        msg += "; closest matches:";
        for (const auto& c : close) msg += " " + c;
    }
    throw UsageError(msg);
}

std::string label_word(std::string_view label) {
    if (auto parts = split_sense_label(label)) return parts->first;
    return std::string(label);
}

NeighborResult nearest_neighbors(std::string_view label, std::size_t k, const VectorStore& store,
                                 const NeighborOptions& options) {
    const std::size_t q = store.require(label);
    NeighborResult out;
    out.query = std::string(label);
    if (k == 0) return out;
    if (store.norm(q) == 0.0) throw UsageError("query '" + out.query + "' has a zero vector");
    const std::string word = label_word(label);
    const auto qrow = store.row(q);
    std::vector<Neighbor> all;
    all.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        if (i == q || store.norm(i) == 0.0) continue;
        if (!options.include_own_senses && label_word(store.label(i)) == word) continue;
        const double sim = vec::dot(qrow, store.row(i)) / (store.norm(q) * store.norm(i));
        all.push_back({store.label(i), std::clamp(sim, -1.0, 1.0)});
    }
    const auto keep = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), neighbor_before);
    all.resize(keep);
    out.neighbors = std::move(all);
    return out;
}

std::optional<DistanceMetric> parse_metric(std::string_view name) {
    if (name == "euclidean") return DistanceMetric::euclidean;
    if (name == "cosine") return DistanceMetric::cosine;
    return std::nullopt;
}

namespace {

/// Cyclic Jacobi eigendecomposition of a small dense symmetric matrix.
/// Returns eigenvalues descending with matching eigenvector columns in `vectors` (row-major p x p).
void jacobi_eigen(std::vector<double> a, std::size_t p, std::vector<double>& values, std::vector<double>& vectors) {
    std::vector<double> v(p * p, 0.0);
    for (std::size_t i = 0; i < p; ++i) v[i * p + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j) (i == j ? diag : off) += a[i * p + j] * a[i * p + j];
        if (off <= 1e-30 * diag || off == 0.0) break;
        for (std::size_t r = 0; r + 1 < p; ++r) {
            for (std::size_t c = r + 1; c < p; ++c) {
                const double arc = a[r * p + c];
                if (arc == 0.0) continue;
                const double theta = (a[c * p + c] - a[r * p + r]) / (2.0 * arc);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double cs = 1.0 / std::sqrt(t * t + 1.0), sn = t * cs;
                for (std::size_t k = 0; k < p; ++k) {
                    const double akr = a[k * p + r], akc = a[k * p + c];
                    a[k * p + r] = cs * akr - sn * akc;
                    a[k * p + c] = sn * akr + cs * akc;
                }
                for (std::size_t k = 0; k < p; ++k) {
                    const double ark = a[r * p + k], ack = a[c * p + k];
                    a[r * p + k] = cs * ark - sn * ack;
                    a[c * p + k] = sn * ark + cs * ack;
                }
                for (std::size_t k = 0; k < p; ++k) {
                    const double vkr = v[k * p + r], vkc = v[k * p + c];
                    v[k * p + r] = cs * vkr - sn * vkc;
                    v[k * p + c] = sn * vkr + cs * vkc;
                }
            }
        }
    }
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x * p + x] > a[y * p + y]; });
    values.resize(p);
    vectors.assign(p * p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        values[j] = a[order[j] * p + order[j]];
        for (std::size_t k = 0; k < p; ++k) vectors[k * p + j] = v[k * p + order[j]];
    }
}

/// Modified Gram-Schmidt over the columns of an n x p column-major block.
/// Columns that collapse are replaced by fresh random directions.
void orthonormalize(std::vector<double>& q, std::size_t n, std::size_t p, Rng& rng) {
    for (std::size_t j = 0; j < p; ++j) {
        double* col = q.data() + j * n;
        for (int attempt = 0; attempt < 4; ++attempt) {
            const double before = std::sqrt(vec::dot(std::span<const double>(col, n), std::span<const double>(col, n)));
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t i = 0; i < j; ++i) {
                    const double* prev = q.data() + i * n;
                    const double d = vec::dot(std::span<const double>(prev, n), std::span<const double>(col, n));
                    for (std::size_t r = 0; r < n; ++r) col[r] -= d * prev[r];
                }
            }
            const double norm = std::sqrt(vec::dot(std::span<const double>(col, n), std::span<const double>(col, n)));
            if (norm > 1e-10 * before && norm > 0.0) {
                for (std::size_t r = 0; r < n; ++r) col[r] /= norm;
                break;
            }
            for (std::size_t r = 0; r < n; ++r) col[r] = rng.uniform() - 0.5;
        }
    }
}

}  // namespace

Eigenpairs top_eigenpairs(std::span<const double> matrix, std::size_t n, std::size_t count, double tol,
                          std::size_t max_iterations) {
    if (matrix.size() != n * n) throw UsageError("top_eigenpairs: matrix is not n x n");
    if (count == 0 || count > n) throw UsageError("top_eigenpairs: bad eigenpair count");
    Eigenpairs out;
    const std::size_t p = std::min(n, count + 4);
    Rng rng(0x5EED5EEDULL);
    std::vector<double> q(n * p), z(n * p), qr(n * p), zr(n * p), h(p * p), theta, w;
    for (auto& x : q) x = rng.uniform() - 0.5;
    orthonormalize(q, n, p, rng);
    double scale = 0.0;
    for (double x : matrix) scale = std::max(scale, std::abs(x));
    auto multiply = [&](const std::vector<double>& in, std::vector<double>& res) {
        for (std::size_t j = 0; j < p; ++j) {
            const std::span<const double> col(in.data() + j * n, n);
            for (std::size_t r = 0; r < n; ++r) res[j * n + r] = vec::dot(matrix.subspan(r * n, n), col);
        }
    };
    for (std::size_t it = 1; it <= max_iterations; ++it) {
        multiply(q, z);
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < p; ++b)
                h[a * p + b] = vec::dot(std::span<const double>(q.data() + a * n, n),
                                        std::span<const double>(z.data() + b * n, n));
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = a + 1; b < p; ++b) h[a * p + b] = h[b * p + a] = 0.5 * (h[a * p + b] + h[b * p + a]);
        jacobi_eigen(h, p, theta, w);
        std::fill(qr.begin(), qr.end(), 0.0);
        std::fill(zr.begin(), zr.end(), 0.0);
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t k = 0; k < p; ++k) {
                const double coef = w[k * p + j];
                for (std::size_t r = 0; r < n; ++r) {
                    qr[j * n + r] += coef * q[k * n + r];
                    zr[j * n + r] += coef * z[k * n + r];
                }
            }
        double worst = 0.0;
        for (std::size_t j = 0; j < count; ++j) {
            double res = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double d = zr[j * n + r] - theta[j] * qr[j * n + r];
                res += d * d;
            }
            worst = std::max(worst, std::sqrt(res));
        }
        const double ref = std::max(std::abs(theta[0]), scale * 1e-300);
        out.iterations = it;
        if (worst <= tol * ref || p == n || scale == 0.0) {
            // With p == n the Rayleigh-Ritz step is the full decomposition.
            q = qr;
            break;
        }
        q = zr;
        orthonormalize(q, n, p, rng);
    }
    out.values.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(count));
    for (std::size_t j = 0; j < count; ++j) {
        std::vector<double> v(q.begin() + static_cast<std::ptrdiff_t>(j * n),
                              q.begin() + static_cast<std::ptrdiff_t>((j + 1) * n));
        const double norm = std::sqrt(vec::dot(std::span<const double>(v), std::span<const double>(v)));
        if (norm > 0) for (auto& x : v) x /= norm;
        out.vectors.push_back(std::move(v));
    }
    return out;
}

std::vector<double> double_center(std::span<const double> d2, std::size_t n) {
    std::vector<double> row_mean(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) row_mean[i] += d2[i * n + j];
        grand += row_mean[i];
        row_mean[i] /= static_cast<double>(n);
    }
    grand /= static_cast<double>(n * n);
    std::vector<double> b(n * n);
    // D2 is symmetric, so column means equal row means.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) b[i * n + j] = -0.5 * (d2[i * n + j] - row_mean[i] - row_mean[j] + grand);
    return b;
}

Projection2D classical_mds_2d(std::span<const double> d2, std::size_t n, std::span<const std::string> labels) {
    if (n < 2) throw UsageError("projection needs at least 2 points");
    if (labels.size() != n) throw UsageError("projection: label count mismatch");
    const auto b = double_center(d2, n);
    const auto eig = top_eigenpairs(b, n, 2);
    Projection2D out;
    out.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.points[i].label = labels[i];
    const double top = std::max(std::abs(eig.values[0]), 0.0);
    std::size_t positive = 0;
    for (int axis = 0; axis < 2; ++axis) {
        const double lambda = eig.values[static_cast<std::size_t>(axis)];
        out.eigenvalues[axis] = lambda;
        if (!(lambda > 1e-12 * top) || lambda <= 0.0) continue;
        ++positive;
        const double root = std::sqrt(lambda);
        std::vector<double> coord(n);
        for (std::size_t i = 0; i < n; ++i) coord[i] = eig.vectors[static_cast<std::size_t>(axis)][i] * root;
        const double tiny = 1e-12 * root;
        for (double c : coord)
            if (std::abs(c) > tiny) {
                if (c < 0)
                    for (auto& x : coord) x = -x;
                break;
            }
        for (std::size_t i = 0; i < n; ++i) (axis == 0 ? out.points[i].x : out.points[i].y) = coord[i];
    }
    if (positive < 2)
        out.warnings.push_back("only " + std::to_string(positive) +
                               " positive eigenvalue(s); remaining coordinates set to zero");
    return out;
}

Projection2D project_2d(std::span<const std::string> labels, const VectorStore& store, DistanceMetric metric) {
    const std::size_t n = labels.size();
    if (n < 2 || n > 1000) throw UsageError("projection needs between 2 and 1000 labels, got " + std::to_string(n));
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = store.require(labels[i]);
    std::vector<double> d2(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double d = 0.0;
            const auto a = store.row(rows[i]), b = store.row(rows[j]);
            if (metric == DistanceMetric::euclidean) {
                for (std::size_t k = 0; k < a.size(); ++k) {
                    const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
                    d += diff * diff;
                }
            } else {
                const double dist = 1.0 - cosine(a, b);
                d = dist * dist;
            }
            d2[i * n + j] = d2[j * n + i] = d;
        }
    }
    return classical_mds_2d(d2, n, labels);
}

void write_projection_tsv(const Projection2D& projection, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    char buf[64];
    for (const auto& p : projection.points) {
        std::snprintf(buf, sizeof buf, "\t%.9g\t%.9g\n", p.x, p.y);
        out << p.label << buf;
    }
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

namespace {
std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}
}  // namespace

void write_projection_svg(const Projection2D& projection, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
    for (const auto& p : projection.points) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    const double size = 800.0, margin = 60.0;
    const double span = std::max({max_x - min_x, max_y - min_y, 1e-12});
    auto sx = [&](double x) { return margin + (x - min_x) / span * (size - 2 * margin); };
    auto sy = [&](double y) { return size - margin - (y - min_y) / span * (size - 2 * margin); };
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    char buf[160];
    for (const auto& p : projection.points) {
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"black\"/>\n", sx(p.x), sy(p.y));
        out << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" font-family=\"sans-serif\">",
                      sx(p.x) + 5, sy(p.y) - 5);
        out << buf << xml_escape(p.label) << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace sensegram
