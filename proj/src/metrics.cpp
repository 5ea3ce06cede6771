#include "a2/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace a2 {

double auc(const std::vector<double>& scores, const std::vector<double>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("auc: scores/labels length mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (double y : labels) n_pos += y > 0.5 ? 1 : 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("auc: undefined for single-class labels");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over tie groups
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]] > 0.5) rank_sum_pos += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double logloss(const std::vector<double>& probs, const std::vector<double>& labels) {
    if (probs.size() != labels.size())
        throw std::invalid_argument("logloss: probs/labels length mismatch");
    constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], lo, hi);
        acc -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
    }
    return acc / static_cast<double>(probs.size());
}

namespace {

// contingency table with dense relabeling of both sides
struct Contingency {
    std::vector<std::vector<std::size_t>> counts;  // [cluster][label]
    std::vector<std::size_t> row_tot, col_tot;
    std::size_t n = 0;
};

Contingency contingency(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("partition metric: length mismatch");
    std::map<int, std::size_t> amap, bmap;
    for (int v : a) amap.emplace(v, amap.size());
    for (int v : b) bmap.emplace(v, bmap.size());
    Contingency c;
    c.counts.assign(amap.size(), std::vector<std::size_t>(bmap.size(), 0));
    c.row_tot.assign(amap.size(), 0);
    c.col_tot.assign(bmap.size(), 0);
    c.n = a.size();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t r = amap[a[i]], col = bmap[b[i]];
        ++c.counts[r][col];
        ++c.row_tot[r];
        ++c.col_tot[col];
    }
    return c;
}

double entropy(const std::vector<std::size_t>& tot, std::size_t n) {
    double h = 0.0;
    for (std::size_t c : tot) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(n);
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace

double nmi(const std::vector<int>& assignments, const std::vector<int>& truth) {
    const Contingency c = contingency(assignments, truth);
    const double ha = entropy(c.row_tot, c.n);
    const double hb = entropy(c.col_tot, c.n);
    if (ha == 0.0 || hb == 0.0) return 0.0;
    double mi = 0.0;
    const double nd = static_cast<double>(c.n);
    for (std::size_t r = 0; r < c.counts.size(); ++r)
        for (std::size_t s = 0; s < c.counts[r].size(); ++s) {
            const std::size_t cnt = c.counts[r][s];
            if (cnt == 0) continue;
            const double pij = static_cast<double>(cnt) / nd;
            const double pi = static_cast<double>(c.row_tot[r]) / nd;
            const double pj = static_cast<double>(c.col_tot[s]) / nd;
            mi += pij * std::log(pij / (pi * pj));
        }
    return mi / ((ha + hb) / 2.0);
}

double cluster_accuracy(const std::vector<int>& assignments, const std::vector<int>& truth) {
    Contingency c = contingency(assignments, truth);
    const std::size_t R = c.counts.size();
    std::size_t L = c.counts.empty() ? 0 : c.counts[0].size();
    if (R > 16 || L > 16)
        throw std::invalid_argument("cluster_accuracy: more than 16 clusters");
    // pad labels so an injective cluster->label mapping always exists
    const std::size_t cols = std::max(R, L);
    for (auto& row : c.counts) row.resize(cols, 0);
    // bitmask DP over label columns; maximize matched count
    std::vector<std::size_t> dp(std::size_t{1} << cols, 0);
    std::vector<bool> seen(std::size_t{1} << cols, false);
    seen[0] = true;
    for (std::size_t r = 0; r < R; ++r) {
        std::vector<std::size_t> next(dp.size(), 0);
        std::vector<bool> nseen(dp.size(), false);
        for (std::size_t mask = 0; mask < dp.size(); ++mask) {
            if (!seen[mask]) continue;
            for (std::size_t col = 0; col < cols; ++col) {
                if (mask & (std::size_t{1} << col)) continue;
                const std::size_t nm = mask | (std::size_t{1} << col);
                const std::size_t v = dp[mask] + c.counts[r][col];
                if (!nseen[nm] || v > next[nm]) {
                    next[nm] = v;
                    nseen[nm] = true;
                }
            }
        }
        dp.swap(next);
        seen.swap(nseen);
    }
    std::size_t best = 0;
    for (std::size_t mask = 0; mask < dp.size(); ++mask)
        if (seen[mask]) best = std::max(best, dp[mask]);
    return static_cast<double>(best) / static_cast<double>(c.n);
}

namespace {

// Jacobi eigendecomposition of a small symmetric matrix; returns eigenvalues
// (descending) and column eigenvectors.
void jacobi_eigen(std::vector<std::vector<double>> A, std::vector<double>& eigvals,
                  std::vector<std::vector<double>>& eigvecs) {
    const std::size_t n = A.size();
    eigvecs.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) eigvecs[i][i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += A[p][q] * A[p][q];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(A[p][q]) < 1e-300) continue;
                const double theta = (A[q][q] - A[p][p]) / (2.0 * A[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double cth = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * cth;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = A[i][p], aiq = A[i][q];
                    A[i][p] = cth * aip - s * aiq;
                    A[i][q] = s * aip + cth * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = A[p][i], aqi = A[q][i];
                    A[p][i] = cth * api - s * aqi;
                    A[q][i] = s * api + cth * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = eigvecs[i][p], viq = eigvecs[i][q];
                    eigvecs[i][p] = cth * vip - s * viq;
                    eigvecs[i][q] = s * vip + cth * viq;
                }
            }
    }
    eigvals.resize(n);
    for (std::size_t i = 0; i < n; ++i) eigvals[i] = A[i][i];
    // sort descending, reordering eigenvector columns
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return eigvals[a] > eigvals[b]; });
    std::vector<double> ev(n);
    std::vector<std::vector<double>> vecs(n, std::vector<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
        ev[j] = eigvals[order[j]];
        for (std::size_t i = 0; i < n; ++i) vecs[i][j] = eigvecs[i][order[j]];
    }
    eigvals = std::move(ev);
    eigvecs = std::move(vecs);
}

}  // namespace

ProjectionResult pca_project(const Tensor& vectors, std::size_t out_dim) {
    const std::size_t n = vectors.rows(), d = vectors.cols();
    if (n < out_dim) throw std::invalid_argument("pca_project: need at least out_dim samples");
    if (out_dim > d) throw std::invalid_argument("pca_project: out_dim exceeds vector width");

    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += vectors.at(i, j);
    for (double& m : mean) m /= static_cast<double>(n);

    ProjectionResult res;
    res.coords = Tensor({n, out_dim});

    bool all_same = true;
    for (std::size_t i = 0; i < n && all_same; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (vectors.at(i, j) != vectors.at(0, j)) {
                all_same = false;
                break;
            }
    if (all_same) {
        res.degenerate = true;
        return res;  // all-zero coordinates
    }

    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a) {
            const double va = vectors.at(i, a) - mean[a];
            for (std::size_t b = a; b < d; ++b)
                cov[a][b] += va * (vectors.at(i, b) - mean[b]);
        }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            cov[a][b] /= static_cast<double>(n);
            cov[b][a] = cov[a][b];
        }

    std::vector<double> eigvals;
    std::vector<std::vector<double>> eigvecs;
    jacobi_eigen(cov, eigvals, eigvecs);

    for (std::size_t c = 0; c < out_dim; ++c) {
        // fixed sign: first component of magnitude > tiny is positive
        double lead = 0.0;
        for (std::size_t i = 0; i < d; ++i)
            if (std::abs(eigvecs[i][c]) > 1e-12) {
                lead = eigvecs[i][c];
                break;
            }
        const double sign = lead < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                s += (vectors.at(i, j) - mean[j]) * eigvecs[j][c];
            res.coords.at(i, c) = sign * s;
        }
    }
    return res;
}

std::string metrics_to_json(const MetricsReport& r) {
    nlohmann::json j{{"auc", r.auc}, {"logloss", r.logloss}, {"samples", r.samples}};
    if (r.nmi) j["nmi"] = *r.nmi;
    if (r.cluster_accuracy) j["cluster_accuracy"] = *r.cluster_accuracy;
    return j.dump(2);
}

}  // namespace a2
