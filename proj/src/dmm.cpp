#include "a2/dmm.hpp"

#include <cmath>
#include <stdexcept>

namespace a2 {

namespace {

double sq_dist(const Tensor& a, std::size_t ra, const Tensor& b, std::size_t rb) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        const double d = a.at(ra, j) - b.at(rb, j);
        s += d * d;
    }
    return s;
}

double row_norm(const Tensor& a, std::size_t r) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a.at(r, j) * a.at(r, j);
    return std::sqrt(s);
}

double cosine_sim(const Tensor& a, std::size_t ra, const Tensor& b, std::size_t rb,
                  double na, double nb) {
    double dot = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) dot += a.at(ra, j) * b.at(rb, j);
    return dot / (na * nb);
}

}  // namespace

QuantizeResult quantize(const Tensor& latents, const Tensor& codebook, QuantizeMetric metric) {
    if (latents.cols() != codebook.cols())
        throw std::invalid_argument("quantize: latent width " + std::to_string(latents.cols()) +
                                    " vs codebook width " + std::to_string(codebook.cols()));
    const std::size_t B = latents.rows(), m = codebook.rows();
    QuantizeResult out;
    out.indices.resize(B);
    out.codes = Tensor({B, latents.cols()});
    for (std::size_t i = 0; i < B; ++i) {
        QuantizeMetric use = metric;
        double zn = 0.0;
        if (metric == QuantizeMetric::cosine) {
            zn = row_norm(latents, i);
            if (zn == 0.0) use = QuantizeMetric::squared_euclidean;
        }
        int best = 0;
        double best_score = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            double score;
            if (use == QuantizeMetric::squared_euclidean) {
                score = sq_dist(latents, i, codebook, j);
            } else {
                const double cn = row_norm(codebook, j);
                // codebook rows of zero norm score worst under cosine
                score = cn == 0.0 ? 2.0 : -cosine_sim(latents, i, codebook, j, zn, cn);
            }
            if (j == 0 || score < best_score) {
                best_score = score;
                best = static_cast<int>(j);
            }
        }
        out.indices[i] = best;
        for (std::size_t j = 0; j < latents.cols(); ++j)
            out.codes.at(i, j) = codebook.at(static_cast<std::size_t>(best), j);
    }
    return out;
}

Tensor soft_routing_weights(const Tensor& latents, const Tensor& codebook,
                            SoftSimilarity similarity) {
    if (latents.cols() != codebook.cols())
        throw std::invalid_argument("soft_routing_weights: width mismatch");
    const std::size_t B = latents.rows(), m = codebook.rows();
    Tensor alpha({B, m});
    for (std::size_t i = 0; i < B; ++i) {
        SoftSimilarity use = similarity;
        double zn = 0.0;
        if (similarity == SoftSimilarity::cosine) {
            zn = row_norm(latents, i);
            if (zn == 0.0) use = SoftSimilarity::neg_squared_distance;
        }
        std::vector<double> sim(m);
        for (std::size_t j = 0; j < m; ++j) {
            if (use == SoftSimilarity::neg_squared_distance) {
                sim[j] = -sq_dist(latents, i, codebook, j);
            } else {
                const double cn = row_norm(codebook, j);
                sim[j] = cn == 0.0 ? -1.0 : cosine_sim(latents, i, codebook, j, zn, cn);
            }
        }
        double mx = sim[0];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, sim[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            alpha.at(i, j) = std::exp(sim[j] - mx);
            sum += alpha.at(i, j);
        }
        for (std::size_t j = 0; j < m; ++j) alpha.at(i, j) /= sum;
    }
    return alpha;
}

std::vector<std::size_t> usage_histogram(const std::vector<int>& assignments, std::size_t m) {
    std::vector<std::size_t> h(m, 0);
    for (int k : assignments) {
        if (k < 0 || static_cast<std::size_t>(k) >= m)
            throw std::invalid_argument("usage_histogram: index " + std::to_string(k) +
                                        " out of range for m=" + std::to_string(m));
        ++h[static_cast<std::size_t>(k)];
    }
    return h;
}

std::vector<std::size_t> UsageTracker::update(const std::vector<int>& assignments,
                                              const Tensor& latents, Parameter& codebook,
                                              bool rebalance, std::size_t patience,
                                              std::mt19937_64& rng) {
    const std::size_t m = staleness_.size();
    std::vector<std::size_t> hist = usage_histogram(assignments, m);
    for (std::size_t j = 0; j < m; ++j)
        staleness_[j] = hist[j] > 0 ? 0 : staleness_[j] + 1;
    if (rebalance && latents.rows() > 0) {
        std::uniform_int_distribution<std::size_t> pick(0, latents.rows() - 1);
        for (std::size_t j = 0; j < m; ++j) {
            if (staleness_[j] <= patience) continue;
            const std::size_t r = pick(rng);
            for (std::size_t c = 0; c < latents.cols(); ++c) {
                codebook.value.at(j, c) = latents.at(r, c);
                codebook.moment1.at(j, c) = 0.0;
                codebook.moment2.at(j, c) = 0.0;
            }
            staleness_[j] = 0;
        }
    }
    return hist;
}

}  // namespace a2
