#include "mcpscope/kernels/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>

namespace mcpscope::kernels {

namespace {

/// Squared distances from row i to every centroid, written into d2.
/// The same per-row code runs in both execution modes, so results agree bit for bit.
inline void row_distances(const Points& x, const Points& c, const Eigen::VectorXd& c_norm,
                          Eigen::Index i, Eigen::VectorXd& d2) {
    d2.noalias() = c * x.row(i).transpose();
    const double xn = x.row(i).squaredNorm();
    for (Eigen::Index j = 0; j < c.rows(); ++j) d2(j) = std::max(0.0, xn + c_norm(j) - 2.0 * d2(j));
}

inline std::pair<int, double> argmin(const Eigen::VectorXd& d2) {
    int best = 0;
    double bd = d2(0);
    for (Eigen::Index j = 1; j < d2.size(); ++j) {
        if (d2(j) < bd) {
            bd = d2(j);
            best = static_cast<int>(j);
        }
    }
    return {best, bd};
}

Points plus_plus_init(const Points& x, int k, std::mt19937_64& rng, Exec exec) {
    const Eigen::Index n = x.rows();
    Points c(k, x.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    c.row(0) = x.row(first(rng));
    std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    for (int j = 1; j < k; ++j) {
        const auto prev = c.row(j - 1);
        auto update = [&](Eigen::Index i) {
            double d = (x.row(i) - prev).squaredNorm();
            if (d < nearest[i]) nearest[i] = d;
        };
        if (exec == Exec::serial) {
            for (Eigen::Index i = 0; i < n; ++i) update(i);
        } else {
#pragma omp parallel for schedule(static)
            for (Eigen::Index i = 0; i < n; ++i) update(i);
        }
        double total = 0;
        for (double d : nearest) total += d;
        Eigen::Index pick = 0;
        if (total > 0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng), acc = 0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += nearest[i];
                if (acc >= target && nearest[i] > 0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);  // all points coincide with chosen centroids
        }
        c.row(j) = x.row(pick);
    }
    return c;
}

}  // namespace

double assign_nearest(const Points& x, const Points& centroids, std::vector<int>& labels,
                      Exec exec) {
    const Eigen::Index n = x.rows();
    labels.resize(static_cast<std::size_t>(n));
    std::vector<double> best(static_cast<std::size_t>(n));
    Eigen::VectorXd c_norm = centroids.rowwise().squaredNorm();
    if (exec == Exec::serial) {
        Eigen::VectorXd d2(centroids.rows());
        for (Eigen::Index i = 0; i < n; ++i) {
            row_distances(x, centroids, c_norm, i, d2);
            std::tie(labels[i], best[i]) = argmin(d2);
        }
    } else {
#pragma omp parallel
        {
            Eigen::VectorXd d2(centroids.rows());
#pragma omp for schedule(static)
            for (Eigen::Index i = 0; i < n; ++i) {
                row_distances(x, centroids, c_norm, i, d2);
                std::tie(labels[i], best[i]) = argmin(d2);
            }
        }
    }
    double inertia = 0;
    for (double d : best) inertia += d;  // fixed order
    return inertia;
}

int update_centroids(const Points& x, std::vector<int>& labels, Points& centroids, Exec exec) {
    const Eigen::Index n = x.rows(), dim = x.cols(), k = centroids.rows();
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++counts[l];
    Points sums = Points::Zero(k, dim);
    // Parallel over columns: each column sums points in index order in both modes.
    auto column = [&](Eigen::Index d) {
        for (Eigen::Index i = 0; i < n; ++i) sums(labels[i], d) += x(i, d);
    };
    if (exec == Exec::serial) {
        for (Eigen::Index d = 0; d < dim; ++d) column(d);
    } else {
#pragma omp parallel for schedule(static)
        for (Eigen::Index d = 0; d < dim; ++d) column(d);
    }
    for (Eigen::Index j = 0; j < k; ++j) {
        if (counts[j] > 0) centroids.row(j) = sums.row(j) / static_cast<double>(counts[j]);
    }
    int reseeded = 0;
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (Eigen::Index j = 0; j < k; ++j) {
        if (counts[j] > 0) continue;
        Eigen::Index far = -1;
        double fd = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (used[i] || counts[labels[i]] <= 1) continue;
            double d = (x.row(i) - centroids.row(labels[i])).squaredNorm();
            if (d > fd) {
                fd = d;
                far = i;
            }
        }
        if (far < 0) continue;
        used[far] = true;
        --counts[labels[far]];
        labels[far] = static_cast<int>(j);
        counts[j] = 1;
        centroids.row(j) = x.row(far);
        ++reseeded;
    }
    return reseeded;
}

KMeansResult kmeans(const Points& x, const KMeansOptions& opt) {
    if (opt.k <= 0) throw std::invalid_argument("k must be positive");
    if (x.rows() < opt.k) {
        throw std::invalid_argument("k-means: fewer points than clusters");
    }
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, opt.n_init); ++r) {
        std::mt19937_64 rng(opt.seed + static_cast<std::uint64_t>(r));
        Points c = plus_plus_init(x, opt.k, rng, opt.exec);
        std::vector<int> labels, previous;
        double inertia = assign_nearest(x, c, labels, opt.exec);
        int it = 0;
        for (it = 1; it <= opt.max_iter; ++it) {
            previous = labels;
            update_centroids(x, labels, c, opt.exec);
            double next = assign_nearest(x, c, labels, opt.exec);
            bool stable = labels == previous;
            bool small = inertia - next <= opt.tol * std::max(inertia, 1e-300);
            inertia = next;
            if (stable || small) break;
        }
        if (inertia < best.inertia) {
            best.centroids = std::move(c);
            best.labels = std::move(labels);
            best.inertia = inertia;
            best.iterations = std::min(it, opt.max_iter);
            best.best_restart = r;
        }
    }
    return best;
}

}  // namespace mcpscope::kernels
