#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mcpscope/kernels/exec.hpp"

namespace mcpscope::kernels {

/// Row-major point set: one row per point.
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Index of the nearest centroid (squared Euclidean) for every row; ties go to the
/// lower centroid index. Returns total inertia.
double assign_nearest(const Points& x, const Points& centroids, std::vector<int>& labels,
                      Exec exec);

/// Mean of the rows assigned to each centroid. Clusters left empty are reseeded with
/// the point farthest from its centroid that has not already been used. Returns the
/// number of reseeded clusters.
int update_centroids(const Points& x, std::vector<int>& labels, Points& centroids, Exec exec);

struct KMeansOptions {
    int k = 400;
    int n_init = 10;
    int max_iter = 300;
    double tol = 1e-8;  // relative inertia change
    std::uint64_t seed = 42;
    Exec exec = Exec::parallel;
};

struct KMeansResult {
    Points centroids;
    std::vector<int> labels;
    double inertia = 0;
    int iterations = 0;
    int best_restart = 0;
};

/// Lloyd's algorithm from k-means++ seeding, best of n_init restarts (restart r uses
/// seed + r). Throws std::invalid_argument when k exceeds the number of points.
KMeansResult kmeans(const Points& x, const KMeansOptions& opt);

}  // namespace mcpscope::kernels
