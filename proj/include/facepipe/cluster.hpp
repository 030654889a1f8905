#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "facepipe/config.hpp"
#include "facepipe/types.hpp"

namespace facepipe {

/// 1 - dot(a, b) for unit vectors; range [0, 2].
double cosine_distance(std::span<const float> a, std::span<const float> b);

/// Dense pairwise cosine similarities for a row subset, row-major n*n.
/// Dots are accumulated sequentially in double so results do not depend on
/// the execution schedule.
std::vector<double> pairwise_similarity(const EmbeddingMatrix& matrix,
                                        std::span<const std::size_t> rows);

/// Per-point cluster labels; ids are dense starting at 0, noise = -1.
struct ClusterLabels {
    std::vector<int> labels;
    int n_clusters = 0;
};

/// DBSCAN over a precomputed similarity matrix. Neighborhood of p is
/// {q : sim(p,q) >= tau} including p itself; core points have >= min_pts
/// neighbors. Expansion scans points in ascending index order, so border
/// points reachable from several clusters go to the cluster discovered
/// first.
ClusterLabels dbscan_from_similarity(const std::vector<double>& sim, std::size_t n,
                                     double tau, int min_pts);

ClusterLabels dbscan(const EmbeddingMatrix& matrix, std::span<const std::size_t> rows,
                     double tau, int min_pts);

struct LargestCluster {
    std::optional<int> cluster_id; // none when every point is noise
    std::vector<std::size_t> members;
    double fraction = 0.0; // members / N
};

/// Largest non-noise cluster; ties break toward the smallest cluster id.
LargestCluster largest_cluster(const ClusterLabels& labels);

struct CalibrationResult {
    std::optional<double> tau;
    double fraction = 0.0;
    bool feasible = false;
};

/// Candidate thresholds: sim_hi, sim_hi - step, ... down to sim_lo.
std::vector<double> calibration_grid(const CleanConfig& config);

/// Walks the grid from the largest tau down and returns the first tau whose
/// largest-cluster fraction falls inside [band_lo, band_hi]. When no grid
/// point qualifies, reports the tau whose fraction is closest to the band
/// midpoint (ties toward larger tau) with feasible = false. min_pts is
/// clamped to the point count so singleton inputs still form a cluster.
CalibrationResult calibrate_tau(const EmbeddingMatrix& matrix,
                                std::span<const std::size_t> rows,
                                const CleanConfig& config);

CalibrationResult calibrate_tau_from_similarity(const std::vector<double>& sim, std::size_t n,
                                                const CleanConfig& config);

/// Mean of (1 - similarity to the normalized centroid). Zero for identical
/// points, invariant under row permutation (summation uses a canonical
/// order). Duplicated row indices are counted with multiplicity.
double dispersion(const EmbeddingMatrix& matrix, std::span<const std::size_t> rows);

} // namespace facepipe
