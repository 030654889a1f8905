#include "facepipe/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "facepipe/errors.hpp"

namespace facepipe {

namespace {

double dot_d(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

// Round to the calibration grid's resolution so repeated subtraction does not
// drift (0.9 - 12 * 0.05 should land exactly on 0.3).
double snap(double x) { return std::round(x * 1e9) / 1e9; }

double sorted_sum(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
}

} // namespace

double cosine_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size())
        throw ContractError("cosine_distance: dimension mismatch (" + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()) + ")");
    if (a.empty()) throw ContractError("cosine_distance: empty vectors");
    return 1.0 - dot_d(a, b);
}

std::vector<double> pairwise_similarity(const EmbeddingMatrix& matrix,
                                        std::span<const std::size_t> rows) {
    const std::size_t n = rows.size();
    std::vector<double> sim(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        sim[i * n + i] = dot_d(matrix.row(rows[i]), matrix.row(rows[i]));
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = dot_d(matrix.row(rows[i]), matrix.row(rows[j]));
            sim[i * n + j] = s;
            sim[j * n + i] = s;
        }
    }
    return sim;
}

ClusterLabels dbscan_from_similarity(const std::vector<double>& sim, std::size_t n,
                                     double tau, int min_pts) {
    if (sim.size() != n * n) throw ContractError("dbscan: similarity matrix size mismatch");
    if (min_pts < 1) throw ContractError("dbscan: min_pts must be >= 1");

    // A point is core when its neighborhood (itself included) has min_pts
    // members.
    std::vector<char> core(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        int count = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (sim[i * n + j] >= tau) ++count;
        core[i] = count >= min_pts;
    }

    ClusterLabels out;
    out.labels.assign(n, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (out.labels[i] != -1 || !core[i]) continue;
        const int cluster = next++;
        out.labels[i] = cluster;
        std::deque<std::size_t> frontier{i};
        while (!frontier.empty()) {
            const std::size_t p = frontier.front();
            frontier.pop_front();
            for (std::size_t q = 0; q < n; ++q) {
                if (out.labels[q] != -1 || sim[p * n + q] < tau) continue;
                out.labels[q] = cluster;
                if (core[q]) frontier.push_back(q);
            }
        }
    }
    out.n_clusters = next;
    return out;
}

ClusterLabels dbscan(const EmbeddingMatrix& matrix, std::span<const std::size_t> rows,
                     double tau, int min_pts) {
    return dbscan_from_similarity(pairwise_similarity(matrix, rows), rows.size(), tau, min_pts);
}

LargestCluster largest_cluster(const ClusterLabels& labels) {
    LargestCluster out;
    if (labels.labels.empty()) return out;
    std::vector<std::size_t> sizes(static_cast<std::size_t>(labels.n_clusters), 0);
    for (int l : labels.labels)
        if (l >= 0) ++sizes[static_cast<std::size_t>(l)];

    std::size_t best = 0;
    bool found = false;
    for (int c = 0; c < labels.n_clusters; ++c) {
        if (sizes[static_cast<std::size_t>(c)] > best) { // strict: ties keep the smaller id
            best = sizes[static_cast<std::size_t>(c)];
            out.cluster_id = c;
            found = true;
        }
    }
    if (!found) return out;
    for (std::size_t i = 0; i < labels.labels.size(); ++i)
        if (labels.labels[i] == *out.cluster_id) out.members.push_back(i);
    out.fraction = static_cast<double>(out.members.size()) / static_cast<double>(labels.labels.size());
    return out;
}

std::vector<double> calibration_grid(const CleanConfig& config) {
    std::vector<double> grid;
    for (double t = config.sim_hi; t >= config.sim_lo - 1e-9; t -= config.tau_step)
        grid.push_back(snap(t));
    return grid;
}

CalibrationResult calibrate_tau_from_similarity(const std::vector<double>& sim, std::size_t n,
                                                const CleanConfig& config) {
    if (n == 0) throw ContractError("calibrate_tau: no points");
    const std::vector<double> grid = calibration_grid(config);
    if (grid.empty()) throw ContractError("calibrate_tau: empty threshold grid");
    const int min_pts = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(config.min_pts), n));
    const double mid = 0.5 * (config.band_lo + config.band_hi);

    CalibrationResult closest;
    double closest_gap = 0.0;
    for (double tau : grid) {
        ClusterLabels labels = dbscan_from_similarity(sim, n, tau, min_pts);
        const double frac = largest_cluster(labels).fraction;
        if (frac >= config.band_lo && frac <= config.band_hi)
            return CalibrationResult{tau, frac, true};
        const double gap = std::abs(frac - mid);
        if (!closest.tau || gap < closest_gap) { // strict: ties keep the larger tau
            closest = CalibrationResult{tau, frac, false};
            closest_gap = gap;
        }
    }
    return closest;
}

CalibrationResult calibrate_tau(const EmbeddingMatrix& matrix,
                                std::span<const std::size_t> rows,
                                const CleanConfig& config) {
    return calibrate_tau_from_similarity(pairwise_similarity(matrix, rows), rows.size(), config);
}

double dispersion(const EmbeddingMatrix& matrix, std::span<const std::size_t> rows) {
    if (rows.empty()) throw ContractError("dispersion: no rows");
    const std::size_t dim = matrix.dim();

    // Per-dimension sums are taken over sorted values so any permutation of
    // the rows produces bit-identical output.
    std::vector<double> centroid(dim, 0.0);
    std::vector<double> column(rows.size());
    for (std::size_t d = 0; d < dim; ++d) {
        for (std::size_t i = 0; i < rows.size(); ++i)
            column[i] = static_cast<double>(matrix.row(rows[i])[d]);
        centroid[d] = sorted_sum(column) / static_cast<double>(rows.size());
    }
    double norm_sq = 0.0;
    for (double c : centroid) norm_sq += c * c;
    const double norm = std::sqrt(norm_sq);
    if (!(norm > 0.0))
        throw ContractError("dispersion: centroid has zero norm");
    for (double& c : centroid) c /= norm;

    std::vector<double> dists(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::span<const float> r = matrix.row(rows[i]);
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += static_cast<double>(r[d]) * centroid[d];
        // Unit rows can dot to just above 1 in float; distance is >= 0 by definition.
        dists[i] = std::max(0.0, 1.0 - dot);
    }
    return sorted_sum(dists) / static_cast<double>(rows.size());
}

} // namespace facepipe
