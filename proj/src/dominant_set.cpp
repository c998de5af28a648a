#include "ndsal/dominant_set.hpp"

#include "ndsal/error.hpp"
#include "ndsal/simd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ndsal {

ClusterGraph make_cluster_graph(std::vector<SampleId> ids, Matrix weights) {
    const std::size_t n = ids.size();
    if (n == 0) throw InvalidArgument("cluster graph needs at least one vertex");
    if (weights.rows() != n || weights.cols() != n) {
        throw InvalidArgument("cluster graph weights must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (weights(i, i) != 0.0) throw InvalidArgument("cluster graph has a self-loop at vertex " + std::to_string(i));
        for (std::size_t j = 0; j < n; ++j) {
            const double w = weights(i, j);
            if (!(w >= 0.0 && w <= 1.0)) {
                throw InvalidArgument("cluster graph weight outside [0,1] at (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
            }
            if (std::abs(w - weights(j, i)) > 1e-9) {
                throw InvalidArgument("cluster graph weights are not symmetric at (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
            }
        }
    }
    return {std::move(ids), std::move(weights)};
}

ClusterGraph cluster_graph_from_features(const FeatureMatrix& members) {
    const std::size_t n = members.rows();
    if (n == 1) return make_cluster_graph(members.ids(), Matrix(1, 1));
    const DistanceMatrix dist = pairwise_distances(members);
    double sigma = median_off_diagonal(dist.values);
    if (!(sigma > 0.0)) sigma = *std::max_element(dist.values.data().begin(), dist.values.data().end());
    if (!(sigma > 0.0)) sigma = 1.0;
    AffinityMatrix affinity = to_affinity(dist, sigma);
    return make_cluster_graph(members.ids(), std::move(affinity.values));
}

ParticipationVector replicator_dynamics(const ClusterGraph& graph, const ReplicatorOptions& options,
                                        const ReplicatorObserver& observer) {
    const std::size_t n = graph.ids.size();
    const auto& kern = simd::kernels();

    ParticipationVector out;
    out.ids = graph.ids;
    out.z.assign(n, 1.0 / static_cast<double>(n));
    if (n == 1) {
        out.converged = true;
        if (observer) observer(0, out.z, 0.0);
        return out;
    }

    std::vector<double> az(n);
    auto multiply = [&](const std::vector<double>& z) {
        for (std::size_t i = 0; i < n; ++i) az[i] = kern.dot(graph.weights.row(i).data(), z.data(), n);
        return kern.dot(z.data(), az.data(), n);
    };

    double objective = multiply(out.z);
    out.objective = objective;
    if (observer) observer(0, out.z, objective);
    if (!(objective > 0.0)) {
        out.degenerate = true;
        out.converged = true;
        return out;
    }

    std::vector<double> next(n);
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] = out.z[i] * az[i] / objective;
            sum += next[i];
        }
        double step = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] /= sum;
            step = std::max(step, std::abs(next[i] - out.z[i]));
        }
        out.z.swap(next);
        objective = multiply(out.z);
        out.objective = objective;
        out.iterations = iter;
        if (observer) observer(iter, out.z, objective);
        if (step < options.tolerance) {
            out.converged = true;
            break;
        }
    }
    return out;
}

DominantPartition partition(const ParticipationVector& participation, double cutoff_multiplier) {
    if (!(cutoff_multiplier >= 1.0)) throw InvalidArgument("cutoff multiplier must be at least 1");
    std::vector<double> positive;
    for (double v : participation.z) {
        if (v > kPositiveParticipation) positive.push_back(v);
    }
    if (positive.empty()) {
        throw InvalidArgument("degenerate participation vector: no value above " +
                              std::to_string(kPositiveParticipation));
    }
    std::ranges::sort(positive);
    const std::size_t m = positive.size();
    const double median = m % 2 == 1 ? positive[m / 2] : 0.5 * (positive[m / 2 - 1] + positive[m / 2]);

    DominantPartition out;
    out.cutoff_multiplier = cutoff_multiplier;
    out.tau = cutoff_multiplier * median;
    for (std::size_t i = 0; i < participation.z.size(); ++i) {
        if (participation.z[i] > out.tau) {
            out.dominant_ids.push_back(participation.ids[i]);
        } else {
            out.nondominant_ids.push_back(participation.ids[i]);
        }
    }
    return out;
}

NonDominantPool escalate_cutoff(const ParticipationVector& participation, std::size_t required) {
    if (required < 1) throw InvalidArgument("required non-dominant count must be at least 1");
    const std::size_t size = participation.z.size();
    const std::size_t target = std::min(required, size);

    NonDominantPool out;
    double multiplier = 1.0;
    out.split = partition(participation, multiplier);
    out.multipliers_tried.push_back(multiplier);
    // tau grows tenfold per step while every z_i <= 1, so this ends once tau
    // exceeds the largest participation value.
    while (out.split.nondominant_ids.size() < target) {
        multiplier *= 10.0;
        out.split = partition(participation, multiplier);
        out.multipliers_tried.push_back(multiplier);
    }
    out.shortfall = required > size ? required - size : 0;
    return out;
}

std::vector<ClusterNds> nds_pools(const FeatureMatrix& pool, const ClusterAssignment& assignment,
                                  std::size_t required_per_cluster, const NdsOptions& options) {
    if (required_per_cluster < 1) throw InvalidArgument("required_per_cluster must be at least 1");
    if (assignment.labels.size() != pool.rows()) {
        throw InvalidArgument("cluster assignment does not cover the pool");
    }
    std::vector<std::vector<std::size_t>> rows(assignment.k);
    for (std::size_t i = 0; i < pool.rows(); ++i) rows[static_cast<std::size_t>(assignment.labels[i])].push_back(i);

    std::vector<ClusterNds> out;
    out.reserve(assignment.k);
    for (std::size_t c = 0; c < assignment.k; ++c) {
        if (rows[c].empty()) throw InvalidArgument("cluster " + std::to_string(c) + " is empty");
        std::ranges::sort(rows[c], [&](std::size_t a, std::size_t b) { return pool.id(a) < pool.id(b); });
        const ClusterGraph graph = cluster_graph_from_features(pool.subset(rows[c]));
        ClusterNds entry;
        entry.participation = replicator_dynamics(graph, options.replicator);
        entry.pool = escalate_cutoff(entry.participation, required_per_cluster);
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace ndsal
