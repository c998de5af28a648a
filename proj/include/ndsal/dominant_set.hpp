#pragma once

#include "ndsal/numerics.hpp"
#include "ndsal/spectral.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ndsal {

// Vertices of one cluster with their symmetric affinity weights (zero
// diagonal, entries in [0, 1]).
struct ClusterGraph {
    std::vector<SampleId> ids;
    Matrix weights;
};

// Throws InvalidArgument when the weights are not square, asymmetric beyond
// 1e-9, carry self-loops, or fall outside [0, 1].
ClusterGraph make_cluster_graph(std::vector<SampleId> ids, Matrix weights);

// Gaussian affinities between the rows of `members` with the median
// within-cluster distance as bandwidth. Falls back to the largest distance
// when the median is zero, and to unit affinities for coincident points.
ClusterGraph cluster_graph_from_features(const FeatureMatrix& members);

struct ParticipationVector {
    std::vector<SampleId> ids;
    std::vector<double> z;     // on the simplex
    double objective = 0.0;    // z' A z
    int iterations = 0;
    bool converged = false;
    bool degenerate = false;   // all-zero affinities; z is the barycenter
};

struct ReplicatorOptions {
    double tolerance = 1e-6;   // max-norm step
    int max_iterations = 1000;
};

// Called with iteration 0 (the barycenter) and every subsequent iterate.
using ReplicatorObserver = std::function<void(int iteration, std::span<const double> z, double objective)>;

// Maximizes z' A z over the simplex with z_i <- z_i (Az)_i / (z' A z),
// starting from the barycenter.
ParticipationVector replicator_dynamics(const ClusterGraph& graph, const ReplicatorOptions& options = {},
                                        const ReplicatorObserver& observer = {});

// Participation values at or below this count as zero.
inline constexpr double kPositiveParticipation = 1e-8;

struct DominantPartition {
    double tau = 0.0;
    double cutoff_multiplier = 1.0;
    std::vector<SampleId> dominant_ids;     // z_i > tau
    std::vector<SampleId> nondominant_ids;  // z_i <= tau
};

// tau = multiplier * median of the positive participation values.
DominantPartition partition(const ParticipationVector& participation, double cutoff_multiplier = 1.0);

struct NonDominantPool {
    DominantPartition split;      // at the final multiplier
    std::size_t shortfall = 0;    // required - cluster size, when the cluster is too small
    std::vector<double> multipliers_tried;
};

// Repartitions with the cutoff multiplied by 10 until the non-dominant set
// holds at least `required` ids or covers the whole cluster.
NonDominantPool escalate_cutoff(const ParticipationVector& participation, std::size_t required);

struct NdsOptions {
    ReplicatorOptions replicator{};
};

struct ClusterNds {
    ParticipationVector participation;
    NonDominantPool pool;
};

// Per cluster of `assignment` (whose labels align with the rows of `pool`):
// affinity graph, replicator dynamics, adaptive median cutoff.
std::vector<ClusterNds> nds_pools(const FeatureMatrix& pool, const ClusterAssignment& assignment,
                                  std::size_t required_per_cluster, const NdsOptions& options = {});

}  // namespace ndsal
