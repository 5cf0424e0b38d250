// Size-constrained K-means over station coordinates. The assignment step is
// solved exactly as a minimum-cost transportation problem with per-cluster
// size bounds; centers update to member means only while the cluster size
// stays within bounds, otherwise they are retained.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace evmarket::cluster {

struct Point {
    std::string cs_id;
    Eigen::Vector2d coord;  // (latitude, longitude), treated as planar
};

struct ClusterProblem {
    std::vector<Point> points;
    int k = 2;
    int size_min = 0;
    int size_max = 0;

    void validate() const;  // feasibility: k*size_min <= N <= k*size_max
};

struct ClusterSolution {
    std::vector<int> membership;            // point -> cluster index
    std::vector<Eigen::Vector2d> centers;
    double objective = 0.0;
    int iterations = 0;
};

// Squared-distance cost of a membership at fixed centers.
double assignment_cost(const ClusterProblem& problem,
                       const std::vector<int>& membership,
                       const std::vector<Eigen::Vector2d>& centers);

// Exact size-bounded assignment minimizing the summed squared distance.
std::vector<int> assign(const ClusterProblem& problem,
                        const std::vector<Eigen::Vector2d>& centers);

// Mean of members when the cluster size lies within bounds; previous center
// retained otherwise.
std::vector<Eigen::Vector2d> update_centers(
    const ClusterProblem& problem, const std::vector<int>& membership,
    const std::vector<Eigen::Vector2d>& previous);

struct IterationTrace {
    struct Step {
        std::vector<Eigen::Vector2d> centers;  // centers used for the assignment
        std::vector<int> membership;
        double objective;
    };
    std::vector<Step> steps;
};

// Alternates assign/update from seeded distinct-point initial centers until
// the centers reach a fixed point (guarded at 1000 iterations).
ClusterSolution cluster_cs(const ClusterProblem& problem, std::uint64_t seed,
                           IterationTrace* trace = nullptr);

void write_membership_csv(const std::filesystem::path& path,
                          const ClusterProblem& problem,
                          const std::vector<int>& membership);

}  // namespace evmarket::cluster
