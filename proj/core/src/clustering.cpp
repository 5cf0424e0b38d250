#include "evmarket/clustering.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

#include "evmarket/csv.hpp"
#include "evmarket/rng.hpp"

namespace evmarket::cluster {

void ClusterProblem::validate() const {
    const int n = static_cast<int>(points.size());
    if (k < 1) throw std::invalid_argument("cluster: k must be >= 1");
    if (size_min < 0 || size_max < size_min) {
        throw std::invalid_argument("cluster: bad size bounds");
    }
    if (k * size_min > n || n > k * size_max) {
        throw std::invalid_argument(
            "cluster: infeasible size bounds for " + std::to_string(n) + " points");
    }
}

namespace {

// Successive-shortest-path min-cost max-flow with Dijkstra potentials.
// Costs are nonnegative squared distances; graphs here are tiny.
class MinCostFlow {
public:
    explicit MinCostFlow(int n) : head_(n, -1), potential_(n, 0.0) {}

    void add_edge(int from, int to, int capacity, double cost) {
        edges_.push_back({to, head_[from], capacity, cost});
        head_[from] = static_cast<int>(edges_.size()) - 1;
        edges_.push_back({from, head_[to], 0, -cost});
        head_[to] = static_cast<int>(edges_.size()) - 1;
    }

    // Sends up to max_flow units; returns (flow, cost).
    std::pair<int, double> solve(int source, int sink, int max_flow) {
        int flow = 0;
        double cost = 0.0;
        const int n = static_cast<int>(head_.size());
        while (flow < max_flow) {
            std::vector<double> dist(n, std::numeric_limits<double>::infinity());
            std::vector<int> prev_edge(n, -1);
            using Item = std::pair<double, int>;
            std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
            dist[source] = 0.0;
            pq.push({0.0, source});
            while (!pq.empty()) {
                auto [d, u] = pq.top();
                pq.pop();
                if (d > dist[u]) continue;
                for (int e = head_[u]; e != -1; e = edges_[e].next) {
                    const auto& edge = edges_[e];
                    if (edge.capacity <= 0) continue;
                    const double nd =
                        dist[u] + edge.cost + potential_[u] - potential_[edge.to];
                    if (nd < dist[edge.to]) {
                        dist[edge.to] = nd;
                        prev_edge[edge.to] = e;
                        pq.push({nd, edge.to});
                    }
                }
            }
            if (prev_edge[sink] == -1) break;
            for (int v = 0; v < n; ++v) {
                if (dist[v] < std::numeric_limits<double>::infinity()) {
                    potential_[v] += dist[v];
                }
            }
            // Unit capacities on point edges make per-augment bottleneck 1 in
            // practice, but compute it anyway.
            int push = max_flow - flow;
            for (int v = sink; v != source;) {
                const auto& e = edges_[prev_edge[v]];
                push = std::min(push, e.capacity);
                v = edges_[prev_edge[v] ^ 1].to;
            }
            for (int v = sink; v != source;) {
                auto& e = edges_[prev_edge[v]];
                e.capacity -= push;
                edges_[prev_edge[v] ^ 1].capacity += push;
                cost += push * e.cost;
                v = edges_[prev_edge[v] ^ 1].to;
            }
            flow += push;
        }
        return {flow, cost};
    }

    // Residual capacity of the forward edge added as the idx-th add_edge call.
    int forward_capacity(int idx) const { return edges_[2 * idx].capacity; }

private:
    struct Edge {
        int to;
        int next;
        int capacity;
        double cost;
    };
    std::vector<Edge> edges_;
    std::vector<int> head_;
    std::vector<double> potential_;
};

}  // namespace

double assignment_cost(const ClusterProblem& problem,
                       const std::vector<int>& membership,
                       const std::vector<Eigen::Vector2d>& centers) {
    double cost = 0.0;
    for (std::size_t i = 0; i < problem.points.size(); ++i) {
        cost += (problem.points[i].coord - centers[static_cast<std::size_t>(
                                               membership[i])]).squaredNorm();
    }
    return cost;
}

std::vector<int> assign(const ClusterProblem& problem,
                        const std::vector<Eigen::Vector2d>& centers) {
    problem.validate();
    const int n = static_cast<int>(problem.points.size());
    const int k = problem.k;

    // Nodes: source, points, clusters, pool, sink. Each cluster has a
    // mandatory arc of capacity size_min straight to the sink and an optional
    // arc of capacity size_max - size_min into a shared pool capped at
    // n - k*size_min. Total sink capacity is then exactly n, so a max flow of
    // n saturates every mandatory arc: every cluster receives at least
    // size_min and at most size_max points.
    const int source = 0;
    const int point0 = 1;
    const int cluster0 = point0 + n;
    const int pool = cluster0 + k;
    const int sink = pool + 1;
    MinCostFlow mcf(sink + 1);

    // The first n*k add_edge calls are the point->cluster arcs; the solution
    // is read back from their residual capacities.
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < k; ++c) {
            const double w = (problem.points[static_cast<std::size_t>(i)].coord -
                              centers[static_cast<std::size_t>(c)])
                                 .squaredNorm();
            mcf.add_edge(point0 + i, cluster0 + c, 1, w);
        }
    }
    for (int i = 0; i < n; ++i) mcf.add_edge(source, point0 + i, 1, 0.0);
    for (int c = 0; c < k; ++c) {
        mcf.add_edge(cluster0 + c, sink, problem.size_min, 0.0);
        mcf.add_edge(cluster0 + c, pool, problem.size_max - problem.size_min, 0.0);
    }
    mcf.add_edge(pool, sink, n - k * problem.size_min, 0.0);

    const auto [flow, cost] = mcf.solve(source, sink, n);
    (void)cost;
    if (flow != n) {
        throw std::invalid_argument("assign: infeasible size bounds");
    }

    std::vector<int> membership(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < k; ++c) {
            if (mcf.forward_capacity(i * k + c) == 0) {
                membership[static_cast<std::size_t>(i)] = c;
                break;
            }
        }
    }
    return membership;
}

std::vector<Eigen::Vector2d> update_centers(
    const ClusterProblem& problem, const std::vector<int>& membership,
    const std::vector<Eigen::Vector2d>& previous) {
    std::vector<Eigen::Vector2d> centers = previous;
    for (int c = 0; c < problem.k; ++c) {
        Eigen::Vector2d sum = Eigen::Vector2d::Zero();
        int count = 0;
        for (std::size_t i = 0; i < problem.points.size(); ++i) {
            if (membership[i] == c) {
                sum += problem.points[i].coord;
                ++count;
            }
        }
        if (count >= problem.size_min && count <= problem.size_max && count > 0) {
            centers[static_cast<std::size_t>(c)] = sum / static_cast<double>(count);
        }
    }
    return centers;
}

ClusterSolution cluster_cs(const ClusterProblem& problem, std::uint64_t seed,
                           IterationTrace* trace) {
    problem.validate();
    const int n = static_cast<int>(problem.points.size());
    if (problem.k > n) throw std::invalid_argument("cluster: k exceeds point count");

    // Seeded sample of k distinct points as initial centers.
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng::Engine eng(rng::derive(seed, "kmeans-init"));
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(
            eng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(order[i - 1], order[j]);
    }
    std::vector<Eigen::Vector2d> centers;
    for (int c = 0; c < problem.k; ++c) {
        centers.push_back(problem.points[order[static_cast<std::size_t>(c)]].coord);
    }

    ClusterSolution sol;
    const int max_iterations = 1000;
    for (int iter = 0; iter < max_iterations; ++iter) {
        sol.membership = assign(problem, centers);
        sol.objective = assignment_cost(problem, sol.membership, centers);
        sol.iterations = iter + 1;
        if (trace) trace->steps.push_back({centers, sol.membership, sol.objective});
        const auto next = update_centers(problem, sol.membership, centers);
        bool fixed = true;
        for (int c = 0; c < problem.k; ++c) {
            if ((next[static_cast<std::size_t>(c)] - centers[static_cast<std::size_t>(c)])
                    .cwiseAbs()
                    .maxCoeff() != 0.0) {
                fixed = false;
                break;
            }
        }
        centers = next;
        if (fixed) break;
    }
    sol.centers = centers;
    sol.objective = assignment_cost(problem, sol.membership, centers);
    return sol;
}

void write_membership_csv(const std::filesystem::path& path,
                          const ClusterProblem& problem,
                          const std::vector<int>& membership) {
    csv::Table t;
    t.header = {"cs_id", "cluster"};
    for (std::size_t i = 0; i < problem.points.size(); ++i) {
        t.rows.push_back({problem.points[i].cs_id, std::to_string(membership[i])});
    }
    csv::write_file(path, t);
}

}  // namespace evmarket::cluster
