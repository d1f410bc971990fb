#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "cellseg/raster.hpp"

namespace cellseg {

/// One matched (gt, pred) pair with its overlap statistics.
struct MatchPair {
    uint16_t gt = 0;
    uint16_t pred = 0;
    int64_t intersection = 0;
    double iou = 0.0;
};

/// One-to-one instance correspondence. Every id of the source OverlapTable
/// appears exactly once across pairs / unmatched lists.
struct Matching {
    std::vector<MatchPair> pairs;          // sorted by (gt, pred)
    std::vector<uint16_t> unmatched_gt;    // sorted
    std::vector<uint16_t> unmatched_pred;  // sorted

    int64_t total_intersection() const {
        int64_t s = 0;
        for (const auto& p : pairs) s += p.intersection;
        return s;
    }
};

/// For each gt id, the pred ids whose intersection exceeds half the gt area.
struct CoverageMap {
    std::map<uint16_t, std::vector<uint16_t>> covered_by;
};

enum class MatchObjective { TotalIntersection, TotalIouAboveTau };

namespace detail {

struct WEdge {
    uint16_t g = 0;
    uint16_t p = 0;
    int64_t w = 0;  // always > 0
};

// IoU on a fixed integer grid so matching totals compare exactly.
constexpr int64_t kIouScale = int64_t{1} << 30;

inline int64_t quantized_iou(int64_t inter, int64_t uni) {
    return static_cast<int64_t>((static_cast<__int128>(inter) * kIouScale) / uni);
}

inline double exact_iou(int64_t inter, int64_t gt_area, int64_t pred_area) {
    return static_cast<double>(inter) / static_cast<double>(gt_area + pred_area - inter);
}

// Exact max-weight assignment on a dense n x m matrix (n <= m), absent edges
// weigh 0 (equivalent to leaving the row unmatched). Shortest-augmenting-path
// with integer potentials. Returns the maximum total; row_to_col optional.
inline int64_t hungarian_max(int n, int m, const std::vector<int64_t>& w,
                             std::vector<int>* row_to_col = nullptr) {
    if (n == 0 || m == 0) {
        if (row_to_col) row_to_col->assign(n, -1);
        return 0;
    }
    constexpr int64_t kInf = std::numeric_limits<int64_t>::max() / 4;
    int64_t max_w = 0;
    for (int64_t v : w) max_w = std::max(max_w, v);
    auto cost = [&](int i, int j) { return max_w - w[static_cast<size_t>(i) * m + j]; };

    std::vector<int64_t> u(n + 1, 0), v(m + 1, 0), minv(m + 1);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        minv.assign(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            int64_t delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const int64_t cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    int64_t total = 0;
    if (row_to_col) row_to_col->assign(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (p[j] == 0) continue;
        total += w[static_cast<size_t>(p[j] - 1) * m + (j - 1)];
        if (row_to_col) (*row_to_col)[p[j] - 1] = j - 1;
    }
    return total;
}

// Max total weight over one-to-one matchings of the given edge list,
// excluding blocked endpoints.
inline int64_t max_total(const std::vector<WEdge>& edges,
                         const std::vector<char>& g_blocked,
                         const std::vector<char>& p_blocked,
                         const std::vector<int>& g_index,
                         const std::vector<int>& p_index) {
    // compact the free endpoints that actually occur in usable edges
    std::vector<int> g_local(g_index.size(), -1), p_local(p_index.size(), -1);
    int ng = 0, np = 0;
    for (const auto& e : edges) {
        const int gi = g_index[e.g], pi = p_index[e.p];
        if (g_blocked[gi] || p_blocked[pi]) continue;
        if (g_local[gi] < 0) g_local[gi] = ng++;
        if (p_local[pi] < 0) p_local[pi] = np++;
    }
    if (ng == 0 || np == 0) return 0;
    const bool transpose = ng > np;
    const int n = transpose ? np : ng;
    const int m = transpose ? ng : np;
    std::vector<int64_t> w(static_cast<size_t>(n) * m, 0);
    for (const auto& e : edges) {
        const int gi = g_index[e.g], pi = p_index[e.p];
        if (g_blocked[gi] || p_blocked[pi]) continue;
        const int r = transpose ? p_local[pi] : g_local[gi];
        const int c = transpose ? g_local[gi] : p_local[pi];
        w[static_cast<size_t>(r) * m + c] = std::max(w[static_cast<size_t>(r) * m + c], e.w);
    }
    return hungarian_max(n, m, w);
}

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Optimal matching over positive-weight edges; among optima returns the one
// whose sorted (gt, pred) pair list is lexicographically smallest. Solved per
// connected component: the component optimum is computed once, then pairs are
// fixed greedily in lex order whenever fixing keeps the optimum reachable.
inline std::vector<WEdge> lex_min_optimal_matching(std::vector<WEdge> edges) {
    if (edges.empty()) return {};
    std::sort(edges.begin(), edges.end(), [](const WEdge& a, const WEdge& b) {
        return a.g != b.g ? a.g < b.g : a.p < b.p;
    });

    std::vector<int> g_index(65536, -1), p_index(65536, -1);
    std::vector<uint16_t> g_ids, p_ids;
    for (const auto& e : edges) {
        if (g_index[e.g] < 0) {
            g_index[e.g] = static_cast<int>(g_ids.size());
            g_ids.push_back(e.g);
        }
        if (p_index[e.p] < 0) {
            p_index[e.p] = static_cast<int>(p_ids.size());
            p_ids.push_back(e.p);
        }
    }
    const int ng = static_cast<int>(g_ids.size());
    const int np = static_cast<int>(p_ids.size());

    DisjointSet ds(ng + np);
    for (const auto& e : edges) ds.unite(g_index[e.g], ng + p_index[e.p]);

    std::vector<std::vector<WEdge>> comp_edges;
    std::vector<int> comp_of(ng + np, -1);
    int ncomp = 0;
    for (const auto& e : edges) {
        const int root = ds.find(g_index[e.g]);
        if (comp_of[root] < 0) {
            comp_of[root] = ncomp++;
            comp_edges.emplace_back();
        }
        comp_edges[comp_of[root]].push_back(e);  // stays lex-sorted per component
    }

    std::vector<WEdge> fixed;
    std::vector<char> g_blocked(ng, 0), p_blocked(np, 0);
    for (const auto& comp : comp_edges) {
        const int64_t opt = max_total(comp, g_blocked, p_blocked, g_index, p_index);
        int64_t have = 0;
        for (const auto& e : comp) {
            const int gi = g_index[e.g], pi = p_index[e.p];
            if (g_blocked[gi] || p_blocked[pi]) continue;
            g_blocked[gi] = 1;
            p_blocked[pi] = 1;
            const int64_t rest = max_total(comp, g_blocked, p_blocked, g_index, p_index);
            if (have + e.w + rest == opt) {
                have += e.w;
                fixed.push_back(e);
            } else {
                g_blocked[gi] = 0;
                p_blocked[pi] = 0;
            }
        }
    }
    std::sort(fixed.begin(), fixed.end(), [](const WEdge& a, const WEdge& b) {
        return a.g != b.g ? a.g < b.g : a.p < b.p;
    });
    return fixed;
}

inline Matching finish_matching(const OverlapTable& table, const std::vector<WEdge>& chosen) {
    Matching m;
    std::vector<char> g_used(65536, 0), p_used(65536, 0);
    for (const auto& e : chosen) {
        const int64_t inter = table.intersections.at({e.g, e.p});
        MatchPair pair;
        pair.gt = e.g;
        pair.pred = e.p;
        pair.intersection = inter;
        pair.iou = exact_iou(inter, table.gt_areas.at(e.g), table.pred_areas.at(e.p));
        m.pairs.push_back(pair);
        g_used[e.g] = 1;
        p_used[e.p] = 1;
    }
    for (const auto& [id, area] : table.gt_areas)
        if (!g_used[id]) m.unmatched_gt.push_back(id);
    for (const auto& [id, area] : table.pred_areas)
        if (!p_used[id]) m.unmatched_pred.push_back(id);
    return m;
}

inline std::vector<WEdge> objective_edges(const OverlapTable& table, MatchObjective obj,
                                          double tau) {
    std::vector<WEdge> edges;
    for (const auto& [key, inter] : table.intersections) {
        if (inter <= 0) continue;
        const auto [g, p] = key;
        if (obj == MatchObjective::TotalIntersection) {
            edges.push_back({g, p, inter});
        } else {
            const int64_t uni = table.gt_areas.at(g) + table.pred_areas.at(p) - inter;
            if (static_cast<double>(inter) >= tau * static_cast<double>(uni))
                edges.push_back({g, p, quantized_iou(inter, uni)});
        }
    }
    return edges;
}

}  // namespace detail

/// Max-total-intersection one-to-one matching (exact, integer weights).
inline Matching max_weight_matching(const OverlapTable& table) {
    auto edges = detail::objective_edges(table, MatchObjective::TotalIntersection, 0.0);
    return detail::finish_matching(table, detail::lex_min_optimal_matching(std::move(edges)));
}

/// One-to-one matching over pairs with IoU >= tau, maximizing total IoU
/// (quantized to a fixed integer grid so optima compare exactly).
inline Matching iou_threshold_matching(const OverlapTable& table, double tau = 0.5) {
    if (!(tau > 0.0 && tau <= 1.0))
        throw std::invalid_argument("iou_threshold_matching: tau must be in (0, 1]");
    auto edges = detail::objective_edges(table, MatchObjective::TotalIouAboveTau, tau);
    return detail::finish_matching(table, detail::lex_min_optimal_matching(std::move(edges)));
}

/// Strict majority coverage: pred p covers gt g iff intersection > gt_area / 2.
inline CoverageMap majority_coverage_map(const OverlapTable& table) {
    CoverageMap cov;
    for (const auto& [id, area] : table.gt_areas) cov.covered_by[id];  // every gt listed
    for (const auto& [key, inter] : table.intersections) {
        const auto [g, p] = key;
        if (2 * inter > table.gt_areas.at(g)) cov.covered_by[g].push_back(p);
    }
    return cov;
}

/// Exhaustive matching oracle, same objective and tie-break as the fast paths.
/// Guarded to at most 8 instances per side.
inline Matching brute_force_matching(const OverlapTable& table,
                                     MatchObjective objective = MatchObjective::TotalIntersection,
                                     double tau = 0.5) {
    if (table.gt_areas.size() > 8 || table.pred_areas.size() > 8)
        throw std::invalid_argument("brute_force_matching: more than 8 instances per side");

    auto edges = detail::objective_edges(table, objective, tau);
    std::sort(edges.begin(), edges.end(), [](const detail::WEdge& a, const detail::WEdge& b) {
        return a.g != b.g ? a.g < b.g : a.p < b.p;
    });

    std::vector<uint16_t> g_ids, p_ids;
    for (const auto& [id, area] : table.gt_areas) g_ids.push_back(id);
    for (const auto& [id, area] : table.pred_areas) p_ids.push_back(id);

    // adjacency by gt index, preds in increasing order
    std::vector<std::vector<std::pair<int, int64_t>>> adj(g_ids.size());
    for (const auto& e : edges) {
        const int gi = static_cast<int>(std::lower_bound(g_ids.begin(), g_ids.end(), e.g) -
                                        g_ids.begin());
        const int pi = static_cast<int>(std::lower_bound(p_ids.begin(), p_ids.end(), e.p) -
                                        p_ids.begin());
        adj[gi].emplace_back(pi, e.w);
    }

    int64_t best_w = -1;
    std::vector<std::pair<uint16_t, uint16_t>> best_pairs, cur_pairs;
    int64_t cur_w = 0;

    auto consider = [&]() {
        if (cur_w > best_w || (cur_w == best_w && cur_pairs < best_pairs)) {
            best_w = cur_w;
            best_pairs = cur_pairs;
        }
    };
    auto rec = [&](auto&& self, size_t gi, uint32_t used) -> void {
        if (gi == adj.size()) {
            consider();
            return;
        }
        self(self, gi + 1, used);  // leave this gt unmatched
        for (const auto& [pi, w] : adj[gi]) {
            if (used & (1u << pi)) continue;
            cur_pairs.emplace_back(g_ids[gi], p_ids[pi]);
            cur_w += w;
            self(self, gi + 1, used | (1u << pi));
            cur_pairs.pop_back();
            cur_w -= w;
        }
    };
    rec(rec, 0, 0);

    std::vector<detail::WEdge> chosen;
    for (const auto& [g, p] : best_pairs) {
        for (const auto& e : edges)
            if (e.g == g && e.p == p) {
                chosen.push_back(e);
                break;
            }
    }
    return detail::finish_matching(table, chosen);
}

}  // namespace cellseg
