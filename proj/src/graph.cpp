#include "ccmnet/graph.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ccmnet {

DirectedGraph::DirectedGraph(int num_nodes, std::set<std::pair<int, int>> edges)
    : num_nodes_(num_nodes), edges_(std::move(edges)) {
    if (num_nodes_ <= 0) throw std::invalid_argument("graph: num_nodes must be positive");
    for (const auto& [i, j] : edges_) {
        if (i < 1 || i > num_nodes_ || j < 1 || j > num_nodes_)
            throw std::invalid_argument("graph: edge endpoint out of range");
    }
    for (int i = 1; i <= num_nodes_; ++i) edges_.insert({i, i});
}

std::vector<int> DirectedGraph::inNeighbors(int i) const {
    std::vector<int> out;
    for (int j = 1; j <= num_nodes_; ++j)
        if (hasEdge(j, i)) out.push_back(j);
    return out;
}

std::string DirectedGraph::fingerprint() const {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    mix(static_cast<std::uint64_t>(num_nodes_));
    for (const auto& [i, j] : edges_) {
        mix(static_cast<std::uint64_t>(i));
        mix(static_cast<std::uint64_t>(j));
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

UndirectedGraph::UndirectedGraph(int num_nodes, std::set<std::pair<int, int>> edges)
    : num_nodes_(num_nodes) {
    if (num_nodes_ <= 0) throw std::invalid_argument("graph: num_nodes must be positive");
    for (auto [i, j] : edges) {
        if (i < 1 || i > num_nodes_ || j < 1 || j > num_nodes_)
            throw std::invalid_argument("graph: edge endpoint out of range");
        if (i == j) throw std::invalid_argument("graph: undirected graph cannot have self-loops");
        edges_.insert({std::min(i, j), std::max(i, j)});
    }
}

bool UndirectedGraph::hasEdge(int i, int j) const {
    return edges_.count({std::min(i, j), std::max(i, j)}) > 0;
}

std::vector<int> UndirectedGraph::neighbors(int i) const {
    std::vector<int> out;
    for (int j = 1; j <= num_nodes_; ++j)
        if (j != i && hasEdge(i, j)) out.push_back(j);
    return out;
}

DirectedGraph graph_union(const DirectedGraph& g1, const DirectedGraph& g2) {
    if (g1.numNodes() != g2.numNodes())
        throw std::invalid_argument("graph_union: node counts differ");
    std::set<std::pair<int, int>> e = g1.edges();
    e.insert(g2.edges().begin(), g2.edges().end());
    return DirectedGraph(g1.numNodes(), std::move(e));
}

UndirectedGraph undirected_companion(const DirectedGraph& g) {
    std::set<std::pair<int, int>> e;
    for (const auto& [i, j] : g.edges())
        if (i != j) e.insert({std::min(i, j), std::max(i, j)});
    return UndirectedGraph(g.numNodes(), std::move(e));
}

ChordalityResult is_chordal(const UndirectedGraph& g) {
    const int n = g.numNodes();
    // Maximum-cardinality search, producing vertices in reverse elimination
    // order. Tie-break by lowest index.
    std::vector<int> weight(n + 1, 0);
    std::vector<bool> numbered(n + 1, false);
    std::vector<int> order;  // order[0] is the last vertex of the PEO
    order.reserve(n);
    for (int step = 0; step < n; ++step) {
        int best = -1;
        for (int v = 1; v <= n; ++v)
            if (!numbered[v] && (best == -1 || weight[v] > weight[best])) best = v;
        numbered[best] = true;
        order.push_back(best);
        for (int w : g.neighbors(best))
            if (!numbered[w]) ++weight[w];
    }
    std::vector<int> peo(order.rbegin(), order.rend());
    std::vector<int> pos(n + 1, 0);
    for (int k = 0; k < n; ++k) pos[peo[k]] = k;
    // PEO check: later neighbors of v minus its first later neighbor must all
    // be adjacent to that neighbor.
    for (int k = 0; k < n; ++k) {
        int v = peo[k];
        int first = -1;
        std::vector<int> later;
        for (int w : g.neighbors(v))
            if (pos[w] > k) later.push_back(w);
        for (int w : later)
            if (first == -1 || pos[w] < pos[first]) first = w;
        for (int w : later) {
            if (w == first) continue;
            if (!g.hasEdge(first, w)) return {false, {}};
        }
    }
    return {true, peo};
}

TriangulationResult triangulate(const UndirectedGraph& g) {
    const int n = g.numNodes();
    std::vector<std::vector<bool>> adj(n + 1, std::vector<bool>(n + 1, false));
    for (const auto& [i, j] : g.edges()) adj[i][j] = adj[j][i] = true;
    std::vector<bool> eliminated(n + 1, false);
    std::set<std::pair<int, int>> fill;

    auto fill_count = [&](int v) {
        std::vector<int> nb;
        for (int w = 1; w <= n; ++w)
            if (w != v && !eliminated[w] && adj[v][w]) nb.push_back(w);
        int c = 0;
        for (size_t a = 0; a < nb.size(); ++a)
            for (size_t b = a + 1; b < nb.size(); ++b)
                if (!adj[nb[a]][nb[b]]) ++c;
        return c;
    };

    for (int step = 0; step < n; ++step) {
        int best = -1, best_fill = 0;
        for (int v = 1; v <= n; ++v) {
            if (eliminated[v]) continue;
            int c = fill_count(v);
            if (best == -1 || c < best_fill) {
                best = v;
                best_fill = c;
            }
        }
        std::vector<int> nb;
        for (int w = 1; w <= n; ++w)
            if (w != best && !eliminated[w] && adj[best][w]) nb.push_back(w);
        for (size_t a = 0; a < nb.size(); ++a)
            for (size_t b = a + 1; b < nb.size(); ++b)
                if (!adj[nb[a]][nb[b]]) {
                    adj[nb[a]][nb[b]] = adj[nb[b]][nb[a]] = true;
                    fill.insert({std::min(nb[a], nb[b]), std::max(nb[a], nb[b])});
                }
        eliminated[best] = true;
    }

    std::set<std::pair<int, int>> e = g.edges();
    e.insert(fill.begin(), fill.end());
    return {UndirectedGraph(n, std::move(e)), std::move(fill)};
}

CliqueTree clique_tree(const UndirectedGraph& g) {
    auto chord = is_chordal(g);
    if (!chord.chordal)
        throw std::invalid_argument("clique_tree: graph is not chordal; triangulate first");
    const int n = g.numNodes();
    std::vector<int> pos(n + 1, 0);
    for (int k = 0; k < n; ++k) pos[chord.ordering[k]] = k;

    // Candidate cliques: v plus its later neighbors in the PEO; keep maximal.
    std::vector<std::vector<int>> cand;
    for (int k = 0; k < n; ++k) {
        int v = chord.ordering[k];
        std::vector<int> c{v};
        for (int w : g.neighbors(v))
            if (pos[w] > k) c.push_back(w);
        std::sort(c.begin(), c.end());
        cand.push_back(std::move(c));
    }
    std::vector<std::vector<int>> cliques;
    for (size_t a = 0; a < cand.size(); ++a) {
        bool maximal = true;
        for (size_t b = 0; b < cand.size() && maximal; ++b) {
            if (a == b || cand[a].size() > cand[b].size()) continue;
            if (cand[a] == cand[b] && a > b) { maximal = false; break; }
            if (cand[a] != cand[b] &&
                std::includes(cand[b].begin(), cand[b].end(), cand[a].begin(), cand[a].end()))
                maximal = false;
        }
        if (maximal) cliques.push_back(cand[a]);
    }
    std::sort(cliques.begin(), cliques.end());

    // Maximum-weight spanning forest on pairwise intersection sizes (Kruskal).
    const int l = static_cast<int>(cliques.size());
    struct Edge { int w, a, b; };
    std::vector<Edge> cedges;
    for (int a = 0; a < l; ++a)
        for (int b = a + 1; b < l; ++b) {
            std::vector<int> inter;
            std::set_intersection(cliques[a].begin(), cliques[a].end(), cliques[b].begin(),
                                  cliques[b].end(), std::back_inserter(inter));
            if (!inter.empty()) cedges.push_back({static_cast<int>(inter.size()), a, b});
        }
    std::sort(cedges.begin(), cedges.end(), [](const Edge& x, const Edge& y) {
        if (x.w != y.w) return x.w > y.w;
        if (x.a != y.a) return x.a < y.a;
        return x.b < y.b;
    });
    std::vector<int> parent(l);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    CliqueTree tree;
    tree.cliques = cliques;
    for (const Edge& e : cedges) {
        int ra = find(e.a), rb = find(e.b);
        if (ra == rb) continue;
        parent[ra] = rb;
        tree.tree_edges.insert({e.a, e.b});
    }
    return tree;
}

DirectedGraph make_banded_graph(int n, int h) {
    std::set<std::pair<int, int>> e;
    for (int i = 1; i <= n; ++i)
        for (int j = std::max(1, i - h); j <= std::min(n, i + h); ++j) e.insert({i, j});
    return DirectedGraph(n, std::move(e));
}

DirectedGraph make_path_graph(int n) { return make_banded_graph(n, 1); }

DirectedGraph make_complete_graph(int n) { return make_banded_graph(n, n); }

DirectedGraph make_empty_graph(int n) { return DirectedGraph(n, {}); }

DirectedGraph parse_graph_literal(const std::string& text) {
    auto open = text.find('(');
    auto close = text.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw std::invalid_argument("graph literal: expected name(args): " + text);
    std::string name = text.substr(0, open);
    std::string args = text.substr(open + 1, close - open - 1);
    auto comma = args.find(',');
    int n = std::stoi(comma == std::string::npos ? args : args.substr(0, comma));
    if (name == "path") return make_path_graph(n);
    if (name == "complete") return make_complete_graph(n);
    if (name == "empty") return make_empty_graph(n);
    if (name == "banded") {
        if (comma == std::string::npos)
            throw std::invalid_argument("graph literal: banded(N,h) needs two arguments");
        return make_banded_graph(n, std::stoi(args.substr(comma + 1)));
    }
    throw std::invalid_argument("graph literal: unknown generator " + name);
}

}  // namespace ccmnet
