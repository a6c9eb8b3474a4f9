#ifndef CCMNET_GRAPH_HPP
#define CCMNET_GRAPH_HPP

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ccmnet {

/// Directed graph on nodes 1..N. Self-loops (i,i) are always present; the
/// constructor inserts them.
class DirectedGraph {
public:
    DirectedGraph(int num_nodes, std::set<std::pair<int, int>> edges);

    int numNodes() const { return num_nodes_; }
    const std::set<std::pair<int, int>>& edges() const { return edges_; }

    bool hasEdge(int i, int j) const { return edges_.count({i, j}) > 0; }

    /// In-neighbors of node i (nodes j with edge (j,i)), ascending, including i.
    std::vector<int> inNeighbors(int i) const;

    bool operator==(const DirectedGraph& other) const {
        return num_nodes_ == other.num_nodes_ && edges_ == other.edges_;
    }

    /// FNV-1a over the edge list; used as certificate fingerprint.
    std::string fingerprint() const;

private:
    int num_nodes_;
    std::set<std::pair<int, int>> edges_;
};

/// Undirected simple graph on nodes 1..N (no self-loops), edges stored as
/// ordered pairs (i<j).
class UndirectedGraph {
public:
    UndirectedGraph(int num_nodes, std::set<std::pair<int, int>> edges);

    int numNodes() const { return num_nodes_; }
    const std::set<std::pair<int, int>>& edges() const { return edges_; }

    bool hasEdge(int i, int j) const;
    std::vector<int> neighbors(int i) const;

    bool operator==(const UndirectedGraph& other) const {
        return num_nodes_ == other.num_nodes_ && edges_ == other.edges_;
    }

private:
    int num_nodes_;
    std::set<std::pair<int, int>> edges_;
};

/// Clique tree of a chordal graph: maximal cliques plus a spanning tree on
/// clique indices with the running-intersection property. Selectors give the
/// ordered member nodes of each clique (the rows kept by E_k).
struct CliqueTree {
    std::vector<std::vector<int>> cliques;        // each ascending
    std::set<std::pair<int, int>> tree_edges;     // clique-index pairs (a<b), 0-based
    const std::vector<int>& selector(int k) const { return cliques.at(k); }
    int size() const { return static_cast<int>(cliques.size()); }
};

DirectedGraph graph_union(const DirectedGraph& g1, const DirectedGraph& g2);

UndirectedGraph undirected_companion(const DirectedGraph& g);

/// Chordality via maximum-cardinality search + perfect-elimination check.
/// On success `ordering` holds a perfect elimination ordering.
struct ChordalityResult {
    bool chordal = false;
    std::vector<int> ordering;  // PEO (first eliminated first) when chordal
};
ChordalityResult is_chordal(const UndirectedGraph& g);

/// Greedy minimum-fill triangulation; deterministic tie-break by lowest node
/// index. Returns the chordal supergraph and the fill edges added.
struct TriangulationResult {
    UndirectedGraph graph;
    std::set<std::pair<int, int>> fill_edges;
};
TriangulationResult triangulate(const UndirectedGraph& g);

/// Maximal cliques + maximum-weight spanning tree on intersection sizes.
/// Throws if g is not chordal.
CliqueTree clique_tree(const UndirectedGraph& g);

/// Named generators used in config files. All directed with self-loops.
DirectedGraph make_path_graph(int n);      // bidirectional chain
DirectedGraph make_complete_graph(int n);
DirectedGraph make_banded_graph(int n, int h);  // (i,j) iff |i-j| <= h
DirectedGraph make_empty_graph(int n);     // self-loops only

/// Parses a graph literal: `path(N)`, `complete(N)`, `banded(N,h)`, `empty(N)`.
DirectedGraph parse_graph_literal(const std::string& text);

}  // namespace ccmnet

#endif
