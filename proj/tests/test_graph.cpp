#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "ccmnet/graph.hpp"
#include "doctest.h"

using namespace ccmnet;

namespace {

// Brute-force chordality oracle: search for a chordless cycle of length >= 4.
bool chordal_brute_force(const UndirectedGraph& g) {
    const int n = g.numNodes();
    std::vector<int> cycle;
    std::vector<bool> used(n + 1, false);
    std::function<bool(int)> extend = [&](int start) -> bool {
        int v = cycle.back();
        for (int w = 1; w <= n; ++w) {
            if (!g.hasEdge(v, w)) continue;
            if (w == start && cycle.size() >= 4) {
                // check chordlessness
                bool chordless = true;
                for (size_t a = 0; a < cycle.size() && chordless; ++a)
                    for (size_t b = a + 2; b < cycle.size(); ++b) {
                        if (a == 0 && b == cycle.size() - 1) continue;
                        if (g.hasEdge(cycle[a], cycle[b])) {
                            chordless = false;
                            break;
                        }
                    }
                if (chordless) return true;
            }
            if (!used[w] && w > start) {  // canonical: start is smallest
                used[w] = true;
                cycle.push_back(w);
                if (extend(start)) return true;
                cycle.pop_back();
                used[w] = false;
            }
        }
        return false;
    };
    for (int s = 1; s <= n; ++s) {
        cycle = {s};
        std::fill(used.begin(), used.end(), false);
        used[s] = true;
        if (extend(s)) return false;
    }
    return true;
}

UndirectedGraph random_graph(int n, double p, std::mt19937& rng) {
    std::uniform_real_distribution<double> dist(0, 1);
    std::set<std::pair<int, int>> e;
    for (int i = 1; i <= n; ++i)
        for (int j = i + 1; j <= n; ++j)
            if (dist(rng) < p) e.insert({i, j});
    return UndirectedGraph(n, std::move(e));
}

}  // namespace

TEST_CASE("directed graph inserts self-loops and validates endpoints") {
    DirectedGraph g(3, {{1, 2}});
    CHECK(g.hasEdge(1, 1));
    CHECK(g.hasEdge(2, 2));
    CHECK(g.hasEdge(3, 3));
    CHECK(g.hasEdge(1, 2));
    CHECK(!g.hasEdge(2, 1));
    CHECK_THROWS(DirectedGraph(2, {{1, 3}}));
}

TEST_CASE("graph_union") {
    DirectedGraph g(3, {{1, 2}});
    DirectedGraph h(3, {{2, 3}});
    CHECK(graph_union(g, g) == g);
    auto u = graph_union(g, h);
    CHECK(u.hasEdge(1, 2));
    CHECK(u.hasEdge(2, 3));
    CHECK(u.edges().size() == 5);  // 3 self-loops + 2
    CHECK_THROWS(graph_union(g, DirectedGraph(4, {})));

    auto path4 = make_path_graph(4);
    DirectedGraph star(4, {{1, 2}, {1, 3}, {1, 4}, {2, 1}, {3, 1}, {4, 1}});
    auto both = graph_union(path4, star);
    for (const auto& e : path4.edges()) CHECK(both.hasEdge(e.first, e.second));
    for (const auto& e : star.edges()) CHECK(both.hasEdge(e.first, e.second));
}

TEST_CASE("undirected companion") {
    CHECK(undirected_companion(DirectedGraph(2, {{1, 2}})).edges() ==
          std::set<std::pair<int, int>>{{1, 2}});
    CHECK(undirected_companion(DirectedGraph(2, {{1, 2}, {2, 1}})).edges() ==
          std::set<std::pair<int, int>>{{1, 2}});
    CHECK(undirected_companion(make_empty_graph(3)).edges().empty());
}

TEST_CASE("companion commutes with union") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> node(1, 5);
    for (int trial = 0; trial < 30; ++trial) {
        std::set<std::pair<int, int>> ea, eb;
        for (int k = 0; k < 6; ++k) ea.insert({node(rng), node(rng)});
        for (int k = 0; k < 6; ++k) eb.insert({node(rng), node(rng)});
        DirectedGraph a(5, ea), b(5, eb);
        auto lhs = undirected_companion(graph_union(a, b));
        std::set<std::pair<int, int>> rhs = undirected_companion(a).edges();
        auto cb = undirected_companion(b).edges();
        rhs.insert(cb.begin(), cb.end());
        CHECK(lhs.edges() == rhs);
    }
}

TEST_CASE("is_chordal on known graphs") {
    UndirectedGraph c4(4, {{1, 2}, {2, 3}, {3, 4}, {1, 4}});
    CHECK(!is_chordal(c4).chordal);
    UndirectedGraph c4_chord(4, {{1, 2}, {2, 3}, {3, 4}, {1, 4}, {1, 3}});
    CHECK(is_chordal(c4_chord).chordal);
    // trees are chordal
    UndirectedGraph tree(5, {{1, 2}, {1, 3}, {3, 4}, {3, 5}});
    CHECK(is_chordal(tree).chordal);
}

TEST_CASE("is_chordal matches brute-force on random graphs up to 7 nodes") {
    std::mt19937 rng(13);
    for (int n = 3; n <= 7; ++n)
        for (int trial = 0; trial < 40; ++trial) {
            auto g = random_graph(n, 0.45, rng);
            CHECK(is_chordal(g).chordal == chordal_brute_force(g));
        }
}

TEST_CASE("triangulate") {
    auto path = undirected_companion(make_path_graph(5));
    auto tp = triangulate(path);
    CHECK(tp.fill_edges.empty());

    UndirectedGraph c4(4, {{1, 2}, {2, 3}, {3, 4}, {1, 4}});
    auto tc = triangulate(c4);
    CHECK(tc.fill_edges.size() == 1);  // either chord is minimal
    CHECK(is_chordal(tc.graph).chordal);

    auto comp = undirected_companion(make_complete_graph(6));
    CHECK(triangulate(comp).fill_edges.empty());
}

TEST_CASE("triangulate output is chordal and contains input, random graphs") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        auto g = random_graph(7, 0.4, rng);
        auto t = triangulate(g);
        CHECK(is_chordal(t.graph).chordal);
        for (const auto& e : g.edges()) CHECK(t.graph.hasEdge(e.first, e.second));
        std::set<std::pair<int, int>> expect_fill;
        for (const auto& e : t.graph.edges())
            if (!g.hasEdge(e.first, e.second)) expect_fill.insert(e);
        CHECK(t.fill_edges == expect_fill);
    }
}

TEST_CASE("clique_tree on path graph: N-1 cliques of size 2") {
    for (int n : {3, 5, 8}) {
        auto tree = clique_tree(undirected_companion(make_path_graph(n)));
        CHECK(tree.size() == n - 1);
        for (const auto& c : tree.cliques) CHECK(c.size() == 2);
        CHECK(static_cast<int>(tree.tree_edges.size()) == n - 2);
    }
}

TEST_CASE("clique_tree on complete graph: single clique") {
    auto tree = clique_tree(undirected_companion(make_complete_graph(5)));
    CHECK(tree.size() == 1);
    CHECK(tree.cliques[0] == std::vector<int>{1, 2, 3, 4, 5});
}

TEST_CASE("clique_tree on two triangles sharing an edge") {
    UndirectedGraph g(4, {{1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}});
    auto tree = clique_tree(g);
    REQUIRE(tree.size() == 2);
    CHECK(tree.cliques[0] == std::vector<int>{1, 2, 3});
    CHECK(tree.cliques[1] == std::vector<int>{2, 3, 4});
    CHECK(tree.tree_edges.size() == 1);
}

TEST_CASE("clique_tree rejects non-chordal input") {
    UndirectedGraph c4(4, {{1, 2}, {2, 3}, {3, 4}, {1, 4}});
    CHECK_THROWS(clique_tree(c4));
}

TEST_CASE("clique cover and running-intersection property on random chordal graphs") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        auto g = triangulate(random_graph(7, 0.35, rng)).graph;
        auto tree = clique_tree(g);
        // every node covered, every edge inside some clique
        std::set<int> covered;
        for (const auto& c : tree.cliques) covered.insert(c.begin(), c.end());
        CHECK(static_cast<int>(covered.size()) == g.numNodes());
        for (const auto& [i, j] : g.edges()) {
            bool inside = false;
            for (const auto& c : tree.cliques)
                inside = inside || (std::count(c.begin(), c.end(), i) &&
                                    std::count(c.begin(), c.end(), j));
            CHECK(inside);
        }
        // running intersection: cliques containing v induce a connected subtree
        for (int v = 1; v <= g.numNodes(); ++v) {
            std::vector<int> holding;
            for (int k = 0; k < tree.size(); ++k)
                if (std::count(tree.cliques[k].begin(), tree.cliques[k].end(), v))
                    holding.push_back(k);
            if (holding.size() <= 1) continue;
            std::set<int> reach{holding[0]};
            bool grew = true;
            while (grew) {
                grew = false;
                for (const auto& [a, b] : tree.tree_edges) {
                    bool ha = std::count(holding.begin(), holding.end(), a) > 0;
                    bool hb = std::count(holding.begin(), holding.end(), b) > 0;
                    if (ha && hb) {
                        if (reach.count(a) && !reach.count(b)) reach.insert(b), grew = true;
                        if (reach.count(b) && !reach.count(a)) reach.insert(a), grew = true;
                    }
                }
            }
            CHECK(reach.size() == holding.size());
        }
    }
}

TEST_CASE("graph literals") {
    CHECK(parse_graph_literal("path(4)") == make_path_graph(4));
    CHECK(parse_graph_literal("complete(3)") == make_complete_graph(3));
    CHECK(parse_graph_literal("banded(6,2)") == make_banded_graph(6, 2));
    CHECK(parse_graph_literal("empty(5)") == make_empty_graph(5));
    CHECK_THROWS(parse_graph_literal("ring(4)"));
}
