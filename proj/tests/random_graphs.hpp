#pragma once

// Random strongly connected graphs with a known positive circulation.

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "artcal/network.hpp"

namespace testing_support {

struct RandomCirculation {
  artcal::NetworkGraph graph;
  Eigen::VectorXd flow;  // strictly positive, A f = 0
};

// A Hamiltonian cycle through shuffled nodes (node "0" is one of them) plus
// extra random links; every extra link u->v is closed by the cycle path
// v->u, and the flow is a positive combination of these cycles.
inline RandomCirculation random_circulation(std::mt19937_64& rng, int max_nodes = 12, int max_links = 30) {
  std::uniform_int_distribution<int> node_count(2, max_nodes);
  const int n = node_count(rng);
  std::uniform_int_distribution<int> extra_count(0, max_links - n);
  const int extra = extra_count(rng);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> pos(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pos[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;

  std::vector<artcal::Node> nodes;
  for (int i = 0; i < n; ++i) nodes.push_back({std::to_string(i), 0.0, 0.0});
  std::vector<artcal::Link> links;
  std::vector<double> flow;
  std::uniform_real_distribution<double> weight(50.0, 400.0);
  std::uniform_real_distribution<double> length(0.05, 0.5);
  auto add = [&](int u, int v) {
    artcal::Link l;
    l.id = "L" + std::to_string(links.size());
    l.from_node = std::to_string(u);
    l.to_node = std::to_string(v);
    l.length_mi = length(rng);
    links.push_back(l);
    flow.push_back(0.0);
  };
  const double base = weight(rng);
  for (int i = 0; i < n; ++i) {
    add(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>((i + 1) % n)]);
    flow.back() = base;
  }
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int k = 0; k < extra; ++k) {
    const int u = pick(rng);
    int v = pick(rng);
    if (u == v) v = (v + 1) % n;
    add(u, v);
    const double w = weight(rng);
    flow.back() += w;
    // cycle path from v back to u
    for (int i = pos[static_cast<std::size_t>(v)]; i != pos[static_cast<std::size_t>(u)]; i = (i + 1) % n)
      flow[static_cast<std::size_t>(i)] += w;
  }
  RandomCirculation out{artcal::NetworkGraph(nodes, links, {}, {}), Eigen::VectorXd(static_cast<Eigen::Index>(flow.size()))};
  for (std::size_t i = 0; i < flow.size(); ++i) out.flow(static_cast<Eigen::Index>(i)) = flow[i];
  return out;
}

}  // namespace testing_support
